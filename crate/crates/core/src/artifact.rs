//! Line-delimited artifact files with a provenance header line.

use std::io::Write;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

pub const ARTIFACT_SCHEMA_VERSION: &str = "1";

/// Identifies the run that produced an artifact.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    kind: String,
    schema_version: String,
    #[serde(flatten)]
    provenance: Provenance,
}

#[derive(Debug, thiserror::Error)]
pub enum ArtifactError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> ArtifactError {
    ArtifactError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `{"kind":..,"schema_version":..,"config_hash":..,"seed":..}` followed
/// by one JSON record per line.
pub fn write_ndjson<T: Serialize>(
    path: &Path,
    kind: &str,
    provenance: &Provenance,
    records: &[T],
) -> Result<(), ArtifactError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    let file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let header = Header {
        kind: kind.into(),
        schema_version: ARTIFACT_SCHEMA_VERSION.into(),
        provenance: provenance.clone(),
    };
    writeln!(w, "{}", serde_json::to_string(&header).expect("header")).map_err(|e| io_err(path, e))?;
    for r in records {
        writeln!(w, "{}", serde_json::to_string(r).expect("record serializes"))
            .map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Reads records written by [`write_ndjson`], skipping the header line.
pub fn read_ndjson<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, ArtifactError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || (i == 0 && line.contains("\"schema_version\"")) {
            continue;
        }
        out.push(serde_json::from_str(line).map_err(|e| ArtifactError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Writes a single pretty-printed JSON document.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ArtifactError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    std::fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, ArtifactError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| ArtifactError::Parse {
        path: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })
}

/// Writes CSV text preceded by a `# config_hash=..,seed=..` comment line.
pub fn write_csv(path: &Path, provenance: &Provenance, body: &str) -> Result<(), ArtifactError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    let text = format!(
        "# config_hash={},seed={}\n{body}",
        provenance.config_hash, provenance.seed
    );
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_skipped_on_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.ndjson");
        let prov = Provenance { config_hash: "abc".into(), seed: 7 };
        write_ndjson(&path, "numbers", &prov, &[1u32, 2, 3]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("{\"kind\":\"numbers\""));
        assert!(text.lines().next().unwrap().contains("\"config_hash\":\"abc\""));
        assert_eq!(read_ndjson::<u32>(&path).unwrap(), vec![1, 2, 3]);
    }
}
