use std::collections::HashSet;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{EditorId, IngestError, FIXTURE_SCHEMA_VERSION};

/// One row of the missing-editors listing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingEntry {
    pub editor: EditorId,
    pub last_edit_date: NaiveDate,
}

#[derive(Deserialize)]
struct RawEntry {
    editor: String,
    last_edit_date: String,
}

/// Reads a missing-list snapshot (`missing_list.ndjson`).
pub fn load_missing_list(path: &Path) -> Result<Vec<MissingEntry>, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
    parse_missing_list(&text, &path.display().to_string())
}

/// Parses snapshot text. An optional first line `{"schema_version": ...}`
/// is checked against the supported version. Duplicate usernames keep the
/// first occurrence.
pub fn parse_missing_list(text: &str, file: &str) -> Result<Vec<MissingEntry>, IngestError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parse_err = |message: String| IngestError::Parse {
            file: file.to_string(),
            line: line_no,
            message,
        };
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
        if let Some(version) = value.get("schema_version") {
            let found = version.as_str().unwrap_or_default();
            if found != FIXTURE_SCHEMA_VERSION {
                return Err(IngestError::SchemaMismatch {
                    expected: FIXTURE_SCHEMA_VERSION.into(),
                    found: found.into(),
                });
            }
            continue;
        }
        let raw: RawEntry = serde_json::from_value(value).map_err(|e| parse_err(e.to_string()))?;
        let editor = EditorId::new(raw.editor.clone())
            .map_err(|e| parse_err(format!("entry {:?}: {e}", raw.editor)))?;
        let last_edit_date = NaiveDate::parse_from_str(&raw.last_edit_date, "%Y-%m-%d")
            .map_err(|e| {
                parse_err(format!(
                    "entry {:?}: bad last_edit_date {:?}: {e}",
                    raw.editor, raw.last_edit_date
                ))
            })?;
        if !seen.insert(editor.clone()) {
            log::warn!("{file} line {line_no}: duplicate missing-list entry {editor} ignored");
            continue;
        }
        out.push(MissingEntry {
            editor,
            last_edit_date,
        });
    }
    Ok(out)
}
