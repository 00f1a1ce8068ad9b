//! Fixed-width sentence vectors.

use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;

use super::text::tokenize;
use super::FeatureError;
use crate::ingest::EditorId;

pub const SENTENCE_DIM: usize = 512;

pub trait SentenceEncoder: Send + Sync {
    /// A `SENTENCE_DIM`-long vector for an editor's cleaned sentences.
    fn encode(&self, editor: &EditorId, sentences: &[String]) -> Result<Vec<f64>, FeatureError>;
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Bucket and sign of a token: `h % 512`, negative when bit 32 of `h` is set.
pub fn hash_slot(token: &str) -> (usize, f64) {
    let h = fnv1a64(token.as_bytes());
    let sign = if (h >> 32) & 1 == 1 { -1.0 } else { 1.0 };
    ((h % SENTENCE_DIM as u64) as usize, sign)
}

/// Signed feature hashing of all tokens, L2-normalized.
#[derive(Debug, Clone, Copy, Default)]
pub struct HashingEncoder;

impl HashingEncoder {
    pub fn raw(sentences: &[String]) -> Vec<f64> {
        let mut v = vec![0.0; SENTENCE_DIM];
        for s in sentences {
            for tok in tokenize(s) {
                let (bucket, sign) = hash_slot(&tok);
                v[bucket] += sign;
            }
        }
        v
    }
}

impl SentenceEncoder for HashingEncoder {
    fn encode(&self, _editor: &EditorId, sentences: &[String]) -> Result<Vec<f64>, FeatureError> {
        let mut v = Self::raw(sentences);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut v {
                *x /= norm;
            }
        }
        Ok(v)
    }
}

#[derive(Deserialize)]
struct EmbeddingLine {
    editor: EditorId,
    vector: Vec<f64>,
}

/// Precomputed vectors from an ndjson file of `{"editor":..,"vector":[..]}`.
#[derive(Debug, Clone, Default)]
pub struct FileEncoder {
    vectors: HashMap<EditorId, Vec<f64>>,
}

impl FileEncoder {
    pub fn load(path: &Path) -> Result<Self, FeatureError> {
        let text = std::fs::read_to_string(path).map_err(|e| FeatureError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let mut vectors = HashMap::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let parsed: EmbeddingLine = serde_json::from_str(line).map_err(|e| FeatureError::Io {
                path: format!("{}:{}", path.display(), i + 1),
                message: e.to_string(),
            })?;
            if parsed.vector.len() != SENTENCE_DIM || parsed.vector.iter().any(|x| !x.is_finite()) {
                return Err(FeatureError::Io {
                    path: format!("{}:{}", path.display(), i + 1),
                    message: format!("vector must hold {SENTENCE_DIM} finite values"),
                });
            }
            vectors.insert(parsed.editor, parsed.vector);
        }
        Ok(FileEncoder { vectors })
    }

    pub fn from_map(vectors: HashMap<EditorId, Vec<f64>>) -> Self {
        FileEncoder { vectors }
    }
}

impl SentenceEncoder for FileEncoder {
    fn encode(&self, editor: &EditorId, _sentences: &[String]) -> Result<Vec<f64>, FeatureError> {
        self.vectors
            .get(editor)
            .cloned()
            .ok_or_else(|| FeatureError::EmbeddingMissing(editor.clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn who() -> EditorId {
        EditorId::new("E").unwrap()
    }

    #[test]
    fn empty_text_zero_vector() {
        let v = HashingEncoder.encode(&who(), &[]).unwrap();
        assert_eq!(v, vec![0.0; SENTENCE_DIM]);
    }

    #[test]
    fn a_b_trace() {
        assert_eq!(hash_slot("a"), (140, 1.0));
        assert_eq!(hash_slot("b"), (421, 1.0));
        let raw = HashingEncoder::raw(&["a b".into()]);
        let nz: Vec<_> = raw.iter().enumerate().filter(|(_, &x)| x != 0.0).collect();
        assert_eq!(nz, vec![(140, &1.0), (421, &1.0)]);
        let v = HashingEncoder.encode(&who(), &["a b".into()]).unwrap();
        assert_eq!(v[140], 1.0 / 2f64.sqrt());
    }

    #[test]
    fn deterministic_unit_norm() {
        let s = vec!["i love wikipedia.".to_string(), "editing is fun!".to_string()];
        let a = HashingEncoder.encode(&who(), &s).unwrap();
        assert_eq!(a, HashingEncoder.encode(&who(), &s).unwrap());
        let n: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-12);
    }

    #[test]
    fn file_encoder_missing_editor() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("emb.ndjson");
        let v: Vec<String> = (0..SENTENCE_DIM).map(|i| (i as f64 / 512.0).to_string()).collect();
        std::fs::write(&path, format!("{{\"editor\":\"E\",\"vector\":[{}]}}\n", v.join(","))).unwrap();
        let enc = FileEncoder::load(&path).unwrap();
        assert_eq!(enc.encode(&who(), &[]).unwrap()[256], 0.5);
        let other = EditorId::new("F").unwrap();
        assert!(matches!(enc.encode(&other, &[]), Err(FeatureError::EmbeddingMissing(_))));
    }
}
