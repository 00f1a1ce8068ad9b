//! Lexical category scores over profile sentences.

use std::collections::HashSet;
use std::path::Path;

use super::text::tokenize;
use super::FeatureError;

macro_rules! builtin {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../../data/lexicons/", $name)))),*]
    };
}

const BUILTIN: &[(&str, &str)] = builtin!(
    "internet", "noise", "trust", "reading", "violence", "negative_emotion", "positive_emotion",
    "help", "dispute", "work", "communication", "achievement", "politeness", "anger", "sadness",
    "fun", "law", "writing", "leisure", "confusion", "friends",
);
const BUILTIN_MANIFEST: &str = include_str!("../../data/lexicons/manifest");

/// Category word lists in canonical (manifest) order.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicons {
    categories: Vec<(String, HashSet<String>)>,
}

fn parse_words(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

fn parse_manifest(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect()
}

impl Lexicons {
    /// The shipped 21-category pack.
    pub fn builtin() -> Self {
        let categories = parse_manifest(BUILTIN_MANIFEST)
            .into_iter()
            .map(|name| {
                let text = BUILTIN
                    .iter()
                    .find(|(n, _)| *n == name)
                    .map(|(_, t)| *t)
                    .expect("manifest entry is bundled");
                (name, parse_words(text))
            })
            .collect();
        Lexicons { categories }
    }

    /// Reads `manifest` and one file per listed category from `dir`.
    pub fn load(dir: &Path) -> Result<Self, FeatureError> {
        let manifest = std::fs::read_to_string(dir.join("manifest"))
            .map_err(|_| FeatureError::LexiconMissing("manifest".into()))?;
        let mut categories = Vec::new();
        for name in parse_manifest(&manifest) {
            let text = std::fs::read_to_string(dir.join(&name))
                .map_err(|_| FeatureError::LexiconMissing(name.clone()))?;
            categories.push((name, parse_words(&text)));
        }
        Ok(Lexicons { categories })
    }

    pub fn from_lists<I, W>(lists: I) -> Self
    where
        I: IntoIterator<Item = (String, W)>,
        W: IntoIterator<Item = String>,
    {
        Lexicons {
            categories: lists
                .into_iter()
                .map(|(n, w)| (n, w.into_iter().map(|s| s.to_lowercase()).collect()))
                .collect(),
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.categories.iter().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }
}

/// Per sentence, the share of tokens in each category; averaged over
/// sentences that have tokens. Zeros for empty input.
pub fn empath_features(sentences: &[String], lexicons: &Lexicons) -> Vec<f64> {
    let mut sum = vec![0.0; lexicons.len()];
    let mut n = 0usize;
    for s in sentences {
        let tokens = tokenize(s);
        if tokens.is_empty() {
            continue;
        }
        n += 1;
        for (slot, (_, words)) in sum.iter_mut().zip(&lexicons.categories) {
            let hits = tokens.iter().filter(|t| words.contains(*t)).count();
            *slot += hits as f64 / tokens.len() as f64;
        }
    }
    if n > 0 {
        for v in &mut sum {
            *v /= n as f64;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_pack_has_21_categories() {
        let l = Lexicons::builtin();
        assert_eq!(l.len(), 21);
        for name in ["internet", "noise", "trust", "reading", "violence", "negative_emotion", "positive_emotion"] {
            assert!(l.names().any(|n| n == name), "{name}");
        }
        assert!(l.categories.iter().all(|(_, w)| !w.is_empty()));
    }

    #[test]
    fn one_hit_in_three_tokens() {
        let l = Lexicons::from_lists([("positive_emotion".to_string(), vec!["love".to_string()])]);
        assert_eq!(empath_features(&["i love wikipedia".into()], &l), vec![1.0 / 3.0]);
    }

    #[test]
    fn empty_and_no_hits_are_zero() {
        let l = Lexicons::builtin();
        assert!(empath_features(&[], &l).iter().all(|&v| v == 0.0));
        assert!(empath_features(&["zzz qqq".into()], &l).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn load_reports_missing_category() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("manifest"), "trust\nnoise\n").unwrap();
        std::fs::write(dir.path().join("trust"), "trust\n").unwrap();
        match Lexicons::load(dir.path()) {
            Err(FeatureError::LexiconMissing(n)) => assert_eq!(n, "noise"),
            other => panic!("{other:?}"),
        }
    }
}
