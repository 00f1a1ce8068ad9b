//! Raw editor and page data behind one [`EditSource`] interface.
//!
//! Two backends exist: [`FixtureSource`] reads a line-delimited bundle from
//! disk and is fully deterministic, [`LiveSource`] talks to the MediaWiki,
//! XTools and ORES web APIs with retries and a shared rate limiter. Either
//! can be wrapped in a [`CachedSource`].

mod cache;
mod clock;
mod fixture;
mod live;
mod missing;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::CachedSource;
pub use clock::{Clock, RateLimiter, SimulatedClock, SystemClock};
pub use fixture::{
    BundleCounts, EditorPayload, FixtureBundle, FixtureMeta, FixtureSource, PageCount,
    PagePayload, FIXTURE_SCHEMA_VERSION,
};
pub use live::{HttpTransport, LiveConfig, LiveSource, Transport, TransportError};
pub use missing::{load_missing_list, parse_missing_list, MissingEntry};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("unknown editor: {0}")]
    UnknownEditor(EditorId),
    #[error("unknown page: {0}")]
    UnknownPage(PageRef),
    #[error("source unavailable: {0}")]
    SourceUnavailable(String),
    #[error("schema mismatch: expected {expected}, found {found}")]
    SchemaMismatch { expected: String, found: String },
    #[error("parse error in {file} line {line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },
    #[error("invalid value: {0}")]
    Invalid(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl IngestError {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        IngestError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

/// A registered editor's username.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct EditorId(String);

impl EditorId {
    pub fn new(username: impl Into<String>) -> Result<Self, IngestError> {
        let username = username.into();
        if username.is_empty() {
            return Err(IngestError::Invalid("empty username".into()));
        }
        if username.trim() != username {
            return Err(IngestError::Invalid(format!(
                "username has surrounding whitespace: {username:?}"
            )));
        }
        Ok(EditorId(username))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for EditorId {
    type Error = IngestError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        EditorId::new(value)
    }
}

impl From<EditorId> for String {
    fn from(id: EditorId) -> String {
        id.0
    }
}

impl fmt::Display for EditorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The four MediaWiki namespaces this toolkit looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum Namespace {
    Article = 0,
    ArticleTalk = 1,
    Project = 4,
    ProjectTalk = 5,
}

impl Namespace {
    pub const ALL: [Namespace; 4] = [
        Namespace::Article,
        Namespace::ArticleTalk,
        Namespace::Project,
        Namespace::ProjectTalk,
    ];

    pub fn id(self) -> i64 {
        self as i64
    }
}

impl TryFrom<i64> for Namespace {
    type Error = IngestError;
    fn try_from(value: i64) -> Result<Self, Self::Error> {
        match value {
            0 => Ok(Namespace::Article),
            1 => Ok(Namespace::ArticleTalk),
            4 => Ok(Namespace::Project),
            5 => Ok(Namespace::ProjectTalk),
            other => Err(IngestError::Invalid(format!(
                "namespace {other} is not one of 0, 1, 4, 5"
            ))),
        }
    }
}

impl From<Namespace> for i64 {
    fn from(ns: Namespace) -> i64 {
        ns.id()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PageRef {
    pub title: String,
    pub namespace: Namespace,
}

impl PageRef {
    pub fn new(title: impl Into<String>, namespace: Namespace) -> Result<Self, IngestError> {
        let title = title.into();
        if title.is_empty() {
            return Err(IngestError::Invalid("empty page title".into()));
        }
        Ok(PageRef { title, namespace })
    }
}

impl fmt::Display for PageRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (ns {})", self.title, self.namespace.id())
    }
}

/// One revision by one editor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditEvent {
    pub editor: EditorId,
    pub page: PageRef,
    /// UTC seconds since the epoch.
    pub timestamp: i64,
    pub byte_delta: i64,
    pub minor: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ores_damaging_prob: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ores_goodfaith_prob: Option<f64>,
    #[serde(default)]
    pub reverted: bool,
    /// Made through a recognised automated tool.
    #[serde(default)]
    pub automated: bool,
}

impl EditEvent {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.timestamp <= 0 {
            return Err(IngestError::Invalid(format!(
                "non-positive timestamp {} for {}",
                self.timestamp, self.editor
            )));
        }
        for p in [self.ores_damaging_prob, self.ores_goodfaith_prob]
            .into_iter()
            .flatten()
        {
            if !(0.0..=1.0).contains(&p) {
                return Err(IngestError::Invalid(format!(
                    "probability {p} outside [0,1] for {}",
                    self.editor
                )));
            }
        }
        Ok(())
    }
}

/// A contributor entry in a page's revision history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Revision {
    pub editor: EditorId,
    pub timestamp: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdminScoreRecord {
    pub editor: EditorId,
    pub score: f64,
    pub fetched_at: i64,
}

/// Lifetime activity totals used for the edits-per-day rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivitySummary {
    pub total_edits: u64,
    pub first_edit: i64,
    pub last_edit: i64,
}

impl ActivitySummary {
    /// Lifetime edits divided by the days between first and last edit,
    /// with the span floored at one day.
    pub fn edits_per_day(&self) -> f64 {
        let days = (self.last_edit - self.first_edit) as f64 / 86_400.0;
        self.total_edits as f64 / days.max(1.0)
    }
}

/// Uniform read interface over live and fixture data.
pub trait EditSource: Send + Sync {
    /// Newest-first non-automated edits, at most `limit`.
    fn fetch_latest_edits(
        &self,
        editor: &EditorId,
        limit: usize,
    ) -> Result<Vec<EditEvent>, IngestError>;

    /// The editor's most edited pages in `namespace`, by count descending
    /// then title ascending.
    fn fetch_top_pages(
        &self,
        editor: &EditorId,
        namespace: Namespace,
        k: usize,
    ) -> Result<Vec<(PageRef, u64)>, IngestError>;

    /// Newest-first contributors of the page's latest revisions.
    fn fetch_page_revisions(
        &self,
        page: &PageRef,
        limit: usize,
    ) -> Result<Vec<Revision>, IngestError>;

    fn fetch_admin_score(&self, editor: &EditorId) -> Result<AdminScoreRecord, IngestError>;

    /// Raw user page text; empty when the page does not exist.
    fn fetch_user_page_text(&self, editor: &EditorId) -> Result<String, IngestError>;

    /// Reverted-edit counts of the editor on each of their `k` most edited
    /// article pages.
    fn fetch_main_page_reverts(
        &self,
        editor: &EditorId,
        k: usize,
    ) -> Result<Vec<(PageRef, u64)>, IngestError>;

    fn fetch_activity_summary(&self, editor: &EditorId) -> Result<ActivitySummary, IngestError>;

    /// Time the data describes (fixture snapshot time or wall clock).
    fn snapshot_time(&self) -> i64;
}

/// Orders `(page, count)` pairs by count descending, then title ascending.
pub fn rank_pages(pages: &mut [(PageRef, u64)]) {
    pages.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.title.cmp(&b.0.title)));
}

pub(crate) fn check_limit(limit: usize) -> Result<(), IngestError> {
    if limit == 0 {
        return Err(IngestError::Invalid("limit must be at least 1".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn editor_id_rules() {
        assert!(EditorId::new("Alice").is_ok());
        assert!(EditorId::new("").is_err());
        assert!(EditorId::new(" Alice").is_err());
        assert!(serde_json::from_str::<EditorId>("\"Bob \"").is_err());
    }

    #[test]
    fn namespace_restricted() {
        assert_eq!(Namespace::try_from(4).unwrap(), Namespace::Project);
        assert!(Namespace::try_from(2).is_err());
        assert!(serde_json::from_str::<PageRef>(r#"{"title":"X","namespace":3}"#).is_err());
    }

    #[test]
    fn rank_pages_breaks_ties_by_title() {
        let p = |t: &str| PageRef::new(t, Namespace::Article).unwrap();
        let mut pages = vec![(p("C"), 2), (p("B"), 5), (p("A"), 5)];
        rank_pages(&mut pages);
        let order: Vec<_> = pages.iter().map(|(p, c)| (p.title.as_str(), *c)).collect();
        assert_eq!(order, vec![("A", 5), ("B", 5), ("C", 2)]);
    }

    #[test]
    fn edits_per_day_floors_span() {
        let s = ActivitySummary {
            total_edits: 10,
            first_edit: 1000,
            last_edit: 1000,
        };
        assert_eq!(s.edits_per_day(), 10.0);
        let s = ActivitySummary {
            total_edits: 10,
            first_edit: 0,
            last_edit: 4 * 86_400,
        };
        assert_eq!(s.edits_per_day(), 2.5);
    }

    #[test]
    fn event_validation() {
        let mut e = EditEvent {
            editor: EditorId::new("A").unwrap(),
            page: PageRef::new("P", Namespace::Article).unwrap(),
            timestamp: 10,
            byte_delta: 3,
            minor: false,
            ores_damaging_prob: Some(0.2),
            ores_goodfaith_prob: None,
            reverted: false,
            automated: false,
        };
        assert!(e.validate().is_ok());
        e.ores_damaging_prob = Some(1.5);
        assert!(e.validate().is_err());
        e.ores_damaging_prob = None;
        e.timestamp = 0;
        assert!(e.validate().is_err());
    }
}
