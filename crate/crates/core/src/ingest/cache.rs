use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use super::{
    ActivitySummary, AdminScoreRecord, Clock, EditEvent, EditSource, EditorId, IngestError,
    Namespace, PageRef, Revision,
};

const CACHE_FILE: &str = "cache.ndjson";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Entry {
    key: String,
    fetched_at: f64,
    value: serde_json::Value,
}

/// Record-level read-through cache in front of any [`EditSource`].
///
/// Entries younger than the TTL are served without an upstream call. The
/// cache can be saved to and reloaded from a directory.
pub struct CachedSource<S> {
    inner: S,
    ttl_secs: f64,
    clock: Arc<dyn Clock>,
    entries: Mutex<BTreeMap<String, Entry>>,
    upstream_calls: AtomicUsize,
}

impl<S: EditSource> CachedSource<S> {
    pub fn new(inner: S, ttl_secs: f64, clock: Arc<dyn Clock>) -> Self {
        CachedSource {
            inner,
            ttl_secs,
            clock,
            entries: Mutex::new(BTreeMap::new()),
            upstream_calls: AtomicUsize::new(0),
        }
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }

    pub fn upstream_calls(&self) -> usize {
        self.upstream_calls.load(Ordering::SeqCst)
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Merges entries persisted in `dir`, if any.
    pub fn load(&self, dir: &Path) -> Result<usize, IngestError> {
        let path = dir.join(CACHE_FILE);
        if !path.exists() {
            return Ok(0);
        }
        let text = std::fs::read_to_string(&path).map_err(|e| IngestError::io(&path, e))?;
        let mut entries = self.entries.lock().unwrap();
        let mut n = 0;
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.is_empty()) {
            let entry: Entry = serde_json::from_str(line).map_err(|e| IngestError::Parse {
                file: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })?;
            entries.insert(entry.key.clone(), entry);
            n += 1;
        }
        Ok(n)
    }

    pub fn save(&self, dir: &Path) -> Result<(), IngestError> {
        std::fs::create_dir_all(dir).map_err(|e| IngestError::io(dir, e))?;
        let path = dir.join(CACHE_FILE);
        let file = std::fs::File::create(&path).map_err(|e| IngestError::io(&path, e))?;
        let mut w = std::io::BufWriter::new(file);
        for entry in self.entries.lock().unwrap().values() {
            let line = serde_json::to_string(entry).expect("cache entry serializes");
            writeln!(w, "{line}").map_err(|e| IngestError::io(&path, e))?;
        }
        w.flush().map_err(|e| IngestError::io(&path, e))
    }

    fn cached<T, F>(&self, key: String, fetch: F) -> Result<T, IngestError>
    where
        T: Serialize + DeserializeOwned,
        F: FnOnce(&S) -> Result<T, IngestError>,
    {
        let now = self.clock.now();
        if let Some(entry) = self.entries.lock().unwrap().get(&key) {
            if now - entry.fetched_at <= self.ttl_secs {
                if let Ok(v) = serde_json::from_value(entry.value.clone()) {
                    return Ok(v);
                }
            }
        }
        self.upstream_calls.fetch_add(1, Ordering::SeqCst);
        let value = fetch(&self.inner)?;
        let json = serde_json::to_value(&value).expect("record serializes");
        self.entries.lock().unwrap().insert(
            key.clone(),
            Entry {
                key,
                fetched_at: now,
                value: json,
            },
        );
        Ok(value)
    }
}

impl<S: EditSource> EditSource for CachedSource<S> {
    fn fetch_latest_edits(
        &self,
        editor: &EditorId,
        limit: usize,
    ) -> Result<Vec<EditEvent>, IngestError> {
        self.cached(format!("latest_edits|{editor}|{limit}"), |s| {
            s.fetch_latest_edits(editor, limit)
        })
    }

    fn fetch_top_pages(
        &self,
        editor: &EditorId,
        namespace: Namespace,
        k: usize,
    ) -> Result<Vec<(PageRef, u64)>, IngestError> {
        self.cached(
            format!("top_pages|{editor}|{}|{k}", namespace.id()),
            |s| s.fetch_top_pages(editor, namespace, k),
        )
    }

    fn fetch_page_revisions(
        &self,
        page: &PageRef,
        limit: usize,
    ) -> Result<Vec<Revision>, IngestError> {
        self.cached(
            format!("revisions|{}|{}|{limit}", page.namespace.id(), page.title),
            |s| s.fetch_page_revisions(page, limit),
        )
    }

    fn fetch_admin_score(&self, editor: &EditorId) -> Result<AdminScoreRecord, IngestError> {
        self.cached(format!("admin_score|{editor}"), |s| s.fetch_admin_score(editor))
    }

    fn fetch_user_page_text(&self, editor: &EditorId) -> Result<String, IngestError> {
        self.cached(format!("user_page|{editor}"), |s| s.fetch_user_page_text(editor))
    }

    fn fetch_main_page_reverts(
        &self,
        editor: &EditorId,
        k: usize,
    ) -> Result<Vec<(PageRef, u64)>, IngestError> {
        self.cached(format!("reverts|{editor}|{k}"), |s| {
            s.fetch_main_page_reverts(editor, k)
        })
    }

    fn fetch_activity_summary(&self, editor: &EditorId) -> Result<ActivitySummary, IngestError> {
        self.cached(format!("activity|{editor}"), |s| s.fetch_activity_summary(editor))
    }

    fn snapshot_time(&self) -> i64 {
        self.inner.snapshot_time()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{EditorPayload, FixtureBundle, FixtureSource, SimulatedClock};

    fn source() -> FixtureSource {
        let id = EditorId::new("E1").unwrap();
        let edits = (1..=5)
            .map(|i| EditEvent {
                editor: id.clone(),
                page: PageRef::new("P", Namespace::Article).unwrap(),
                timestamp: i * 100,
                byte_delta: i,
                minor: i % 2 == 0,
                ores_damaging_prob: Some(0.1),
                ores_goodfaith_prob: Some(0.9),
                reverted: false,
                automated: false,
            })
            .collect();
        let payload = EditorPayload {
            id,
            activity: ActivitySummary { total_edits: 5, first_edit: 100, last_edit: 500 },
            edits,
            page_counts: vec![],
            user_page_text: None,
            admin_score: 734.38,
        };
        FixtureSource::new(FixtureBundle::new(42, vec![payload], vec![], vec![]))
    }

    #[test]
    fn ttl_hit_and_expiry() {
        let clock = SimulatedClock::new(0.0);
        let cache = CachedSource::new(source(), 60.0, Arc::new(clock.clone()));
        let id = EditorId::new("E1").unwrap();
        let a = cache.fetch_admin_score(&id).unwrap();
        clock.advance(30.0);
        let b = cache.fetch_admin_score(&id).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.score, 734.38);
        assert_eq!(cache.upstream_calls(), 1);
        clock.advance(31.0);
        cache.fetch_admin_score(&id).unwrap();
        assert_eq!(cache.upstream_calls(), 2);
    }

    #[test]
    fn errors_are_not_cached() {
        let cache = CachedSource::new(source(), 60.0, Arc::new(SimulatedClock::new(0.0)));
        let ghost = EditorId::new("ghost").unwrap();
        assert!(cache.fetch_admin_score(&ghost).is_err());
        assert!(cache.fetch_admin_score(&ghost).is_err());
        assert_eq!(cache.upstream_calls(), 2);
        assert!(cache.is_empty());
    }

    #[test]
    fn save_reload_identical_records() {
        let dir = tempfile::tempdir().unwrap();
        let clock = Arc::new(SimulatedClock::new(0.0));
        let id = EditorId::new("E1").unwrap();
        let first = CachedSource::new(source(), 1e9, clock.clone());
        let edits = first.fetch_latest_edits(&id, 50).unwrap();
        let score = first.fetch_admin_score(&id).unwrap();
        first.save(dir.path()).unwrap();

        let second = CachedSource::new(source(), 1e9, clock);
        assert_eq!(second.load(dir.path()).unwrap(), 2);
        assert_eq!(second.fetch_latest_edits(&id, 50).unwrap(), edits);
        assert_eq!(second.fetch_admin_score(&id).unwrap(), score);
        assert_eq!(second.upstream_calls(), 0);
    }
}
