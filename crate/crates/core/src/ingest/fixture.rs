//! Line-delimited fixture bundles.
//!
//! A bundle directory holds `meta` (one JSON object with the schema version,
//! snapshot time and record counts), `editors.ndjson`, `pages.ndjson` and
//! `missing_list.ndjson`, one record per line.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use super::{
    check_limit, parse_missing_list, rank_pages, ActivitySummary, AdminScoreRecord, EditEvent,
    EditSource, EditorId, IngestError, MissingEntry, Namespace, PageRef, Revision,
};

pub const FIXTURE_SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BundleCounts {
    pub editors: usize,
    pub pages: usize,
    pub missing_list: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureMeta {
    pub schema_version: String,
    /// UTC seconds; used as the fetch time of every record in the bundle.
    pub snapshot_at: i64,
    #[serde(default)]
    pub counts: BundleCounts,
}

/// Per-page edit count of one editor, with how many of those edits were
/// reverted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageCount {
    pub page: PageRef,
    pub count: u64,
    #[serde(default)]
    pub reverted: u64,
}

/// Everything the fixture backend knows about one editor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditorPayload {
    pub id: EditorId,
    pub activity: ActivitySummary,
    #[serde(default)]
    pub edits: Vec<EditEvent>,
    #[serde(default)]
    pub page_counts: Vec<PageCount>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_page_text: Option<String>,
    pub admin_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PagePayload {
    pub page: PageRef,
    /// Any order; served newest first.
    pub revisions: Vec<Revision>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureBundle {
    pub meta: FixtureMeta,
    pub editors: Vec<EditorPayload>,
    pub pages: Vec<PagePayload>,
    pub missing_list: Vec<MissingEntry>,
}

impl FixtureBundle {
    pub fn new(
        snapshot_at: i64,
        editors: Vec<EditorPayload>,
        pages: Vec<PagePayload>,
        missing_list: Vec<MissingEntry>,
    ) -> Self {
        let counts = BundleCounts {
            editors: editors.len(),
            pages: pages.len(),
            missing_list: missing_list.len(),
        };
        FixtureBundle {
            meta: FixtureMeta {
                schema_version: FIXTURE_SCHEMA_VERSION.into(),
                snapshot_at,
                counts,
            },
            editors,
            pages,
            missing_list,
        }
    }

    pub fn load(dir: &Path) -> Result<Self, IngestError> {
        let meta_path = dir.join("meta");
        let meta_text = fs::read_to_string(&meta_path).map_err(|e| IngestError::io(&meta_path, e))?;
        let meta: FixtureMeta = serde_json::from_str(meta_text.trim()).map_err(|e| {
            IngestError::Parse {
                file: meta_path.display().to_string(),
                line: 1,
                message: e.to_string(),
            }
        })?;
        if meta.schema_version != FIXTURE_SCHEMA_VERSION {
            return Err(IngestError::SchemaMismatch {
                expected: FIXTURE_SCHEMA_VERSION.into(),
                found: meta.schema_version,
            });
        }
        let editors: Vec<EditorPayload> = read_ndjson(&dir.join("editors.ndjson"))?;
        let pages: Vec<PagePayload> = read_ndjson(&dir.join("pages.ndjson"))?;
        let missing_path = dir.join("missing_list.ndjson");
        let missing_text =
            fs::read_to_string(&missing_path).map_err(|e| IngestError::io(&missing_path, e))?;
        let missing_list = parse_missing_list(&missing_text, &missing_path.display().to_string())?;
        let bundle = FixtureBundle {
            meta,
            editors,
            pages,
            missing_list,
        };
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn write(&self, dir: &Path) -> Result<(), IngestError> {
        fs::create_dir_all(dir).map_err(|e| IngestError::io(dir, e))?;
        let meta_path = dir.join("meta");
        let meta = serde_json::to_string(&self.meta).expect("meta serializes");
        fs::write(&meta_path, meta + "\n").map_err(|e| IngestError::io(&meta_path, e))?;
        write_ndjson(&dir.join("editors.ndjson"), &self.editors)?;
        write_ndjson(&dir.join("pages.ndjson"), &self.pages)?;
        write_ndjson(&dir.join("missing_list.ndjson"), &self.missing_list)?;
        Ok(())
    }

    /// Checks record invariants and that cross-references resolve: every
    /// edit belongs to its payload's editor and every page an editor claims
    /// to have edited exists in the page table.
    pub fn validate(&self) -> Result<(), IngestError> {
        let pages: HashMap<&PageRef, ()> = self.pages.iter().map(|p| (&p.page, ())).collect();
        let mut seen = HashMap::new();
        for editor in &self.editors {
            if seen.insert(&editor.id, ()).is_some() {
                return Err(IngestError::Invalid(format!("duplicate editor {}", editor.id)));
            }
            for edit in &editor.edits {
                edit.validate()?;
                if edit.editor != editor.id {
                    return Err(IngestError::Invalid(format!(
                        "edit by {} stored under {}",
                        edit.editor, editor.id
                    )));
                }
            }
            for pc in &editor.page_counts {
                if !pages.contains_key(&pc.page) {
                    return Err(IngestError::Invalid(format!(
                        "{} references unknown page {}",
                        editor.id, pc.page
                    )));
                }
                if pc.reverted > pc.count {
                    return Err(IngestError::Invalid(format!(
                        "{} has more reverts than edits on {}",
                        editor.id, pc.page
                    )));
                }
            }
            if !editor.admin_score.is_finite() {
                return Err(IngestError::Invalid(format!(
                    "non-finite admin score for {}",
                    editor.id
                )));
            }
        }
        if pages.len() != self.pages.len() {
            return Err(IngestError::Invalid("duplicate page in page table".into()));
        }
        Ok(())
    }

    pub fn counts(&self) -> BundleCounts {
        BundleCounts {
            editors: self.editors.len(),
            pages: self.pages.len(),
            missing_list: self.missing_list.len(),
        }
    }
}

fn read_ndjson<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, IngestError> {
    let text = fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| IngestError::Parse {
                file: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

fn write_ndjson<T: Serialize>(path: &Path, records: &[T]) -> Result<(), IngestError> {
    let file = fs::File::create(path).map_err(|e| IngestError::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).expect("record serializes");
        writeln!(w, "{line}").map_err(|e| IngestError::io(path, e))?;
    }
    w.flush().map_err(|e| IngestError::io(path, e))
}

/// Read-only, deterministic backend over a [`FixtureBundle`].
#[derive(Debug)]
pub struct FixtureSource {
    snapshot_at: i64,
    editors: HashMap<EditorId, EditorPayload>,
    pages: BTreeMap<PageRef, Vec<Revision>>,
    missing_list: Vec<MissingEntry>,
    counts: BundleCounts,
}

impl FixtureSource {
    pub fn new(bundle: FixtureBundle) -> Self {
        let counts = bundle.counts();
        let editors = bundle
            .editors
            .into_iter()
            .map(|e| (e.id.clone(), e))
            .collect();
        let pages = bundle
            .pages
            .into_iter()
            .map(|p| {
                let mut revs = p.revisions;
                revs.sort_by(|a, b| {
                    b.timestamp
                        .cmp(&a.timestamp)
                        .then_with(|| a.editor.cmp(&b.editor))
                });
                (p.page, revs)
            })
            .collect();
        FixtureSource {
            snapshot_at: bundle.meta.snapshot_at,
            editors,
            pages,
            missing_list: bundle.missing_list,
            counts,
        }
    }

    pub fn open(dir: &Path) -> Result<Self, IngestError> {
        Ok(Self::new(FixtureBundle::load(dir)?))
    }

    pub fn missing_list(&self) -> &[MissingEntry] {
        &self.missing_list
    }

    pub fn counts(&self) -> BundleCounts {
        self.counts
    }

    fn editor(&self, editor: &EditorId) -> Result<&EditorPayload, IngestError> {
        self.editors
            .get(editor)
            .ok_or_else(|| IngestError::UnknownEditor(editor.clone()))
    }
}

impl EditSource for FixtureSource {
    fn fetch_latest_edits(
        &self,
        editor: &EditorId,
        limit: usize,
    ) -> Result<Vec<EditEvent>, IngestError> {
        check_limit(limit)?;
        let payload = self.editor(editor)?;
        let mut edits: Vec<EditEvent> = payload
            .edits
            .iter()
            .filter(|e| !e.automated)
            .cloned()
            .collect();
        edits.sort_by(|a, b| {
            b.timestamp
                .cmp(&a.timestamp)
                .then_with(|| a.page.cmp(&b.page))
        });
        edits.truncate(limit);
        Ok(edits)
    }

    fn fetch_top_pages(
        &self,
        editor: &EditorId,
        namespace: Namespace,
        k: usize,
    ) -> Result<Vec<(PageRef, u64)>, IngestError> {
        check_limit(k)?;
        let payload = self.editor(editor)?;
        let mut pages: Vec<(PageRef, u64)> = payload
            .page_counts
            .iter()
            .filter(|pc| pc.page.namespace == namespace && pc.count > 0)
            .map(|pc| (pc.page.clone(), pc.count))
            .collect();
        rank_pages(&mut pages);
        pages.truncate(k);
        Ok(pages)
    }

    fn fetch_page_revisions(
        &self,
        page: &PageRef,
        limit: usize,
    ) -> Result<Vec<Revision>, IngestError> {
        check_limit(limit)?;
        let revs = self
            .pages
            .get(page)
            .ok_or_else(|| IngestError::UnknownPage(page.clone()))?;
        Ok(revs.iter().take(limit).cloned().collect())
    }

    fn fetch_admin_score(&self, editor: &EditorId) -> Result<AdminScoreRecord, IngestError> {
        let payload = self.editor(editor)?;
        Ok(AdminScoreRecord {
            editor: editor.clone(),
            score: payload.admin_score,
            fetched_at: self.snapshot_at,
        })
    }

    fn fetch_user_page_text(&self, editor: &EditorId) -> Result<String, IngestError> {
        Ok(self
            .editors
            .get(editor)
            .and_then(|p| p.user_page_text.clone())
            .unwrap_or_default())
    }

    fn fetch_main_page_reverts(
        &self,
        editor: &EditorId,
        k: usize,
    ) -> Result<Vec<(PageRef, u64)>, IngestError> {
        let top = self.fetch_top_pages(editor, Namespace::Article, k)?;
        let payload = self.editor(editor)?;
        Ok(top
            .into_iter()
            .map(|(page, _)| {
                let reverted = payload
                    .page_counts
                    .iter()
                    .find(|pc| pc.page == page)
                    .map(|pc| pc.reverted)
                    .unwrap_or(0);
                (page, reverted)
            })
            .collect())
    }

    fn fetch_activity_summary(&self, editor: &EditorId) -> Result<ActivitySummary, IngestError> {
        Ok(self.editor(editor)?.activity)
    }

    fn snapshot_time(&self) -> i64 {
        self.snapshot_at
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> EditorId {
        EditorId::new(s).unwrap()
    }

    fn page(t: &str, ns: Namespace) -> PageRef {
        PageRef::new(t, ns).unwrap()
    }

    fn edit(editor: &str, ts: i64, automated: bool) -> EditEvent {
        EditEvent {
            editor: id(editor),
            page: page("P", Namespace::Article),
            timestamp: ts,
            byte_delta: 1,
            minor: false,
            ores_damaging_prob: None,
            ores_goodfaith_prob: None,
            reverted: false,
            automated,
        }
    }

    fn bundle() -> FixtureBundle {
        let edits = (1..=60).map(|i| edit("E1", 1000 + (i * 37) % 61 * 10, i % 7 == 0)).collect();
        let counts = vec![
            PageCount { page: page("C", Namespace::Article), count: 2, reverted: 1 },
            PageCount { page: page("B", Namespace::Article), count: 5, reverted: 0 },
            PageCount { page: page("A", Namespace::Article), count: 5, reverted: 2 },
            PageCount { page: page("T", Namespace::ArticleTalk), count: 1, reverted: 0 },
        ];
        let e1 = EditorPayload {
            id: id("E1"),
            activity: ActivitySummary { total_edits: 60, first_edit: 1000, last_edit: 2000 },
            edits,
            page_counts: counts,
            user_page_text: Some("<b>Hi</b> there".into()),
            admin_score: 734.38,
        };
        let e2 = EditorPayload {
            id: id("E2"),
            activity: ActivitySummary { total_edits: 3, first_edit: 1, last_edit: 2 },
            edits: vec![edit("E2", 5, false), edit("E2", 9, false), edit("E2", 7, false)],
            page_counts: vec![],
            user_page_text: None,
            admin_score: 1.0,
        };
        let pages = ["A", "B", "C"]
            .iter()
            .map(|t| PagePayload {
                page: page(t, Namespace::Article),
                revisions: (0..250)
                    .map(|i| Revision { editor: id(if i % 2 == 0 { "E1" } else { "E2" }), timestamp: 100 + i })
                    .collect(),
            })
            .chain(std::iter::once(PagePayload {
                page: page("T", Namespace::ArticleTalk),
                revisions: (0..7).map(|i| Revision { editor: id("E1"), timestamp: 10 + i }).collect(),
            }))
            .collect();
        FixtureBundle::new(1_600_000_000, vec![e1, e2], pages, vec![])
    }

    #[test]
    fn latest_edits_newest_first_without_automated() {
        let src = FixtureSource::new(bundle());
        let edits = src.fetch_latest_edits(&id("E1"), 50).unwrap();
        assert_eq!(edits.len(), 50);
        assert!(edits.iter().all(|e| !e.automated));
        let mut sorted = edits.clone();
        sorted.sort_by(|a, b| b.timestamp.cmp(&a.timestamp));
        assert_eq!(
            edits.iter().map(|e| e.timestamp).collect::<Vec<_>>(),
            sorted.iter().map(|e| e.timestamp).collect::<Vec<_>>()
        );
        assert_eq!(src.fetch_latest_edits(&id("E2"), 50).unwrap().len(), 3);
        assert!(matches!(
            src.fetch_latest_edits(&id("ghost"), 50),
            Err(IngestError::UnknownEditor(_))
        ));
    }

    #[test]
    fn top_pages_tie_break() {
        let src = FixtureSource::new(bundle());
        let top = src.fetch_top_pages(&id("E1"), Namespace::Article, 2).unwrap();
        assert_eq!(top, vec![(page("A", Namespace::Article), 5), (page("B", Namespace::Article), 5)]);
        let talk = src.fetch_top_pages(&id("E1"), Namespace::ArticleTalk, 20).unwrap();
        assert_eq!(talk.len(), 1);
    }

    #[test]
    fn page_revisions_truncate() {
        let src = FixtureSource::new(bundle());
        let revs = src.fetch_page_revisions(&page("A", Namespace::Article), 100).unwrap();
        assert_eq!(revs.len(), 100);
        assert_eq!(revs[0].timestamp, 349);
        assert!(revs.windows(2).all(|w| w[0].timestamp >= w[1].timestamp));
        let revs = src.fetch_page_revisions(&page("T", Namespace::ArticleTalk), 100).unwrap();
        assert_eq!(revs.len(), 7);
        assert!(matches!(
            src.fetch_page_revisions(&page("Nope", Namespace::Article), 1),
            Err(IngestError::UnknownPage(_))
        ));
    }

    #[test]
    fn admin_score_and_text() {
        let src = FixtureSource::new(bundle());
        assert_eq!(src.fetch_admin_score(&id("E1")).unwrap().score, 734.38);
        assert_eq!(src.fetch_user_page_text(&id("E2")).unwrap(), "");
        assert_eq!(src.fetch_user_page_text(&id("E1")).unwrap(), "<b>Hi</b> there");
        let reverts = src.fetch_main_page_reverts(&id("E1"), 50).unwrap();
        assert_eq!(reverts.iter().map(|r| r.1).collect::<Vec<_>>(), vec![2, 0, 1]);
    }

    #[test]
    fn write_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let b = bundle();
        b.write(dir.path()).unwrap();
        let loaded = FixtureBundle::load(dir.path()).unwrap();
        assert_eq!(loaded, b);
    }

    #[test]
    fn version_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let mut b = bundle();
        b.meta.schema_version = "0".into();
        b.write(dir.path()).unwrap();
        assert!(matches!(
            FixtureBundle::load(dir.path()),
            Err(IngestError::SchemaMismatch { .. })
        ));
    }

    #[test]
    fn dangling_page_reference_rejected() {
        let mut b = bundle();
        b.pages.retain(|p| p.page.title != "C");
        assert!(b.validate().is_err());
    }
}
