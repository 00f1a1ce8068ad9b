//! Labeled missing/active cohorts.
//!
//! Construction runs in three steps: filter the missing list down to
//! editors with no activity in the cutoff year, harvest co-editors of their
//! most edited pages as active candidates, then keep the candidates whose
//! edits-per-day rate lies within one standard deviation of the missing
//! editors' mean rate. The Mann-Whitney p-value of the two rate samples is
//! stored with the cohort.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use chrono::{DateTime, Datelike};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::artifact::{self, ArtifactError, Provenance};
use crate::ingest::{EditEvent, EditSource, EditorId, IngestError, MissingEntry, Namespace};
use crate::stats;

pub const COHORT_FILE: &str = "cohort.ndjson";
pub const COHORT_META_FILE: &str = "cohort.meta";
pub const RATE_DEFINITION: &str = "lifetime_edits / max(1, days(first_edit, last_edit))";
pub const SIGMA_KIND: &str = "population";

/// Namespaces harvested for co-editors: article, project, article talk.
pub const HARVEST_NAMESPACES: [Namespace; 3] =
    [Namespace::Article, Namespace::Project, Namespace::ArticleTalk];

#[derive(Debug, Error)]
pub enum CohortError {
    #[error("no listed editor survives the {0} cutoff")]
    EmptyResult(i32),
    #[error("harvest produced no active candidates")]
    HarvestEmpty,
    #[error("no candidate lies within one standard deviation of the missing mean rate")]
    NoActiveMatched,
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: IngestError,
    },
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error("cohort artifact invalid: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    Missing,
    Active,
    Unlabeled,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Missing => "missing",
            Label::Active => "active",
            Label::Unlabeled => "unlabeled",
        }
    }
}

/// Everything the feature extractors need about one editor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditorRecord {
    pub id: EditorId,
    pub label: Label,
    /// Newest first, at most the window size.
    pub latest_edits: Vec<EditEvent>,
    pub avg_edits_per_day: f64,
    pub profile_text: String,
    pub admin_score: f64,
    /// Reverted edits on each of the editor's most edited article pages.
    pub main_page_reverts: Vec<u64>,
    /// Mean of `main_page_reverts` (0 when there are none).
    pub revert_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortParams {
    pub cutoff_year: i32,
    pub window: usize,
    pub pages_per_ns: usize,
    pub revisions: usize,
    pub top_k: usize,
    /// Pages considered for the revert feature.
    pub revert_pages: usize,
    /// Multiplier on the matching band; 1.0 outside of tests.
    pub sigma_scale: f64,
}

impl Default for CohortParams {
    fn default() -> Self {
        CohortParams {
            cutoff_year: 2020,
            window: 50,
            pages_per_ns: 20,
            revisions: 100,
            top_k: 10,
            revert_pages: 50,
            sigma_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedEditor {
    pub editor: EditorId,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortMeta {
    pub schema_version: String,
    pub matching_mean: f64,
    pub matching_sigma: f64,
    pub mwu_p: f64,
    pub created_at: i64,
    pub rate_definition: String,
    pub sigma_kind: String,
    pub params: CohortParams,
    pub warnings: Vec<String>,
    #[serde(flatten)]
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub missing: Vec<EditorRecord>,
    pub active: Vec<EditorRecord>,
    pub matching_mean: f64,
    pub matching_sigma: f64,
    pub mwu_p: f64,
    pub created_at: i64,
    pub params: CohortParams,
    pub warnings: Vec<String>,
}

/// Collects an editor's record from the source.
pub fn build_record(
    source: &dyn EditSource,
    editor: &EditorId,
    label: Label,
    params: &CohortParams,
) -> Result<EditorRecord, IngestError> {
    let activity = source.fetch_activity_summary(editor)?;
    let latest_edits = source.fetch_latest_edits(editor, params.window)?;
    let profile_text = source.fetch_user_page_text(editor)?;
    let admin_score = source.fetch_admin_score(editor)?.score;
    let main_page_reverts: Vec<u64> = source
        .fetch_main_page_reverts(editor, params.revert_pages)?
        .into_iter()
        .map(|(_, n)| n)
        .collect();
    let revert_rate = if main_page_reverts.is_empty() {
        0.0
    } else {
        main_page_reverts.iter().sum::<u64>() as f64 / main_page_reverts.len() as f64
    };
    Ok(EditorRecord {
        id: editor.clone(),
        label,
        latest_edits,
        avg_edits_per_day: activity.edits_per_day(),
        profile_text,
        admin_score,
        main_page_reverts,
        revert_rate,
    })
}

fn year_of(ts: i64) -> i32 {
    DateTime::from_timestamp(ts, 0).map(|d| d.year()).unwrap_or(i32::MIN)
}

#[derive(Debug, Clone)]
pub struct MissingCohort {
    pub records: Vec<EditorRecord>,
    /// Listed editors dropped because they edited in or after the cutoff year.
    pub still_active: Vec<EditorId>,
    pub skipped: Vec<SkippedEditor>,
}

/// Keeps listed editors whose latest known edit (the later of the listed
/// date and the source's last edit) falls before the cutoff year.
pub fn build_missing_cohort(
    source: &dyn EditSource,
    missing_list: &[MissingEntry],
    params: &CohortParams,
) -> Result<MissingCohort, CohortError> {
    let mut seen = HashSet::new();
    let listed: Vec<&MissingEntry> = missing_list
        .iter()
        .filter(|e| seen.insert(e.editor.clone()))
        .collect();

    enum Outcome {
        Keep(EditorRecord),
        StillActive(EditorId),
        Skip(SkippedEditor),
    }

    let outcomes: Vec<Outcome> = listed
        .par_iter()
        .map(|entry| {
            if entry.last_edit_date.year() >= params.cutoff_year {
                return Outcome::StillActive(entry.editor.clone());
            }
            let skip = |e: IngestError| {
                log::warn!("skipping missing editor {}: {e}", entry.editor);
                Outcome::Skip(SkippedEditor {
                    editor: entry.editor.clone(),
                    reason: e.to_string(),
                })
            };
            match source.fetch_activity_summary(&entry.editor) {
                Ok(a) if year_of(a.last_edit) >= params.cutoff_year => {
                    return Outcome::StillActive(entry.editor.clone())
                }
                Ok(_) => {}
                Err(e) => return skip(e),
            }
            match build_record(source, &entry.editor, Label::Missing, params) {
                Ok(r) => Outcome::Keep(r),
                Err(e) => skip(e),
            }
        })
        .collect();

    let mut out = MissingCohort {
        records: Vec::new(),
        still_active: Vec::new(),
        skipped: Vec::new(),
    };
    for o in outcomes {
        match o {
            Outcome::Keep(r) => out.records.push(r),
            Outcome::StillActive(id) => out.still_active.push(id),
            Outcome::Skip(s) => out.skipped.push(s),
        }
    }
    if out.records.is_empty() {
        return Err(CohortError::EmptyResult(params.cutoff_year));
    }
    out.records.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarvestReport {
    pub candidates: BTreeSet<EditorId>,
    /// Page fetches summed over missing editors (shared pages count once per editor).
    pub pages_scanned: usize,
    pub skipped: Vec<SkippedEditor>,
}

/// Top `top_k` co-editors of one missing editor, ranked by how many of the
/// latest revisions of the editor's top pages they made. The missing editor
/// is not a co-editor of themselves.
pub fn co_editors(
    source: &dyn EditSource,
    editor: &EditorId,
    params: &CohortParams,
) -> Result<(Vec<(EditorId, u64)>, usize), IngestError> {
    let mut counts: HashMap<EditorId, u64> = HashMap::new();
    let mut scanned = 0;
    for ns in HARVEST_NAMESPACES {
        for (page, _) in source.fetch_top_pages(editor, ns, params.pages_per_ns)? {
            scanned += 1;
            for rev in source.fetch_page_revisions(&page, params.revisions)? {
                if &rev.editor != editor {
                    *counts.entry(rev.editor).or_default() += 1;
                }
            }
        }
    }
    let mut ranked: Vec<(EditorId, u64)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(params.top_k);
    Ok((ranked, scanned))
}

/// Unions every missing editor's top co-editors and removes anyone on the
/// missing list. Editors whose data cannot be fetched are skipped.
pub fn harvest_active_candidates(
    source: &dyn EditSource,
    missing: &[EditorRecord],
    missing_list: &[MissingEntry],
    params: &CohortParams,
) -> Result<HarvestReport, CohortError> {
    let listed: HashSet<&EditorId> = missing_list.iter().map(|e| &e.editor).collect();
    let per_editor: Vec<Result<(Vec<(EditorId, u64)>, usize), SkippedEditor>> = missing
        .par_iter()
        .map(|m| {
            co_editors(source, &m.id, params).map_err(|e| {
                log::warn!("harvest skipped {}: {e}", m.id);
                SkippedEditor {
                    editor: m.id.clone(),
                    reason: e.to_string(),
                }
            })
        })
        .collect();

    let mut report = HarvestReport {
        candidates: BTreeSet::new(),
        pages_scanned: 0,
        skipped: Vec::new(),
    };
    for r in per_editor {
        match r {
            Ok((top, scanned)) => {
                report.pages_scanned += scanned;
                report.candidates.extend(top.into_iter().map(|(id, _)| id));
            }
            Err(s) => report.skipped.push(s),
        }
    }
    report.candidates.retain(|c| !listed.contains(c));
    if report.candidates.is_empty() {
        return Err(CohortError::HarvestEmpty);
    }
    Ok(report)
}

/// Population mean and standard deviation of the missing editors' rates.
pub fn matching_band(missing: &[EditorRecord]) -> (f64, f64) {
    let rates: Vec<f64> = missing.iter().map(|r| r.avg_edits_per_day).collect();
    match stats::describe(&rates) {
        Ok(d) => (d.mean, d.std),
        Err(_) => (0.0, 0.0),
    }
}

/// Indices of the rates within `sigma` of `mean` (the scalar L2 distance).
pub fn select_within_band(rates: &[f64], mean: f64, sigma: f64) -> Vec<usize> {
    rates
        .iter()
        .enumerate()
        .filter(|(_, &r)| (r - mean).abs() <= sigma)
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone)]
pub struct MatchOutcome {
    pub cohort: Cohort,
    pub skipped: Vec<SkippedEditor>,
}

pub fn match_active_cohort(
    source: &dyn EditSource,
    candidates: &BTreeSet<EditorId>,
    missing: Vec<EditorRecord>,
    params: &CohortParams,
) -> Result<MatchOutcome, CohortError> {
    let (mean, sigma) = matching_band(&missing);
    let mut warnings = Vec::new();
    if sigma == 0.0 {
        let w = format!(
            "WARNING: matching sigma is 0 (all missing editors share rate {mean}); only exact-rate candidates can match"
        );
        log::warn!("{w}");
        warnings.push(w);
    }

    let ids: Vec<&EditorId> = candidates.iter().collect();
    let rates: Vec<Result<f64, SkippedEditor>> = ids
        .par_iter()
        .map(|id| {
            source
                .fetch_activity_summary(id)
                .map(|a| a.edits_per_day())
                .map_err(|e| SkippedEditor {
                    editor: (*id).clone(),
                    reason: e.to_string(),
                })
        })
        .collect();
    let mut skipped = Vec::new();
    let mut rated: Vec<(&EditorId, f64)> = Vec::new();
    for (id, r) in ids.iter().zip(rates) {
        match r {
            Ok(rate) => rated.push((id, rate)),
            Err(s) => {
                log::warn!("candidate {} skipped: {}", s.editor, s.reason);
                skipped.push(s);
            }
        }
    }
    let rate_values: Vec<f64> = rated.iter().map(|(_, r)| *r).collect();
    let kept = select_within_band(&rate_values, mean, sigma * params.sigma_scale);

    let records: Vec<Result<EditorRecord, SkippedEditor>> = kept
        .par_iter()
        .map(|&i| {
            let id = rated[i].0;
            build_record(source, id, Label::Active, params).map_err(|e| SkippedEditor {
                editor: id.clone(),
                reason: e.to_string(),
            })
        })
        .collect();
    let mut active = Vec::new();
    for r in records {
        match r {
            Ok(rec) => active.push(rec),
            Err(s) => {
                log::warn!("matched candidate {} skipped: {}", s.editor, s.reason);
                skipped.push(s);
            }
        }
    }
    if active.is_empty() {
        return Err(CohortError::NoActiveMatched);
    }
    active.sort_by(|a, b| a.id.cmp(&b.id));

    let mut cohort = Cohort {
        missing,
        active,
        matching_mean: mean,
        matching_sigma: sigma,
        mwu_p: f64::NAN,
        created_at: source.snapshot_time(),
        params: params.clone(),
        warnings,
    };
    validate_comparability(&mut cohort);
    Ok(MatchOutcome { cohort, skipped })
}

/// Two-sided Mann-Whitney p-value of the two cohorts' edits-per-day rates.
/// Stored on the cohort; a warning is recorded when p < 0.05.
pub fn validate_comparability(cohort: &mut Cohort) -> f64 {
    let x: Vec<f64> = cohort.missing.iter().map(|r| r.avg_edits_per_day).collect();
    let y: Vec<f64> = cohort.active.iter().map(|r| r.avg_edits_per_day).collect();
    let p = stats::mann_whitney_u(&x, &y)
        .map(|r| r.p_two_sided)
        .unwrap_or(1.0);
    cohort.mwu_p = p;
    if p < 0.05 {
        let w = format!("WARNING: cohorts differ in edits/day (Mann-Whitney p = {p:.4})");
        log::warn!("{w}");
        cohort.warnings.push(w);
    }
    p
}

/// Stage counts of a full curation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationReport {
    pub listed: usize,
    pub filtered: usize,
    pub missing_skipped: usize,
    pub pages_scanned: usize,
    pub candidates: usize,
    pub harvest_skipped: usize,
    pub matched: usize,
    pub candidates_skipped: usize,
    pub matching_mean: f64,
    pub matching_sigma: f64,
    pub mwu_p: f64,
    pub warnings: Vec<String>,
}

/// Runs all three construction steps.
pub fn curate(
    source: &dyn EditSource,
    missing_list: &[MissingEntry],
    params: &CohortParams,
) -> Result<(Cohort, CurationReport), CohortError> {
    let listed = missing_list
        .iter()
        .map(|e| &e.editor)
        .collect::<HashSet<_>>()
        .len();
    let missing = build_missing_cohort(source, missing_list, params)?;
    let harvest = harvest_active_candidates(source, &missing.records, missing_list, params)?;
    let filtered = missing.records.len();
    let outcome = match_active_cohort(source, &harvest.candidates, missing.records, params)?;
    let c = &outcome.cohort;
    let report = CurationReport {
        listed,
        filtered,
        missing_skipped: missing.skipped.len(),
        pages_scanned: harvest.pages_scanned,
        candidates: harvest.candidates.len(),
        harvest_skipped: harvest.skipped.len(),
        matched: c.active.len(),
        candidates_skipped: outcome.skipped.len(),
        matching_mean: c.matching_mean,
        matching_sigma: c.matching_sigma,
        mwu_p: c.mwu_p,
        warnings: c.warnings.clone(),
    };
    Ok((outcome.cohort, report))
}

impl Cohort {
    pub fn records(&self) -> impl Iterator<Item = &EditorRecord> {
        self.missing.iter().chain(self.active.iter())
    }

    /// Checks disjointness and matching soundness from the stored band.
    pub fn check_invariants(&self) -> Result<(), CohortError> {
        let missing: HashSet<&EditorId> = self.missing.iter().map(|r| &r.id).collect();
        if let Some(dup) = self.active.iter().find(|r| missing.contains(&r.id)) {
            return Err(CohortError::Invalid(format!("{} is both missing and active", dup.id)));
        }
        let band = self.matching_sigma * self.params.sigma_scale;
        if let Some(out) = self
            .active
            .iter()
            .find(|r| (r.avg_edits_per_day - self.matching_mean).abs() > band)
        {
            return Err(CohortError::Invalid(format!(
                "{} rate {} outside matching band",
                out.id, out.avg_edits_per_day
            )));
        }
        Ok(())
    }

    pub fn meta(&self, provenance: &Provenance) -> CohortMeta {
        CohortMeta {
            schema_version: artifact::ARTIFACT_SCHEMA_VERSION.into(),
            matching_mean: self.matching_mean,
            matching_sigma: self.matching_sigma,
            mwu_p: self.mwu_p,
            created_at: self.created_at,
            rate_definition: RATE_DEFINITION.into(),
            sigma_kind: SIGMA_KIND.into(),
            params: self.params.clone(),
            warnings: self.warnings.clone(),
            provenance: provenance.clone(),
        }
    }

    /// Writes `cohort.ndjson` (missing then active, each sorted by id) and
    /// `cohort.meta`.
    pub fn write(&self, dir: &Path, provenance: &Provenance) -> Result<(), CohortError> {
        let mut records: Vec<&EditorRecord> = self.records().collect();
        records.sort_by(|a, b| a.label.cmp(&b.label).then_with(|| a.id.cmp(&b.id)));
        artifact::write_ndjson(&dir.join(COHORT_FILE), "cohort", provenance, &records)?;
        artifact::write_json(&dir.join(COHORT_META_FILE), &self.meta(provenance))?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self, CohortError> {
        let records: Vec<EditorRecord> = artifact::read_ndjson(&dir.join(COHORT_FILE))?;
        let meta: CohortMeta = artifact::read_json(&dir.join(COHORT_META_FILE))?;
        let mut by_label: BTreeMap<Label, Vec<EditorRecord>> = BTreeMap::new();
        for r in records {
            by_label.entry(r.label).or_default().push(r);
        }
        Ok(Cohort {
            missing: by_label.remove(&Label::Missing).unwrap_or_default(),
            active: by_label.remove(&Label::Active).unwrap_or_default(),
            matching_mean: meta.matching_mean,
            matching_sigma: meta.matching_sigma,
            mwu_p: meta.mwu_p,
            created_at: meta.created_at,
            params: meta.params,
            warnings: meta.warnings,
        })
    }
}
