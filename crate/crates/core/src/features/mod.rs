//! Grouped editor features.
//!
//! Five groups: activity over the latest edit window (G1), part-of-speech
//! and lexical-category frequencies of the user page (G2), a 512-d sentence
//! vector of the same text (G3), admin score (G4) and average revert count
//! per main-namespace page (G5). Matrices are assembled in group order and
//! min-max normalized with parameters fitted on training rows.

mod empath;
mod encoder;
mod text;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use empath::{empath_features, Lexicons};
pub use encoder::{fnv1a64, hash_slot, FileEncoder, HashingEncoder, SentenceEncoder, SENTENCE_DIM};
pub use text::{
    clean_profile_text, pos_features, pos_frequencies, tagged_tokens, tokenize, PosTag,
    SuffixTagger, Tagger, TokenFilter, PENN_TAGS,
};

use crate::artifact::{self, ArtifactError, Provenance};
use crate::cohort::{Cohort, EditorRecord, Label};
use crate::ingest::{EditEvent, EditorId, Namespace};

pub const SECONDS_PER_MONTH: f64 = 30.44 * 86_400.0;
pub const DAMAGING_THRESHOLD: f64 = 0.5;
pub const FEATURES_FILE: &str = "features.ndjson";
pub const FEATURES_META_FILE: &str = "features.meta";
pub const FEATURES_CSV: &str = "features.csv";

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("no edits in the window")]
    EmptyWindow,
    #[error("lexicon file missing: {0}")]
    LexiconMissing(String),
    #[error("no precomputed embedding for {0}")]
    EmbeddingMissing(EditorId),
    #[error("group {0} is unavailable (no sentence encoder configured)")]
    GroupUnavailable(Group),
    #[error("non-finite value in column {column} for {editor}")]
    NonFinite { editor: EditorId, column: String },
    #[error("bad feature group spec {0:?}")]
    BadGroups(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Group {
    G1,
    G2,
    G3,
    G4,
    G5,
}

impl Group {
    pub const ALL: [Group; 5] = [Group::G1, Group::G2, Group::G3, Group::G4, Group::G5];
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "G{}", *self as usize + 1)
    }
}

/// A non-empty set of groups, always iterated in G1..G5 order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct GroupSet(BTreeSet<Group>);

impl GroupSet {
    pub fn new(groups: impl IntoIterator<Item = Group>) -> Result<Self, FeatureError> {
        let set: BTreeSet<Group> = groups.into_iter().collect();
        if set.is_empty() {
            return Err(FeatureError::BadGroups(String::new()));
        }
        Ok(GroupSet(set))
    }

    pub fn all() -> Self {
        GroupSet(Group::ALL.into_iter().collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = Group> + '_ {
        self.0.iter().copied()
    }

    pub fn contains(&self, g: Group) -> bool {
        self.0.contains(&g)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for GroupSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for g in self.iter() {
            write!(f, "{g}")?;
        }
        Ok(())
    }
}

/// Accepts `G1G4G5`, `G1,G4,G5`, `g1+g4` and similar spellings.
impl FromStr for GroupSet {
    type Err = FeatureError;
    fn from_str(s: &str) -> Result<Self, FeatureError> {
        let bad = || FeatureError::BadGroups(s.to_string());
        let cleaned: String = s
            .chars()
            .filter(|c| !matches!(c, ',' | '+' | ' ' | '⊕'))
            .collect::<String>()
            .to_uppercase();
        if cleaned.is_empty() || cleaned.len() % 2 != 0 {
            return Err(bad());
        }
        let mut groups = Vec::new();
        for chunk in cleaned.as_bytes().chunks(2) {
            let g = match chunk {
                b"G1" => Group::G1,
                b"G2" => Group::G2,
                b"G3" => Group::G3,
                b"G4" => Group::G4,
                b"G5" => Group::G5,
                _ => return Err(bad()),
            };
            groups.push(g);
        }
        GroupSet::new(groups)
    }
}

impl TryFrom<String> for GroupSet {
    type Error = FeatureError;
    fn try_from(s: String) -> Result<Self, FeatureError> {
        s.parse()
    }
}

impl From<GroupSet> for String {
    fn from(g: GroupSet) -> String {
        g.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActivityFeatures {
    pub f1_ns0: u32,
    pub f2_ns1: u32,
    pub f3_ns4: u32,
    pub f4_ns5: u32,
    pub f5_major: u32,
    pub f6_minor: u32,
    pub f7_add_major: f64,
    pub f8_del_major: f64,
    pub f9_add_minor: f64,
    pub f10_del_minor: f64,
    pub f11_span_months: f64,
    pub f12_ores_mean: f64,
    pub f13_goodfaith_count: u32,
    pub f14_damaging_count: u32,
}

pub const ACTIVITY_COLUMNS: [&str; 14] = [
    "f1_ns0", "f2_ns1", "f3_ns4", "f4_ns5", "f5_major", "f6_minor", "f7_add_major",
    "f8_del_major", "f9_add_minor", "f10_del_minor", "f11_span_months", "f12_ores_mean",
    "f13_goodfaith_count", "f14_damaging_count",
];

impl ActivityFeatures {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.f1_ns0 as f64,
            self.f2_ns1 as f64,
            self.f3_ns4 as f64,
            self.f4_ns5 as f64,
            self.f5_major as f64,
            self.f6_minor as f64,
            self.f7_add_major,
            self.f8_del_major,
            self.f9_add_minor,
            self.f10_del_minor,
            self.f11_span_months,
            self.f12_ores_mean,
            self.f13_goodfaith_count as f64,
            self.f14_damaging_count as f64,
        ]
    }
}

fn mean(sum: f64, n: u32) -> f64 {
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Activity features of one editor's edit window (any order).
pub fn activity_features(edits: &[EditEvent]) -> Result<ActivityFeatures, FeatureError> {
    if edits.is_empty() {
        return Err(FeatureError::EmptyWindow);
    }
    let mut sorted: Vec<&EditEvent> = edits.iter().collect();
    sorted.sort_by(|a, b| b.timestamp.cmp(&a.timestamp).then_with(|| a.page.cmp(&b.page)));

    let mut f = ActivityFeatures::default();
    // (sum, count) per (sign, minor) quadrant.
    let mut quad = [[(0.0f64, 0u32); 2]; 2];
    let mut goodfaith = (0.0, 0u32);
    for e in &sorted {
        match e.page.namespace {
            Namespace::Article => f.f1_ns0 += 1,
            Namespace::ArticleTalk => f.f2_ns1 += 1,
            Namespace::Project => f.f3_ns4 += 1,
            Namespace::ProjectTalk => f.f4_ns5 += 1,
        }
        if e.minor {
            f.f6_minor += 1;
        } else {
            f.f5_major += 1;
        }
        if e.byte_delta != 0 {
            let sign = usize::from(e.byte_delta < 0);
            let slot = &mut quad[usize::from(e.minor)][sign];
            slot.0 += e.byte_delta.unsigned_abs() as f64;
            slot.1 += 1;
        }
        if let Some(g) = e.ores_goodfaith_prob {
            goodfaith.0 += g;
            goodfaith.1 += 1;
        }
        if let Some(d) = e.ores_damaging_prob {
            if d < DAMAGING_THRESHOLD {
                f.f13_goodfaith_count += 1;
            } else {
                f.f14_damaging_count += 1;
            }
        }
    }
    f.f7_add_major = mean(quad[0][0].0, quad[0][0].1);
    f.f8_del_major = mean(quad[0][1].0, quad[0][1].1);
    f.f9_add_minor = mean(quad[1][0].0, quad[1][0].1);
    f.f10_del_minor = mean(quad[1][1].0, quad[1][1].1);
    let newest = sorted[0].timestamp;
    let oldest = sorted[sorted.len() - 1].timestamp;
    f.f11_span_months = ((newest - oldest) as f64 / 86_400.0) / 30.44;
    f.f12_ores_mean = mean(goodfaith.0, goodfaith.1);
    Ok(f)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityFeatures {
    pub f15_revert_rate: f64,
    pub f16_admin_score: f64,
}

/// Revert rate over the editor's top main-namespace pages and admin score.
/// An editor with no main-namespace pages gets a revert rate of 0.
pub fn quality_features(record: &EditorRecord) -> QualityFeatures {
    let pages = &record.main_page_reverts;
    if pages.is_empty() {
        log::warn!("{} has no main-namespace pages; revert rate set to 0", record.id);
    }
    let total: u64 = pages.iter().sum();
    QualityFeatures {
        f15_revert_rate: total as f64 / pages.len().max(1) as f64,
        f16_admin_score: record.admin_score,
    }
}

/// Text-side feature extractors.
pub struct TextPipeline {
    pub tagger: Box<dyn Tagger>,
    pub filter: TokenFilter,
    pub lexicons: Lexicons,
    pub encoder: Option<Box<dyn SentenceEncoder>>,
}

impl Default for TextPipeline {
    fn default() -> Self {
        TextPipeline {
            tagger: Box::new(SuffixTagger::default()),
            filter: TokenFilter::default(),
            lexicons: Lexicons::builtin(),
            encoder: Some(Box::new(HashingEncoder)),
        }
    }
}

/// All features of one editor. Part-of-speech frequencies are kept as
/// tagged tokens so common-word removal can be fitted later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub editor: EditorId,
    pub label: Label,
    pub g1: ActivityFeatures,
    pub tagged: Vec<(String, PosTag)>,
    pub empath: Vec<f64>,
    pub sentence_vec: Option<Vec<f64>>,
    pub admin_score: f64,
    pub revert_rate: f64,
}

impl FeatureVector {
    pub fn pos_freq(&self, exclude: &BTreeSet<String>) -> Vec<f64> {
        pos_frequencies(&self.tagged, exclude)
    }

    pub fn g2(&self, exclude: &BTreeSet<String>) -> Vec<f64> {
        let mut v = self.pos_freq(exclude);
        v.extend_from_slice(&self.empath);
        v
    }
}

pub fn featurize(record: &EditorRecord, text: &TextPipeline) -> Result<FeatureVector, FeatureError> {
    let g1 = activity_features(&record.latest_edits)?;
    let q = quality_features(record);
    let sentences = clean_profile_text(&record.profile_text);
    let sentence_vec = match &text.encoder {
        Some(enc) => Some(enc.encode(&record.id, &sentences)?),
        None => None,
    };
    Ok(FeatureVector {
        editor: record.id.clone(),
        label: record.label,
        g1,
        tagged: tagged_tokens(&sentences, text.tagger.as_ref(), &text.filter),
        empath: empath_features(&sentences, &text.lexicons),
        sentence_vec,
        admin_score: q.f16_admin_score,
        revert_rate: q.f15_revert_rate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSetMeta {
    pub schema_version: String,
    pub empath_names: Vec<String>,
    pub has_sentence_vectors: bool,
    pub skipped: Vec<(EditorId, String)>,
    #[serde(flatten)]
    pub provenance: Provenance,
}

/// Feature vectors of a cohort, sorted by (label, editor).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub empath_names: Vec<String>,
    pub has_sentence_vectors: bool,
    pub vectors: Vec<FeatureVector>,
    /// Editors that could not be featurized, with the reason.
    pub skipped: Vec<(EditorId, String)>,
}

impl FeatureSet {
    pub fn from_records<'a>(
        records: impl IntoIterator<Item = &'a EditorRecord>,
        text: &TextPipeline,
    ) -> Self {
        let records: Vec<&EditorRecord> = records.into_iter().collect();
        let results: Vec<Result<FeatureVector, FeatureError>> =
            records.par_iter().map(|r| featurize(r, text)).collect();
        let mut vectors = Vec::new();
        let mut skipped = Vec::new();
        for (r, res) in records.iter().zip(results) {
            match res {
                Ok(v) => vectors.push(v),
                Err(e) => {
                    log::warn!("featurize skipped {}: {e}", r.id);
                    skipped.push((r.id.clone(), e.to_string()));
                }
            }
        }
        vectors.sort_by(|a, b| a.label.cmp(&b.label).then_with(|| a.editor.cmp(&b.editor)));
        FeatureSet {
            empath_names: text.lexicons.names().map(String::from).collect(),
            has_sentence_vectors: text.encoder.is_some(),
            vectors,
            skipped,
        }
    }

    pub fn from_cohort(cohort: &Cohort, text: &TextPipeline) -> Self {
        Self::from_records(cohort.records(), text)
    }

    pub fn columns(&self, groups: &GroupSet) -> Vec<String> {
        let mut cols = Vec::new();
        for g in groups.iter() {
            match g {
                Group::G1 => cols.extend(ACTIVITY_COLUMNS.iter().map(|c| format!("g1.{c}"))),
                Group::G2 => {
                    cols.extend(PENN_TAGS.iter().map(|t| format!("g2.pos_{t}")));
                    cols.extend(self.empath_names.iter().map(|n| format!("g2.empath_{n}")));
                }
                Group::G3 => cols.extend((0..SENTENCE_DIM).map(|i| format!("g3.sv_{i:03}"))),
                Group::G4 => cols.push("g4.admin_score".into()),
                Group::G5 => cols.push("g5.revert_rate".into()),
            }
        }
        cols
    }

    /// Raw (unnormalized) matrix over the given rows, in group order.
    pub fn assemble(
        &self,
        rows: &[usize],
        groups: &GroupSet,
        exclude: &BTreeSet<String>,
    ) -> Result<FeatureMatrix, FeatureError> {
        if groups.contains(Group::G3) && !self.has_sentence_vectors {
            return Err(FeatureError::GroupUnavailable(Group::G3));
        }
        let columns = self.columns(groups);
        let mut out = FeatureMatrix {
            columns,
            editors: Vec::with_capacity(rows.len()),
            rows: Vec::with_capacity(rows.len()),
            labels: Vec::with_capacity(rows.len()),
        };
        for &i in rows {
            let v = &self.vectors[i];
            let mut row = Vec::with_capacity(out.columns.len());
            for g in groups.iter() {
                match g {
                    Group::G1 => row.extend(v.g1.to_vec()),
                    Group::G2 => row.extend(v.g2(exclude)),
                    Group::G3 => match &v.sentence_vec {
                        Some(s) => row.extend_from_slice(s),
                        None => return Err(FeatureError::GroupUnavailable(Group::G3)),
                    },
                    Group::G4 => row.push(v.admin_score),
                    Group::G5 => row.push(v.revert_rate),
                }
            }
            if let Some(j) = row.iter().position(|x| !x.is_finite()) {
                return Err(FeatureError::NonFinite {
                    editor: v.editor.clone(),
                    column: out.columns[j].clone(),
                });
            }
            out.editors.push(v.editor.clone());
            out.rows.push(row);
            out.labels.push(v.label);
        }
        Ok(out)
    }

    pub fn assemble_all(&self, groups: &GroupSet) -> Result<FeatureMatrix, FeatureError> {
        let rows: Vec<usize> = (0..self.vectors.len()).collect();
        self.assemble(&rows, groups, &BTreeSet::new())
    }

    pub fn write(&self, dir: &Path, provenance: &Provenance) -> Result<(), FeatureError> {
        artifact::write_ndjson(&dir.join(FEATURES_FILE), "features", provenance, &self.vectors)?;
        let meta = FeatureSetMeta {
            schema_version: artifact::ARTIFACT_SCHEMA_VERSION.into(),
            empath_names: self.empath_names.clone(),
            has_sentence_vectors: self.has_sentence_vectors,
            skipped: self.skipped.clone(),
            provenance: provenance.clone(),
        };
        artifact::write_json(&dir.join(FEATURES_META_FILE), &meta)?;
        let groups = if self.has_sentence_vectors {
            GroupSet::all()
        } else {
            GroupSet::new([Group::G1, Group::G2, Group::G4, Group::G5])?
        };
        let matrix = self.assemble_all(&groups)?;
        artifact::write_csv(&dir.join(FEATURES_CSV), provenance, &matrix.to_csv())?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self, FeatureError> {
        let vectors = artifact::read_ndjson(&dir.join(FEATURES_FILE))?;
        let meta: FeatureSetMeta = artifact::read_json(&dir.join(FEATURES_META_FILE))?;
        Ok(FeatureSet {
            empath_names: meta.empath_names,
            has_sentence_vectors: meta.has_sentence_vectors,
            vectors,
            skipped: meta.skipped,
        })
    }
}

/// Words used by at least one missing and at least one active editor among
/// the given rows.
pub fn common_words(vectors: &[FeatureVector], rows: &[usize]) -> BTreeSet<String> {
    let mut seen: HashMap<&str, (bool, bool)> = HashMap::new();
    for &i in rows {
        let v = &vectors[i];
        for (tok, _) in &v.tagged {
            let e = seen.entry(tok.as_str()).or_default();
            match v.label {
                Label::Missing => e.0 = true,
                Label::Active => e.1 = true,
                Label::Unlabeled => {}
            }
        }
    }
    seen.into_iter()
        .filter(|(_, (m, a))| *m && *a)
        .map(|(w, _)| w.to_string())
        .collect()
}

/// Dense row-major matrix with column names and per-row labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub columns: Vec<String>,
    pub editors: Vec<EditorId>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
}

impl FeatureMatrix {
    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("editor,");
        s.push_str(&self.columns.join(","));
        s.push_str(",label\n");
        for ((ed, row), label) in self.editors.iter().zip(&self.rows).zip(&self.labels) {
            s.push_str(ed.as_str());
            for x in row {
                s.push(',');
                s.push_str(&x.to_string());
            }
            s.push(',');
            s.push_str(label.as_str());
            s.push('\n');
        }
        s
    }

    pub fn normalize_with(&self, params: &MinMax) -> FeatureMatrix {
        FeatureMatrix {
            rows: self.rows.iter().map(|r| params.transform(r)).collect(),
            ..self.clone()
        }
    }
}

/// Per-column min-max scaling. Constant columns map to 0; values outside
/// the fitted range are not clipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMax {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let width = rows.first().map_or(0, Vec::len);
        let mut min = vec![f64::INFINITY; width];
        let mut max = vec![f64::NEG_INFINITY; width];
        for r in rows {
            for (j, &x) in r.iter().enumerate() {
                min[j] = min[j].min(x);
                max[j] = max[j].max(x);
            }
        }
        MinMax { min, max }
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.min.iter().zip(&self.max))
            .map(|(&x, (&lo, &hi))| if hi > lo { (x - lo) / (hi - lo) } else { 0.0 })
            .collect()
    }
}
