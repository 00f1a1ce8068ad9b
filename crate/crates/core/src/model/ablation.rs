//! Feature-group ablation: best classifier per group combination.

use super::{
    fit_on_rows, split_set, EvalReport, FitSpec, Hyperparams, ModelError, ModelKind, SplitSpec,
};
use crate::features::{FeatureSet, GroupSet};

pub const ABLATION_HEADER: &str = "features,classifier,precision,recall,f-score,accuracy";

const DEFAULT_COMBOS: [&str; 13] = [
    "G1", "G2", "G3", "G1G2", "G1G3", "G1G4", "G1G5", "G1G2G4", "G1G3G4", "G1G4G5", "G1G3G5",
    "G1G2G4G5", "G1G3G4G5",
];

/// The thirteen default combinations, in table order.
pub fn default_combos() -> Vec<GroupSet> {
    DEFAULT_COMBOS
        .iter()
        .map(|s| s.parse().expect("valid combo"))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum AblationOutcome {
    Best { kind: ModelKind, report: EvalReport },
    Skipped(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub groups: GroupSet,
    pub outcome: AblationOutcome,
}

impl AblationRow {
    pub fn accuracy(&self) -> Option<f64> {
        match &self.outcome {
            AblationOutcome::Best { report, .. } => Some(report.accuracy),
            AblationOutcome::Skipped(_) => None,
        }
    }

    pub fn csv_line(&self) -> String {
        let name = self
            .groups
            .iter()
            .map(|g| g.to_string())
            .collect::<Vec<_>>()
            .join("+");
        match &self.outcome {
            AblationOutcome::Best { kind, report } => format!(
                "{name},{kind},{:.4},{:.4},{:.4},{:.4}",
                report.weighted_precision, report.weighted_recall, report.weighted_f1, report.accuracy
            ),
            AblationOutcome::Skipped(_) => format!("{name},skipped,,,,"),
        }
    }
}

/// Trains every kind on each combination over one shared split and keeps
/// the best by accuracy, then weighted F1, then kind order. Combinations
/// whose groups cannot be assembled are marked skipped.
pub fn run_ablation(
    set: &FeatureSet,
    combos: &[GroupSet],
    kinds: &[ModelKind],
    split: &SplitSpec,
    hyperparams: &Hyperparams,
    seed: u64,
    remove_common_words: bool,
) -> Result<Vec<AblationRow>, ModelError> {
    let part = split_set(set, split)?;
    let mut rows = Vec::with_capacity(combos.len());
    for groups in combos {
        let mut best: Option<(ModelKind, EvalReport)> = None;
        let mut skipped = None;
        for &kind in ModelKind::ALL.iter().filter(|k| kinds.contains(k)) {
            let spec = FitSpec {
                kind,
                groups: groups.clone(),
                hyperparams: *hyperparams,
                seed,
                remove_common_words,
            };
            let model = match fit_on_rows(set, &part.train, &spec) {
                Ok(m) => m,
                Err(ModelError::Feature(e)) => {
                    log::warn!("ablation row {groups} skipped: {e}");
                    skipped = Some(e.to_string());
                    break;
                }
                Err(e) => return Err(e),
            };
            let report = model.evaluate(&model.prepare(set, &part.test)?)?;
            let better = match &best {
                None => true,
                Some((_, b)) => {
                    report.accuracy > b.accuracy
                        || (report.accuracy == b.accuracy && report.weighted_f1 > b.weighted_f1)
                }
            };
            if better {
                best = Some((kind, report));
            }
        }
        let outcome = match (skipped, best) {
            (Some(reason), _) => AblationOutcome::Skipped(reason),
            (None, Some((kind, report))) => AblationOutcome::Best { kind, report },
            (None, None) => AblationOutcome::Skipped("no classifier kinds selected".into()),
        };
        rows.push(AblationRow { groups: groups.clone(), outcome });
    }
    Ok(rows)
}
