//! Global and local explanations of trained models, and a 2-D projection
//! of sentence vectors.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cohort::Label;
use crate::features::FeatureMatrix;
use crate::ingest::EditorId;
use crate::model::{EvalReport, ModelError, TrainedModel};

pub const DEFAULT_SAMPLES: usize = 5000;
pub const DEFAULT_KERNEL_WIDTH: f64 = 0.75;
pub const DEFAULT_RIDGE: f64 = 1.0;
pub const DEFAULT_TOP_K: usize = 5;
pub const PCA_TOLERANCE: f64 = 1e-9;
const PCA_MAX_ITER: usize = 20_000;

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("model has no splits")]
    NoSplits,
    #[error("background holds fewer than 2 distinct rows")]
    DegenerateBackground,
    #[error("all vectors are identical")]
    RankDeficient,
    #[error("need at least {need} rows, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("repeats and sample counts must be positive")]
    BadParameter,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    GiniImpurity,
    Permutation,
    LocalSurrogate,
}

/// Feature scores, highest first (ties keep column order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRanking {
    pub method: Method,
    pub entries: Vec<(String, f64)>,
}

impl ImportanceRanking {
    fn from_scores(method: Method, names: &[String], scores: Vec<f64>) -> Self {
        let mut entries: Vec<(usize, f64)> = scores.into_iter().enumerate().collect();
        entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ImportanceRanking {
            method,
            entries: entries.into_iter().map(|(j, s)| (names[j].clone(), s)).collect(),
        }
    }

    pub fn score(&self, feature: &str) -> Option<f64> {
        self.entries.iter().find(|(n, _)| n == feature).map(|(_, s)| *s)
    }

    pub fn top(&self, k: usize) -> impl Iterator<Item = &str> {
        self.entries.iter().take(k).map(|(n, _)| n.as_str())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("feature,score\n");
        for (n, v) in &self.entries {
            s.push_str(&format!("{n},{v}\n"));
        }
        s
    }
}

fn column_names(model: &TrainedModel, width: usize) -> Vec<String> {
    if model.columns.len() == width {
        model.columns.clone()
    } else {
        (0..width).map(|j| format!("x{j}")).collect()
    }
}

fn model_width(model: &TrainedModel) -> usize {
    model.n_features
}

/// Split gains per feature, normalized within each tree, weighted by the
/// tree's ensemble weight and normalized to sum to 1.
pub fn gini_importance(model: &TrainedModel) -> Result<ImportanceRanking, ExplainError> {
    let width = model_width(model);
    let mut total = vec![0.0; width];
    for (tree, w) in model.trees.iter().zip(&model.tree_weights) {
        let mut per = vec![0.0; width];
        for (f, gain) in tree.splits() {
            per[f] += gain;
        }
        let s: f64 = per.iter().sum();
        if s > 0.0 {
            for (t, p) in total.iter_mut().zip(per) {
                *t += w.abs() * p / s;
            }
        }
    }
    let s: f64 = total.iter().sum();
    if s <= 0.0 {
        return Err(ExplainError::NoSplits);
    }
    let scores = total.into_iter().map(|v| v / s).collect();
    Ok(ImportanceRanking::from_scores(
        Method::GiniImpurity,
        &column_names(model, width),
        scores,
    ))
}

fn accuracy(model: &TrainedModel, rows: &[Vec<f64>], labels: &[Label]) -> f64 {
    let correct = rows
        .iter()
        .zip(labels)
        .filter(|(r, &l)| (model.predict_label(r) == Label::Missing) == (l == Label::Missing))
        .count();
    correct as f64 / rows.len().max(1) as f64
}

/// Mean accuracy drop when one column is shuffled, over `repeats` shuffles.
/// Drops are not clipped at zero.
pub fn permutation_importance(
    model: &TrainedModel,
    m: &FeatureMatrix,
    repeats: usize,
    seed: u64,
) -> Result<ImportanceRanking, ExplainError> {
    model.check_layout(m)?;
    if repeats == 0 {
        return Err(ExplainError::BadParameter);
    }
    let width = m.width();
    let base = accuracy(model, &m.rows, &m.labels);
    let scores: Vec<f64> = (0..width)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            let mut rows = m.rows.clone();
            let original: Vec<f64> = m.rows.iter().map(|r| r[j]).collect();
            let mut drop = 0.0;
            for _ in 0..repeats {
                let mut col = original.clone();
                col.shuffle(&mut rng);
                for (r, v) in rows.iter_mut().zip(&col) {
                    r[j] = *v;
                }
                drop += base - accuracy(model, &rows, &m.labels);
            }
            drop / repeats as f64
        })
        .collect();
    Ok(ImportanceRanking::from_scores(Method::Permutation, &m.columns, scores))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateParams {
    pub n_samples: usize,
    pub kernel_width: f64,
    pub ridge: f64,
    pub k: usize,
    pub seed: u64,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        SurrogateParams {
            n_samples: DEFAULT_SAMPLES,
            kernel_width: DEFAULT_KERNEL_WIDTH,
            ridge: DEFAULT_RIDGE,
            k: DEFAULT_TOP_K,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalExplanation {
    pub editor: EditorId,
    pub top_features: Vec<(String, f64)>,
    pub surrogate_fit_r2: f64,
}

/// A local explanation plus the full coefficient vector it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateFit {
    pub explanation: LocalExplanation,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

/// Solves `a x = b` for symmetric positive definite `a` (Cholesky).
fn solve_spd(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for j in 0..n {
        let mut d = a[j][j];
        for k in 0..j {
            d -= a[j][k] * a[j][k];
        }
        let d = d.max(1e-300).sqrt();
        a[j][j] = d;
        for i in j + 1..n {
            let mut s = a[i][j];
            for k in 0..j {
                s -= a[i][k] * a[j][k];
            }
            a[i][j] = s / d;
        }
    }
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i][k] * b[k];
        }
        b[i] = s / a[i][i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= a[k][i] * b[k];
        }
        b[i] = s / a[i][i];
    }
    b
}

/// Weighted ridge regression with an unpenalized intercept. Returns
/// (intercept, coefficients, weighted R^2).
pub fn weighted_ridge(x: &[Vec<f64>], y: &[f64], w: &[f64], lambda: f64) -> (f64, Vec<f64>, f64) {
    let d = x.first().map_or(0, Vec::len);
    let sw: f64 = w.iter().sum();
    if !(sw > 0.0) || !sw.is_finite() {
        return (0.0, vec![0.0; d], 0.0);
    }
    let mut xbar = vec![0.0; d];
    let mut ybar = 0.0;
    for ((r, &t), &wi) in x.iter().zip(y).zip(w) {
        for (m, v) in xbar.iter_mut().zip(r) {
            *m += wi * v;
        }
        ybar += wi * t;
    }
    for m in &mut xbar {
        *m /= sw;
    }
    ybar /= sw;
    let mut gram = vec![vec![0.0; d]; d];
    let mut rhs = vec![0.0; d];
    let mut xc = vec![0.0; d];
    for ((r, &t), &wi) in x.iter().zip(y).zip(w) {
        if wi == 0.0 {
            continue;
        }
        for j in 0..d {
            xc[j] = r[j] - xbar[j];
        }
        let tc = t - ybar;
        for i in 0..d {
            let wxi = wi * xc[i];
            rhs[i] += wxi * tc;
            let row = &mut gram[i];
            for j in 0..=i {
                row[j] += wxi * xc[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            gram[j][i] = gram[i][j];
        }
        gram[i][i] += lambda;
    }
    let beta = solve_spd(gram, rhs);
    let intercept = ybar - beta.iter().zip(&xbar).map(|(b, m)| b * m).sum::<f64>();
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for ((r, &t), &wi) in x.iter().zip(y).zip(w) {
        let pred = intercept + beta.iter().zip(r).map(|(b, v)| b * v).sum::<f64>();
        ss_res += wi * (t - pred).powi(2);
        ss_tot += wi * (t - ybar).powi(2);
    }
    let r2 = if ss_tot > 0.0 && ss_tot.is_finite() { 1.0 - ss_res / ss_tot } else { 0.0 };
    (intercept, beta, r2)
}

/// Fits a kernel-weighted linear surrogate of the model around `instance`,
/// sampling each feature independently from the background columns.
pub fn local_surrogate(
    model: &TrainedModel,
    editor: &EditorId,
    instance: &[f64],
    background: &[Vec<f64>],
    names: &[String],
    params: &SurrogateParams,
) -> Result<SurrogateFit, ExplainError> {
    if params.n_samples == 0 || params.kernel_width <= 0.0 {
        return Err(ExplainError::BadParameter);
    }
    let width = instance.len();
    let distinct = background.iter().any(|r| r != &background[0]);
    if background.len() < 2 || !distinct {
        return Err(ExplainError::DegenerateBackground);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let kw = params.kernel_width * (width as f64).sqrt();
    let mut xs = Vec::with_capacity(params.n_samples);
    let mut ys = Vec::with_capacity(params.n_samples);
    let mut ws = Vec::with_capacity(params.n_samples);
    for _ in 0..params.n_samples {
        let z: Vec<f64> = (0..width)
            .map(|j| background[rng.random_range(0..background.len())][j])
            .collect();
        let d2: f64 = z.iter().zip(instance).map(|(a, b)| (a - b).powi(2)).sum();
        ws.push((-d2 / (kw * kw)).exp());
        ys.push(model.predict_proba(&z));
        xs.push(z);
    }
    let (intercept, coefficients, r2) = weighted_ridge(&xs, &ys, &ws, params.ridge);
    let mut order: Vec<usize> = (0..width).collect();
    order.sort_by(|&a, &b| coefficients[b].abs().total_cmp(&coefficients[a].abs()).then(a.cmp(&b)));
    let top_features = order
        .into_iter()
        .take(params.k.min(width))
        .map(|j| (names[j].clone(), coefficients[j]))
        .collect();
    Ok(SurrogateFit {
        explanation: LocalExplanation {
            editor: editor.clone(),
            top_features,
            surrogate_fit_r2: r2,
        },
        intercept,
        coefficients,
    })
}

/// Global ranking from many local fits: mean absolute coefficient.
pub fn surrogate_ranking(fits: &[SurrogateFit], names: &[String]) -> ImportanceRanking {
    let mut mean = vec![0.0; names.len()];
    for f in fits {
        for (m, c) in mean.iter_mut().zip(&f.coefficients) {
            *m += c.abs();
        }
    }
    let n = fits.len().max(1) as f64;
    ImportanceRanking::from_scores(
        Method::LocalSurrogate,
        names,
        mean.into_iter().map(|v| v / n).collect(),
    )
}

/// How often each feature appears among the local top-k, most frequent first.
pub fn top_k_frequency(explanations: &[LocalExplanation]) -> Vec<(String, usize)> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for e in explanations {
        for (name, _) in &e.top_features {
            *counts.entry(name).or_default() += 1;
        }
    }
    let mut v: Vec<(String, usize)> = counts.into_iter().map(|(n, c)| (n.to_string(), c)).collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v
}

/// Fits surrogates for every row of `targets` against the `background` rows.
pub fn explain_rows(
    model: &TrainedModel,
    targets: &FeatureMatrix,
    background: &FeatureMatrix,
    params: &SurrogateParams,
) -> Result<Vec<SurrogateFit>, ExplainError> {
    model.check_layout(targets)?;
    targets
        .rows
        .par_iter()
        .zip(&targets.editors)
        .enumerate()
        .map(|(i, (row, editor))| {
            let p = SurrogateParams { seed: params.seed ^ i as u64, ..*params };
            local_surrogate(model, editor, row, &background.rows, &targets.columns, &p)
        })
        .collect()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    n
}

/// Leading eigenvector of `Xc^T Xc` orthogonal to `deflate`, by power iteration.
fn principal_direction(xc: &[Vec<f64>], deflate: &[Vec<f64>]) -> Option<Vec<f64>> {
    let d = xc[0].len();
    let orthogonalize = |v: &mut Vec<f64>| {
        for u in deflate {
            let dot: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            for (x, y) in v.iter_mut().zip(u) {
                *x -= dot * y;
            }
        }
    };
    let ramp: Vec<f64> = (0..d).map(|j| 1.0 + j as f64 / d as f64).collect();
    let basis = (0..d).map(|k| (0..d).map(|j| f64::from(u8::from(j == k))).collect::<Vec<f64>>());
    for start in std::iter::once(ramp).chain(basis) {
        if let Some(v) = iterate(xc, start, &orthogonalize) {
            return Some(v);
        }
    }
    None
}

fn iterate(xc: &[Vec<f64>], mut v: Vec<f64>, orthogonalize: &dyn Fn(&mut Vec<f64>)) -> Option<Vec<f64>> {
    let d = v.len();
    orthogonalize(&mut v);
    if normalize(&mut v) <= 1e-12 {
        return None;
    }
    for _ in 0..PCA_MAX_ITER {
        let proj: Vec<f64> = xc.iter().map(|r| r.iter().zip(&v).map(|(a, b)| a * b).sum()).collect();
        let mut next = vec![0.0; d];
        for (r, p) in xc.iter().zip(&proj) {
            for (n, x) in next.iter_mut().zip(r) {
                *n += p * x;
            }
        }
        orthogonalize(&mut next);
        if normalize(&mut next) <= 1e-12 {
            return None;
        }
        let delta: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        v = next;
        if delta < PCA_TOLERANCE {
            break;
        }
    }
    // Sign: largest-magnitude component positive.
    let (_, &big) = v
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
        .expect("non-empty");
    if big < 0.0 {
        for x in &mut v {
            *x = -*x;
        }
    }
    Some(v)
}

/// Mean-centered projection onto the first two principal directions.
pub fn project_2d(vectors: &[Vec<f64>], labels: &[Label]) -> Result<Vec<(f64, f64, Label)>, ExplainError> {
    if vectors.len() < 3 {
        return Err(ExplainError::TooFew { need: 3, got: vectors.len() });
    }
    let d = vectors[0].len();
    let n = vectors.len() as f64;
    let mut mean = vec![0.0; d];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let xc: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| v.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect();
    if xc.iter().flatten().all(|&x| x.abs() < 1e-15) {
        return Err(ExplainError::RankDeficient);
    }
    let u1 = principal_direction(&xc, &[]).ok_or(ExplainError::RankDeficient)?;
    let u2 = principal_direction(&xc, std::slice::from_ref(&u1));
    let dot = |r: &[f64], u: &[f64]| r.iter().zip(u).map(|(a, b)| a * b).sum::<f64>();
    Ok(xc
        .iter()
        .zip(labels)
        .map(|(r, &l)| (dot(r, &u1), u2.as_ref().map_or(0.0, |u| dot(r, u)), l))
        .collect())
}

pub fn projection_csv(editors: &[EditorId], points: &[(f64, f64, Label)]) -> String {
    let mut s = String::from("editor,x,y,label\n");
    for (e, (x, y, l)) in editors.iter().zip(points) {
        s.push_str(&format!("{e},{x},{y},{}\n", l.as_str()));
    }
    s
}

/// Evaluation report of a model on a matrix; re-exported for report writers.
pub fn evaluate(model: &TrainedModel, m: &FeatureMatrix) -> Result<EvalReport, ExplainError> {
    Ok(model.evaluate(m)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{train, Hyperparams, ModelKind};

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|j| format!("x{j}")).collect()
    }

    fn matrix(rows: Vec<Vec<f64>>, labels: Vec<Label>) -> FeatureMatrix {
        let w = rows[0].len();
        FeatureMatrix {
            columns: names(w),
            editors: (0..rows.len()).map(|i| EditorId::new(format!("e{i}")).unwrap()).collect(),
            rows,
            labels,
        }
    }

    fn signal_data() -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|i| vec![rng.random::<f64>(), f64::from(u8::from(i % 2 == 0)), 0.5, rng.random::<f64>()])
            .collect();
        let y = (0..200).map(|i| i % 2 == 0).collect();
        (rows, y)
    }

    #[test]
    fn gini_single_feature_and_constant() {
        let (rows, y) = signal_data();
        let m = train(ModelKind::DecisionTree, &rows, &y, &Hyperparams::default(), 0).unwrap();
        let g = gini_importance(&m).unwrap();
        assert_eq!(g.entries[0], ("x1".to_string(), 1.0));
        assert_eq!(g.score("x2"), Some(0.0));
        let f = train(ModelKind::RandomForest, &rows, &y, &Hyperparams { trees: 30, ..Default::default() }, 0).unwrap();
        let g = gini_importance(&f).unwrap();
        assert!((g.entries.iter().map(|e| e.1).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(g.entries.iter().all(|e| e.1 >= 0.0));
        assert_eq!(g.entries[0].0, "x1");
        assert_eq!(g.score("x2"), Some(0.0));
    }

    #[test]
    fn gini_no_splits() {
        let rows = vec![vec![1.0]; 6];
        let y = vec![true, false, true, false, true, false];
        let m = train(ModelKind::DecisionTree, &rows, &y, &Hyperparams::default(), 0).unwrap();
        assert!(matches!(gini_importance(&m), Err(ExplainError::NoSplits)));
    }

    #[test]
    fn permutation_signal_and_constant() {
        let (rows, y) = signal_data();
        let m = train(ModelKind::DecisionTree, &rows, &y, &Hyperparams::default(), 0).unwrap();
        let labels = y.iter().map(|&b| if b { Label::Missing } else { Label::Active }).collect();
        let mx = matrix(rows, labels);
        let p = permutation_importance(&m, &mx, 5, 3).unwrap();
        assert_eq!(p.entries[0].0, "x1");
        assert!((p.entries[0].1 - 0.5).abs() < 0.15);
        assert_eq!(p.score("x2"), Some(0.0));
        assert_eq!(p, permutation_importance(&m, &mx, 5, 3).unwrap());
    }

    #[test]
    fn ridge_recovers_line() {
        let x: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 10.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| 2.0 + 3.0 * r[0]).collect();
        let (b, beta, r2) = weighted_ridge(&x, &y, &vec![1.0; 50], 0.0);
        assert!((b - 2.0).abs() < 1e-9 && (beta[0] - 3.0).abs() < 1e-9);
        assert!((r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn surrogate_k_clipped_and_far_instance() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 40.0, (i % 3) as f64 / 2.0]).collect();
        let y: Vec<bool> = rows.iter().map(|r| r[0] > 0.5).collect();
        let m = train(ModelKind::RandomForest, &rows, &y, &Hyperparams { trees: 20, ..Default::default() }, 0).unwrap();
        let e = EditorId::new("x").unwrap();
        let p = SurrogateParams { n_samples: 500, ..Default::default() };
        let fit = local_surrogate(&m, &e, &rows[5], &rows, &names(2), &p).unwrap();
        assert_eq!(fit.explanation.top_features.len(), 2);
        assert_eq!(fit.explanation.top_features[0].0, "x0");
        assert!(fit.explanation.top_features[0].1 > 0.0);
        let far = SurrogateParams { kernel_width: 1e-3, ..p };
        let fit = local_surrogate(&m, &e, &[100.0, 100.0], &rows, &names(2), &far).unwrap();
        assert_eq!(fit.explanation.surrogate_fit_r2, 0.0);
        assert!(matches!(
            local_surrogate(&m, &e, &rows[0], &[rows[0].clone(), rows[0].clone()], &names(2), &p),
            Err(ExplainError::DegenerateBackground)
        ));
    }

    #[test]
    fn projection_cases() {
        let line: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, 2.0 * i as f64, -(i as f64)]).collect();
        let labels = vec![Label::Missing; 5];
        let p = project_2d(&line, &labels).unwrap();
        assert!(p.iter().all(|(_, y, _)| y.abs() < 1e-6));

        let basis = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let p = project_2d(&basis, &labels[..3]).unwrap();
        for i in 0..3 {
            for j in i + 1..3 {
                let d = ((p[i].0 - p[j].0).powi(2) + (p[i].1 - p[j].1).powi(2)).sqrt();
                assert!((d - 2f64.sqrt()).abs() < 1e-9, "{d}");
            }
        }
        assert!(matches!(
            project_2d(&vec![vec![1.0, 2.0]; 4], &labels[..4]),
            Err(ExplainError::RankDeficient)
        ));
    }
}
