//! Statistical primitives used across the pipeline.
//!
//! Everything here works on plain `f64` slices. Standard deviations are
//! population deviations (divide by `n`) throughout.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

/// Combined sample size up to which the Mann-Whitney p-value is computed by
/// full enumeration of rank assignments.
pub const EXACT_MWU_MAX_N: usize = 14;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("sample is empty")]
    EmptySample,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least two observations, got {0}")]
    TooFew(usize),
    #[error("correlation undefined: constant input")]
    ConstantInput,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

/// Population mean and standard deviation.
pub fn describe(sample: &[f64]) -> Result<DescriptiveStats, StatsError> {
    if sample.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let var = sample.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(DescriptiveStats {
        mean,
        std: var.sqrt(),
        n: sample.len(),
    })
}

/// How the Mann-Whitney p-value is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MwuMethod {
    /// Exact when the combined size is at most [`EXACT_MWU_MAX_N`].
    #[default]
    Auto,
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MwuResult {
    /// U statistic of the first sample (midranks for ties).
    pub u: f64,
    /// Two-sided p-value in (0, 1].
    pub p_two_sided: f64,
    pub exact: bool,
}

/// Two-sided Mann-Whitney U test of `x` against `y`.
pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> Result<MwuResult, StatsError> {
    mann_whitney_u_with(x, y, MwuMethod::Auto)
}

pub fn mann_whitney_u_with(
    x: &[f64],
    y: &[f64],
    method: MwuMethod,
) -> Result<MwuResult, StatsError> {
    if x.is_empty() || y.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let n1 = x.len();
    let n2 = y.len();
    let pooled: Vec<f64> = x.iter().chain(y.iter()).copied().collect();
    let ranks = midranks(&pooled);
    let rank_sum_x: f64 = ranks[..n1].iter().sum();
    let u = rank_sum_x - (n1 * (n1 + 1)) as f64 / 2.0;

    let exact = match method {
        MwuMethod::Auto => n1 + n2 <= EXACT_MWU_MAX_N,
        MwuMethod::Exact => true,
        MwuMethod::Normal => false,
    };
    let p = if exact {
        exact_p(&ranks, n1, u)
    } else {
        normal_p(&pooled, n1, n2, u)
    };
    Ok(MwuResult {
        u,
        p_two_sided: p.clamp(f64::MIN_POSITIVE, 1.0),
        exact,
    })
}

/// 1-based ranks with ties assigned their average rank.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = avg;
        }
        i = j;
    }
    ranks
}

// Permutation distribution of U conditional on the observed (tied) ranks:
// every choice of n1 positions out of n is equally likely under H0.
fn exact_p(ranks: &[f64], n1: usize, u_obs: f64) -> f64 {
    let n = ranks.len();
    let center = (n1 * (n - n1)) as f64 / 2.0;
    let obs_dev = (u_obs - center).abs();
    let offset = (n1 * (n1 + 1)) as f64 / 2.0;
    let tol = 1e-9;

    let mut total = 0u64;
    let mut extreme = 0u64;
    let mut chosen = Vec::with_capacity(n1);
    enumerate(ranks, n1, 0, 0.0, &mut chosen, &mut |rank_sum| {
        total += 1;
        let u = rank_sum - offset;
        if (u - center).abs() >= obs_dev - tol {
            extreme += 1;
        }
    });
    extreme as f64 / total as f64
}

fn enumerate(
    ranks: &[f64],
    k: usize,
    start: usize,
    acc: f64,
    chosen: &mut Vec<usize>,
    visit: &mut impl FnMut(f64),
) {
    if chosen.len() == k {
        visit(acc);
        return;
    }
    let remaining = k - chosen.len();
    for i in start..=ranks.len() - remaining {
        chosen.push(i);
        enumerate(ranks, k, i + 1, acc + ranks[i], chosen, visit);
        chosen.pop();
    }
}

fn normal_p(pooled: &[f64], n1: usize, n2: usize, u: f64) -> f64 {
    let n = (n1 + n2) as f64;
    let mean = (n1 * n2) as f64 / 2.0;

    let mut sorted = pooled.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let var = (n1 * n2) as f64 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let dev = ((u - mean).abs() - 0.5).max(0.0);
    let z = dev / var.sqrt();
    // 2 * (1 - Phi(z)) = erfc(z / sqrt 2)
    erfc(z / std::f64::consts::SQRT_2).min(1.0)
}

/// Pearson product-moment correlation.
///
/// Single-pass co-moment accumulation (Welford); returns
/// [`StatsError::ConstantInput`] when either vector has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(StatsError::TooFew(x.len()));
    }
    let (mut mx, mut my) = (0.0, 0.0);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (i, (&a, &b)) in x.iter().zip(y).enumerate() {
        let k = (i + 1) as f64;
        let dx = a - mx;
        let dy = b - my;
        mx += dx / k;
        my += dy / k;
        sxx += dx * (a - mx);
        syy += dy * (b - my);
        sxy += dx * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(StatsError::ConstantInput);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Square correlation matrix; `None` marks cells left undefined by a
/// constant column. The diagonal is 1 by convention.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub cells: Vec<Vec<Option<f64>>>,
}

/// Pairwise Pearson correlations between the columns of a row-major matrix.
pub fn correlation_matrix(
    rows: &[Vec<f64>],
    names: &[String],
) -> Result<CorrelationMatrix, StatsError> {
    let width = names.len();
    if rows.len() < 2 {
        return Err(StatsError::TooFew(rows.len()));
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != width) {
        return Err(StatsError::LengthMismatch(bad.len(), width));
    }
    let columns: Vec<Vec<f64>> = (0..width)
        .map(|j| rows.iter().map(|r| r[j]).collect())
        .collect();
    let mut cells = vec![vec![None; width]; width];
    for i in 0..width {
        cells[i][i] = Some(1.0);
        for j in (i + 1)..width {
            let r = match pearson(&columns[i], &columns[j]) {
                Ok(r) => Some(r),
                Err(StatsError::ConstantInput) => None,
                Err(e) => return Err(e),
            };
            cells[i][j] = r;
            cells[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        names: names.to_vec(),
        cells,
    })
}

impl CorrelationMatrix {
    /// CSV with the feature names as header row and first column; undefined
    /// cells are written as `NA`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (name, row) in self.names.iter().zip(&self.cells) {
            out.push_str(name);
            for cell in row {
                out.push(',');
                match cell {
                    Some(v) => out.push_str(&format!("{v}")),
                    None => out.push_str("NA"),
                }
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn mwu_separated_pairs() {
        let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r.u, 0.0);
        assert!(r.exact);
        assert!(close(r.p_two_sided, 1.0 / 3.0, 1e-12));
    }

    #[test]
    fn mwu_identical_samples() {
        let x = [3.0, 1.0, 4.0, 1.0, 5.0];
        let r = mann_whitney_u(&x, &x).unwrap();
        assert_eq!(r.p_two_sided, 1.0);
        let big: Vec<f64> = (0..40).map(|i| (i % 7) as f64).collect();
        let r = mann_whitney_u(&big, &big).unwrap();
        assert!(!r.exact);
        assert_eq!(r.p_two_sided, 1.0);
    }

    #[test]
    fn mwu_full_tie() {
        let r = mann_whitney_u(&[1.0], &[1.0]).unwrap();
        assert_eq!(r.u, 0.5);
        assert_eq!(r.p_two_sided, 1.0);
    }

    #[test]
    fn mwu_two_vs_three() {
        // U distribution for (2,3) has 10 equally likely arrangements; only
        // U=0 and U=6 are as extreme as U=0.
        let r = mann_whitney_u(&[1.0, 2.0], &[100.0, 200.0, 300.0]).unwrap();
        assert_eq!(r.u, 0.0);
        assert!(close(r.p_two_sided, 0.2, 1e-12));
    }

    #[test]
    fn mwu_rejects_empty() {
        assert_eq!(
            mann_whitney_u(&[], &[1.0]).unwrap_err(),
            StatsError::EmptySample
        );
    }

    #[test]
    fn normal_path_deviates_on_tiny_samples() {
        // The large-sample approximation is poor at n=2+2; kept as a pinned
        // reference for the agreement property's domain restriction.
        let exact = mann_whitney_u_with(&[1.0, 2.0], &[3.0, 4.0], MwuMethod::Exact).unwrap();
        let approx = mann_whitney_u_with(&[1.0, 2.0], &[3.0, 4.0], MwuMethod::Normal).unwrap();
        assert!((exact.p_two_sided - approx.p_two_sided).abs() > 0.05);
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0, 4.0, 7.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        assert!(close(pearson(&x, &y).unwrap(), 1.0, 1e-12));
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!(close(pearson(&x, &neg).unwrap(), -1.0, 1e-12));
        assert!(close(
            pearson(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap(),
            0.5,
            1e-12
        ));
    }

    #[test]
    fn pearson_constant_is_undefined() {
        assert_eq!(
            pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(StatsError::ConstantInput)
        );
        assert_eq!(pearson(&[1.0], &[1.0]), Err(StatsError::TooFew(1)));
    }

    #[test]
    fn describe_examples() {
        let d = describe(&[5.0]).unwrap();
        assert_eq!((d.mean, d.std, d.n), (5.0, 0.0, 1));
        let d = describe(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(close(d.mean, 2.5, 1e-15));
        assert!(close(d.std, 1.25f64.sqrt(), 1e-15));
        let d = describe(&[0.0, 0.0, 10.0]).unwrap();
        assert!(close(d.mean, 10.0 / 3.0, 1e-15));
        assert!(close(d.std, (200.0f64 / 9.0).sqrt(), 1e-14));
    }

    #[test]
    fn correlation_matrix_structure() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let a = i as f64;
                vec![a, a, (a * 1.7).sin(), 4.0]
            })
            .collect();
        let names: Vec<String> = ["a", "b", "c", "k"].iter().map(|s| s.to_string()).collect();
        let m = correlation_matrix(&rows, &names).unwrap();
        for i in 0..4 {
            assert_eq!(m.cells[i][i], Some(1.0));
            for j in 0..4 {
                assert_eq!(m.cells[i][j], m.cells[j][i]);
            }
        }
        assert!(close(m.cells[0][1].unwrap(), 1.0, 1e-12));
        assert_eq!(m.cells[0][3], None);
        let csv = m.to_csv();
        assert!(csv.starts_with("feature,a,b,c,k\n"));
        assert!(csv.contains("NA"));
    }
}
