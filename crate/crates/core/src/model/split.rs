//! Seeded train/test partitioning.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { train_fraction: 0.8, seed: 0, stratified: true }
    }
}

/// Sorted train and test row indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Partitions rows by their class index. With stratification the test size
/// `n - round(n * fraction)` is shared among classes by largest remainder
/// (ties to the lower class index).
pub fn split(classes: &[usize], spec: &SplitSpec) -> Result<Partition, ModelError> {
    let n = classes.len();
    if n < 5 {
        return Err(ModelError::TooSmall(n));
    }
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(ModelError::BadSplit(spec.train_fraction));
    }
    let n_test = n - (n as f64 * spec.train_fraction).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut test = Vec::with_capacity(n_test);
    if spec.stratified {
        let n_classes = classes.iter().max().map_or(0, |m| m + 1);
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
        for (i, &c) in classes.iter().enumerate() {
            members[c].push(i);
        }
        let quota: Vec<f64> = members
            .iter()
            .map(|m| m.len() as f64 * n_test as f64 / n as f64)
            .collect();
        let mut take: Vec<usize> = quota.iter().map(|q| q.floor() as usize).collect();
        let mut by_rem: Vec<usize> = (0..n_classes).collect();
        by_rem.sort_by(|&a, &b| {
            let ra = quota[a] - quota[a].floor();
            let rb = quota[b] - quota[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        let mut left = n_test - take.iter().sum::<usize>();
        for c in by_rem {
            if left == 0 {
                break;
            }
            if take[c] < members[c].len() {
                take[c] += 1;
                left -= 1;
            }
        }
        for (m, t) in members.iter_mut().zip(take) {
            m.shuffle(&mut rng);
            test.extend_from_slice(&m[..t]);
        }
    } else {
        let mut all: Vec<usize> = (0..n).collect();
        all.shuffle(&mut rng);
        test.extend_from_slice(&all[..n_test]);
    }
    test.sort_unstable();
    let mut is_test = vec![false; n];
    for &i in &test {
        is_test[i] = true;
    }
    let train = (0..n).filter(|&i| !is_test[i]).collect();
    Ok(Partition { train, test })
}
