//! Two-class evaluation with class-support weighting.

use serde::{Deserialize, Serialize};

/// Index 0 is the missing class, 1 the active class.
pub type Confusion = [[u64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Confusion,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl EvalReport {
    pub fn from_confusion(confusion: Confusion) -> Self {
        let total: u64 = confusion.iter().flatten().sum();
        let mut wp = 0.0;
        let mut wr = 0.0;
        let mut wf = 0.0;
        for c in 0..2 {
            let support = confusion[c][0] + confusion[c][1];
            let predicted = confusion[0][c] + confusion[1][c];
            let tp = confusion[c][c];
            let p = ratio(tp, predicted);
            let r = ratio(tp, support);
            let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
            wp += support as f64 * p;
            wr += support as f64 * r;
            wf += support as f64 * f;
        }
        let n = total.max(1) as f64;
        EvalReport {
            accuracy: ratio(confusion[0][0] + confusion[1][1], total),
            weighted_precision: wp / n,
            weighted_recall: wr / n,
            weighted_f1: wf / n,
            confusion,
        }
    }

    /// `truth` and `predicted` hold class indices (0 missing, 1 active).
    pub fn from_labels(truth: &[usize], predicted: &[usize]) -> Self {
        let mut c = [[0u64; 2]; 2];
        for (&t, &p) in truth.iter().zip(predicted) {
            c[t][p] += 1;
        }
        Self::from_confusion(c)
    }

    pub fn total(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_confusion() {
        // TP=3 FN=1 for missing; FP=1 TN=5.
        let r = EvalReport::from_confusion([[3, 1], [1, 5]]);
        assert_eq!(r.accuracy, 0.8);
        assert!((r.weighted_precision - 0.8).abs() < 1e-15);
        assert!((r.weighted_recall - r.accuracy).abs() < 1e-15);
    }

    #[test]
    fn perfect() {
        let r = EvalReport::from_confusion([[4, 0], [0, 6]]);
        assert_eq!(
            (r.accuracy, r.weighted_precision, r.weighted_recall, r.weighted_f1),
            (1.0, 1.0, 1.0, 1.0)
        );
    }

    #[test]
    fn one_class_predictions_on_balanced_data() {
        let r = EvalReport::from_confusion([[5, 0], [5, 0]]);
        assert_eq!(r.accuracy, 0.5);
        assert!((r.weighted_f1 - 1.0 / 3.0).abs() < 1e-15);
    }
}
