//! CART trees over presorted feature columns.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Impurity (or loss) decrease achieved by this split, in sample-weight units.
        gain: f64,
    },
    Leaf {
        value: f64,
    },
}

/// A binary tree stored as a node arena; the root is node 0. Rows with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split { feature, threshold, left, right, .. } => {
                    i = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn splits(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { feature, gain, .. } => Some((*feature, *gain)),
            Node::Leaf { .. } => None,
        })
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }
}

/// What a tree fits.
#[derive(Debug, Clone, Copy)]
pub enum Criterion<'a> {
    /// Weighted Gini on labels in {0,1}; leaves hold the weighted share of 1s.
    Gini { y: &'a [u8], w: &'a [f64] },
    /// Second-order boosting step from gradients and hessians; leaves hold
    /// `-G / (H + lambda)`.
    Newton { g: &'a [f64], h: &'a [f64], lambda: f64 },
}

#[derive(Debug, Clone, Copy, Default)]
struct Acc {
    a: f64,
    b: f64,
    n: usize,
}

impl Criterion<'_> {
    fn include(&self, i: usize) -> bool {
        match self {
            Criterion::Gini { w, .. } => w[i] > 0.0,
            Criterion::Newton { .. } => true,
        }
    }

    /// (a, b) per sample: (weight, weight·y) or (g, h).
    fn stats(&self, i: usize) -> (f64, f64) {
        match self {
            Criterion::Gini { y, w } => (w[i], w[i] * y[i] as f64),
            Criterion::Newton { g, h, .. } => (g[i], h[i]),
        }
    }

    /// Node score; a split's gain is score(L) + score(R) - score(parent).
    fn score(&self, acc: &Acc) -> f64 {
        match self {
            Criterion::Gini { .. } => {
                if acc.a <= 0.0 {
                    return 0.0;
                }
                let p = acc.b / acc.a;
                // Negative weighted Gini impurity.
                -acc.a * (2.0 * p * (1.0 - p))
            }
            Criterion::Newton { lambda, .. } => 0.5 * acc.a * acc.a / (acc.b + lambda),
        }
    }

    fn leaf(&self, acc: &Acc) -> f64 {
        match self {
            Criterion::Gini { .. } => {
                if acc.a > 0.0 {
                    acc.b / acc.a
                } else {
                    0.5
                }
            }
            Criterion::Newton { lambda, .. } => -acc.a / (acc.b + lambda),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features tried per split; `None` tries all.
    pub max_features: Option<usize>,
}

/// Column-major copy of a row-major matrix with per-column sort orders.
pub struct Presorted {
    pub cols: Vec<Vec<f64>>,
    order: Vec<Vec<u32>>,
}

impl Presorted {
    pub fn new(rows: &[Vec<f64>]) -> Self {
        let width = rows.first().map_or(0, Vec::len);
        let cols: Vec<Vec<f64>> = (0..width)
            .map(|j| rows.iter().map(|r| r[j]).collect())
            .collect();
        let order = cols
            .iter()
            .map(|c| {
                let mut idx: Vec<u32> = (0..c.len() as u32).collect();
                idx.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Presorted { cols, order }
    }

    pub fn width(&self) -> usize {
        self.cols.len()
    }

    pub fn rows(&self) -> usize {
        self.cols.first().map_or(0, Vec::len)
    }
}

struct Builder<'a, R> {
    data: &'a Presorted,
    crit: Criterion<'a>,
    params: TreeParams,
    rng: Option<&'a mut R>,
    nodes: Vec<Node>,
    go_left: Vec<bool>,
}

struct Best {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl<R: Rng> Builder<'_, R> {
    fn build(&mut self, sorted: Vec<Vec<u32>>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0 });
        let mut total = Acc::default();
        for &i in &sorted[0] {
            let (a, b) = self.crit.stats(i as usize);
            total.a += a;
            total.b += b;
            total.n += 1;
        }
        let leaf = Node::Leaf { value: self.crit.leaf(&total) };
        if depth >= self.params.max_depth || total.n < 2 * self.params.min_leaf.max(1) {
            self.nodes[id] = leaf;
            return id;
        }
        let Some(best) = self.best_split(&sorted, &total) else {
            self.nodes[id] = leaf;
            return id;
        };
        let col = &self.data.cols[best.feature];
        for &i in &sorted[0] {
            self.go_left[i as usize] = col[i as usize] <= best.threshold;
        }
        let mut left = Vec::with_capacity(sorted.len());
        let mut right = Vec::with_capacity(sorted.len());
        for s in sorted {
            let (l, r): (Vec<u32>, Vec<u32>) = s.into_iter().partition(|&i| self.go_left[i as usize]);
            left.push(l);
            right.push(r);
        }
        let l = self.build(left, depth + 1);
        let r = self.build(right, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: l,
            right: r,
            gain: best.gain,
        };
        id
    }

    fn best_split(&mut self, sorted: &[Vec<u32>], total: &Acc) -> Option<Best> {
        let width = self.data.width();
        let features: Vec<usize> = match (self.params.max_features, self.rng.as_deref_mut()) {
            (Some(k), Some(rng)) if k < width => {
                let mut f = sample(rng, width, k).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..width).collect(),
        };
        let parent = self.crit.score(total);
        let min_leaf = self.params.min_leaf.max(1);
        let mut best: Option<Best> = None;
        for f in features {
            let col = &self.data.cols[f];
            let order = &sorted[f];
            let mut left = Acc::default();
            for k in 0..order.len() - 1 {
                let i = order[k] as usize;
                let (a, b) = self.crit.stats(i);
                left.a += a;
                left.b += b;
                left.n += 1;
                let x = col[i];
                let next = col[order[k + 1] as usize];
                if next <= x || left.n < min_leaf || order.len() - left.n < min_leaf {
                    continue;
                }
                let right = Acc {
                    a: total.a - left.a,
                    b: total.b - left.b,
                    n: total.n - left.n,
                };
                let gain = self.crit.score(&left) + self.crit.score(&right) - parent;
                if gain > 1e-12 && best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mut threshold = x + (next - x) / 2.0;
                    if threshold >= next {
                        threshold = x;
                    }
                    best = Some(Best { feature: f, threshold, gain });
                }
            }
        }
        best
    }
}

/// Grows one tree. Rows excluded by the criterion (zero weight) are ignored.
pub fn grow<R: Rng>(
    data: &Presorted,
    crit: Criterion<'_>,
    params: TreeParams,
    rng: Option<&mut R>,
) -> Tree {
    let sorted: Vec<Vec<u32>> = data
        .order
        .iter()
        .map(|o| o.iter().copied().filter(|&i| crit.include(i as usize)).collect())
        .collect();
    let mut b = Builder {
        data,
        crit,
        params,
        rng,
        nodes: Vec::new(),
        go_left: vec![false; data.rows()],
    };
    if sorted.is_empty() || sorted[0].is_empty() {
        return Tree { nodes: vec![Node::Leaf { value: crit.leaf(&Acc::default()) }] };
    }
    b.build(sorted, 0);
    Tree { nodes: b.nodes }
}
