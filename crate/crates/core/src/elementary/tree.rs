use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{check_l, top_l};
use crate::data::Dataset;
use crate::rng::rng_from_seed;
use crate::{Error, FeatureSet, Result};

/// Growth limits for the CART classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl TreeParams {
    pub fn default_max_depth() -> usize {
        6
    }

    pub fn default_min_leaf() -> usize {
        2
    }
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: Self::default_max_depth(),
            min_leaf: Self::default_min_leaf(),
        }
    }
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct Candidate {
    id: usize,
    rows: Vec<usize>,
    depth: usize,
    split: Split,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // Max-heap on gain; older nodes first on ties.
    fn cmp(&self, other: &Self) -> Ordering {
        self.split
            .gain
            .total_cmp(&other.split.gain)
            .then(other.id.cmp(&self.id))
    }
}

struct Grower<'a> {
    d: &'a Dataset,
    y: Vec<usize>,
    n_classes: usize,
    order: Vec<usize>,
    params: TreeParams,
}

impl Grower<'_> {
    /// Best split of `rows`, scanning features in the seeded order; the first
    /// strictly better split wins. Gain is the impurity decrease weighted by
    /// the node's share of all rows.
    fn best_split(&self, rows: &[usize], depth: usize) -> Option<Split> {
        let n = rows.len();
        let min_leaf = self.params.min_leaf;
        if depth >= self.params.max_depth || n < 2 * min_leaf {
            return None;
        }
        let mut total = vec![0usize; self.n_classes];
        for &r in rows {
            total[self.y[r]] += 1;
        }
        let parent = gini(&total, n);
        if parent == 0.0 {
            return None;
        }
        let x = self.d.features();
        let mut best: Option<(usize, f64, f64)> = None;
        let mut sorted = rows.to_vec();
        for &f in &self.order {
            sorted.sort_by(|&a, &b| x[[a, f]].total_cmp(&x[[b, f]]));
            let mut left = vec![0usize; self.n_classes];
            for i in 0..n - 1 {
                left[self.y[sorted[i]]] += 1;
                let nl = i + 1;
                let nr = n - nl;
                let (lo, hi) = (x[[sorted[i], f]], x[[sorted[i + 1], f]]);
                if lo == hi || nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let right: Vec<usize> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
                let child = (nl as f64 * gini(&left, nl) + nr as f64 * gini(&right, nr)) / n as f64;
                if best.is_none_or(|(_, _, b)| child < b - 1e-15) {
                    best = Some((f, 0.5 * (lo + hi), child));
                }
            }
        }
        let (feature, threshold, child) = best?;
        let gain = n as f64 / self.d.n_samples() as f64 * (parent - child);
        (gain > 0.0).then_some(Split {
            feature,
            threshold,
            gain,
        })
    }
}

/// Per-feature importance of a best-first CART tree: the total weighted Gini
/// decrease of the splits made on that feature. The seed permutes the order
/// in which features are scanned, which decides ties between equally good
/// splits.
pub fn tree_importances(d: &Dataset, params: &TreeParams, seed: u64) -> Result<Vec<f64>> {
    if params.max_depth < 1 || params.min_leaf < 1 {
        return Err(Error::invalid("tree max_depth and min_leaf must be >= 1"));
    }
    let (y, n_classes) = d.encoded_labels();
    let mut order: Vec<usize> = (0..d.n_features()).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let g = Grower {
        d,
        y,
        n_classes,
        order,
        params: *params,
    };
    let mut importance = vec![0.0; d.n_features()];
    let mut heap = BinaryHeap::new();
    let mut next_id = 0;
    let root: Vec<usize> = (0..d.n_samples()).collect();
    if let Some(split) = g.best_split(&root, 0) {
        heap.push(Candidate {
            id: next_id,
            rows: root,
            depth: 0,
            split,
        });
        next_id += 1;
    }
    let x = d.features();
    while let Some(node) = heap.pop() {
        let Split {
            feature,
            threshold,
            gain,
        } = node.split;
        importance[feature] += gain;
        let (left, right): (Vec<usize>, Vec<usize>) =
            node.rows.iter().partition(|&&r| x[[r, feature]] <= threshold);
        for rows in [left, right] {
            if let Some(split) = g.best_split(&rows, node.depth + 1) {
                heap.push(Candidate {
                    id: next_id,
                    rows,
                    depth: node.depth + 1,
                    split,
                });
                next_id += 1;
            }
        }
    }
    Ok(importance)
}

/// Top-`l` features by tree importance; zero-importance features only pad
/// the selection, lowest index first.
pub fn tree_select(d: &Dataset, l: usize, params: &TreeParams, seed: u64) -> Result<FeatureSet> {
    check_l(d, l)?;
    Ok(top_l(&tree_importances(d, params, seed)?, l))
}
