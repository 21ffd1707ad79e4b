//! Single CART tree: Gini impurity, split search, and recursive growth.
//!
//! Conventions pinned for cross-run determinism:
//! - candidate thresholds sit at midpoints between consecutive distinct
//!   sorted values; a row goes left iff `value < threshold`;
//! - split ties break to the lower feature index, then the lower threshold;
//! - a split must strictly reduce impurity and respect `min_samples_leaf`
//!   on both sides, otherwise the node becomes a leaf.

use rand::seq::index::sample as index_sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Gini impurity Σ pᵢ(1 − pᵢ) of a class-count vector.
///
/// Panics if the total count is zero — callers never ask for the impurity
/// of an empty node.
pub fn gini(class_counts: &[u64]) -> f64 {
    let total: u64 = class_counts.iter().sum();
    assert!(total > 0, "gini of an empty node is undefined");
    let total = total as f64;
    class_counts
        .iter()
        .map(|&c| {
            let p = c as f64 / total;
            p * (1.0 - p)
        })
        .sum()
}

/// Impurity reduction of a split:
/// `Gini(P) − |L|/|P|·Gini(L) − |R|/|P|·Gini(R)`.
///
/// Panics if the children don't partition the parent or either child is
/// empty — both are caller contract violations.
pub fn delta_gini(parent: &[u64], left: &[u64], right: &[u64]) -> f64 {
    assert_eq!(parent.len(), left.len(), "class-count widths differ");
    assert_eq!(parent.len(), right.len(), "class-count widths differ");
    for i in 0..parent.len() {
        assert_eq!(
            left[i] + right[i],
            parent[i],
            "children must partition the parent's class counts"
        );
    }
    let n_parent: u64 = parent.iter().sum();
    let n_left: u64 = left.iter().sum();
    let n_right: u64 = right.iter().sum();
    assert!(n_left > 0 && n_right > 0, "both children must be non-empty");
    let w_left = n_left as f64 / n_parent as f64;
    let w_right = n_right as f64 / n_parent as f64;
    gini(parent) - w_left * gini(left) - w_right * gini(right)
}

/// One node of a trained tree. Leaves hold the training class counts that
/// reached them; internal nodes remember their split and its gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TreeNode {
    Internal {
        feature_index: usize,
        threshold: f64,
        delta_gini: f64,
        n_samples: usize,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        class_counts: Vec<u64>,
    },
}

impl TreeNode {
    /// Class counts of the samples under this node.
    pub fn class_counts(&self) -> Vec<u64> {
        match self {
            TreeNode::Leaf { class_counts } => class_counts.clone(),
            TreeNode::Internal { left, right, .. } => {
                let l = left.class_counts();
                let r = right.class_counts();
                l.iter().zip(&r).map(|(a, b)| a + b).collect()
            }
        }
    }

    /// The leaf a feature row lands in (strict `<` goes left).
    pub fn leaf_for(&self, row: &[f64]) -> &TreeNode {
        match self {
            TreeNode::Leaf { .. } => self,
            TreeNode::Internal {
                feature_index,
                threshold,
                left,
                right,
                ..
            } => {
                if row[*feature_index] < *threshold {
                    left.leaf_for(row)
                } else {
                    right.leaf_for(row)
                }
            }
        }
    }

    /// This tree's vote: argmax of the landing leaf's counts, lower class
    /// index on ties.
    pub fn predict(&self, row: &[f64]) -> usize {
        match self.leaf_for(row) {
            TreeNode::Leaf { class_counts } => argmax_lowest(class_counts),
            TreeNode::Internal { .. } => unreachable!("leaf_for returns leaves"),
        }
    }

    /// Number of internal (splitting) nodes.
    pub fn n_splits(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.n_splits() + right.n_splits(),
        }
    }

    /// Unweighted per-feature sums of `delta_gini` over this subtree's
    /// internal nodes, added into `acc`.
    pub fn accumulate_importance(&self, acc: &mut [f64]) {
        if let TreeNode::Internal {
            feature_index,
            delta_gini,
            left,
            right,
            ..
        } = self
        {
            acc[*feature_index] += delta_gini;
            left.accumulate_importance(acc);
            right.accumulate_importance(acc);
        }
    }
}

/// Index of the largest count; the lowest index wins ties.
pub fn argmax_lowest<T: PartialOrd>(values: &[T]) -> usize {
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] > values[best] {
            best = i;
        }
    }
    best
}

/// A chosen split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature_index: usize,
    pub threshold: f64,
    pub delta_gini: f64,
}

fn class_counts_of(y: &[usize], indices: &[usize], n_classes: usize) -> Vec<u64> {
    let mut counts = vec![0u64; n_classes];
    for &i in indices {
        counts[y[i]] += 1;
    }
    counts
}

/// Exhaustive best split over the candidate features.
///
/// `candidates` must be sorted ascending; the search walks features in that
/// order and thresholds in ascending order, replacing the incumbent only on
/// strictly larger gain, which realizes the documented tie-breaks. Returns
/// `None` when no candidate split has positive gain and both children at
/// least `min_samples_leaf` large.
pub fn best_split(
    x: &[Vec<f64>],
    y: &[usize],
    indices: &[usize],
    candidates: &[usize],
    n_classes: usize,
    min_samples_leaf: usize,
) -> Option<Split> {
    debug_assert!(candidates.windows(2).all(|w| w[0] < w[1]));
    let n = indices.len();
    if n < 2 {
        return None;
    }
    let parent_counts = class_counts_of(y, indices, n_classes);
    let parent_gini = gini(&parent_counts);
    if parent_gini == 0.0 {
        return None;
    }
    let n_parent = n as f64;

    let mut best: Option<Split> = None;
    let mut column: Vec<(f64, usize)> = Vec::with_capacity(n);
    for &f in candidates {
        column.clear();
        column.extend(indices.iter().map(|&i| (x[i][f], y[i])));
        column.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut left_counts = vec![0u64; n_classes];
        for split_at in 1..n {
            left_counts[column[split_at - 1].1] += 1;
            let lo = column[split_at - 1].0;
            let hi = column[split_at].0;
            if lo == hi {
                continue;
            }
            if split_at < min_samples_leaf || n - split_at < min_samples_leaf {
                continue;
            }
            let threshold = (lo + hi) / 2.0;
            // Adjacent floats can make the midpoint collapse onto an
            // endpoint; such a threshold would not separate the runs.
            if !(lo < threshold && threshold <= hi) {
                continue;
            }
            let w_left = split_at as f64 / n_parent;
            let w_right = (n - split_at) as f64 / n_parent;
            let right_counts: Vec<u64> = parent_counts
                .iter()
                .zip(&left_counts)
                .map(|(p, l)| p - l)
                .collect();
            let delta = parent_gini - w_left * gini(&left_counts) - w_right * gini(&right_counts);
            if delta > 0.0 && best.is_none_or(|b| delta > b.delta_gini) {
                best = Some(Split {
                    feature_index: f,
                    threshold,
                    delta_gini: delta,
                });
            }
        }
    }
    best
}

/// Growth limits and randomness for one tree.
pub(crate) struct GrowContext<'a> {
    pub x: &'a [Vec<f64>],
    pub y: &'a [usize],
    pub n_classes: usize,
    pub n_features: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub m_features: usize,
}

/// Recursively grow a tree over `indices`.
///
/// At each node, `m_features` candidate features are drawn uniformly
/// without replacement from the RNG stream; recursion is depth-first,
/// left child first, so a fixed stream yields a fixed tree.
pub(crate) fn grow_tree(
    cx: &GrowContext<'_>,
    indices: &[usize],
    depth: usize,
    rng: &mut ChaCha8Rng,
) -> TreeNode {
    let counts = class_counts_of(cx.y, indices, cx.n_classes);
    let at_depth_limit = cx.max_depth.is_some_and(|d| depth >= d);
    if at_depth_limit || indices.len() < 2 || gini(&counts) == 0.0 {
        return TreeNode::Leaf {
            class_counts: counts,
        };
    }

    let mut candidates: Vec<usize> = index_sample(rng, cx.n_features, cx.m_features)
        .into_iter()
        .collect();
    candidates.sort_unstable();

    let Some(split) = best_split(
        cx.x,
        cx.y,
        indices,
        &candidates,
        cx.n_classes,
        cx.min_samples_leaf,
    ) else {
        return TreeNode::Leaf {
            class_counts: counts,
        };
    };

    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
        .iter()
        .partition(|&&i| cx.x[i][split.feature_index] < split.threshold);

    let left = grow_tree(cx, &left_idx, depth + 1, rng);
    let right = grow_tree(cx, &right_idx, depth + 1, rng);
    TreeNode::Internal {
        feature_index: split.feature_index,
        threshold: split.threshold,
        delta_gini: split.delta_gini,
        n_samples: indices.len(),
        left: Box::new(left),
        right: Box::new(right),
    }
}
