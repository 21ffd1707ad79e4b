//! Bagged CART random forest with mean-decrease-in-impurity importance.
//!
//! Training is deterministic by construction: every tree owns an RNG
//! stream derived from `(seed, tree_index)`, so the same inputs produce a
//! bit-identical model whether trees are grown serially or in parallel.
//! Feature importance follows the unweighted formulation: a tree's raw
//! score for a feature is the plain sum of the impurity reductions at the
//! nodes splitting on it (no sample weighting), each tree's scores are
//! normalized to sum to one (a split-free tree contributes a zero vector),
//! and the forest importance is the mean over trees.

mod metrics;
mod search;
mod tree;

pub use metrics::micro_f1;
pub use search::{cross_validate, random_search, stratified_k_folds, ParamSpace, SearchError};
pub use tree::{argmax_lowest, best_split, delta_gini, gini, Split, TreeNode};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tree::GrowContext;

/// Serialization format tag for persisted models.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ForestError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training rows have inconsistent widths ({0} vs {1})")]
    RaggedRows(usize, usize),
    #[error("x has {0} rows but y has {1} labels")]
    LengthMismatch(usize, usize),
    #[error("label {label} out of range for {n_classes} classes")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("model deserialization failed: {0}")]
    Deserialize(String),
    #[error("unsupported model format version {0} (expected {MODEL_FORMAT_VERSION})")]
    FormatVersion(u32),
}

/// Hyperparameters for one forest fit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    /// Number of trees T.
    pub n_trees: usize,
    /// Depth limit; `None` grows until purity or leaf-size limits.
    pub max_depth: Option<usize>,
    /// Minimum samples each side of a split must keep.
    pub min_samples_leaf: usize,
    /// Candidate features drawn at each node.
    pub m_features: usize,
    /// Bootstrap-resample the training rows per tree (on by default).
    pub bootstrap: bool,
    /// Seed of the per-tree RNG stream family.
    pub seed: u64,
}

impl ForestParams {
    /// Sensible untuned defaults for `n_features` columns: 100 trees,
    /// unlimited depth, leaves of ten, √d feature candidates, bootstrap on.
    ///
    /// The leaf size is deliberately conservative. Importance sums node
    /// gains unweighted and split ties go to the lower feature index, so
    /// tiny mixed nodes — where every candidate feature achieves the same
    /// gain — would shovel systematic importance mass toward low-indexed
    /// features. Keeping split nodes at ≥ 2×10 samples makes exact
    /// cross-feature gain ties rare.
    pub fn defaults(n_features: usize, seed: u64) -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: None,
            min_samples_leaf: 10,
            m_features: ((n_features as f64).sqrt().ceil() as usize).max(1),
            bootstrap: true,
            seed,
        }
    }

    pub fn validate(&self, n_features: usize) -> Result<(), ForestError> {
        if self.n_trees == 0 {
            return Err(ForestError::InvalidParams(
                "n_trees must be ≥ 1".to_string(),
            ));
        }
        if self.min_samples_leaf == 0 {
            return Err(ForestError::InvalidParams(
                "min_samples_leaf must be ≥ 1".to_string(),
            ));
        }
        if self.m_features == 0 || self.m_features > n_features {
            return Err(ForestError::InvalidParams(format!(
                "m_features must be in [1, {n_features}] (got {})",
                self.m_features
            )));
        }
        if self.max_depth == Some(0) {
            return Err(ForestError::InvalidParams(
                "max_depth must be ≥ 1 when limited".to_string(),
            ));
        }
        Ok(())
    }
}

/// A trained forest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub format_version: u32,
    pub params: ForestParams,
    pub n_classes: usize,
    pub feature_count: usize,
    pub trees: Vec<TreeNode>,
}

/// Per-feature mean normalized impurity reduction; sums to 1 whenever
/// every tree made at least one split.
pub type ImportanceVector = Vec<f64>;

/// Train a forest. `parallel` only chooses how the work is scheduled —
/// the resulting model is bit-identical either way.
pub fn fit_forest(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    params: &ForestParams,
    parallel: bool,
) -> Result<RandomForestModel, ForestError> {
    if x.is_empty() {
        return Err(ForestError::EmptyTrainingSet);
    }
    let n_features = x[0].len();
    if let Some(bad) = x.iter().find(|r| r.len() != n_features) {
        return Err(ForestError::RaggedRows(n_features, bad.len()));
    }
    if x.len() != y.len() {
        return Err(ForestError::LengthMismatch(x.len(), y.len()));
    }
    if let Some(&label) = y.iter().find(|&&l| l >= n_classes) {
        return Err(ForestError::LabelOutOfRange { label, n_classes });
    }
    params.validate(n_features)?;

    let cx = GrowContext {
        x,
        y,
        n_classes,
        n_features,
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        m_features: params.m_features,
    };

    let grow_one = |tree_index: usize| -> TreeNode {
        // One ChaCha stream per tree: same seed, stream = tree index.
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(tree_index as u64);
        let n = x.len();
        let indices: Vec<usize> = if params.bootstrap {
            use rand::Rng;
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        tree::grow_tree(&cx, &indices, 0, &mut rng)
    };

    // `collect` on an indexed parallel iterator preserves order, so the
    // tree list is identical to the serial loop's.
    let trees: Vec<TreeNode> = if parallel {
        (0..params.n_trees).into_par_iter().map(grow_one).collect()
    } else {
        (0..params.n_trees).map(grow_one).collect()
    };

    Ok(RandomForestModel {
        format_version: MODEL_FORMAT_VERSION,
        params: params.clone(),
        n_classes,
        feature_count: n_features,
        trees,
    })
}

impl RandomForestModel {
    /// Majority vote over tree predictions; ties go to the lower class.
    ///
    /// Panics if the row width differs from the training width — that is a
    /// caller bug, not a data condition.
    pub fn predict(&self, row: &[f64]) -> usize {
        assert_eq!(
            row.len(),
            self.feature_count,
            "prediction row width {} != model feature count {}",
            row.len(),
            self.feature_count
        );
        let mut votes = vec![0u64; self.n_classes];
        for tree in &self.trees {
            votes[tree.predict(row)] += 1;
        }
        argmax_lowest(&votes)
    }

    pub fn predict_batch(&self, rows: &[Vec<f64>]) -> Vec<usize> {
        rows.iter().map(|r| self.predict(r)).collect()
    }

    /// Mean-decrease-in-impurity importance: per tree, the unweighted sum
    /// of impurity reductions per feature, normalized to sum to one (zero
    /// vector for split-free trees), then averaged over trees.
    pub fn importance(&self) -> ImportanceVector {
        let t = self.trees.len() as f64;
        let mut mean = vec![0.0; self.feature_count];
        for tree in &self.trees {
            let mut raw = vec![0.0; self.feature_count];
            tree.accumulate_importance(&mut raw);
            let total: f64 = raw.iter().sum();
            if total > 0.0 {
                for (m, r) in mean.iter_mut().zip(&raw) {
                    *m += r / total;
                }
            }
        }
        for m in &mut mean {
            *m /= t;
        }
        mean
    }

    /// Self-describing JSON; floats survive exactly.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization cannot fail")
    }

    pub fn from_json(json: &str) -> Result<Self, ForestError> {
        let model: RandomForestModel =
            serde_json::from_str(json).map_err(|e| ForestError::Deserialize(e.to_string()))?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(ForestError::FormatVersion(model.format_version));
        }
        Ok(model)
    }
}

/// Convenience used by tests and bindings: importance of a freshly fitted
/// forest.
pub fn forest_importance(model: &RandomForestModel) -> ImportanceVector {
    model.importance()
}

/// Grow a single tree on the full data (no bootstrap) using the RNG
/// stream `(params.seed, stream)` — the forest's building block exposed
/// on its own.
pub fn grow_single_tree(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    params: &ForestParams,
    stream: u64,
) -> Result<TreeNode, ForestError> {
    if x.is_empty() {
        return Err(ForestError::EmptyTrainingSet);
    }
    let n_features = x[0].len();
    params.validate(n_features)?;
    let cx = GrowContext {
        x,
        y,
        n_classes,
        n_features,
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        m_features: params.m_features,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(stream);
    let indices: Vec<usize> = (0..x.len()).collect();
    Ok(tree::grow_tree(&cx, &indices, 0, &mut rng))
}
