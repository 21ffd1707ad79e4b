//! Hyperparameter selection: stratified k-fold CV and uniform random
//! search.
//!
//! Folds are built once per search and reused for every candidate, so all
//! draws compete on the same data splits; ties on the CV score keep the
//! earlier draw.

use super::{fit_forest, micro_f1, ForestError, ForestParams};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error("class {class} has only {count} samples; stratified {k}-fold needs at least {k}")]
    TooFewPerClass {
        class: usize,
        count: usize,
        k: usize,
    },
    #[error("k_folds must be ≥ 2 (got {0})")]
    BadFoldCount(usize),
    #[error("n_iter must be ≥ 1")]
    NoIterations,
    #[error("empty parameter space dimension: {0}")]
    EmptySpaceDimension(&'static str),
    #[error(transparent)]
    Forest(#[from] ForestError),
}

/// The candidate grid a random search draws from, one independent uniform
/// draw per dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpace {
    pub n_trees: Vec<usize>,
    pub max_depth: Vec<Option<usize>>,
    pub min_samples_leaf: Vec<usize>,
    pub m_features: Vec<usize>,
}

impl ParamSpace {
    /// Default space for `d` features: T ∈ {50,100,200,400}, depth ∈
    /// {3,5,8,∞}, min leaf ∈ {1,2,4}, m ∈ {⌈√d⌉, ⌈d/3⌉, d} (deduplicated).
    pub fn defaults(n_features: usize) -> Self {
        let d = n_features.max(1);
        let mut m_features = vec![
            (d as f64).sqrt().ceil() as usize,
            (d as f64 / 3.0).ceil() as usize,
            d,
        ];
        m_features.sort_unstable();
        m_features.dedup();
        ParamSpace {
            n_trees: vec![50, 100, 200, 400],
            max_depth: vec![Some(3), Some(5), Some(8), None],
            min_samples_leaf: vec![1, 2, 4],
            m_features,
        }
    }

    fn validate(&self) -> Result<(), SearchError> {
        if self.n_trees.is_empty() {
            return Err(SearchError::EmptySpaceDimension("n_trees"));
        }
        if self.max_depth.is_empty() {
            return Err(SearchError::EmptySpaceDimension("max_depth"));
        }
        if self.min_samples_leaf.is_empty() {
            return Err(SearchError::EmptySpaceDimension("min_samples_leaf"));
        }
        if self.m_features.is_empty() {
            return Err(SearchError::EmptySpaceDimension("m_features"));
        }
        Ok(())
    }

    fn draw(&self, rng: &mut ChaCha8Rng, seed: u64) -> ForestParams {
        let pick = |rng: &mut ChaCha8Rng, n: usize| rng.random_range(0..n);
        ForestParams {
            n_trees: self.n_trees[pick(rng, self.n_trees.len())],
            max_depth: self.max_depth[pick(rng, self.max_depth.len())],
            min_samples_leaf: self.min_samples_leaf[pick(rng, self.min_samples_leaf.len())],
            m_features: self.m_features[pick(rng, self.m_features.len())],
            bootstrap: true,
            seed,
        }
    }
}

/// Deal each class's (shuffled) samples round-robin over `k` folds.
/// Returns the test-index set of each fold; every class appears in every
/// fold, which requires every class to have at least `k` members.
pub fn stratified_k_folds(
    y: &[usize],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<usize>>, SearchError> {
    if k < 2 {
        return Err(SearchError::BadFoldCount(k));
    }
    let n_classes = y.iter().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &label) in y.iter().enumerate() {
        by_class[label].push(i);
    }
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (class, mut members) in by_class.into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < k {
            return Err(SearchError::TooFewPerClass {
                class,
                count: members.len(),
                k,
            });
        }
        members.shuffle(rng);
        for (j, idx) in members.into_iter().enumerate() {
            folds[j % k].push(idx);
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}

/// Mean micro-F1 of `params` over the given folds.
pub fn cross_validate(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    params: &ForestParams,
    folds: &[Vec<usize>],
    parallel: bool,
) -> Result<f64, ForestError> {
    let mut total = 0.0;
    for test in folds {
        let in_test: std::collections::BTreeSet<usize> = test.iter().copied().collect();
        let mut train_x = Vec::with_capacity(x.len() - test.len());
        let mut train_y = Vec::with_capacity(x.len() - test.len());
        for i in 0..x.len() {
            if !in_test.contains(&i) {
                train_x.push(x[i].clone());
                train_y.push(y[i]);
            }
        }
        let model = fit_forest(&train_x, &train_y, n_classes, params, parallel)?;
        let preds: Vec<usize> = test.iter().map(|&i| model.predict(&x[i])).collect();
        let truth: Vec<usize> = test.iter().map(|&i| y[i]).collect();
        total += micro_f1(&preds, &truth);
    }
    Ok(total / folds.len() as f64)
}

/// Uniform random search: `n_iter` draws from `space`, each scored by
/// stratified k-fold mean micro-F1 on shared folds; the best (earliest on
/// ties) draw wins.
#[allow(clippy::too_many_arguments)]
pub fn random_search(
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    space: &ParamSpace,
    n_iter: usize,
    k_folds: usize,
    seed: u64,
    parallel: bool,
) -> Result<(ForestParams, f64), SearchError> {
    if n_iter == 0 {
        return Err(SearchError::NoIterations);
    }
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let folds = stratified_k_folds(y, k_folds, &mut rng)?;

    let mut best: Option<(ForestParams, f64)> = None;
    for _ in 0..n_iter {
        let params = space.draw(&mut rng, seed);
        let score = cross_validate(x, y, n_classes, &params, &folds, parallel)?;
        let better = best.as_ref().is_none_or(|(_, s)| score > *s);
        if better {
            best = Some((params, score));
        }
    }
    Ok(best.expect("n_iter ≥ 1 guarantees a candidate"))
}
