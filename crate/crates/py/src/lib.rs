//! Python bindings for the floodpulse core: sentiment scoring, the
//! baseline-deviation transform, percentile labeling, the bagged CART
//! forest with Gini importance, and the rank/persistence summaries.
//!
//! The module is importable as `floodpulse` once built with the
//! `extension-module` feature; see `python/smoke_test.py` for a tour.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use floodpulse_core::analysis;
use floodpulse_core::features;
use floodpulse_core::forest::{self, ForestParams, RandomForestModel};
use floodpulse_core::labels::{self, ImpactKind, ImpactMeasure, LabelScheme};
use floodpulse_core::sentiment::{self, CompoundScore, Lexicon as CoreLexicon};
use floodpulse_core::ZoneId;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A sentiment lexicon: token valences plus negation tokens.
#[pyclass(frozen)]
struct Lexicon {
    inner: CoreLexicon,
}

#[pymethods]
impl Lexicon {
    /// Build a lexicon from a `{token: valence}` dict and a list of
    /// negation tokens. Tokens are lowercased.
    #[new]
    fn new(valences: BTreeMap<String, f64>, negations: Vec<String>) -> Self {
        Lexicon {
            inner: CoreLexicon::new(valences, negations),
        }
    }

    /// Load from a `token<TAB>valence` file and a one-token-per-line
    /// negations file. Blank lines and `#` comments are skipped.
    #[staticmethod]
    fn load(lexicon_path: PathBuf, negations_path: PathBuf) -> PyResult<Self> {
        CoreLexicon::load(&lexicon_path, &negations_path)
            .map(|inner| Lexicon { inner })
            .map_err(value_err)
    }

    /// Compound score of a text in [-1, 1]: the valence sum S (sign-flipped
    /// when a negation occurs within the three preceding tokens) mapped
    /// through `S / sqrt(S^2 + 15)`.
    fn score(&self, text: &str) -> f64 {
        sentiment::score_text(text, &self.inner).value()
    }

    /// Polarity class of a text: "positive", "neutral", or "negative".
    fn polarity(&self, text: &str) -> String {
        sentiment::classify_polarity(sentiment::score_text(text, &self.inner)).to_string()
    }

    /// Number of valence entries.
    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

/// Lowercase a text and split it into alphanumeric token runs.
#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    sentiment::tokenize(text)
}

/// Polarity class of a compound score: positive iff >= 0.05, negative iff
/// <= -0.05, neutral between. Values outside [-1, 1] are clamped.
#[pyfunction]
fn classify_polarity(compound: f64) -> String {
    sentiment::classify_polarity(CompoundScore::from_value(compound)).to_string()
}

/// Percent deviation of a day value below its baseline:
/// `100 * (baseline - day_value) / baseline`. Returns None when either
/// input is None or the baseline is zero.
#[pyfunction]
#[pyo3(signature = (baseline, day_value))]
fn deviation_pct(baseline: Option<f64>, day_value: Option<f64>) -> Option<f64> {
    features::deviation_pct(baseline, day_value)
}

/// The ten feature names, in column order.
#[pyfunction]
fn feature_names() -> Vec<String> {
    features::FEATURE_NAMES
        .iter()
        .map(|s| s.to_string())
        .collect()
}

/// Gini impurity of a class-count histogram: `sum_c p_c * (1 - p_c)`.
/// An empty node scores 0.
#[pyfunction]
fn gini(class_counts: Vec<u64>) -> f64 {
    forest::gini(&class_counts)
}

/// Impurity reduction of a split: parent impurity minus the
/// child-size-weighted mean of the child impurities.
#[pyfunction]
fn delta_gini(parent: Vec<u64>, left: Vec<u64>, right: Vec<u64>) -> PyResult<f64> {
    let total: u64 = parent.iter().sum();
    let split: u64 = left.iter().sum::<u64>() + right.iter().sum::<u64>();
    if total != split {
        return Err(PyValueError::new_err(format!(
            "child counts sum to {split}, parent holds {total}"
        )));
    }
    Ok(forest::delta_gini(&parent, &left, &right))
}

/// Micro-averaged F1 (equivalently accuracy for single-label prediction).
#[pyfunction]
fn micro_f1(predictions: Vec<usize>, labels: Vec<usize>) -> PyResult<f64> {
    if predictions.len() != labels.len() {
        return Err(PyValueError::new_err(format!(
            "{} predictions against {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    Ok(forest::micro_f1(&predictions, &labels))
}

/// Linear-interpolation percentile of an already-sorted sequence: rank
/// `h = p/100 * (n-1)` interpolated between the bracketing order statistics.
#[pyfunction]
fn percentile_linear(sorted_values: Vec<f64>, p: f64) -> PyResult<f64> {
    if sorted_values.is_empty() {
        return Err(PyValueError::new_err("percentile of an empty sequence"));
    }
    if !(0.0..=100.0).contains(&p) {
        return Err(PyValueError::new_err(format!(
            "percentile out of range: {p}"
        )));
    }
    Ok(labels::percentile_linear(&sorted_values, p))
}

fn parse_kind(kind: &str) -> PyResult<ImpactKind> {
    match kind {
        "claims" => Ok(ImpactKind::Claims),
        "inundation" => Ok(ImpactKind::Inundation),
        other => Err(PyValueError::new_err(format!(
            "unknown impact kind {other:?}; expected \"claims\" or \"inundation\""
        ))),
    }
}

/// Classify zones into `n_classes` impact classes from a `{zone: value}`
/// dict. `kind` is "claims" (pure percentile cuts) or "inundation" (zeros
/// form their own class 0; positives are cut by percentiles of positives).
/// A value exactly at a cut takes the lower class. Raises ValueError when
/// the values carry fewer distinct levels than classes.
#[pyfunction]
fn label_zones(
    values: BTreeMap<String, f64>,
    kind: &str,
    n_classes: u8,
) -> PyResult<BTreeMap<String, usize>> {
    let kind = parse_kind(kind)?;
    let mut map = BTreeMap::new();
    for (zone, value) in values {
        map.insert(ZoneId::new(zone).map_err(value_err)?, value);
    }
    let measure = ImpactMeasure::from_values(kind, map);
    let scheme = LabelScheme::new(kind, n_classes).map_err(value_err)?;
    let labeled = labels::classify_by_percentiles(&measure, &scheme).map_err(value_err)?;
    Ok(labeled
        .into_iter()
        .map(|l| (l.zone.as_str().to_string(), l.class_index))
        .collect())
}

/// Competition rank of each feature by importance, descending: rank 1 is
/// the largest value; exact ties share a rank and skip the next.
#[pyfunction]
fn rank_features(importance: Vec<f64>) -> Vec<usize> {
    analysis::rank_features(&importance)
}

/// Longest contiguous run (earliest on ties) of a rank track whose
/// consecutive-day changes stay within `k`. Returns
/// `(run_length, (min_rank, max_rank))` over that run.
#[pyfunction]
#[pyo3(signature = (track, k = 2))]
fn persistence(track: Vec<usize>, k: usize) -> PyResult<(usize, (usize, usize))> {
    if track.is_empty() {
        return Err(PyValueError::new_err("persistence of an empty track"));
    }
    Ok(analysis::persistence(&track, k))
}

/// A trained bagged CART forest.
#[pyclass(frozen)]
struct RandomForest {
    model: RandomForestModel,
}

#[pymethods]
impl RandomForest {
    /// Train a forest on rows `x` (list of equal-length float lists) and
    /// integer class labels `y` in [0, n_classes). `m_features` defaults to
    /// ceil(sqrt(d)). The same seed always yields the same model; `parallel`
    /// only schedules the work.
    #[staticmethod]
    #[pyo3(signature = (
        x, y, n_classes, *,
        n_trees = 100,
        max_depth = None,
        min_samples_leaf = 10,
        m_features = None,
        bootstrap = true,
        seed = 0,
        parallel = false,
    ))]
    #[allow(clippy::too_many_arguments)]
    fn fit(
        x: Vec<Vec<f64>>,
        y: Vec<usize>,
        n_classes: usize,
        n_trees: usize,
        max_depth: Option<usize>,
        min_samples_leaf: usize,
        m_features: Option<usize>,
        bootstrap: bool,
        seed: u64,
        parallel: bool,
    ) -> PyResult<Self> {
        let n_features = x.first().map_or(0, Vec::len);
        let m_features =
            m_features.unwrap_or_else(|| (n_features as f64).sqrt().ceil().max(1.0) as usize);
        let params = ForestParams {
            n_trees,
            max_depth,
            min_samples_leaf,
            m_features,
            bootstrap,
            seed,
        };
        forest::fit_forest(&x, &y, n_classes, &params, parallel)
            .map(|model| RandomForest { model })
            .map_err(value_err)
    }

    /// Majority-vote class of one row (ties to the lower class index).
    fn predict(&self, row: Vec<f64>) -> usize {
        self.model.predict(&row)
    }

    /// Majority-vote class of each row.
    fn predict_batch(&self, rows: Vec<Vec<f64>>) -> Vec<usize> {
        self.model.predict_batch(&rows)
    }

    /// Per-feature importance: mean over trees of each tree's normalized
    /// impurity-reduction shares. Sums to 1 whenever every tree split.
    fn importance(&self) -> Vec<f64> {
        self.model.importance()
    }

    /// Serialize the full model to JSON.
    fn to_json(&self) -> String {
        self.model.to_json()
    }

    /// Rebuild a model serialized by `to_json`.
    #[staticmethod]
    fn from_json(json: &str) -> PyResult<Self> {
        RandomForestModel::from_json(json)
            .map(|model| RandomForest { model })
            .map_err(value_err)
    }

    #[getter]
    fn n_trees(&self) -> usize {
        self.model.trees.len()
    }

    #[getter]
    fn n_classes(&self) -> usize {
        self.model.n_classes
    }

    #[getter]
    fn feature_count(&self) -> usize {
        self.model.feature_count
    }

    fn __repr__(&self) -> String {
        format!(
            "RandomForest(n_trees={}, n_classes={}, feature_count={})",
            self.model.trees.len(),
            self.model.n_classes,
            self.model.feature_count
        )
    }
}

/// Baseline-deviation features, percentile impact labels, and a
/// deterministic bagged CART forest with Gini importance.
#[pymodule]
fn floodpulse(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Lexicon>()?;
    m.add_class::<RandomForest>()?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(classify_polarity, m)?)?;
    m.add_function(wrap_pyfunction!(deviation_pct, m)?)?;
    m.add_function(wrap_pyfunction!(feature_names, m)?)?;
    m.add_function(wrap_pyfunction!(gini, m)?)?;
    m.add_function(wrap_pyfunction!(delta_gini, m)?)?;
    m.add_function(wrap_pyfunction!(micro_f1, m)?)?;
    m.add_function(wrap_pyfunction!(percentile_linear, m)?)?;
    m.add_function(wrap_pyfunction!(label_zones, m)?)?;
    m.add_function(wrap_pyfunction!(rank_features, m)?)?;
    m.add_function(wrap_pyfunction!(persistence, m)?)?;
    m.add("N_FEATURES", features::N_FEATURES)?;
    m.add("POLARITY_CUT", sentiment::POLARITY_CUT)?;
    Ok(())
}
