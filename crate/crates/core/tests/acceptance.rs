//! Nine end-to-end acceptance checks, one test per criterion.
//!
//! Each test prints exactly one `ACCEPTANCE <n> (<name>): PASS|FAIL` line
//! (visible with `--nocapture`, or in the captured output of a failing
//! test) and enforces the criterion's runtime budget. A shared lock runs
//! the criteria one at a time so each measurement is free of cross-test
//! contention; the heavyweight end-to-end runs reuse one fixture.

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::{LazyLock, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use floodpulse_core::analysis::{final_ranks, RankSeries, ReportBundle};
use floodpulse_core::calendar::{ZoneDayKey, ZoneId};
use floodpulse_core::features::{FeatureRow, ZoneBaselineMeans, N_FEATURES};
use floodpulse_core::forest::{delta_gini, fit_forest, gini, ForestParams, TreeNode};
use floodpulse_core::ingest::ZoneDayValues;
use floodpulse_core::labels::{
    classify_by_percentiles, ImpactKind, ImpactMeasure, LabelError, LabelScheme,
};
use floodpulse_core::pipeline::{
    run_analyze, ClassChoice, InputPaths, MeasureChoice, PipelineConfig,
};
use floodpulse_core::sentiment::{classify_polarity, CompoundScore, Polarity};
use floodpulse_core::synth::{generate_scenario, ScenarioConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// Harness
// ---------------------------------------------------------------------------

static GATE: Mutex<()> = Mutex::new(());

fn gate() -> MutexGuard<'static, ()> {
    GATE.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

/// Run one criterion: serialize on the gate, run `setup` untimed (shared
/// fixtures), time `body`, print the verdict line, enforce the budget.
fn criterion<S, B>(n: u32, name: &str, budget: Duration, setup: S, body: B)
where
    S: FnOnce(),
    B: FnOnce(),
{
    let _serial = gate();
    setup();
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(body));
    let elapsed = start.elapsed();
    let passed = outcome.is_ok() && elapsed <= budget;
    println!(
        "ACCEPTANCE {n} ({name}): {} in {elapsed:.2?} (budget {budget:?})",
        if passed { "PASS" } else { "FAIL" }
    );
    if let Err(panic) = outcome {
        std::panic::resume_unwind(panic);
    }
    assert!(
        elapsed <= budget,
        "criterion {n} took {elapsed:?}, over its {budget:?} budget"
    );
}

fn zone(s: &str) -> ZoneId {
    ZoneId::new(s).unwrap()
}

fn date(s: &str) -> NaiveDate {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
}

// ---------------------------------------------------------------------------
// 1. Gini closed forms
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_gini_closed_forms() {
    criterion(
        1,
        "gini closed forms",
        Duration::from_secs(1),
        || (),
        || {
            let tol = 1e-15;
            assert!(
                (gini(&[5, 5]) - 0.5).abs() <= tol,
                "gini({{5,5}}) = {}",
                gini(&[5, 5])
            );
            assert!(
                gini(&[10, 0]).abs() <= tol,
                "gini({{10,0}}) = {}",
                gini(&[10, 0])
            );
            assert!(
                (gini(&[4, 4, 4]) - 2.0 / 3.0).abs() <= tol,
                "gini({{4,4,4}}) = {}",
                gini(&[4, 4, 4])
            );
            let parent = [5u64, 5];
            let gain = delta_gini(&parent, &[5, 0], &[0, 5]);
            assert!(
                (gain - gini(&parent)).abs() <= tol,
                "perfect split gain {gain} should equal the parent impurity {}",
                gini(&parent)
            );
        },
    );
}

// ---------------------------------------------------------------------------
// 2. Importance oracle equivalence
// ---------------------------------------------------------------------------

/// Impurity written out exactly as the definition: Σ p·(1−p).
fn oracle_impurity(counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    counts
        .iter()
        .map(|&c| {
            let p = c as f64 / n as f64;
            p * (1.0 - p)
        })
        .sum()
}

fn class_counts_of(indices: &[usize], y: &[usize], n_classes: usize) -> Vec<u64> {
    let mut counts = vec![0u64; n_classes];
    for &i in indices {
        counts[y[i]] += 1;
    }
    counts
}

/// Re-walk a stored tree with the training data: re-partition at every
/// internal node, recompute the impurity decrease from scratch, and add it
/// (unweighted) to the split feature's total.
fn rewalk_accumulate(
    node: &TreeNode,
    indices: &[usize],
    x: &[Vec<f64>],
    y: &[usize],
    n_classes: usize,
    acc: &mut [f64],
) {
    let TreeNode::Internal {
        feature_index,
        threshold,
        left,
        right,
        ..
    } = node
    else {
        return;
    };
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
        .iter()
        .partition(|&&i| x[i][*feature_index] < *threshold);
    let parent = oracle_impurity(&class_counts_of(indices, y, n_classes));
    let left_imp = oracle_impurity(&class_counts_of(&left_idx, y, n_classes));
    let right_imp = oracle_impurity(&class_counts_of(&right_idx, y, n_classes));
    let n = indices.len() as f64;
    acc[*feature_index] +=
        parent - left_idx.len() as f64 / n * left_imp - right_idx.len() as f64 / n * right_imp;
    rewalk_accumulate(left, &left_idx, x, y, n_classes, acc);
    rewalk_accumulate(right, &right_idx, x, y, n_classes, acc);
}

#[test]
fn criterion_2_importance_matches_brute_force_rewalk() {
    criterion(
        2,
        "importance oracle equivalence",
        Duration::from_secs(5),
        || (),
        || {
            let grid = [0.0, 0.25, 0.5, 1.0, 2.0, 3.5];
            let mut fixtures = 0;
            for seed in 0..24u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let n_samples: usize = rng.random_range(3..=8);
                let n_features: usize = rng.random_range(2..=3);
                let n_classes: usize = rng.random_range(2..=3);
                let x: Vec<Vec<f64>> = (0..n_samples)
                    .map(|_| {
                        (0..n_features)
                            .map(|_| {
                                if rng.random_bool(0.5) {
                                    grid[rng.random_range(0..grid.len())]
                                } else {
                                    rng.random_range(-1.0..1.0)
                                }
                            })
                            .collect()
                    })
                    .collect();
                let mut y: Vec<usize> = (0..n_samples)
                    .map(|_| rng.random_range(0..n_classes))
                    .collect();
                if y.iter().all(|&l| l == y[0]) {
                    y[0] = (y[0] + 1) % n_classes;
                }
                // One tree on the full sample, so the re-walk sees the exact
                // node populations the grower saw.
                let params = ForestParams {
                    n_trees: 1,
                    max_depth: None,
                    min_samples_leaf: 1,
                    m_features: n_features,
                    bootstrap: false,
                    seed,
                };
                let model = fit_forest(&x, &y, n_classes, &params, false).unwrap();
                assert_eq!(model.trees.len(), 1);
                let library = model.importance();

                let mut totals = vec![0.0; n_features];
                let all: Vec<usize> = (0..n_samples).collect();
                rewalk_accumulate(&model.trees[0], &all, &x, &y, n_classes, &mut totals);
                let sum: f64 = totals.iter().sum();
                let oracle: Vec<f64> = if sum > 0.0 {
                    totals.iter().map(|v| v / sum).collect()
                } else {
                    totals
                };
                for (f, (lib, ora)) in library.iter().zip(&oracle).enumerate() {
                    assert!(
                        (lib - ora).abs() <= 1e-12,
                        "seed {seed}, feature {f}: library {lib} vs re-walk {ora}"
                    );
                }
                fixtures += 1;
            }
            assert!(fixtures >= 20, "only {fixtures} fixtures ran");
        },
    );
}

// ---------------------------------------------------------------------------
// 3. Importance normalization
// ---------------------------------------------------------------------------

#[test]
fn criterion_3_importance_normalization() {
    criterion(
        3,
        "importance normalization",
        Duration::from_secs(30),
        || (),
        || {
            for seed in 0..50u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9));
                let n = 40;
                // Columns 4 and 5 are constant; the rest carry noise.
                let x: Vec<Vec<f64>> = (0..n)
                    .map(|_| {
                        let mut row: Vec<f64> =
                            (0..4).map(|_| rng.random_range(0.0..1.0)).collect();
                        row.push(3.25);
                        row.push(0.0);
                        row
                    })
                    .collect();
                let y: Vec<usize> = (0..n).map(|i| i % 3).collect();
                let params = ForestParams {
                    n_trees: 30,
                    max_depth: None,
                    min_samples_leaf: 1,
                    m_features: 3,
                    bootstrap: true,
                    seed,
                };
                let model = fit_forest(&x, &y, 3, &params, true).unwrap();
                // Premise of the normalization property: every tree split.
                for (t, tree) in model.trees.iter().enumerate() {
                    assert!(tree.n_splits() >= 1, "seed {seed}: tree {t} made no split");
                }
                let importance = model.importance();
                let sum: f64 = importance.iter().sum();
                assert!(
                    (sum - 1.0).abs() <= 1e-12,
                    "seed {seed}: importance sums to {sum}"
                );
                assert_eq!(
                    importance[4], 0.0,
                    "seed {seed}: constant column 4 got importance"
                );
                assert_eq!(
                    importance[5], 0.0,
                    "seed {seed}: constant column 5 got importance"
                );
            }
        },
    );
}

// ---------------------------------------------------------------------------
// 4. Feature formulas
// ---------------------------------------------------------------------------

/// The deviation formula substituted directly: 100·(baseline − day)/baseline.
fn substitute(b: f64, d: f64) -> f64 {
    100.0 * (b - d) / b
}

#[test]
fn criterion_4_feature_formula_fixtures() {
    criterion(
        4,
        "feature formulas",
        Duration::from_secs(1),
        || (),
        || {
            use floodpulse_core::features::deviation_pct;
            let mut cases = 0;

            // Direct substitutions, one per quantity family.
            for (b, d) in [
                (100.0, 80.0),        // activity drop
                (100.0, 120.0),       // activity surge (negative deviation)
                (40.0, 10.0),         // daily max congestion
                (25.0, 25.0),         // daily mean congestion, unchanged day
                (500.0, 450.0),       // distinct cards
                (800.0, 1000.0),      // transaction count
                (40_000.0, 30_000.0), // total spent
                (0.2, -0.1),          // sentiment crossing zero
                (-0.5, -0.25),        // negative sentiment baseline
                (3.0, 1.0),           // non-terminating decimal
                (10.0, 3.0),          // sign convention: a drop is positive
            ] {
                assert_eq!(
                    deviation_pct(Some(b), Some(d)),
                    Some(substitute(b, d)),
                    "b={b}, d={d}"
                );
                cases += 1;
            }

            // Guards: a zero or absent baseline and an absent day value all
            // leave the feature missing.
            assert_eq!(deviation_pct(Some(0.0), Some(5.0)), None);
            cases += 1;
            assert_eq!(deviation_pct(None, Some(5.0)), None);
            cases += 1;
            assert_eq!(deviation_pct(Some(100.0), None), None);
            cases += 1;

            // A full row with every quantity present.
            let key = ZoneDayKey {
                zone: zone("Z001"),
                date: date("2017-08-28"),
            };
            let baselines = ZoneBaselineMeans {
                mean_activity: Some(200.0),
                mean_max_congestion: Some(40.0),
                mean_mean_congestion: Some(25.0),
                mean_cards: Some(500.0),
                mean_tx: Some(800.0),
                mean_spent: Some(40_000.0),
                mean_avg_sentiment: Some(0.25),
                mean_n_pos: Some(8.0),
                mean_n_neu: Some(10.0),
                mean_n_neg: Some(4.0),
            };
            let day = ZoneDayValues {
                activity_index: Some(150.0),
                max_congestion_pct: Some(70.0),
                mean_congestion_pct: Some(20.0),
                n_cards: Some(430.0),
                n_transactions: Some(900.0),
                total_spent: Some(31_000.0),
                avg_sentiment: Some(-0.05),
                n_pos: Some(2),
                n_neu: Some(13),
                n_neg: Some(9),
            };
            let row = FeatureRow::compute(key.clone(), &baselines, &day);
            let expected = [
                substitute(200.0, 150.0),
                substitute(40.0, 70.0),
                substitute(25.0, 20.0),
                substitute(500.0, 430.0),
                substitute(800.0, 900.0),
                substitute(40_000.0, 31_000.0),
                substitute(0.25, -0.05),
                substitute(8.0, 2.0),
                substitute(10.0, 13.0),
                substitute(4.0, 9.0),
            ];
            assert_eq!(row.present, [true; N_FEATURES]);
            assert_eq!(row.fe, expected);
            cases += 1;

            // A row where the zero-baseline guard and missing day values mix.
            let sparse_baselines = ZoneBaselineMeans {
                mean_activity: Some(100.0),
                mean_n_pos: Some(0.0), // zero baseline: FE8 must stay missing
                mean_n_neu: Some(10.0),
                ..ZoneBaselineMeans::default()
            };
            let sparse_day = ZoneDayValues {
                activity_index: Some(25.0),
                n_pos: Some(7),
                n_neu: None, // missing day value: FE9 must stay missing
                ..ZoneDayValues::default()
            };
            let sparse = FeatureRow::compute(key, &sparse_baselines, &sparse_day);
            let mut want_present = [false; N_FEATURES];
            want_present[0] = true;
            assert_eq!(sparse.present, want_present);
            assert_eq!(sparse.value(0), Some(substitute(100.0, 25.0)));
            assert_eq!(sparse.value(7), None);
            assert_eq!(sparse.value(8), None);
            cases += 1;

            // Polarity boundaries: compounds exactly at ±0.05 land in the
            // positive/negative buckets, strictly inside stays neutral.
            assert_eq!(
                classify_polarity(CompoundScore::from_value(0.05)),
                Polarity::Positive
            );
            cases += 1;
            assert_eq!(
                classify_polarity(CompoundScore::from_value(-0.05)),
                Polarity::Negative
            );
            cases += 1;
            for inside in [0.049_999, -0.049_999, 0.0] {
                assert_eq!(
                    classify_polarity(CompoundScore::from_value(inside)),
                    Polarity::Neutral
                );
            }
            cases += 1;

            // Those buckets feed FE8–FE10 counts.
            let compounds = [0.05, 0.06, -0.05, 0.02, -0.049, 0.0];
            let (mut n_pos, mut n_neu, mut n_neg) = (0u64, 0u64, 0u64);
            for c in compounds {
                match classify_polarity(CompoundScore::from_value(c)) {
                    Polarity::Positive => n_pos += 1,
                    Polarity::Neutral => n_neu += 1,
                    Polarity::Negative => n_neg += 1,
                }
            }
            assert_eq!((n_pos, n_neu, n_neg), (2, 3, 1));
            let post_baselines = ZoneBaselineMeans {
                mean_n_pos: Some(4.0),
                mean_n_neu: Some(2.0),
                mean_n_neg: Some(2.0),
                ..ZoneBaselineMeans::default()
            };
            let post_day = ZoneDayValues {
                n_pos: Some(n_pos),
                n_neu: Some(n_neu),
                n_neg: Some(n_neg),
                ..ZoneDayValues::default()
            };
            let posts = FeatureRow::compute(
                ZoneDayKey {
                    zone: zone("Z002"),
                    date: date("2017-08-29"),
                },
                &post_baselines,
                &post_day,
            );
            assert_eq!(posts.value(7), Some(substitute(4.0, 2.0)));
            assert_eq!(posts.value(8), Some(substitute(2.0, 3.0)));
            assert_eq!(posts.value(9), Some(substitute(2.0, 1.0)));
            cases += 1;

            // Unchanged day: exact zero, not an epsilon.
            assert_eq!(deviation_pct(Some(500.0), Some(500.0)), Some(0.0));
            cases += 1;

            assert!(cases >= 20, "only {cases} fixture cases ran");
        },
    );
}

// ---------------------------------------------------------------------------
// 5. Labeling schemes against a brute-force percentile oracle
// ---------------------------------------------------------------------------

/// Linear-interpolation percentile recomputed from its definition.
fn oracle_percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = p / 100.0 * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Brute-force labeling: sort, cut, and count thresholds below each value,
/// with the zero class carved out first for inundation-style schemes.
/// `Err(())` marks a scheme the value set cannot support.
fn oracle_labels(
    values: &BTreeMap<ZoneId, f64>,
    scheme: &LabelScheme,
) -> Result<BTreeMap<ZoneId, usize>, ()> {
    let mut all: Vec<f64> = values.values().copied().collect();
    all.sort_by(f64::total_cmp);
    let mut distinct = all.clone();
    distinct.dedup();
    if distinct.len() < scheme.n_classes as usize {
        return Err(());
    }
    let cuts: Vec<f64> = if scheme.zero_special {
        let positives: Vec<f64> = all.iter().copied().filter(|&v| v > 0.0).collect();
        if positives.is_empty() {
            Vec::new()
        } else {
            scheme
                .percentiles
                .iter()
                .map(|&p| oracle_percentile(&positives, p))
                .collect()
        }
    } else {
        scheme
            .percentiles
            .iter()
            .map(|&p| oracle_percentile(&all, p))
            .collect()
    };
    Ok(values
        .iter()
        .map(|(z, &v)| {
            let class = if scheme.zero_special {
                if v == 0.0 {
                    0
                } else {
                    1 + cuts.iter().filter(|&&t| v > t).count()
                }
            } else {
                cuts.iter().filter(|&&t| v > t).count()
            };
            (z.clone(), class)
        })
        .collect())
}

fn value_set(
    n: usize,
    kind: ImpactKind,
    style: u32,
    rng: &mut ChaCha8Rng,
) -> BTreeMap<ZoneId, f64> {
    (0..n)
        .map(|i| {
            let v = match (style, kind) {
                // Enumerable ladders; inundation keeps a zero block.
                (0, ImpactKind::Claims) => (i + 1) as f64 * 0.01,
                (0, ImpactKind::Inundation) => {
                    if i < n.div_ceil(3) {
                        0.0
                    } else {
                        i as f64 * 7.5
                    }
                }
                // Tied values so cuts land on repeated data points.
                _ => {
                    let pool = [0.0, 0.1, 0.1, 0.35, 0.35, 0.8, 1.5, 2.0];
                    pool[rng.random_range(0..pool.len())]
                }
            };
            (zone(&format!("Z{:03}", i + 1)), v)
        })
        .collect()
}

#[test]
fn criterion_5_labeling_matches_percentile_oracle() {
    criterion(
        5,
        "labeling oracle",
        Duration::from_secs(1),
        || (),
        || {
            let mut rng = ChaCha8Rng::seed_from_u64(55);
            let mut cases = 0;
            for n in 4..=12usize {
                for kind in [ImpactKind::Claims, ImpactKind::Inundation] {
                    for n_classes in 2..=4u8 {
                        for style in 0..2u32 {
                            let values = value_set(n, kind, style, &mut rng);
                            let scheme = LabelScheme::new(kind, n_classes).unwrap();
                            let measure = ImpactMeasure::from_values(kind, values.clone());
                            let library = classify_by_percentiles(&measure, &scheme);
                            match oracle_labels(&values, &scheme) {
                                Ok(expected) => {
                                    let got: BTreeMap<ZoneId, usize> = library
                                    .unwrap_or_else(|e| {
                                        panic!("n={n} {kind:?} {n_classes}-class style {style}: {e}")
                                    })
                                    .into_iter()
                                    .map(|l| (l.zone, l.class_index))
                                    .collect();
                                    assert_eq!(
                                        got, expected,
                                        "n={n} {kind:?} {n_classes}-class style {style}"
                                    );
                                }
                                Err(()) => {
                                    assert!(
                                        matches!(library, Err(LabelError::DegenerateScheme { .. })),
                                        "n={n} {kind:?} {n_classes}-class style {style}: \
                                     expected a degenerate-scheme error"
                                    );
                                }
                            }
                            cases += 1;
                        }
                    }
                }
            }
            assert_eq!(cases, 108);

            // Hand-enumerated anchors. Boundary to lower: 5.0 sits exactly on
            // the median of 1..=9 and takes the lower class.
            let ladder: BTreeMap<ZoneId, f64> = (0..9)
                .map(|i| (zone(&format!("Z{:03}", i + 1)), (i + 1) as f64))
                .collect();
            let scheme = LabelScheme::new(ImpactKind::Claims, 2).unwrap();
            let labels = classify_by_percentiles(
                &ImpactMeasure::from_values(ImpactKind::Claims, ladder),
                &scheme,
            )
            .unwrap();
            let classes: Vec<usize> = labels.iter().map(|l| l.class_index).collect();
            assert_eq!(classes, vec![0, 0, 0, 0, 0, 1, 1, 1, 1]);

            // The inundation zero class bypasses the percentile split.
            let wet: BTreeMap<ZoneId, f64> = [0.0, 0.0, 4.0, 8.0]
                .iter()
                .enumerate()
                .map(|(i, &v)| (zone(&format!("Z{:03}", i + 1)), v))
                .collect();
            let scheme = LabelScheme::new(ImpactKind::Inundation, 2).unwrap();
            let labels = classify_by_percentiles(
                &ImpactMeasure::from_values(ImpactKind::Inundation, wet),
                &scheme,
            )
            .unwrap();
            let classes: Vec<usize> = labels.iter().map(|l| l.class_index).collect();
            assert_eq!(classes, vec![0, 0, 1, 1]);
        },
    );
}

// ---------------------------------------------------------------------------
// End-to-end fixtures shared by criteria 6–9
// ---------------------------------------------------------------------------

/// Cheap generation settings; the criteria pin zones, calendar, classes,
/// and tree count, but not the per-zone sampling density.
fn shrink_generation(config: &mut ScenarioConfig) {
    config.tiles_per_zone = 2;
    config.segments_per_zone = 1;
    config.traffic_periods_per_day = 8;
    config.activity_samples_per_day = 2;
}

struct GeneratedRun {
    bundle: ReportBundle,
    majority_rate: f64,
}

/// Generate a scenario, run the full analyze pipeline over its files, and
/// read the claims report back from disk.
fn analyze_generated(
    scenario: &ScenarioConfig,
    classes: ClassChoice,
    n_trees: Option<usize>,
    k_folds: usize,
    tune: bool,
) -> GeneratedRun {
    let dir = tempfile::tempdir().unwrap();
    let (files, _) = generate_scenario(scenario, &dir.path().join("data")).unwrap();
    let mut config = PipelineConfig {
        inputs: Some(InputPaths::from_scenario(&files)),
        ..PipelineConfig::default()
    };
    config.run.out_dir = dir.path().join("out");
    config.run.seed = scenario.seed;
    config.run.measure = MeasureChoice::Claims;
    config.run.classes = classes;
    config.run.k_folds = k_folds;
    config.forest.n_trees = n_trees;
    config.tuning.enabled = tune;
    let artifacts = run_analyze(&config).unwrap();

    let n_classes: u8 = match classes {
        ClassChoice::Two => 2,
        ClassChoice::Three => 3,
        ClassChoice::Four => 4,
        ClassChoice::All => panic!("analyze_generated reads a single scheme"),
    };
    let json = fs::read_to_string(
        artifacts
            .out_dir
            .join(format!("reports/claims_{n_classes}/bundle.json")),
    )
    .unwrap();
    let bundle: ReportBundle = serde_json::from_str(&json).unwrap();

    let labels_csv = fs::read_to_string(
        artifacts
            .out_dir
            .join(format!("labels/labels_claims_{n_classes}.csv")),
    )
    .unwrap();
    let mut counts = BTreeMap::<usize, usize>::new();
    for line in labels_csv.lines().skip(1) {
        let class: usize = line.rsplit(',').next().unwrap().parse().unwrap();
        *counts.entry(class).or_default() += 1;
    }
    let total: usize = counts.values().sum();
    let majority_rate = *counts.values().max().unwrap() as f64 / total as f64;

    GeneratedRun {
        bundle,
        majority_rate,
    }
}

// ---------------------------------------------------------------------------
// 6. Planted-signal recovery
// ---------------------------------------------------------------------------

#[test]
fn criterion_6_planted_signal_recovery() {
    criterion(
        6,
        "planted-signal recovery",
        Duration::from_secs(600),
        || (),
        || {
            let mut planted_wins = 0;
            for i in 0..10u64 {
                let mut scenario = ScenarioConfig::planted_activity(1000 + i);
                shrink_generation(&mut scenario);
                let run = analyze_generated(&scenario, ClassChoice::Three, Some(200), 2, false);
                let fe1 = &run.bundle.response.per_feature[0];
                assert_eq!(fe1.feature, "FE1");
                if fe1.final_rank == 1 {
                    planted_wins += 1;
                }
            }
            assert!(
                planted_wins >= 9,
                "the planted activity signal took final rank 1 in only {planted_wins}/10 runs"
            );

            let mut null_wins = [0usize; N_FEATURES];
            for i in 0..10u64 {
                let mut scenario = ScenarioConfig::null_scenario(2000 + i);
                shrink_generation(&mut scenario);
                let run = analyze_generated(&scenario, ClassChoice::Three, Some(200), 2, false);
                for (f, summary) in run.bundle.response.per_feature.iter().enumerate() {
                    if summary.final_rank == 1 {
                        null_wins[f] += 1;
                    }
                }
            }
            assert!(
                null_wins.iter().all(|&w| w <= 6),
                "a feature won the signal-free scenario too consistently: {null_wins:?}"
            );
        },
    );
}

// ---------------------------------------------------------------------------
// 7. Micro-F1 sanity
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_micro_f1_sanity() {
    criterion(
        7,
        "micro-F1 sanity",
        Duration::from_secs(600),
        || (),
        || {
            let mut separable = ScenarioConfig::separable(77);
            shrink_generation(&mut separable);
            let run = analyze_generated(&separable, ClassChoice::Three, None, 3, true);
            assert_eq!(
                run.bundle.results.len(),
                22,
                "one model per flood-period day"
            );
            for day in &run.bundle.results {
                let f1 = day.f1_tuned.expect("tuning was enabled");
                assert!(
                    f1 >= 0.9,
                    "{}: tuned micro-F1 {f1:.3} on the separable scenario fell below 0.9",
                    day.date
                );
            }

            let mut null = ScenarioConfig::null_scenario(78);
            shrink_generation(&mut null);
            let run = analyze_generated(&null, ClassChoice::Three, None, 3, true);
            let majority = run.majority_rate;
            for day in &run.bundle.results {
                for f1 in [day.f1_default, day.f1_tuned.expect("tuning was enabled")] {
                    assert!(
                    (f1 - majority).abs() <= 0.15,
                    "{}: micro-F1 {f1:.3} strays beyond ±0.15 of the majority rate {majority:.3}",
                    day.date
                );
                }
            }
        },
    );
}

// ---------------------------------------------------------------------------
// 8 & 9. Determinism and report structure share one fixture
// ---------------------------------------------------------------------------

type FileTree = BTreeMap<String, Vec<u8>>;

fn snapshot_tree(root: &Path) -> FileTree {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(root)
                    .unwrap()
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy())
                    .collect::<Vec<_>>()
                    .join("/");
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn assert_identical(a: &FileTree, b: &FileTree, what: &str, skip: &[&str]) {
    let keys_a: Vec<&String> = a.keys().collect();
    let keys_b: Vec<&String> = b.keys().collect();
    assert_eq!(keys_a, keys_b, "{what}: the runs wrote different file sets");
    for (name, bytes) in a {
        if skip.contains(&name.as_str()) {
            continue;
        }
        assert!(bytes == &b[name], "{what}: {name} differs between runs");
    }
}

struct DeterminismFixture {
    parallel_a: FileTree,
    parallel_b: FileTree,
    serial_a: FileTree,
    serial_b: FileTree,
}

/// One moderate scenario analyzed four times into the same output tree:
/// twice with tree-level parallelism, twice without.
static DETERMINISM: LazyLock<DeterminismFixture> = LazyLock::new(|| {
    let dir = tempfile::tempdir().unwrap();
    let mut scenario = ScenarioConfig::defaults(90);
    scenario.n_zones = 60;
    shrink_generation(&mut scenario);
    let (files, _) = generate_scenario(&scenario, &dir.path().join("data")).unwrap();
    let mut config = PipelineConfig {
        inputs: Some(InputPaths::from_scenario(&files)),
        ..PipelineConfig::default()
    };
    config.run.out_dir = dir.path().join("out");
    config.run.seed = 90;
    config.run.measure = MeasureChoice::Both;
    config.run.classes = ClassChoice::All;
    config.forest.n_trees = Some(50);
    let snap = |config: &PipelineConfig| {
        let artifacts = run_analyze(config).unwrap();
        snapshot_tree(&artifacts.out_dir)
    };
    let parallel_a = snap(&config);
    let parallel_b = snap(&config);
    config.run.parallel = false;
    let serial_a = snap(&config);
    let serial_b = snap(&config);
    DeterminismFixture {
        parallel_a,
        parallel_b,
        serial_a,
        serial_b,
    }
});

#[test]
fn criterion_8_byte_identical_reruns() {
    criterion(
        8,
        "determinism",
        Duration::from_secs(900),
        || (),
        || {
            let fx = &*DETERMINISM;
            assert_identical(&fx.parallel_a, &fx.parallel_b, "parallel rerun", &[]);
            assert_identical(&fx.serial_a, &fx.serial_b, "serial rerun", &[]);
            // Scheduling must not leak into the artifacts: only the manifest
            // (which hashes the configured parallelism flag) may differ.
            assert_identical(
                &fx.parallel_a,
                &fx.serial_a,
                "parallel vs serial",
                &["manifest.json"],
            );
            let outputs = |tree: &FileTree| -> serde_json::Value {
                serde_json::from_slice::<serde_json::Value>(&tree["manifest.json"]).unwrap()
                    ["outputs"]
                    .clone()
            };
            assert_eq!(
                outputs(&fx.parallel_a),
                outputs(&fx.serial_a),
                "manifest output checksums differ between scheduling modes"
            );
        },
    );
}

#[test]
fn criterion_9_report_structure_fidelity() {
    criterion(
        9,
        "report structure fidelity",
        Duration::from_secs(1),
        || {
            LazyLock::force(&DETERMINISM);
        },
        || {
            let fx = &*DETERMINISM;
            let mut tables = 0;
            for measure in ["claims", "inundation"] {
                for n_classes in [2u8, 3, 4] {
                    for (stage, stage_len) in [("response", 9usize), ("recovery", 13)] {
                        let name = format!("reports/{measure}_{n_classes}/ranks_{stage}.csv");
                        let bytes = fx
                            .parallel_a
                            .get(&name)
                            .unwrap_or_else(|| panic!("missing report table {name}"));
                        let text = std::str::from_utf8(bytes).unwrap();
                        let mut lines = text.lines();
                        assert_eq!(
                            lines.next(),
                            Some("Feature,PersistenceDays,RankRangeMin,RankRangeMax,FinalRank"),
                            "{name}: header"
                        );
                        let mut finals = Vec::new();
                        for (i, line) in lines.enumerate() {
                            let cols: Vec<&str> = line.split(',').collect();
                            assert_eq!(cols.len(), 5, "{name} row {i}: column count");
                            assert_eq!(cols[0], format!("FE{}", i + 1), "{name} row {i}: order");
                            let persistence: usize = cols[1].parse().unwrap();
                            let lo: usize = cols[2].parse().unwrap();
                            let hi: usize = cols[3].parse().unwrap();
                            let final_rank: usize = cols[4].parse().unwrap();
                            assert!(
                                (1..=stage_len).contains(&persistence),
                                "{name} {}: persistence {persistence} outside 1..={stage_len}",
                                cols[0]
                            );
                            assert!(
                                1 <= lo && lo <= hi && hi <= N_FEATURES,
                                "{name} {}: rank range {lo}..{hi}",
                                cols[0]
                            );
                            assert!((1..=N_FEATURES).contains(&final_rank));
                            finals.push(final_rank);
                        }
                        assert_eq!(finals.len(), N_FEATURES, "{name}: all ten features listed");
                        // Competition-ranking shape: ties share the
                        // minimum rank and displace the ranks after them.
                        let mut sorted = finals.clone();
                        sorted.sort_unstable();
                        assert_eq!(sorted[0], 1, "{name}: no feature holds rank 1");
                        for i in 1..sorted.len() {
                            assert!(
                                sorted[i] == i + 1 || sorted[i] == sorted[i - 1],
                                "{name}: final ranks {sorted:?} break the tie pattern"
                            );
                        }
                        tables += 1;
                    }
                }
            }
            assert_eq!(tables, 12);

            // A constructed tie: equal mean ranks share the minimum rank
            // and the following rank is skipped.
            let d1 = date("2017-08-25");
            let d2 = date("2017-08-26");
            let series = RankSeries {
                feature_count: 4,
                by_date: BTreeMap::from([(d1, vec![1, 2, 3, 4]), (d2, vec![2, 1, 3, 4])]),
            };
            assert_eq!(final_ranks(&series, &[d1, d2]), vec![1, 1, 3, 4]);
        },
    );
}
