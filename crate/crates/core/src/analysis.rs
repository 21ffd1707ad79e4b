//! Daily models and the temporal importance analysis built on top of them.
//!
//! One forest is fitted per flood-period day on that day's feature matrix
//! against the static impact labels. Each day yields an importance vector
//! (from a fit on the full day's data) and a cross-validated micro-F1
//! estimate (the day's model quality proxy); with tuning enabled, a random
//! search runs first and the selected parameters feed both the CV score
//! and the importance fit. Importances are then turned into per-day
//! competition ranks, per-stage persistence runs, and final ranks.
//!
//! Seeds: day `i` of a run derives its fit seed from `(master_seed, 2i)`
//! and its fold/search seed from `(master_seed, 2i+1)` via SplitMix64, so
//! days are decorrelated but the whole run is reproducible from one seed.

use crate::calendar::{Stage, StudyCalendar, ZoneId};
use crate::features::{FeatureMatrix, FEATURE_NAMES};
use crate::forest::{
    cross_validate, fit_forest, random_search, stratified_k_folds, ForestError, ForestParams,
    ParamSpace, SearchError,
};
use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("zone {zone} has features on {date} but no label")]
    MissingLabel { zone: ZoneId, date: NaiveDate },
    #[error("no dates to analyze")]
    NoDates,
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error("i/o error writing {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// SplitMix64 step — a well-mixed 64-bit derivation for per-day seeds.
pub fn derive_seed(master: u64, salt: u64) -> u64 {
    let mut z = master
        .wrapping_add(salt.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random-search settings for per-day tuning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TuningConfig {
    pub n_iter: usize,
    pub k_folds: usize,
    pub space: ParamSpace,
}

impl TuningConfig {
    pub fn defaults(n_features: usize) -> Self {
        TuningConfig {
            n_iter: 12,
            k_folds: 3,
            space: ParamSpace::defaults(n_features),
        }
    }
}

/// One flood-period day's model outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyModelResult {
    pub date: NaiveDate,
    pub importance: Vec<f64>,
    pub f1_default: f64,
    pub f1_tuned: Option<f64>,
    pub params_used: ForestParams,
}

/// A feature matrix as the forest's row type.
pub fn design_rows(matrix: &FeatureMatrix) -> Vec<Vec<f64>> {
    matrix.rows.iter().map(|r| r.fe.to_vec()).collect()
}

/// Fit one forest per date against the static labels.
///
/// `k_folds` controls the CV estimate of the untuned score (and is
/// superseded by the tuning config's fold count for the tuned score).
#[allow(clippy::too_many_arguments)]
pub fn run_daily_models(
    matrices: &BTreeMap<NaiveDate, FeatureMatrix>,
    labels: &BTreeMap<ZoneId, usize>,
    n_classes: usize,
    base_params: &ForestParams,
    tuning: Option<&TuningConfig>,
    k_folds: usize,
    parallel: bool,
) -> Result<Vec<DailyModelResult>, AnalysisError> {
    if matrices.is_empty() {
        return Err(AnalysisError::NoDates);
    }
    let mut out = Vec::with_capacity(matrices.len());
    for (day_index, (&date, matrix)) in matrices.iter().enumerate() {
        let x = design_rows(matrix);
        let mut y = Vec::with_capacity(matrix.rows.len());
        for row in &matrix.rows {
            let Some(&label) = labels.get(&row.key.zone) else {
                return Err(AnalysisError::MissingLabel {
                    zone: row.key.zone.clone(),
                    date,
                });
            };
            y.push(label);
        }

        let fit_seed = derive_seed(base_params.seed, 2 * day_index as u64);
        let cv_seed = derive_seed(base_params.seed, 2 * day_index as u64 + 1);
        let default_params = ForestParams {
            seed: fit_seed,
            ..base_params.clone()
        };

        let mut fold_rng = ChaCha8Rng::seed_from_u64(cv_seed);
        let folds = stratified_k_folds(&y, k_folds, &mut fold_rng)?;
        let f1_default = cross_validate(&x, &y, n_classes, &default_params, &folds, parallel)?;

        let (params_used, f1_tuned) = match tuning {
            Some(t) => {
                let (best, score) = random_search(
                    &x, &y, n_classes, &t.space, t.n_iter, t.k_folds, cv_seed, parallel,
                )?;
                // The search returns params carrying its own seed; pin the
                // importance fit to this day's fit stream.
                (
                    ForestParams {
                        seed: fit_seed,
                        ..best
                    },
                    Some(score),
                )
            }
            None => (default_params.clone(), None),
        };

        let model = fit_forest(&x, &y, n_classes, &params_used, parallel)?;
        out.push(DailyModelResult {
            date,
            importance: model.importance(),
            f1_default,
            f1_tuned,
            params_used,
        });
    }
    Ok(out)
}

/// Competition ranking, rank 1 for the largest importance: each feature's
/// rank is one plus the number of strictly larger competitors, so exact
/// ties share the minimum rank and the next rank is skipped.
pub fn rank_features(importance: &[f64]) -> Vec<usize> {
    importance
        .iter()
        .map(|&v| 1 + importance.iter().filter(|&&o| o > v).count())
        .collect()
}

/// Per-date feature ranks for a whole run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSeries {
    pub feature_count: usize,
    pub by_date: BTreeMap<NaiveDate, Vec<usize>>,
}

impl RankSeries {
    pub fn from_results(results: &[DailyModelResult]) -> Self {
        let feature_count = results.first().map_or(0, |r| r.importance.len());
        RankSeries {
            feature_count,
            by_date: results
                .iter()
                .map(|r| (r.date, rank_features(&r.importance)))
                .collect(),
        }
    }

    /// One feature's rank on each of the given dates (which must all be
    /// ranked).
    pub fn feature_track(&self, feature: usize, dates: &[NaiveDate]) -> Vec<usize> {
        dates.iter().map(|d| self.by_date[d][feature]).collect()
    }
}

/// Longest contiguous run (earliest on ties) of a rank track whose
/// consecutive-day changes stay within `k`; returns the run length and the
/// [min, max] rank range inside that run.
pub fn persistence(track: &[usize], k: usize) -> (usize, (usize, usize)) {
    assert!(!track.is_empty(), "persistence of an empty stage");
    let mut best_start = 0;
    let mut best_len = 1;
    let mut start = 0;
    for i in 1..track.len() {
        let delta = track[i].abs_diff(track[i - 1]);
        if delta > k {
            if i - start > best_len {
                best_len = i - start;
                best_start = start;
            }
            start = i;
        }
    }
    if track.len() - start > best_len {
        best_len = track.len() - start;
        best_start = start;
    }
    let run = &track[best_start..best_start + best_len];
    let min = *run.iter().min().expect("non-empty run");
    let max = *run.iter().max().expect("non-empty run");
    (best_len, (min, max))
}

/// Mean rank per feature over the stage dates, then competition-ranked
/// ascending (lower mean rank → better final rank; exact ties share it).
pub fn final_ranks(series: &RankSeries, dates: &[NaiveDate]) -> Vec<usize> {
    assert!(!dates.is_empty(), "final ranks of an empty stage");
    let n = series.feature_count;
    let mut means = vec![0.0f64; n];
    for d in dates {
        for (m, &r) in means.iter_mut().zip(&series.by_date[d]) {
            *m += r as f64;
        }
    }
    for m in &mut means {
        *m /= dates.len() as f64;
    }
    means
        .iter()
        .map(|&v| 1 + means.iter().filter(|&&o| o < v).count())
        .collect()
}

/// One feature's stage summary row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureStageSummary {
    pub feature: String,
    pub persistence_days: usize,
    pub rank_range_min: usize,
    pub rank_range_max: usize,
    pub final_rank: usize,
}

/// All features' summaries for one stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: Stage,
    pub per_feature: Vec<FeatureStageSummary>,
}

pub fn summarize_stage(
    series: &RankSeries,
    stage: Stage,
    dates: &[NaiveDate],
    k: usize,
) -> StageSummary {
    let finals = final_ranks(series, dates);
    let per_feature = (0..series.feature_count)
        .map(|f| {
            let track = series.feature_track(f, dates);
            let (persistence_days, (rank_range_min, rank_range_max)) = persistence(&track, k);
            FeatureStageSummary {
                feature: feature_name(f),
                persistence_days,
                rank_range_min,
                rank_range_max,
                final_rank: finals[f],
            }
        })
        .collect();
    StageSummary { stage, per_feature }
}

fn feature_name(index: usize) -> String {
    FEATURE_NAMES
        .get(index)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("FE{}", index + 1))
}

/// Everything one (measure, scheme) analysis produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub measure: String,
    pub n_classes: u8,
    pub persistence_k: usize,
    pub seed: u64,
    pub results: Vec<DailyModelResult>,
    pub rank_series: RankSeries,
    pub response: StageSummary,
    pub recovery: StageSummary,
}

/// Build ranks, persistence runs, and final ranks for both stages.
pub fn summarize(
    measure: impl Into<String>,
    n_classes: u8,
    results: Vec<DailyModelResult>,
    calendar: &StudyCalendar,
    persistence_k: usize,
    seed: u64,
) -> ReportBundle {
    let rank_series = RankSeries::from_results(&results);
    let response_days: Vec<NaiveDate> = calendar
        .stage_days(Stage::Response)
        .into_iter()
        .filter(|d| rank_series.by_date.contains_key(d))
        .collect();
    let recovery_days: Vec<NaiveDate> = calendar
        .stage_days(Stage::Recovery)
        .into_iter()
        .filter(|d| rank_series.by_date.contains_key(d))
        .collect();
    let response = summarize_stage(&rank_series, Stage::Response, &response_days, persistence_k);
    let recovery = summarize_stage(&rank_series, Stage::Recovery, &recovery_days, persistence_k);
    ReportBundle {
        measure: measure.into(),
        n_classes,
        persistence_k,
        seed,
        results,
        rank_series,
        response,
        recovery,
    }
}

fn write_file(path: &Path, content: &str) -> Result<(), AnalysisError> {
    let mut f = std::fs::File::create(path).map_err(|source| AnalysisError::Io {
        path: path.display().to_string(),
        source,
    })?;
    f.write_all(content.as_bytes())
        .map_err(|source| AnalysisError::Io {
            path: path.display().to_string(),
            source,
        })
}

fn rank_table_csv(summary: &StageSummary) -> String {
    let mut out = String::from("Feature,PersistenceDays,RankRangeMin,RankRangeMax,FinalRank\n");
    for row in &summary.per_feature {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            row.feature,
            row.persistence_days,
            row.rank_range_min,
            row.rank_range_max,
            row.final_rank
        ));
    }
    out
}

fn rank_series_csv(series: &RankSeries) -> String {
    let mut out = String::from("date");
    for f in 0..series.feature_count {
        out.push(',');
        out.push_str(&feature_name(f).to_lowercase());
    }
    out.push('\n');
    for (date, ranks) in &series.by_date {
        out.push_str(&date.format("%Y-%m-%d").to_string());
        for r in ranks {
            out.push_str(&format!(",{r}"));
        }
        out.push('\n');
    }
    out
}

fn f1_series_csv(results: &[DailyModelResult]) -> String {
    let tuned = results.iter().any(|r| r.f1_tuned.is_some());
    let mut out = String::from(if tuned {
        "date,f1_default,f1_tuned\n"
    } else {
        "date,f1_default\n"
    });
    for r in results {
        out.push_str(&r.date.format("%Y-%m-%d").to_string());
        out.push_str(&format!(",{}", r.f1_default));
        if tuned {
            out.push_str(&format!(
                ",{}",
                r.f1_tuned.map(|v| v.to_string()).unwrap_or_default()
            ));
        }
        out.push('\n');
    }
    out
}

/// Write `ranks_response.csv`, `ranks_recovery.csv`, `rank_series.csv`,
/// `f1_series.csv`, and `bundle.json` under
/// `<out_root>/reports/<measure>_<n_classes>/`; returns the paths written.
pub fn emit_report(out_root: &Path, bundle: &ReportBundle) -> Result<Vec<PathBuf>, AnalysisError> {
    let dir = out_root
        .join("reports")
        .join(format!("{}_{}", bundle.measure, bundle.n_classes));
    std::fs::create_dir_all(&dir).map_err(|source| AnalysisError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut written = Vec::new();
    for (name, content) in [
        ("ranks_response.csv", rank_table_csv(&bundle.response)),
        ("ranks_recovery.csv", rank_table_csv(&bundle.recovery)),
        ("rank_series.csv", rank_series_csv(&bundle.rank_series)),
        ("f1_series.csv", f1_series_csv(&bundle.results)),
        (
            "bundle.json",
            serde_json::to_string_pretty(bundle).expect("bundle serialization cannot fail"),
        ),
    ] {
        let path = dir.join(name);
        write_file(&path, &content)?;
        written.push(path);
    }
    Ok(written)
}
