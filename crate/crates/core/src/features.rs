//! Baseline-deviation features.
//!
//! Every feature is the percent deviation of a zone-day quantity from that
//! zone's normal-period mean, with the sign convention (normal − current) /
//! normal × 100: a drop from baseline is positive, a rise is negative. The
//! ten features in fixed order:
//!
//! | index | name | quantity |
//! |-------|------|----------|
//! | 0 | FE1  | mean device activity |
//! | 1 | FE2  | daily max congestion percentage |
//! | 2 | FE3  | daily mean congestion percentage |
//! | 3 | FE4  | number of active cards |
//! | 4 | FE5  | number of transactions |
//! | 5 | FE6  | total spent |
//! | 6 | FE7  | average post sentiment |
//! | 7 | FE8  | number of positive posts |
//! | 8 | FE9  | number of neutral posts |
//! | 9 | FE10 | number of negative posts |
//!
//! Zero or absent baselines make a feature missing rather than infinite;
//! missing cells are filled at matrix-assembly time under a configurable
//! imputation policy, and every fill is logged.

use crate::calendar::{SourceKind, StudyCalendar, ZoneDayKey, ZoneId};
use crate::ingest::{ZoneDaySeries, ZoneDayValues};
use chrono::NaiveDate;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

pub const N_FEATURES: usize = 10;

/// Feature names in index order (index 0 is FE1).
pub const FEATURE_NAMES: [&str; N_FEATURES] = [
    "FE1", "FE2", "FE3", "FE4", "FE5", "FE6", "FE7", "FE8", "FE9", "FE10",
];

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("feature column {feature} on {date} has no observed values to impute from")]
    DegenerateColumn {
        feature: &'static str,
        date: NaiveDate,
    },
    #[error("i/o error writing {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Per-zone means over the applicable baseline windows. `None` marks a
/// quantity with no non-missing baseline day for that zone.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ZoneBaselineMeans {
    pub mean_activity: Option<f64>,
    pub mean_max_congestion: Option<f64>,
    pub mean_mean_congestion: Option<f64>,
    pub mean_cards: Option<f64>,
    pub mean_tx: Option<f64>,
    pub mean_spent: Option<f64>,
    pub mean_avg_sentiment: Option<f64>,
    pub mean_n_pos: Option<f64>,
    pub mean_n_neu: Option<f64>,
    pub mean_n_neg: Option<f64>,
}

/// Baseline means for every zone seen in the series.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ZoneBaselines {
    per_zone: BTreeMap<ZoneId, ZoneBaselineMeans>,
}

impl ZoneBaselines {
    pub fn get(&self, zone: &ZoneId) -> Option<&ZoneBaselineMeans> {
        self.per_zone.get(zone)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ZoneId, &ZoneBaselineMeans)> {
        self.per_zone.iter()
    }

    pub fn len(&self) -> usize {
        self.per_zone.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_zone.is_empty()
    }
}

#[derive(Default)]
struct MeanAcc {
    sum: f64,
    n: u64,
}

impl MeanAcc {
    fn push(&mut self, v: Option<f64>) {
        if let Some(v) = v {
            self.sum += v;
            self.n += 1;
        }
    }

    fn mean(&self) -> Option<f64> {
        (self.n > 0).then(|| self.sum / self.n as f64)
    }
}

/// Per-zone means of each quantity over its source's baseline window,
/// skipping missing days. The post quantities use the (shorter) post
/// baseline window; everything else uses the main normal window.
pub fn compute_baselines(series: &ZoneDaySeries, calendar: &StudyCalendar) -> ZoneBaselines {
    let (main_start, main_end) = calendar.baseline_window(SourceKind::Activity);
    let (post_start, post_end) = calendar.baseline_window(SourceKind::Posts);

    #[derive(Default)]
    struct Acc {
        activity: MeanAcc,
        max_congestion: MeanAcc,
        mean_congestion: MeanAcc,
        cards: MeanAcc,
        tx: MeanAcc,
        spent: MeanAcc,
        avg_sentiment: MeanAcc,
        n_pos: MeanAcc,
        n_neu: MeanAcc,
        n_neg: MeanAcc,
    }

    let mut accs: BTreeMap<ZoneId, Acc> = BTreeMap::new();
    // BTreeMap iteration visits each zone's days in date order, so the
    // accumulated sums do not depend on how the series was built.
    for (key, v) in series.iter() {
        let acc = accs.entry(key.zone.clone()).or_default();
        if key.date >= main_start && key.date <= main_end {
            acc.activity.push(v.activity_index);
            acc.max_congestion.push(v.max_congestion_pct);
            acc.mean_congestion.push(v.mean_congestion_pct);
            acc.cards.push(v.n_cards);
            acc.tx.push(v.n_transactions);
            acc.spent.push(v.total_spent);
        }
        if key.date >= post_start && key.date <= post_end {
            acc.avg_sentiment.push(v.avg_sentiment);
            acc.n_pos.push(v.n_pos.map(|x| x as f64));
            acc.n_neu.push(v.n_neu.map(|x| x as f64));
            acc.n_neg.push(v.n_neg.map(|x| x as f64));
        }
    }

    ZoneBaselines {
        per_zone: accs
            .into_iter()
            .map(|(zone, a)| {
                (
                    zone,
                    ZoneBaselineMeans {
                        mean_activity: a.activity.mean(),
                        mean_max_congestion: a.max_congestion.mean(),
                        mean_mean_congestion: a.mean_congestion.mean(),
                        mean_cards: a.cards.mean(),
                        mean_tx: a.tx.mean(),
                        mean_spent: a.spent.mean(),
                        mean_avg_sentiment: a.avg_sentiment.mean(),
                        mean_n_pos: a.n_pos.mean(),
                        mean_n_neu: a.n_neu.mean(),
                        mean_n_neg: a.n_neg.mean(),
                    },
                )
            })
            .collect(),
    }
}

/// Percent deviation from baseline: `100 × (baseline − day) / baseline`.
/// Missing or zero baselines and missing day values yield `None`.
pub fn deviation_pct(baseline: Option<f64>, day_value: Option<f64>) -> Option<f64> {
    match (baseline, day_value) {
        (Some(b), Some(d)) if b != 0.0 => Some(100.0 * (b - d) / b),
        _ => None,
    }
}

/// FE1: deviation of the daily activity index.
pub fn fe_activity(baselines: &ZoneBaselineMeans, day_value: Option<f64>) -> Option<f64> {
    deviation_pct(baselines.mean_activity, day_value)
}

/// FE2 and FE3: deviations of the daily max and mean congestion percentages.
pub fn fe_congestion(
    baselines: &ZoneBaselineMeans,
    day_max: Option<f64>,
    day_mean: Option<f64>,
) -> (Option<f64>, Option<f64>) {
    (
        deviation_pct(baselines.mean_max_congestion, day_max),
        deviation_pct(baselines.mean_mean_congestion, day_mean),
    )
}

/// FE4, FE5, FE6: deviations of daily cards, transactions, and total spent.
pub fn fe_transactions(
    baselines: &ZoneBaselineMeans,
    day_cards: Option<f64>,
    day_tx: Option<f64>,
    day_spent: Option<f64>,
) -> (Option<f64>, Option<f64>, Option<f64>) {
    (
        deviation_pct(baselines.mean_cards, day_cards),
        deviation_pct(baselines.mean_tx, day_tx),
        deviation_pct(baselines.mean_spent, day_spent),
    )
}

/// FE7–FE10: deviations of average sentiment and the three polarity counts.
pub fn fe_twitter(
    baselines: &ZoneBaselineMeans,
    day_avg_sent: Option<f64>,
    day_n_pos: Option<f64>,
    day_n_neu: Option<f64>,
    day_n_neg: Option<f64>,
) -> (Option<f64>, Option<f64>, Option<f64>, Option<f64>) {
    (
        deviation_pct(baselines.mean_avg_sentiment, day_avg_sent),
        deviation_pct(baselines.mean_n_pos, day_n_pos),
        deviation_pct(baselines.mean_n_neu, day_n_neu),
        deviation_pct(baselines.mean_n_neg, day_n_neg),
    )
}

/// One zone-day's ten features. `fe[i]` is meaningful only where
/// `present[i]`; absent cells hold 0.0 until imputation.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub key: ZoneDayKey,
    pub fe: [f64; N_FEATURES],
    pub present: [bool; N_FEATURES],
}

impl FeatureRow {
    /// Compute all ten features for one zone-day from its baselines and
    /// raw aggregates.
    pub fn compute(key: ZoneDayKey, baselines: &ZoneBaselineMeans, day: &ZoneDayValues) -> Self {
        let fe1 = fe_activity(baselines, day.activity_index);
        let (fe2, fe3) = fe_congestion(baselines, day.max_congestion_pct, day.mean_congestion_pct);
        let (fe4, fe5, fe6) =
            fe_transactions(baselines, day.n_cards, day.n_transactions, day.total_spent);
        let (fe7, fe8, fe9, fe10) = fe_twitter(
            baselines,
            day.avg_sentiment,
            day.n_pos.map(|x| x as f64),
            day.n_neu.map(|x| x as f64),
            day.n_neg.map(|x| x as f64),
        );
        let cells = [fe1, fe2, fe3, fe4, fe5, fe6, fe7, fe8, fe9, fe10];
        let mut fe = [0.0; N_FEATURES];
        let mut present = [false; N_FEATURES];
        for (i, cell) in cells.iter().enumerate() {
            if let Some(v) = cell {
                fe[i] = *v;
                present[i] = true;
            }
        }
        FeatureRow { key, fe, present }
    }

    /// The feature value at `index`, if present.
    pub fn value(&self, index: usize) -> Option<f64> {
        self.present[index].then(|| self.fe[index])
    }

    pub fn all_present(&self) -> bool {
        self.present.iter().all(|&p| p)
    }
}

/// Feature rows for every given zone on one date. Zones with no series row
/// that day get an all-missing feature row (left to the imputation policy).
pub fn compute_feature_rows(
    series: &ZoneDaySeries,
    baselines: &ZoneBaselines,
    zones: &[ZoneId],
    date: NaiveDate,
) -> Vec<FeatureRow> {
    let empty = ZoneDayValues::default();
    let no_baselines = ZoneBaselineMeans::default();
    zones
        .iter()
        .map(|zone| {
            let key = ZoneDayKey {
                zone: zone.clone(),
                date,
            };
            let day = series.get(&key).unwrap_or(&empty);
            let base = baselines.get(zone).unwrap_or(&no_baselines);
            FeatureRow::compute(key, base, day)
        })
        .collect()
}

/// How to complete missing feature cells when assembling a day's matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
#[derive(Default)]
pub enum ImputePolicy {
    /// Fill with the cross-zone median of the feature on that date (default).
    #[default]
    Median,
    /// Fill with zero (no deviation from baseline).
    Zero,
    /// Drop any zone row with a missing cell.
    DropRows,
}

/// One imputed cell: which zone and feature, and the value written.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputedCell {
    pub zone: ZoneId,
    pub feature: usize,
    pub value: f64,
}

/// A complete (rectangular, no missing cells) per-day feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub date: NaiveDate,
    /// One row per retained zone, in zone order; all cells present.
    pub rows: Vec<FeatureRow>,
    /// Which cells of `rows` were imputed, parallel to `rows`.
    pub imputed: Vec<[bool; N_FEATURES]>,
    /// Every imputation performed, in (zone, feature) order.
    pub imputation_log: Vec<ImputedCell>,
    /// Zones removed under the row-drop policy.
    pub dropped_zones: Vec<ZoneId>,
}

impl FeatureMatrix {
    /// The raw feature values as a dense row-major matrix.
    pub fn dense(&self) -> Vec<[f64; N_FEATURES]> {
        self.rows.iter().map(|r| r.fe).collect()
    }

    pub fn zones(&self) -> Vec<ZoneId> {
        self.rows.iter().map(|r| r.key.zone.clone()).collect()
    }

    /// Write `zone,fe1..fe10,imputed_mask` CSV (mask bit i set = FE(i+1)
    /// was imputed).
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let mut header = String::from("zone");
        for name in FEATURE_NAMES {
            header.push(',');
            header.push_str(&name.to_lowercase());
        }
        header.push_str(",imputed_mask");
        writeln!(w, "{header}")?;
        for (row, mask) in self.rows.iter().zip(&self.imputed) {
            let mut line = row.key.zone.to_string();
            for v in row.fe {
                line.push(',');
                line.push_str(&v.to_string());
            }
            line.push(',');
            for &bit in mask {
                line.push(if bit { '1' } else { '0' });
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn write_csv_path(&self, path: &Path) -> Result<(), FeatureError> {
        let file = std::fs::File::create(path).map_err(|source| FeatureError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.write_csv(file).map_err(|source| FeatureError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    /// Canonical file name for a day's matrix: `features_YYYY-MM-DD.csv`.
    pub fn csv_file_name(date: NaiveDate) -> String {
        format!("features_{}.csv", date.format("%Y-%m-%d"))
    }
}

/// Exact median of a non-empty sorted slice: middle element, or the mean of
/// the two middle elements.
fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Complete one day's feature rows under the given imputation policy.
///
/// Under the median policy, a feature column with no observed value in any
/// zone cannot be imputed and is reported as degenerate.
pub fn assemble_matrix(
    date: NaiveDate,
    rows: Vec<FeatureRow>,
    policy: ImputePolicy,
) -> Result<FeatureMatrix, FeatureError> {
    match policy {
        ImputePolicy::DropRows => {
            let mut kept = Vec::new();
            let mut dropped_zones = Vec::new();
            for row in rows {
                if row.all_present() {
                    kept.push(row);
                } else {
                    dropped_zones.push(row.key.zone.clone());
                }
            }
            let imputed = vec![[false; N_FEATURES]; kept.len()];
            Ok(FeatureMatrix {
                date,
                rows: kept,
                imputed,
                imputation_log: Vec::new(),
                dropped_zones,
            })
        }
        ImputePolicy::Median | ImputePolicy::Zero => {
            let mut fill = [0.0; N_FEATURES];
            if policy == ImputePolicy::Median {
                for j in 0..N_FEATURES {
                    let mut observed: Vec<f64> = rows.iter().filter_map(|r| r.value(j)).collect();
                    if observed.is_empty() {
                        if rows.is_empty() {
                            // No zones at all: nothing to impute, handled below.
                            continue;
                        }
                        return Err(FeatureError::DegenerateColumn {
                            feature: FEATURE_NAMES[j],
                            date,
                        });
                    }
                    observed.sort_by(f64::total_cmp);
                    fill[j] = median_of_sorted(&observed);
                }
            }
            let mut out_rows = Vec::with_capacity(rows.len());
            let mut imputed = Vec::with_capacity(rows.len());
            let mut imputation_log = Vec::new();
            for mut row in rows {
                let mut mask = [false; N_FEATURES];
                for j in 0..N_FEATURES {
                    if !row.present[j] {
                        row.fe[j] = fill[j];
                        row.present[j] = true;
                        mask[j] = true;
                        imputation_log.push(ImputedCell {
                            zone: row.key.zone.clone(),
                            feature: j,
                            value: fill[j],
                        });
                    }
                }
                out_rows.push(row);
                imputed.push(mask);
            }
            Ok(FeatureMatrix {
                date,
                rows: out_rows,
                imputed,
                imputation_log,
                dropped_zones: Vec::new(),
            })
        }
    }
}
