//! Source-specific reductions from raw records to per-zone-day aggregates.
//!
//! Every aggregate is a pure fold whose result is independent of input record
//! order: contributions are grouped under ordered keys and floating-point
//! sums are taken over value lists sorted by total order first. This keeps
//! outputs bit-identical across record shuffles and across serial/parallel
//! upstream parsing.

use super::records::{
    CardTxDailyRecord, PostRecord, RoadObservation, TileActivityRecord, TileZoneMap,
};
use super::{date_of, IngestError};
use crate::calendar::ZoneDayKey;
use crate::sentiment::{classify_polarity, score_text, Lexicon, Polarity};
use chrono::NaiveDate;
use std::collections::{BTreeMap, BTreeSet};

/// Daily congestion summary for one zone: max and mean of the per-5-minute
/// congestion percentages, taken over observed periods only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CongestionDaily {
    pub max_pct: f64,
    pub mean_pct: f64,
}

/// Daily card-transaction totals for one zone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CardTxTotals {
    pub n_cards: u64,
    pub n_transactions: u64,
    pub total_spent: f64,
}

/// Daily social-post summary for one zone: mean compound score and polarity
/// counts. Only present for zone-days with at least one post.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostStats {
    pub avg_sentiment: f64,
    pub n_pos: u64,
    pub n_neu: u64,
    pub n_neg: u64,
}

impl PostStats {
    /// Number of scored posts behind this summary.
    pub fn n_posts(&self) -> u64 {
        self.n_pos + self.n_neu + self.n_neg
    }
}

/// Sum in a fixed order regardless of how the inputs arrived.
fn ordered_sum(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum()
}

/// Mean device activity per zone-day.
///
/// Each tile is first reduced to a daily mean of its intra-day samples; the
/// zone-day value is then the mean over tiles that reported at least once
/// that day. Zone-days with no reporting tiles are absent from the result.
pub fn aggregate_activity(
    records: &[TileActivityRecord],
    map: &TileZoneMap,
) -> Result<BTreeMap<ZoneDayKey, f64>, IngestError> {
    let unmapped: BTreeSet<&str> = records
        .iter()
        .filter(|r| map.zone_of(&r.tile_id).is_none())
        .map(|r| r.tile_id.as_str())
        .collect();
    if !unmapped.is_empty() {
        return Err(IngestError::UnmappedTiles(
            unmapped.into_iter().map(String::from).collect(),
        ));
    }

    let mut per_tile_day: BTreeMap<(&str, NaiveDate), Vec<f64>> = BTreeMap::new();
    for r in records {
        per_tile_day
            .entry((r.tile_id.as_str(), date_of(r.timestamp)))
            .or_default()
            .push(r.activity);
    }

    // Tile-day means, visited in (tile, date) order, feed the zone-day mean.
    let mut per_zone_day: BTreeMap<ZoneDayKey, (f64, u64)> = BTreeMap::new();
    for ((tile_id, date), mut samples) in per_tile_day {
        let tile_mean = ordered_sum(&mut samples) / samples.len() as f64;
        let zone = map.zone_of(tile_id).expect("checked above").clone();
        let slot = per_zone_day
            .entry(ZoneDayKey { zone, date })
            .or_insert((0.0, 0));
        slot.0 += tile_mean;
        slot.1 += 1;
    }

    Ok(per_zone_day
        .into_iter()
        .map(|(k, (sum, n))| (k, sum / n as f64))
        .collect())
}

/// Daily congestion percentages per zone.
///
/// For every zone and 5-minute period with at least one observed segment,
/// the period percentage is `100 × congested / observed`; the daily max and
/// mean are taken over observed periods only. Zone-days with no observed
/// periods are absent from the result.
pub fn aggregate_congestion(
    records: &[RoadObservation],
) -> Result<BTreeMap<ZoneDayKey, CongestionDaily>, IngestError> {
    let mut per_period: BTreeMap<(ZoneDayKey, usize), (u64, u64)> = BTreeMap::new();
    for r in records {
        if r.speed_limit <= 0.0 {
            return Err(IngestError::NonPositiveSpeedLimit {
                segment: r.segment_id.clone(),
                interval: r.interval_start.to_string(),
                speed_limit: r.speed_limit,
            });
        }
        let key = (
            ZoneDayKey {
                zone: r.zone.clone(),
                date: date_of(r.interval_start),
            },
            r.period_index(),
        );
        let slot = per_period.entry(key).or_insert((0, 0));
        if r.is_congested() {
            slot.0 += 1;
        }
        slot.1 += 1;
    }

    let mut out: BTreeMap<ZoneDayKey, (f64, f64, u64)> = BTreeMap::new();
    for ((zone_day, _period), (congested, observed)) in per_period {
        let pct = 100.0 * congested as f64 / observed as f64;
        let slot = out.entry(zone_day).or_insert((0.0, 0.0, 0));
        slot.0 = slot.0.max(pct);
        slot.1 += pct;
        slot.2 += 1;
    }

    Ok(out
        .into_iter()
        .map(|(k, (max_pct, sum, n))| {
            (
                k,
                CongestionDaily {
                    max_pct,
                    mean_pct: sum / n as f64,
                },
            )
        })
        .collect())
}

/// Daily card-transaction totals per zone.
///
/// Inputs normally carry one record per zone-day; duplicates are summed and
/// logged as a warning rather than rejected.
pub fn aggregate_transactions(records: &[CardTxDailyRecord]) -> BTreeMap<ZoneDayKey, CardTxTotals> {
    let mut grouped: BTreeMap<ZoneDayKey, (u64, u64, Vec<f64>)> = BTreeMap::new();
    for r in records {
        let key = ZoneDayKey {
            zone: r.zone.clone(),
            date: r.date,
        };
        let slot = grouped.entry(key.clone()).or_insert((0, 0, Vec::new()));
        if !slot.2.is_empty() {
            log::warn!(
                "duplicate transaction record for zone {} on {}; summing",
                key.zone,
                key.date
            );
        }
        slot.0 += r.n_cards;
        slot.1 += r.n_transactions;
        slot.2.push(r.total_spent);
    }
    grouped
        .into_iter()
        .map(|(k, (n_cards, n_transactions, mut spent))| {
            (
                k,
                CardTxTotals {
                    n_cards,
                    n_transactions,
                    total_spent: ordered_sum(&mut spent),
                },
            )
        })
        .collect()
}

/// Daily post sentiment per zone: mean compound score over the zone-day's
/// posts plus polarity counts. Zone-days with zero posts are absent.
pub fn aggregate_posts(
    records: &[PostRecord],
    lexicon: &Lexicon,
) -> BTreeMap<ZoneDayKey, PostStats> {
    let mut grouped: BTreeMap<ZoneDayKey, (Vec<f64>, u64, u64, u64)> = BTreeMap::new();
    for r in records {
        let score = score_text(&r.text, lexicon);
        let key = ZoneDayKey {
            zone: r.zone.clone(),
            date: date_of(r.timestamp),
        };
        let slot = grouped.entry(key).or_insert((Vec::new(), 0, 0, 0));
        slot.0.push(score.value());
        match classify_polarity(score) {
            Polarity::Positive => slot.1 += 1,
            Polarity::Neutral => slot.2 += 1,
            Polarity::Negative => slot.3 += 1,
        }
    }
    grouped
        .into_iter()
        .map(|(k, (mut compounds, n_pos, n_neu, n_neg))| {
            let n = compounds.len() as f64;
            let avg_sentiment = ordered_sum(&mut compounds) / n;
            (
                k,
                PostStats {
                    avg_sentiment,
                    n_pos,
                    n_neu,
                    n_neg,
                },
            )
        })
        .collect()
}
