//! Parsing and zone-day aggregation of the four raw source categories plus
//! the impact-label inputs.
//!
//! All inputs are UTF-8 CSV with a header row. Parsing either accepts every
//! row or reports a row-addressed error; nothing is silently dropped.
//! Aggregation reduces raw records to one value set per (zone, date); a
//! zone-day with no underlying data is explicitly missing, never zero.

mod aggregate;
mod parse;
mod records;
mod series;

pub use aggregate::{
    aggregate_activity, aggregate_congestion, aggregate_posts, aggregate_transactions,
    CardTxTotals, CongestionDaily, PostStats,
};
pub use parse::{
    parse_claims, parse_inundation, parse_population, parse_posts, parse_road_observations,
    parse_tile_activity, parse_tile_zone_map, parse_transactions,
};
pub use records::{
    CardTxDailyRecord, PostRecord, RoadObservation, TileActivityRecord, TileZoneMap,
};
pub use series::{ZoneDaySeries, ZoneDayValues};

use crate::calendar::ZoneId;
use chrono::NaiveDate;
use std::collections::BTreeMap;

/// Per-zone impact inputs: raw claim counts, populations, inundation percents.
pub type ZoneValueMap = BTreeMap<ZoneId, f64>;
pub type ZoneCountMap = BTreeMap<ZoneId, u64>;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: header mismatch: expected {expected:?}, found {found:?}")]
    Schema {
        path: String,
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("{path}:{line}: column `{column}`: {message}")]
    Row {
        path: String,
        line: u64,
        column: String,
        message: String,
    },
    #[error("activity records reference unmapped tiles: {0:?}")]
    UnmappedTiles(Vec<String>),
    #[error("road observation for segment {segment} at {interval}: speed_limit must be > 0 (got {speed_limit})")]
    NonPositiveSpeedLimit {
        segment: String,
        interval: String,
        speed_limit: f64,
    },
}

impl IngestError {
    /// Line number of a row-level error, when one applies.
    pub fn line(&self) -> Option<u64> {
        match self {
            IngestError::Row { line, .. } => Some(*line),
            _ => None,
        }
    }
}

/// Date on which a timestamp falls (timestamps are already local).
pub(crate) fn date_of(ts: chrono::NaiveDateTime) -> NaiveDate {
    ts.date()
}
