//! Raw record types for the four source categories, as they appear on disk
//! before any aggregation.

use crate::calendar::ZoneId;
use chrono::{NaiveDate, NaiveDateTime};
use std::collections::BTreeMap;

/// One activity sample for one tile at one time point.
#[derive(Debug, Clone, PartialEq)]
pub struct TileActivityRecord {
    pub tile_id: String,
    pub timestamp: NaiveDateTime,
    /// Normalized activity index, >= 0.
    pub activity: f64,
}

/// Mapping from tile ids to the zone each tile belongs to.
///
/// Must cover every tile id that appears in the activity records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TileZoneMap {
    map: BTreeMap<String, ZoneId>,
}

impl TileZoneMap {
    pub fn new(map: BTreeMap<String, ZoneId>) -> Self {
        TileZoneMap { map }
    }

    pub fn zone_of(&self, tile_id: &str) -> Option<&ZoneId> {
        self.map.get(tile_id)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &ZoneId)> {
        self.map.iter()
    }
}

/// Average speed of one road segment over one 5-minute interval.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadObservation {
    pub segment_id: String,
    pub zone: ZoneId,
    /// Start of the interval; minute must sit on the 5-minute grid.
    pub interval_start: NaiveDateTime,
    pub avg_speed: f64,
    pub speed_limit: f64,
}

impl RoadObservation {
    /// Index of the 5-minute period within its day, in 0..288.
    pub fn period_index(&self) -> usize {
        let t = self.interval_start.time();
        (chrono::Timelike::hour(&t) as usize) * 12 + (chrono::Timelike::minute(&t) as usize) / 5
    }

    /// A segment is congested when its speed falls strictly below half the
    /// speed limit.
    pub fn is_congested(&self) -> bool {
        self.avg_speed / self.speed_limit < 0.5
    }
}

/// Daily card-transaction aggregate for one zone, as delivered upstream.
#[derive(Debug, Clone, PartialEq)]
pub struct CardTxDailyRecord {
    pub zone: ZoneId,
    pub date: NaiveDate,
    pub n_cards: u64,
    pub n_transactions: u64,
    pub total_spent: f64,
}

/// One geolocated social post, zone-resolved upstream.
#[derive(Debug, Clone, PartialEq)]
pub struct PostRecord {
    pub post_id: String,
    pub zone: ZoneId,
    pub timestamp: NaiveDateTime,
    pub text: String,
}
