//! CSV parsers for every input schema.
//!
//! Each parser checks the header against the expected schema, then converts
//! rows one by one. The first malformed row aborts the parse with an error
//! carrying the file, line number, and offending column, so a bad input is
//! rejected rather than partially loaded.

use super::records::*;
use super::{IngestError, ZoneCountMap, ZoneValueMap};
use crate::calendar::ZoneId;
use chrono::{NaiveDate, NaiveDateTime, Timelike};
use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

pub const ACTIVITY_HEADER: [&str; 3] = ["tile_id", "timestamp", "activity"];
pub const TILE_ZONE_MAP_HEADER: [&str; 2] = ["tile_id", "zone"];
pub const TRAFFIC_HEADER: [&str; 5] = [
    "segment_id",
    "zone",
    "interval_start",
    "avg_speed",
    "speed_limit",
];
pub const TRANSACTIONS_HEADER: [&str; 5] =
    ["zone", "date", "n_cards", "n_transactions", "total_spent"];
pub const POSTS_HEADER: [&str; 4] = ["post_id", "zone", "timestamp", "text"];
pub const CLAIMS_HEADER: [&str; 2] = ["zone", "n_claims"];
pub const POPULATION_HEADER: [&str; 2] = ["zone", "population"];
pub const INUNDATION_HEADER: [&str; 2] = ["zone", "inundation_pct"];

pub(super) struct RowCx<'a> {
    pub(super) path: &'a str,
    pub(super) line: u64,
}

impl<'a> RowCx<'a> {
    pub(super) fn err(&self, column: &str, message: impl Into<String>) -> IngestError {
        IngestError::Row {
            path: self.path.to_string(),
            line: self.line,
            column: column.to_string(),
            message: message.into(),
        }
    }

    pub(super) fn field<'r>(
        &self,
        rec: &'r csv::StringRecord,
        idx: usize,
        column: &str,
    ) -> Result<&'r str, IngestError> {
        rec.get(idx)
            .ok_or_else(|| self.err(column, "missing field"))
    }

    pub(super) fn non_empty(&self, value: &str, column: &str) -> Result<String, IngestError> {
        if value.is_empty() {
            return Err(self.err(column, "must be non-empty"));
        }
        Ok(value.to_string())
    }

    pub(super) fn zone(&self, value: &str, column: &str) -> Result<ZoneId, IngestError> {
        ZoneId::new(value).map_err(|e| self.err(column, e.to_string()))
    }

    pub(super) fn f64(&self, value: &str, column: &str) -> Result<f64, IngestError> {
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| self.err(column, format!("not a number: {value:?}")))?;
        if !v.is_finite() {
            return Err(self.err(column, format!("not finite: {value:?}")));
        }
        Ok(v)
    }

    pub(super) fn u64(&self, value: &str, column: &str) -> Result<u64, IngestError> {
        value
            .trim()
            .parse()
            .map_err(|_| self.err(column, format!("not a non-negative integer: {value:?}")))
    }

    pub(super) fn date(&self, value: &str, column: &str) -> Result<NaiveDate, IngestError> {
        NaiveDate::parse_from_str(value.trim(), "%Y-%m-%d")
            .map_err(|_| self.err(column, format!("not a YYYY-MM-DD date: {value:?}")))
    }

    pub(super) fn datetime(&self, value: &str, column: &str) -> Result<NaiveDateTime, IngestError> {
        parse_timestamp(value.trim())
            .ok_or_else(|| self.err(column, format!("not an ISO-8601 timestamp: {value:?}")))
    }
}

/// ISO-8601 timestamp, with or without a trailing offset. Offsets are
/// dropped: all timestamps are treated as already local to the study area.
fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    if let Ok(dt) = NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S") {
        return Some(dt);
    }
    if let Ok(dt) = NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S") {
        return Some(dt);
    }
    if let Ok(dt) = chrono::DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_local());
    }
    None
}

fn open_reader(path: &Path) -> Result<(csv::Reader<std::fs::File>, String), IngestError> {
    let label = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: label.clone(),
        source,
    })?;
    Ok((csv::Reader::from_reader(file), label))
}

pub(super) fn check_header<R: Read>(
    rdr: &mut csv::Reader<R>,
    path: &str,
    expected: &[&str],
) -> Result<(), IngestError> {
    let found = rdr.headers().map_err(|e| csv_error(path, e))?;
    let found: Vec<String> = found.iter().map(|s| s.trim().to_string()).collect();
    if found != expected {
        return Err(IngestError::Schema {
            path: path.to_string(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found,
        });
    }
    Ok(())
}

pub(super) fn csv_error(path: &str, e: csv::Error) -> IngestError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    IngestError::Row {
        path: path.to_string(),
        line,
        column: "<row>".to_string(),
        message: e.to_string(),
    }
}

pub(super) fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

macro_rules! parse_pair {
    ($name:ident, $reader_name:ident, $out:ty) => {
        pub fn $name(path: &Path) -> Result<$out, IngestError> {
            let (rdr, label) = open_reader(path)?;
            $reader_name(rdr, &label)
        }
    };
}

parse_pair!(
    parse_tile_activity,
    tile_activity_from,
    Vec<TileActivityRecord>
);
parse_pair!(parse_tile_zone_map, tile_zone_map_from, TileZoneMap);
parse_pair!(
    parse_road_observations,
    road_observations_from,
    Vec<RoadObservation>
);
parse_pair!(
    parse_transactions,
    transactions_from,
    Vec<CardTxDailyRecord>
);
parse_pair!(parse_posts, posts_from, Vec<PostRecord>);
parse_pair!(parse_claims, claims_from, ZoneCountMap);
parse_pair!(parse_population, population_from, ZoneCountMap);
parse_pair!(parse_inundation, inundation_from, ZoneValueMap);

pub fn tile_activity_from<R: Read>(
    mut rdr: csv::Reader<R>,
    path: &str,
) -> Result<Vec<TileActivityRecord>, IngestError> {
    check_header(&mut rdr, path, &ACTIVITY_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let cx = RowCx {
            path,
            line: line_of(&rec),
        };
        let tile_id = cx.non_empty(cx.field(&rec, 0, "tile_id")?, "tile_id")?;
        let timestamp = cx.datetime(cx.field(&rec, 1, "timestamp")?, "timestamp")?;
        let activity = cx.f64(cx.field(&rec, 2, "activity")?, "activity")?;
        if activity < 0.0 {
            return Err(cx.err("activity", format!("must be >= 0 (got {activity})")));
        }
        out.push(TileActivityRecord {
            tile_id,
            timestamp,
            activity,
        });
    }
    Ok(out)
}

pub fn tile_zone_map_from<R: Read>(
    mut rdr: csv::Reader<R>,
    path: &str,
) -> Result<TileZoneMap, IngestError> {
    check_header(&mut rdr, path, &TILE_ZONE_MAP_HEADER)?;
    let mut map = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let cx = RowCx {
            path,
            line: line_of(&rec),
        };
        let tile_id = cx.non_empty(cx.field(&rec, 0, "tile_id")?, "tile_id")?;
        let zone = cx.zone(cx.field(&rec, 1, "zone")?, "zone")?;
        map.insert(tile_id, zone);
    }
    Ok(TileZoneMap::new(map))
}

pub fn road_observations_from<R: Read>(
    mut rdr: csv::Reader<R>,
    path: &str,
) -> Result<Vec<RoadObservation>, IngestError> {
    check_header(&mut rdr, path, &TRAFFIC_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let cx = RowCx {
            path,
            line: line_of(&rec),
        };
        let segment_id = cx.non_empty(cx.field(&rec, 0, "segment_id")?, "segment_id")?;
        let zone = cx.zone(cx.field(&rec, 1, "zone")?, "zone")?;
        let interval_start = cx.datetime(cx.field(&rec, 2, "interval_start")?, "interval_start")?;
        if interval_start.minute() % 5 != 0 || interval_start.second() != 0 {
            return Err(cx.err(
                "interval_start",
                format!("not on the 5-minute grid: {interval_start}"),
            ));
        }
        let avg_speed = cx.f64(cx.field(&rec, 3, "avg_speed")?, "avg_speed")?;
        if avg_speed < 0.0 {
            return Err(cx.err("avg_speed", format!("must be >= 0 (got {avg_speed})")));
        }
        let speed_limit = cx.f64(cx.field(&rec, 4, "speed_limit")?, "speed_limit")?;
        if speed_limit <= 0.0 {
            return Err(cx.err("speed_limit", format!("must be > 0 (got {speed_limit})")));
        }
        out.push(RoadObservation {
            segment_id,
            zone,
            interval_start,
            avg_speed,
            speed_limit,
        });
    }
    Ok(out)
}

pub fn transactions_from<R: Read>(
    mut rdr: csv::Reader<R>,
    path: &str,
) -> Result<Vec<CardTxDailyRecord>, IngestError> {
    check_header(&mut rdr, path, &TRANSACTIONS_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let cx = RowCx {
            path,
            line: line_of(&rec),
        };
        let zone = cx.zone(cx.field(&rec, 0, "zone")?, "zone")?;
        let date = cx.date(cx.field(&rec, 1, "date")?, "date")?;
        let n_cards = cx.u64(cx.field(&rec, 2, "n_cards")?, "n_cards")?;
        let n_transactions = cx.u64(cx.field(&rec, 3, "n_transactions")?, "n_transactions")?;
        let total_spent = cx.f64(cx.field(&rec, 4, "total_spent")?, "total_spent")?;
        if total_spent < 0.0 {
            return Err(cx.err("total_spent", format!("must be >= 0 (got {total_spent})")));
        }
        out.push(CardTxDailyRecord {
            zone,
            date,
            n_cards,
            n_transactions,
            total_spent,
        });
    }
    Ok(out)
}

pub fn posts_from<R: Read>(
    mut rdr: csv::Reader<R>,
    path: &str,
) -> Result<Vec<PostRecord>, IngestError> {
    check_header(&mut rdr, path, &POSTS_HEADER)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let cx = RowCx {
            path,
            line: line_of(&rec),
        };
        let post_id = cx.non_empty(cx.field(&rec, 0, "post_id")?, "post_id")?;
        let zone = cx.zone(cx.field(&rec, 1, "zone")?, "zone")?;
        let timestamp = cx.datetime(cx.field(&rec, 2, "timestamp")?, "timestamp")?;
        let text = cx.field(&rec, 3, "text")?.to_string();
        out.push(PostRecord {
            post_id,
            zone,
            timestamp,
            text,
        });
    }
    Ok(out)
}

fn zone_count_from<R: Read>(
    mut rdr: csv::Reader<R>,
    path: &str,
    header: &[&str],
) -> Result<ZoneCountMap, IngestError> {
    check_header(&mut rdr, path, header)?;
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let cx = RowCx {
            path,
            line: line_of(&rec),
        };
        let zone = cx.zone(cx.field(&rec, 0, "zone")?, "zone")?;
        let value = cx.u64(cx.field(&rec, 1, header[1])?, header[1])?;
        if out.insert(zone.clone(), value).is_some() {
            return Err(cx.err("zone", format!("duplicate zone {zone}")));
        }
    }
    Ok(out)
}

pub fn claims_from<R: Read>(rdr: csv::Reader<R>, path: &str) -> Result<ZoneCountMap, IngestError> {
    zone_count_from(rdr, path, &CLAIMS_HEADER)
}

pub fn population_from<R: Read>(
    rdr: csv::Reader<R>,
    path: &str,
) -> Result<ZoneCountMap, IngestError> {
    zone_count_from(rdr, path, &POPULATION_HEADER)
}

pub fn inundation_from<R: Read>(
    mut rdr: csv::Reader<R>,
    path: &str,
) -> Result<ZoneValueMap, IngestError> {
    check_header(&mut rdr, path, &INUNDATION_HEADER)?;
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let cx = RowCx {
            path,
            line: line_of(&rec),
        };
        let zone = cx.zone(cx.field(&rec, 0, "zone")?, "zone")?;
        let pct = cx.f64(cx.field(&rec, 1, "inundation_pct")?, "inundation_pct")?;
        if !(0.0..=100.0).contains(&pct) {
            return Err(cx.err("inundation_pct", format!("must be in [0, 100] (got {pct})")));
        }
        if out.insert(zone.clone(), pct).is_some() {
            return Err(cx.err("zone", format!("duplicate zone {zone}")));
        }
    }
    Ok(out)
}
