//! The merged per-zone-day table all downstream stages read from.
//!
//! `ZoneDaySeries` joins the four per-source aggregates under one ordered
//! key space. Absent values stay `None` — a zone-day with no posts has no
//! sentiment, not a zero one. The table round-trips through a canonical CSV
//! byte-for-byte: values print in shortest-round-trip form and rows follow
//! key order, so re-ingesting an emitted file reproduces the identical
//! series.

use super::aggregate::{CardTxTotals, CongestionDaily, PostStats};
use super::parse::{check_header, csv_error, line_of, RowCx};
use super::IngestError;
use crate::calendar::ZoneDayKey;
use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

pub const SERIES_HEADER: [&str; 12] = [
    "zone",
    "date",
    "activity_index",
    "max_congestion_pct",
    "mean_congestion_pct",
    "n_cards",
    "n_transactions",
    "total_spent",
    "avg_sentiment",
    "n_pos",
    "n_neu",
    "n_neg",
];

/// One zone-day's aggregates across all four sources; `None` marks a source
/// silent for that zone-day.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ZoneDayValues {
    pub activity_index: Option<f64>,
    pub max_congestion_pct: Option<f64>,
    pub mean_congestion_pct: Option<f64>,
    pub n_cards: Option<f64>,
    pub n_transactions: Option<f64>,
    pub total_spent: Option<f64>,
    pub avg_sentiment: Option<f64>,
    pub n_pos: Option<u64>,
    pub n_neu: Option<u64>,
    pub n_neg: Option<u64>,
}

impl ZoneDayValues {
    pub fn is_empty(&self) -> bool {
        *self == ZoneDayValues::default()
    }
}

/// Ordered map from zone-day to its merged aggregates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ZoneDaySeries {
    rows: BTreeMap<ZoneDayKey, ZoneDayValues>,
}

impl ZoneDaySeries {
    pub fn new() -> Self {
        Self::default()
    }

    /// Merge the four per-source aggregates; the key set is the union of the
    /// inputs' key sets.
    pub fn from_parts(
        activity: BTreeMap<ZoneDayKey, f64>,
        congestion: BTreeMap<ZoneDayKey, CongestionDaily>,
        transactions: BTreeMap<ZoneDayKey, CardTxTotals>,
        posts: BTreeMap<ZoneDayKey, PostStats>,
    ) -> Self {
        let mut rows: BTreeMap<ZoneDayKey, ZoneDayValues> = BTreeMap::new();
        for (k, v) in activity {
            rows.entry(k).or_default().activity_index = Some(v);
        }
        for (k, v) in congestion {
            let row = rows.entry(k).or_default();
            row.max_congestion_pct = Some(v.max_pct);
            row.mean_congestion_pct = Some(v.mean_pct);
        }
        for (k, v) in transactions {
            let row = rows.entry(k).or_default();
            row.n_cards = Some(v.n_cards as f64);
            row.n_transactions = Some(v.n_transactions as f64);
            row.total_spent = Some(v.total_spent);
        }
        for (k, v) in posts {
            let row = rows.entry(k).or_default();
            row.avg_sentiment = Some(v.avg_sentiment);
            row.n_pos = Some(v.n_pos);
            row.n_neu = Some(v.n_neu);
            row.n_neg = Some(v.n_neg);
        }
        ZoneDaySeries { rows }
    }

    pub fn insert(&mut self, key: ZoneDayKey, values: ZoneDayValues) {
        self.rows.insert(key, values);
    }

    pub fn get(&self, key: &ZoneDayKey) -> Option<&ZoneDayValues> {
        self.rows.get(key)
    }

    pub fn rows(&self) -> &BTreeMap<ZoneDayKey, ZoneDayValues> {
        &self.rows
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ZoneDayKey, &ZoneDayValues)> {
        self.rows.iter()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Distinct zones present, in order.
    pub fn zones(&self) -> BTreeSet<crate::calendar::ZoneId> {
        self.rows.keys().map(|k| k.zone.clone()).collect()
    }

    /// Write the canonical CSV: header, then rows in key order, missing
    /// values as empty cells, floats in shortest-round-trip form.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), IngestError> {
        let mut w = csv::Writer::from_writer(writer);
        let io_err = |e: csv::Error| IngestError::Io {
            path: "<series csv>".to_string(),
            source: std::io::Error::other(e),
        };
        w.write_record(SERIES_HEADER).map_err(io_err)?;
        for (key, v) in &self.rows {
            w.write_record([
                key.zone.to_string(),
                key.date.format("%Y-%m-%d").to_string(),
                opt_f64(v.activity_index),
                opt_f64(v.max_congestion_pct),
                opt_f64(v.mean_congestion_pct),
                opt_f64(v.n_cards),
                opt_f64(v.n_transactions),
                opt_f64(v.total_spent),
                opt_f64(v.avg_sentiment),
                opt_u64(v.n_pos),
                opt_u64(v.n_neu),
                opt_u64(v.n_neg),
            ])
            .map_err(io_err)?;
        }
        w.flush().map_err(|e| IngestError::Io {
            path: "<series csv>".to_string(),
            source: e,
        })?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: &Path) -> Result<(), IngestError> {
        let file = std::fs::File::create(path).map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.write_csv(file)
    }

    /// Read a canonical CSV back, validating ranges as it goes.
    pub fn read_csv<R: Read>(reader: R, path: &str) -> Result<Self, IngestError> {
        let mut rdr = csv::Reader::from_reader(reader);
        check_header(&mut rdr, path, &SERIES_HEADER)?;
        let mut rows = BTreeMap::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            let cx = RowCx {
                path,
                line: line_of(&rec),
            };
            let zone = cx.zone(cx.field(&rec, 0, "zone")?, "zone")?;
            let date = cx.date(cx.field(&rec, 1, "date")?, "date")?;
            let v = ZoneDayValues {
                activity_index: opt_parse_f64(&cx, &rec, 2)?,
                max_congestion_pct: opt_parse_f64(&cx, &rec, 3)?,
                mean_congestion_pct: opt_parse_f64(&cx, &rec, 4)?,
                n_cards: opt_parse_f64(&cx, &rec, 5)?,
                n_transactions: opt_parse_f64(&cx, &rec, 6)?,
                total_spent: opt_parse_f64(&cx, &rec, 7)?,
                avg_sentiment: opt_parse_f64(&cx, &rec, 8)?,
                n_pos: opt_parse_u64(&cx, &rec, 9)?,
                n_neu: opt_parse_u64(&cx, &rec, 10)?,
                n_neg: opt_parse_u64(&cx, &rec, 11)?,
            };
            for (col, pct) in [(3, v.max_congestion_pct), (4, v.mean_congestion_pct)] {
                if let Some(p) = pct {
                    if !(0.0..=100.0).contains(&p) {
                        return Err(cx.err(SERIES_HEADER[col], format!("out of [0,100]: {p}")));
                    }
                }
            }
            if let Some(s) = v.avg_sentiment {
                if !(-1.0..=1.0).contains(&s) {
                    return Err(cx.err("avg_sentiment", format!("out of [-1,1]: {s}")));
                }
            }
            rows.insert(ZoneDayKey { zone, date }, v);
        }
        Ok(ZoneDaySeries { rows })
    }

    pub fn read_csv_path(path: &Path) -> Result<Self, IngestError> {
        let label = path.display().to_string();
        let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
            path: label.clone(),
            source,
        })?;
        Self::read_csv(file, &label)
    }
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_u64(v: Option<u64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_parse_f64(
    cx: &RowCx<'_>,
    rec: &csv::StringRecord,
    idx: usize,
) -> Result<Option<f64>, IngestError> {
    let raw = cx.field(rec, idx, SERIES_HEADER[idx])?;
    if raw.is_empty() {
        return Ok(None);
    }
    cx.f64(raw, SERIES_HEADER[idx]).map(Some)
}

fn opt_parse_u64(
    cx: &RowCx<'_>,
    rec: &csv::StringRecord,
    idx: usize,
) -> Result<Option<u64>, IngestError> {
    let raw = cx.field(rec, idx, SERIES_HEADER[idx])?;
    if raw.is_empty() {
        return Ok(None);
    }
    cx.u64(raw, SERIES_HEADER[idx]).map(Some)
}
