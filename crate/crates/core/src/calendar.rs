//! Study calendar, event stages, and the zone/day indexing types shared by
//! every pipeline stage.
//!
//! The calendar splits the study range into a normal (baseline) period, a
//! response stage, and a recovery stage. All dates are timezone-free calendar
//! days; sub-daily timestamps are bucketed to days during ingestion.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Opaque spatial unit identifier (a ZIP code string in the reference study).
///
/// Compares by exact string equality; must be non-empty.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ZoneId(String);

impl ZoneId {
    pub fn new(id: impl Into<String>) -> Result<Self, CalendarError> {
        let id = id.into();
        if id.is_empty() {
            return Err(CalendarError::EmptyZoneId);
        }
        Ok(ZoneId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ZoneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Phase of the study a date belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    Normal,
    Response,
    Recovery,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::Normal => f.write_str("normal"),
            Stage::Response => f.write_str("response"),
            Stage::Recovery => f.write_str("recovery"),
        }
    }
}

/// The four raw data categories the pipeline ingests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Activity,
    Traffic,
    Transactions,
    Posts,
}

/// (zone, date) index into any per-day series.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ZoneDayKey {
    pub zone: ZoneId,
    pub date: NaiveDate,
}

impl ZoneDayKey {
    pub fn new(zone: ZoneId, date: NaiveDate) -> Self {
        ZoneDayKey { zone, date }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CalendarError {
    #[error("zone id must be non-empty")]
    EmptyZoneId,
    #[error("calendar dates out of order: {0}")]
    InvalidOrdering(String),
    #[error("date {date} outside study range [{start}, {end}]")]
    OutOfRange {
        date: NaiveDate,
        start: NaiveDate,
        end: NaiveDate,
    },
}

/// Date windows of one study: baseline period, flood period, and the
/// response/recovery split inside the flood period.
///
/// Invariants enforced at construction:
/// `normal_start <= normal_end < post_normal_start <= response_end < study_end`
/// and `twitter_normal_start` inside the normal period. The post-aggregation
/// baseline for social posts starts at `twitter_normal_start` because that
/// source covers a shorter span than the other three.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyCalendar {
    pub normal_start: NaiveDate,
    pub normal_end: NaiveDate,
    pub twitter_normal_start: NaiveDate,
    /// First day of the flood period.
    pub post_normal_start: NaiveDate,
    /// Last day of the response stage (inclusive).
    pub response_end: NaiveDate,
    /// Last day of the study (inclusive).
    pub study_end: NaiveDate,
}

impl StudyCalendar {
    pub fn new(
        normal_start: NaiveDate,
        normal_end: NaiveDate,
        twitter_normal_start: NaiveDate,
        post_normal_start: NaiveDate,
        response_end: NaiveDate,
        study_end: NaiveDate,
    ) -> Result<Self, CalendarError> {
        if !(normal_start <= normal_end) {
            return Err(CalendarError::InvalidOrdering(format!(
                "normal_start {normal_start} > normal_end {normal_end}"
            )));
        }
        if !(normal_end < post_normal_start) {
            return Err(CalendarError::InvalidOrdering(format!(
                "normal_end {normal_end} >= post_normal_start {post_normal_start}"
            )));
        }
        if !(post_normal_start <= response_end) {
            return Err(CalendarError::InvalidOrdering(format!(
                "post_normal_start {post_normal_start} > response_end {response_end}"
            )));
        }
        if !(response_end < study_end) {
            return Err(CalendarError::InvalidOrdering(format!(
                "response_end {response_end} >= study_end {study_end}"
            )));
        }
        if twitter_normal_start < normal_start || twitter_normal_start > normal_end {
            return Err(CalendarError::InvalidOrdering(format!(
                "twitter_normal_start {twitter_normal_start} outside [{normal_start}, {normal_end}]"
            )));
        }
        Ok(StudyCalendar {
            normal_start,
            normal_end,
            twitter_normal_start,
            post_normal_start,
            response_end,
            study_end,
        })
    }

    /// The 2017 Hurricane Harvey study windows used as documented defaults.
    pub fn harvey_2017() -> Self {
        StudyCalendar::new(
            NaiveDate::from_ymd_opt(2017, 8, 1).unwrap(),
            NaiveDate::from_ymd_opt(2017, 8, 24).unwrap(),
            NaiveDate::from_ymd_opt(2017, 8, 22).unwrap(),
            NaiveDate::from_ymd_opt(2017, 8, 25).unwrap(),
            NaiveDate::from_ymd_opt(2017, 9, 2).unwrap(),
            NaiveDate::from_ymd_opt(2017, 9, 15).unwrap(),
        )
        .expect("harvey calendar is valid")
    }

    /// Map a study date to its stage.
    pub fn stage_of(&self, date: NaiveDate) -> Result<Stage, CalendarError> {
        if date < self.normal_start || date > self.study_end {
            return Err(CalendarError::OutOfRange {
                date,
                start: self.normal_start,
                end: self.study_end,
            });
        }
        if date <= self.normal_end {
            Ok(Stage::Normal)
        } else if date >= self.post_normal_start && date <= self.response_end {
            Ok(Stage::Response)
        } else {
            Ok(Stage::Recovery)
        }
    }

    /// Inclusive baseline window for one source category.
    ///
    /// Posts use the shorter dedicated window; the other three sources share
    /// the full normal period.
    pub fn baseline_window(&self, source: SourceKind) -> (NaiveDate, NaiveDate) {
        match source {
            SourceKind::Posts => (self.twitter_normal_start, self.normal_end),
            _ => (self.normal_start, self.normal_end),
        }
    }

    /// All dates of the flood period (response + recovery), ascending.
    pub fn flood_days(&self) -> Vec<NaiveDate> {
        date_range(self.post_normal_start, self.study_end)
    }

    /// All dates of the response stage, ascending.
    pub fn response_days(&self) -> Vec<NaiveDate> {
        date_range(self.post_normal_start, self.response_end)
    }

    /// All dates of the recovery stage, ascending.
    pub fn recovery_days(&self) -> Vec<NaiveDate> {
        date_range(self.response_end.succ_opt().unwrap(), self.study_end)
    }

    /// Dates of one stage, ascending.
    pub fn stage_days(&self, stage: Stage) -> Vec<NaiveDate> {
        match stage {
            Stage::Normal => date_range(self.normal_start, self.normal_end),
            Stage::Response => self.response_days(),
            Stage::Recovery => self.recovery_days(),
        }
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        date >= self.normal_start && date <= self.study_end
    }
}

/// Inclusive ascending list of dates.
pub fn date_range(start: NaiveDate, end: NaiveDate) -> Vec<NaiveDate> {
    let mut out = Vec::new();
    let mut d = start;
    while d <= end {
        out.push(d);
        d = d.succ_opt().unwrap();
    }
    out
}
