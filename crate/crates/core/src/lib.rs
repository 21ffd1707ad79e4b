//! Batch pipeline that turns four categories of community-scale activity
//! records into ten baseline-deviation features per zone-day, trains one
//! random-forest classifier per flood-period day against percentile-classified
//! impact labels, and summarizes the temporal importance of each feature.
//!
//! Module map:
//! - [`calendar`]: study windows, stages, zone/day keys
//! - [`ingest`]: CSV parsing and zone-day aggregation of the four sources
//! - [`sentiment`]: rule-based lexicon scoring for post records
//! - [`features`]: baselines and the ten deviation features, matrix assembly
//! - [`labels`]: percentile-based impact labeling schemes
//! - [`forest`]: bagged CART classifier, Gini importance, tuning
//! - [`analysis`]: daily models, rank series, persistence, reports
//! - [`synth`]: synthetic scenario generation with planted ground truth
//! - [`config`]: pipeline configuration and run manifests
//! - [`pipeline`]: end-to-end orchestration shared by the CLI and tests

pub mod analysis;
pub mod calendar;
pub mod features;
pub mod forest;
pub mod ingest;
pub mod labels;
pub mod pipeline;
pub mod sentiment;
pub mod synth;

pub use calendar::{SourceKind, Stage, StudyCalendar, ZoneDayKey, ZoneId};
