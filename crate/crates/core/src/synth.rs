//! Synthetic raw-data generator with a planted per-zone severity field.
//!
//! Every zone draws a severity `s ∈ [0, 1]`. On flood days each channel's
//! daily level is `baseline × (1 − effect × s × profile(t)) + noise`, where
//! `profile` ramps linearly through the response stage, peaks at 1, and
//! decays through recovery. Congestion is the one channel that rises with
//! severity (its multiplier is `1 + effect × s × profile`), and sentiment
//! shifts in probability space: severity moves posting odds from positive
//! to negative. Impact files are derived from the same severity —
//! `claims = round(population × κ × s)`, inundation proportional to `s`
//! with a configurable zero fraction — so labels built from them are the
//! ground truth the pipeline should rediscover in the activity channels.
//!
//! Raw files get observation-level texture (per-sample jitter, Bernoulli
//! congestion, multinomial post polarities) on top of the daily-level
//! noise model; zone-day aggregates track the daily levels. Generation is
//! sequential in a fixed order with one RNG stream per output channel, so
//! a fixed seed reproduces every file byte for byte. No claim of realism
//! is made — only of recoverability.

use crate::analysis::derive_seed;
use crate::calendar::{Stage, StudyCalendar, ZoneId};
use crate::labels::percentile_linear;
use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("scenario config error: {0}")]
    Config(String),
    #[error("i/o error writing {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// One value per perturbable channel. `congestion` acts on the congested
/// share of road periods, `sentiment` on the positive→negative posting
/// odds, the rest on their channel's daily level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelValues {
    pub activity: f64,
    pub congestion: f64,
    pub cards: f64,
    pub transactions: f64,
    pub spent: f64,
    pub sentiment: f64,
    pub posts: f64,
}

impl ChannelValues {
    pub const ZERO: ChannelValues = ChannelValues {
        activity: 0.0,
        congestion: 0.0,
        cards: 0.0,
        transactions: 0.0,
        spent: 0.0,
        sentiment: 0.0,
        posts: 0.0,
    };

    fn all(&self) -> [f64; 7] {
        [
            self.activity,
            self.congestion,
            self.cards,
            self.transactions,
            self.spent,
            self.sentiment,
            self.posts,
        ]
    }
}

/// Pre-flood daily levels the perturbations act on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelBaselines {
    /// Mean tile activity index.
    pub activity: f64,
    /// Baseline congested share of observed road periods, in [0, 1].
    pub congestion_share: f64,
    pub cards: f64,
    pub transactions: f64,
    pub spent: f64,
    /// Posts per zone per day.
    pub posts: f64,
    /// Baseline probability that a post is positive / negative.
    pub p_positive: f64,
    pub p_negative: f64,
}

impl Default for ChannelBaselines {
    fn default() -> Self {
        ChannelBaselines {
            activity: 100.0,
            congestion_share: 0.10,
            cards: 500.0,
            transactions: 800.0,
            spent: 40_000.0,
            posts: 20.0,
            p_positive: 0.40,
            p_negative: 0.20,
        }
    }
}

/// How per-zone severity is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SeverityField {
    /// `s ~ U[0, 1)` independently per zone.
    Uniform,
    /// Zone `z` joins cluster `z mod clusters`; severities sit in tight
    /// bands around evenly spaced centers, so percentile label cuts fall
    /// into the empty gaps and classes become cleanly separable.
    Clustered { clusters: usize, half_width: f64 },
}

/// Full recipe for one synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_zones: usize,
    pub tiles_per_zone: usize,
    pub segments_per_zone: usize,
    /// Road observations per segment per day; must divide the day into
    /// whole 5-minute-aligned intervals.
    pub traffic_periods_per_day: usize,
    /// Activity samples per tile per day.
    pub activity_samples_per_day: usize,
    pub calendar: StudyCalendar,
    pub effect_size: ChannelValues,
    pub noise_sd: ChannelValues,
    #[serde(default)]
    pub baselines: ChannelBaselines,
    #[serde(default = "SeverityField::uniform")]
    pub severity_field: SeverityField,
    /// Fraction of zones (lowest-severity first) whose inundation is 0.
    pub zero_inundation_fraction: f64,
    /// κ in `claims = round(population × κ × severity)`.
    pub claims_rate: f64,
    pub seed: u64,
}

impl SeverityField {
    fn uniform() -> Self {
        SeverityField::Uniform
    }
}

impl ScenarioConfig {
    /// Moderate effects on every channel.
    pub fn defaults(seed: u64) -> Self {
        ScenarioConfig {
            n_zones: 142,
            tiles_per_zone: 3,
            segments_per_zone: 2,
            traffic_periods_per_day: 24,
            activity_samples_per_day: 4,
            calendar: StudyCalendar::harvey_2017(),
            effect_size: ChannelValues {
                activity: 0.5,
                congestion: 2.5,
                cards: 0.45,
                transactions: 0.5,
                spent: 0.55,
                sentiment: 0.6,
                posts: 0.4,
            },
            noise_sd: ChannelValues {
                activity: 2.0,
                congestion: 0.02,
                cards: 10.0,
                transactions: 15.0,
                spent: 2_000.0,
                sentiment: 0.05,
                posts: 3.0,
            },
            baselines: ChannelBaselines::default(),
            severity_field: SeverityField::Uniform,
            zero_inundation_fraction: 0.3,
            claims_rate: 0.2,
            seed,
        }
    }

    /// Signal only in the tile-activity channel; everything else is noise.
    pub fn planted_activity(seed: u64) -> Self {
        ScenarioConfig {
            effect_size: ChannelValues {
                activity: 0.8,
                ..ChannelValues::ZERO
            },
            ..Self::defaults(seed)
        }
    }

    /// No signal anywhere.
    pub fn null_scenario(seed: u64) -> Self {
        ScenarioConfig {
            effect_size: ChannelValues::ZERO,
            ..Self::defaults(seed)
        }
    }

    /// Strong effects, low noise, clustered severity: classes are
    /// separable on every flood day.
    pub fn separable(seed: u64) -> Self {
        ScenarioConfig {
            effect_size: ChannelValues {
                activity: 0.85,
                congestion: 4.0,
                cards: 0.8,
                transactions: 0.8,
                spent: 0.85,
                sentiment: 0.9,
                posts: 0.7,
            },
            noise_sd: ChannelValues {
                activity: 0.5,
                congestion: 0.01,
                cards: 2.0,
                transactions: 3.0,
                spent: 500.0,
                sentiment: 0.02,
                posts: 1.0,
            },
            severity_field: SeverityField::Clustered {
                clusters: 3,
                half_width: 0.1,
            },
            ..Self::defaults(seed)
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let err = |msg: String| Err(SynthError::Config(msg));
        if self.n_zones < 4 {
            return err(format!("n_zones must be ≥ 4 (got {})", self.n_zones));
        }
        if self.tiles_per_zone == 0 {
            return err("tiles_per_zone must be ≥ 1".into());
        }
        if self.segments_per_zone == 0 {
            return err("segments_per_zone must be ≥ 1".into());
        }
        if self.activity_samples_per_day == 0 {
            return err("activity_samples_per_day must be ≥ 1".into());
        }
        let p = self.traffic_periods_per_day;
        if p == 0 || 1440 % p != 0 || !(1440 / p).is_multiple_of(5) {
            return err(format!(
                "traffic_periods_per_day must divide the day into whole 5-minute-aligned intervals (got {p})"
            ));
        }
        for (label, v) in [
            ("effect_size", self.effect_size),
            ("noise_sd", self.noise_sd),
        ] {
            if v.all().iter().any(|x| !x.is_finite()) {
                return err(format!("{label} values must be finite"));
            }
        }
        if self.noise_sd.all().iter().any(|&x| x < 0.0) {
            return err("noise_sd values must be ≥ 0".into());
        }
        if !(0.0..=1.0).contains(&self.zero_inundation_fraction) {
            return err(format!(
                "zero_inundation_fraction must be in [0, 1] (got {})",
                self.zero_inundation_fraction
            ));
        }
        if !self.claims_rate.is_finite() || self.claims_rate < 0.0 {
            return err(format!(
                "claims_rate must be a finite value ≥ 0 (got {})",
                self.claims_rate
            ));
        }
        let b = &self.baselines;
        for (label, v) in [
            ("baselines.activity", b.activity),
            ("baselines.cards", b.cards),
            ("baselines.transactions", b.transactions),
            ("baselines.spent", b.spent),
            ("baselines.posts", b.posts),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return err(format!("{label} must be a finite value > 0 (got {v})"));
            }
        }
        if !(0.0..1.0).contains(&b.congestion_share) || b.congestion_share == 0.0 {
            return err(format!(
                "baselines.congestion_share must be in (0, 1) (got {})",
                b.congestion_share
            ));
        }
        if b.p_positive < 0.0 || b.p_negative < 0.0 || b.p_positive + b.p_negative > 1.0 {
            return err(format!(
                "baseline polarity probabilities must be ≥ 0 and sum to ≤ 1 (got {} + {})",
                b.p_positive, b.p_negative
            ));
        }
        if let SeverityField::Clustered {
            clusters,
            half_width,
        } = self.severity_field
        {
            if clusters < 2 {
                return err(format!("severity clusters must be ≥ 2 (got {clusters})"));
            }
            if !(0.0..0.5).contains(&half_width) || half_width == 0.0 {
                return err(format!(
                    "severity cluster half_width must be in (0, 0.5) (got {half_width})"
                ));
            }
        }
        Ok(())
    }
}

/// The planted field and everything derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub severity: BTreeMap<ZoneId, f64>,
    pub population: BTreeMap<ZoneId, u64>,
    pub claims: BTreeMap<ZoneId, u64>,
    pub inundation_pct: BTreeMap<ZoneId, f64>,
}

/// Paths of one generated fileset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioFiles {
    pub activity: PathBuf,
    pub tile_zone_map: PathBuf,
    pub traffic: PathBuf,
    pub transactions: PathBuf,
    pub posts: PathBuf,
    pub claims: PathBuf,
    pub population: PathBuf,
    pub inundation: PathBuf,
    pub lexicon: PathBuf,
    pub negations: PathBuf,
    pub ground_truth: PathBuf,
}

impl ScenarioFiles {
    pub fn in_dir(dir: &Path) -> Self {
        ScenarioFiles {
            activity: dir.join("activity.csv"),
            tile_zone_map: dir.join("tile_zone_map.csv"),
            traffic: dir.join("traffic.csv"),
            transactions: dir.join("transactions.csv"),
            posts: dir.join("posts.csv"),
            claims: dir.join("claims.csv"),
            population: dir.join("population.csv"),
            inundation: dir.join("inundation.csv"),
            lexicon: dir.join("lexicon.tsv"),
            negations: dir.join("negations.txt"),
            ground_truth: dir.join("ground_truth.csv"),
        }
    }

    pub fn all(&self) -> [&Path; 11] {
        [
            &self.activity,
            &self.tile_zone_map,
            &self.traffic,
            &self.transactions,
            &self.posts,
            &self.claims,
            &self.population,
            &self.inundation,
            &self.lexicon,
            &self.negations,
            &self.ground_truth,
        ]
    }
}

/// Disruption intensity for a date: 0 before the flood, a linear ramp to 1
/// across response, then a linear decay through recovery that stays
/// strictly positive on every recovery day.
pub fn stage_profile(calendar: &StudyCalendar, date: NaiveDate) -> f64 {
    let days = |stage| calendar.stage_days(stage);
    match calendar.stage_of(date) {
        Ok(Stage::Response) => {
            let stage = days(Stage::Response);
            let i = stage
                .iter()
                .position(|&d| d == date)
                .expect("date in its own stage");
            (i + 1) as f64 / stage.len() as f64
        }
        Ok(Stage::Recovery) => {
            let stage = days(Stage::Recovery);
            let i = stage
                .iter()
                .position(|&d| d == date)
                .expect("date in its own stage");
            1.0 - (i + 1) as f64 / (stage.len() + 1) as f64
        }
        _ => 0.0,
    }
}

/// Valence magnitude that makes a one-token post score exactly ±0.5 under
/// the compound normalization `s / sqrt(s² + 15)`.
fn template_valence() -> f64 {
    5f64.sqrt()
}

const POSITIVE_TEXTS: [&str; 3] = [
    "good progress today",
    "feeling good again",
    "good news around here",
];
const NEGATIVE_TEXTS: [&str; 3] = [
    "bad flooding here",
    "roads look bad",
    "bad night without power",
];
const NEUTRAL_TEXTS: [&str; 3] = [
    "water level update",
    "street status check",
    "daily report posted",
];

struct Streams {
    field: ChaCha8Rng,
    activity: ChaCha8Rng,
    traffic: ChaCha8Rng,
    transactions: ChaCha8Rng,
    posts: ChaCha8Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let s = |salt| ChaCha8Rng::seed_from_u64(derive_seed(seed, salt));
        Streams {
            field: s(0),
            activity: s(1),
            traffic: s(2),
            transactions: s(3),
            posts: s(4),
        }
    }
}

fn noise(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    if sd <= 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sd).expect("validated sd").sample(rng)
}

fn count_level(level: f64) -> u64 {
    level.max(0.0).round() as u64
}

fn zone_name(index: usize) -> ZoneId {
    ZoneId::new(format!("Z{:03}", index + 1)).expect("non-empty zone name")
}

struct FileWriter {
    path: PathBuf,
    out: BufWriter<std::fs::File>,
}

impl FileWriter {
    fn create(path: &Path) -> Result<Self, SynthError> {
        let file = std::fs::File::create(path).map_err(|source| SynthError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(FileWriter {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        })
    }

    fn line(&mut self, line: std::fmt::Arguments<'_>) -> Result<(), SynthError> {
        self.out
            .write_fmt(line)
            .and_then(|_| self.out.write_all(b"\n"))
            .map_err(|source| SynthError::Io {
                path: self.path.display().to_string(),
                source,
            })
    }

    fn finish(mut self) -> Result<(), SynthError> {
        self.out.flush().map_err(|source| SynthError::Io {
            path: self.path.display().to_string(),
            source,
        })
    }
}

macro_rules! row {
    ($w:expr, $($arg:tt)*) => { $w.line(format_args!($($arg)*)) };
}

/// Generate the whole fileset into `out_dir` and return the paths plus the
/// planted ground truth.
pub fn generate_scenario(
    config: &ScenarioConfig,
    out_dir: &Path,
) -> Result<(ScenarioFiles, GroundTruth), SynthError> {
    config.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|source| SynthError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    let files = ScenarioFiles::in_dir(out_dir);
    let mut streams = Streams::new(config.seed);

    let zones: Vec<ZoneId> = (0..config.n_zones).map(zone_name).collect();
    let truth = draw_ground_truth(config, &zones, &mut streams.field);
    let days = all_days(&config.calendar);
    let profiles: BTreeMap<NaiveDate, f64> = days
        .iter()
        .map(|&d| (d, stage_profile(&config.calendar, d)))
        .collect();

    write_static_files(config, &files, &zones, &truth)?;
    write_activity(
        config,
        &files,
        &zones,
        &days,
        &profiles,
        &truth,
        &mut streams.activity,
    )?;
    write_traffic(
        config,
        &files,
        &zones,
        &days,
        &profiles,
        &truth,
        &mut streams.traffic,
    )?;
    write_transactions(
        config,
        &files,
        &zones,
        &days,
        &profiles,
        &truth,
        &mut streams.transactions,
    )?;
    write_posts(
        config,
        &files,
        &zones,
        &days,
        &profiles,
        &truth,
        &mut streams.posts,
    )?;
    Ok((files, truth))
}

fn all_days(calendar: &StudyCalendar) -> Vec<NaiveDate> {
    let mut days = calendar.stage_days(Stage::Normal);
    days.extend(calendar.flood_days());
    days
}

fn draw_ground_truth(
    config: &ScenarioConfig,
    zones: &[ZoneId],
    rng: &mut ChaCha8Rng,
) -> GroundTruth {
    let mut severity = BTreeMap::new();
    let mut population = BTreeMap::new();
    for (i, zone) in zones.iter().enumerate() {
        let s = match config.severity_field {
            SeverityField::Uniform => rng.random_range(0.0..1.0),
            SeverityField::Clustered {
                clusters,
                half_width,
            } => {
                let c = (i % clusters) as f64;
                let u: f64 = rng.random_range(-half_width..half_width);
                (c + 0.5 + u) / clusters as f64
            }
        };
        severity.insert(zone.clone(), s);
        population.insert(zone.clone(), rng.random_range(5_000u64..50_000));
    }

    let claims: BTreeMap<ZoneId, u64> = zones
        .iter()
        .map(|z| {
            let expected = population[z] as f64 * config.claims_rate * severity[z];
            (z.clone(), expected.round() as u64)
        })
        .collect();

    let mut sorted: Vec<f64> = severity.values().copied().collect();
    sorted.sort_by(f64::total_cmp);
    let zero_threshold = if config.zero_inundation_fraction == 0.0 {
        f64::NEG_INFINITY
    } else {
        percentile_linear(&sorted, config.zero_inundation_fraction * 100.0)
    };
    let inundation_pct: BTreeMap<ZoneId, f64> = zones
        .iter()
        .map(|z| {
            let s = severity[z];
            let pct = if s <= zero_threshold { 0.0 } else { 80.0 * s };
            (z.clone(), pct)
        })
        .collect();

    GroundTruth {
        severity,
        population,
        claims,
        inundation_pct,
    }
}

fn write_static_files(
    config: &ScenarioConfig,
    files: &ScenarioFiles,
    zones: &[ZoneId],
    truth: &GroundTruth,
) -> Result<(), SynthError> {
    let mut map = FileWriter::create(&files.tile_zone_map)?;
    row!(map, "tile_id,zone")?;
    for (zi, zone) in zones.iter().enumerate() {
        for t in 0..config.tiles_per_zone {
            row!(map, "T{:05},{zone}", zi * config.tiles_per_zone + t + 1)?;
        }
    }
    map.finish()?;

    let mut claims = FileWriter::create(&files.claims)?;
    row!(claims, "zone,n_claims")?;
    for zone in zones {
        row!(claims, "{zone},{}", truth.claims[zone])?;
    }
    claims.finish()?;

    let mut population = FileWriter::create(&files.population)?;
    row!(population, "zone,population")?;
    for zone in zones {
        row!(population, "{zone},{}", truth.population[zone])?;
    }
    population.finish()?;

    let mut inundation = FileWriter::create(&files.inundation)?;
    row!(inundation, "zone,inundation_pct")?;
    for zone in zones {
        row!(inundation, "{zone},{}", truth.inundation_pct[zone])?;
    }
    inundation.finish()?;

    let mut truth_file = FileWriter::create(&files.ground_truth)?;
    row!(truth_file, "zone,severity")?;
    for zone in zones {
        row!(truth_file, "{zone},{}", truth.severity[zone])?;
    }
    truth_file.finish()?;

    let v = template_valence();
    let mut lexicon = FileWriter::create(&files.lexicon)?;
    row!(lexicon, "good\t{v}")?;
    row!(lexicon, "bad\t-{v}")?;
    lexicon.finish()?;

    let mut negations = FileWriter::create(&files.negations)?;
    for token in ["not", "never", "without"] {
        row!(negations, "{token}")?;
    }
    negations.finish()
}

fn write_activity(
    config: &ScenarioConfig,
    files: &ScenarioFiles,
    zones: &[ZoneId],
    days: &[NaiveDate],
    profiles: &BTreeMap<NaiveDate, f64>,
    truth: &GroundTruth,
    rng: &mut ChaCha8Rng,
) -> Result<(), SynthError> {
    let mut out = FileWriter::create(&files.activity)?;
    row!(out, "tile_id,timestamp,activity")?;
    let samples = config.activity_samples_per_day;
    let hour_step = 24 / samples.clamp(1, 24);
    for &day in days {
        for (zi, zone) in zones.iter().enumerate() {
            let mult = 1.0 - config.effect_size.activity * truth.severity[zone] * profiles[&day];
            let level =
                (config.baselines.activity * mult + noise(rng, config.noise_sd.activity)).max(0.0);
            for t in 0..config.tiles_per_zone {
                let tile = zi * config.tiles_per_zone + t + 1;
                for s in 0..samples {
                    let hour = (s * hour_step) % 24;
                    let jitter = noise(rng, config.noise_sd.activity * 0.5);
                    let value = (level + jitter).max(0.0);
                    row!(out, "T{tile:05},{day}T{hour:02}:00:00,{:.3}", value)?;
                }
            }
        }
    }
    out.finish()
}

fn write_traffic(
    config: &ScenarioConfig,
    files: &ScenarioFiles,
    zones: &[ZoneId],
    days: &[NaiveDate],
    profiles: &BTreeMap<NaiveDate, f64>,
    truth: &GroundTruth,
    rng: &mut ChaCha8Rng,
) -> Result<(), SynthError> {
    let mut out = FileWriter::create(&files.traffic)?;
    row!(out, "segment_id,zone,interval_start,avg_speed,speed_limit")?;
    let minute_step = 1440 / config.traffic_periods_per_day;
    const SPEED_LIMIT: f64 = 60.0;
    for &day in days {
        for (zi, zone) in zones.iter().enumerate() {
            let mult = 1.0 + config.effect_size.congestion * truth.severity[zone] * profiles[&day];
            let share = (config.baselines.congestion_share * mult
                + noise(rng, config.noise_sd.congestion))
            .clamp(0.005, 0.98);
            for seg in 0..config.segments_per_zone {
                let segment = zi * config.segments_per_zone + seg + 1;
                for p in 0..config.traffic_periods_per_day {
                    let minute_of_day = p * minute_step;
                    let congested = rng.random_range(0.0..1.0) < share;
                    let ratio: f64 = if congested {
                        rng.random_range(0.20..0.45)
                    } else {
                        rng.random_range(0.60..1.00)
                    };
                    row!(
                        out,
                        "S{segment:05},{zone},{day}T{:02}:{:02}:00,{:.1},{SPEED_LIMIT}",
                        minute_of_day / 60,
                        minute_of_day % 60,
                        ratio * SPEED_LIMIT
                    )?;
                }
            }
        }
    }
    out.finish()
}

fn write_transactions(
    config: &ScenarioConfig,
    files: &ScenarioFiles,
    zones: &[ZoneId],
    days: &[NaiveDate],
    profiles: &BTreeMap<NaiveDate, f64>,
    truth: &GroundTruth,
    rng: &mut ChaCha8Rng,
) -> Result<(), SynthError> {
    let mut out = FileWriter::create(&files.transactions)?;
    row!(out, "zone,date,n_cards,n_transactions,total_spent")?;
    for &day in days {
        for zone in zones.iter() {
            let s = truth.severity[zone];
            let phi = profiles[&day];
            let level = |effect: f64, base: f64, sd: f64, rng: &mut ChaCha8Rng| {
                base * (1.0 - effect * s * phi) + noise(rng, sd)
            };
            let cards = count_level(level(
                config.effect_size.cards,
                config.baselines.cards,
                config.noise_sd.cards,
                rng,
            ));
            let txs = count_level(level(
                config.effect_size.transactions,
                config.baselines.transactions,
                config.noise_sd.transactions,
                rng,
            ));
            let spent = (level(
                config.effect_size.spent,
                config.baselines.spent,
                config.noise_sd.spent,
                rng,
            ))
            .max(0.0);
            row!(out, "{zone},{day},{cards},{txs},{:.2}", spent)?;
        }
    }
    out.finish()
}

fn write_posts(
    config: &ScenarioConfig,
    files: &ScenarioFiles,
    zones: &[ZoneId],
    days: &[NaiveDate],
    profiles: &BTreeMap<NaiveDate, f64>,
    truth: &GroundTruth,
    rng: &mut ChaCha8Rng,
) -> Result<(), SynthError> {
    let mut out = FileWriter::create(&files.posts)?;
    row!(out, "post_id,zone,timestamp,text")?;
    let mut post_id: u64 = 0;
    for &day in days {
        for zone in zones.iter() {
            let s = truth.severity[zone];
            let phi = profiles[&day];
            let volume = config.baselines.posts * (1.0 - config.effect_size.posts * s * phi)
                + noise(rng, config.noise_sd.posts);
            let n_posts = count_level(volume);

            // Severity moves posting odds from positive to negative; the
            // neutral share stays put until clamping.
            let shift =
                config.effect_size.sentiment * s * phi + noise(rng, config.noise_sd.sentiment);
            let p_pos = (config.baselines.p_positive - shift / 2.0).clamp(0.0, 1.0);
            let p_neg = (config.baselines.p_negative + shift / 2.0).clamp(0.0, 1.0 - p_pos);

            for _ in 0..n_posts {
                post_id += 1;
                let u: f64 = rng.random_range(0.0..1.0);
                let texts = if u < p_pos {
                    &POSITIVE_TEXTS
                } else if u < p_pos + p_neg {
                    &NEGATIVE_TEXTS
                } else {
                    &NEUTRAL_TEXTS
                };
                let text = texts[rng.random_range(0..texts.len())];
                let time = chrono::NaiveTime::from_hms_opt(
                    rng.random_range(7..23),
                    rng.random_range(0..60),
                    rng.random_range(0..60),
                )
                .expect("valid time");
                row!(out, "P{post_id:08},{zone},{day}T{time},{text}")?;
            }
        }
    }
    out.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::ZoneDayKey;
    use crate::ingest::{
        aggregate_activity, aggregate_congestion, aggregate_posts, aggregate_transactions,
        parse_claims, parse_inundation, parse_population, parse_posts, parse_road_observations,
        parse_tile_activity, parse_tile_zone_map, parse_transactions, ZoneDaySeries,
    };
    use crate::labels::{classify_by_percentiles, ImpactKind, ImpactMeasure, LabelScheme};
    use crate::sentiment::Lexicon;

    fn small_config(seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            n_zones: 8,
            tiles_per_zone: 2,
            segments_per_zone: 1,
            traffic_periods_per_day: 12,
            activity_samples_per_day: 2,
            ..ScenarioConfig::defaults(seed)
        }
    }

    fn parse_all(files: &ScenarioFiles) -> ZoneDaySeries {
        let activity = parse_tile_activity(&files.activity).unwrap();
        let map = parse_tile_zone_map(&files.tile_zone_map).unwrap();
        let roads = parse_road_observations(&files.traffic).unwrap();
        let txs = parse_transactions(&files.transactions).unwrap();
        let posts = parse_posts(&files.posts).unwrap();
        let lexicon = Lexicon::load(&files.lexicon, &files.negations).unwrap();
        ZoneDaySeries::from_parts(
            aggregate_activity(&activity, &map).unwrap(),
            aggregate_congestion(&roads).unwrap(),
            aggregate_transactions(&txs),
            aggregate_posts(&posts, &lexicon),
        )
    }

    #[test]
    fn generated_files_pass_ingest_with_zero_row_errors() {
        let dir = tempfile::tempdir().unwrap();
        let (files, truth) = generate_scenario(&small_config(11), dir.path()).unwrap();
        for path in files.all() {
            assert!(path.exists(), "{} missing", path.display());
        }
        let claims = parse_claims(&files.claims).unwrap();
        let population = parse_population(&files.population).unwrap();
        let inundation = parse_inundation(&files.inundation).unwrap();
        assert_eq!(claims.len(), 8);
        assert_eq!(population.len(), 8);
        assert_eq!(inundation.len(), 8);
        let series = parse_all(&files);
        // 46 study days × 8 zones, every zone-day observed.
        assert_eq!(series.len(), 46 * 8);
        for (_, v) in series.iter() {
            assert!(!v.is_empty());
        }
        assert_eq!(truth.severity.len(), 8);
        assert!(truth.severity.values().all(|s| (0.0..1.0).contains(s)));
    }

    #[test]
    fn fixed_seed_is_byte_identical() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let (files_a, truth_a) = generate_scenario(&small_config(7), dir_a.path()).unwrap();
        let (files_b, truth_b) = generate_scenario(&small_config(7), dir_b.path()).unwrap();
        assert_eq!(truth_a, truth_b);
        for (a, b) in files_a.all().iter().zip(files_b.all()) {
            let bytes_a = std::fs::read(a).unwrap();
            let bytes_b = std::fs::read(b).unwrap();
            assert_eq!(bytes_a, bytes_b, "{} differs", a.display());
        }
        let dir_c = tempfile::tempdir().unwrap();
        let (files_c, _) = generate_scenario(&small_config(8), dir_c.path()).unwrap();
        assert_ne!(
            std::fs::read(&files_a.activity).unwrap(),
            std::fs::read(&files_c.activity).unwrap(),
            "different seeds should differ"
        );
    }

    #[test]
    fn profile_is_zero_before_flood_ramps_and_decays() {
        let cal = StudyCalendar::harvey_2017();
        for d in cal.stage_days(Stage::Normal) {
            assert_eq!(stage_profile(&cal, d), 0.0);
        }
        let response: Vec<f64> = cal
            .stage_days(Stage::Response)
            .iter()
            .map(|&d| stage_profile(&cal, d))
            .collect();
        assert!(
            response.windows(2).all(|w| w[0] < w[1]),
            "response ramps up"
        );
        assert_eq!(*response.last().unwrap(), 1.0);
        let recovery: Vec<f64> = cal
            .stage_days(Stage::Recovery)
            .iter()
            .map(|&d| stage_profile(&cal, d))
            .collect();
        assert!(recovery.windows(2).all(|w| w[0] > w[1]), "recovery decays");
        assert!(recovery.iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn config_contradictions_are_rejected() {
        let mut c = small_config(1);
        c.tiles_per_zone = 0;
        assert!(matches!(c.validate(), Err(SynthError::Config(_))));
        let mut c = small_config(1);
        c.traffic_periods_per_day = 7;
        assert!(matches!(c.validate(), Err(SynthError::Config(_))));
        let mut c = small_config(1);
        c.zero_inundation_fraction = 1.5;
        assert!(matches!(c.validate(), Err(SynthError::Config(_))));
        let mut c = small_config(1);
        c.effect_size.activity = f64::NAN;
        assert!(matches!(c.validate(), Err(SynthError::Config(_))));
        let mut c = small_config(1);
        c.noise_sd.cards = -1.0;
        assert!(matches!(c.validate(), Err(SynthError::Config(_))));
        assert!(small_config(1).validate().is_ok());
    }

    #[test]
    fn zero_inundation_fraction_is_respected() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = small_config(3);
        config.n_zones = 40;
        config.zero_inundation_fraction = 0.3;
        let (_, truth) = generate_scenario(&config, dir.path()).unwrap();
        let zeros = truth.inundation_pct.values().filter(|&&v| v == 0.0).count();
        assert!(
            (10..=14).contains(&zeros),
            "expected ≈30% zeros, got {zeros}/40"
        );
        // Positive inundation is proportional to severity.
        for (zone, &pct) in &truth.inundation_pct {
            if pct > 0.0 {
                assert!((pct - 80.0 * truth.severity[zone]).abs() < 1e-12);
            }
        }

        let dir = tempfile::tempdir().unwrap();
        config.zero_inundation_fraction = 0.0;
        let (_, truth) = generate_scenario(&config, dir.path()).unwrap();
        assert_eq!(
            truth.inundation_pct.values().filter(|&&v| v == 0.0).count(),
            0
        );
    }

    #[test]
    fn claims_follow_population_rate_and_severity() {
        let dir = tempfile::tempdir().unwrap();
        let (_, truth) = generate_scenario(&small_config(5), dir.path()).unwrap();
        for (zone, &claims) in &truth.claims {
            let expected =
                (truth.population[zone] as f64 * 0.2 * truth.severity[zone]).round() as u64;
            assert_eq!(claims, expected);
        }
    }

    /// Label classes built from the generated claims follow severity.
    #[test]
    fn labels_are_weakly_monotone_in_severity() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = ScenarioConfig::defaults(17);
        config.n_zones = 60;
        config.tiles_per_zone = 1;
        config.segments_per_zone = 1;
        config.traffic_periods_per_day = 12;
        let (files, truth) = generate_scenario(&config, dir.path()).unwrap();
        let claims = parse_claims(&files.claims).unwrap();
        let population = parse_population(&files.population).unwrap();
        let measure = ImpactMeasure::claims_from_counts(&claims, &population).unwrap();
        let labels =
            classify_by_percentiles(&measure, &LabelScheme::new(ImpactKind::Claims, 3).unwrap())
                .unwrap();
        let mut mean_severity = [(0.0, 0u32); 3];
        for label in &labels {
            let entry = &mut mean_severity[label.class_index];
            entry.0 += truth.severity[&label.zone];
            entry.1 += 1;
        }
        let means: Vec<f64> = mean_severity
            .iter()
            .map(|(sum, n)| sum / f64::from(*n))
            .collect();
        assert!(
            means[0] < means[1] && means[1] < means[2],
            "class severities {means:?}"
        );
    }

    /// All effects zero → flood-period channel means sit within 3 standard
    /// errors of the baseline-period means.
    #[test]
    fn null_scenario_is_statistically_flat() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = ScenarioConfig::null_scenario(23);
        config.n_zones = 30;
        config.tiles_per_zone = 2;
        config.segments_per_zone = 2;
        config.traffic_periods_per_day = 24;
        let (files, _) = generate_scenario(&config, dir.path()).unwrap();
        let series = parse_all(&files);
        let cal = &config.calendar;
        let flood: Vec<NaiveDate> = cal.flood_days();
        let normal: Vec<NaiveDate> = cal.stage_days(Stage::Normal);

        let channel = |pick: &dyn Fn(&crate::ingest::ZoneDayValues) -> Option<f64>,
                       days: &[NaiveDate]| {
            let mut vals = Vec::new();
            for (ZoneDayKey { date, .. }, v) in series.iter() {
                if days.contains(date) {
                    if let Some(x) = pick(v) {
                        vals.push(x);
                    }
                }
            }
            vals
        };
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let var = |v: &[f64]| {
            let m = mean(v);
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        };

        type Pick<'a> = (
            &'a str,
            &'a dyn Fn(&crate::ingest::ZoneDayValues) -> Option<f64>,
        );
        let picks: [Pick; 5] = [
            ("activity", &|v| v.activity_index),
            ("mean congestion", &|v| v.mean_congestion_pct),
            ("cards", &|v| v.n_cards),
            ("spent", &|v| v.total_spent),
            ("sentiment", &|v| v.avg_sentiment),
        ];
        for (name, pick) in picks {
            let base = channel(pick, &normal);
            let storm = channel(pick, &flood);
            let se = (var(&base) / base.len() as f64 + var(&storm) / storm.len() as f64).sqrt();
            let diff = (mean(&base) - mean(&storm)).abs();
            assert!(
                diff <= 3.0 * se,
                "{name}: |{:.4} − {:.4}| = {diff:.4} > 3×SE ({:.4})",
                mean(&base),
                mean(&storm),
                3.0 * se
            );
        }
    }

    /// With a planted activity-only effect, high-severity zones show much
    /// larger flood-day activity drops than low-severity zones.
    #[test]
    fn planted_activity_signal_is_visible_in_aggregates() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = ScenarioConfig::planted_activity(31);
        config.n_zones = 30;
        config.tiles_per_zone = 2;
        config.segments_per_zone = 1;
        config.traffic_periods_per_day = 12;
        let (files, truth) = generate_scenario(&config, dir.path()).unwrap();
        let series = parse_all(&files);
        // Peak disruption day: last response day.
        let peak = *config.calendar.stage_days(Stage::Response).last().unwrap();
        let base_day = config.calendar.stage_days(Stage::Normal)[5];

        let mut by_severity: Vec<(f64, f64)> = Vec::new();
        for (zone, &s) in &truth.severity {
            let peak_v = series
                .get(&ZoneDayKey {
                    zone: zone.clone(),
                    date: peak,
                })
                .and_then(|v| v.activity_index)
                .unwrap();
            let base_v = series
                .get(&ZoneDayKey {
                    zone: zone.clone(),
                    date: base_day,
                })
                .and_then(|v| v.activity_index)
                .unwrap();
            by_severity.push((s, 100.0 * (base_v - peak_v) / base_v));
        }
        by_severity.sort_by(|a, b| a.0.total_cmp(&b.0));
        let low: Vec<f64> = by_severity[..10].iter().map(|p| p.1).collect();
        let high: Vec<f64> = by_severity[20..].iter().map(|p| p.1).collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(
            mean(&high) > mean(&low) + 20.0,
            "high-severity drop {:.2}% should clearly exceed low-severity drop {:.2}%",
            mean(&high),
            mean(&low)
        );
    }

    #[test]
    fn separable_severity_forms_three_clusters() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = ScenarioConfig::separable(2);
        config.n_zones = 30;
        let (_, truth) = generate_scenario(&config, dir.path()).unwrap();
        let (mut low, mut mid, mut high) = (0, 0, 0);
        for &s in truth.severity.values() {
            if s < 0.3 {
                low += 1;
            } else if s < 0.633 {
                mid += 1;
            } else {
                high += 1;
            }
        }
        assert_eq!((low, mid, high), (10, 10, 10));
    }
}
