//! Run configuration, end-to-end orchestration, and the run manifest.
//!
//! A run is described by a [`PipelineConfig`] — a TOML file with
//! `[inputs]`, `[calendar]`, `[run]`, `[forest]`, `[tuning]`, and
//! `[synth]` blocks, every one of them optional except that real-data
//! subcommands need `[inputs]`. Command-line flags are applied on top via
//! [`Overrides`] (flags win over file values). The resolved configuration
//! is hashed into every manifest, so an artifact directory names the exact
//! recipe that produced it; no output embeds a timestamp, which keeps
//! reruns byte-identical.
//!
//! Training restricts each day's feature matrix to the zones that carry
//! the requested impact measure (the intersection of observed and labeled
//! zones); the standalone feature CSVs cover every observed zone.

use crate::analysis::{
    emit_report, run_daily_models, summarize, AnalysisError, ReportBundle, TuningConfig,
};
use crate::calendar::{CalendarError, StudyCalendar, ZoneId};
use crate::features::{
    assemble_matrix, compute_baselines, compute_feature_rows, FeatureError, FeatureMatrix,
    ImputePolicy, ZoneBaselines, N_FEATURES,
};
use crate::forest::{ForestParams, ParamSpace, MODEL_FORMAT_VERSION};
use crate::ingest::{
    aggregate_activity, aggregate_congestion, aggregate_posts, aggregate_transactions,
    parse_claims, parse_inundation, parse_population, parse_posts, parse_road_observations,
    parse_tile_activity, parse_tile_zone_map, parse_transactions, IngestError, ZoneCountMap,
    ZoneDaySeries, ZoneValueMap,
};
use crate::labels::{
    classify_by_percentiles, labels_csv_file_name, labels_to_map, write_labels_csv_path,
    ImpactKind, ImpactLabel, ImpactMeasure, LabelError, LabelScheme,
};
use crate::sentiment::{Lexicon, LexiconError};
use crate::synth::{generate_scenario, ChannelValues, ScenarioConfig, ScenarioFiles, SynthError};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Calendar(#[from] CalendarError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl PipelineError {
    /// Process exit code: 0 success, 2 config error, 3 data error,
    /// 4 degenerate analysis.
    pub fn exit_code(&self) -> i32 {
        use crate::forest::SearchError;
        match self {
            PipelineError::Config(_) | PipelineError::Calendar(_) => 2,
            PipelineError::Synth(SynthError::Config(_)) => 2,
            PipelineError::Label(LabelError::InvalidClassCount(_)) => 2,
            PipelineError::Label(LabelError::DegenerateScheme { .. }) => 4,
            PipelineError::Feature(FeatureError::DegenerateColumn { .. }) => 4,
            PipelineError::Analysis(AnalysisError::NoDates) => 4,
            PipelineError::Analysis(AnalysisError::Search(SearchError::TooFewPerClass {
                ..
            })) => 4,
            _ => 3,
        }
    }

    /// Stable machine-parsable error category, one token.
    pub fn code(&self) -> &'static str {
        match self.exit_code() {
            2 => "config",
            4 => "degenerate",
            _ => "data",
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Paths to the ten raw input files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputPaths {
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
}

impl InputPaths {
    pub fn from_scenario(files: &ScenarioFiles) -> Self {
        InputPaths {
            activity: files.activity.clone(),
            tile_zone_map: files.tile_zone_map.clone(),
            traffic: files.traffic.clone(),
            transactions: files.transactions.clone(),
            posts: files.posts.clone(),
            claims: files.claims.clone(),
            population: files.population.clone(),
            inundation: files.inundation.clone(),
            lexicon: files.lexicon.clone(),
            negations: files.negations.clone(),
        }
    }

    pub fn all(&self) -> [(&'static str, &Path); 10] {
        [
            ("activity", self.activity.as_path()),
            ("tile_zone_map", self.tile_zone_map.as_path()),
            ("traffic", self.traffic.as_path()),
            ("transactions", self.transactions.as_path()),
            ("posts", self.posts.as_path()),
            ("claims", self.claims.as_path()),
            ("population", self.population.as_path()),
            ("inundation", self.inundation.as_path()),
            ("lexicon", self.lexicon.as_path()),
            ("negations", self.negations.as_path()),
        ]
    }
}

/// Study window dates; validated into a [`StudyCalendar`] on resolve.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalendarSettings {
    pub normal_start: NaiveDate,
    pub normal_end: NaiveDate,
    pub twitter_normal_start: NaiveDate,
    pub post_normal_start: NaiveDate,
    pub response_end: NaiveDate,
    pub study_end: NaiveDate,
}

impl CalendarSettings {
    pub fn resolve(&self) -> Result<StudyCalendar, PipelineError> {
        Ok(StudyCalendar::new(
            self.normal_start,
            self.normal_end,
            self.twitter_normal_start,
            self.post_normal_start,
            self.response_end,
            self.study_end,
        )?)
    }
}

/// Which impact measures to analyze.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureChoice {
    Claims,
    Inundation,
    Both,
}

impl MeasureChoice {
    pub fn kinds(self) -> Vec<ImpactKind> {
        match self {
            MeasureChoice::Claims => vec![ImpactKind::Claims],
            MeasureChoice::Inundation => vec![ImpactKind::Inundation],
            MeasureChoice::Both => vec![ImpactKind::Claims, ImpactKind::Inundation],
        }
    }
}

impl std::str::FromStr for MeasureChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "claims" => Ok(MeasureChoice::Claims),
            "inundation" => Ok(MeasureChoice::Inundation),
            "both" => Ok(MeasureChoice::Both),
            other => Err(format!(
                "unknown measure {other:?} (expected claims|inundation|both)"
            )),
        }
    }
}

/// Which class-count schemes to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassChoice {
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "3")]
    Three,
    #[serde(rename = "4")]
    Four,
    #[serde(rename = "all")]
    All,
}

impl ClassChoice {
    pub fn counts(self) -> Vec<u8> {
        match self {
            ClassChoice::Two => vec![2],
            ClassChoice::Three => vec![3],
            ClassChoice::Four => vec![4],
            ClassChoice::All => vec![2, 3, 4],
        }
    }
}

impl std::str::FromStr for ClassChoice {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "2" => Ok(ClassChoice::Two),
            "3" => Ok(ClassChoice::Three),
            "4" => Ok(ClassChoice::Four),
            "all" => Ok(ClassChoice::All),
            other => Err(format!(
                "unknown class choice {other:?} (expected 2|3|4|all)"
            )),
        }
    }
}

impl std::str::FromStr for ImputePolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "median" => Ok(ImputePolicy::Median),
            "zero" => Ok(ImputePolicy::Zero),
            "drop" | "drop-rows" => Ok(ImputePolicy::DropRows),
            other => Err(format!(
                "unknown imputation policy {other:?} (expected median|zero|drop)"
            )),
        }
    }
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_seed() -> u64 {
    42
}
fn default_measure() -> MeasureChoice {
    MeasureChoice::Both
}
fn default_classes() -> ClassChoice {
    ClassChoice::All
}
fn default_persistence_k() -> usize {
    2
}
fn default_k_folds() -> usize {
    3
}
fn default_n_iter() -> usize {
    12
}

/// The `[run]` block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    pub out_dir: PathBuf,
    pub seed: u64,
    pub measure: MeasureChoice,
    pub classes: ClassChoice,
    pub impute: ImputePolicy,
    pub persistence_k: usize,
    pub parallel: bool,
    /// Folds for the untuned cross-validated F1.
    pub k_folds: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            out_dir: default_out_dir(),
            seed: default_seed(),
            measure: default_measure(),
            classes: default_classes(),
            impute: ImputePolicy::default(),
            persistence_k: default_persistence_k(),
            parallel: true,
            k_folds: default_k_folds(),
        }
    }
}

/// The `[forest]` block; absent fields fall back to
/// [`ForestParams::defaults`] for ten features.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestSettings {
    pub n_trees: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: Option<usize>,
    pub m_features: Option<usize>,
    pub bootstrap: Option<bool>,
}

impl ForestSettings {
    pub fn resolve(&self, seed: u64) -> ForestParams {
        let defaults = ForestParams::defaults(N_FEATURES, seed);
        ForestParams {
            n_trees: self.n_trees.unwrap_or(defaults.n_trees),
            max_depth: self.max_depth.or(defaults.max_depth),
            min_samples_leaf: self.min_samples_leaf.unwrap_or(defaults.min_samples_leaf),
            m_features: self.m_features.unwrap_or(defaults.m_features),
            bootstrap: self.bootstrap.unwrap_or(defaults.bootstrap),
            seed,
        }
    }
}

/// The `[tuning]` block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningSettings {
    pub enabled: bool,
    pub n_iter: usize,
    pub k_folds: usize,
}

impl Default for TuningSettings {
    fn default() -> Self {
        TuningSettings {
            enabled: false,
            n_iter: default_n_iter(),
            k_folds: default_k_folds(),
        }
    }
}

impl TuningSettings {
    pub fn resolve(&self) -> Option<TuningConfig> {
        self.enabled.then(|| TuningConfig {
            n_iter: self.n_iter,
            k_folds: self.k_folds,
            space: ParamSpace::defaults(N_FEATURES),
        })
    }
}

/// Named starting points for the `[synth]` block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthPreset {
    Defaults,
    PlantedActivity,
    Null,
    Separable,
}

/// The `[synth]` block: a preset plus optional field overrides. Its
/// presence switches `full` into synthetic mode; the scenario seed is the
/// run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSettings {
    pub preset: SynthPreset,
    pub n_zones: Option<usize>,
    pub tiles_per_zone: Option<usize>,
    pub segments_per_zone: Option<usize>,
    pub traffic_periods_per_day: Option<usize>,
    pub activity_samples_per_day: Option<usize>,
    pub effect_size: Option<ChannelValues>,
    pub noise_sd: Option<ChannelValues>,
    pub zero_inundation_fraction: Option<f64>,
    pub claims_rate: Option<f64>,
}

impl Default for SynthSettings {
    fn default() -> Self {
        SynthSettings {
            preset: SynthPreset::Defaults,
            n_zones: None,
            tiles_per_zone: None,
            segments_per_zone: None,
            traffic_periods_per_day: None,
            activity_samples_per_day: None,
            effect_size: None,
            noise_sd: None,
            zero_inundation_fraction: None,
            claims_rate: None,
        }
    }
}

impl SynthSettings {
    pub fn resolve(&self, calendar: StudyCalendar, seed: u64) -> ScenarioConfig {
        let mut scenario = match self.preset {
            SynthPreset::Defaults => ScenarioConfig::defaults(seed),
            SynthPreset::PlantedActivity => ScenarioConfig::planted_activity(seed),
            SynthPreset::Null => ScenarioConfig::null_scenario(seed),
            SynthPreset::Separable => ScenarioConfig::separable(seed),
        };
        scenario.calendar = calendar;
        if let Some(v) = self.n_zones {
            scenario.n_zones = v;
        }
        if let Some(v) = self.tiles_per_zone {
            scenario.tiles_per_zone = v;
        }
        if let Some(v) = self.segments_per_zone {
            scenario.segments_per_zone = v;
        }
        if let Some(v) = self.traffic_periods_per_day {
            scenario.traffic_periods_per_day = v;
        }
        if let Some(v) = self.activity_samples_per_day {
            scenario.activity_samples_per_day = v;
        }
        if let Some(v) = self.effect_size {
            scenario.effect_size = v;
        }
        if let Some(v) = self.noise_sd {
            scenario.noise_sd = v;
        }
        if let Some(v) = self.zero_inundation_fraction {
            scenario.zero_inundation_fraction = v;
        }
        if let Some(v) = self.claims_rate {
            scenario.claims_rate = v;
        }
        scenario
    }
}

/// One run's full configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub inputs: Option<InputPaths>,
    pub calendar: Option<CalendarSettings>,
    pub run: RunSettings,
    pub forest: ForestSettings,
    pub tuning: TuningSettings,
    pub synth: Option<SynthSettings>,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn calendar(&self) -> Result<StudyCalendar, PipelineError> {
        match &self.calendar {
            Some(settings) => settings.resolve(),
            None => Ok(StudyCalendar::harvey_2017()),
        }
    }

    /// Canonical serialized form (what the manifest hashes).
    pub fn canonical_toml(&self) -> String {
        toml::to_string(self).expect("config serialization cannot fail")
    }
}

/// Command-line values layered over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub measure: Option<MeasureChoice>,
    pub classes: Option<ClassChoice>,
    pub tune: bool,
    pub persistence_k: Option<usize>,
    pub impute: Option<ImputePolicy>,
    pub serial: bool,
}

impl Overrides {
    pub fn apply(&self, config: &mut PipelineConfig) {
        if let Some(seed) = self.seed {
            config.run.seed = seed;
        }
        if let Some(out) = &self.out {
            config.run.out_dir = out.clone();
        }
        if let Some(measure) = self.measure {
            config.run.measure = measure;
        }
        if let Some(classes) = self.classes {
            config.run.classes = classes;
        }
        if self.tune {
            config.tuning.enabled = true;
        }
        if let Some(k) = self.persistence_k {
            config.run.persistence_k = k;
        }
        if let Some(impute) = self.impute {
            config.run.impute = impute;
        }
        if self.serial {
            config.run.parallel = false;
        }
    }
}

// ---------------------------------------------------------------------------
// Loading and analysis
// ---------------------------------------------------------------------------

/// All parsed and aggregated inputs of one run.
#[derive(Debug, Clone)]
pub struct LoadedInputs {
    pub series: ZoneDaySeries,
    pub claims: ZoneCountMap,
    pub population: ZoneCountMap,
    pub inundation: ZoneValueMap,
}

/// Fail fast (as a config error) if any referenced input file is absent.
pub fn check_inputs_exist(paths: &InputPaths) -> Result<(), PipelineError> {
    let missing: Vec<String> = paths
        .all()
        .iter()
        .filter(|(_, p)| !p.exists())
        .map(|(role, p)| format!("{role} ({})", p.display()))
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(PipelineError::Config(format!(
            "missing input files: {}",
            missing.join(", ")
        )))
    }
}

/// Parse and aggregate the full input fileset.
pub fn load_inputs(paths: &InputPaths) -> Result<LoadedInputs, PipelineError> {
    check_inputs_exist(paths)?;
    let activity = parse_tile_activity(&paths.activity)?;
    let map = parse_tile_zone_map(&paths.tile_zone_map)?;
    let roads = parse_road_observations(&paths.traffic)?;
    let transactions = parse_transactions(&paths.transactions)?;
    let posts = parse_posts(&paths.posts)?;
    let lexicon = Lexicon::load(&paths.lexicon, &paths.negations)?;
    let series = ZoneDaySeries::from_parts(
        aggregate_activity(&activity, &map)?,
        aggregate_congestion(&roads)?,
        aggregate_transactions(&transactions),
        aggregate_posts(&posts, &lexicon),
    );
    Ok(LoadedInputs {
        series,
        claims: parse_claims(&paths.claims)?,
        population: parse_population(&paths.population)?,
        inundation: parse_inundation(&paths.inundation)?,
    })
}

/// Build the requested impact measure from the loaded files.
pub fn measure_of(kind: ImpactKind, loaded: &LoadedInputs) -> Result<ImpactMeasure, PipelineError> {
    Ok(match kind {
        ImpactKind::Claims => {
            ImpactMeasure::claims_from_counts(&loaded.claims, &loaded.population)?
        }
        ImpactKind::Inundation => ImpactMeasure::inundation(&loaded.inundation)?,
    })
}

/// Zones that are both observed in the series and carried by the measure.
pub fn labeled_universe(measure: &ImpactMeasure, series: &ZoneDaySeries) -> Vec<ZoneId> {
    let observed = series.zones();
    measure
        .values()
        .keys()
        .filter(|z| observed.contains(*z))
        .cloned()
        .collect()
}

/// One feature matrix per flood day over the given zones.
pub fn flood_matrices(
    series: &ZoneDaySeries,
    baselines: &ZoneBaselines,
    calendar: &StudyCalendar,
    zones: &[ZoneId],
    policy: ImputePolicy,
) -> Result<BTreeMap<NaiveDate, FeatureMatrix>, PipelineError> {
    let mut matrices = BTreeMap::new();
    for date in calendar.flood_days() {
        let rows = compute_feature_rows(series, baselines, zones, date);
        matrices.insert(date, assemble_matrix(date, rows, policy)?);
    }
    Ok(matrices)
}

/// Everything `plan` fixes up front for a run.
#[derive(Debug, Clone)]
pub struct RunPlan {
    pub calendar: StudyCalendar,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub measures: Vec<ImpactKind>,
    pub class_counts: Vec<u8>,
    pub impute: ImputePolicy,
    pub persistence_k: usize,
    pub parallel: bool,
    pub k_folds: usize,
    pub forest: ForestParams,
    pub tuning: Option<TuningConfig>,
}

pub fn plan(config: &PipelineConfig) -> Result<RunPlan, PipelineError> {
    let calendar = config.calendar()?;
    let forest = config.forest.resolve(config.run.seed);
    forest
        .validate(N_FEATURES)
        .map_err(|e| PipelineError::Config(format!("forest settings: {e}")))?;
    if config.run.k_folds < 2 {
        return Err(PipelineError::Config(format!(
            "run.k_folds must be ≥ 2 (got {})",
            config.run.k_folds
        )));
    }
    if config.tuning.enabled && (config.tuning.k_folds < 2 || config.tuning.n_iter == 0) {
        return Err(PipelineError::Config(
            "tuning needs k_folds ≥ 2 and n_iter ≥ 1".to_string(),
        ));
    }
    Ok(RunPlan {
        calendar,
        out_dir: config.run.out_dir.clone(),
        seed: config.run.seed,
        measures: config.run.measure.kinds(),
        class_counts: config.run.classes.counts(),
        impute: config.run.impute,
        persistence_k: config.run.persistence_k,
        parallel: config.run.parallel,
        k_folds: config.run.k_folds,
        forest,
        tuning: config.tuning.resolve(),
    })
}

/// Label vector for one measure/scheme over the labeled universe.
pub fn labels_for(
    loaded: &LoadedInputs,
    kind: ImpactKind,
    n_classes: u8,
) -> Result<Vec<ImpactLabel>, PipelineError> {
    let measure = measure_of(kind, loaded)?;
    let universe = labeled_universe(&measure, &loaded.series);
    if universe.is_empty() {
        return Err(PipelineError::Data(format!(
            "no zones are both observed and labeled for measure {kind}"
        )));
    }
    let scheme = LabelScheme::new(kind, n_classes)?;
    Ok(classify_by_percentiles(
        &measure.restrict_to(&universe),
        &scheme,
    )?)
}

/// Run one (measure, scheme) analysis end to end.
pub fn analyze_measure(
    loaded: &LoadedInputs,
    baselines: &ZoneBaselines,
    plan: &RunPlan,
    kind: ImpactKind,
    n_classes: u8,
) -> Result<ReportBundle, PipelineError> {
    let labels = labels_for(loaded, kind, n_classes)?;
    let universe: Vec<ZoneId> = labels.iter().map(|l| l.zone.clone()).collect();
    let label_map = labels_to_map(&labels);
    let matrices = flood_matrices(
        &loaded.series,
        baselines,
        &plan.calendar,
        &universe,
        plan.impute,
    )?;
    let results = run_daily_models(
        &matrices,
        &label_map,
        n_classes as usize,
        &plan.forest,
        plan.tuning.as_ref(),
        plan.k_folds,
        plan.parallel,
    )?;
    Ok(summarize(
        kind.to_string(),
        n_classes,
        results,
        &plan.calendar,
        plan.persistence_k,
        plan.seed,
    ))
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

/// Checksum stamp of one input file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileStamp {
    pub path: String,
    pub sha256: String,
}

/// Reproducibility record written at the root of every artifact directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub package: String,
    pub version: String,
    pub model_format_version: u32,
    pub subcommand: String,
    pub seed: u64,
    pub config_sha256: String,
    pub inputs: BTreeMap<String, FileStamp>,
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String, PipelineError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Ok(sha256_hex(&bytes))
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Stamp inputs and outputs and write `manifest.json` under `out_dir`.
/// Output paths are recorded relative to `out_dir`.
pub fn write_manifest(
    config: &PipelineConfig,
    subcommand: &str,
    out_dir: &Path,
    input_paths: Option<&InputPaths>,
    outputs: &[PathBuf],
) -> Result<PathBuf, PipelineError> {
    let mut inputs = BTreeMap::new();
    if let Some(paths) = input_paths {
        for (role, path) in paths.all() {
            inputs.insert(
                role.to_string(),
                FileStamp {
                    path: path.display().to_string(),
                    sha256: sha256_file(path)?,
                },
            );
        }
    }
    let mut output_map = BTreeMap::new();
    for path in outputs {
        let rel = path.strip_prefix(out_dir).unwrap_or(path);
        output_map.insert(rel.display().to_string(), sha256_file(path)?);
    }
    let manifest = Manifest {
        package: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        model_format_version: MODEL_FORMAT_VERSION,
        subcommand: subcommand.to_string(),
        seed: config.run.seed,
        config_sha256: sha256_hex(config.canonical_toml().as_bytes()),
        inputs,
        outputs: output_map,
    };
    let path = out_dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serialization");
    std::fs::write(&path, json).map_err(io_err(&path))?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// Subcommand drivers
// ---------------------------------------------------------------------------

/// What a run left on disk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub written: Vec<PathBuf>,
    pub manifest: PathBuf,
}

fn require_inputs(config: &PipelineConfig) -> Result<&InputPaths, PipelineError> {
    config
        .inputs
        .as_ref()
        .ok_or_else(|| PipelineError::Config("this subcommand needs an [inputs] block".to_string()))
}

fn ensure_dir(dir: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))
}

/// `validate`: parse and schema-check every input.
pub fn run_validate(config: &PipelineConfig) -> Result<LoadedInputs, PipelineError> {
    plan(config)?;
    load_inputs(require_inputs(config)?)
}

/// Write per-flood-day feature CSVs (plus the aggregated series) for every
/// observed zone.
fn write_feature_artifacts(
    loaded: &LoadedInputs,
    baselines: &ZoneBaselines,
    plan: &RunPlan,
) -> Result<Vec<PathBuf>, PipelineError> {
    let dir = plan.out_dir.join("features");
    ensure_dir(&dir)?;
    let mut written = Vec::new();
    let series_path = plan.out_dir.join("series.csv");
    loaded.series.write_csv_path(&series_path)?;
    written.push(series_path);
    let zones: Vec<ZoneId> = loaded.series.zones().into_iter().collect();
    for (date, matrix) in flood_matrices(
        &loaded.series,
        baselines,
        &plan.calendar,
        &zones,
        plan.impute,
    )? {
        let path = dir.join(FeatureMatrix::csv_file_name(date));
        matrix.write_csv_path(&path)?;
        written.push(path);
    }
    Ok(written)
}

/// `features`: emit per-day feature CSVs and the manifest.
pub fn run_features(config: &PipelineConfig) -> Result<RunArtifacts, PipelineError> {
    let plan = plan(config)?;
    let inputs = require_inputs(config)?;
    let loaded = load_inputs(inputs)?;
    let baselines = compute_baselines(&loaded.series, &plan.calendar);
    ensure_dir(&plan.out_dir)?;
    let written = write_feature_artifacts(&loaded, &baselines, &plan)?;
    let manifest = write_manifest(config, "features", &plan.out_dir, Some(inputs), &written)?;
    Ok(RunArtifacts {
        out_dir: plan.out_dir,
        written,
        manifest,
    })
}

fn write_label_artifacts(
    loaded: &LoadedInputs,
    plan: &RunPlan,
) -> Result<Vec<PathBuf>, PipelineError> {
    let dir = plan.out_dir.join("labels");
    ensure_dir(&dir)?;
    let mut written = Vec::new();
    for &kind in &plan.measures {
        for &n_classes in &plan.class_counts {
            let labels = labels_for(loaded, kind, n_classes)?;
            let path = dir.join(labels_csv_file_name(kind, n_classes));
            write_labels_csv_path(&labels, &path)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// `labels`: emit every requested label CSV and the manifest.
pub fn run_labels(config: &PipelineConfig) -> Result<RunArtifacts, PipelineError> {
    let plan = plan(config)?;
    let inputs = require_inputs(config)?;
    let loaded = load_inputs(inputs)?;
    ensure_dir(&plan.out_dir)?;
    let written = write_label_artifacts(&loaded, &plan)?;
    let manifest = write_manifest(config, "labels", &plan.out_dir, Some(inputs), &written)?;
    Ok(RunArtifacts {
        out_dir: plan.out_dir,
        written,
        manifest,
    })
}

/// `analyze`: features, labels, daily models, and reports.
pub fn run_analyze(config: &PipelineConfig) -> Result<RunArtifacts, PipelineError> {
    run_analyze_as(config, "analyze")
}

fn run_analyze_as(
    config: &PipelineConfig,
    subcommand: &str,
) -> Result<RunArtifacts, PipelineError> {
    let plan = plan(config)?;
    let inputs = require_inputs(config)?;
    let loaded = load_inputs(inputs)?;
    let baselines = compute_baselines(&loaded.series, &plan.calendar);
    ensure_dir(&plan.out_dir)?;
    let mut written = write_feature_artifacts(&loaded, &baselines, &plan)?;
    written.extend(write_label_artifacts(&loaded, &plan)?);
    for &kind in &plan.measures {
        for &n_classes in &plan.class_counts {
            let bundle = analyze_measure(&loaded, &baselines, &plan, kind, n_classes)?;
            written.extend(emit_report(&plan.out_dir, &bundle)?);
        }
    }
    let manifest = write_manifest(config, subcommand, &plan.out_dir, Some(inputs), &written)?;
    Ok(RunArtifacts {
        out_dir: plan.out_dir,
        written,
        manifest,
    })
}

/// `synth`: generate a scenario fileset under `<out>/data`.
pub fn run_synth(config: &PipelineConfig) -> Result<RunArtifacts, PipelineError> {
    let plan = plan(config)?;
    let settings = config.synth.clone().unwrap_or_default();
    let scenario = settings.resolve(plan.calendar.clone(), plan.seed);
    let data_dir = plan.out_dir.join("data");
    let (files, _) = generate_scenario(&scenario, &data_dir)?;
    let written: Vec<PathBuf> = files.all().iter().map(|p| p.to_path_buf()).collect();
    let manifest = write_manifest(config, "synth", &plan.out_dir, None, &written)?;
    Ok(RunArtifacts {
        out_dir: plan.out_dir,
        written,
        manifest,
    })
}

/// `full`: synthesize (when `[synth]` is present) or take the configured
/// inputs, then analyze.
pub fn run_full(config: &PipelineConfig) -> Result<RunArtifacts, PipelineError> {
    match &config.synth {
        Some(settings) => {
            let plan = plan(config)?;
            let scenario = settings.resolve(plan.calendar.clone(), plan.seed);
            let data_dir = plan.out_dir.join("data");
            let (files, _) = generate_scenario(&scenario, &data_dir)?;
            let mut effective = config.clone();
            effective.inputs = Some(InputPaths::from_scenario(&files));
            let mut artifacts = run_analyze_as(&effective, "full")?;
            let mut generated: Vec<PathBuf> = files.all().iter().map(|p| p.to_path_buf()).collect();
            generated.append(&mut artifacts.written);
            artifacts.written = generated;
            Ok(artifacts)
        }
        None => run_analyze_as(config, "full"),
    }
}
