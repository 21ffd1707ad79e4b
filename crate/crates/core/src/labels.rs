//! Percentile-based impact labeling.
//!
//! Two impact measures — insurance claims per capita and inundated area
//! percentage — each classified into 2, 3, or 4 classes. Claims schemes cut
//! at percentiles of all values ({50}, {33,66}, {25,50,75}); inundation
//! schemes first send zero-inundation zones to class 0 and split the
//! positive values at {}, {50}, {33,66}. Percentiles use the linear
//! interpolation estimator, and a value lying exactly on a cut goes to the
//! lower class. Both conventions are fixed here so every run and every
//! reimplementation labels identically.

use crate::calendar::ZoneId;
use crate::ingest::{ZoneCountMap, ZoneValueMap};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum LabelError {
    #[error("zone {zone}: population must be > 0 to normalize claims")]
    PopulationZero { zone: ZoneId },
    #[error("class count must be 2, 3, or 4 (got {0})")]
    InvalidClassCount(u8),
    #[error("{kind} values are too uniform for {n_classes} classes ({distinct} distinct values)")]
    DegenerateScheme {
        kind: ImpactKind,
        n_classes: u8,
        distinct: usize,
    },
    #[error("zone {zone}: invalid {kind} value {value}: {reason}")]
    InvalidValue {
        zone: ZoneId,
        kind: ImpactKind,
        value: f64,
        reason: String,
    },
    #[error("i/o error writing {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Which impact quantity a measure holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImpactKind {
    Claims,
    Inundation,
}

impl std::fmt::Display for ImpactKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ImpactKind::Claims => "claims",
            ImpactKind::Inundation => "inundation",
        })
    }
}

/// Per-zone impact values for one measure.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactMeasure {
    pub kind: ImpactKind,
    values: BTreeMap<ZoneId, f64>,
}

impl ImpactMeasure {
    /// Claims per capita over the zones present in both inputs.
    pub fn claims_from_counts(
        claims: &ZoneCountMap,
        population: &ZoneCountMap,
    ) -> Result<Self, LabelError> {
        let mut values = BTreeMap::new();
        for (zone, &n_claims) in claims {
            let Some(&population) = population.get(zone) else {
                continue;
            };
            values.insert(zone.clone(), normalize_claims(n_claims, population, zone)?);
        }
        Ok(ImpactMeasure {
            kind: ImpactKind::Claims,
            values,
        })
    }

    /// Inundated-area percentages, validated to [0, 100].
    pub fn inundation(map: &ZoneValueMap) -> Result<Self, LabelError> {
        for (zone, &value) in map {
            if !value.is_finite() || !(0.0..=100.0).contains(&value) {
                return Err(LabelError::InvalidValue {
                    zone: zone.clone(),
                    kind: ImpactKind::Inundation,
                    value,
                    reason: "must be finite and in [0, 100]".to_string(),
                });
            }
        }
        Ok(ImpactMeasure {
            kind: ImpactKind::Inundation,
            values: map.clone(),
        })
    }

    /// Directly from per-zone values (used by the generators and tests).
    pub fn from_values(kind: ImpactKind, values: BTreeMap<ZoneId, f64>) -> Self {
        ImpactMeasure { kind, values }
    }

    pub fn values(&self) -> &BTreeMap<ZoneId, f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Keep only the given zones (the model's zone universe).
    pub fn restrict_to(&self, zones: &[ZoneId]) -> Self {
        let keep: std::collections::BTreeSet<&ZoneId> = zones.iter().collect();
        ImpactMeasure {
            kind: self.kind,
            values: self
                .values
                .iter()
                .filter(|(z, _)| keep.contains(z))
                .map(|(z, v)| (z.clone(), *v))
                .collect(),
        }
    }
}

/// Claims per capita: `n_claims / population`.
pub fn normalize_claims(n_claims: u64, population: u64, zone: &ZoneId) -> Result<f64, LabelError> {
    if population == 0 {
        return Err(LabelError::PopulationZero { zone: zone.clone() });
    }
    Ok(n_claims as f64 / population as f64)
}

/// A fixed cut recipe: which percentiles, and whether zero values bypass
/// the percentile split into their own class 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelScheme {
    pub kind: ImpactKind,
    pub n_classes: u8,
    pub percentiles: Vec<f64>,
    pub zero_special: bool,
}

impl LabelScheme {
    pub fn new(kind: ImpactKind, n_classes: u8) -> Result<Self, LabelError> {
        let (percentiles, zero_special) = match (kind, n_classes) {
            (ImpactKind::Claims, 2) => (vec![50.0], false),
            (ImpactKind::Claims, 3) => (vec![33.0, 66.0], false),
            (ImpactKind::Claims, 4) => (vec![25.0, 50.0, 75.0], false),
            (ImpactKind::Inundation, 2) => (vec![], true),
            (ImpactKind::Inundation, 3) => (vec![50.0], true),
            (ImpactKind::Inundation, 4) => (vec![33.0, 66.0], true),
            (_, n) => return Err(LabelError::InvalidClassCount(n)),
        };
        Ok(LabelScheme {
            kind,
            n_classes,
            percentiles,
            zero_special,
        })
    }

    /// All six schemes for one measure kind, in class-count order.
    pub fn all_for(kind: ImpactKind) -> Vec<LabelScheme> {
        [2u8, 3, 4]
            .iter()
            .map(|&n| LabelScheme::new(kind, n).expect("valid class counts"))
            .collect()
    }
}

/// One zone's class assignment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImpactLabel {
    pub zone: ZoneId,
    pub class_index: usize,
}

/// Linear-interpolation percentile of a sorted slice: rank `h = p/100·(n−1)`
/// interpolated between the bracketing order statistics.
pub fn percentile_linear(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty slice");
    assert!((0.0..=100.0).contains(&p), "percentile out of range: {p}");
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p / 100.0 * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

fn distinct_count(values: &mut Vec<f64>) -> usize {
    values.sort_by(f64::total_cmp);
    values.dedup();
    values.len()
}

/// Assign every zone a class per the scheme. Cuts come from the measure's
/// own value distribution; a value exactly at a cut takes the lower class.
pub fn classify_by_percentiles(
    measure: &ImpactMeasure,
    scheme: &LabelScheme,
) -> Result<Vec<ImpactLabel>, LabelError> {
    let mut all: Vec<f64> = measure.values.values().copied().collect();
    let distinct = distinct_count(&mut all.clone());
    if distinct < scheme.n_classes as usize {
        return Err(LabelError::DegenerateScheme {
            kind: scheme.kind,
            n_classes: scheme.n_classes,
            distinct,
        });
    }

    let (thresholds, base_class): (Vec<f64>, usize) = if scheme.zero_special {
        let mut positives: Vec<f64> = all.iter().copied().filter(|&v| v > 0.0).collect();
        positives.sort_by(f64::total_cmp);
        let thresholds = if positives.is_empty() {
            Vec::new()
        } else {
            scheme
                .percentiles
                .iter()
                .map(|&p| percentile_linear(&positives, p))
                .collect()
        };
        (thresholds, 1)
    } else {
        all.sort_by(f64::total_cmp);
        (
            scheme
                .percentiles
                .iter()
                .map(|&p| percentile_linear(&all, p))
                .collect(),
            0,
        )
    };

    Ok(measure
        .values
        .iter()
        .map(|(zone, &value)| {
            let class_index = if scheme.zero_special && value == 0.0 {
                0
            } else {
                base_class + thresholds.iter().filter(|&&t| value > t).count()
            };
            ImpactLabel {
                zone: zone.clone(),
                class_index,
            }
        })
        .collect())
}

/// Labels as a zone → class map.
pub fn labels_to_map(labels: &[ImpactLabel]) -> BTreeMap<ZoneId, usize> {
    labels
        .iter()
        .map(|l| (l.zone.clone(), l.class_index))
        .collect()
}

/// Canonical file name: `labels_<kind>_<n>.csv`.
pub fn labels_csv_file_name(kind: ImpactKind, n_classes: u8) -> String {
    format!("labels_{kind}_{n_classes}.csv")
}

/// Write `zone,class_index` rows in zone order.
pub fn write_labels_csv<W: Write>(labels: &[ImpactLabel], mut w: W) -> std::io::Result<()> {
    writeln!(w, "zone,class_index")?;
    for l in labels {
        writeln!(w, "{},{}", l.zone, l.class_index)?;
    }
    Ok(())
}

pub fn write_labels_csv_path(labels: &[ImpactLabel], path: &Path) -> Result<(), LabelError> {
    let file = std::fs::File::create(path).map_err(|source| LabelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    write_labels_csv(labels, file).map_err(|source| LabelError::Io {
        path: path.display().to_string(),
        source,
    })
}
