//! Rule-based lexicon sentiment scoring.
//!
//! Produces a normalized compound score in [-1, 1] from a valence lexicon
//! plus a simple negation rule, and maps scores to polarity classes at the
//! +/-0.05 cuts. The rule set is deliberately minimal: token valences, a
//! three-token negation window, and the standard compound normalization
//! `S / sqrt(S^2 + 15)`. No booster, capitalization, or punctuation rules.

use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::BufRead;
use std::path::Path;

/// Normalization constant in the compound score denominator.
pub const COMPOUND_ALPHA: f64 = 15.0;

/// How many preceding tokens a negation token can flip.
pub const NEGATION_WINDOW: usize = 3;

/// Polarity class cut: scores at or above are positive, at or below the
/// negated cut are negative.
pub const POLARITY_CUT: f64 = 0.05;

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed lexicon row (expected token<TAB>valence): {text}")]
    MalformedRow {
        path: String,
        line: usize,
        text: String,
    },
    #[error("{path}:{line}: non-finite valence for token {token}")]
    NonFiniteValence {
        path: String,
        line: usize,
        token: String,
    },
}

/// Token valences plus the set of negation tokens.
///
/// Tokens are stored lowercased; lookups happen on lowercased input tokens.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    valences: HashMap<String, f64>,
    negations: HashSet<String>,
}

impl Lexicon {
    pub fn new(
        valences: impl IntoIterator<Item = (String, f64)>,
        negations: impl IntoIterator<Item = String>,
    ) -> Self {
        Lexicon {
            valences: valences
                .into_iter()
                .map(|(t, v)| (t.to_lowercase(), v))
                .collect(),
            negations: negations.into_iter().map(|t| t.to_lowercase()).collect(),
        }
    }

    /// Load from a `token<TAB>valence` file and a one-token-per-line
    /// negations file. Blank lines and `#` comments are skipped.
    pub fn load(lexicon_path: &Path, negations_path: &Path) -> Result<Self, LexiconError> {
        let mut valences = HashMap::new();
        let file = std::fs::File::open(lexicon_path).map_err(|source| LexiconError::Io {
            path: lexicon_path.display().to_string(),
            source,
        })?;
        for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|source| LexiconError::Io {
                path: lexicon_path.display().to_string(),
                source,
            })?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut parts = trimmed.splitn(2, '\t');
            let (token, valence) = match (parts.next(), parts.next()) {
                (Some(t), Some(v)) if !t.is_empty() => (t, v),
                _ => {
                    return Err(LexiconError::MalformedRow {
                        path: lexicon_path.display().to_string(),
                        line: i + 1,
                        text: line.clone(),
                    })
                }
            };
            let valence: f64 = valence
                .trim()
                .parse()
                .map_err(|_| LexiconError::MalformedRow {
                    path: lexicon_path.display().to_string(),
                    line: i + 1,
                    text: line.clone(),
                })?;
            if !valence.is_finite() {
                return Err(LexiconError::NonFiniteValence {
                    path: lexicon_path.display().to_string(),
                    line: i + 1,
                    token: token.to_string(),
                });
            }
            valences.insert(token.to_lowercase(), valence);
        }

        let mut negations = HashSet::new();
        let file = std::fs::File::open(negations_path).map_err(|source| LexiconError::Io {
            path: negations_path.display().to_string(),
            source,
        })?;
        for line in std::io::BufReader::new(file).lines() {
            let line = line.map_err(|source| LexiconError::Io {
                path: negations_path.display().to_string(),
                source,
            })?;
            let token = line.trim();
            if token.is_empty() || token.starts_with('#') {
                continue;
            }
            negations.insert(token.to_lowercase());
        }
        Ok(Lexicon {
            valences,
            negations,
        })
    }

    pub fn valence(&self, token: &str) -> Option<f64> {
        self.valences.get(token).copied()
    }

    pub fn is_negation(&self, token: &str) -> bool {
        self.negations.contains(token)
    }

    pub fn len(&self) -> usize {
        self.valences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valences.is_empty()
    }
}

/// Normalized compound sentiment score, always in [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CompoundScore(f64);

impl CompoundScore {
    /// Wrap an already-computed compound value, clamped into [-1, 1].
    pub fn from_value(v: f64) -> Self {
        CompoundScore(v.clamp(-1.0, 1.0))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarity {
    Positive,
    Neutral,
    Negative,
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Polarity::Positive => f.write_str("positive"),
            Polarity::Neutral => f.write_str("neutral"),
            Polarity::Negative => f.write_str("negative"),
        }
    }
}

/// Lowercase a text and split it into alphanumeric token runs.
///
/// Everything that is not alphanumeric (whitespace, punctuation, symbols)
/// is a boundary. Nothing is stripped or rewritten beforehand.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_string())
        .collect()
}

/// Score a text against a lexicon.
///
/// The raw sum S adds the valence of every known token, sign-flipped when a
/// negation token occurs within the three preceding tokens. The compound
/// score is `S / sqrt(S^2 + 15)`; empty or all-unknown text scores 0.
pub fn score_text(text: &str, lexicon: &Lexicon) -> CompoundScore {
    let tokens = tokenize(text);
    let mut sum = 0.0f64;
    for (i, token) in tokens.iter().enumerate() {
        let Some(valence) = lexicon.valence(token) else {
            continue;
        };
        let window_start = i.saturating_sub(NEGATION_WINDOW);
        let negated = tokens[window_start..i]
            .iter()
            .any(|t| lexicon.is_negation(t));
        sum += if negated { -valence } else { valence };
    }
    if sum == 0.0 {
        return CompoundScore(0.0);
    }
    CompoundScore(sum / (sum * sum + COMPOUND_ALPHA).sqrt())
}

/// Map a compound score to its polarity class.
///
/// Positive iff score >= 0.05, negative iff score <= -0.05, neutral between.
pub fn classify_polarity(score: CompoundScore) -> Polarity {
    let v = score.value();
    if v >= POLARITY_CUT {
        Polarity::Positive
    } else if v <= -POLARITY_CUT {
        Polarity::Negative
    } else {
        Polarity::Neutral
    }
}
