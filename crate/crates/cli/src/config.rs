//! Config files.
//!
//! A config is a TOML document whose top-level keys are the fields of
//! [`ExperimentConfig`] (`[array]`, `[grid]` and `[scenario]` are tables).
//! Every key is optional; absent keys take their defaults. An optional
//! `[sweep]` table turns the file into a [`SweepSpec`] whose base is the
//! rest of the document:
//!
//! ```toml
//! drops = 10
//! seed = 7
//!
//! [sweep]
//! axis = "snr_db"              # snr_db | n_antennas | speed | predictor | history_len
//! values = [0, 10, 20]
//! predictors = ["pad", "none"] # defaults to the base `predictor`
//! stationary = true            # add a perfect-CSI reference row per point
//! ```
//!
//! Unknown keys are rejected with the closest known key as a suggestion.

use std::fmt;
use std::ops::Range;
use std::path::Path;

use mobipred::eval::ArrayConfig;
use mobipred::{ExperimentConfig, Predictor};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("line {line}: unknown key `{key}`{}", suggestion.as_ref().map(|s| format!(", did you mean `{s}`?")).unwrap_or_default())]
    UnknownKey {
        key: String,
        line: usize,
        suggestion: Option<String>,
    },

    #[error("{}key `{key}`: {message}", line.map(|l| format!("line {l}, ")).unwrap_or_default())]
    Type {
        key: String,
        line: Option<usize>,
        message: String,
    },

    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },
}

impl ConfigError {
    fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<mobipred::Error> for ConfigError {
    fn from(err: mobipred::Error) -> Self {
        match err {
            mobipred::Error::InvalidParameter { name, reason } => ConfigError::invalid(name, reason),
            mobipred::Error::Empty(name) => ConfigError::invalid(name, "must not be empty"),
            other => ConfigError::invalid("config", other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    SnrDb,
    NAntennas,
    Speed,
    Predictor,
    HistoryLen,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::SnrDb => "snr_db",
            SweepAxis::NAntennas => "n_antennas",
            SweepAxis::Speed => "speed",
            SweepAxis::Predictor => "predictor",
            SweepAxis::HistoryLen => "history_len",
        }
    }
}

/// One point on a sweep axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum SweepValue {
    Count(usize),
    Number(f64),
    Predictor(Predictor),
}

impl fmt::Display for SweepValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepValue::Count(n) => write!(f, "{n}"),
            SweepValue::Number(x) => write!(f, "{x}"),
            SweepValue::Predictor(p) => write!(f, "{p}"),
        }
    }
}

/// `(n_v, n_h)` for the supported antenna counts: single-polarised
/// versions of the standard panel layouts.
pub const ANTENNA_LAYOUTS: [(usize, (usize, usize)); 7] = [
    (2, (1, 2)),
    (4, (1, 4)),
    (16, (2, 8)),
    (32, (4, 8)),
    (64, (4, 16)),
    (256, (8, 32)),
    (1024, (16, 64)),
];

pub fn antenna_layout(n_t: usize) -> Option<(usize, usize)> {
    ANTENNA_LAYOUTS.iter().find(|(n, _)| *n == n_t).map(|(_, l)| *l)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<SweepValue>,
    /// Predictors run at every point (ignored for the `predictor` axis).
    pub predictors: Vec<Predictor>,
    /// Emit a perfect-CSI (`stationary`) row per point.
    pub stationary: bool,
    pub base: ExperimentConfig,
}

impl SweepSpec {
    /// The config for one point; `snr_db` points share a single run and are
    /// not applied here.
    pub fn point_config(&self, value: SweepValue) -> ExperimentConfig {
        let mut cfg = self.base.clone();
        match (self.axis, value) {
            (SweepAxis::NAntennas, SweepValue::Count(n)) => {
                if let Some((n_v, n_h)) = antenna_layout(n) {
                    cfg.array = ArrayConfig { n_v, n_h, ..cfg.array };
                }
            }
            (SweepAxis::Speed, SweepValue::Number(v)) => cfg.ue_speeds_kmh = vec![v],
            (SweepAxis::HistoryLen, SweepValue::Count(n)) => cfg.history_len = n,
            (SweepAxis::Predictor, SweepValue::Predictor(p)) => cfg.predictor = p,
            _ => {}
        }
        cfg
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.values.is_empty() {
            return Err(ConfigError::invalid("sweep.values", "must not be empty"));
        }
        if self.axis != SweepAxis::Predictor && self.predictors.is_empty() {
            return Err(ConfigError::invalid("sweep.predictors", "must not be empty"));
        }
        if self.axis != SweepAxis::SnrDb && self.base.snr_db.len() != 1 {
            return Err(ConfigError::invalid(
                "snr_db",
                format!(
                    "a `{}` sweep reports one SNR point; give a single value",
                    self.axis.name()
                ),
            ));
        }
        match self.axis {
            SweepAxis::SnrDb => self.with_predictors(&self.snr_config())?,
            _ => {
                for &v in &self.values {
                    self.with_predictors(&self.point_config(v))?;
                }
            }
        }
        Ok(())
    }

    /// The base config carrying every `snr_db` value of the sweep.
    pub fn snr_config(&self) -> ExperimentConfig {
        let mut cfg = self.base.clone();
        cfg.snr_db = self
            .values
            .iter()
            .filter_map(|v| match v {
                SweepValue::Number(x) => Some(*x),
                _ => None,
            })
            .collect();
        cfg
    }

    fn with_predictors(&self, cfg: &ExperimentConfig) -> Result<(), ConfigError> {
        if self.axis == SweepAxis::Predictor {
            return Ok(cfg.validate()?);
        }
        for &p in &self.predictors {
            ExperimentConfig {
                predictor: p,
                ..cfg.clone()
            }
            .validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigFile {
    Experiment(ExperimentConfig),
    Sweep(SweepSpec),
}

impl ConfigFile {
    pub fn base(&self) -> &ExperimentConfig {
        match self {
            ConfigFile::Experiment(cfg) => cfg,
            ConfigFile::Sweep(spec) => &spec.base,
        }
    }

    pub fn base_mut(&mut self) -> &mut ExperimentConfig {
        match self {
            ConfigFile::Experiment(cfg) => cfg,
            ConfigFile::Sweep(spec) => &mut spec.base,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepRepr {
    axis: SweepAxis,
    values: Vec<toml::Value>,
    #[serde(default)]
    predictors: Option<Vec<Predictor>>,
    #[serde(default)]
    stationary: bool,
}

const SWEEP_KEYS: [&str; 4] = ["axis", "values", "predictors", "stationary"];

pub fn parse_config(path: &Path) -> Result<ConfigFile, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ConfigFile, ConfigError> {
    let doc = toml::de::DeTable::parse(text).map_err(|e| syntax_error(text, &e))?;
    check_keys(text, doc.get_ref(), &schema(), "")?;

    let mut table: toml::Table = toml::from_str(text).map_err(|e| syntax_error(text, &e))?;
    let sweep = table.remove("sweep");
    let base = ExperimentConfig::deserialize(toml::Value::Table(table))
        .map_err(|e| type_error(text, doc.get_ref(), "", &e))?;
    base.validate()?;

    let Some(sweep) = sweep else {
        return Ok(ConfigFile::Experiment(base));
    };
    let repr = SweepRepr::deserialize(sweep).map_err(|e| type_error(text, doc.get_ref(), "sweep.", &e))?;
    let values = repr
        .values
        .iter()
        .map(|v| sweep_value(repr.axis, v))
        .collect::<Result<Vec<_>, _>>()?;
    let spec = SweepSpec {
        axis: repr.axis,
        values,
        predictors: repr.predictors.unwrap_or_else(|| vec![base.predictor]),
        stationary: repr.stationary,
        base,
    };
    spec.validate()?;
    Ok(ConfigFile::Sweep(spec))
}

fn sweep_value(axis: SweepAxis, v: &toml::Value) -> Result<SweepValue, ConfigError> {
    let bad = |what: &str| {
        ConfigError::invalid(
            "sweep.values",
            format!("`{}` values must be {what}, got {v}", axis.name()),
        )
    };
    let number = v.as_float().or_else(|| v.as_integer().map(|i| i as f64));
    let count = v.as_integer().and_then(|i| usize::try_from(i).ok());
    match axis {
        SweepAxis::SnrDb => number
            .filter(|x| x.is_finite())
            .map(SweepValue::Number)
            .ok_or_else(|| bad("numbers")),
        SweepAxis::Speed => number
            .filter(|x| x.is_finite() && *x >= 0.0)
            .map(SweepValue::Number)
            .ok_or_else(|| bad("non-negative speeds in km/h")),
        SweepAxis::HistoryLen => count
            .filter(|n| *n >= 1)
            .map(SweepValue::Count)
            .ok_or_else(|| bad("positive integers")),
        SweepAxis::NAntennas => {
            let n = count.ok_or_else(|| bad("integers"))?;
            if antenna_layout(n).is_none() {
                let known: Vec<String> = ANTENNA_LAYOUTS.iter().map(|(n, _)| n.to_string()).collect();
                return Err(ConfigError::invalid(
                    "sweep.values",
                    format!("no array layout for {n} antennas (supported: {})", known.join(", ")),
                ));
            }
            Ok(SweepValue::Count(n))
        }
        SweepAxis::Predictor => v
            .as_str()
            .and_then(Predictor::from_name)
            .map(SweepValue::Predictor)
            .ok_or_else(|| bad("predictor names (none, vector_prony, pad, fir_wiener)")),
    }
}

/// Every key an experiment config accepts, as a TOML table of defaults.
fn schema() -> toml::Table {
    let full = ExperimentConfig {
        order: Some(1),
        covariance_window: Some(1),
        ..ExperimentConfig::default()
    };
    let mut table = toml::Table::try_from(&full).expect("config serializes to TOML");
    let sweep: toml::Table = SWEEP_KEYS
        .iter()
        .map(|k| (k.to_string(), toml::Value::Boolean(true)))
        .collect();
    table.insert("sweep".into(), toml::Value::Table(sweep));
    table
}

fn check_keys(text: &str, doc: &toml::de::DeTable<'_>, schema: &toml::Table, prefix: &str) -> Result<(), ConfigError> {
    for (key, value) in doc {
        let name = key.get_ref().as_ref();
        match schema.get(name) {
            None => {
                return Err(ConfigError::UnknownKey {
                    key: format!("{prefix}{name}"),
                    line: line_col(text, key.span().start).0,
                    suggestion: suggest(name, schema.keys().map(String::as_str)).map(|s| format!("{prefix}{s}")),
                })
            }
            Some(toml::Value::Table(inner)) => {
                if let Some(table) = value.get_ref().as_table() {
                    check_keys(text, table, inner, &format!("{prefix}{name}."))?;
                }
            }
            Some(_) => {}
        }
    }
    Ok(())
}

fn suggest<'a>(key: &str, candidates: impl Iterator<Item = &'a str>) -> Option<String> {
    candidates
        .map(|c| (strsim::normalized_damerau_levenshtein(key, c), c))
        .filter(|(score, _)| *score >= 0.5)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| c.to_string())
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

fn syntax_error(text: &str, err: &toml::de::Error) -> ConfigError {
    let (line, column) = err.span().map_or((0, 0), |s| line_col(text, s.start));
    ConfigError::Syntax {
        line,
        column,
        message: err.message().trim().to_string(),
    }
}

/// Maps a value-deserialization error (`... in `a.b``) back to its line.
fn type_error(text: &str, doc: &toml::de::DeTable<'_>, prefix: &str, err: &toml::de::Error) -> ConfigError {
    let display = err.to_string();
    let message = display.trim();
    let (message, path) = match message.rsplit_once("\nin `") {
        Some((m, p)) => (m.trim().to_string(), Some(p.trim_end_matches('`').to_string())),
        None => (message.to_string(), None),
    };
    let key = format!("{prefix}{}", path.as_deref().unwrap_or(""));
    let line = span_of(doc, &key).map(|s| line_col(text, s.start).0);
    ConfigError::Type {
        key: key.trim_end_matches('.').to_string(),
        line,
        message,
    }
}

fn span_of(doc: &toml::de::DeTable<'_>, dotted: &str) -> Option<Range<usize>> {
    let mut table = doc;
    let mut parts = dotted.split('.').filter(|p| !p.is_empty()).peekable();
    while let Some(part) = parts.next() {
        let (key, value) = table.get_key_value(part)?;
        if parts.peek().is_none() {
            return Some(value.span().start.min(key.span().start)..value.span().end);
        }
        table = value.get_ref().as_table()?;
    }
    None
}

/// Serialized form of a config with every default written out.
pub fn to_toml(cfg: &ExperimentConfig) -> String {
    toml::to_string(cfg).expect("config serializes to TOML")
}
