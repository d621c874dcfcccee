use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bench::DeskQp;
use crate::constants::EstimateConfig;
use crate::problems::{CsvSchema, Normalization, SyntheticFairnessConfig, SyntheticMcConfig};
use crate::sets::PowerIterationConfig;
use crate::solvers::{Algorithm, Schedule, TraceConfig};

/// Invalid or inconsistent configuration; the message names the field path.
#[derive(Debug, thiserror::Error)]
#[error("config error: {0}")]
pub struct ConfigError(pub String);

impl ConfigError {
    pub fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeskSet {
    #[default]
    L2Ball,
    L1Ball,
}

fn one() -> usize {
    1
}

fn test_fraction() -> f64 {
    0.3
}

fn validation_fraction() -> f64 {
    0.1
}

fn budget() -> f64 {
    0.05
}

fn radius() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    DeskQp {
        #[serde(default)]
        qp: DeskQp,
        #[serde(default)]
        set: DeskSet,
    },
    FairnessSynthetic {
        #[serde(default)]
        data: SyntheticFairnessConfig,
        /// Seed of the generated dataset; the run seed when absent.
        #[serde(default)]
        data_seed: Option<u64>,
        #[serde(default = "one")]
        batch: usize,
        #[serde(default = "test_fraction")]
        test_fraction: f64,
        #[serde(default)]
        validation_fraction: f64,
    },
    FairnessCsv {
        path: PathBuf,
        schema: CsvSchema,
        #[serde(default = "budget")]
        c: f64,
        #[serde(default = "radius")]
        radius: f64,
        #[serde(default = "one")]
        batch: usize,
        #[serde(default)]
        split_seed: Option<u64>,
        #[serde(default = "test_fraction")]
        test_fraction: f64,
        #[serde(default = "validation_fraction")]
        validation_fraction: f64,
    },
    MatrixCompletion {
        #[serde(default)]
        data: SyntheticMcConfig,
        #[serde(default)]
        data_seed: Option<u64>,
        #[serde(default)]
        normalization: Normalization,
        #[serde(default)]
        power: PowerIterationConfig,
    },
}

impl ProblemSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ProblemSpec::DeskQp { .. } => "desk_qp",
            ProblemSpec::FairnessSynthetic { .. } => "fairness_synthetic",
            ProblemSpec::FairnessCsv { .. } => "fairness_csv",
            ProblemSpec::MatrixCompletion { .. } => "matrix_completion",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub algorithm: Algorithm,
    pub schedule: Schedule,
    /// Number of iterations `T`.
    pub horizon: usize,
    #[serde(default)]
    pub trace: TraceConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Constant estimation for the theorem schedules; the desk QP uses its
    /// exact constants when absent.
    #[serde(default)]
    pub constants: Option<EstimateConfig>,
    /// Also train with the constraints dropped and report its metrics
    /// (fairness problems only).
    #[serde(default)]
    pub compare_unconstrained: bool,
}

impl RunConfig {
    /// Parses TOML after applying `path=value` overrides to the document.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut doc: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::new(format!("TOML syntax: {e}")))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let cfg: RunConfig = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::new(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let lmo_only = matches!(
            self.problem,
            ProblemSpec::MatrixCompletion { .. }
                | ProblemSpec::DeskQp {
                    set: DeskSet::L1Ball,
                    ..
                }
        );
        if self.algorithm == Algorithm::Csoa && lmo_only {
            return Err(ConfigError::new(
                "algorithm: csoa needs a projection, but the problem's set only has an lmo",
            ));
        }
        if let ProblemSpec::FairnessCsv { path, .. } = &self.problem {
            if !path.exists() {
                return Err(ConfigError::new(format!(
                    "problem.path: {} does not exist",
                    path.display()
                )));
            }
        }
        if let ProblemSpec::FairnessSynthetic {
            test_fraction,
            validation_fraction,
            ..
        }
        | ProblemSpec::FairnessCsv {
            test_fraction,
            validation_fraction,
            ..
        } = &self.problem
        {
            if !(0.0..1.0).contains(test_fraction) || !(0.0..1.0).contains(validation_fraction) {
                return Err(ConfigError::new(
                    "problem.test_fraction / problem.validation_fraction must lie in [0, 1)",
                ));
            }
        }
        Ok(())
    }

    /// Sets the minibatch size of problems that have one.
    pub fn set_batch(&mut self, b: usize) -> Result<(), ConfigError> {
        match &mut self.problem {
            ProblemSpec::DeskQp { qp, .. } => qp.batch = b,
            ProblemSpec::FairnessSynthetic { batch, .. } | ProblemSpec::FairnessCsv { batch, .. } => {
                *batch = b
            }
            ProblemSpec::MatrixCompletion { data, .. } => data.batch = b,
        }
        Ok(())
    }

    /// Scales the tightening constant of a manual schedule.
    pub fn set_upsilon0(&mut self, value: f64) -> Result<(), ConfigError> {
        match &mut self.schedule {
            Schedule::Manual { upsilon0, .. } => {
                *upsilon0 = value;
                Ok(())
            }
            _ => Err(ConfigError::new(
                "schedule: sweeping upsilon0 needs a manual schedule",
            )),
        }
    }
}

/// `a.b.c=value`, where value is parsed as a TOML value and falls back to a
/// bare string.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<(), ConfigError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ConfigError::new(format!("override {assignment:?} is not path=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(ConfigError::new(format!("override path {path:?} has an empty segment")));
    }
    let value = parse_value(raw.trim());
    let mut table = doc;
    for key in &keys[..keys.len() - 1] {
        let entry = table
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError::new(format!("override path {path:?}: {key} is not a table")))?;
    }
    table.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
