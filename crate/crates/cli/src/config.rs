//! Experiment configuration files.

use std::path::{Path, PathBuf};

use jumplab_core::sde::auto_dt;
use jumplab_core::{delta, decompose, ModelFile, ValidatedModel};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::CliError;

/// A real parameter that may be left to the tool with the string `"auto"`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum AutoOr {
    #[default]
    Auto,
    Value(f64),
}

impl Serialize for AutoOr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            AutoOr::Auto => s.serialize_str("auto"),
            AutoOr::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for AutoOr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(AutoOr::Value(v)),
            Raw::Str(s) if s == "auto" => Ok(AutoOr::Auto),
            Raw::Str(s) => Err(D::Error::custom(format!("expected a number or \"auto\", got {s:?}"))),
        }
    }
}

/// The model, inline or as a path relative to the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    Path(PathBuf),
    Inline(ModelFile),
}

fn default_decimation() -> usize {
    100
}

fn default_epsilon() -> f64 {
    jumplab_core::analyze::DEFAULT_EPSILON
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub dt: AutoOr,
    pub horizon: f64,
    pub n_trajectories: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_decimation")]
    pub decimation: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub burn_in: AutoOr,
    /// Initial populations; the maximally mixed state when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<f64>>,
}

impl RunConfig {
    pub fn new(horizon: f64, n_trajectories: usize, master_seed: u64) -> Self {
        Self {
            dt: AutoOr::Auto,
            horizon,
            n_trajectories,
            master_seed,
            decimation: default_decimation(),
            epsilon: default_epsilon(),
            burn_in: AutoOr::Auto,
            initial: None,
        }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("jumplab-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Write one CSV per trajectory (and per QY path when `save_qy` is on).
    #[serde(default)]
    pub save_trajectories: bool,
    /// Also run the reduced QY ensemble and report conditional phase means.
    #[serde(default)]
    pub save_qy: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            save_trajectories: false,
            save_qy: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSource,
    pub run: RunConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
}

impl ExperimentConfig {
    pub fn new(model: ModelFile, run: RunConfig, dir: impl Into<PathBuf>) -> Self {
        Self {
            model: ModelSource::Inline(model),
            run,
            outputs: OutputConfig {
                dir: dir.into(),
                ..OutputConfig::default()
            },
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let ModelSource::Path(p) = &cfg.model {
            let full = base.join(p);
            let text = std::fs::read_to_string(&full).map_err(|e| CliError::io(&full, e))?;
            let file = ModelFile::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", full.display())))?;
            cfg.model = ModelSource::Inline(file);
        }
        if cfg.outputs.dir.is_relative() {
            cfg.outputs.dir = base.join(&cfg.outputs.dir);
        }
        Ok(cfg)
    }

    pub fn model_file(&self) -> Result<&ModelFile, CliError> {
        match &self.model {
            ModelSource::Inline(m) => Ok(m),
            ModelSource::Path(p) => Err(CliError::Config(format!(
                "model path {} was not resolved; use ExperimentConfig::load",
                p.display()
            ))),
        }
    }

    pub fn validated_model(&self) -> Result<ValidatedModel, CliError> {
        let model = self.model_file()?.clone().into_model()?;
        Ok(model.validate()?)
    }

    /// Checks the run block and resolves the `"auto"` entries.
    pub fn resolve(&self) -> Result<Experiment, CliError> {
        let model = self.validated_model()?;
        let run = &self.run;
        if run.n_trajectories == 0 {
            return Err(CliError::Config("run.n_trajectories must be at least 1".into()));
        }
        if !(run.horizon > 0.0 && run.horizon.is_finite()) {
            return Err(CliError::Config(format!("run.horizon = {} must be positive", run.horizon)));
        }
        if run.decimation == 0 {
            return Err(CliError::Config("run.decimation must be at least 1".into()));
        }
        if !(run.epsilon > 0.0 && run.epsilon < 0.5) {
            return Err(CliError::Config(format!("run.epsilon = {} outside (0, 0.5)", run.epsilon)));
        }
        let dt = match run.dt {
            AutoOr::Auto => auto_dt(&model),
            AutoOr::Value(v) if v > 0.0 && v.is_finite() => v,
            AutoOr::Value(v) => return Err(CliError::Config(format!("run.dt = {v} must be positive"))),
        };
        let burn_in = match run.burn_in {
            AutoOr::Auto => auto_burn_in(&model),
            AutoOr::Value(v) if v >= 0.0 && v.is_finite() => v,
            AutoOr::Value(v) => return Err(CliError::Config(format!("run.burn_in = {v} must be non-negative"))),
        };
        let dim = model.dim();
        let initial = match &run.initial {
            None => vec![1.0 / dim as f64; dim],
            Some(q) => {
                if q.len() != dim {
                    return Err(CliError::Config(format!("run.initial has {} entries for dimension {dim}", q.len())));
                }
                let sum: f64 = q.iter().sum();
                if q.iter().any(|&x| !(x >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                    return Err(CliError::Config("run.initial must be a probability vector".into()));
                }
                q.clone()
            }
        };
        Ok(Experiment {
            model,
            dt,
            burn_in,
            initial,
        })
    }
}

/// `10/(γ² min Re Δ)`, the relaxation time of the slowest phase.
pub fn auto_burn_in(model: &ValidatedModel) -> f64 {
    let t = decompose(model);
    let g2 = model.gamma() * model.gamma();
    let n = model.dim();
    let mut min_re = f64::INFINITY;
    for k in 0..n {
        for l in (k + 1)..n {
            if let Ok(d) = delta(k, l, &t, model.setup()) {
                min_re = min_re.min(d.re);
            }
        }
    }
    if g2 > 0.0 && min_re > 0.0 && min_re.is_finite() {
        10.0 / (g2 * min_re)
    } else {
        0.0
    }
}

/// A config with every derived quantity filled in.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub model: ValidatedModel,
    pub dt: f64,
    pub burn_in: f64,
    pub initial: Vec<f64>,
}
