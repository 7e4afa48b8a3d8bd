use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::IndicatorKind;
use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::models::ModelKind;
use crate::sim::SimConfig;
use crate::tuning::{Domain, HyperSpace, ParamConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuningConfig {
    pub enabled: bool,
    /// Random configurations drawn before the surrogate takes over.
    pub n_init: usize,
    /// Share of training players used inside the cross-validation folds.
    pub player_fraction: f64,
}

impl Default for TuningConfig {
    fn default() -> Self {
        TuningConfig {
            enabled: true,
            n_init: 3,
            player_fraction: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UncertaintyConfig {
    pub level: f64,
    /// Test examples on which intervals are computed.
    pub probes: usize,
}

impl Default for UncertaintyConfig {
    fn default() -> Self {
        UncertaintyConfig {
            level: 0.95,
            probes: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub kind: ModelKind,
    /// Fixed hyperparameters; tuned values override them.
    #[serde(default)]
    pub params: ParamConfig,
    /// Search space; the documented default space of the kind when absent.
    #[serde(default)]
    pub space: Option<BTreeMap<String, Domain>>,
    /// Tuning trials; 0 disables tuning for this model.
    #[serde(default)]
    pub budget: Option<usize>,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        ModelSpec {
            name: kind.as_str().to_string(),
            kind,
            params: ParamConfig::new(),
            space: None,
            budget: None,
        }
    }

    pub fn hyper_space(&self) -> HyperSpace {
        HyperSpace {
            params: self.space.clone().unwrap_or_else(|| default_space(self.kind)),
        }
    }

    pub fn tuning_budget(&self) -> usize {
        let space = self.hyper_space();
        if space.params.is_empty() {
            return 0;
        }
        self.budget.unwrap_or_else(|| default_budget(self.kind))
    }
}

fn real(low: f64, high: f64, log: bool) -> Domain {
    Domain::Real { low, high, log }
}

fn int(low: i64, high: i64) -> Domain {
    Domain::Int { low, high }
}

/// Search spaces used when a model spec does not give one.
pub fn default_space(kind: ModelKind) -> BTreeMap<String, Domain> {
    let mut s = BTreeMap::new();
    let mut put = |k: &str, d: Domain| {
        s.insert(k.to_string(), d);
    };
    match kind {
        ModelKind::Ols | ModelKind::Lme => {}
        ModelKind::Lasso => put("lambda", real(1e-4, 1.0, true)),
        ModelKind::Tree => {
            put("max_depth", int(3, 14));
            put("min_samples_leaf", int(5, 400));
        }
        ModelKind::Forest => {
            put("n_trees", int(40, 120));
            put("mtry", int(3, 14));
            put("min_samples_leaf", int(5, 100));
        }
        ModelKind::Gbt => {
            put("rounds", int(80, 250));
            put("learning_rate", real(0.02, 0.3, true));
            put("reg_lambda", real(0.1, 100.0, true));
            put("min_gain", real(0.0, 50.0, false));
            put("max_depth", int(2, 6));
        }
        ModelKind::KnnEuclidean | ModelKind::KnnMahalanobis | ModelKind::KnnRelief => {
            put("k", int(5, 80));
            put(
                "weighting",
                Domain::Categorical {
                    choices: vec!["reciprocal".into(), "minmax".into(), "uniform".into()],
                },
            );
        }
    }
    s
}

pub fn default_budget(kind: ModelKind) -> usize {
    match kind {
        ModelKind::Ols | ModelKind::Lme => 0,
        ModelKind::Forest | ModelKind::Gbt => 5,
        _ => 8,
    }
}

fn default_models() -> Vec<ModelSpec> {
    ModelKind::ALL.iter().map(|&k| ModelSpec::new(k)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Master seed; every component derives its own stream from it.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub indicator: IndicatorKind,
    /// Last training year; later snapshots form the test set.
    pub cutoff_year: i32,
    /// Share of players withheld from training and testing altogether.
    pub holdout_fraction: f64,
    /// Apply the per-model feature selection when training.
    pub select_features: bool,
    pub sim: SimConfig,
    pub features: FeatureConfig,
    pub tuning: TuningConfig,
    pub uncertainty: UncertaintyConfig,
    pub models: Vec<ModelSpec>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 20240501,
            output_dir: PathBuf::from("runs/default"),
            indicator: IndicatorKind::Quality,
            cutoff_year: 2019,
            holdout_fraction: 0.05,
            select_features: true,
            sim: SimConfig::default(),
            features: FeatureConfig::default(),
            tuning: TuningConfig::default(),
            uncertainty: UncertaintyConfig::default(),
            models: default_models(),
        }
    }
}

impl ExperimentConfig {
    /// Parses TOML, rejecting unknown keys, and validates the result.
    /// Errors name the offending field and, where it can be found, its line.
    pub fn from_toml_str(text: &str) -> Result<ExperimentConfig> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::config("config", e.to_string().trim_end().to_string()))?;
        let mut unknown = Vec::new();
        let cfg: ExperimentConfig = serde_ignored::deserialize(de, |path| unknown.push(path.to_string()))
            .map_err(|e| Error::config("config", e.to_string().trim_end().to_string()))?;
        if let Some(path) = unknown.first() {
            return Err(with_line(text, Error::config(path.clone(), "unknown key")));
        }
        cfg.validate().map_err(|e| with_line(text, e))?;
        Ok(cfg)
    }

    pub fn from_json_str(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a `.json` or TOML file.
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::config("config", format!("cannot read {}: {e}", path.display()))
        })?;
        if path.extension().is_some_and(|e| e == "json") {
            ExperimentConfig::from_json_str(&text)
        } else {
            ExperimentConfig::from_toml_str(&text)
        }
    }

    /// Canonical JSON form; hashed into the run manifest.
    pub fn canonical_json(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec(self)?)
    }

    /// Simulator settings with the seed derived from the master seed.
    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            seed: crate::seed::derive_seed(self.seed, "sim"),
            ..self.sim.clone()
        }
    }

    pub fn model(&self, name: &str) -> Option<&ModelSpec> {
        self.models.iter().find(|m| m.name == name)
    }

    pub fn validate(&self) -> Result<()> {
        let sim = self.sim_config();
        sim.validate()?;
        if self.sim.seed != SimConfig::default().seed {
            return Err(Error::config(
                "sim.seed",
                "the simulator seed derives from the top-level `seed`; set that instead",
            ));
        }
        self.features.validate()?;
        let (first, last) = (sim.start_year, sim.end_year());
        if self.cutoff_year <= first || self.cutoff_year > last - 2 {
            return Err(Error::config(
                "cutoff_year",
                format!(
                    "must leave two training years and one labeled test year inside \
                     the simulated seasons {first}..{last}: choose {}..{}",
                    first + 1,
                    last - 2
                ),
            ));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::config("holdout_fraction", "must lie in [0, 1)"));
        }
        if self.tuning.n_init < 2 {
            return Err(Error::config("tuning.n_init", "must be at least 2"));
        }
        if !(self.tuning.player_fraction > 0.0 && self.tuning.player_fraction <= 1.0) {
            return Err(Error::config("tuning.player_fraction", "must lie in (0, 1]"));
        }
        if !(self.uncertainty.level > 0.0 && self.uncertainty.level < 1.0) {
            return Err(Error::config("uncertainty.level", "must lie in (0, 1)"));
        }
        if self.uncertainty.probes == 0 {
            return Err(Error::config("uncertainty.probes", "must be positive"));
        }
        if self.models.is_empty() {
            return Err(Error::config("models", "at least one model is required"));
        }
        let mut names = BTreeSet::new();
        for m in &self.models {
            let field = format!("models.{}", m.name);
            if m.name.is_empty()
                || !m
                    .name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
            {
                return Err(Error::config(
                    format!("{field}.name"),
                    "model names may only use letters, digits, `_` and `-`",
                ));
            }
            if !names.insert(m.name.as_str()) {
                return Err(Error::config(format!("{field}.name"), "duplicate model name"));
            }
            m.kind.check_params(&m.params, &format!("{field}.params"))?;
            let space = m.hyper_space();
            for key in space.params.keys() {
                if !m.kind.param_names().contains(&key.as_str()) {
                    return Err(Error::config(
                        format!("{field}.space.{key}"),
                        format!("`{}` has no parameter `{key}`", m.kind.as_str()),
                    ));
                }
            }
            let budget = m.tuning_budget();
            if budget > 0 {
                space
                    .validate()
                    .map_err(|e| prefix_field(e, &format!("{field}.")))?;
            }
            if budget > 0 && budget < self.tuning.n_init {
                return Err(Error::config(
                    format!("{field}.budget"),
                    format!("must be 0 or at least tuning.n_init ({})", self.tuning.n_init),
                ));
            }
        }
        Ok(())
    }
}

fn prefix_field(e: Error, prefix: &str) -> Error {
    match e {
        Error::Config { field, message } => Error::Config {
            field: format!("{prefix}{field}"),
            message,
        },
        other => other,
    }
}

/// Appends the 1-based line on which the last key of the field path is set.
fn with_line(text: &str, e: Error) -> Error {
    let Error::Config { field, message } = e else {
        return e;
    };
    match locate(text, &field) {
        Some(line) => Error::Config {
            field,
            message: format!("{message} (line {line})"),
        },
        None => Error::Config { field, message },
    }
}

fn locate(text: &str, field: &str) -> Option<usize> {
    let parts: Vec<&str> = field.split('.').filter(|p| !p.is_empty()).collect();
    let key = parts.last()?.trim_end_matches(|c: char| c == ']' || c.is_ascii_digit()).trim_end_matches('[');
    let lines: Vec<&str> = text.lines().collect();
    // inside a [[models]] entry, start at the line naming the model
    let mut start = 0;
    if parts.first() == Some(&"models") && parts.len() > 2 {
        let name_line = format!("\"{}\"", parts[1]);
        if let Some(i) = lines
            .iter()
            .position(|l| l.trim_start().starts_with("name") && l.contains(&name_line))
        {
            start = i;
        }
    }
    let is_key = |l: &str| {
        let t = l.trim_start();
        t.strip_prefix(key)
            .is_some_and(|rest| rest.trim_start().starts_with('='))
            || (t.starts_with('[') && t.trim_end_matches(']').ends_with(&format!(".{key}")))
            || t.trim_matches(|c| c == '[' || c == ']') == key
    };
    lines[start..]
        .iter()
        .position(|l| is_key(l))
        .map(|i| start + i + 1)
}
