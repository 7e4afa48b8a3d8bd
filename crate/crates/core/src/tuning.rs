//! Expanding-window cross-validation by year and sequential model-based
//! hyperparameter search with a forest surrogate.

use std::collections::BTreeMap;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::{derive_seed, rng_for};
use crate::stats::{normal_cdf, normal_pdf};
use crate::tree::{fit_forest, ForestParams};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub fit_years: Vec<i32>,
    pub validate_year: i32,
}

/// Fold `j` fits on the first `j` years and validates on year `j + 1`.
pub fn expanding_window_splits(years: &[i32]) -> Result<Vec<Fold>> {
    let mut ys = years.to_vec();
    ys.sort_unstable();
    ys.dedup();
    if ys.len() < 2 {
        return Err(Error::invalid(
            "time-series cross-validation needs at least two distinct years",
        ));
    }
    Ok((1..ys.len())
        .map(|j| Fold {
            fit_years: ys[..j].to_vec(),
            validate_year: ys[j],
        })
        .collect())
}

/// The fit and validation datasets of every fold. Panics if a fold would
/// train on data dated after its validation data.
pub fn fold_datasets(d: &Dataset) -> Result<Vec<(Fold, Dataset, Dataset)>> {
    let folds = expanding_window_splits(&d.years())?;
    Ok(folds
        .into_iter()
        .map(|f| {
            let last_fit = *f.fit_years.last().expect("non-empty fit years");
            let fit = d.filter(|e| e.year() <= last_fit);
            let val = d.filter(|e| e.year() == f.validate_year);
            let max_fit = fit.examples.iter().map(|e| e.snapshot_date).max();
            let min_val = val.examples.iter().map(|e| e.snapshot_date).min();
            if let (Some(a), Some(b)) = (max_fit, min_val) {
                assert!(a < b, "fold trains on data dated {a}, validates from {b}");
            }
            (f, fit, val)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Domain {
    Real { low: f64, high: f64, #[serde(default)] log: bool },
    Int { low: i64, high: i64 },
    Categorical { choices: Vec<String> },
}

impl Domain {
    fn validate(&self, name: &str) -> Result<()> {
        let bad = |m: &str| Err(Error::config(format!("space.{name}"), m.to_string()));
        match self {
            Domain::Real { low, high, log } => {
                if !(low <= high) || !low.is_finite() || !high.is_finite() {
                    return bad("real domain needs finite low <= high");
                }
                if *log && !(*low > 0.0) {
                    return bad("log-scale bounds must be > 0");
                }
            }
            Domain::Int { low, high } => {
                if low > high {
                    return bad("integer domain needs low <= high");
                }
            }
            Domain::Categorical { choices } => {
                if choices.is_empty() {
                    return bad("categorical domain needs at least one choice");
                }
            }
        }
        Ok(())
    }

    fn sample(&self, rng: &mut impl rand::Rng) -> ParamValue {
        match self {
            Domain::Real { low, high, log } => {
                let u: f64 = rng.random();
                ParamValue::Real(if *log {
                    (low.ln() + u * (high.ln() - low.ln())).exp()
                } else {
                    low + u * (high - low)
                })
            }
            Domain::Int { low, high } => ParamValue::Int(rng.random_range(*low..=*high)),
            Domain::Categorical { choices } => {
                ParamValue::Cat(choices[rng.random_range(0..choices.len())].clone())
            }
        }
    }

    /// Position in [0, 1] (category index for categoricals).
    fn encode(&self, v: &ParamValue) -> f64 {
        let unit = |x: f64, lo: f64, hi: f64| if hi > lo { (x - lo) / (hi - lo) } else { 0.0 };
        match (self, v) {
            (Domain::Real { low, high, log: true }, ParamValue::Real(x)) => unit(x.ln(), low.ln(), high.ln()),
            (Domain::Real { low, high, .. }, ParamValue::Real(x)) => unit(*x, *low, *high),
            (Domain::Int { low, high }, ParamValue::Int(x)) => unit(*x as f64, *low as f64, *high as f64),
            (Domain::Categorical { choices }, ParamValue::Cat(c)) => {
                choices.iter().position(|x| x == c).unwrap_or(0) as f64
            }
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Cat(String),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(i) => Some(*i as f64),
            ParamValue::Real(x) => Some(*x),
            ParamValue::Cat(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Cat(s) => Some(s),
            _ => None,
        }
    }
}

pub type ParamConfig = BTreeMap<String, ParamValue>;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HyperSpace {
    pub params: BTreeMap<String, Domain>,
}

impl HyperSpace {
    pub fn validate(&self) -> Result<()> {
        if self.params.is_empty() {
            return Err(Error::config("space", "hyperparameter space is empty"));
        }
        for (k, d) in &self.params {
            d.validate(k)?;
        }
        Ok(())
    }

    fn sample(&self, rng: &mut impl rand::Rng) -> ParamConfig {
        self.params
            .iter()
            .map(|(k, d)| (k.clone(), d.sample(rng)))
            .collect()
    }

    fn encode(&self, c: &ParamConfig) -> Vec<f64> {
        self.params
            .iter()
            .map(|(k, d)| c.get(k).map_or(0.0, |v| d.encode(v)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub config: ParamConfig,
    /// Mean validation RMSE; `null` in JSON when the objective failed.
    pub loss: Option<f64>,
    pub incumbent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneTrace {
    pub trials: Vec<Trial>,
    pub best_config: ParamConfig,
    pub best_loss: f64,
    pub seed: u64,
    pub budget: usize,
    pub n_init: usize,
}

const CANDIDATES: usize = 500;

fn expected_improvement(best: f64, mu: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return (best - mu).max(0.0);
    }
    let z = (best - mu) / sigma;
    (best - mu) * normal_cdf(z) + sigma * normal_pdf(z)
}

/// Minimizes `objective` over `space`: `n_init` uniform (log-aware) draws,
/// then each trial evaluates the best of 500 random candidates by expected
/// improvement under a random-forest surrogate. Non-finite losses are
/// recorded as failures and left out of the surrogate.
pub fn smbo_tune<F>(
    space: &HyperSpace,
    mut objective: F,
    budget: usize,
    n_init: usize,
    seed: u64,
) -> Result<TuneTrace>
where
    F: FnMut(&ParamConfig) -> f64,
{
    space.validate()?;
    if n_init < 2 || budget < n_init {
        return Err(Error::invalid(format!(
            "tuning needs budget >= n_init >= 2, got budget {budget}, n_init {n_init}"
        )));
    }
    let mut rng = rng_for(seed, "smbo");
    let mut trials: Vec<Trial> = Vec::with_capacity(budget);
    let mut best: Option<(f64, ParamConfig)> = None;
    for t in 0..budget {
        let finite: Vec<&Trial> = trials.iter().filter(|tr| tr.loss.is_some()).collect();
        let config = if t < n_init || finite.len() < 2 {
            space.sample(&mut rng)
        } else {
            let rows: Vec<Vec<f64>> = finite.iter().map(|tr| space.encode(&tr.config)).collect();
            let y: Vec<f64> = finite.iter().map(|tr| tr.loss.unwrap()).collect();
            let surrogate = fit_forest(
                &Matrix::from_rows(&rows),
                &y,
                &ForestParams {
                    n_trees: 50,
                    mtry: Some(space.params.len()),
                    max_depth: None,
                    min_samples_leaf: 1,
                    bootstrap: true,
                    seed: derive_seed(seed, &format!("smbo/surrogate/{t}")),
                },
            )?;
            let incumbent = best.as_ref().map_or(f64::INFINITY, |b| b.0);
            let mut top: Option<(f64, ParamConfig)> = None;
            for _ in 0..CANDIDATES {
                let c = space.sample(&mut rng);
                let preds = surrogate.tree_predictions_row(&space.encode(&c));
                let mu = preds.iter().sum::<f64>() / preds.len() as f64;
                let sd = (preds.iter().map(|p| (p - mu).powi(2)).sum::<f64>() / preds.len() as f64).sqrt();
                let ei = expected_improvement(incumbent, mu, sd);
                if top.as_ref().is_none_or(|(e, _)| ei > *e) {
                    top = Some((ei, c));
                }
            }
            top.expect("at least one candidate").1
        };
        let raw = objective(&config);
        let loss = raw.is_finite().then_some(raw);
        if let Some(l) = loss {
            if best.as_ref().is_none_or(|(b, _)| l < *b) {
                best = Some((l, config.clone()));
            }
        }
        debug!("trial {t}: loss {raw}");
        trials.push(Trial {
            config,
            loss,
            incumbent: best.as_ref().map_or(f64::INFINITY, |b| b.0),
        });
    }
    let (best_loss, best_config) = best.ok_or_else(|| {
        Error::invalid("every tuning trial failed; check the hyperparameter space")
    })?;
    Ok(TuneTrace {
        trials,
        best_config,
        best_loss,
        seed,
        budget,
        n_init,
    })
}
