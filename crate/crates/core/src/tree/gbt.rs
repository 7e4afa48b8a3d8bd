use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::builder::{grow, quantile_candidates, GrowParams, Objective, Presorted};
use super::{check_training, Tree};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SplitCandidates {
    Exact,
    /// At most `max_bins − 1` global quantile cut points per feature.
    Quantile { max_bins: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtParams {
    pub rounds: usize,
    pub learning_rate: f64,
    pub reg_lambda: f64,
    pub min_gain: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Fraction of rows drawn without replacement each round.
    pub subsample: f64,
    pub candidates: SplitCandidates,
    pub seed: u64,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            rounds: 300,
            learning_rate: 0.05,
            reg_lambda: 1.0,
            min_gain: 0.0,
            max_depth: 5,
            min_samples_leaf: 10,
            subsample: 1.0,
            candidates: SplitCandidates::Exact,
            seed: 0,
        }
    }
}

impl GbtParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::invalid(format!(
                "learning rate must lie in (0, 1], got {}",
                self.learning_rate
            )));
        }
        if !(self.reg_lambda >= 0.0) || !(self.min_gain >= 0.0) {
            return Err(Error::invalid("reg_lambda and min_gain must be >= 0"));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::invalid("subsample must lie in (0, 1]"));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::invalid("min_samples_leaf must be >= 1"));
        }
        if let SplitCandidates::Quantile { max_bins } = self.candidates {
            if !(2..=64).contains(&max_bins) {
                return Err(Error::invalid("quantile bins must lie in [2, 64]"));
            }
        }
        Ok(())
    }
}

/// Additive model `base + η·Σ tree(x)` for squared error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub params: GbtParams,
    pub base_score: f64,
    pub n_features: usize,
    pub trees: Vec<Tree>,
    /// Training RMSE after each round.
    pub train_rmse: Vec<f64>,
}

fn rmse(pred: &[f64], y: &[f64]) -> f64 {
    (pred.iter().zip(y).map(|(p, v)| (p - v).powi(2)).sum::<f64>() / y.len() as f64).sqrt()
}

pub fn fit_gbt(x: &Matrix, y: &[f64], params: &GbtParams) -> Result<GbtModel> {
    check_training(x, y)?;
    params.validate()?;
    let n = y.len();
    let cols = x.columns();
    let presorted = Presorted::new(&cols);
    let base_score = y.iter().sum::<f64>() / n as f64;
    let grow_params = GrowParams {
        max_depth: Some(params.max_depth),
        min_samples_leaf: params.min_samples_leaf as f64,
        mtry: cols.len(),
        objective: Objective::Newton {
            lambda: params.reg_lambda,
            gamma: params.min_gain,
        },
        candidates: match params.candidates {
            SplitCandidates::Exact => None,
            SplitCandidates::Quantile { max_bins } => {
                Some(quantile_candidates(&cols, &presorted, max_bins))
            }
        },
    };
    let mut pred = vec![base_score; n];
    let h = vec![1.0; n];
    let mut trees = Vec::with_capacity(params.rounds);
    let mut trace = Vec::with_capacity(params.rounds);
    let mut rng = rng_from_seed(derive_seed(params.seed, "gbt"));
    let m = ((params.subsample * n as f64).round() as usize).clamp(1, n);
    let mut w = vec![1.0; n];
    for _ in 0..params.rounds {
        let g: Vec<f64> = pred.iter().zip(y).map(|(p, v)| p - v).collect();
        if m < n {
            w.iter_mut().for_each(|v| *v = 0.0);
            for i in sample(&mut rng, n, m) {
                w[i] = 1.0;
            }
        }
        let tree = grow(&cols, &presorted, &g, &h, &w, &grow_params, &mut rng);
        for (i, p) in pred.iter_mut().enumerate() {
            *p += params.learning_rate * tree.predict_row(x.row(i));
        }
        let r = rmse(&pred, y);
        if m == n {
            // each Newton step with η ≤ 1 can only shrink in-leaf residual sums
            debug_assert!(
                trace.last().is_none_or(|&prev: &f64| r <= prev * (1.0 + 1e-9) + 1e-12),
                "training RMSE increased"
            );
        }
        trace.push(r);
        trees.push(tree);
    }
    Ok(GbtModel {
        params: params.clone(),
        base_score,
        n_features: cols.len(),
        trees,
        train_rmse: trace,
    })
}

impl GbtModel {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let eta = self.params.learning_rate;
        self.trees
            .iter()
            .fold(self.base_score, |acc, t| acc + eta * t.predict_row(x))
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows()).map(|i| self.predict_row(x.row(i))).collect()
    }

    /// Summed split gain per feature over all rounds.
    pub fn importances(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.n_features];
        for t in &self.trees {
            for (a, v) in total.iter_mut().zip(t.importances(self.n_features)) {
                *a += v;
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step() -> (Matrix, Vec<f64>) {
        (
            Matrix::from_vec(4, 1, vec![0.0, 1.0, 2.0, 3.0]),
            vec![0.0, 0.0, 10.0, 10.0],
        )
    }

    fn params(rounds: usize, depth: usize, lambda: f64) -> GbtParams {
        GbtParams {
            rounds,
            learning_rate: 1.0,
            reg_lambda: lambda,
            min_gain: 0.0,
            max_depth: depth,
            min_samples_leaf: 1,
            subsample: 1.0,
            candidates: SplitCandidates::Exact,
            seed: 0,
        }
    }

    #[test]
    fn stump_recovers_step() {
        let (x, y) = step();
        let m = fit_gbt(&x, &y, &params(1, 1, 0.0)).unwrap();
        assert_eq!(m.base_score, 5.0);
        assert_eq!(m.predict(&x), y);
    }

    #[test]
    fn forced_leaf_predicts_mean() {
        let (x, y) = step();
        let m = fit_gbt(&x, &y, &params(1, 0, 0.0)).unwrap();
        assert!(m.predict(&x).iter().all(|&p| p == 5.0));
    }

    #[test]
    fn heavy_regularization_keeps_base() {
        let (x, y) = step();
        let m = fit_gbt(&x, &y, &params(3, 2, 1e12)).unwrap();
        assert!(m.predict(&x).iter().all(|&p| (p - 5.0).abs() < 1e-9));
    }

    #[test]
    fn bad_learning_rate_rejected() {
        let (x, y) = step();
        let mut p = params(1, 1, 0.0);
        p.learning_rate = 1.5;
        assert!(fit_gbt(&x, &y, &p).is_err());
    }

    #[test]
    fn quantile_mode_trains() {
        let rows: Vec<[f64; 1]> = (0..500).map(|i| [i as f64]).collect();
        let y: Vec<f64> = (0..500).map(|i| ((i / 50) as f64).powi(2)).collect();
        let mut p = params(20, 3, 1.0);
        p.learning_rate = 0.3;
        p.candidates = SplitCandidates::Quantile { max_bins: 16 };
        let m = fit_gbt(&Matrix::from_rows(&rows), &y, &p).unwrap();
        assert!(m.train_rmse.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(m.train_rmse.last().unwrap() < &m.train_rmse[0]);
    }
}
