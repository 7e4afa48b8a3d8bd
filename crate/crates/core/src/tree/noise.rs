use log::warn;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub n_continuous: usize,
    pub n_discrete: usize,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            n_continuous: 10,
            n_discrete: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSelection {
    pub selected: Vec<String>,
    /// Importance of every real feature, in input order.
    pub importances: Vec<(String, f64)>,
    pub continuous_threshold: f64,
    pub discrete_threshold: f64,
    /// Nothing beat the noise.
    pub empty: bool,
}

/// Level counts of the discrete noise columns, cycled.
const DISCRETE_LEVELS: [u32; 8] = [2, 3, 4, 6, 8, 12, 24, 48];

/// Appends synthetic noise columns (standard normal and uniform integer),
/// fits a model through `importances_of`, and keeps each real feature whose
/// importance beats every noise column of its own kind.
pub fn select_by_noise<F>(
    x: &Matrix,
    y: &[f64],
    names: &[String],
    discrete: &[bool],
    cfg: &NoiseConfig,
    importances_of: F,
) -> Result<NoiseSelection>
where
    F: Fn(&Matrix, &[f64]) -> Result<Vec<f64>>,
{
    if cfg.n_continuous == 0 || cfg.n_discrete == 0 {
        return Err(Error::invalid("noise selection needs at least one column of each kind"));
    }
    if names.len() != x.cols() || discrete.len() != x.cols() {
        return Err(Error::invalid("feature names and kinds disagree with the design"));
    }
    let n = x.rows();
    let mut rng = rng_for(cfg.seed, "noise-selection");
    let mut extra = Vec::with_capacity(cfg.n_continuous + cfg.n_discrete);
    for _ in 0..cfg.n_continuous {
        extra.push((0..n).map(|_| StandardNormal.sample(&mut rng)).collect::<Vec<f64>>());
    }
    for j in 0..cfg.n_discrete {
        let levels = DISCRETE_LEVELS[j % DISCRETE_LEVELS.len()];
        extra.push((0..n).map(|_| rng.random_range(0..levels) as f64).collect());
    }
    let augmented = x.with_extra_columns(&extra);
    let imp = importances_of(&augmented, y)?;
    let p = x.cols();
    let max_of = |r: std::ops::Range<usize>| imp[r].iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let continuous_threshold = max_of(p..p + cfg.n_continuous);
    let discrete_threshold = max_of(p + cfg.n_continuous..p + cfg.n_continuous + cfg.n_discrete);
    let selected: Vec<String> = (0..p)
        .filter(|&j| {
            let t = if discrete[j] {
                discrete_threshold
            } else {
                continuous_threshold
            };
            imp[j] > t
        })
        .map(|j| names[j].clone())
        .collect();
    let empty = selected.is_empty();
    if empty {
        warn!("no feature beat the noise columns; selection is empty");
    }
    Ok(NoiseSelection {
        selected,
        importances: names.iter().cloned().zip(imp[..p].iter().copied()).collect(),
        continuous_threshold,
        discrete_threshold,
        empty,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{fit_tree, TreeParams};

    #[test]
    fn duplicated_label_survives_and_noise_does_not() {
        let mut rng = rng_for(5, "noise-test");
        let n = 400;
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 10.0).collect();
        let rows: Vec<[f64; 2]> = y.iter().map(|&v| [v, rng.random()]).collect();
        let names: Vec<String> = vec!["label_copy".into(), "junk".into()];
        let fit = |x: &Matrix, y: &[f64]| -> Result<Vec<f64>> {
            let t = fit_tree(x, y, &TreeParams { max_depth: Some(6), min_samples_leaf: 5 })?;
            Ok(t.importances(x.cols()))
        };
        let sel = select_by_noise(
            &Matrix::from_rows(&rows),
            &y,
            &names,
            &[false, false],
            &NoiseConfig::default(),
            fit,
        )
        .unwrap();
        assert_eq!(sel.selected, vec!["label_copy".to_string()]);
    }
}
