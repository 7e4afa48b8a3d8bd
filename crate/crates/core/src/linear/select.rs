use log::warn;

use super::ols::intercept_only;
use super::{fit_lasso, fit_ols, LassoOptions, LinearFit};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Backward elimination: refits OLS and drops the feature with the largest
/// p-value while any p-value exceeds `p_threshold`. Returns an intercept-only
/// fit (flagged) when every feature goes.
pub fn backward_select(
    x: &Matrix,
    y: &[f64],
    names: &[String],
    p_threshold: f64,
) -> Result<LinearFit> {
    if !(p_threshold > 0.0 && p_threshold <= 1.0) {
        return Err(Error::invalid(format!(
            "p-value threshold must lie in (0, 1], got {p_threshold}"
        )));
    }
    let mut active: Vec<usize> = (0..names.len()).collect();
    loop {
        if active.is_empty() {
            warn!("backward selection removed every feature; using an intercept-only fit");
            let mean = y.iter().sum::<f64>() / y.len() as f64;
            return Ok(intercept_only(y, mean));
        }
        let sub_names: Vec<String> = active.iter().map(|&j| names[j].clone()).collect();
        let fit = fit_ols(&x.select_columns(&active), y, &sub_names)?;
        let (worst, p) = fit
            .p_values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (j, &p)| {
                if p > acc.1 {
                    (j, p)
                } else {
                    acc
                }
            });
        if p <= p_threshold {
            return Ok(fit);
        }
        active.remove(worst);
    }
}

/// Features ordered by the absolute standardized lasso coefficient at `λ`,
/// largest first; zero coefficients are left out.
pub fn lasso_ranking(
    x: &Matrix,
    y: &[f64],
    names: &[String],
    lambda: f64,
) -> Result<Vec<String>> {
    let (_, trace) = fit_lasso(x, y, names, lambda, &LassoOptions::default())?;
    let mut order: Vec<usize> = (0..names.len())
        .filter(|&j| trace.beta_standardized[j] != 0.0)
        .collect();
    order.sort_by(|&a, &b| {
        trace.beta_standardized[b]
            .abs()
            .total_cmp(&trace.beta_standardized[a].abs())
            .then(a.cmp(&b))
    });
    Ok(order.into_iter().map(|j| names[j].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;
    use rand::Rng as _;

    #[test]
    fn threshold_one_keeps_everything() {
        let mut rng = rng_for(1, "bs");
        let rows: Vec<[f64; 3]> = (0..200)
            .map(|_| [rng.random(), rng.random(), rng.random()])
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0] + rng.random::<f64>()).collect();
        let names: Vec<String> = vec!["a".into(), "b".into(), "c".into()];
        let fit = backward_select(&Matrix::from_rows(&rows), &y, &names, 1.0).unwrap();
        assert_eq!(fit.selected_features, names);
    }

    #[test]
    fn pure_noise_reduces_to_intercept() {
        let mut rng = rng_for(2, "bs");
        let rows: Vec<[f64; 2]> = (0..100).map(|_| [rng.random(), rng.random()]).collect();
        let y: Vec<f64> = (0..100).map(|_| rng.random()).collect();
        let names: Vec<String> = vec!["a".into(), "b".into()];
        let fit = backward_select(&Matrix::from_rows(&rows), &y, &names, 1e-6).unwrap();
        assert!(fit.intercept_only);
        assert!(fit.selected_features.is_empty());
    }
}
