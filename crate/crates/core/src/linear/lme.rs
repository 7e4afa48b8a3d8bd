use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{dot, Standardizer};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmeOptions {
    /// Stop when the log-likelihood gains less than this in one iteration.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Holds the group variance at this value instead of estimating it.
    pub fixed_tau2: Option<f64>,
}

impl Default for LmeOptions {
    fn default() -> Self {
        LmeOptions {
            tolerance: 1e-8,
            max_iterations: 5_000,
            fixed_tau2: None,
        }
    }
}

/// Random-intercept model `y = Xβ + b_g + ε`, `b_g ~ N(0, τ²)`, `ε ~ N(0, σ²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmeFit {
    pub features: Vec<String>,
    pub intercept: f64,
    pub fixed_effects: Vec<f64>,
    /// Covariance of (intercept, fixed effects...).
    pub covariance: Vec<Vec<f64>>,
    pub group_key: String,
    /// Posterior mean of each group's intercept.
    pub random_intercepts: BTreeMap<i64, f64>,
    pub sigma2: f64,
    pub tau2: f64,
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
    pub feature_sds: Vec<f64>,
    pub n: usize,
}

impl LmeFit {
    /// Fixed effects plus the group's intercept (zero for unseen groups).
    pub fn predict_row(&self, x: &[f64], group: f64) -> f64 {
        self.intercept
            + dot(&self.fixed_effects, x)
            + self
                .random_intercepts
                .get(&(group as i64))
                .copied()
                .unwrap_or(0.0)
    }
}

struct GroupStats {
    n: f64,
    /// Σ x̃ (x̃ = [1, z]) per group
    sx: DVector<f64>,
    /// Σ x̃ x̃ᵀ
    sxx: DMatrix<f64>,
    sxy: DVector<f64>,
    sy: f64,
    syy: f64,
}

/// Fits the random-intercept model by alternating generalized least squares
/// for β with EM updates of (σ², τ²), until the marginal log-likelihood
/// improves by less than `tolerance`.
pub fn fit_lme(
    x: &Matrix,
    y: &[f64],
    groups: &[f64],
    names: &[String],
    group_key: &str,
    opts: &LmeOptions,
) -> Result<LmeFit> {
    let (n, p) = (x.rows(), x.cols());
    if y.len() != n || groups.len() != n || names.len() != p {
        return Err(Error::invalid("design, labels, groups and names disagree in size"));
    }
    let st = Standardizer::fit(x, names)?;
    let k = p + 1;
    let mut by_group: BTreeMap<i64, GroupStats> = BTreeMap::new();
    for i in 0..n {
        let mut xt = DVector::zeros(k);
        xt[0] = 1.0;
        for j in 0..p {
            xt[j + 1] = (x.get(i, j) - st.means[j]) / st.sds[j];
        }
        let g = by_group.entry(groups[i] as i64).or_insert_with(|| GroupStats {
            n: 0.0,
            sx: DVector::zeros(k),
            sxx: DMatrix::zeros(k, k),
            sxy: DVector::zeros(k),
            sy: 0.0,
            syy: 0.0,
        });
        g.n += 1.0;
        g.sx += &xt;
        g.sxx.ger(1.0, &xt, &xt, 1.0);
        g.sxy.axpy(y[i], &xt, 1.0);
        g.sy += y[i];
        g.syy += y[i] * y[i];
    }
    if by_group.len() < 2 {
        return Err(Error::invalid(
            "mixed model needs at least two groups; fit ordinary least squares instead",
        ));
    }
    let groups_v: Vec<&GroupStats> = by_group.values().collect();

    // β for given variances; returns (β, (Σ X̃ᵀV⁻¹X̃)⁻¹)
    let gls = |sigma2: f64, tau2: f64| -> Result<(DVector<f64>, DMatrix<f64>)> {
        let mut a = DMatrix::<f64>::zeros(k, k);
        let mut b = DVector::<f64>::zeros(k);
        for g in &groups_v {
            let w = tau2 / (sigma2 + g.n * tau2);
            a += &g.sxx - (&g.sx * g.sx.transpose()) * w;
            b += &g.sxy - &g.sx * (g.sy * w);
        }
        a /= sigma2;
        b /= sigma2;
        let chol = a.clone().cholesky().ok_or_else(|| Error::RankDeficient {
            columns: super::collinear_columns(&st.transform_columns(x), names),
        })?;
        Ok((chol.solve(&b), chol.inverse()))
    };
    // Σ r, Σ r² per group for r = y − X̃β
    let residual_sums = |g: &GroupStats, beta: &DVector<f64>| -> (f64, f64) {
        let sr = g.sy - g.sx.dot(beta);
        let srr = g.syy - 2.0 * g.sxy.dot(beta) + beta.dot(&(&g.sxx * beta));
        (sr, srr.max(0.0))
    };
    let log_lik = |beta: &DVector<f64>, sigma2: f64, tau2: f64| -> f64 {
        let mut ll = 0.0;
        for g in &groups_v {
            let (sr, srr) = residual_sums(g, beta);
            let w = tau2 / (sigma2 + g.n * tau2);
            let quad = (srr - w * sr * sr) / sigma2;
            let logdet = (g.n - 1.0) * sigma2.ln() + (sigma2 + g.n * tau2).ln();
            ll += -0.5 * (g.n * (2.0 * std::f64::consts::PI).ln() + logdet + quad);
        }
        ll
    };

    let nf = n as f64;
    let (mut beta, _) = gls(1.0, 0.0)?;
    let mut sigma2 = groups_v
        .iter()
        .map(|g| residual_sums(g, &beta).1)
        .sum::<f64>()
        / nf;
    if !(sigma2 > 0.0) {
        sigma2 = 1e-12;
    }
    let mut tau2 = opts.fixed_tau2.unwrap_or(sigma2 * 0.1);
    let mut trace = Vec::new();
    let mut iterations = 0;
    loop {
        iterations += 1;
        beta = gls(sigma2, tau2)?.0;
        // EM step for the variance components
        let mut tau_acc = 0.0;
        let mut sig_acc = 0.0;
        for g in &groups_v {
            let (sr, srr) = residual_sums(g, &beta);
            let denom = sigma2 + g.n * tau2;
            let b_hat = tau2 * sr / denom;
            let v = sigma2 * tau2 / denom;
            tau_acc += b_hat * b_hat + v;
            sig_acc += srr - 2.0 * b_hat * sr + g.n * b_hat * b_hat + g.n * v;
        }
        sigma2 = (sig_acc / nf).max(1e-300);
        if opts.fixed_tau2.is_none() {
            tau2 = tau_acc / groups_v.len() as f64;
        }
        let ll = log_lik(&beta, sigma2, tau2);
        let done = trace
            .last()
            .is_some_and(|prev: &f64| (ll - prev).abs() < opts.tolerance);
        trace.push(ll);
        if done || iterations >= opts.max_iterations {
            break;
        }
    }
    let (beta, cov) = gls(sigma2, tau2)?;

    let random_intercepts = by_group
        .iter()
        .map(|(&key, g)| {
            let (sr, _) = residual_sums(g, &beta);
            (key, tau2 * sr / (sigma2 + g.n * tau2))
        })
        .collect();

    // back to the original feature scale: x̃_j = (x_j − m_j)/s_j
    let fixed_effects: Vec<f64> = (0..p).map(|j| beta[j + 1] / st.sds[j]).collect();
    let intercept = beta[0] - dot(&fixed_effects, &st.means);
    let mut t = DMatrix::<f64>::zeros(k, k);
    t[(0, 0)] = 1.0;
    for j in 0..p {
        t[(0, j + 1)] = -st.means[j] / st.sds[j];
        t[(j + 1, j + 1)] = 1.0 / st.sds[j];
    }
    let cov_orig = &t * cov * t.transpose();
    let covariance = (0..k)
        .map(|a| (0..k).map(|b| cov_orig[(a, b)]).collect())
        .collect();
    Ok(LmeFit {
        features: names.to_vec(),
        intercept,
        fixed_effects,
        covariance,
        group_key: group_key.to_string(),
        random_intercepts,
        sigma2,
        tau2,
        log_likelihood: trace,
        iterations,
        feature_sds: st.sds,
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::fit_ols;
    use crate::seed::rng_for;
    use rand::Rng as _;
    use rand_distr::{Distribution, Normal};

    fn generate(n: usize, offsets: &[f64], seed: u64) -> (Matrix, Vec<f64>, Vec<f64>) {
        let mut rng = rng_for(seed, "lme");
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut rows = Vec::new();
        let mut y = Vec::new();
        let mut g = Vec::new();
        for _ in 0..n {
            let a: f64 = rng.random_range(-1.0..1.0);
            let b: f64 = rng.random_range(0.0..10.0);
            let grp = rng.random_range(0..offsets.len());
            rows.push([a, b]);
            y.push(1.0 + 2.0 * a - 0.5 * b + offsets[grp] + noise.sample(&mut rng));
            g.push(grp as f64);
        }
        (Matrix::from_rows(&rows), y, g)
    }

    fn names() -> Vec<String> {
        vec!["a".into(), "b".into()]
    }

    #[test]
    fn single_group_rejected() {
        let (x, y, _) = generate(100, &[0.0], 1);
        let g = vec![3.0; 100];
        assert!(fit_lme(&x, &y, &g, &names(), "g", &LmeOptions::default()).is_err());
    }

    #[test]
    fn likelihood_never_decreases() {
        let (x, y, g) = generate(2000, &[-2.0, 0.0, 1.0, 3.0], 2);
        let fit = fit_lme(&x, &y, &g, &names(), "g", &LmeOptions::default()).unwrap();
        assert!(fit
            .log_likelihood
            .windows(2)
            .all(|w| w[1] >= w[0] - 1e-9 * w[0].abs()));
        assert!(fit.tau2 >= 0.0);
    }

    #[test]
    fn zero_group_variance_collapses_to_ols() {
        let (x, y, g) = generate(500, &[0.0, 0.0, 0.0], 3);
        let opts = LmeOptions {
            fixed_tau2: Some(0.0),
            ..LmeOptions::default()
        };
        let fit = fit_lme(&x, &y, &g, &names(), "g", &opts).unwrap();
        let ols = fit_ols(&x, &y, &names()).unwrap();
        for i in 0..x.rows() {
            let a = fit.predict_row(x.row(i), g[i]);
            let b = ols.predict_row(x.row(i)).unwrap();
            assert!((a - b).abs() < 1e-6);
        }
    }
}
