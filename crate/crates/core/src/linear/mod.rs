//! Linear regressors: least squares with backward selection, the lasso,
//! and a random-intercept mixed model.

mod lasso;
mod lme;
mod ols;
mod select;

pub use lasso::{fit_lasso, kkt_violation, lambda_max, LassoOptions, LassoTrace};
pub use lme::{fit_lme, LmeFit, LmeOptions};
pub use ols::fit_ols;
pub use select::{backward_select, lasso_ranking};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// A fitted linear model on the original feature scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub selected_features: Vec<String>,
    pub intercept: f64,
    /// One coefficient per selected feature.
    pub coefficients: Vec<f64>,
    pub residual_variance: f64,
    /// Covariance of (intercept, coefficients...); empty for the lasso.
    pub covariance: Vec<Vec<f64>>,
    /// Two-sided p-values per selected feature; empty for the lasso.
    pub p_values: Vec<f64>,
    pub n: usize,
    /// Parameters including the intercept.
    pub p: usize,
    pub rss: f64,
    /// Training standard deviation of each selected feature.
    pub feature_sds: Vec<f64>,
    /// Set when backward selection removed every feature.
    #[serde(default)]
    pub intercept_only: bool,
}

impl LinearFit {
    /// Prediction for a row holding the selected features in order.
    pub fn predict_row(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.coefficients.len() {
            return Err(Error::SchemaMismatch(format!(
                "expected {} features, got {}",
                self.coefficients.len(),
                x.len()
            )));
        }
        Ok(self.intercept + dot(&self.coefficients, x))
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        (0..x.rows()).map(|i| self.predict_row(x.row(i))).collect()
    }

    /// Degrees of freedom of the residual variance.
    pub fn dof(&self) -> f64 {
        (self.n - self.p) as f64
    }

    /// Variance of the fitted mean at `x` (selected features in order).
    pub fn mean_variance(&self, x: &[f64]) -> f64 {
        if self.covariance.is_empty() {
            return f64::NAN;
        }
        let mut z = Vec::with_capacity(x.len() + 1);
        z.push(1.0);
        z.extend_from_slice(x);
        let mut v = 0.0;
        for (i, zi) in z.iter().enumerate() {
            for (j, zj) in z.iter().enumerate() {
                v += zi * self.covariance[i][j] * zj;
            }
        }
        v.max(0.0)
    }
}

/// `intercept + β·x`, the prediction of any linear fit.
pub fn predict_linear(fit: &LinearFit, x: &[f64]) -> Result<f64> {
    fit.predict_row(x)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Column means and (population) standard deviations of a design matrix.
#[derive(Debug, Clone)]
pub(crate) struct Standardizer {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &Matrix, names: &[String]) -> Result<Self> {
        let (n, p) = (x.rows(), x.cols());
        let mut means = vec![0.0; p];
        for i in 0..n {
            for (m, v) in means.iter_mut().zip(x.row(i)) {
                *m += v;
            }
        }
        for m in means.iter_mut() {
            *m /= n as f64;
        }
        let mut sds = vec![0.0; p];
        for i in 0..n {
            for ((s, v), m) in sds.iter_mut().zip(x.row(i)).zip(&means) {
                *s += (v - m) * (v - m);
            }
        }
        for s in sds.iter_mut() {
            *s = (*s / n as f64).sqrt();
        }
        let constant: Vec<String> = sds
            .iter()
            .zip(names)
            .filter(|(s, _)| !(**s > 1e-12))
            .map(|(_, n)| format!("{n} (constant)"))
            .collect();
        if !constant.is_empty() {
            return Err(Error::RankDeficient { columns: constant });
        }
        Ok(Standardizer { means, sds })
    }

    /// Standardized copy, column-major (one Vec per column).
    pub fn transform_columns(&self, x: &Matrix) -> Vec<Vec<f64>> {
        (0..x.cols())
            .map(|j| {
                (0..x.rows())
                    .map(|i| (x.get(i, j) - self.means[j]) / self.sds[j])
                    .collect()
            })
            .collect()
    }
}

/// Finds columns that are (numerically) linear combinations of earlier ones
/// by Gram–Schmidt on standardized columns. Each entry names the dependent
/// column and the earlier columns it is built from.
pub(crate) fn collinear_columns(cols: &[Vec<f64>], names: &[String]) -> Vec<String> {
    let n = cols.first().map_or(0, |c| c.len()) as f64;
    let mut basis: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut out = Vec::new();
    for (j, c) in cols.iter().enumerate() {
        let mut r = c.clone();
        let mut involved = Vec::new();
        for (k, q) in &basis {
            let proj = dot(&r, q);
            if proj.abs() > 1e-6 * n.sqrt() {
                involved.push(names[*k].clone());
            }
            for (ri, qi) in r.iter_mut().zip(q) {
                *ri -= proj * qi;
            }
        }
        let norm = dot(&r, &r).sqrt();
        if norm < 1e-7 * n.sqrt() {
            out.push(format!("{} ~ [{}]", names[j], involved.join(", ")));
        } else {
            for v in r.iter_mut() {
                *v /= norm;
            }
            basis.push((j, r));
        }
    }
    out
}
