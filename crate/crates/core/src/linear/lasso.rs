use serde::{Deserialize, Serialize};

use super::{dot, LinearFit, Standardizer};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoOptions {
    /// Stop when no coefficient moves more than this in a sweep.
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions {
            tolerance: 1e-7,
            max_sweeps: 10_000,
        }
    }
}

/// Objective value after every coordinate-descent sweep, plus the solution
/// on the standardized scale.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoTrace {
    pub objective: Vec<f64>,
    pub sweeps: usize,
    pub beta_standardized: Vec<f64>,
    /// `Zᵀy / n` and `ZᵀZ / n` on the standardized scale, kept for KKT checks.
    pub zty: Vec<f64>,
    pub gram: Vec<Vec<f64>>,
    pub lambda: f64,
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

struct Problem {
    st: Standardizer,
    gram: Vec<Vec<f64>>,
    zty: Vec<f64>,
    yy: f64,
    y_mean: f64,
    n: usize,
}

fn prepare(x: &Matrix, y: &[f64], names: &[String]) -> Result<Problem> {
    let (n, p) = (x.rows(), x.cols());
    if y.len() != n || names.len() != p {
        return Err(Error::invalid("design, labels and names disagree in size"));
    }
    if n == 0 {
        return Err(Error::invalid("empty training set"));
    }
    let st = Standardizer::fit(x, names)?;
    let cols = st.transform_columns(x);
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let nf = n as f64;
    let mut gram = vec![vec![0.0; p]; p];
    for a in 0..p {
        for b in a..p {
            let g = dot(&cols[a], &cols[b]) / nf;
            gram[a][b] = g;
            gram[b][a] = g;
        }
    }
    let zty = cols.iter().map(|c| dot(c, &yc) / nf).collect();
    let yy = dot(&yc, &yc) / nf;
    Ok(Problem {
        st,
        gram,
        zty,
        yy,
        y_mean,
        n,
    })
}

/// `(1/2n)‖y − Zβ‖² + λ‖β‖₁` written through the Gram matrix.
fn objective(pr: &Problem, beta: &[f64], lambda: f64) -> f64 {
    let mut quad = 0.0;
    for (a, ba) in beta.iter().enumerate() {
        if *ba != 0.0 {
            quad += ba * dot(&pr.gram[a], beta);
        }
    }
    0.5 * pr.yy - dot(&pr.zty, beta) + 0.5 * quad + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
}

/// Smallest λ at which every slope is zero: `max_j |z_jᵀy| / n`.
pub fn lambda_max(x: &Matrix, y: &[f64], names: &[String]) -> Result<f64> {
    let pr = prepare(x, y, names)?;
    Ok(pr.zty.iter().fold(0.0, |m, v| m.max(v.abs())))
}

/// Lasso by cyclic coordinate descent on standardized features with an
/// unpenalized intercept. `λ` applies to the standardized problem
/// `(1/2n)‖y − ȳ − Zβ‖² + λ‖β‖₁`. Only features with nonzero coefficients
/// are kept in the returned fit.
pub fn fit_lasso(
    x: &Matrix,
    y: &[f64],
    names: &[String],
    lambda: f64,
    opts: &LassoOptions,
) -> Result<(LinearFit, LassoTrace)> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lasso λ must be >= 0, got {lambda}")));
    }
    let pr = prepare(x, y, names)?;
    let p = names.len();
    let mut beta = vec![0.0; p];
    // (ZᵀZ/n)·β maintained incrementally
    let mut g_beta = vec![0.0; p];
    let mut trace = vec![objective(&pr, &beta, lambda)];
    let mut sweeps = 0;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            let gjj = pr.gram[j][j];
            let rho = pr.zty[j] - g_beta[j] + gjj * beta[j];
            let new = soft_threshold(rho, lambda) / gjj;
            let delta = new - beta[j];
            if delta != 0.0 {
                for (k, gb) in g_beta.iter_mut().enumerate() {
                    *gb += pr.gram[k][j] * delta;
                }
                beta[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        let obj = objective(&pr, &beta, lambda);
        debug_assert!(
            obj <= trace.last().unwrap() + 1e-12 * trace.last().unwrap().abs().max(1.0),
            "lasso objective increased"
        );
        trace.push(obj);
        if max_change < opts.tolerance {
            break;
        }
    }

    let selected: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
    let coefficients: Vec<f64> = selected.iter().map(|&j| beta[j] / pr.st.sds[j]).collect();
    let means: Vec<f64> = selected.iter().map(|&j| pr.st.means[j]).collect();
    let intercept = pr.y_mean - dot(&coefficients, &means);
    let rss: f64 = (0..pr.n)
        .map(|i| {
            let row = x.row(i);
            let fx: f64 = selected
                .iter()
                .zip(&coefficients)
                .map(|(&j, b)| b * row[j])
                .sum();
            (y[i] - intercept - fx).powi(2)
        })
        .sum();
    let k = selected.len() + 1;
    let fit = LinearFit {
        selected_features: selected.iter().map(|&j| names[j].clone()).collect(),
        intercept,
        coefficients,
        residual_variance: rss / (pr.n as f64 - k as f64).max(1.0),
        covariance: Vec::new(),
        p_values: Vec::new(),
        n: pr.n,
        p: k,
        rss,
        feature_sds: selected.iter().map(|&j| pr.st.sds[j]).collect(),
        intercept_only: selected.is_empty(),
    };
    let trace = LassoTrace {
        objective: trace,
        sweeps,
        beta_standardized: beta,
        zty: pr.zty,
        gram: pr.gram,
        lambda,
    };
    Ok((fit, trace))
}

/// Largest violation of the lasso optimality conditions on the standardized
/// scale: `|z_jᵀr/n| ≤ λ` where `β_j = 0`, and `z_jᵀr/n = λ·sign(β_j)` otherwise.
pub fn kkt_violation(trace: &LassoTrace) -> f64 {
    let beta = &trace.beta_standardized;
    let mut worst: f64 = 0.0;
    for j in 0..beta.len() {
        let grad = trace.zty[j] - dot(&trace.gram[j], beta);
        let v = if beta[j] == 0.0 {
            (grad.abs() - trace.lambda).max(0.0)
        } else {
            (grad - trace.lambda * beta[j].signum()).abs()
        };
        worst = worst.max(v);
    }
    worst
}
