use nalgebra::{DMatrix, DVector};

use super::{collinear_columns, dot, LinearFit, Standardizer};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::stats::student_t_two_sided_p;

/// Ordinary least squares with an intercept, solved by QR on centered and
/// scaled columns. Fails with the names of collinear columns when the design
/// is rank deficient.
pub fn fit_ols(x: &Matrix, y: &[f64], names: &[String]) -> Result<LinearFit> {
    let (n, p) = (x.rows(), x.cols());
    if y.len() != n || names.len() != p {
        return Err(Error::invalid("design, labels and names disagree in size"));
    }
    if n <= p + 1 {
        return Err(Error::invalid(format!(
            "need more rows than parameters: n = {n}, p = {}",
            p + 1
        )));
    }
    let y_mean = y.iter().sum::<f64>() / n as f64;
    if p == 0 {
        return Ok(intercept_only(y, y_mean));
    }
    let st = Standardizer::fit(x, names)?;
    let cols = st.transform_columns(x);
    let z = DMatrix::from_iterator(n, p, cols.iter().flatten().copied());
    let qr = z.qr();
    let r = qr.r();
    let tol = 1e-7 * (n as f64).sqrt();
    if (0..p).any(|j| r[(j, j)].abs() < tol) {
        let mut columns = collinear_columns(&cols, names);
        if columns.is_empty() {
            columns = (0..p)
                .filter(|&j| r[(j, j)].abs() < tol)
                .map(|j| names[j].clone())
                .collect();
        }
        return Err(Error::RankDeficient { columns });
    }
    let mut qty = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    qr.q_tr_mul(&mut qty);
    let rhs = DVector::from_iterator(p, qty.iter().take(p).copied());
    let beta_z = r
        .solve_upper_triangular(&rhs)
        .ok_or_else(|| Error::RankDeficient {
            columns: names.to_vec(),
        })?;

    let coefficients: Vec<f64> = (0..p).map(|j| beta_z[j] / st.sds[j]).collect();
    let intercept = y_mean - dot(&coefficients, &st.means);
    let rss: f64 = (0..n)
        .map(|i| {
            let e = y[i] - intercept - dot(&coefficients, x.row(i));
            e * e
        })
        .sum();
    let dof = (n - p - 1) as f64;
    let s2 = rss / dof;

    // (ZᵀZ)⁻¹ = R⁻¹ R⁻ᵀ on the standardized scale
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .expect("triangular factor is invertible");
    let zz_inv = &r_inv * r_inv.transpose();
    let mut cov_b = vec![vec![0.0; p]; p];
    for a in 0..p {
        for b in 0..p {
            cov_b[a][b] = s2 * zz_inv[(a, b)] / (st.sds[a] * st.sds[b]);
        }
    }
    // intercept = ȳ − x̄ᵀβ with ȳ uncorrelated with β under a centered design
    let cov_b_mean: Vec<f64> = (0..p).map(|a| dot(&cov_b[a], &st.means)).collect();
    let var_intercept = s2 / n as f64 + dot(&st.means, &cov_b_mean);
    let mut covariance = vec![vec![0.0; p + 1]; p + 1];
    covariance[0][0] = var_intercept;
    for a in 0..p {
        covariance[0][a + 1] = -cov_b_mean[a];
        covariance[a + 1][0] = -cov_b_mean[a];
        for b in 0..p {
            covariance[a + 1][b + 1] = cov_b[a][b];
        }
    }
    let p_values = (0..p)
        .map(|j| {
            let se = cov_b[j][j].sqrt();
            if se > 0.0 {
                student_t_two_sided_p(coefficients[j] / se, dof)
            } else {
                0.0
            }
        })
        .collect();
    Ok(LinearFit {
        selected_features: names.to_vec(),
        intercept,
        coefficients,
        residual_variance: s2,
        covariance,
        p_values,
        n,
        p: p + 1,
        rss,
        feature_sds: st.sds,
        intercept_only: false,
    })
}

pub(crate) fn intercept_only(y: &[f64], y_mean: f64) -> LinearFit {
    let n = y.len();
    let rss: f64 = y.iter().map(|v| (v - y_mean).powi(2)).sum();
    let s2 = rss / (n as f64 - 1.0);
    LinearFit {
        selected_features: Vec::new(),
        intercept: y_mean,
        coefficients: Vec::new(),
        residual_variance: s2,
        covariance: vec![vec![s2 / n as f64]],
        p_values: Vec::new(),
        n,
        p: 1,
        rss,
        feature_sds: Vec::new(),
        intercept_only: true,
    }
}
