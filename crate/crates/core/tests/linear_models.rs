mod common;

use common::{gaussian, names, normal_equations, rng};
use proptest::prelude::*;
use rand::Rng;
use scoutcast::linear::{
    backward_select, fit_lasso, fit_lme, fit_ols, kkt_violation, lambda_max, predict_linear, LassoOptions,
    LmeOptions,
};
use scoutcast::stats::student_t_two_sided_p;
use scoutcast::{Error, Matrix};

fn random_problem(n: usize, p: usize, seed: u64) -> (Matrix, Vec<f64>) {
    let mut r = rng(seed);
    let beta: Vec<f64> = (0..p).map(|_| r.random_range(-3.0..3.0)).collect();
    let mut data = Vec::with_capacity(n * p);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..p).map(|j| gaussian(&mut r) * (1.0 + j as f64) + j as f64).collect();
        y.push(1.5 + row.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + gaussian(&mut r));
        data.extend(row);
    }
    (Matrix::from_vec(n, p, data), y)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

#[test]
fn ols_agrees_with_normal_equations() {
    for seed in 0..50 {
        let (x, y) = random_problem(200, 10, seed);
        let fit = fit_ols(&x, &y, &names(10)).unwrap();
        let (b0, b) = normal_equations(&x, &y);
        assert!(rel_err(fit.intercept, b0) < 1e-8, "seed {seed}");
        for j in 0..10 {
            assert!(rel_err(fit.coefficients[j], b[j]) < 1e-8, "seed {seed} coef {j}");
        }
    }
}

#[test]
fn ols_hand_solved_line() {
    let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]);
    let fit = fit_ols(&x, &[1.0, 3.0, 5.0, 7.0], &names(1)).unwrap();
    assert!((fit.intercept - 1.0).abs() < 1e-12);
    assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
    assert!(fit.rss < 1e-20);
    assert_eq!(fit.p, 2);
}

#[test]
fn ols_rejects_duplicated_column() {
    let (x, y) = random_problem(60, 3, 5);
    let mut cols = x.columns();
    cols.push(cols[1].clone());
    let rows: Vec<Vec<f64>> = (0..60).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
    match fit_ols(&Matrix::from_rows(&rows), &y, &names(4)) {
        Err(Error::RankDeficient { columns }) => {
            let joined = columns.join(" ");
            assert!(joined.contains("x3") && joined.contains("x1"), "{joined}");
        }
        other => panic!("expected rank deficiency, got {other:?}"),
    }
}

#[test]
fn ols_p_values_follow_t_distribution() {
    let (x, y) = random_problem(120, 4, 9);
    let fit = fit_ols(&x, &y, &names(4)).unwrap();
    for j in 0..4 {
        let se = fit.covariance[j + 1][j + 1].sqrt();
        let t = fit.coefficients[j] / se;
        let p = student_t_two_sided_p(t, (120 - 5) as f64);
        assert!((p - fit.p_values[j]).abs() < 1e-12);
    }
    let s2 = fit.rss / (120.0 - 5.0);
    assert!(rel_err(fit.residual_variance, s2) < 1e-12);
}

#[test]
fn predict_linear_basis_vectors() {
    let (x, y) = random_problem(80, 3, 2);
    let fit = fit_ols(&x, &y, &names(3)).unwrap();
    assert_eq!(predict_linear(&fit, &[0.0; 3]).unwrap(), fit.intercept);
    for j in 0..3 {
        let mut e = [0.0; 3];
        e[j] = 1.0;
        assert!((predict_linear(&fit, &e).unwrap() - fit.intercept - fit.coefficients[j]).abs() < 1e-12);
    }
    let q = [0.3, -1.2, 4.0];
    let mut manual = fit.intercept;
    for j in (0..3).rev() {
        manual += q[j] * fit.coefficients[j];
    }
    assert!((predict_linear(&fit, &q).unwrap() - manual).abs() < 1e-10);
    assert!(matches!(predict_linear(&fit, &[1.0]), Err(Error::SchemaMismatch(_))));
}

#[test]
fn lasso_kkt_and_ols_limit() {
    for seed in 0..10 {
        let (x, y) = random_problem(200, 10, 100 + seed);
        let (zero, trace) = fit_lasso(&x, &y, &names(10), 0.0, &LassoOptions::default()).unwrap();
        assert!(kkt_violation(&trace) < 1e-6);
        let ols = fit_ols(&x, &y, &names(10)).unwrap();
        assert!((zero.intercept - ols.intercept).abs() < 1e-6);
        for j in 0..10 {
            assert!((zero.coefficients[j] - ols.coefficients[j]).abs() < 1e-6);
        }
        let lmax = lambda_max(&x, &y, &names(10)).unwrap();
        for frac in [0.01, 0.1, 0.5] {
            let (_, t) = fit_lasso(&x, &y, &names(10), frac * lmax, &LassoOptions::default()).unwrap();
            assert!(kkt_violation(&t) < 1e-6, "seed {seed} frac {frac}");
        }
    }
}

#[test]
fn lasso_lambda_max_zeroes_everything() {
    let (x, y) = random_problem(150, 6, 3);
    let nm = names(6);
    // independent λ_max: max |zᵀ(y − ȳ)| / n with population-scaled columns
    let n = 150.0;
    let ym = y.iter().sum::<f64>() / n;
    let mut lmax: f64 = 0.0;
    for c in x.columns() {
        let m = c.iter().sum::<f64>() / n;
        let sd = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
        let s: f64 = c.iter().zip(&y).map(|(a, b)| (a - m) / sd * (b - ym)).sum();
        lmax = lmax.max(s.abs() / n);
    }
    assert!(rel_err(lambda_max(&x, &y, &nm).unwrap(), lmax) < 1e-10);
    let (fit, trace) = fit_lasso(&x, &y, &nm, lmax, &LassoOptions::default()).unwrap();
    assert!(trace.beta_standardized.iter().all(|&b| b == 0.0));
    assert!(fit.selected_features.is_empty());
    assert!((fit.intercept - ym).abs() < 1e-10);
}

#[test]
fn lasso_soft_threshold_closed_form() {
    // x has mean 0 and population variance 1; y = 3x gives an OLS slope of 3
    let x = Matrix::from_rows(&[[-1.0], [1.0], [-1.0], [1.0]]);
    let y = [-3.0, 3.0, -3.0, 3.0];
    let (fit, _) = fit_lasso(&x, &y, &names(1), 1.0, &LassoOptions::default()).unwrap();
    assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
    assert!(matches!(
        fit_lasso(&x, &y, &names(1), -0.1, &LassoOptions::default()),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn lasso_objective_and_path_are_monotone() {
    let (x, y) = random_problem(200, 8, 44);
    let nm = names(8);
    let lmax = lambda_max(&x, &y, &nm).unwrap();
    let mut last_l1 = f64::INFINITY;
    for k in 0..10 {
        let lambda = lmax * k as f64 / 9.0;
        let (_, trace) = fit_lasso(&x, &y, &nm, lambda, &LassoOptions::default()).unwrap();
        for w in trace.objective.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        let l1: f64 = trace.beta_standardized.iter().map(|b| b.abs()).sum();
        assert!(l1 <= last_l1 + 1e-9, "λ step {k}");
        last_l1 = l1;
    }
}

#[test]
fn backward_selection_drops_noise() {
    let mut agree = 0;
    for seed in 0..100 {
        let mut r = rng(7_000 + seed);
        let rows: Vec<[f64; 2]> = (0..200).map(|_| [gaussian(&mut r), gaussian(&mut r)]).collect();
        let y: Vec<f64> = rows.iter().map(|v| 2.0 * v[0] + gaussian(&mut r)).collect();
        let fit = backward_select(&Matrix::from_rows(&rows), &y, &["signal".into(), "noise".into()], 0.001).unwrap();
        if fit.selected_features == ["signal"] {
            agree += 1;
        }
    }
    assert!(agree >= 95, "{agree}/100");
}

#[test]
fn backward_selection_threshold_one_keeps_all() {
    let (x, y) = random_problem(100, 5, 8);
    let fit = backward_select(&x, &y, &names(5), 1.0).unwrap();
    assert_eq!(fit.selected_features, names(5));
}

#[test]
fn backward_selection_can_end_intercept_only() {
    let mut r = rng(3);
    let rows: Vec<[f64; 2]> = (0..100).map(|_| [gaussian(&mut r), gaussian(&mut r)]).collect();
    let y: Vec<f64> = (0..100).map(|_| gaussian(&mut r)).collect();
    let fit = backward_select(&Matrix::from_rows(&rows), &y, &names(2), 1e-12).unwrap();
    assert!(fit.intercept_only);
    assert!(fit.selected_features.is_empty());
}

fn grouped(n: usize, offsets: &[f64], seed: u64) -> (Matrix, Vec<f64>, Vec<f64>) {
    let mut r = rng(seed);
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut g = Vec::with_capacity(n);
    for i in 0..n {
        let grp = i % offsets.len();
        let x = [gaussian(&mut r), gaussian(&mut r)];
        y.push(1.0 + 2.0 * x[0] - x[1] + offsets[grp] + gaussian(&mut r));
        rows.push(x);
        g.push(grp as f64);
    }
    (Matrix::from_rows(&rows), y, g)
}

#[test]
fn lme_without_group_effect_matches_ols() {
    let (x, y, g) = grouped(5_000, &[0.0; 10], 11);
    let fit = fit_lme(&x, &y, &g, &names(2), "nationality", &LmeOptions::default()).unwrap();
    assert!(fit.tau2 < 0.05 * fit.sigma2, "τ² {} σ² {}", fit.tau2, fit.sigma2);
    let ols = fit_ols(&x, &y, &names(2)).unwrap();
    for j in 0..2 {
        let se = ols.covariance[j + 1][j + 1].sqrt();
        assert!((fit.fixed_effects[j] - ols.coefficients[j]).abs() < 3.0 * se);
    }
    for w in fit.log_likelihood.windows(2) {
        assert!(w[1] >= w[0] - 1e-9);
    }
}

#[test]
fn lme_recovers_group_signs() {
    let offsets = [5.0, -5.0, 5.0, -5.0, 5.0, -5.0];
    let (x, y, g) = grouped(1_200, &offsets, 12);
    let fit = fit_lme(&x, &y, &g, &names(2), "nationality", &LmeOptions::default()).unwrap();
    let mean_offset = offsets.iter().sum::<f64>() / offsets.len() as f64;
    for (k, off) in offsets.iter().enumerate() {
        let b = fit.random_intercepts[&(k as i64)];
        assert_eq!(b.signum(), (off - mean_offset).signum(), "group {k}");
    }
}

#[test]
fn lme_with_zero_group_variance_is_ols() {
    let (x, y, g) = grouped(800, &[1.0, -1.0, 0.5, 3.0], 13);
    let opts = LmeOptions {
        fixed_tau2: Some(0.0),
        ..LmeOptions::default()
    };
    let fit = fit_lme(&x, &y, &g, &names(2), "nationality", &opts).unwrap();
    let ols = fit_ols(&x, &y, &names(2)).unwrap();
    for i in 0..x.rows() {
        let a = fit.predict_row(x.row(i), g[i]);
        let b = ols.predict_row(x.row(i)).unwrap();
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn lme_single_group_is_rejected() {
    let (x, y, _) = grouped(100, &[0.0], 14);
    let g = vec![1.0; 100];
    assert!(fit_lme(&x, &y, &g, &names(2), "nationality", &LmeOptions::default()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ols_residuals_are_orthogonal(seed in 0u64..10_000, n in 20usize..120, p in 1usize..6) {
        let (x, y) = random_problem(n, p, seed);
        let fit = fit_ols(&x, &y, &names(p)).unwrap();
        let resid: Vec<f64> = (0..n).map(|i| y[i] - fit.predict_row(x.row(i)).unwrap()).collect();
        prop_assert!(resid.iter().sum::<f64>().abs() < 1e-6 * n as f64);
        for c in x.columns() {
            let m = c.iter().sum::<f64>() / n as f64;
            let sd = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt();
            let dot: f64 = c.iter().zip(&resid).map(|(a, r)| (a - m) / sd * r).sum();
            prop_assert!(dot.abs() < 1e-6 * n as f64);
        }
    }

    #[test]
    fn lasso_l1_norm_shrinks_with_lambda(seed in 0u64..10_000, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (x, y) = random_problem(80, 4, seed);
        let nm = names(4);
        let lmax = lambda_max(&x, &y, &nm).unwrap();
        let (lo, hi) = (a.min(b) * lmax, a.max(b) * lmax);
        let l1 = |l: f64| -> f64 {
            let (_, t) = fit_lasso(&x, &y, &nm, l, &LassoOptions::default()).unwrap();
            t.beta_standardized.iter().map(|v| v.abs()).sum()
        };
        prop_assert!(l1(hi) <= l1(lo) + 1e-9);
    }
}
