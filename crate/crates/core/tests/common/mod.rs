//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use scoutcast::Matrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn names(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("x{j}")).collect()
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Solves `a·x = b` by Gaussian elimination with partial pivoting.
pub fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .unwrap();
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Least squares with an intercept via `(XᵀX)β = Xᵀy` on `[1, x]`.
/// Returns (intercept, slopes).
pub fn normal_equations(x: &Matrix, y: &[f64]) -> (f64, Vec<f64>) {
    let (n, p) = (x.rows(), x.cols());
    let k = p + 1;
    let mut xtx = vec![vec![0.0; k]; k];
    let mut xty = vec![0.0; k];
    for i in 0..n {
        let mut row = vec![1.0];
        row.extend_from_slice(x.row(i));
        for a in 0..k {
            xty[a] += row[a] * y[i];
            for b in 0..k {
                xtx[a][b] += row[a] * row[b];
            }
        }
    }
    let beta = solve(xtx, xty);
    (beta[0], beta[1..].to_vec())
}

/// Reference tree node produced by [`brute_force_tree`].
#[derive(Debug, Clone, PartialEq)]
pub enum RefNode {
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<RefNode>,
        right: Box<RefNode>,
    },
}

/// Exhaustive least-squares tree over integer-valued labels. Every split of
/// every feature between consecutive distinct values is scored by its exact
/// squared-error reduction `(S_L·n_R − S_R·n_L)² / (n_L·n_R·n)`; a later
/// candidate replaces the incumbent only when it is better by more than
/// `1e-12·Σ(y − ȳ_root)²` over the node, so near-ties go to the lowest
/// feature index and then the smallest threshold.
pub fn brute_force_tree(
    x: &[Vec<i64>],
    y: &[i64],
    max_depth: Option<usize>,
    min_leaf: usize,
) -> RefNode {
    let n = y.len();
    let root_mean = y.iter().sum::<i64>() as f64 / n as f64;
    let idx: Vec<usize> = (0..n).collect();
    build_ref(x, y, &idx, 0, max_depth, min_leaf, root_mean)
}

fn build_ref(
    x: &[Vec<i64>],
    y: &[i64],
    idx: &[usize],
    depth: usize,
    max_depth: Option<usize>,
    min_leaf: usize,
    root_mean: f64,
) -> RefNode {
    let n = idx.len();
    let total: i64 = idx.iter().map(|&i| y[i]).sum();
    let leaf = RefNode::Leaf(total as f64 / n as f64);
    if max_depth.is_some_and(|d| depth >= d) || n < 2 * min_leaf {
        return leaf;
    }
    let tol = 1e-12 * idx.iter().map(|&i| (y[i] as f64 - root_mean).powi(2)).sum::<f64>();
    let p = x[0].len();
    let mut best: Option<(usize, i64, i64, f64)> = None;
    for f in 0..p {
        let mut values: Vec<i64> = idx.iter().map(|&i| x[i][f]).collect();
        values.sort_unstable();
        values.dedup();
        for w in values.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let left: Vec<usize> = idx.iter().copied().filter(|&i| x[i][f] <= lo).collect();
            let (nl, nr) = (left.len() as i128, (n - left.len()) as i128);
            if (nl as usize) < min_leaf || (nr as usize) < min_leaf {
                continue;
            }
            let sl: i128 = left.iter().map(|&i| y[i] as i128).sum();
            let sr = total as i128 - sl;
            let num = sl * nr - sr * nl;
            let gain = (num * num) as f64 / (nl * nr * n as i128) as f64;
            let better = match best {
                None => gain > tol,
                Some((_, _, _, g)) => gain > g + tol,
            };
            if better {
                best = Some((f, lo, hi, gain));
            }
        }
    }
    let Some((f, lo, hi, _)) = best else {
        return leaf;
    };
    let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[i][f] <= lo);
    RefNode::Split {
        feature: f,
        threshold: (lo as f64 + hi as f64) / 2.0,
        left: Box::new(build_ref(x, y, &l, depth + 1, max_depth, min_leaf, root_mean)),
        right: Box::new(build_ref(x, y, &r, depth + 1, max_depth, min_leaf, root_mean)),
    }
}

/// Compares a fitted tree with a reference tree: same split features and
/// thresholds everywhere, leaf values within `tol`.
pub fn same_tree(t: &scoutcast::tree::Tree, k: usize, r: &RefNode, tol: f64) -> bool {
    let node = &t.nodes[k];
    match r {
        RefNode::Leaf(v) => node.is_leaf() && (node.value - v).abs() <= tol,
        RefNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            !node.is_leaf()
                && node.feature == *feature
                && node.threshold == *threshold
                && same_tree(t, node.left, left, tol)
                && same_tree(t, node.right, right, tol)
        }
    }
}

/// Indices of the `k` nearest rows by full scan, ties by lower index.
pub fn scan_neighbors(points: &[Vec<f64>], q: &[f64], k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    d.into_iter().take(k).map(|(_, i)| i).collect()
}

/// Heteroscedastic regression problem: `y = 3x₀ + ε`, `sd(ε) = 0.2 + 2·[x₀ > 0.5]`.
pub fn heteroscedastic(n: usize, seed: u64) -> (Matrix, Vec<f64>) {
    let mut r = rng(seed);
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let x0: f64 = r.random();
        let x1: f64 = r.random();
        let sd = if x0 > 0.5 { 2.2 } else { 0.2 };
        y.push(3.0 * x0 + sd * gaussian(&mut r));
        rows.push([x0, x1]);
    }
    (Matrix::from_rows(&rows), y)
}

/// A league small enough to run every stage in a few seconds.
pub const SMALL_CONFIG: &str = r#"
seed = 7
cutoff_year = 2016
holdout_fraction = 0.1

[sim]
n_players = 300
n_clubs = 12
n_leagues = 2
seasons = 6

[tuning]
n_init = 2
player_fraction = 0.5

[uncertainty]
probes = 60

[[models]]
name = "ols"
kind = "ols"

[[models]]
name = "lasso"
kind = "lasso"
budget = 3

[[models]]
name = "forest"
kind = "forest"
params = { n_trees = 20, min_samples_leaf = 10 }
budget = 0

[[models]]
name = "gbt"
kind = "gbt"
params = { rounds = 30, max_depth = 3 }
budget = 0

[[models]]
name = "knn_euclidean"
kind = "knn_euclidean"
budget = 2
"#;

pub fn small_config() -> scoutcast::experiment::ExperimentConfig {
    scoutcast::experiment::ExperimentConfig::from_toml_str(SMALL_CONFIG).unwrap()
}

/// Largest lasso optimality violation of a raw-scale fit, recomputed from
/// the data: columns standardized by their population sd, objective
/// `‖r‖²/2n + λ‖β_std‖₁`.
pub fn lasso_kkt(x: &Matrix, y: &[f64], intercept: f64, coefficients: &[f64], lambda: f64) -> f64 {
    let (n, p) = (x.rows(), x.cols());
    let resid: Vec<f64> = (0..n)
        .map(|i| y[i] - intercept - x.row(i).iter().zip(coefficients).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let mut worst: f64 = 0.0;
    for j in 0..p {
        let col: Vec<f64> = (0..n).map(|i| x.row(i)[j]).collect();
        let mean = col.iter().sum::<f64>() / n as f64;
        let sd = (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
        let grad = col.iter().zip(&resid).map(|(v, r)| (v - mean) / sd * r).sum::<f64>() / n as f64;
        let beta = coefficients[j] * sd;
        let v = if beta == 0.0 { (grad.abs() - lambda).max(0.0) } else { (grad - lambda * beta.signum()).abs() };
        worst = worst.max(v);
    }
    worst
}
