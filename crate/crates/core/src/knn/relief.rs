use rand::seq::index::sample;

use super::kdtree::KdTree;
use super::MinMaxScaler;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::rng_for;

/// RReliefF feature weights on min-max scaled features.
///
/// For each of `m_samples` random instances, the `k_neighbors` nearest other
/// points contribute with rank weights `exp(−(rank/σ)²)`, `σ = k/3`,
/// normalized over the k neighbors. With label difference `dY` and feature
/// difference `dA` (both scaled by their ranges):
/// `W = N_dY∧dA / N_dY − (N_dA − N_dY∧dA) / (m − N_dY)`.
pub fn rrelieff_weights(
    x: &Matrix,
    y: &[f64],
    m_samples: usize,
    k_neighbors: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let (n, p) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(Error::invalid("design and labels disagree in size"));
    }
    if m_samples == 0 || m_samples > n {
        return Err(Error::invalid(format!(
            "RReliefF sample size must lie in [1, {n}], got {m_samples}"
        )));
    }
    if k_neighbors == 0 || k_neighbors >= n {
        return Err(Error::invalid("RReliefF needs 1 <= k < n"));
    }
    let (y_lo, y_hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let y_range = y_hi - y_lo;
    if !(y_range > 0.0) {
        return Ok(vec![0.0; p]);
    }
    let scaler = MinMaxScaler::fit(x);
    let points = scaler.transform_flat(x);
    let tree = KdTree::build(&points, p);

    let sigma = k_neighbors as f64 / 3.0;
    let raw: Vec<f64> = (1..=k_neighbors)
        .map(|r| (-(r as f64 / sigma).powi(2)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    let rank_w: Vec<f64> = raw.iter().map(|v| v / total).collect();

    let mut rng = rng_for(seed, "rrelieff");
    let mut n_dy = 0.0;
    let mut n_da = vec![0.0; p];
    let mut n_dyda = vec![0.0; p];
    for i in sample(&mut rng, n, m_samples) {
        let q = &points[i * p..(i + 1) * p];
        let mut nb = tree.query(&points, q, k_neighbors + 1);
        match nb.iter().position(|c| c.index == i) {
            Some(pos) => {
                nb.remove(pos);
            }
            None => {
                nb.pop();
            }
        }
        for (c, &d) in nb.iter().zip(&rank_w) {
            let j = c.index;
            let dy = (y[i] - y[j]).abs() / y_range;
            n_dy += dy * d;
            for a in 0..p {
                let da = (points[i * p + a] - points[j * p + a]).abs();
                n_da[a] += da * d;
                n_dyda[a] += dy * da * d;
            }
        }
    }
    let m = m_samples as f64;
    Ok((0..p)
        .map(|a| {
            let first = if n_dy > 0.0 { n_dyda[a] / n_dy } else { 0.0 };
            let second = if m - n_dy > 0.0 {
                (n_da[a] - n_dyda[a]) / (m - n_dy)
            } else {
                0.0
            };
            first - second
        })
        .collect())
}
