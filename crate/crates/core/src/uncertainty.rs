//! Prediction intervals for least squares, random forests and kNN, and an
//! empirical coverage check.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knn::{dudani_weights, weighted_mean, KnnModel};
use crate::linear::LinearFit;
use crate::stats::{normal_quantile, student_t_quantile};
use crate::tree::ForestModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalMethod {
    OlsT,
    ForestJackknife,
    KnnRange,
}

impl IntervalMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            IntervalMethod::OlsT => "ols_t",
            IntervalMethod::ForestJackknife => "forest_jackknife",
            IntervalMethod::KnnRange => "knn_range",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionInterval {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub method: IntervalMethod,
    /// Zero for the kNN range, which has no nominal level.
    pub nominal_level: f64,
}

impl PredictionInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }
}

fn check_level(level: f64) -> Result<()> {
    if !(0.0..1.0).contains(&level) {
        return Err(Error::invalid(format!("interval level must lie in [0, 1), got {level}")));
    }
    Ok(())
}

/// `ŷ ± t · sqrt(s² + x̃ᵀ Cov(β̂) x̃)`, which equals
/// `t · s · sqrt(1 + x̃ᵀ(X̃ᵀX̃)⁻¹x̃)` with `x̃ = [1, x0]`.
pub fn ols_interval(fit: &LinearFit, x0: &[f64], level: f64) -> Result<PredictionInterval> {
    check_level(level)?;
    if fit.covariance.is_empty() {
        return Err(Error::invalid("interval needs a least-squares fit with a covariance"));
    }
    let point = fit.predict_row(x0)?;
    let t = student_t_quantile((1.0 + level) / 2.0, fit.dof());
    let half = t * (fit.residual_variance + fit.mean_variance(x0)).sqrt();
    Ok(PredictionInterval {
        point,
        lower: point - half,
        upper: point + half,
        method: IntervalMethod::OlsT,
        nominal_level: level,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JackknifeVariance {
    /// Bias-corrected estimate clamped at 0.
    pub variance: f64,
    /// Bias-corrected estimate before clamping.
    pub raw: f64,
    pub mean: f64,
}

/// Out-of-bag membership of each training sample, packed eight trees per
/// byte, for fast jackknife-after-bootstrap estimates.
pub struct OobMasks {
    n_trees: usize,
    blocks: usize,
    masks: Vec<u8>,
}

impl OobMasks {
    pub fn new(inbag: &[Vec<u16>]) -> Result<OobMasks> {
        let n_trees = inbag.len();
        let n = inbag.first().map_or(0, |c| c.len());
        let blocks = n_trees.div_ceil(8);
        let mut masks = vec![0u8; n * blocks];
        for (b, counts) in inbag.iter().enumerate() {
            for (i, &c) in counts.iter().enumerate() {
                if c == 0 {
                    masks[i * blocks + b / 8] |= 1 << (b % 8);
                }
            }
        }
        if let Some(i) = (0..n).find(|&i| masks[i * blocks..(i + 1) * blocks].iter().all(|&m| m == 0)) {
            return Err(Error::invalid(format!(
                "training sample {i} is in the bootstrap of every tree; \
                 the jackknife needs more trees (and bootstrap resampling)"
            )));
        }
        Ok(OobMasks {
            n_trees,
            blocks,
            masks,
        })
    }

    /// Jackknife-after-bootstrap variance from one probe's tree predictions:
    /// `((n−1)/n) Σ_i (t̄₋ᵢ − t̄)² − (e−1)(n/B) v̂`.
    pub fn variance(&self, tree_preds: &[f64]) -> JackknifeVariance {
        assert_eq!(tree_preds.len(), self.n_trees);
        let b = self.n_trees as f64;
        let mean = tree_preds.iter().sum::<f64>() / b;
        // per block: sum of centered predictions for every subset mask
        let mut sums = vec![0.0; self.blocks * 256];
        for blk in 0..self.blocks {
            let table = &mut sums[blk * 256..(blk + 1) * 256];
            for m in 1..256usize {
                let low = m.trailing_zeros() as usize;
                let t = blk * 8 + low;
                let v = if t < self.n_trees { tree_preds[t] - mean } else { 0.0 };
                table[m] = table[m & (m - 1)] + v;
            }
        }
        let n = self.masks.len() / self.blocks.max(1);
        let acc: f64 = self
            .masks
            .par_chunks(self.blocks)
            .map(|row| {
                let (mut s, mut c) = (0.0, 0u32);
                for (blk, &m) in row.iter().enumerate() {
                    s += sums[blk * 256 + m as usize];
                    c += m.count_ones();
                }
                let d = s / c as f64;
                d * d
            })
            .sum();
        let nf = n as f64;
        let v_j = (nf - 1.0) / nf * acc;
        let v_tree = tree_preds.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / b;
        let raw = v_j - (std::f64::consts::E - 1.0) * (nf / b) * v_tree;
        JackknifeVariance {
            variance: raw.max(0.0),
            raw,
            mean,
        }
    }
}

pub fn forest_jackknife_variance(model: &mut ForestModel, x0: &[f64]) -> Result<JackknifeVariance> {
    let masks = OobMasks::new(model.inbag())?;
    Ok(masks.variance(&model.tree_predictions_row(x0)))
}

pub fn forest_interval(
    model: &ForestModel,
    masks: &OobMasks,
    x0: &[f64],
    level: f64,
) -> Result<(PredictionInterval, JackknifeVariance)> {
    check_level(level)?;
    let jk = masks.variance(&model.tree_predictions_row(x0));
    let point = model.predict_row(x0);
    let z = if level == 0.0 { 0.0 } else { normal_quantile((1.0 + level) / 2.0) };
    let half = z * jk.variance.sqrt();
    Ok((
        PredictionInterval {
            point,
            lower: point - half,
            upper: point + half,
            method: IntervalMethod::ForestJackknife,
            nominal_level: level,
        },
        jk,
    ))
}

/// Range of the `k` neighbor labels around the weighted kNN prediction.
pub fn knn_range_interval(model: &KnnModel, x0: &[f64], k: usize) -> Result<PredictionInterval> {
    if k < 2 {
        return Err(Error::invalid("a neighbor range needs k >= 2"));
    }
    let nb = model.query_neighbors(x0, k)?;
    let d: Vec<f64> = nb.iter().map(|n| n.distance).collect();
    let labels: Vec<f64> = nb.iter().map(|n| n.label).collect();
    let point = weighted_mean(&labels, &dudani_weights(&d, model.params.weighting));
    let lower = labels.iter().copied().fold(f64::INFINITY, f64::min);
    let upper = labels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(PredictionInterval {
        point: point.clamp(lower, upper),
        lower,
        upper,
        method: IntervalMethod::KnnRange,
        nominal_level: 0.0,
    })
}

pub fn empirical_coverage(intervals: &[PredictionInterval], actual: &[f64]) -> Result<f64> {
    if intervals.len() != actual.len() {
        return Err(Error::invalid("intervals and labels disagree in length"));
    }
    if intervals.is_empty() {
        return Err(Error::invalid("coverage of an empty set is undefined"));
    }
    let inside = intervals.iter().zip(actual).filter(|(iv, &y)| iv.contains(y)).count();
    Ok(inside as f64 / actual.len() as f64)
}
