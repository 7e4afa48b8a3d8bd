//! Distance-weighted k-nearest-neighbor regression.
//!
//! Features are min-max scaled to [0, 1] and then optionally whitened
//! (Mahalanobis) or multiplied by RReliefF weights before Euclidean search.

mod kdtree;
mod nsw;
mod relief;

use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use kdtree::{brute_force, squared_distance, Candidate, KdTree};
pub use nsw::SmallWorld;
pub use relief::rrelieff_weights;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl MinMaxScaler {
    pub fn fit(x: &Matrix) -> MinMaxScaler {
        let p = x.cols();
        let mut mins = vec![f64::INFINITY; p];
        let mut maxs = vec![f64::NEG_INFINITY; p];
        for i in 0..x.rows() {
            for (j, &v) in x.row(i).iter().enumerate() {
                mins[j] = mins[j].min(v);
                maxs[j] = maxs[j].max(v);
            }
        }
        MinMaxScaler { mins, maxs }
    }

    /// Constant columns map to 0.
    pub fn scale(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| {
                let r = self.maxs[j] - self.mins[j];
                if r > 0.0 {
                    (v - self.mins[j]) / r
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn transform_flat(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows()).flat_map(|i| self.scale(x.row(i))).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Reciprocal,
    MinMax,
    Uniform,
}

impl Weighting {
    pub const ALL: [Weighting; 3] = [Weighting::Reciprocal, Weighting::MinMax, Weighting::Uniform];

    pub fn as_str(self) -> &'static str {
        match self {
            Weighting::Reciprocal => "reciprocal",
            Weighting::MinMax => "minmax",
            Weighting::Uniform => "uniform",
        }
    }

    pub fn parse(s: &str) -> Option<Weighting> {
        Weighting::ALL.into_iter().find(|w| w.as_str() == s)
    }
}

/// Neighbor weights from ascending distances, normalized to sum 1. Equal
/// distances always give uniform weights.
pub fn dudani_weights(distances: &[f64], mode: Weighting) -> Vec<f64> {
    let k = distances.len();
    if k == 0 {
        return Vec::new();
    }
    let uniform = vec![1.0 / k as f64; k];
    let (d1, dk) = (distances[0], distances[k - 1]);
    let raw: Vec<f64> = match mode {
        Weighting::Uniform => return uniform,
        _ if dk == d1 => return uniform,
        Weighting::Reciprocal => distances.iter().map(|d| 1.0 / d.max(1e-12)).collect(),
        Weighting::MinMax => distances.iter().map(|d| (dk - d) / (dk - d1)).collect(),
    };
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

pub fn weighted_mean(labels: &[f64], weights: &[f64]) -> f64 {
    labels.iter().zip(weights).map(|(y, w)| y * w).sum()
}

/// `(Σ + δI)^(−1/2)` by symmetric eigendecomposition.
pub fn whitening_from_covariance(cov: &[Vec<f64>], ridge: f64) -> Result<Vec<Vec<f64>>> {
    let p = cov.len();
    if cov.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("covariance has non-finite entries"));
    }
    let m = DMatrix::from_fn(p, p, |i, j| cov[i][j]);
    let eig = m.symmetric_eigen();
    let mut w = DMatrix::<f64>::zeros(p, p);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let l = lambda.max(0.0) + ridge;
        if !(l > 0.0) {
            return Err(Error::invalid(
                "singular covariance; use a positive ridge for the Mahalanobis metric",
            ));
        }
        let v = eig.eigenvectors.column(k);
        w += (v * v.transpose()) / l.sqrt();
    }
    Ok((0..p).map(|i| (0..p).map(|j| w[(i, j)]).collect()).collect())
}

/// Whitening transform for the sample covariance of `points`.
pub fn build_mahalanobis(points: &Matrix, ridge: f64) -> Result<Vec<Vec<f64>>> {
    let (n, p) = (points.rows(), points.cols());
    if n < 2 {
        return Err(Error::invalid("Mahalanobis metric needs at least two points"));
    }
    let means: Vec<f64> = (0..p)
        .map(|j| (0..n).map(|i| points.get(i, j)).sum::<f64>() / n as f64)
        .collect();
    let mut cov = vec![vec![0.0; p]; p];
    for i in 0..n {
        let r = points.row(i);
        for a in 0..p {
            for b in a..p {
                cov[a][b] += (r[a] - means[a]) * (r[b] - means[b]);
            }
        }
    }
    for a in 0..p {
        for b in a..p {
            cov[a][b] /= (n - 1) as f64;
            cov[b][a] = cov[a][b];
        }
    }
    whitening_from_covariance(&cov, ridge)
}

/// Multiplies each column by its weight, negative weights clamped to 0.
pub fn reweight_features(points: &Matrix, weights: &[f64]) -> Matrix {
    let mut out = points.clone();
    for i in 0..out.rows() {
        for (v, w) in out.row_mut(i).iter_mut().zip(weights) {
            *v *= w.max(0.0);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    Mahalanobis,
    Relief,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Euclidean => "euclidean",
            Metric::Mahalanobis => "mahalanobis",
            Metric::Relief => "relief",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IndexKind {
    Exact,
    /// Small-world graph with `m` links per insertion and beam width `ef`.
    Approximate { m: usize, ef: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
    pub weighting: Weighting,
    pub metric: Metric,
    pub ridge: f64,
    /// RReliefF sample size; `None` means min(n, 500).
    pub relief_samples: Option<usize>,
    pub relief_neighbors: usize,
    pub index: IndexKind,
    pub seed: u64,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams {
            k: 20,
            weighting: Weighting::MinMax,
            metric: Metric::Euclidean,
            ridge: 1e-6,
            relief_samples: None,
            relief_neighbors: 10,
            index: IndexKind::Exact,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Transform {
    Identity,
    Linear(Vec<Vec<f64>>),
    Scale(Vec<f64>),
}

impl Transform {
    fn apply(&self, v: Vec<f64>) -> Vec<f64> {
        match self {
            Transform::Identity => v,
            Transform::Linear(w) => w
                .iter()
                .map(|row| row.iter().zip(&v).map(|(a, b)| a * b).sum())
                .collect(),
            Transform::Scale(s) => v.iter().zip(s).map(|(a, b)| a * b).collect(),
        }
    }
}

#[derive(Debug, Clone)]
enum Searcher {
    Exact(KdTree),
    Approximate(SmallWorld),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
    pub label: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct KnnModel {
    pub params: KnnParams,
    pub features: Vec<String>,
    pub scaler: MinMaxScaler,
    pub transform: Transform,
    /// Raw RReliefF weights (before clamping), when that metric is used.
    pub relief_weights: Option<Vec<f64>>,
    pub dim: usize,
    /// Stored points in metric space, row-major.
    pub points: Vec<f64>,
    pub labels: Vec<f64>,
    /// Beam width and measured recall of the approximate index.
    pub ef_search: Option<usize>,
    pub recall: Option<f64>,
    #[serde(skip)]
    searcher: OnceLock<Searcher>,
}

impl Clone for KnnModel {
    fn clone(&self) -> Self {
        KnnModel {
            params: self.params.clone(),
            features: self.features.clone(),
            scaler: self.scaler.clone(),
            transform: self.transform.clone(),
            relief_weights: self.relief_weights.clone(),
            dim: self.dim,
            points: self.points.clone(),
            labels: self.labels.clone(),
            ef_search: self.ef_search,
            recall: self.recall,
            searcher: self.searcher.clone(),
        }
    }
}

impl PartialEq for KnnModel {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
            && self.features == other.features
            && self.transform == other.transform
            && self.points == other.points
            && self.labels == other.labels
    }
}

const RECALL_GATE: f64 = 0.95;

pub fn fit_knn(x: &Matrix, y: &[f64], names: &[String], params: &KnnParams) -> Result<KnnModel> {
    let (n, p) = (x.rows(), x.cols());
    if n == 0 {
        return Err(Error::invalid("kNN needs at least one stored point"));
    }
    if y.len() != n || names.len() != p {
        return Err(Error::invalid("design, labels and names disagree in size"));
    }
    if params.k == 0 || params.k > n {
        return Err(Error::invalid(format!("k must lie in [1, {n}], got {}", params.k)));
    }
    let scaler = MinMaxScaler::fit(x);
    let scaled = Matrix::from_vec(n, p, scaler.transform_flat(x));
    let mut relief_weights = None;
    let transform = match params.metric {
        Metric::Euclidean => Transform::Identity,
        Metric::Mahalanobis => Transform::Linear(build_mahalanobis(&scaled, params.ridge)?),
        Metric::Relief => {
            let m = params.relief_samples.unwrap_or(n.min(500)).min(n);
            let w = rrelieff_weights(x, y, m, params.relief_neighbors.min(n - 1).max(1), params.seed)?;
            relief_weights = Some(w.clone());
            Transform::Scale(w.iter().map(|v| v.max(0.0)).collect())
        }
    };
    let points: Vec<f64> = (0..n)
        .flat_map(|i| transform.apply(scaled.row(i).to_vec()))
        .collect();
    let mut model = KnnModel {
        params: params.clone(),
        features: names.to_vec(),
        scaler,
        transform,
        relief_weights,
        dim: p,
        points,
        labels: y.to_vec(),
        ef_search: None,
        recall: None,
        searcher: OnceLock::new(),
    };
    if let IndexKind::Approximate { m, ef } = params.index {
        let mut graph = SmallWorld::build(&model.points, p, m.max(2), ef.max(params.k));
        let exact = KdTree::build(&model.points, p);
        let probes = model.recall_probes(200);
        let mut recall = 0.0;
        for _ in 0..6 {
            recall = measure_recall(&model.points, &exact, &graph, &probes, params.k);
            if recall >= RECALL_GATE {
                break;
            }
            graph.ef_search *= 2;
        }
        if recall < RECALL_GATE {
            return Err(Error::invalid(format!(
                "approximate index reached recall {recall:.3} < {RECALL_GATE}; use the exact index"
            )));
        }
        model.ef_search = Some(graph.ef_search);
        model.recall = Some(recall);
        let _ = model.searcher.set(Searcher::Approximate(graph));
    } else {
        let _ = model.searcher.set(Searcher::Exact(KdTree::build(&model.points, p)));
    }
    Ok(model)
}

fn measure_recall(points: &[f64], exact: &KdTree, graph: &SmallWorld, probes: &[Vec<f64>], k: usize) -> f64 {
    let hits: usize = probes
        .iter()
        .map(|q| {
            let truth: Vec<usize> = exact.query(points, q, k).iter().map(|c| c.index).collect();
            graph
                .query(points, q, k)
                .iter()
                .filter(|c| truth.contains(&c.index))
                .count()
        })
        .sum();
    hits as f64 / (probes.len() * k) as f64
}

impl KnnModel {
    /// Jittered copies of random stored points, used as held-out queries.
    fn recall_probes(&self, count: usize) -> Vec<Vec<f64>> {
        let n = self.labels.len();
        let mut rng = rng_for(self.params.seed, "knn/recall-probes");
        let jitter = Normal::new(0.0, 0.01).expect("valid sd");
        sample(&mut rng, n, count.min(n))
            .into_iter()
            .map(|i| {
                self.points[i * self.dim..(i + 1) * self.dim]
                    .iter()
                    .map(|v| v + jitter.sample(&mut rng))
                    .collect()
            })
            .collect()
    }

    fn searcher(&self) -> &Searcher {
        self.searcher.get_or_init(|| match self.params.index {
            IndexKind::Exact => Searcher::Exact(KdTree::build(&self.points, self.dim)),
            IndexKind::Approximate { m, ef } => {
                let mut g = SmallWorld::build(&self.points, self.dim, m.max(2), ef.max(self.params.k));
                if let Some(e) = self.ef_search {
                    g.ef_search = e;
                }
                Searcher::Approximate(g)
            }
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Maps a raw feature row into the search space.
    pub fn embed(&self, x: &[f64]) -> Vec<f64> {
        self.transform.apply(self.scaler.scale(x))
    }

    /// The `k` nearest stored points to a raw feature row, ascending by
    /// distance (ties by stored order).
    pub fn query_neighbors(&self, x: &[f64], k: usize) -> Result<Vec<Neighbor>> {
        if k == 0 || k > self.len() {
            return Err(Error::invalid(format!(
                "k must lie in [1, {}], got {k}",
                self.len()
            )));
        }
        if x.len() != self.dim {
            return Err(Error::invalid("query row does not match the kNN feature set"));
        }
        let q = self.embed(x);
        let found = match self.searcher() {
            Searcher::Exact(t) => t.query(&self.points, &q, k),
            Searcher::Approximate(g) => g.query(&self.points, &q, k),
        };
        Ok(found
            .into_iter()
            .map(|c| Neighbor {
                index: c.index,
                distance: c.dist2.sqrt(),
                label: self.labels[c.index],
            })
            .collect())
    }

    pub fn predict_row(&self, x: &[f64]) -> Result<f64> {
        let nb = self.query_neighbors(x, self.params.k)?;
        let d: Vec<f64> = nb.iter().map(|n| n.distance).collect();
        let l: Vec<f64> = nb.iter().map(|n| n.label).collect();
        Ok(weighted_mean(&l, &dudani_weights(&d, self.params.weighting)))
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        (0..x.rows())
            .into_par_iter()
            .map(|i| self.predict_row(x.row(i)))
            .collect()
    }

    /// Clamped RReliefF weights, or the diagonal of the whitening transform.
    pub fn feature_weights(&self) -> Vec<f64> {
        match &self.transform {
            Transform::Identity => vec![1.0; self.dim],
            Transform::Linear(w) => (0..self.dim).map(|j| w[j][j]).collect(),
            Transform::Scale(s) => s.clone(),
        }
    }
}
