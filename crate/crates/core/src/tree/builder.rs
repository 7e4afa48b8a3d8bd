//! Greedy split search shared by every tree model.
//!
//! A node's score is `G²/(H + λ)` over its (weighted) gradient sum `G` and
//! hessian sum `H`. With `g = y − ȳ`, `h = 1`, `λ = 0` the gain of a split is
//! exactly the reduction in squared error; with `g = ŷ − y` it is the
//! second-order boosting gain. Candidate thresholds are midpoints between
//! consecutive distinct values. Ties are resolved towards the lowest
//! feature index, then the smallest threshold: a later candidate only wins if
//! its gain exceeds the incumbent by more than `1e-12` times the node's
//! total squared gradient.

use rand::seq::index::sample;

use super::{Node, Tree, LEAF};
use crate::seed::Rng;

/// Sample indices sorted by each feature's value (ties by index).
#[derive(Debug, Clone)]
pub struct Presorted {
    pub order: Vec<Vec<u32>>,
}

impl Presorted {
    pub fn new(cols: &[Vec<f64>]) -> Self {
        let order = cols
            .iter()
            .map(|c| {
                let mut idx: Vec<u32> = (0..c.len() as u32).collect();
                idx.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Presorted { order }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective {
    /// Least squares around `offset`: leaf = offset + G/H.
    SquaredError { offset: f64 },
    /// Second-order boosting: leaf = −G/(H+λ), gain halved and reduced by γ.
    Newton { lambda: f64, gamma: f64 },
}

impl Objective {
    fn lambda(&self) -> f64 {
        match *self {
            Objective::SquaredError { .. } => 0.0,
            Objective::Newton { lambda, .. } => lambda,
        }
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        let d = h + self.lambda();
        if d > 0.0 {
            g * g / d
        } else {
            0.0
        }
    }

    fn gain(&self, gl: f64, hl: f64, gr: f64, hr: f64, g: f64, h: f64) -> f64 {
        let raw = self.score(gl, hl) + self.score(gr, hr) - self.score(g, h);
        match *self {
            Objective::SquaredError { .. } => raw,
            Objective::Newton { gamma, .. } => 0.5 * raw - gamma,
        }
    }

    fn leaf(&self, g: f64, h: f64) -> f64 {
        match *self {
            Objective::SquaredError { offset } => {
                if h > 0.0 {
                    offset + g / h
                } else {
                    offset
                }
            }
            Objective::Newton { lambda, .. } => {
                let d = h + lambda;
                if d > 0.0 {
                    -g / d
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct GrowParams {
    /// `None` grows until no split helps; `Some(0)` is a single leaf.
    pub max_depth: Option<usize>,
    /// Minimum weighted sample count on each side of a split.
    pub min_samples_leaf: f64,
    /// Features examined per split (all when ≥ p).
    pub mtry: usize,
    pub objective: Objective,
    /// Optional per-feature candidate thresholds (sorted); exact search when `None`.
    pub candidates: Option<Vec<Vec<f64>>>,
}

struct Grower<'a> {
    cols: &'a [Vec<f64>],
    g: &'a [f64],
    h: &'a [f64],
    w: &'a [f64],
    params: &'a GrowParams,
    order: Vec<Vec<u32>>,
    goes_left: Vec<bool>,
    buf: Vec<u32>,
    nodes: Vec<Node>,
}

struct Best {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Grows one tree on the samples with positive weight.
pub fn grow(
    cols: &[Vec<f64>],
    presorted: &Presorted,
    g: &[f64],
    h: &[f64],
    w: &[f64],
    params: &GrowParams,
    rng: &mut Rng,
) -> Tree {
    let n = g.len();
    let order: Vec<Vec<u32>> = presorted
        .order
        .iter()
        .map(|o| o.iter().copied().filter(|&i| w[i as usize] > 0.0).collect())
        .collect();
    let m = order.first().map_or_else(
        || (0..n as u32).filter(|&i| w[i as usize] > 0.0).count(),
        |o| o.len(),
    );
    let mut grower = Grower {
        cols,
        g,
        h,
        w,
        params,
        order,
        goes_left: vec![false; n],
        buf: Vec::with_capacity(m),
        nodes: Vec::new(),
    };
    if cols.is_empty() {
        // no features: a single leaf over all weighted samples
        let (gs, hs, ws) = (0..n).fold((0.0, 0.0, 0.0), |acc, i| {
            (acc.0 + w[i] * g[i], acc.1 + w[i] * h[i], acc.2 + w[i])
        });
        grower.nodes.push(Node::leaf(params.objective.leaf(gs, hs), ws));
        return Tree {
            nodes: grower.nodes,
        };
    }
    grower.build(0, m, 0, rng);
    Tree {
        nodes: grower.nodes,
    }
}

impl Grower<'_> {
    fn sums(&self, lo: usize, hi: usize) -> (f64, f64, f64, f64) {
        let (mut gs, mut hs, mut ws, mut gg) = (0.0, 0.0, 0.0, 0.0);
        for &i in &self.order[0][lo..hi] {
            let i = i as usize;
            gs += self.w[i] * self.g[i];
            hs += self.w[i] * self.h[i];
            ws += self.w[i];
            gg += self.w[i] * self.g[i] * self.g[i];
        }
        (gs, hs, ws, gg)
    }

    fn build(&mut self, lo: usize, hi: usize, depth: usize, rng: &mut Rng) -> usize {
        let (gs, hs, ws, gg) = self.sums(lo, hi);
        let obj = self.params.objective;
        let id = self.nodes.len();
        self.nodes.push(Node::leaf(obj.leaf(gs, hs), ws));
        if self.params.max_depth.is_some_and(|d| depth >= d)
            || ws < 2.0 * self.params.min_samples_leaf
        {
            return id;
        }
        let tol = 1e-12 * gg;
        let p = self.cols.len();
        let features: Vec<usize> = if self.params.mtry >= p {
            (0..p).collect()
        } else {
            let mut f = sample(rng, p, self.params.mtry.max(1)).into_vec();
            f.sort_unstable();
            f
        };
        let mut best: Option<Best> = None;
        for f in features {
            self.scan(f, lo, hi, (gs, hs), tol, &mut best);
        }
        let Some(best) = best else {
            return id;
        };
        let col = &self.cols[best.feature];
        let mut n_left = 0;
        for &i in &self.order[best.feature][lo..hi] {
            let left = col[i as usize] <= best.threshold;
            self.goes_left[i as usize] = left;
            n_left += left as usize;
        }
        for f in 0..p {
            self.buf.clear();
            let seg = &mut self.order[f][lo..hi];
            let mut k = 0;
            for j in 0..seg.len() {
                let i = seg[j];
                if self.goes_left[i as usize] {
                    seg[k] = i;
                    k += 1;
                } else {
                    self.buf.push(i);
                }
            }
            seg[k..].copy_from_slice(&self.buf);
        }
        let mid = lo + n_left;
        let left = self.build(lo, mid, depth + 1, rng);
        let right = self.build(mid, hi, depth + 1, rng);
        let node = &mut self.nodes[id];
        node.feature = best.feature;
        node.threshold = best.threshold;
        node.left = left;
        node.right = right;
        node.gain = best.gain;
        id
    }

    fn scan(
        &self,
        f: usize,
        lo: usize,
        hi: usize,
        (gs, hs): (f64, f64),
        tol: f64,
        best: &mut Option<Best>,
    ) {
        let col = &self.cols[f];
        let idx = &self.order[f][lo..hi];
        let obj = self.params.objective;
        let min_leaf = self.params.min_samples_leaf;
        let cands = self.params.candidates.as_ref().map(|c| c[f].as_slice());
        let (mut gl, mut hl, mut wl) = (0.0, 0.0, 0.0);
        let total_w: f64 = idx.iter().map(|&i| self.w[i as usize]).sum();
        for k in 0..idx.len().saturating_sub(1) {
            let i = idx[k] as usize;
            gl += self.w[i] * self.g[i];
            hl += self.w[i] * self.h[i];
            wl += self.w[i];
            let (x0, x1) = (col[i], col[idx[k + 1] as usize]);
            if x1 <= x0 {
                continue;
            }
            if wl < min_leaf || total_w - wl < min_leaf {
                continue;
            }
            let threshold = match cands {
                None => midpoint(x0, x1),
                Some(c) => {
                    // first candidate in [x0, x1)
                    let j = c.partition_point(|&t| t < x0);
                    match c.get(j) {
                        Some(&t) if t < x1 => t,
                        _ => continue,
                    }
                }
            };
            let gain = obj.gain(gl, hl, gs - gl, hs - hl, gs, hs);
            let better = match best {
                None => gain > tol,
                Some(b) => gain > b.gain + tol,
            };
            if better {
                *best = Some(Best {
                    feature: f,
                    threshold,
                    gain,
                });
            }
        }
    }
}

/// Midpoint of two consecutive distinct values that still separates them.
pub fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m >= b {
        a
    } else {
        m
    }
}

/// Up to `max_bins − 1` cut points per feature placed between distinct
/// values at evenly spaced ranks.
pub fn quantile_candidates(cols: &[Vec<f64>], presorted: &Presorted, max_bins: usize) -> Vec<Vec<f64>> {
    cols.iter()
        .zip(&presorted.order)
        .map(|(c, o)| {
            let n = o.len();
            let mut cuts = Vec::new();
            for b in 1..max_bins {
                let r = b * n / max_bins;
                if r == 0 || r >= n {
                    continue;
                }
                let (x0, x1) = (c[o[r - 1] as usize], c[o[r] as usize]);
                if x1 > x0 {
                    cuts.push(midpoint(x0, x1));
                }
            }
            cuts.dedup();
            cuts
        })
        .collect()
}

impl Node {
    pub(crate) fn leaf(value: f64, weight: f64) -> Node {
        Node {
            feature: LEAF,
            threshold: 0.0,
            left: 0,
            right: 0,
            value,
            weight,
            gain: 0.0,
        }
    }
}
