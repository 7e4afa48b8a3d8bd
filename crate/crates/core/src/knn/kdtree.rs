//! Exact k-nearest-neighbor search over a flat point buffer.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const BUCKET: usize = 16;

#[derive(Debug, Clone)]
enum KdNode {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    perm: Vec<u32>,
    nodes: Vec<KdNode>,
}

/// Squared distance with index tie-break; orders the result heap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub dist2: f64,
    pub index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KdTree {
    pub fn build(points: &[f64], dim: usize) -> KdTree {
        let n = if dim == 0 { 0 } else { points.len() / dim };
        let mut tree = KdTree {
            dim,
            perm: (0..n as u32).collect(),
            nodes: Vec::new(),
        };
        tree.build_node(points, 0, n);
        tree
    }

    fn build_node(&mut self, points: &[f64], start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(KdNode::Leaf { start, end });
        if end - start <= BUCKET || self.dim == 0 {
            return id;
        }
        let dim = self.dim;
        let coord = |i: u32, d: usize| points[i as usize * dim + d];
        let (mut best_dim, mut best_spread) = (0, 0.0);
        for d in 0..dim {
            let (lo, hi) = self.perm[start..end]
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                    (lo.min(coord(i, d)), hi.max(coord(i, d)))
                });
            if hi - lo > best_spread {
                best_spread = hi - lo;
                best_dim = d;
            }
        }
        if best_spread <= 0.0 {
            return id;
        }
        let mid = start + (end - start) / 2;
        self.perm[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            coord(a, best_dim)
                .total_cmp(&coord(b, best_dim))
                .then(a.cmp(&b))
        });
        let value = coord(self.perm[mid], best_dim);
        let left = self.build_node(points, start, mid);
        let right = self.build_node(points, mid, end);
        self.nodes[id] = KdNode::Split {
            dim: best_dim,
            value,
            left,
            right,
        };
        id
    }

    /// The `k` nearest stored points, ascending by (distance, index).
    pub fn query(&self, points: &[f64], q: &[f64], k: usize) -> Vec<Candidate> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        if k > 0 && !self.nodes.is_empty() {
            self.search(points, 0, q, k, &mut heap);
        }
        heap.into_sorted_vec()
    }

    fn search(&self, points: &[f64], node: usize, q: &[f64], k: usize, heap: &mut BinaryHeap<Candidate>) {
        match self.nodes[node] {
            KdNode::Leaf { start, end } => {
                for &i in &self.perm[start..end] {
                    let i = i as usize;
                    let c = Candidate {
                        dist2: squared_distance(&points[i * self.dim..(i + 1) * self.dim], q),
                        index: i,
                    };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            KdNode::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = q[dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(points, near, q, k, heap);
                // ≤ keeps equal-distance points with smaller indices reachable
                if heap.len() < k || diff * diff <= heap.peek().unwrap().dist2 {
                    self.search(points, far, q, k, heap);
                }
            }
        }
    }
}

/// Full scan; reference for tests and recall checks.
pub fn brute_force(points: &[f64], dim: usize, q: &[f64], k: usize) -> Vec<Candidate> {
    let n = points.len() / dim.max(1);
    let mut all: Vec<Candidate> = (0..n)
        .map(|i| Candidate {
            dist2: squared_distance(&points[i * dim..(i + 1) * dim], q),
            index: i,
        })
        .collect();
    all.sort();
    all.truncate(k);
    all
}
