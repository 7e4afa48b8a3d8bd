//! Navigable small-world graph for approximate neighbor search.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use super::kdtree::{squared_distance, Candidate};

#[derive(Debug, Clone)]
pub struct SmallWorld {
    dim: usize,
    links: Vec<Vec<u32>>,
    pub ef_search: usize,
}

impl SmallWorld {
    /// Inserts points in index order, linking each to its `m` nearest
    /// already-inserted points found by a beam search of width `ef_build`.
    pub fn build(points: &[f64], dim: usize, m: usize, ef_build: usize) -> SmallWorld {
        let n = points.len() / dim.max(1);
        let mut g = SmallWorld {
            dim,
            links: vec![Vec::new(); n],
            ef_search: ef_build,
        };
        let max_degree = 2 * m;
        for i in 1..n {
            let q = g.point(points, i).to_vec();
            let found = g.beam(points, &q, ef_build.max(m), i);
            for c in found.into_iter().take(m) {
                g.links[i].push(c.index as u32);
                g.links[c.index].push(i as u32);
                if g.links[c.index].len() > max_degree {
                    g.prune(points, c.index, max_degree);
                }
            }
        }
        g
    }

    fn point<'a>(&self, points: &'a [f64], i: usize) -> &'a [f64] {
        &points[i * self.dim..(i + 1) * self.dim]
    }

    fn prune(&mut self, points: &[f64], i: usize, keep: usize) {
        let p = self.point(points, i).to_vec();
        let mut l: Vec<Candidate> = self.links[i]
            .iter()
            .map(|&j| Candidate {
                dist2: squared_distance(self.point(points, j as usize), &p),
                index: j as usize,
            })
            .collect();
        l.sort();
        l.truncate(keep);
        self.links[i] = l.into_iter().map(|c| c.index as u32).collect();
    }

    /// Best-first search restricted to nodes `< limit`.
    fn beam(&self, points: &[f64], q: &[f64], ef: usize, limit: usize) -> Vec<Candidate> {
        if limit == 0 {
            return Vec::new();
        }
        let start = Candidate {
            dist2: squared_distance(self.point(points, 0), q),
            index: 0,
        };
        let mut visited = HashSet::new();
        visited.insert(0usize);
        let mut frontier = BinaryHeap::new();
        frontier.push(Reverse(start));
        let mut best = BinaryHeap::new();
        best.push(start);
        while let Some(Reverse(c)) = frontier.pop() {
            if best.len() >= ef && c > *best.peek().unwrap() {
                break;
            }
            for &j in &self.links[c.index] {
                let j = j as usize;
                if j >= limit || !visited.insert(j) {
                    continue;
                }
                let cand = Candidate {
                    dist2: squared_distance(self.point(points, j), q),
                    index: j,
                };
                if best.len() < ef || cand < *best.peek().unwrap() {
                    frontier.push(Reverse(cand));
                    best.push(cand);
                    if best.len() > ef {
                        best.pop();
                    }
                }
            }
        }
        best.into_sorted_vec()
    }

    pub fn query(&self, points: &[f64], q: &[f64], k: usize) -> Vec<Candidate> {
        let mut r = self.beam(points, q, self.ef_search.max(k), self.links.len());
        r.truncate(k);
        r
    }
}
