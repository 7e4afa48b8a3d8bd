use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_training, grow_least_squares, Presorted, Tree, TreeParams};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::{derive_seed, rng_from_seed, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Features tried per split; `None` means ⌈p/3⌉.
    pub mtry: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 200,
            mtry: None,
            max_depth: Some(14),
            min_samples_leaf: 5,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::invalid("a forest needs at least one tree"));
        }
        if self.mtry == Some(0) {
            return Err(Error::invalid("mtry must be >= 1"));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::invalid("min_samples_leaf must be >= 1"));
        }
        Ok(())
    }

    pub fn resolved_mtry(&self, p: usize) -> usize {
        self.mtry.unwrap_or(p.div_ceil(3)).clamp(1, p.max(1))
    }
}

/// Bagged least-squares trees. The in-bag counts are not serialized: each
/// tree's resample is regenerated from its seed when a model is loaded.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    pub mtry: usize,
    pub n_features: usize,
    pub n_train: usize,
    pub tree_seeds: Vec<u64>,
    pub trees: Vec<Tree>,
    #[serde(skip)]
    inbag: Vec<Vec<u16>>,
}

impl PartialEq for ForestModel {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params && self.trees == other.trees && self.tree_seeds == other.tree_seeds
    }
}

fn draw_inbag(rng: &mut Rng, n: usize, bootstrap: bool) -> Vec<u16> {
    if !bootstrap {
        return vec![1; n];
    }
    let mut counts = vec![0u16; n];
    for _ in 0..n {
        counts[rng.random_range(0..n)] += 1;
    }
    counts
}

pub fn fit_forest(x: &Matrix, y: &[f64], params: &ForestParams) -> Result<ForestModel> {
    check_training(x, y)?;
    params.validate()?;
    let n = y.len();
    let p = x.cols();
    let mtry = params.resolved_mtry(p);
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
    };
    let cols = x.columns();
    let presorted = Presorted::new(&cols);
    let tree_seeds: Vec<u64> = (0..params.n_trees)
        .map(|t| derive_seed(params.seed, &format!("forest/tree/{t}")))
        .collect();
    let grown: Vec<(Tree, Vec<u16>)> = tree_seeds
        .par_iter()
        .map(|&s| {
            let mut rng = rng_from_seed(s);
            let inbag = draw_inbag(&mut rng, n, params.bootstrap);
            let w: Vec<f64> = inbag.iter().map(|&c| c as f64).collect();
            let tree = grow_least_squares(&cols, &presorted, y, &w, &tree_params, mtry, &mut rng);
            (tree, inbag)
        })
        .collect();
    let (trees, inbag) = grown.into_iter().unzip();
    Ok(ForestModel {
        params: params.clone(),
        mtry,
        n_features: p,
        n_train: n,
        tree_seeds,
        trees,
        inbag,
    })
}

/// Order-independent mean: values are summed in sorted order.
pub(crate) fn ordered_mean(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

impl ForestModel {
    pub fn tree_predictions_row(&self, x: &[f64]) -> Vec<f64> {
        self.trees.iter().map(|t| t.predict_row(x)).collect()
    }

    /// Mean of the tree predictions, independent of tree order.
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        ordered_mean(&mut self.tree_predictions_row(x))
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        (0..x.rows())
            .into_par_iter()
            .map(|i| self.predict_row(x.row(i)))
            .collect()
    }

    /// Per-tree inclusion counts of each training sample, regenerated from
    /// the tree seeds if the model was deserialized.
    pub fn inbag(&mut self) -> &[Vec<u16>] {
        if self.inbag.len() != self.trees.len() {
            let (n, b) = (self.n_train, self.params.bootstrap);
            self.inbag = self
                .tree_seeds
                .par_iter()
                .map(|&s| draw_inbag(&mut rng_from_seed(s), n, b))
                .collect();
        }
        &self.inbag
    }

    pub fn inbag_counts(&self) -> Option<&[Vec<u16>]> {
        (self.inbag.len() == self.trees.len()).then_some(self.inbag.as_slice())
    }

    /// Mean over trees of each tree's summed split gain per feature.
    pub fn importances(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.n_features];
        for t in &self.trees {
            for (a, v) in total.iter_mut().zip(t.importances(self.n_features)) {
                *a += v;
            }
        }
        let b = self.trees.len() as f64;
        total.iter().map(|v| v / b).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;
    use crate::tree::fit_tree;

    fn data(n: usize, seed: u64) -> (Matrix, Vec<f64>) {
        let mut rng = rng_for(seed, "forest-test");
        let rows: Vec<[f64; 4]> = (0..n)
            .map(|_| [rng.random(), rng.random(), rng.random(), rng.random()])
            .collect();
        let y = rows
            .iter()
            .map(|r| 10.0 * (r[0] * 3.0).sin() + 5.0 * r[1] * r[1] + rng.random::<f64>())
            .collect();
        (Matrix::from_rows(&rows), y)
    }

    #[test]
    fn degenerate_forest_is_a_tree() {
        let (x, y) = data(300, 1);
        let fp = ForestParams {
            n_trees: 1,
            mtry: Some(4),
            max_depth: Some(6),
            min_samples_leaf: 3,
            bootstrap: false,
            seed: 9,
        };
        let f = fit_forest(&x, &y, &fp).unwrap();
        let t = fit_tree(&x, &y, &TreeParams { max_depth: Some(6), min_samples_leaf: 3 }).unwrap();
        assert_eq!(f.trees[0], t);
        assert_eq!(f.predict(&x), t.predict(&x));
    }

    #[test]
    fn counts_sum_to_n_and_regenerate() {
        let (x, y) = data(200, 2);
        let fp = ForestParams {
            n_trees: 7,
            seed: 3,
            ..ForestParams::default()
        };
        let mut f = fit_forest(&x, &y, &fp).unwrap();
        let counts = f.inbag().to_vec();
        assert!(counts.iter().all(|c| c.iter().map(|&v| v as usize).sum::<usize>() == 200));
        let json = serde_json::to_string(&f).unwrap();
        let mut back: ForestModel = serde_json::from_str(&json).unwrap();
        assert!(back.inbag_counts().is_none());
        assert_eq!(back.inbag(), counts.as_slice());
        assert_eq!(back.predict(&x), f.predict(&x));
    }

    #[test]
    fn seeded_determinism() {
        let (x, y) = data(200, 4);
        let fp = ForestParams {
            n_trees: 5,
            seed: 11,
            ..ForestParams::default()
        };
        let a = fit_forest(&x, &y, &fp).unwrap();
        let b = fit_forest(&x, &y, &fp).unwrap();
        assert_eq!(a, b);
    }
}
