mod common;

use common::{brute_force_tree, gaussian, heteroscedastic, names, rng, same_tree};
use proptest::prelude::*;
use rand::Rng;
use scoutcast::evaluation::rmse;
use scoutcast::tree::{
    fit_forest, fit_gbt, fit_tree, select_by_noise, ForestParams, GbtParams, NoiseConfig, TreeParams,
};
use scoutcast::Matrix;

fn integer_problem(seed: u64) -> (Vec<Vec<i64>>, Vec<i64>, Option<usize>, usize) {
    let mut r = rng(seed);
    let n = r.random_range(2..=200);
    let p = r.random_range(1..=5);
    let levels: Vec<i64> = (0..p).map(|_| r.random_range(2..=12)).collect();
    let x: Vec<Vec<i64>> = (0..n)
        .map(|_| levels.iter().map(|&l| r.random_range(0..l)).collect())
        .collect();
    let y: Vec<i64> = x
        .iter()
        .map(|row| 3 * row[0] - row[p - 1] + r.random_range(0..15))
        .collect();
    let depth = match r.random_range(0..4) {
        0 => None,
        _ => Some(r.random_range(0..7)),
    };
    (x, y, depth, r.random_range(1..=8))
}

fn to_matrix(x: &[Vec<i64>]) -> Matrix {
    let rows: Vec<Vec<f64>> = x.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
    Matrix::from_rows(&rows)
}

#[test]
fn tree_matches_exhaustive_search() {
    for seed in 0..300 {
        let (x, y, depth, min_leaf) = integer_problem(seed);
        let params = TreeParams {
            max_depth: depth,
            min_samples_leaf: min_leaf,
        };
        let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
        let fitted = fit_tree(&to_matrix(&x), &yf, &params).unwrap();
        let reference = brute_force_tree(&x, &y, depth, min_leaf);
        assert!(same_tree(&fitted, 0, &reference, 1e-9), "seed {seed}");
    }
}

#[test]
fn tree_step_example() {
    let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]);
    let t = fit_tree(&x, &[0.0, 0.0, 10.0, 10.0], &TreeParams { max_depth: None, min_samples_leaf: 1 }).unwrap();
    let root = &t.nodes[0];
    assert!(root.threshold > 1.0 && root.threshold < 2.0);
    assert_eq!(t.nodes[root.left].value, 0.0);
    assert_eq!(t.nodes[root.right].value, 10.0);
    assert_eq!(t.n_leaves(), 2);
}

#[test]
fn tree_trivial_cases() {
    let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]);
    let flat = fit_tree(&x, &[4.0; 4], &TreeParams { max_depth: None, min_samples_leaf: 1 }).unwrap();
    assert_eq!(flat.nodes.len(), 1);
    assert_eq!(flat.nodes[0].value, 4.0);
    let forced = fit_tree(&x, &[1.0, 2.0, 3.0, 6.0], &TreeParams { max_depth: None, min_samples_leaf: 4 }).unwrap();
    assert_eq!(forced.nodes.len(), 1);
    assert_eq!(forced.nodes[0].value, 3.0);
}

#[test]
fn deep_tree_interpolates_unique_rows() {
    let mut r = rng(21);
    let rows: Vec<[f64; 3]> = (0..300).map(|_| [r.random(), r.random(), r.random()]).collect();
    let y: Vec<f64> = (0..300).map(|_| gaussian(&mut r)).collect();
    let x = Matrix::from_rows(&rows);
    let t = fit_tree(&x, &y, &TreeParams { max_depth: None, min_samples_leaf: 1 }).unwrap();
    for i in 0..300 {
        assert_eq!(t.predict_row(x.row(i)), y[i]);
    }
}

#[test]
fn single_split_puts_all_importance_on_one_feature() {
    let x = Matrix::from_rows(&[[0.0, 5.0], [1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]);
    let t = fit_tree(&x, &[0.0, 0.0, 10.0, 10.0], &TreeParams { max_depth: Some(1), min_samples_leaf: 1 }).unwrap();
    let imp = t.importances(2);
    assert_eq!(imp, vec![100.0, 0.0]);
}

#[test]
fn duplicated_label_outranks_noise() {
    for seed in 0..50 {
        let mut r = rng(500 + seed);
        let y: Vec<f64> = (0..200).map(|_| gaussian(&mut r)).collect();
        let rows: Vec<[f64; 2]> = y.iter().map(|&v| [gaussian(&mut r), v]).collect();
        let t = fit_tree(&Matrix::from_rows(&rows), &y, &TreeParams::default()).unwrap();
        let imp = t.importances(2);
        assert!(imp[1] > imp[0], "seed {seed}");
    }
}

#[test]
fn forest_is_mean_of_trees() {
    let (x, y) = heteroscedastic(400, 1);
    let params = ForestParams {
        n_trees: 25,
        seed: 4,
        ..ForestParams::default()
    };
    let f = fit_forest(&x, &y, &params).unwrap();
    for i in 0..50 {
        let mut per_tree: Vec<f64> = f.trees.iter().map(|t| t.predict_row(x.row(i))).collect();
        let naive = per_tree.iter().sum::<f64>() / 25.0;
        per_tree.sort_by(f64::total_cmp);
        let sorted = per_tree.iter().sum::<f64>() / 25.0;
        let got = f.predict_row(x.row(i));
        assert_eq!(got, sorted);
        assert!((got - naive).abs() <= 1e-12 * naive.abs().max(1.0));
    }
    let imp = f.importances();
    for j in 0..2 {
        let mean = f.trees.iter().map(|t| t.importances(2)[j]).sum::<f64>() / 25.0;
        assert!((imp[j] - mean).abs() <= 1e-9 * mean.max(1.0));
    }
}

#[test]
fn forest_predictions_ignore_tree_order() {
    let (x, y) = heteroscedastic(300, 2);
    let mut f = fit_forest(&x, &y, &ForestParams { n_trees: 15, seed: 8, ..ForestParams::default() }).unwrap();
    let before = f.predict(&x);
    f.trees.reverse();
    f.trees.swap(0, 7);
    assert_eq!(f.predict(&x), before);
}

#[test]
fn degenerate_forest_equals_tree() {
    let (x, y) = heteroscedastic(300, 3);
    let params = ForestParams {
        n_trees: 1,
        mtry: Some(2),
        max_depth: Some(5),
        min_samples_leaf: 4,
        bootstrap: false,
        seed: 1,
    };
    let f = fit_forest(&x, &y, &params).unwrap();
    let t = fit_tree(&x, &y, &TreeParams { max_depth: Some(5), min_samples_leaf: 4 }).unwrap();
    assert_eq!(f.predict(&x), t.predict(&x));
}

#[test]
fn forest_beats_single_tree_out_of_sample() {
    let gen = |n: usize, seed: u64| {
        let mut r = rng(seed);
        let rows: Vec<[f64; 4]> = (0..n).map(|_| [r.random(), r.random(), r.random(), r.random()]).collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|v| 10.0 * (3.0 * v[0]).sin() + 5.0 * v[1] * v[2] + gaussian(&mut r))
            .collect();
        (Matrix::from_rows(&rows), y)
    };
    let (xt, yt) = gen(1_000, 30);
    let (xv, yv) = gen(1_000, 31);
    let tree = fit_tree(&xt, &yt, &TreeParams { max_depth: None, min_samples_leaf: 5 }).unwrap();
    let forest = fit_forest(
        &xt,
        &yt,
        &ForestParams { n_trees: 200, max_depth: None, seed: 2, ..ForestParams::default() },
    )
    .unwrap();
    let tree_rmse = rmse(&tree.predict(&xv), &yv).unwrap();
    let forest_rmse = rmse(&forest.predict(&xv), &yv).unwrap();
    assert!(forest_rmse <= tree_rmse, "{forest_rmse} vs {tree_rmse}");
}

#[test]
fn gbt_training_rmse_never_rises() {
    let (x, y) = heteroscedastic(500, 5);
    let model = fit_gbt(
        &x,
        &y,
        &GbtParams { rounds: 100, learning_rate: 0.3, max_depth: 3, min_samples_leaf: 1, ..GbtParams::default() },
    )
    .unwrap();
    assert_eq!(model.trees.len(), 100);
    let mut last = rmse(&vec![model.base_score; y.len()], &y).unwrap();
    for (k, &r) in model.train_rmse.iter().enumerate() {
        assert!(r <= last + 1e-12, "round {k}");
        last = r;
    }
    assert!((last - rmse(&model.predict(&x), &y).unwrap()).abs() < 1e-9);
}

#[test]
fn gbt_hand_examples() {
    let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]);
    let y = [0.0, 0.0, 10.0, 10.0];
    let base = GbtParams {
        rounds: 1,
        learning_rate: 1.0,
        reg_lambda: 0.0,
        min_gain: 0.0,
        max_depth: 0,
        min_samples_leaf: 1,
        ..GbtParams::default()
    };
    let stump = fit_gbt(&x, &y, &base).unwrap();
    assert!(stump.predict(&x).iter().all(|&p| p == 5.0));

    let split = fit_gbt(&x, &y, &GbtParams { max_depth: 1, ..base.clone() }).unwrap();
    // leaf weights −G/H: left G = 0−5 + 0−5 = −10, H = 2 → +5 ... from base 5
    assert_eq!(split.predict(&x), vec![0.0, 0.0, 10.0, 10.0]);

    let shrunk = fit_gbt(&x, &y, &GbtParams { max_depth: 1, reg_lambda: 1e12, ..base }).unwrap();
    assert!(shrunk.predict(&x).iter().all(|&p| (p - 5.0).abs() < 1e-9));
}

#[test]
fn gbt_gain_rejected_below_min_gain() {
    let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]);
    let y = [0.0, 0.0, 10.0, 10.0];
    // the only useful split gains ½·(10²/2 + 10²/2 − 0) = 50
    let p = GbtParams {
        rounds: 1,
        learning_rate: 1.0,
        reg_lambda: 0.0,
        min_gain: 50.0,
        max_depth: 1,
        min_samples_leaf: 1,
        ..GbtParams::default()
    };
    assert_eq!(fit_gbt(&x, &y, &p).unwrap().trees[0].nodes.len(), 1);
    let p = GbtParams { min_gain: 49.0, ..p };
    let m = fit_gbt(&x, &y, &p).unwrap();
    assert_eq!(m.trees[0].nodes.len(), 3);
    assert!((m.importances()[0] - 1.0).abs() < 1e-9);
}

#[test]
fn noise_selection_keeps_label_copy_and_rarely_noise() {
    let mut kept_copy = 0;
    let mut kept_noise = 0;
    for seed in 0..100 {
        let mut r = rng(9_000 + seed);
        let y: Vec<f64> = (0..250).map(|_| gaussian(&mut r)).collect();
        let rows: Vec<[f64; 2]> = y.iter().map(|&v| [v, gaussian(&mut r)]).collect();
        let sel = select_by_noise(
            &Matrix::from_rows(&rows),
            &y,
            &["copy".into(), "noise".into()],
            &[false, false],
            &NoiseConfig { seed, ..NoiseConfig::default() },
            |x: &Matrix, y: &[f64]| Ok(fit_tree(x, y, &TreeParams::default())?.importances(x.cols())),
        )
        .unwrap();
        kept_copy += sel.selected.iter().any(|s| s == "copy") as usize;
        kept_noise += sel.selected.iter().any(|s| s == "noise") as usize;
    }
    assert_eq!(kept_copy, 100);
    assert!(kept_noise <= 10, "{kept_noise}");
}

#[test]
fn noise_selection_can_be_empty() {
    let mut r = rng(77);
    let y: Vec<f64> = (0..200).map(|_| gaussian(&mut r)).collect();
    let x = Matrix::from_rows(&(0..200).map(|_| [0.0]).collect::<Vec<_>>());
    let sel = select_by_noise(
        &x,
        &y,
        &names(1),
        &[false],
        &NoiseConfig::default(),
        |x: &Matrix, y: &[f64]| Ok(fit_tree(x, y, &TreeParams::default())?.importances(x.cols())),
    )
    .unwrap();
    assert!(sel.empty && sel.selected.is_empty());
}

fn affine_copy(x: &Matrix, j: usize) -> Matrix {
    let mut out = x.clone();
    for i in 0..x.rows() {
        out.set(i, j, 2.0 * x.get(i, j) + 7.0);
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn split_structure_survives_monotone_transform(seed in 0u64..1_000, j in 0usize..3) {
        let mut r = rng(seed);
        let rows: Vec<[f64; 3]> = (0..150)
            .map(|_| [r.random_range(0..20) as f64, r.random_range(0..20) as f64, r.random_range(0..20) as f64])
            .collect();
        let y: Vec<f64> = rows.iter().map(|v| v[0] - 0.5 * v[1] * v[2] / 10.0 + gaussian(&mut r)).collect();
        let x = Matrix::from_rows(&rows);
        let xt = affine_copy(&x, j);

        let tp = TreeParams { max_depth: Some(5), min_samples_leaf: 3 };
        prop_assert_eq!(
            fit_tree(&x, &y, &tp).unwrap().split_features(),
            fit_tree(&xt, &y, &tp).unwrap().split_features()
        );

        let fp = ForestParams { n_trees: 5, mtry: Some(2), max_depth: Some(5), seed, ..ForestParams::default() };
        let a = fit_forest(&x, &y, &fp).unwrap();
        let b = fit_forest(&xt, &y, &fp).unwrap();
        for (ta, tb) in a.trees.iter().zip(&b.trees) {
            prop_assert_eq!(ta.split_features(), tb.split_features());
        }

        let gp = GbtParams { rounds: 10, max_depth: 3, ..GbtParams::default() };
        let a = fit_gbt(&x, &y, &gp).unwrap();
        let b = fit_gbt(&xt, &y, &gp).unwrap();
        for (ta, tb) in a.trees.iter().zip(&b.trees) {
            prop_assert_eq!(ta.split_features(), tb.split_features());
        }
    }

    #[test]
    fn importances_are_nonnegative(seed in 0u64..1_000) {
        let (x, y) = heteroscedastic(120, seed);
        let t = fit_tree(&x, &y, &TreeParams::default()).unwrap();
        prop_assert!(t.importances(2).iter().all(|&v| v >= 0.0));
        let g = fit_gbt(&x, &y, &GbtParams { rounds: 5, ..GbtParams::default() }).unwrap();
        prop_assert!(g.importances().iter().all(|&v| v >= 0.0));
    }
}
