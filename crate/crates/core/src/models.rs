//! The nine regressors behind one interface: per-model feature selection,
//! fitting from a parameter map, prediction and importances.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureKind, IndicatorKind};
use crate::error::{Error, Result};
use crate::features::{knn_columns, GROUP_COLUMN};
use crate::knn::{fit_knn, IndexKind, KnnModel, KnnParams, Metric, Weighting};
use crate::linear::{backward_select, fit_lasso, fit_lme, lasso_ranking, LassoOptions, LinearFit, LmeFit, LmeOptions};
use crate::matrix::Matrix;
use crate::seed::derive_seed;
use crate::tree::{
    fit_forest, fit_gbt, fit_tree, select_by_noise, ForestModel, ForestParams, GbtModel, GbtParams, NoiseConfig,
    NoiseSelection, SplitCandidates, Tree, TreeParams,
};
use crate::tuning::{ParamConfig, ParamValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ols,
    Lasso,
    Lme,
    Tree,
    Forest,
    Gbt,
    KnnEuclidean,
    KnnMahalanobis,
    KnnRelief,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Linear,
    Tree,
    Knn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 9] = [
        ModelKind::Ols,
        ModelKind::Lasso,
        ModelKind::Lme,
        ModelKind::Tree,
        ModelKind::Forest,
        ModelKind::Gbt,
        ModelKind::KnnEuclidean,
        ModelKind::KnnMahalanobis,
        ModelKind::KnnRelief,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Ols => "ols",
            ModelKind::Lasso => "lasso",
            ModelKind::Lme => "lme",
            ModelKind::Tree => "tree",
            ModelKind::Forest => "forest",
            ModelKind::Gbt => "gbt",
            ModelKind::KnnEuclidean => "knn_euclidean",
            ModelKind::KnnMahalanobis => "knn_mahalanobis",
            ModelKind::KnnRelief => "knn_relief",
        }
    }

    pub fn parse(s: &str) -> Result<ModelKind> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::UnknownModel(s.to_string()))
    }

    pub fn family(self) -> Family {
        match self {
            ModelKind::Ols | ModelKind::Lasso | ModelKind::Lme => Family::Linear,
            ModelKind::Tree | ModelKind::Forest | ModelKind::Gbt => Family::Tree,
            _ => Family::Knn,
        }
    }

    /// Accepted parameter names.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::Ols => &["p_threshold"],
            ModelKind::Lasso => &["lambda"],
            ModelKind::Lme => &["top_k", "ranking_lambda"],
            ModelKind::Tree => &["max_depth", "min_samples_leaf"],
            ModelKind::Forest => &["n_trees", "mtry", "max_depth", "min_samples_leaf", "bootstrap"],
            ModelKind::Gbt => &[
                "rounds",
                "learning_rate",
                "reg_lambda",
                "min_gain",
                "max_depth",
                "min_samples_leaf",
                "subsample",
                "quantile_bins",
            ],
            ModelKind::KnnEuclidean | ModelKind::KnnMahalanobis | ModelKind::KnnRelief => &[
                "k",
                "weighting",
                "ridge",
                "relief_samples",
                "relief_neighbors",
                "index",
                "graph_links",
                "graph_beam",
            ],
        }
    }

    pub fn check_params(self, params: &ParamConfig, field: &str) -> Result<()> {
        for key in params.keys() {
            if !self.param_names().contains(&key.as_str()) {
                return Err(Error::config(
                    format!("{field}.{key}"),
                    format!(
                        "unknown parameter for {}; expected one of: {}",
                        self.as_str(),
                        self.param_names().join(", ")
                    ),
                ));
            }
        }
        Ok(())
    }
}

fn get_f64(p: &ParamConfig, key: &str, default: f64) -> Result<f64> {
    match p.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_f64()
            .ok_or_else(|| Error::config(key, "expected a number")),
    }
}

fn get_usize(p: &ParamConfig, key: &str, default: usize) -> Result<usize> {
    let v = get_f64(p, key, default as f64)?;
    if !(v >= 0.0) || v.fract() != 0.0 {
        return Err(Error::config(key, format!("expected a non-negative integer, got {v}")));
    }
    Ok(v as usize)
}

fn get_str<'a>(p: &'a ParamConfig, key: &str, default: &'a str) -> Result<&'a str> {
    match p.get(key) {
        None => Ok(default),
        Some(ParamValue::Cat(s)) => Ok(s),
        Some(_) => Err(Error::config(key, "expected a string")),
    }
}

/// `0` means unlimited depth.
fn depth(v: usize) -> Option<usize> {
    (v > 0).then_some(v)
}

pub fn tree_params(p: &ParamConfig) -> Result<TreeParams> {
    Ok(TreeParams {
        max_depth: depth(get_usize(p, "max_depth", 8)?),
        min_samples_leaf: get_usize(p, "min_samples_leaf", 50)?,
    })
}

pub fn forest_params(p: &ParamConfig, seed: u64) -> Result<ForestParams> {
    let mtry = get_usize(p, "mtry", 0)?;
    Ok(ForestParams {
        n_trees: get_usize(p, "n_trees", 100)?,
        mtry: (mtry > 0).then_some(mtry),
        max_depth: depth(get_usize(p, "max_depth", 0)?),
        min_samples_leaf: get_usize(p, "min_samples_leaf", 25)?,
        bootstrap: get_str(p, "bootstrap", "true")? != "false",
        seed,
    })
}

pub fn gbt_params(p: &ParamConfig, seed: u64) -> Result<GbtParams> {
    let bins = get_usize(p, "quantile_bins", 0)?;
    Ok(GbtParams {
        rounds: get_usize(p, "rounds", 200)?,
        learning_rate: get_f64(p, "learning_rate", 0.1)?,
        reg_lambda: get_f64(p, "reg_lambda", 1.0)?,
        min_gain: get_f64(p, "min_gain", 0.0)?,
        max_depth: get_usize(p, "max_depth", 4)?,
        min_samples_leaf: get_usize(p, "min_samples_leaf", 20)?,
        subsample: get_f64(p, "subsample", 1.0)?,
        candidates: if bins == 0 {
            SplitCandidates::Exact
        } else {
            SplitCandidates::Quantile { max_bins: bins }
        },
        seed,
    })
}

pub fn knn_params(kind: ModelKind, p: &ParamConfig, seed: u64) -> Result<KnnParams> {
    let weighting = get_str(p, "weighting", "minmax")?;
    let index = match get_str(p, "index", "exact")? {
        "exact" => IndexKind::Exact,
        "approximate" => IndexKind::Approximate {
            m: get_usize(p, "graph_links", 12)?,
            ef: get_usize(p, "graph_beam", 64)?,
        },
        other => return Err(Error::config("index", format!("expected exact or approximate, got `{other}`"))),
    };
    let relief_samples = get_usize(p, "relief_samples", 0)?;
    Ok(KnnParams {
        k: get_usize(p, "k", 20)?,
        weighting: Weighting::parse(weighting).ok_or_else(|| {
            Error::config("weighting", format!("expected reciprocal, minmax or uniform, got `{weighting}`"))
        })?,
        metric: match kind {
            ModelKind::KnnMahalanobis => Metric::Mahalanobis,
            ModelKind::KnnRelief => Metric::Relief,
            _ => Metric::Euclidean,
        },
        ridge: get_f64(p, "ridge", 1e-6)?,
        relief_samples: (relief_samples > 0).then_some(relief_samples),
        relief_neighbors: get_usize(p, "relief_neighbors", 10)?,
        index,
        seed,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", content = "fit", rename_all = "snake_case")]
pub enum FittedModel {
    Linear(LinearFit),
    Lme(LmeFit),
    Tree(Tree),
    Forest(Box<ForestModel>),
    Gbt(GbtModel),
    Knn(Box<KnnModel>),
}

/// How the input features of a model were chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Selection {
    /// Every candidate feature.
    None,
    BackwardElimination { p_threshold: f64, removed: Vec<String> },
    NonzeroLasso { lambda: f64 },
    LassoTop { k: usize, lambda: f64, ranking: Vec<String> },
    NoiseFeatures(NoiseSelection),
    LagFeatures,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub name: String,
    pub kind: ModelKind,
    pub indicator: IndicatorKind,
    /// Input columns, in the order the model consumes them.
    pub features: Vec<String>,
    pub selection: Selection,
    pub params: ParamConfig,
    pub seed: u64,
    pub dataset_hash: String,
    /// The model was fit on the complete training set.
    pub refit_on_full_train: bool,
    pub n_train: usize,
    pub model: FittedModel,
}

/// Features every non-kNN model may use: the schema minus the nationality
/// code (a group key, not a measurement) and anything pruned.
pub fn candidate_features(d: &Dataset, excluded: &[String]) -> Vec<String> {
    d.schema
        .iter()
        .map(|f| f.name.clone())
        .filter(|n| n != GROUP_COLUMN && !excluded.contains(n))
        .collect()
}

pub struct FitOptions {
    /// Apply the per-model feature selection step.
    pub select_features: bool,
    pub noise: NoiseConfig,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            select_features: true,
            noise: NoiseConfig::default(),
        }
    }
}

/// Fits one model of `kind` on `train` using the given candidate features.
pub fn fit_model(
    name: &str,
    kind: ModelKind,
    params: &ParamConfig,
    train: &Dataset,
    candidates: &[String],
    seed: u64,
    opts: &FitOptions,
) -> Result<ModelArtifact> {
    kind.check_params(params, &format!("models.{name}.params"))?;
    if train.is_empty() {
        return Err(Error::data(format!("no training examples for model `{name}`")));
    }
    let y = train.labels();
    let model_seed = derive_seed(seed, &format!("model/{name}"));
    let (features, selection, model) = match kind.family() {
        Family::Linear => fit_linear(kind, params, train, candidates, &y, opts)?,
        Family::Tree => fit_tree_family(kind, params, train, candidates, &y, model_seed, opts)?,
        Family::Knn => {
            let features = knn_columns(train.indicator);
            let x = train.design(&features)?;
            let kp = knn_params(kind, params, model_seed)?;
            let m = fit_knn(&x, &y, &features, &kp)?;
            (features, Selection::LagFeatures, FittedModel::Knn(Box::new(m)))
        }
    };
    Ok(ModelArtifact {
        name: name.to_string(),
        kind,
        indicator: train.indicator,
        features,
        selection,
        params: params.clone(),
        seed: model_seed,
        dataset_hash: String::new(),
        refit_on_full_train: false,
        n_train: train.len(),
        model,
    })
}

type Fitted = (Vec<String>, Selection, FittedModel);

fn fit_linear(
    kind: ModelKind,
    params: &ParamConfig,
    train: &Dataset,
    candidates: &[String],
    y: &[f64],
    opts: &FitOptions,
) -> Result<Fitted> {
    let x = train.design(candidates)?;
    match kind {
        ModelKind::Ols => {
            let p_threshold = get_f64(params, "p_threshold", 0.05)?;
            let fit = if opts.select_features {
                backward_select(&x, y, candidates, p_threshold)?
            } else {
                crate::linear::fit_ols(&x, y, candidates)?
            };
            let removed = candidates
                .iter()
                .filter(|c| !fit.selected_features.contains(c))
                .cloned()
                .collect();
            Ok((
                fit.selected_features.clone(),
                Selection::BackwardElimination { p_threshold, removed },
                FittedModel::Linear(fit),
            ))
        }
        ModelKind::Lasso => {
            let lambda = get_f64(params, "lambda", 0.01)?;
            let (fit, _) = fit_lasso(&x, y, candidates, lambda, &LassoOptions::default())?;
            Ok((
                fit.selected_features.clone(),
                Selection::NonzeroLasso { lambda },
                FittedModel::Linear(fit),
            ))
        }
        ModelKind::Lme => {
            let k = get_usize(params, "top_k", 20)?;
            let lambda = get_f64(params, "ranking_lambda", 0.001)?;
            let ranking = if opts.select_features {
                lasso_ranking(&x, y, candidates, lambda)?
            } else {
                candidates.to_vec()
            };
            let features: Vec<String> = ranking.iter().take(k).cloned().collect();
            let gi = train
                .feature_index(GROUP_COLUMN)
                .ok_or_else(|| Error::SchemaMismatch(format!("mixed model needs the `{GROUP_COLUMN}` column")))?;
            let groups = train.column(gi);
            let fit = fit_lme(&train.design(&features)?, y, &groups, &features, GROUP_COLUMN, &LmeOptions::default())?;
            Ok((
                features,
                Selection::LassoTop { k, lambda, ranking },
                FittedModel::Lme(fit),
            ))
        }
        _ => unreachable!("not a linear model"),
    }
}

fn fit_tree_family(
    kind: ModelKind,
    params: &ParamConfig,
    train: &Dataset,
    candidates: &[String],
    y: &[f64],
    seed: u64,
    opts: &FitOptions,
) -> Result<Fitted> {
    let x = train.design(candidates)?;
    let (features, selection) = if opts.select_features {
        let discrete: Vec<bool> = candidates
            .iter()
            .map(|c| {
                let j = train.feature_index(c).expect("candidate in schema");
                train.schema[j].kind == FeatureKind::Discrete
            })
            .collect();
        let noise = NoiseConfig {
            seed: derive_seed(seed, "noise"),
            ..opts.noise.clone()
        };
        let sel = select_by_noise(&x, y, candidates, &discrete, &noise, |xa, ya| {
            Ok(fit_raw(kind, params, xa, ya, seed)?.1)
        })?;
        (sel.selected.clone(), Selection::NoiseFeatures(sel))
    } else {
        (candidates.to_vec(), Selection::None)
    };
    let xs = train.design(&features)?;
    let (model, _) = fit_raw(kind, params, &xs, y, seed)?;
    Ok((features, selection, model))
}

/// Fits a tree-family model and returns it with its raw importances.
fn fit_raw(kind: ModelKind, params: &ParamConfig, x: &Matrix, y: &[f64], seed: u64) -> Result<(FittedModel, Vec<f64>)> {
    Ok(match kind {
        ModelKind::Tree => {
            let t = fit_tree(x, y, &tree_params(params)?)?;
            let imp = t.importances(x.cols());
            (FittedModel::Tree(t), imp)
        }
        ModelKind::Forest => {
            let f = fit_forest(x, y, &forest_params(params, seed)?)?;
            let imp = f.importances();
            (FittedModel::Forest(Box::new(f)), imp)
        }
        ModelKind::Gbt => {
            let g = fit_gbt(x, y, &gbt_params(params, seed)?)?;
            let imp = g.importances();
            (FittedModel::Gbt(g), imp)
        }
        _ => unreachable!("not a tree model"),
    })
}

impl ModelArtifact {
    pub fn predict(&self, d: &Dataset) -> Result<Vec<f64>> {
        let x = d.design(&self.features)?;
        match &self.model {
            FittedModel::Linear(f) => f.predict(&x),
            FittedModel::Lme(f) => {
                let gi = d
                    .feature_index(GROUP_COLUMN)
                    .ok_or_else(|| Error::SchemaMismatch(format!("missing `{GROUP_COLUMN}` column")))?;
                Ok((0..x.rows())
                    .map(|i| f.predict_row(x.row(i), d.examples[i].features[gi]))
                    .collect())
            }
            FittedModel::Tree(t) => Ok(t.predict(&x)),
            FittedModel::Forest(f) => Ok(f.predict(&x)),
            FittedModel::Gbt(g) => Ok(g.predict(&x)),
            FittedModel::Knn(k) => k.predict(&x),
        }
    }

    /// Raw importances per input feature; `None` for kNN models.
    /// Linear models use |coefficient| × training standard deviation.
    pub fn importances(&self) -> Option<Vec<f64>> {
        match &self.model {
            FittedModel::Linear(f) => Some(
                f.coefficients
                    .iter()
                    .zip(&f.feature_sds)
                    .map(|(b, s)| (b * s).abs())
                    .collect(),
            ),
            FittedModel::Lme(f) => Some(
                f.fixed_effects
                    .iter()
                    .zip(&f.feature_sds)
                    .map(|(b, s)| (b * s).abs())
                    .collect(),
            ),
            FittedModel::Tree(t) => Some(t.importances(self.features.len())),
            FittedModel::Forest(f) => Some(f.importances()),
            FittedModel::Gbt(g) => Some(g.importances()),
            FittedModel::Knn(_) => None,
        }
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        Ok(serde_json::to_vec(self)?)
    }

    pub fn from_json(bytes: &[u8]) -> Result<ModelArtifact> {
        Ok(serde_json::from_slice(bytes)?)
    }
}
