//! Config-driven experiment runner: simulate → features → tune → train →
//! evaluate → report. Every stage reads its inputs from files written by
//! the previous one, so stages can run as separate processes.

mod config;
mod manifest;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;

pub use config::{
    default_budget, default_space, ExperimentConfig, ModelSpec, TuningConfig, UncertaintyConfig,
};
pub use manifest::{FileEntry, Manifest, ModelEntry, Timings, MANIFEST_FILE, TIMINGS_FILE};

use crate::data::{Dataset, IndicatorKind};
use crate::error::{Error, Result};
use crate::evaluation::{
    default_subgroups, model_reports, read_predictions, scaled_importances, write_predictions,
    CoverageReport, EvaluationReport, PredictionRecord,
};
use crate::features::{build_quality_dataset, build_value_dataset, prune_correlated};
use crate::io::{read_bytes, read_json, write_bytes, write_json};
use crate::models::{candidate_features, fit_model, FitOptions, FittedModel, ModelArtifact, ModelKind};
use crate::seed::{derive_seed, rng_for};
use crate::sim::{read_histories, simulate, write_histories};
use crate::tuning::{fold_datasets, smbo_tune, ParamConfig, TuneTrace};
use crate::uncertainty::{
    empirical_coverage, forest_interval, knn_range_interval, ols_interval, OobMasks,
    PredictionInterval,
};

pub const SIM_DIR: &str = "sim";
pub const DATA_DIR: &str = "data";
pub const MODELS_DIR: &str = "models";
pub const TUNING_DIR: &str = "tuning";
pub const EVAL_DIR: &str = "eval";

/// One prediction interval on a test probe, as written to `intervals.csv`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IntervalRecord {
    pub model: String,
    pub method: String,
    pub nominal_level: f64,
    pub player_id: u32,
    pub snapshot_date: chrono::NaiveDate,
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub actual: f64,
    /// Forest only: bias-corrected variance before clamping.
    pub raw_variance: Option<f64>,
}

/// Train and test sets of the configured indicator after removing the
/// held-out players, plus the features dropped by correlation pruning.
pub struct Splits {
    pub train: Dataset,
    pub test: Dataset,
    pub excluded: Vec<String>,
}

pub struct Experiment {
    pub config: ExperimentConfig,
    pub out: PathBuf,
}

impl Experiment {
    /// `out` overrides the configured output directory.
    pub fn new(config: ExperimentConfig, out: Option<PathBuf>) -> Result<Experiment> {
        config.validate()?;
        let out = out.unwrap_or_else(|| config.output_dir.clone());
        Ok(Experiment { config, out })
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    fn config_hash(&self) -> Result<String> {
        Ok(crate::seed::sha256_hex(&self.config.canonical_json()?))
    }

    /// Loads the manifest of this run, or starts a fresh one when it is
    /// missing or belongs to a different config.
    fn manifest(&self) -> Result<Manifest> {
        let hash = self.config_hash()?;
        let path = self.path(MANIFEST_FILE);
        if path.exists() {
            let m: Manifest = read_json(&path)?;
            if m.config_hash == hash {
                return Ok(m);
            }
        }
        Ok(Manifest::new(hash, self.config.seed))
    }

    fn record(&self, stage: &str, files: &[String], started: Instant, update: impl FnOnce(&mut Manifest)) -> Result<()> {
        let mut m = self.manifest()?;
        for rel in files {
            m.add_file(&self.out, rel)?;
        }
        update(&mut m);
        write_json(&self.path(MANIFEST_FILE), &m)?;
        let tpath = self.path(TIMINGS_FILE);
        let mut t: Timings = if tpath.exists() { read_json(&tpath)? } else { Timings::default() };
        t.stages.insert(stage.to_string(), started.elapsed().as_secs_f64());
        write_json(&tpath, &t)?;
        log::info!("{stage} finished in {:.1}s", started.elapsed().as_secs_f64());
        Ok(())
    }

    /// Simulates the league and writes match histories and both datasets.
    pub fn simulate(&self) -> Result<()> {
        let started = Instant::now();
        let cfg = self.config.sim_config();
        log::info!("simulating {} players over {} seasons", cfg.n_players, cfg.seasons);
        let out = simulate(&cfg)?;
        let dir = self.path(SIM_DIR);
        write_histories(&dir, &out.histories, &cfg)?;
        let files = sim_files(&dir)?;
        self.record("simulate", &files, started, |_| {})?;
        self.features()
    }

    /// Builds the quality (monthly) and value (biannual) datasets from the
    /// stored histories.
    pub fn features(&self) -> Result<()> {
        let started = Instant::now();
        let (histories, sim) = read_histories(&self.path(SIM_DIR))?;
        let init = sim.rating.initial_rating;
        let dir = self.path(DATA_DIR);
        let (q, qr) = build_quality_dataset(&histories, &self.config.features, init)?;
        let (v, vr) = build_value_dataset(&histories, &self.config.features, init)?;
        log::info!("quality: {} examples from {} players", qr.examples, qr.players_eligible);
        log::info!("value: {} examples from {} players", vr.examples, vr.players_eligible);
        q.save(&dir, "quality")?;
        v.save(&dir, "value")?;
        let mut files = Vec::new();
        for stem in ["quality", "value"] {
            files.push(format!("{DATA_DIR}/{stem}.csv"));
            files.push(format!("{DATA_DIR}/{stem}.schema.json"));
        }
        let hashes = [
            ("quality".to_string(), q.content_hash()?),
            ("value".to_string(), v.content_hash()?),
        ];
        self.record("features", &files, started, |m| m.datasets.extend(hashes))
    }

    pub fn dataset(&self) -> Result<Dataset> {
        let dir = self.path(DATA_DIR);
        if !dir.join(format!("{}.csv", self.config.indicator.as_str())).exists() {
            return Err(Error::data(format!(
                "no datasets in {}; run `simulate` (or `features`) first",
                dir.display()
            )));
        }
        Dataset::load(&dir, self.config.indicator.as_str())
    }

    pub fn splits(&self) -> Result<Splits> {
        let d = self.dataset()?;
        let d = if self.config.holdout_fraction > 0.0 {
            d.holdout_players(self.config.holdout_fraction, derive_seed(self.config.seed, "holdout"))?
                .0
        } else {
            d
        };
        let (train, test) = d.split_by_time(self.config.cutoff_year)?;
        let excluded = match d.indicator {
            IndicatorKind::Value => {
                prune_correlated(&d, self.config.cutoff_year, self.config.features.correlation_threshold)?.1
            }
            IndicatorKind::Quality => Vec::new(),
        };
        Ok(Splits { train, test, excluded })
    }

    fn model_specs(&self, only: Option<&[String]>) -> Result<Vec<&ModelSpec>> {
        match only {
            None => Ok(self.config.models.iter().collect()),
            Some(names) => names
                .iter()
                .map(|n| {
                    self.config
                        .model(n)
                        .ok_or_else(|| Error::config("models", format!("no model named `{n}` in the config")))
                })
                .collect(),
        }
    }

    /// Expanding-window tuning of every model with a positive budget.
    pub fn tune(&self, only: Option<&[String]>) -> Result<BTreeMap<String, TuneTrace>> {
        let started = Instant::now();
        let splits = self.splits()?;
        let cands = candidate_features(&splits.train, &splits.excluded);
        let cv_data = self.tuning_sample(&splits.train);
        let folds = fold_datasets(&cv_data)?;
        let mut traces = BTreeMap::new();
        let mut files = Vec::new();
        for spec in self.model_specs(only)? {
            let budget = spec.tuning_budget();
            let rel = format!("{TUNING_DIR}/{}.json", spec.name);
            if !self.config.tuning.enabled || budget == 0 {
                let stale = self.path(&rel);
                if stale.exists() {
                    std::fs::remove_file(&stale).map_err(|e| Error::io(&stale, e))?;
                }
                continue;
            }
            let t0 = Instant::now();
            let seed = derive_seed(self.config.seed, &format!("tune/{}", spec.name));
            let objective = |c: &ParamConfig| {
                let params = merged(&spec.params, c);
                let opts = FitOptions {
                    select_features: false,
                    ..FitOptions::default()
                };
                let mut losses = Vec::with_capacity(folds.len());
                for (_, fit, val) in &folds {
                    let loss = fit_model(&spec.name, spec.kind, &params, fit, &cands, seed, &opts)
                        .and_then(|a| a.predict(val))
                        .and_then(|p| crate::evaluation::rmse(&p, &val.labels()));
                    match loss {
                        Ok(l) => losses.push(l),
                        Err(e) => {
                            log::warn!("{}: trial failed: {e}", spec.name);
                            return f64::NAN;
                        }
                    }
                }
                losses.iter().sum::<f64>() / losses.len() as f64
            };
            let trace = smbo_tune(&spec.hyper_space(), objective, budget, self.config.tuning.n_init, seed)?;
            log::info!(
                "tuned {} in {:.1}s: best cv rmse {:.4}",
                spec.name,
                t0.elapsed().as_secs_f64(),
                trace.best_loss
            );
            write_json(&self.path(&rel), &trace)?;
            files.push(rel);
            traces.insert(spec.name.clone(), trace);
        }
        self.record("tune", &files, started, |_| {})?;
        Ok(traces)
    }

    /// Players kept for cross-validation folds during tuning.
    fn tuning_sample(&self, train: &Dataset) -> Dataset {
        let frac = self.config.tuning.player_fraction;
        if frac >= 1.0 {
            return train.clone();
        }
        let mut ids: Vec<u32> = train.player_ids().into_iter().collect();
        ids.shuffle(&mut rng_for(self.config.seed, "tune/players"));
        let keep: BTreeSet<u32> = ids
            .iter()
            .take(((ids.len() as f64 * frac).ceil() as usize).max(1))
            .copied()
            .collect();
        train.filter(|e| keep.contains(&e.player_id))
    }

    /// Final hyperparameters of a model: fixed params overridden by the
    /// tuned optimum when a trace exists.
    pub fn final_params(&self, spec: &ModelSpec) -> Result<(ParamConfig, bool)> {
        let rel = format!("{TUNING_DIR}/{}.json", spec.name);
        let path = self.path(&rel);
        if self.config.tuning.enabled && spec.tuning_budget() > 0 && path.exists() {
            let trace: TuneTrace = read_json(&path)?;
            Ok((merged(&spec.params, &trace.best_config), true))
        } else {
            Ok((spec.params.clone(), false))
        }
    }

    /// Fits every model on the complete training set.
    pub fn train(&self, only: Option<&[String]>) -> Result<()> {
        let started = Instant::now();
        let splits = self.splits()?;
        let cands = candidate_features(&splits.train, &splits.excluded);
        let train_hash = splits.train.content_hash()?;
        let opts = FitOptions {
            select_features: self.config.select_features,
            ..FitOptions::default()
        };
        let mut files = Vec::new();
        let mut entries = Vec::new();
        for spec in self.model_specs(only)? {
            let t0 = Instant::now();
            let (params, tuned) = self.final_params(spec)?;
            let mut art = fit_model(&spec.name, spec.kind, &params, &splits.train, &cands, self.config.seed, &opts)?;
            art.dataset_hash = train_hash.clone();
            art.refit_on_full_train = true;
            let rel = format!("{MODELS_DIR}/{}.json", spec.name);
            write_bytes(&self.path(&rel), &art.to_json()?)?;
            log::info!(
                "trained {} on {} examples with {} features in {:.1}s",
                spec.name,
                art.n_train,
                art.features.len(),
                t0.elapsed().as_secs_f64()
            );
            entries.push((
                spec.name.clone(),
                ModelEntry {
                    kind: spec.kind,
                    artifact: rel.clone(),
                    tuning: tuned.then(|| format!("{TUNING_DIR}/{}.json", spec.name)),
                    refit_on_full_train: art.refit_on_full_train,
                    dataset_hash: art.dataset_hash.clone(),
                    n_features: art.features.len(),
                },
            ));
            files.push(rel);
        }
        self.record("train", &files, started, |m| m.models.extend(entries))
    }

    pub fn load_model(&self, name: &str) -> Result<ModelArtifact> {
        let path = self.path(&format!("{MODELS_DIR}/{name}.json"));
        if !path.exists() {
            return Err(Error::data(format!(
                "no artifact for model `{name}` at {}; run `train` first",
                path.display()
            )));
        }
        ModelArtifact::from_json(&read_bytes(&path)?)
    }

    /// Test predictions and intervals of every configured model, then the report.
    pub fn evaluate(&self) -> Result<EvaluationReport> {
        let started = Instant::now();
        let splits = self.splits()?;
        let test = &splits.test;
        let probes = self.probe_indices(test.len());
        let sciskill = test.feature_index("sciskill");
        let mut records = Vec::new();
        let mut intervals = Vec::new();
        for spec in &self.config.models {
            let mut art = self.load_model(&spec.name)?;
            let pred = art.predict(test)?;
            records.extend(test.examples.iter().zip(&pred).map(|(e, &p)| PredictionRecord {
                model: spec.name.clone(),
                player_id: e.player_id,
                snapshot_date: e.snapshot_date,
                age_years: e.age_years,
                current_indicator: e.current_indicator,
                current_quality: match (test.indicator, sciskill) {
                    (IndicatorKind::Value, Some(j)) => e.features[j],
                    _ => e.current_indicator,
                },
                actual: e.label,
                predicted: p,
            }));
            intervals.extend(self.intervals(&mut art, test, &probes)?);
        }
        let dir = self.path(EVAL_DIR);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut buf = Vec::new();
        write_predictions(&records, &mut buf)?;
        write_bytes(&dir.join("predictions.csv"), &buf)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &intervals {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::data(e.to_string()))?;
        write_bytes(&dir.join("intervals.csv"), &bytes)?;
        let files = vec![format!("{EVAL_DIR}/predictions.csv"), format!("{EVAL_DIR}/intervals.csv")];
        self.record("evaluate", &files, started, |_| {})?;
        self.report()
    }

    fn probe_indices(&self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut rng_for(self.config.seed, "uq/probes"));
        idx.truncate(self.config.uncertainty.probes.min(n));
        idx.sort_unstable();
        idx
    }

    fn intervals(&self, art: &mut ModelArtifact, test: &Dataset, probes: &[usize]) -> Result<Vec<IntervalRecord>> {
        let level = self.config.uncertainty.level;
        let x = test.design(&art.features)?;
        let mut out = Vec::new();
        let mut push = |i: usize, iv: PredictionInterval, raw: Option<f64>| {
            let e = &test.examples[i];
            out.push(IntervalRecord {
                model: art.name.clone(),
                method: iv.method.as_str().to_string(),
                nominal_level: iv.nominal_level,
                player_id: e.player_id,
                snapshot_date: e.snapshot_date,
                point: iv.point,
                lower: iv.lower,
                upper: iv.upper,
                actual: e.label,
                raw_variance: raw,
            });
        };
        match (&mut art.model, art.kind) {
            (FittedModel::Linear(fit), ModelKind::Ols) => {
                for &i in probes {
                    push(i, ols_interval(fit, x.row(i), level)?, None);
                }
            }
            (FittedModel::Forest(f), _) if f.params.bootstrap => {
                let masks = OobMasks::new(f.inbag())?;
                for &i in probes {
                    let (iv, jk) = forest_interval(f, &masks, x.row(i), level)?;
                    push(i, iv, Some(jk.raw));
                }
            }
            (FittedModel::Knn(k), _) => {
                let kk = k.params.k.max(2);
                for &i in probes {
                    push(i, knn_range_interval(k, x.row(i), kk)?, None);
                }
            }
            _ => {}
        }
        Ok(out)
    }

    /// Rebuilds `report.json` and the plot tables from `predictions.csv`,
    /// `intervals.csv` and the model artifacts.
    pub fn report(&self) -> Result<EvaluationReport> {
        let started = Instant::now();
        let dir = self.path(EVAL_DIR);
        let pred_path = dir.join("predictions.csv");
        if !pred_path.exists() {
            return Err(Error::data(format!(
                "no predictions at {}; run `evaluate` first",
                pred_path.display()
            )));
        }
        let records = read_predictions(std::io::Cursor::new(read_bytes(&pred_path)?))?;
        let specs = default_subgroups(self.config.indicator);
        let models = model_reports(&records, &specs)?;
        let mut importances = BTreeMap::new();
        for m in &models {
            let art = self.load_model(&m.model)?;
            if let Some(raw) = art.importances() {
                importances.insert(m.model.clone(), scaled_importances(art.features.clone(), raw));
            }
        }
        let ivs: Vec<IntervalRecord> = {
            let path = dir.join("intervals.csv");
            if path.exists() {
                let mut r = csv::Reader::from_reader(std::io::Cursor::new(read_bytes(&path)?));
                r.deserialize().collect::<std::result::Result<_, _>>()?
            } else {
                Vec::new()
            }
        };
        let report = EvaluationReport {
            indicator: self.config.indicator,
            models,
            subgroup_specs: specs,
            importances,
            uncertainty: coverage_reports(&ivs)?,
        };
        write_json(&dir.join("report.json"), &report)?;
        let tables = [
            ("global.tsv", report.global_tsv()),
            ("per_age.tsv", report.per_age_tsv()),
            ("subgroups.tsv", report.subgroup_tsv()),
            ("importances.tsv", report.importance_tsv()),
        ];
        let mut files = vec![format!("{EVAL_DIR}/report.json")];
        for (name, body) in tables {
            write_bytes(&dir.join(name), body.as_bytes())?;
            files.push(format!("{EVAL_DIR}/{name}"));
        }
        self.record("report", &files, started, |_| {})?;
        Ok(report)
    }

    /// Every stage in order.
    pub fn run_all(&self) -> Result<EvaluationReport> {
        self.simulate()?;
        if self.config.tuning.enabled {
            self.tune(None)?;
        }
        self.train(None)?;
        self.evaluate()
    }

    /// Recomputes every file hash listed in the manifest; returns the
    /// paths whose content no longer matches.
    pub fn verify_manifest(&self) -> Result<Vec<String>> {
        let m: Manifest = read_json(&self.path(MANIFEST_FILE))?;
        m.stale_files(&self.out)
    }
}

fn merged(base: &ParamConfig, over: &ParamConfig) -> ParamConfig {
    let mut p = base.clone();
    p.extend(over.iter().map(|(k, v)| (k.clone(), v.clone())));
    p
}

fn sim_files(dir: &Path) -> Result<Vec<String>> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .map(|e| format!("{SIM_DIR}/{}", e.file_name().to_string_lossy()))
        .collect();
    names.sort();
    Ok(names)
}

/// Coverage per (model, method) in first-appearance order.
pub fn coverage_reports(ivs: &[IntervalRecord]) -> Result<Vec<CoverageReport>> {
    let mut order: Vec<(String, String)> = Vec::new();
    for r in ivs {
        let key = (r.model.clone(), r.method.clone());
        if !order.contains(&key) {
            order.push(key);
        }
    }
    order
        .into_iter()
        .map(|(model, method)| {
            let rows: Vec<&IntervalRecord> = ivs.iter().filter(|r| r.model == model && r.method == method).collect();
            let parsed: Vec<PredictionInterval> = rows
                .iter()
                .map(|r| PredictionInterval {
                    point: r.point,
                    lower: r.lower,
                    upper: r.upper,
                    method: crate::uncertainty::IntervalMethod::OlsT,
                    nominal_level: r.nominal_level,
                })
                .collect();
            let actual: Vec<f64> = rows.iter().map(|r| r.actual).collect();
            let raws: Vec<f64> = rows.iter().filter_map(|r| r.raw_variance).collect();
            Ok(CoverageReport {
                model,
                method,
                nominal_level: rows[0].nominal_level,
                coverage: empirical_coverage(&parsed, &actual)?,
                mean_width: parsed.iter().map(|p| p.width()).sum::<f64>() / parsed.len() as f64,
                n: rows.len(),
                clamped_fraction: (!raws.is_empty())
                    .then(|| raws.iter().filter(|&&v| v < 0.0).count() as f64 / raws.len() as f64),
            })
        })
        .collect()
}
