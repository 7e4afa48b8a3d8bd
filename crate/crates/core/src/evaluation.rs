//! Loss tables and report assembly. Every number in a report is derived
//! from prediction records, which are persisted alongside it.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::data::IndicatorKind;
use crate::error::{Error, Result};

pub fn rmse(pred: &[f64], actual: &[f64]) -> Result<f64> {
    check_lengths(pred, actual)?;
    let sse: f64 = pred.iter().zip(actual).map(|(p, a)| (p - a) * (p - a)).sum();
    Ok((sse / pred.len() as f64).sqrt())
}

pub fn mae(pred: &[f64], actual: &[f64]) -> Result<f64> {
    check_lengths(pred, actual)?;
    let s: f64 = pred.iter().zip(actual).map(|(p, a)| (p - a).abs()).sum();
    Ok(s / pred.len() as f64)
}

fn check_lengths(pred: &[f64], actual: &[f64]) -> Result<()> {
    if pred.len() != actual.len() {
        return Err(Error::invalid("predictions and labels disagree in length"));
    }
    if pred.is_empty() {
        return Err(Error::invalid("loss of an empty set is undefined"));
    }
    Ok(())
}

/// One test prediction, as written to `predictions.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub model: String,
    pub player_id: u32,
    pub snapshot_date: NaiveDate,
    pub age_years: f64,
    /// Indicator at the snapshot (rating points or euros).
    pub current_indicator: f64,
    /// Rating at the snapshot; equals `current_indicator` for quality data.
    pub current_quality: f64,
    pub actual: f64,
    pub predicted: f64,
}

impl PredictionRecord {
    pub fn age(&self) -> i32 {
        self.age_years.floor() as i32
    }
}

pub fn write_predictions<W: Write>(records: &[PredictionRecord], w: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(w);
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("predictions.csv", e))?;
    Ok(())
}

pub fn read_predictions<R: Read>(r: R) -> Result<Vec<PredictionRecord>> {
    let mut rd = csv::Reader::from_reader(r);
    rd.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "threshold", rename_all = "snake_case")]
pub enum Predicate {
    /// current indicator > t
    CurrentAbove(f64),
    /// current indicator ≥ t
    CurrentAtLeast(f64),
    /// current rating > t
    QualityAbove(f64),
    /// label ≤ t
    LabelAtMost(f64),
    /// label ≥ t
    LabelAtLeast(f64),
    All,
}

impl Predicate {
    pub fn matches(&self, r: &PredictionRecord) -> bool {
        match *self {
            Predicate::CurrentAbove(t) => r.current_indicator > t,
            Predicate::CurrentAtLeast(t) => r.current_indicator >= t,
            Predicate::QualityAbove(t) => r.current_quality > t,
            Predicate::LabelAtMost(t) => r.actual <= t,
            Predicate::LabelAtLeast(t) => r.actual >= t,
            Predicate::All => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupSpec {
    pub name: String,
    pub predicate: Predicate,
}

impl SubgroupSpec {
    pub fn new(name: &str, predicate: Predicate) -> Self {
        SubgroupSpec {
            name: name.to_string(),
            predicate,
        }
    }
}

pub fn default_subgroups(indicator: IndicatorKind) -> Vec<SubgroupSpec> {
    match indicator {
        IndicatorKind::Quality => vec![
            SubgroupSpec::new("high_quality", Predicate::CurrentAbove(100.0)),
            SubgroupSpec::new("large_decrease", Predicate::LabelAtMost(-10.0)),
            SubgroupSpec::new("large_increase", Predicate::LabelAtLeast(10.0)),
        ],
        IndicatorKind::Value => vec![
            SubgroupSpec::new("high_quality", Predicate::QualityAbove(100.0)),
            SubgroupSpec::new("high_value", Predicate::CurrentAtLeast(10_000_000.0)),
            SubgroupSpec::new("large_decrease", Predicate::LabelAtMost(-2_500_000.0)),
            SubgroupSpec::new("large_increase", Predicate::LabelAtLeast(2_500_000.0)),
        ],
    }
}

/// Cells with fewer examples are flagged.
pub const LOW_CONFIDENCE_N: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgeLoss {
    pub age: i32,
    pub rmse: f64,
    pub n: usize,
    pub low_confidence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupLoss {
    pub name: String,
    /// Absent when the subgroup is empty.
    pub rmse: Option<f64>,
    pub n: usize,
}

fn split_pred_actual<'a, I: Iterator<Item = &'a PredictionRecord>>(it: I) -> (Vec<f64>, Vec<f64>) {
    it.map(|r| (r.predicted, r.actual)).unzip()
}

/// RMSE per whole year of age.
pub fn loss_per_age(records: &[PredictionRecord]) -> Vec<AgeLoss> {
    let mut by_age: BTreeMap<i32, Vec<&PredictionRecord>> = BTreeMap::new();
    for r in records {
        by_age.entry(r.age()).or_default().push(r);
    }
    by_age
        .into_iter()
        .map(|(age, rs)| {
            let (p, a) = split_pred_actual(rs.into_iter());
            AgeLoss {
                age,
                rmse: rmse(&p, &a).expect("non-empty age cell"),
                n: p.len(),
                low_confidence: p.len() < LOW_CONFIDENCE_N,
            }
        })
        .collect()
}

pub fn subgroup_losses(records: &[PredictionRecord], specs: &[SubgroupSpec]) -> Result<Vec<SubgroupLoss>> {
    if specs.is_empty() {
        return Err(Error::invalid("no subgroups given"));
    }
    Ok(specs
        .iter()
        .map(|s| {
            let (p, a) = split_pred_actual(records.iter().filter(|r| s.predicate.matches(r)));
            SubgroupLoss {
                name: s.name.clone(),
                rmse: rmse(&p, &a).ok(),
                n: p.len(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceSet {
    pub features: Vec<String>,
    pub raw: Vec<f64>,
    pub scaled: Vec<f64>,
    /// All raw values were equal, so every scaled value is 0.
    pub degenerate: bool,
}

/// Min-max scaling of raw importances to [0, 1].
pub fn scaled_importances(features: Vec<String>, raw: Vec<f64>) -> ImportanceSet {
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let degenerate = !(hi > lo);
    let scaled = raw
        .iter()
        .map(|v| if degenerate { 0.0 } else { (v - lo) / (hi - lo) })
        .collect();
    ImportanceSet {
        features,
        raw,
        scaled,
        degenerate,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: String,
    pub rmse: f64,
    pub mae: f64,
    pub n: usize,
    pub per_age: Vec<AgeLoss>,
    pub subgroups: Vec<SubgroupLoss>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub model: String,
    pub method: String,
    pub nominal_level: f64,
    pub coverage: f64,
    pub mean_width: f64,
    pub n: usize,
    /// Share of forest variances that were clamped at zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clamped_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub indicator: IndicatorKind,
    pub models: Vec<ModelReport>,
    pub subgroup_specs: Vec<SubgroupSpec>,
    pub importances: BTreeMap<String, ImportanceSet>,
    pub uncertainty: Vec<CoverageReport>,
}

/// Model names in first-appearance order.
pub fn model_order(records: &[PredictionRecord]) -> Vec<String> {
    let mut seen = Vec::new();
    for r in records {
        if !seen.contains(&r.model) {
            seen.push(r.model.clone());
        }
    }
    seen
}

pub fn model_reports(records: &[PredictionRecord], specs: &[SubgroupSpec]) -> Result<Vec<ModelReport>> {
    model_order(records)
        .into_iter()
        .map(|m| {
            let rs: Vec<PredictionRecord> = records.iter().filter(|r| r.model == m).cloned().collect();
            let (p, a) = split_pred_actual(rs.iter());
            Ok(ModelReport {
                rmse: rmse(&p, &a)?,
                mae: mae(&p, &a)?,
                n: p.len(),
                per_age: loss_per_age(&rs),
                subgroups: subgroup_losses(&rs, specs)?,
                model: m,
            })
        })
        .collect()
}

impl EvaluationReport {
    pub fn global_tsv(&self) -> String {
        let mut s = String::from("model\trmse\tmae\tn\n");
        for m in &self.models {
            s += &format!("{}\t{}\t{}\t{}\n", m.model, m.rmse, m.mae, m.n);
        }
        s
    }

    pub fn per_age_tsv(&self) -> String {
        let mut s = String::from("model\tage\trmse\tn\tlow_confidence\n");
        for m in &self.models {
            for a in &m.per_age {
                s += &format!("{}\t{}\t{}\t{}\t{}\n", m.model, a.age, a.rmse, a.n, a.low_confidence);
            }
        }
        s
    }

    pub fn subgroup_tsv(&self) -> String {
        let mut s = String::from("model\tsubgroup\trmse\tn\n");
        for m in &self.models {
            s += &format!("{}\tall\t{}\t{}\n", m.model, m.rmse, m.n);
            for g in &m.subgroups {
                let r = g.rmse.map_or_else(String::new, |v| v.to_string());
                s += &format!("{}\t{}\t{}\t{}\n", m.model, g.name, r, g.n);
            }
        }
        s
    }

    /// Feature × model matrix of scaled importances (blank where a model
    /// does not use the feature).
    pub fn importance_tsv(&self) -> String {
        let models: Vec<&String> = self.importances.keys().collect();
        let mut features: Vec<&String> = Vec::new();
        for set in self.importances.values() {
            for f in &set.features {
                if !features.contains(&f) {
                    features.push(f);
                }
            }
        }
        let mut s = String::from("feature");
        for m in &models {
            s += &format!("\t{m}");
        }
        s.push('\n');
        for f in features {
            s += f;
            for m in &models {
                let set = &self.importances[*m];
                let v = set
                    .features
                    .iter()
                    .position(|x| x == f)
                    .map_or_else(String::new, |j| set.scaled[j].to_string());
                s += &format!("\t{v}");
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_losses() {
        assert!((rmse(&[1.0, 3.0], &[1.0, 1.0]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(mae(&[1.0, 3.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(rmse(&[2.0, 2.0], &[2.0, 2.0]).unwrap(), 0.0);
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn min_max_scaling() {
        let s = scaled_importances(vec!["a".into(), "b".into(), "c".into()], vec![2.0, 4.0, 6.0]);
        assert_eq!(s.scaled, vec![0.0, 0.5, 1.0]);
        assert!(!s.degenerate);
        let s = scaled_importances(vec!["a".into()], vec![3.0]);
        assert!(s.degenerate);
        assert_eq!(s.scaled, vec![0.0]);
    }

    fn rec(age: f64, cur: f64, actual: f64, predicted: f64) -> PredictionRecord {
        PredictionRecord {
            model: "m".into(),
            player_id: 1,
            snapshot_date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            age_years: age,
            current_indicator: cur,
            current_quality: cur,
            actual,
            predicted,
        }
    }

    #[test]
    fn empty_subgroup_has_no_loss() {
        let rs = vec![rec(20.5, 90.0, 1.0, 0.0), rec(21.2, 95.0, -2.0, 0.0)];
        let g = subgroup_losses(&rs, &default_subgroups(IndicatorKind::Quality)).unwrap();
        assert_eq!(g[0].n, 0);
        assert!(g[0].rmse.is_none());
        let ages = loss_per_age(&rs);
        assert_eq!(ages.iter().map(|a| a.n).sum::<usize>(), 2);
        assert!(ages.iter().all(|a| a.low_confidence));
    }

    #[test]
    fn predictions_round_trip() {
        let rs = vec![rec(20.123456789, 90.1, 1.0 / 3.0, 0.1), rec(30.0, 1e7, -2.5e6, 3.0)];
        let mut buf = Vec::new();
        write_predictions(&rs, &mut buf).unwrap();
        assert_eq!(read_predictions(buf.as_slice()).unwrap(), rs);
    }
}
