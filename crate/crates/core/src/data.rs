//! Domain types shared by every stage of the pipeline, and the labeled
//! [`Dataset`] container with its time and player-level splits.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{Datelike, NaiveDate};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::{rng_from_seed, sha256_hex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Position {
    Gk,
    Def,
    Mid,
    Att,
}

impl Position {
    pub const ALL: [Position; 4] = [Position::Gk, Position::Def, Position::Mid, Position::Att];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Position> {
        Self::ALL.get(code as usize).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerProfile {
    pub player_id: u32,
    pub birth_date: NaiveDate,
    pub nationality: u16,
    pub position: Position,
}

impl PlayerProfile {
    pub fn age_on(&self, date: NaiveDate) -> f64 {
        crate::dates::age_years(self.birth_date, date)
    }
}

/// One player's participation in one match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchAppearance {
    pub match_id: u64,
    pub date: NaiveDate,
    pub club_id: u32,
    pub opponent_id: u32,
    pub minutes: u32,
    pub team_goals: u32,
    pub opponent_goals: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimePoint {
    pub date: NaiveDate,
    pub value: f64,
}

/// Membership of one club; `end` is exclusive, `None` while ongoing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClubSpell {
    pub club_id: u32,
    pub league_id: u32,
    pub start: NaiveDate,
    pub end: Option<NaiveDate>,
    /// False for the initial assignment at the start of the simulated history.
    pub via_transfer: bool,
}

impl ClubSpell {
    pub fn covers(&self, date: NaiveDate) -> bool {
        self.start <= date && self.end.is_none_or(|e| date < e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractPeriod {
    pub signed: NaiveDate,
    pub end: NaiveDate,
}

/// A player's complete timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerHistory {
    pub profile: PlayerProfile,
    pub appearances: Vec<MatchAppearance>,
    pub rating_series: Vec<TimePoint>,
    pub value_series: Vec<TimePoint>,
    pub club_spells: Vec<ClubSpell>,
    pub contracts: Vec<ContractPeriod>,
    pub club_league_strength: Vec<TimePoint>,
    pub retired_on: Option<NaiveDate>,
}

/// Last value at or before `date` in a strictly increasing series.
pub fn value_at(series: &[TimePoint], date: NaiveDate) -> Option<f64> {
    let idx = series.partition_point(|p| p.date <= date);
    (idx > 0).then(|| series[idx - 1].value)
}

impl PlayerHistory {
    pub fn rating_at(&self, date: NaiveDate) -> Option<f64> {
        value_at(&self.rating_series, date)
    }

    pub fn value_at(&self, date: NaiveDate) -> Option<f64> {
        value_at(&self.value_series, date)
    }

    pub fn spell_at(&self, date: NaiveDate) -> Option<&ClubSpell> {
        self.club_spells.iter().rev().find(|s| s.covers(date))
    }

    /// Contract in force at `date`: the latest one signed on or before it.
    pub fn contract_at(&self, date: NaiveDate) -> Option<&ContractPeriod> {
        self.contracts.iter().rev().find(|c| c.signed <= date)
    }

    /// Appearances with minutes played.
    pub fn games(&self) -> impl Iterator<Item = &MatchAppearance> {
        self.appearances.iter().filter(|a| a.minutes > 0)
    }

    /// Checks the ordering invariants of every series.
    pub fn validate(&self) -> Result<()> {
        let strictly = |s: &[TimePoint], name: &str| -> Result<()> {
            if s.windows(2).any(|w| w[0].date >= w[1].date) {
                return Err(Error::data(format!(
                    "player {}: {name} timestamps not strictly increasing",
                    self.profile.player_id
                )));
            }
            Ok(())
        };
        strictly(&self.rating_series, "rating_series")?;
        strictly(&self.value_series, "value_series")?;
        strictly(&self.club_league_strength, "club_league_strength")?;
        if self.value_series.iter().any(|p| p.value <= 0.0) {
            return Err(Error::data(format!(
                "player {}: non-positive transfer value",
                self.profile.player_id
            )));
        }
        if self.appearances.windows(2).any(|w| w[0].date > w[1].date) {
            return Err(Error::data(format!(
                "player {}: appearances out of date order",
                self.profile.player_id
            )));
        }
        if self.appearances.iter().any(|a| a.minutes > 120) {
            return Err(Error::data(format!(
                "player {}: appearance longer than 120 minutes",
                self.profile.player_id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous,
    Discrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureFamily {
    Calendar,
    CurrentPerformance,
    LeagueStrength,
    Recency,
    PlayerCharacteristics,
    TimeSeries,
    ClubTransfers,
    TeamDiff,
    Contract,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureDef {
    pub name: String,
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FeatureFamily>,
}

impl FeatureDef {
    pub fn continuous(name: &str) -> Self {
        FeatureDef {
            name: name.to_string(),
            kind: FeatureKind::Continuous,
            family: None,
        }
    }

    pub fn discrete(name: &str) -> Self {
        FeatureDef {
            name: name.to_string(),
            kind: FeatureKind::Discrete,
            family: None,
        }
    }

    pub fn in_family(mut self, family: FeatureFamily) -> Self {
        self.family = Some(family);
        self
    }
}

/// Which development is forecast: rating points or euros.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorKind {
    Quality,
    Value,
}

impl IndicatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            IndicatorKind::Quality => "quality",
            IndicatorKind::Value => "value",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub features: Vec<f64>,
    /// Indicator twelve months ahead minus the indicator at the snapshot.
    pub label: f64,
    pub player_id: u32,
    pub snapshot_date: NaiveDate,
    pub age_years: f64,
    pub current_indicator: f64,
}

impl LabeledExample {
    pub fn year(&self) -> i32 {
        self.snapshot_date.year()
    }
}

/// Metadata columns appended after the features in dataset CSVs. Columns
/// are read by position, so a feature may share a name with one of these
/// (the age feature does).
const TRAILER_COLUMNS: [&str; 5] = [
    "label",
    "player_id",
    "snapshot_date",
    "age_years",
    "current_indicator",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub schema: Vec<FeatureDef>,
    pub examples: Vec<LabeledExample>,
    pub indicator: IndicatorKind,
}

/// `schema.json` contents written next to every dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaFile {
    pub indicator: IndicatorKind,
    pub features: Vec<FeatureDef>,
}

impl Dataset {
    pub fn new(
        schema: Vec<FeatureDef>,
        examples: Vec<LabeledExample>,
        indicator: IndicatorKind,
    ) -> Result<Self> {
        let mut names = BTreeSet::new();
        for f in &schema {
            if !names.insert(f.name.as_str()) {
                return Err(Error::SchemaMismatch(format!(
                    "duplicate feature name `{}`",
                    f.name
                )));
            }
        }
        for (i, e) in examples.iter().enumerate() {
            if e.features.len() != schema.len() {
                return Err(Error::SchemaMismatch(format!(
                    "example {i} has {} features, schema has {}",
                    e.features.len(),
                    schema.len()
                )));
            }
            if !e.label.is_finite() || e.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::data(format!("example {i} has a non-finite value")));
            }
        }
        Ok(Dataset {
            schema,
            examples,
            indicator,
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.schema.iter().map(|f| f.name.clone()).collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|f| f.name == name)
    }

    pub fn feature_indices(&self, names: &[String]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|n| {
                self.feature_index(n)
                    .ok_or_else(|| Error::SchemaMismatch(format!("unknown feature `{n}`")))
            })
            .collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.examples.iter().map(|e| e.features[j]).collect()
    }

    pub fn labels(&self) -> Vec<f64> {
        self.examples.iter().map(|e| e.label).collect()
    }

    /// Feature matrix restricted to `names`, in that order.
    pub fn design(&self, names: &[String]) -> Result<Matrix> {
        let idx = self.feature_indices(names)?;
        let mut m = Matrix::zeros(self.len(), idx.len());
        for (i, e) in self.examples.iter().enumerate() {
            let row = m.row_mut(i);
            for (k, &j) in idx.iter().enumerate() {
                row[k] = e.features[j];
            }
        }
        Ok(m)
    }

    /// Sorted distinct snapshot years.
    pub fn years(&self) -> Vec<i32> {
        let set: BTreeSet<i32> = self.examples.iter().map(|e| e.year()).collect();
        set.into_iter().collect()
    }

    pub fn player_ids(&self) -> BTreeSet<u32> {
        self.examples.iter().map(|e| e.player_id).collect()
    }

    pub fn filter<F: Fn(&LabeledExample) -> bool>(&self, keep: F) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            examples: self.examples.iter().filter(|e| keep(e)).cloned().collect(),
            indicator: self.indicator,
        }
    }

    pub fn sort_by_date(&mut self) {
        self.examples
            .sort_by(|a, b| (a.snapshot_date, a.player_id).cmp(&(b.snapshot_date, b.player_id)));
    }

    /// Train holds every example with snapshot year ≤ `cutoff_year`, test the rest.
    pub fn split_by_time(&self, cutoff_year: i32) -> Result<(Dataset, Dataset)> {
        let train = self.filter(|e| e.year() <= cutoff_year);
        let test = self.filter(|e| e.year() > cutoff_year);
        if train.is_empty() {
            return Err(Error::EmptySplit {
                side: "train",
                cutoff_year,
            });
        }
        if test.is_empty() {
            return Err(Error::EmptySplit {
                side: "test",
                cutoff_year,
            });
        }
        Ok((train, test))
    }

    /// Player-level stratified holdout. Players are stratified by the 3-year
    /// age band and indicator quintile of their earliest example; within each
    /// stratum `round(fraction * players)` players are drawn.
    pub fn holdout_players(&self, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
        let held = self.holdout_player_ids(fraction, seed)?;
        let kept = self.filter(|e| !held.contains(&e.player_id));
        let holdout = self.filter(|e| held.contains(&e.player_id));
        Ok((kept, holdout))
    }

    pub fn holdout_player_ids(&self, fraction: f64, seed: u64) -> Result<BTreeSet<u32>> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::invalid(format!(
                "holdout fraction must lie in (0, 1), got {fraction}"
            )));
        }
        let strata = self.player_strata();
        let mut rng = rng_from_seed(seed);
        let mut held = BTreeSet::new();
        for players in strata.values() {
            let mut players = players.clone();
            players.shuffle(&mut rng);
            let take = (fraction * players.len() as f64).round() as usize;
            held.extend(players.into_iter().take(take));
        }
        Ok(held)
    }

    /// Stratum key per player: (age band, indicator quintile) of the first example.
    pub fn player_strata(&self) -> BTreeMap<(i32, usize), Vec<u32>> {
        let mut first: BTreeMap<u32, &LabeledExample> = BTreeMap::new();
        for e in &self.examples {
            first
                .entry(e.player_id)
                .and_modify(|cur| {
                    if e.snapshot_date < cur.snapshot_date {
                        *cur = e;
                    }
                })
                .or_insert(e);
        }
        let mut indicators: Vec<f64> = first.values().map(|e| e.current_indicator).collect();
        indicators.sort_by(f64::total_cmp);
        let cut = |q: f64| -> f64 {
            if indicators.is_empty() {
                return 0.0;
            }
            let pos = ((indicators.len() - 1) as f64 * q).round() as usize;
            indicators[pos]
        };
        let cuts = [cut(0.2), cut(0.4), cut(0.6), cut(0.8)];
        let mut strata: BTreeMap<(i32, usize), Vec<u32>> = BTreeMap::new();
        for (&pid, e) in &first {
            let band = (e.age_years / 3.0).floor() as i32;
            let quintile = cuts.iter().filter(|&&c| e.current_indicator > c).count();
            strata.entry((band, quintile)).or_default().push(pid);
        }
        strata
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.schema.iter().map(|f| f.name.as_str()).collect();
        header.extend(TRAILER_COLUMNS);
        w.write_record(&header)?;
        let mut record: Vec<String> = Vec::with_capacity(header.len());
        for e in &self.examples {
            record.clear();
            record.extend(e.features.iter().map(|v| v.to_string()));
            record.push(e.label.to_string());
            record.push(e.player_id.to_string());
            record.push(e.snapshot_date.format("%Y-%m-%d").to_string());
            record.push(e.age_years.to_string());
            record.push(e.current_indicator.to_string());
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(buf)
    }

    pub fn read_csv<R: Read>(
        reader: R,
        schema: Vec<FeatureDef>,
        indicator: IndicatorKind,
    ) -> Result<Dataset> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        let expected: Vec<&str> = schema
            .iter()
            .map(|f| f.name.as_str())
            .chain(TRAILER_COLUMNS)
            .collect();
        if header.iter().collect::<Vec<_>>() != expected {
            return Err(Error::SchemaMismatch(
                "CSV header does not match the schema".to_string(),
            ));
        }
        let p = schema.len();
        let parse = |s: &str, line: u64, col: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::data(format!("line {line}: bad number `{s}` in {col}")))
        };
        let mut examples = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let mut features = Vec::with_capacity(p);
            for (j, f) in schema.iter().enumerate() {
                features.push(parse(&rec[j], line, &f.name)?);
            }
            let player_id = rec[p + 1]
                .parse::<u32>()
                .map_err(|_| Error::data(format!("line {line}: bad player_id")))?;
            let snapshot_date = NaiveDate::parse_from_str(&rec[p + 2], "%Y-%m-%d")
                .map_err(|_| Error::data(format!("line {line}: bad snapshot_date")))?;
            examples.push(LabeledExample {
                features,
                label: parse(&rec[p], line, "label")?,
                player_id,
                snapshot_date,
                age_years: parse(&rec[p + 3], line, "age_years")?,
                current_indicator: parse(&rec[p + 4], line, "current_indicator")?,
            });
        }
        Dataset::new(schema, examples, indicator)
    }

    pub fn content_hash(&self) -> Result<String> {
        Ok(sha256_hex(&self.to_csv_bytes()?))
    }

    /// Writes `<stem>.csv` and `<stem>.schema.json` into `dir`.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv_path = dir.join(format!("{stem}.csv"));
        let file = fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        self.write_csv(std::io::BufWriter::new(file))?;
        let schema = SchemaFile {
            indicator: self.indicator,
            features: self.schema.clone(),
        };
        crate::io::write_json(&dir.join(format!("{stem}.schema.json")), &schema)
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Dataset> {
        let schema: SchemaFile = crate::io::read_json(&dir.join(format!("{stem}.schema.json")))?;
        let csv_path = dir.join(format!("{stem}.csv"));
        let file = fs::File::open(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        Dataset::read_csv(
            std::io::BufReader::new(file),
            schema.features,
            schema.indicator,
        )
    }
}
