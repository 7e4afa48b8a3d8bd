//! Labeled datasets built from player histories: monthly quality snapshots
//! and January/July value snapshots, each labeled with the 12-month change
//! of its indicator.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{
    value_at, Dataset, FeatureDef, FeatureFamily, IndicatorKind, LabeledExample, PlayerHistory,
};
use crate::dates::{add_months, month_start, month_starts, whole_months_between};
use crate::error::{Error, Result};
use crate::sim::months_left;

/// Categorical column used as the grouping key of mixed models. It stays in
/// the datasets but is not a model input.
pub const GROUP_COLUMN: &str = "nationality";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub horizon_months: u32,
    /// Reference age of `years_diff_peak_age`.
    pub peak_age: f64,
    /// Players need strictly more games than this.
    pub min_games: usize,
    /// Players need strictly more months between first and last game.
    pub min_span_months: u32,
    pub correlation_threshold: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            horizon_months: 12,
            peak_age: 26.0,
            min_games: 20,
            min_span_months: 24,
            correlation_threshold: 0.95,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon_months == 0 {
            return Err(Error::config("features.horizon_months", "must be positive"));
        }
        if !(self.correlation_threshold > 0.0 && self.correlation_threshold <= 1.0) {
            return Err(Error::config(
                "features.correlation_threshold",
                "must lie in (0, 1]",
            ));
        }
        if !self.peak_age.is_finite() {
            return Err(Error::config("features.peak_age", "must be finite"));
        }
        Ok(())
    }
}

/// Counts of players and snapshots that did not make it into a dataset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub players_total: usize,
    pub players_eligible: usize,
    pub examples: usize,
    pub skipped: BTreeMap<String, usize>,
}

pub fn is_eligible(h: &PlayerHistory, cfg: &FeatureConfig) -> bool {
    let mut games = h.games();
    let Some(first) = games.next() else {
        return false;
    };
    let mut count = 1;
    let mut last = first.date;
    for g in games {
        count += 1;
        last = g.date;
    }
    count > cfg.min_games && whole_months_between(first.date, last) > cfg.min_span_months
}

/// Players with more than `min_games` games whose games span more than
/// `min_span_months` months.
pub fn filter_eligibility<'a>(
    histories: &'a [PlayerHistory],
    cfg: &FeatureConfig,
) -> Vec<&'a PlayerHistory> {
    histories.iter().filter(|h| is_eligible(h, cfg)).collect()
}

fn def_c(name: &str, family: FeatureFamily) -> FeatureDef {
    FeatureDef::continuous(name).in_family(family)
}

fn def_d(name: &str, family: FeatureFamily) -> FeatureDef {
    FeatureDef::discrete(name).in_family(family)
}

/// Schema of the quality dataset.
pub fn quality_schema() -> Vec<FeatureDef> {
    use FeatureFamily::*;
    vec![
        def_d("month_of_year", Calendar),
        def_c("sciskill", CurrentPerformance),
        def_c("games_last_12m", CurrentPerformance),
        def_c("minutes_last_12m", CurrentPerformance),
        def_c("minutes_share_12m", CurrentPerformance),
        def_c("league_strength", LeagueStrength),
        def_d("league_level", LeagueStrength),
        def_d("previous_zero_months", Recency),
        def_c("days_since_last_game", Recency),
        def_c("age_years", PlayerCharacteristics),
        def_c("age_years_squared", PlayerCharacteristics),
        def_c("years_diff_peak_age", PlayerCharacteristics),
        def_d("position", PlayerCharacteristics),
        def_d(GROUP_COLUMN, PlayerCharacteristics),
        def_c("career_games", PlayerCharacteristics),
        def_c("months_since_debut", PlayerCharacteristics),
        def_c("sciskill_diff_1m_ago", TimeSeries),
        def_c("sciskill_diff_3m_ago", TimeSeries),
        def_c("sciskill_diff_6m_ago", TimeSeries),
        def_c("sciskill_diff_12m_ago", TimeSeries),
        def_c("sciskill_volatility_12m", TimeSeries),
        def_c("sciskill_max_12m_diff", TimeSeries),
        def_c("club_arrivals_12m", ClubTransfers),
        def_c("club_departures_12m", ClubTransfers),
        def_c("player_transfers_total", ClubTransfers),
        def_c("months_at_club", ClubTransfers),
        def_c("sciskill_diff_mean_team", TeamDiff),
        def_c("sciskill_diff_max_team", TeamDiff),
        def_c("contract_months_left", Contract),
    ]
}

/// Schema of the value dataset: the quality features plus value levels and lags.
pub fn value_schema() -> Vec<FeatureDef> {
    use FeatureFamily::*;
    let mut s = quality_schema();
    s.extend([
        def_c("etv", CurrentPerformance),
        def_c("etv_diff_1m", TimeSeries),
        def_c("etv_diff_3m", TimeSeries),
        def_c("etv_diff_6m", TimeSeries),
        def_c("etv_diff_12m", TimeSeries),
    ]);
    s
}

/// Columns of the reduced nearest-neighbour datasets.
pub fn knn_columns(indicator: IndicatorKind) -> Vec<String> {
    let names: [&str; 6] = match indicator {
        IndicatorKind::Quality => [
            "sciskill",
            "sciskill_diff_1m_ago",
            "sciskill_diff_3m_ago",
            "sciskill_diff_6m_ago",
            "sciskill_diff_12m_ago",
            "age_years",
        ],
        IndicatorKind::Value => [
            "etv",
            "etv_diff_1m",
            "etv_diff_3m",
            "etv_diff_6m",
            "etv_diff_12m",
            "age_years",
        ],
    };
    names.iter().map(|s| s.to_string()).collect()
}

/// Club membership index over all players, used for team and transfer features.
pub struct Context<'a> {
    histories: &'a [PlayerHistory],
    /// club id → (player index, spell index)
    members: BTreeMap<u32, Vec<(usize, usize)>>,
    initial_rating: f64,
    n_leagues: u32,
    peak_age: f64,
}

impl<'a> Context<'a> {
    pub fn new(histories: &'a [PlayerHistory], initial_rating: f64, peak_age: f64) -> Self {
        let mut members: BTreeMap<u32, Vec<(usize, usize)>> = BTreeMap::new();
        let mut n_leagues = 1;
        for (i, h) in histories.iter().enumerate() {
            for (j, s) in h.club_spells.iter().enumerate() {
                members.entry(s.club_id).or_default().push((i, j));
                n_leagues = n_leagues.max(s.league_id + 1);
            }
        }
        Context {
            histories,
            members,
            initial_rating,
            n_leagues,
            peak_age,
        }
    }

    fn rating(&self, h: &PlayerHistory, date: NaiveDate) -> f64 {
        h.rating_at(date).unwrap_or(self.initial_rating)
    }

    /// Quality features of player `idx` at `t`, or `None` when the player has
    /// no club, contract or league strength at `t`. Reads nothing after `t`.
    pub fn quality_features(&self, idx: usize, t: NaiveDate) -> Option<Vec<f64>> {
        let h = &self.histories[idx];
        let spell = h.spell_at(t)?;
        let contract = h.contract_at(t)?;
        let strength = value_at(&h.club_league_strength, t)?;
        let r = self.rating(h, t);
        let year_ago = add_months(t, -12);

        let past = &h.appearances[..h.appearances.partition_point(|a| a.date <= t)];
        let mut games_12 = 0.0;
        let mut minutes_12 = 0.0;
        let mut career = 0.0;
        let mut first_game = None;
        let mut last_game = None;
        for a in past.iter().filter(|a| a.minutes > 0) {
            career += 1.0;
            first_game.get_or_insert(a.date);
            last_game = Some(a.date);
            if a.date > year_ago {
                games_12 += 1.0;
                minutes_12 += a.minutes as f64;
            }
        }
        let share = if games_12 > 0.0 {
            minutes_12 / (90.0 * games_12)
        } else {
            0.0
        };
        let (zero_months, days_since) = match last_game {
            Some(d) => (
                whole_months_between(d, t).min(12) as f64,
                (t - d).num_days() as f64,
            ),
            None => (12.0, 366.0),
        };
        let debut_months = first_game.map_or(0.0, |d| whole_months_between(d, t) as f64);

        let age = h.profile.age_on(t);
        let lag = |k: i32| r - self.rating(h, add_months(t, -k));
        let window: Vec<f64> = (0..=12).map(|k| self.rating(h, add_months(t, -k))).collect();
        let mean_w = window.iter().sum::<f64>() / window.len() as f64;
        let vol = (window.iter().map(|v| (v - mean_w).powi(2)).sum::<f64>()
            / window.len() as f64)
            .sqrt();
        let max_w = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);

        let mut arrivals = 0.0;
        let mut departures = 0.0;
        let mut mates = Vec::new();
        for &(pi, si) in self.members.get(&spell.club_id).map_or(&[][..], |v| v.as_slice()) {
            let other = &self.histories[pi];
            let s = &other.club_spells[si];
            if s.via_transfer && s.start > year_ago && s.start <= t {
                arrivals += 1.0;
            }
            if s.end.is_some_and(|e| e > year_ago && e <= t) {
                departures += 1.0;
            }
            if pi != idx && s.covers(t) {
                mates.push(self.rating(other, t));
            }
        }
        let (diff_mean, diff_max) = if mates.is_empty() {
            (0.0, 0.0)
        } else {
            let m = mates.iter().sum::<f64>() / mates.len() as f64;
            let mx = mates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (r - m, r - mx)
        };
        let transfers = h
            .club_spells
            .iter()
            .filter(|s| s.via_transfer && s.start <= t)
            .count() as f64;

        Some(vec![
            t.month() as f64,
            r,
            games_12,
            minutes_12,
            share,
            strength,
            self.n_leagues.saturating_sub(1 + spell.league_id) as f64,
            zero_months,
            days_since,
            age,
            age * age,
            (age - self.peak_age).abs(),
            h.profile.position.code() as f64,
            h.profile.nationality as f64,
            career,
            debut_months,
            lag(1),
            lag(3),
            lag(6),
            lag(12),
            vol,
            max_w - r,
            arrivals,
            departures,
            transfers,
            whole_months_between(spell.start, t) as f64,
            diff_mean,
            diff_max,
            months_left(t, Some(contract.end)) as f64,
        ])
    }

    /// Value features at `t`: quality features plus value level and lags.
    /// Requires value points exactly at `t` and 12 months earlier.
    pub fn value_features(&self, idx: usize, t: NaiveDate) -> Option<Vec<f64>> {
        let h = &self.histories[idx];
        let v = exact_point(&h.value_series, t)?;
        exact_point(&h.value_series, add_months(t, -12))?;
        let mut f = self.quality_features(idx, t)?;
        f.push(v);
        for k in [1, 3, 6, 12] {
            f.push(v - value_at(&h.value_series, add_months(t, -k))?);
        }
        Some(f)
    }
}

fn exact_point(series: &[crate::data::TimePoint], date: NaiveDate) -> Option<f64> {
    let i = series.partition_point(|p| p.date < date);
    series.get(i).filter(|p| p.date == date).map(|p| p.value)
}

/// Months between the first snapshot (one horizon after the first recorded
/// game) and the last month whose horizon still lies inside the data.
fn snapshot_range(histories: &[PlayerHistory], horizon: u32) -> Option<(NaiveDate, NaiveDate)> {
    let dates = histories.iter().flat_map(|h| h.appearances.iter().map(|a| a.date));
    let (lo, hi) = dates.fold(None, |acc: Option<(NaiveDate, NaiveDate)>, d| match acc {
        None => Some((d, d)),
        Some((lo, hi)) => Some((lo.min(d), hi.max(d))),
    })?;
    let first = add_months(month_start(lo), horizon as i32);
    let last = add_months(hi, -(horizon as i32));
    (first <= last).then_some((first, last))
}

fn bump(skipped: &mut BTreeMap<String, usize>, reason: &str) {
    *skipped.entry(reason.to_string()).or_default() += 1;
}

fn build(
    histories: &[PlayerHistory],
    cfg: &FeatureConfig,
    initial_rating: f64,
    indicator: IndicatorKind,
) -> Result<(Dataset, BuildReport)> {
    cfg.validate()?;
    let ctx = Context::new(histories, initial_rating, cfg.peak_age);
    let horizon = cfg.horizon_months as i32;
    let mut report = BuildReport {
        players_total: histories.len(),
        ..BuildReport::default()
    };
    let schema = match indicator {
        IndicatorKind::Quality => quality_schema(),
        IndicatorKind::Value => value_schema(),
    };
    let Some((first, last)) = snapshot_range(histories, cfg.horizon_months) else {
        return Ok((Dataset::new(schema, Vec::new(), indicator)?, report));
    };
    let eligible: Vec<usize> = (0..histories.len())
        .filter(|&i| is_eligible(&histories[i], cfg))
        .collect();
    report.players_eligible = eligible.len();

    let per_player: Vec<(Vec<LabeledExample>, BTreeMap<String, usize>)> = eligible
        .par_iter()
        .map(|&i| {
            let h = &histories[i];
            let mut out = Vec::new();
            let mut skipped = BTreeMap::new();
            let debut = h.rating_series.first().map(|p| p.date);
            let last_game = h.games().last().map(|a| a.date);
            for t in month_starts(first, last) {
                if indicator == IndicatorKind::Value && !matches!(t.month(), 1 | 7) {
                    continue;
                }
                let future = add_months(t, horizon);
                if debut.is_none_or(|d| d > t) {
                    bump(&mut skipped, "not_debuted");
                    continue;
                }
                if last_game.is_none_or(|d| d < future) {
                    bump(&mut skipped, "inactive_at_horizon");
                    continue;
                }
                let row = match indicator {
                    IndicatorKind::Quality => ctx.quality_features(i, t).map(|f| {
                        let now = ctx.rating(h, t);
                        (f, now, ctx.rating(h, future))
                    }),
                    IndicatorKind::Value => ctx.value_features(i, t).and_then(|f| {
                        let now = exact_point(&h.value_series, t)?;
                        Some((f, now, exact_point(&h.value_series, future)?))
                    }),
                };
                let Some((features, now, later)) = row else {
                    bump(&mut skipped, "missing_inputs");
                    continue;
                };
                out.push(LabeledExample {
                    features,
                    label: later - now,
                    player_id: h.profile.player_id,
                    snapshot_date: t,
                    age_years: h.profile.age_on(t),
                    current_indicator: now,
                });
            }
            (out, skipped)
        })
        .collect();

    let mut examples = Vec::new();
    for (ex, skipped) in per_player {
        examples.extend(ex);
        for (k, v) in skipped {
            *report.skipped.entry(k).or_default() += v;
        }
    }
    report.examples = examples.len();
    let mut ds = Dataset::new(schema, examples, indicator)?;
    ds.sort_by_date();
    Ok((ds, report))
}

/// One example per eligible player-month with a rating now and a game at
/// least one horizon later; label = rating(t + horizon) − rating(t).
pub fn build_quality_dataset(
    histories: &[PlayerHistory],
    cfg: &FeatureConfig,
    initial_rating: f64,
) -> Result<(Dataset, BuildReport)> {
    build(histories, cfg, initial_rating, IndicatorKind::Quality)
}

/// January and July snapshots; label = value(t + horizon) − value(t) in EUR.
/// Correlated features are not pruned here, see [`prune_correlated`].
pub fn build_value_dataset(
    histories: &[PlayerHistory],
    cfg: &FeatureConfig,
    initial_rating: f64,
) -> Result<(Dataset, BuildReport)> {
    build(histories, cfg, initial_rating, IndicatorKind::Value)
}

/// Drops features whose absolute correlation with an earlier kept feature
/// exceeds `threshold` on the training years (≤ `cutoff_year`). Walks the
/// schema in order and keeps the first of every correlated pair.
pub fn prune_correlated(
    d: &Dataset,
    cutoff_year: i32,
    threshold: f64,
) -> Result<(Dataset, Vec<String>)> {
    let train = d.filter(|e| e.year() <= cutoff_year);
    if train.is_empty() {
        return Err(Error::EmptySplit {
            side: "train",
            cutoff_year,
        });
    }
    let cols: Vec<Vec<f64>> = (0..d.schema.len()).map(|j| train.column(j)).collect();
    let mut kept: Vec<usize> = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..cols.len() {
        let redundant = d.schema[j].name != GROUP_COLUMN
            && kept.iter().any(|&k| {
                d.schema[k].name != GROUP_COLUMN
                    && crate::stats::correlation(&cols[k], &cols[j]).abs() > threshold
            });
        if redundant {
            dropped.push(d.schema[j].name.clone());
        } else {
            kept.push(j);
        }
    }
    Ok((select_features(d, &kept)?, dropped))
}

/// Dataset restricted to the given feature columns, in the given order.
pub fn select_features(d: &Dataset, columns: &[usize]) -> Result<Dataset> {
    let schema = columns.iter().map(|&j| d.schema[j].clone()).collect();
    let examples = d
        .examples
        .iter()
        .map(|e| LabeledExample {
            features: columns.iter().map(|&j| e.features[j]).collect(),
            ..e.clone()
        })
        .collect();
    Dataset::new(schema, examples, d.indicator)
}

/// The small lag-based dataset used by the nearest-neighbour models.
pub fn knn_dataset(d: &Dataset) -> Result<Dataset> {
    let idx = d.feature_indices(&knn_columns(d.indicator))?;
    select_features(d, &idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{
        ClubSpell, ContractPeriod, MatchAppearance, PlayerProfile, Position, TimePoint,
    };
    use crate::dates::ymd;

    fn player(id: u32, games: usize, span_months: u32) -> PlayerHistory {
        let start = ymd(2014, 1, 5);
        let end = add_months(start, span_months as i32);
        let step = if games > 1 {
            (end - start).num_days() / (games as i64 - 1)
        } else {
            0
        };
        let appearances = (0..games)
            .map(|g| MatchAppearance {
                match_id: g as u64,
                date: if g + 1 == games {
                    end
                } else {
                    start + chrono::Days::new((g as i64 * step) as u64)
                },
                club_id: 0,
                opponent_id: 1,
                minutes: 90,
                team_goals: 1,
                opponent_goals: 0,
            })
            .collect();
        PlayerHistory {
            profile: PlayerProfile {
                player_id: id,
                birth_date: ymd(1995, 6, 1),
                nationality: 0,
                position: Position::Mid,
            },
            appearances,
            rating_series: Vec::new(),
            value_series: Vec::new(),
            club_spells: vec![ClubSpell {
                club_id: 0,
                league_id: 0,
                start: ymd(2013, 1, 1),
                end: None,
                via_transfer: false,
            }],
            contracts: vec![ContractPeriod {
                signed: ymd(2013, 1, 1),
                end: ymd(2030, 6, 30),
            }],
            club_league_strength: Vec::new(),
            retired_on: None,
        }
    }

    #[test]
    fn eligibility_boundaries() {
        let cfg = FeatureConfig::default();
        assert!(!is_eligible(&player(1, 20, 30), &cfg));
        assert!(is_eligible(&player(2, 21, 25), &cfg));
        assert!(!is_eligible(&player(3, 300, 23), &cfg));
        let hs = vec![player(1, 20, 30), player(2, 21, 25)];
        let kept = filter_eligibility(&hs, &cfg);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].profile.player_id, 2);
    }

    /// A player who plays monthly from 2014 to 2021 with a given rating path.
    fn rated(id: u32, rating: impl Fn(NaiveDate) -> f64, value: impl Fn(NaiveDate) -> f64) -> PlayerHistory {
        let mut h = player(id, 0, 0);
        let months: Vec<NaiveDate> = month_starts(ymd(2013, 1, 1), ymd(2021, 12, 1)).collect();
        for (k, &m) in months.iter().enumerate() {
            h.appearances.push(MatchAppearance {
                match_id: k as u64,
                date: m,
                club_id: 0,
                opponent_id: 1,
                minutes: 90,
                team_goals: 0,
                opponent_goals: 0,
            });
            h.rating_series.push(TimePoint { date: m, value: rating(m) });
            h.value_series.push(TimePoint { date: m, value: value(m) });
            h.club_league_strength.push(TimePoint { date: m, value: 70.0 });
        }
        h
    }

    #[test]
    fn constant_series_give_zero_labels() {
        let hs = vec![rated(1, |_| 80.0, |_| 1e6), rated(2, |_| 70.0, |_| 2e6)];
        let cfg = FeatureConfig::default();
        let (q, _) = build_quality_dataset(&hs, &cfg, 75.0).unwrap();
        assert!(!q.is_empty());
        assert!(q.examples.iter().all(|e| e.label == 0.0));
        let (v, _) = build_value_dataset(&hs, &cfg, 75.0).unwrap();
        assert!(!v.is_empty());
        assert!(v.examples.iter().all(|e| e.label == 0.0));
    }

    #[test]
    fn labels_are_twelve_month_differences() {
        let rating = |d: NaiveDate| if d >= ymd(2020, 3, 1) { 95.0 } else { 80.0 };
        let value = |d: NaiveDate| if d >= ymd(2020, 7, 1) { 6.5e6 } else { 4e6 };
        let hs = vec![rated(1, rating, value), rated(2, |_| 70.0, |_| 1e6)];
        let cfg = FeatureConfig::default();
        let (q, _) = build_quality_dataset(&hs, &cfg, 75.0).unwrap();
        let e = q
            .examples
            .iter()
            .find(|e| e.player_id == 1 && e.snapshot_date == ymd(2019, 3, 1))
            .unwrap();
        assert_eq!(e.label, 15.0);
        let (v, _) = build_value_dataset(&hs, &cfg, 75.0).unwrap();
        let e = v
            .examples
            .iter()
            .find(|e| e.player_id == 1 && e.snapshot_date == ymd(2019, 7, 1))
            .unwrap();
        assert_eq!(e.label, 2.5e6);
        assert!(v.examples.iter().all(|e| matches!(e.snapshot_date.month(), 1 | 7)));
        let m = v.feature_index("month_of_year").unwrap();
        assert!(v.examples.iter().all(|e| e.features[m] == 1.0 || e.features[m] == 7.0));
    }

    #[test]
    fn short_history_gives_no_examples() {
        let mut h = rated(1, |_| 80.0, |_| 1e6);
        let keep = |d: NaiveDate| d >= ymd(2018, 1, 1) && d < ymd(2018, 12, 1);
        h.appearances.retain(|a| keep(a.date));
        h.rating_series.retain(|p| keep(p.date));
        let other = rated(2, |_| 70.0, |_| 1e6);
        let cfg = FeatureConfig {
            min_games: 0,
            min_span_months: 0,
            ..FeatureConfig::default()
        };
        let (q, _) = build_quality_dataset(&[h, other], &cfg, 75.0).unwrap();
        assert!(q.examples.iter().all(|e| e.player_id != 1));
    }

    #[test]
    fn schema_covers_every_family() {
        for schema in [quality_schema(), value_schema()] {
            for fam in [
                FeatureFamily::Calendar,
                FeatureFamily::CurrentPerformance,
                FeatureFamily::LeagueStrength,
                FeatureFamily::Recency,
                FeatureFamily::PlayerCharacteristics,
                FeatureFamily::TimeSeries,
                FeatureFamily::ClubTransfers,
                FeatureFamily::TeamDiff,
                FeatureFamily::Contract,
            ] {
                assert!(schema.iter().any(|f| f.family == Some(fam)), "{fam:?}");
            }
        }
        assert!(knn_columns(IndicatorKind::Quality).len() <= 8);
    }

    #[test]
    fn pruning_keeps_first_of_correlated_pair() {
        let schema = vec![
            FeatureDef::continuous("a"),
            FeatureDef::continuous("b"),
            FeatureDef::continuous("c"),
        ];
        let examples = (0..50)
            .map(|i| {
                let x = i as f64;
                LabeledExample {
                    features: vec![x, 2.0 * x + 1.0, ((i * 7) % 11) as f64],
                    label: 0.0,
                    player_id: i,
                    snapshot_date: ymd(2015 + (i as i32 % 3), 1, 1),
                    age_years: 20.0,
                    current_indicator: 0.0,
                }
            })
            .collect();
        let d = Dataset::new(schema, examples, IndicatorKind::Value).unwrap();
        let (p, dropped) = prune_correlated(&d, 2016, 0.95).unwrap();
        assert_eq!(dropped, vec!["b".to_string()]);
        assert_eq!(p.feature_names(), vec!["a".to_string(), "c".to_string()]);
    }
}
