//! Elo-style player ratings adapted to football lineups.
//!
//! A team's strength is the minute-weighted mean of its players' ratings.
//! After every match each player who took part moves by
//! `K * (S - E) * minutes / 90`, where `E` is the logistic expectation for
//! their side and `S` the realised score (1, ½ or 0). Players returning from
//! a long absence are penalised once, at their next appearance.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::data::TimePoint;
use crate::dates::whole_months_between;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RatingConfig {
    pub initial_rating: f64,
    /// Rating gap at which the stronger side is expected to score 10/11.
    pub logistic_scale: f64,
    pub k_factor: f64,
    /// Only used by the league simulator to decide draws.
    pub draw_margin: f64,
    pub inactivity_grace_months: u32,
    pub inactivity_penalty_per_month: f64,
}

impl Default for RatingConfig {
    fn default() -> Self {
        RatingConfig {
            initial_rating: 75.0,
            logistic_scale: 10.0,
            k_factor: 3.0,
            draw_margin: 2.5,
            inactivity_grace_months: 3,
            inactivity_penalty_per_month: 2.0,
        }
    }
}

impl RatingConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("logistic_scale", self.logistic_scale),
            ("k_factor", self.k_factor),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(
                    format!("rating.{name}"),
                    "must be positive and finite",
                ));
            }
        }
        if !(self.draw_margin >= 0.0) {
            return Err(Error::config("rating.draw_margin", "must be >= 0"));
        }
        if !(self.inactivity_penalty_per_month >= 0.0) {
            return Err(Error::config(
                "rating.inactivity_penalty_per_month",
                "must be >= 0",
            ));
        }
        if !self.initial_rating.is_finite() {
            return Err(Error::config("rating.initial_rating", "must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingState {
    pub player_id: u32,
    pub rating: f64,
    pub last_match_date: Option<NaiveDate>,
    pub months_inactive: u32,
}

impl RatingState {
    pub fn new(player_id: u32, cfg: &RatingConfig) -> Self {
        RatingState {
            player_id,
            rating: cfg.initial_rating,
            last_match_date: None,
            months_inactive: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchResult {
    HomeWin,
    Draw,
    AwayWin,
}

impl MatchResult {
    /// Realised score for the home side.
    pub fn home_score(self) -> f64 {
        match self {
            MatchResult::HomeWin => 1.0,
            MatchResult::Draw => 0.5,
            MatchResult::AwayWin => 0.0,
        }
    }
}

impl FromStr for MatchResult {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "home-win" | "H" => Ok(MatchResult::HomeWin),
            "draw" | "D" => Ok(MatchResult::Draw),
            "away-win" | "A" => Ok(MatchResult::AwayWin),
            other => Err(Error::invalid(format!("invalid match result `{other}`"))),
        }
    }
}

impl fmt::Display for MatchResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchResult::HomeWin => "home-win",
            MatchResult::Draw => "draw",
            MatchResult::AwayWin => "away-win",
        })
    }
}

/// Minute-weighted mean rating of a lineup.
pub fn team_rating(players: &[(RatingState, u32)]) -> Result<f64> {
    let minutes: u64 = players.iter().map(|(_, m)| *m as u64).sum();
    if minutes == 0 {
        return Err(Error::invalid("lineup has no minutes played"));
    }
    let weighted: f64 = players.iter().map(|(s, m)| s.rating * *m as f64).sum();
    Ok(weighted / minutes as f64)
}

/// Logistic expectation for the home side.
pub fn expected_score(r_home: f64, r_away: f64, cfg: &RatingConfig) -> f64 {
    1.0 / (1.0 + 10f64.powf((r_away - r_home) / cfg.logistic_scale))
}

/// Per-player rating changes for one match, home then away, in lineup order.
pub fn match_deltas(
    home: &[(RatingState, u32)],
    away: &[(RatingState, u32)],
    result: MatchResult,
    cfg: &RatingConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let e = expected_score(team_rating(home)?, team_rating(away)?, cfg);
    let s = result.home_score();
    let home_step = cfg.k_factor * (s - e);
    let away_step = cfg.k_factor * ((1.0 - s) - (1.0 - e));
    let home_d = home
        .iter()
        .map(|(_, m)| home_step * *m as f64 / 90.0)
        .collect();
    let away_d = away
        .iter()
        .map(|(_, m)| away_step * *m as f64 / 90.0)
        .collect();
    Ok((home_d, away_d))
}

/// Applies one match to both lineups and returns the updated states.
pub fn update_after_match(
    home: &[(RatingState, u32)],
    away: &[(RatingState, u32)],
    result: MatchResult,
    cfg: &RatingConfig,
) -> Result<(Vec<RatingState>, Vec<RatingState>)> {
    let (hd, ad) = match_deltas(home, away, result, cfg)?;
    let apply = |side: &[(RatingState, u32)], deltas: Vec<f64>| {
        side.iter()
            .zip(deltas)
            .map(|((s, _), d)| RatingState {
                rating: s.rating + d,
                ..s.clone()
            })
            .collect()
    };
    Ok((apply(home, hd), apply(away, ad)))
}

/// Deducts the inactivity penalty for the months beyond the grace period.
/// Meant to be called once, when the player next appears.
pub fn apply_inactivity_penalty(
    state: &RatingState,
    today: NaiveDate,
    cfg: &RatingConfig,
) -> RatingState {
    let mut out = state.clone();
    let Some(last) = state.last_match_date else {
        return out;
    };
    out.months_inactive = whole_months_between(last, today);
    if out.months_inactive > cfg.inactivity_grace_months {
        let excess = (out.months_inactive - cfg.inactivity_grace_months) as f64;
        out.rating -= cfg.inactivity_penalty_per_month * excess;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineupEntry {
    pub player_id: u32,
    pub minutes: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub match_id: u64,
    pub date: NaiveDate,
    pub home_club: u32,
    pub away_club: u32,
    pub home: Vec<LineupEntry>,
    pub away: Vec<LineupEntry>,
    pub home_goals: u32,
    pub away_goals: u32,
    pub result: MatchResult,
}

/// Rating series per player, produced by [`run_league_history`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RatingHistory {
    pub initial_rating: f64,
    pub series: BTreeMap<u32, Vec<TimePoint>>,
}

impl RatingHistory {
    /// Rating at `date`; players without a rated appearance yet sit at the
    /// initial rating.
    pub fn rating_at(&self, player_id: u32, date: NaiveDate) -> f64 {
        self.series
            .get(&player_id)
            .and_then(|s| crate::data::value_at(s, date))
            .unwrap_or(self.initial_rating)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["player_id", "date", "rating"])?;
        for (pid, points) in &self.series {
            for p in points {
                w.write_record([
                    pid.to_string(),
                    p.date.format("%Y-%m-%d").to_string(),
                    p.value.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("<ratings csv>", e))?;
        Ok(())
    }
}

/// Replays a chronological match list from scratch.
pub fn run_league_history(matches: &[MatchRecord], cfg: &RatingConfig) -> Result<RatingHistory> {
    if let Some(w) = matches.windows(2).find(|w| w[0].date > w[1].date) {
        return Err(Error::invalid(format!(
            "matches not sorted by date: {} follows {}",
            w[1].date, w[0].date
        )));
    }
    let mut states: BTreeMap<u32, RatingState> = BTreeMap::new();
    let mut history = RatingHistory {
        initial_rating: cfg.initial_rating,
        series: BTreeMap::new(),
    };
    for m in matches {
        let mut collect = |lineup: &[LineupEntry]| -> Vec<(RatingState, u32)> {
            lineup
                .iter()
                .filter(|e| e.minutes > 0)
                .map(|e| {
                    let st = states
                        .entry(e.player_id)
                        .or_insert_with(|| RatingState::new(e.player_id, cfg));
                    (apply_inactivity_penalty(st, m.date, cfg), e.minutes)
                })
                .collect()
        };
        let home = collect(&m.home);
        let away = collect(&m.away);
        if home.is_empty() || away.is_empty() {
            continue;
        }
        let (home, away) = update_after_match(&home, &away, m.result, cfg)?;
        for mut st in home.into_iter().chain(away) {
            st.last_match_date = Some(m.date);
            st.months_inactive = 0;
            history
                .series
                .entry(st.player_id)
                .or_default()
                .push(TimePoint {
                    date: m.date,
                    value: st.rating,
                });
            states.insert(st.player_id, st);
        }
    }
    Ok(history)
}
