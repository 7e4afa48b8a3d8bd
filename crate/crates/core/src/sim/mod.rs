//! Synthetic league generator: a population with a latent, age-shaped
//! ability process plays seasons of league and cup matches, the rating
//! engine turns those matches into rating series, and a parametric model
//! turns ratings into transfer values.
//!
//! Ground truth built into the generator:
//! - ability follows a quadratic age curve peaking at `peak_age`, plus an
//!   AR(1) deviation whose volatility grows away from the peak;
//! - players younger than the peak move their talent towards the mean
//!   ability of their club, so growth depends on the player-vs-team gap;
//! - transfers in January and July move players towards clubs of similar
//!   level, more often for young and mismatched players.

mod config;
mod population;
mod season;
mod store;
mod values;

use std::collections::BTreeMap;

use chrono::NaiveDate;

pub use config::{AbilityCurve, SimConfig, ValueModel};
pub use population::{
    curve_ability, generate_population, innovation_sd, solo_ability_path, LatentAbility,
    Population, SimPlayer,
};
pub use season::{double_round_robin, sample_result, Club, World};
pub use store::{read_histories, write_histories, SIMCONFIG_FILE};
pub use values::{
    age_factor, contract_factor, months_left, rating_z, stored_value, transfer_value,
    ValueInputs, ValueNoise,
};

use crate::data::{MatchAppearance, PlayerHistory, TimePoint};
use crate::dates::{month_starts, ymd};
use crate::error::Result;
use crate::rating::{run_league_history, MatchRecord, RatingHistory};
use crate::seed::rng_for;

/// Everything the simulator produces.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub histories: Vec<PlayerHistory>,
    pub matches: Vec<MatchRecord>,
    pub latent: Vec<LatentAbility>,
    /// Monthly mean rating of the players rostered in each league.
    pub league_strength: BTreeMap<u32, Vec<TimePoint>>,
}

const RATING_GRID: f64 = 16_777_216.0;

/// Rounds to a 2^-24 grid so that differences of stored ratings are exact.
pub fn quantize_rating(r: f64) -> f64 {
    (r * RATING_GRID).round() / RATING_GRID
}

pub fn simulate(cfg: &SimConfig) -> Result<SimOutput> {
    cfg.validate()?;
    let mut world = World::new(cfg);
    let mut matches = Vec::new();
    for _ in 0..cfg.seasons {
        matches.extend(world.simulate_season());
    }
    let mut ratings = run_league_history(&matches, &cfg.rating)?;
    for series in ratings.series.values_mut() {
        for p in series.iter_mut() {
            p.value = quantize_rating(p.value);
        }
    }
    let initial = quantize_rating(cfg.rating.initial_rating);
    ratings.initial_rating = initial;
    let histories = assemble(&world, &matches, &ratings, cfg);
    let league_strength = league_strength_series(&world, &ratings, cfg);
    let histories = attach_values(histories, &league_strength, &ratings, cfg);
    Ok(SimOutput {
        histories,
        matches,
        latent: world.latent,
        league_strength,
    })
}

fn months(cfg: &SimConfig) -> Vec<NaiveDate> {
    month_starts(ymd(cfg.start_year, 1, 1), ymd(cfg.end_year(), 12, 1)).collect()
}

fn assemble(
    world: &World,
    matches: &[MatchRecord],
    ratings: &RatingHistory,
    _cfg: &SimConfig,
) -> Vec<PlayerHistory> {
    let mut appearances: BTreeMap<u32, Vec<MatchAppearance>> = BTreeMap::new();
    for m in matches {
        let sides = [
            (&m.home, m.home_club, m.away_club, m.home_goals, m.away_goals),
            (&m.away, m.away_club, m.home_club, m.away_goals, m.home_goals),
        ];
        for (lineup, club, opp, tg, og) in sides {
            for e in lineup {
                appearances.entry(e.player_id).or_default().push(MatchAppearance {
                    match_id: m.match_id,
                    date: m.date,
                    club_id: club,
                    opponent_id: opp,
                    minutes: e.minutes,
                    team_goals: tg,
                    opponent_goals: og,
                });
            }
        }
    }
    world
        .players
        .iter()
        .map(|p| {
            let id = p.profile.player_id;
            PlayerHistory {
                profile: p.profile.clone(),
                appearances: appearances.remove(&id).unwrap_or_default(),
                rating_series: ratings.series.get(&id).cloned().unwrap_or_default(),
                value_series: Vec::new(),
                club_spells: p.spells.clone(),
                contracts: p.contracts.clone(),
                club_league_strength: Vec::new(),
                retired_on: p.retired_on,
            }
        })
        .collect()
}

fn league_strength_series(
    world: &World,
    ratings: &RatingHistory,
    cfg: &SimConfig,
) -> BTreeMap<u32, Vec<TimePoint>> {
    let mut out: BTreeMap<u32, Vec<TimePoint>> = BTreeMap::new();
    for date in months(cfg) {
        let mut sums: BTreeMap<u32, (f64, usize)> = BTreeMap::new();
        for p in &world.players {
            if let Some(s) = p.spells.iter().rev().find(|s| s.covers(date)) {
                let e = sums.entry(s.league_id).or_default();
                e.0 += ratings.rating_at(p.profile.player_id, date);
                e.1 += 1;
            }
        }
        for (league, (sum, n)) in sums {
            out.entry(league).or_default().push(TimePoint {
                date,
                value: sum / n as f64,
            });
        }
    }
    out
}

fn attach_values(
    mut histories: Vec<PlayerHistory>,
    league_strength: &BTreeMap<u32, Vec<TimePoint>>,
    ratings: &RatingHistory,
    cfg: &SimConfig,
) -> Vec<PlayerHistory> {
    let vm = &cfg.value_model;
    let mut rng = rng_for(cfg.seed, "sim/values");
    let grid = months(cfg);
    for h in histories.iter_mut() {
        let mut noise = ValueNoise::new();
        let id = h.profile.player_id;
        for &date in &grid {
            let Some(spell) = h.spell_at(date).cloned() else {
                continue;
            };
            let strength = crate::data::value_at(&league_strength[&spell.league_id], date)
                .expect("league strength covers every month");
            h.club_league_strength.push(TimePoint {
                date,
                value: strength,
            });
            let inputs = ValueInputs {
                rating: ratings.rating_at(id, date),
                age: h.profile.age_on(date),
                months_left: months_left(date, h.contract_at(date).map(|c| c.end)),
                league_level: (cfg.n_leagues as u32 - 1).saturating_sub(spell.league_id),
                log_noise: noise.step(vm, &mut rng),
            };
            h.value_series.push(TimePoint {
                date,
                value: stored_value(&inputs, vm),
            });
        }
    }
    histories
}
