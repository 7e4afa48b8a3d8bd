use chrono::{Days, NaiveDate};
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::{AbilityCurve, SimConfig};
use crate::data::{ClubSpell, ContractPeriod, PlayerProfile, Position};
use crate::dates::ymd;
use crate::seed::{rng_for, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentAbility {
    pub player_id: u32,
    pub date: NaiveDate,
    pub ability: f64,
}

/// Simulator-side state of one player.
#[derive(Debug, Clone, PartialEq)]
pub struct SimPlayer {
    pub profile: PlayerProfile,
    pub talent: f64,
    /// AR(1) deviation from the deterministic age curve.
    pub dev: f64,
    pub retire_age: f64,
    pub club: Option<usize>,
    pub injured_until: Option<NaiveDate>,
    pub retired_on: Option<NaiveDate>,
    pub spells: Vec<ClubSpell>,
    pub contracts: Vec<ContractPeriod>,
}

impl SimPlayer {
    pub fn age_on(&self, date: NaiveDate) -> f64 {
        self.profile.age_on(date)
    }

    pub fn ability_on(&self, date: NaiveDate, curve: &AbilityCurve) -> f64 {
        curve_ability(self.talent, self.age_on(date), curve) + self.dev
    }

    pub fn is_active(&self) -> bool {
        self.retired_on.is_none() && self.club.is_some()
    }

    pub fn contract_end(&self) -> Option<NaiveDate> {
        self.contracts.last().map(|c| c.end)
    }
}

/// Deterministic part of the ability curve.
pub fn curve_ability(talent: f64, age: f64, curve: &AbilityCurve) -> f64 {
    let d = age - curve.peak_age;
    talent - curve.curvature * d * d
}

/// Innovation standard deviation at a given age and current ability.
pub fn innovation_sd(age: f64, ability: f64, curve: &AbilityCurve) -> f64 {
    let above = if curve.talent_sd > 0.0 {
        ((ability - curve.talent_mean) / curve.talent_sd).max(0.0)
    } else {
        0.0
    };
    curve.idiosyncratic_sd
        * (1.0 + curve.volatility_age_slope * (age - curve.peak_age).abs() / 10.0 + curve.level_volatility * above)
}

/// Players in the initial population; ids are `0..n_players`.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub players: Vec<SimPlayer>,
    /// Talent offset per nationality.
    pub nationality_offsets: Vec<f64>,
}

pub(crate) fn birth_date_for_age(on: NaiveDate, age_years: f64) -> NaiveDate {
    let days = (age_years * 365.25).round() as u64;
    on.checked_sub_days(Days::new(days)).expect("birth date in range")
}

fn draw_position(rng: &mut Rng) -> Position {
    match rng.random_range(0..100) {
        0..=9 => Position::Gk,
        10..=42 => Position::Def,
        43..=75 => Position::Mid,
        _ => Position::Att,
    }
}

/// Skewed nationality draw: low ids are the large football nations.
fn draw_nationality(rng: &mut Rng, n: u16) -> u16 {
    let u: f64 = rng.random();
    ((u * u) * n as f64).floor().min(n as f64 - 1.0) as u16
}

pub(crate) fn new_player(
    player_id: u32,
    age_at: (NaiveDate, f64),
    cfg: &SimConfig,
    offsets: &[f64],
    rng: &mut Rng,
) -> SimPlayer {
    let curve = &cfg.ability_curve;
    let nationality = draw_nationality(rng, cfg.n_nationalities);
    let position = draw_position(rng);
    let talent_noise = if curve.talent_sd > 0.0 {
        Normal::new(0.0, curve.talent_sd).unwrap().sample(rng)
    } else {
        0.0
    };
    let retire_age = rng.random_range(33.0..38.0);
    SimPlayer {
        profile: PlayerProfile {
            player_id,
            birth_date: birth_date_for_age(age_at.0, age_at.1),
            nationality,
            position,
        },
        talent: curve.talent_mean + offsets[nationality as usize] + talent_noise,
        dev: 0.0,
        retire_age,
        club: None,
        injured_until: None,
        retired_on: None,
        spells: Vec::new(),
        contracts: Vec::new(),
    }
}

/// Initial population with ages at the first season uniform in [16, 38].
pub fn generate_population(cfg: &SimConfig) -> Population {
    let mut rng = rng_for(cfg.seed, "sim/population");
    let start = ymd(cfg.start_year, 1, 1);
    let offsets: Vec<f64> = (0..cfg.n_nationalities)
        .map(|_| {
            if cfg.ability_curve.nationality_sd > 0.0 {
                Normal::new(0.0, cfg.ability_curve.nationality_sd)
                    .unwrap()
                    .sample(&mut rng)
            } else {
                0.0
            }
        })
        .collect();
    let players = (0..cfg.n_players as u32)
        .map(|id| {
            let age = rng.random_range(16.0..=38.0);
            new_player(id, (start, age), cfg, &offsets, &mut rng)
        })
        .collect();
    Population {
        players,
        nationality_offsets: offsets,
    }
}

/// Ability path of one player under the pure age curve plus AR(1) noise,
/// without any team interaction. Used to inspect the latent process.
pub fn solo_ability_path(
    player: &SimPlayer,
    months: &[NaiveDate],
    cfg: &SimConfig,
    rng: &mut Rng,
) -> Vec<LatentAbility> {
    let curve = &cfg.ability_curve;
    let mut dev = player.dev;
    months
        .iter()
        .map(|&date| {
            let age = player.age_on(date);
            let sd = innovation_sd(age, curve_ability(player.talent, age, curve) + dev, curve);
            let eps = if sd > 0.0 {
                Normal::new(0.0, sd).unwrap().sample(rng)
            } else {
                0.0
            };
            dev = cfg.ar1_rho * dev + eps;
            LatentAbility {
                player_id: player.profile.player_id,
                date,
                ability: curve_ability(player.talent, age, curve) + dev,
            }
        })
        .collect()
}
