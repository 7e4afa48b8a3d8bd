use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rating::RatingConfig;

/// Age curve and noise of the latent ability process.
///
/// `ability(age) = talent - curvature * (age - peak_age)^2 + dev`, where `dev`
/// is a monthly AR(1) process whose innovations grow with distance from the
/// peak age, and `talent` drifts towards the quality of a young player's
/// teammates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AbilityCurve {
    pub peak_age: f64,
    pub curvature: f64,
    /// Monthly innovation standard deviation of the AR(1) deviation at peak age.
    pub idiosyncratic_sd: f64,
    /// Relative increase of the innovation sd per 10 years away from the peak.
    pub volatility_age_slope: f64,
    pub talent_mean: f64,
    pub talent_sd: f64,
    /// Standard deviation of the per-nationality talent offset.
    pub nationality_sd: f64,
    /// Monthly share of the teammate-quality gap absorbed into talent by
    /// players younger than the peak age.
    pub gap_learning: f64,
    /// Relative increase of the innovation sd per talent_sd of ability above
    /// talent_mean.
    pub level_volatility: f64,
}

impl Default for AbilityCurve {
    fn default() -> Self {
        AbilityCurve {
            peak_age: 26.0,
            curvature: 0.3,
            idiosyncratic_sd: 1.0,
            volatility_age_slope: 4.0,
            talent_mean: 80.0,
            talent_sd: 10.0,
            nationality_sd: 2.0,
            gap_learning: 0.2,
            level_volatility: 1.5,
        }
    }
}

/// Parametric transfer-value model standing in for a proprietary valuation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValueModel {
    pub base_eur: f64,
    pub rating_elasticity: f64,
    /// Rating mapped to z = 0.
    pub rating_reference: f64,
    /// Rating points per unit of z.
    pub rating_scale: f64,
    /// Log-value lost per year of age beyond `age_reference`.
    pub age_discount: f64,
    pub age_reference: f64,
    /// Share of value lost when a contract expires (linear over the last 6 months).
    pub contract_discount: f64,
    /// Multiplier per league level above the lowest league.
    pub league_premium: f64,
    pub noise_sd_log: f64,
    /// Monthly persistence of the log-noise.
    pub noise_rho: f64,
}

impl Default for ValueModel {
    fn default() -> Self {
        ValueModel {
            base_eur: 1_500_000.0,
            rating_elasticity: 1.1,
            rating_reference: 75.0,
            rating_scale: 10.0,
            age_discount: 0.08,
            age_reference: 24.0,
            contract_discount: 0.5,
            league_premium: 1.3,
            noise_sd_log: 0.1,
            noise_rho: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n_players: usize,
    pub n_clubs: usize,
    pub n_leagues: usize,
    pub seasons: u32,
    pub start_year: i32,
    /// League rounds per season; each club plays one match per round.
    pub matches_per_season: u32,
    /// Inter-league cup rounds per season.
    pub cup_rounds_per_season: u32,
    pub seed: u64,
    pub ability_curve: AbilityCurve,
    pub ar1_rho: f64,
    pub value_model: ValueModel,
    /// Base probability that a player changes club in a transfer window.
    pub transfer_fraction: f64,
    /// Monthly probability that an available player gets injured.
    pub injury_rate: f64,
    pub max_injury_months: u32,
    /// Noise added to ability when picking lineups; larger values rotate squads more.
    pub rotation_sd: f64,
    /// Relative growth of the selection noise per decade away from the peak age.
    pub rotation_age_slope: f64,
    pub n_nationalities: u16,
    pub rating: RatingConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_players: 2000,
            n_clubs: 80,
            n_leagues: 4,
            seasons: 10,
            start_year: 2013,
            matches_per_season: 38,
            cup_rounds_per_season: 16,
            seed: 20240501,
            ability_curve: AbilityCurve::default(),
            ar1_rho: 0.95,
            value_model: ValueModel::default(),
            transfer_fraction: 0.06,
            injury_rate: 0.02,
            max_injury_months: 8,
            rotation_sd: 12.0,
            rotation_age_slope: 2.0,
            n_nationalities: 30,
            rating: RatingConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn squad_size(&self) -> usize {
        (self.n_players / self.n_clubs).max(1)
    }

    pub fn end_year(&self) -> i32 {
        self.start_year + self.seasons as i32 - 1
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("sim.n_players", self.n_players),
            ("sim.n_clubs", self.n_clubs),
            ("sim.n_leagues", self.n_leagues),
            ("sim.seasons", self.seasons as usize),
            ("sim.matches_per_season", self.matches_per_season as usize),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::config(name, "must be positive"));
            }
        }
        if self.n_clubs < 2 * self.n_leagues {
            return Err(Error::config(
                "sim.n_clubs",
                "need at least two clubs per league",
            ));
        }
        if self.n_players < self.n_clubs {
            return Err(Error::config("sim.n_players", "need at least one player per club"));
        }
        if !(0.0..1.0).contains(&self.ar1_rho) {
            return Err(Error::config("sim.ar1_rho", "must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.value_model.noise_rho) {
            return Err(Error::config("sim.value_model.noise_rho", "must lie in [0, 1)"));
        }
        let vm = &self.value_model;
        let positive = [
            ("sim.value_model.base_eur", vm.base_eur),
            ("sim.value_model.rating_elasticity", vm.rating_elasticity),
            ("sim.value_model.rating_scale", vm.rating_scale),
            ("sim.value_model.age_discount", vm.age_discount),
            ("sim.value_model.contract_discount", vm.contract_discount),
            ("sim.value_model.league_premium", vm.league_premium),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(name, "must be positive"));
            }
        }
        if vm.contract_discount >= 1.0 {
            return Err(Error::config(
                "sim.value_model.contract_discount",
                "must be below 1",
            ));
        }
        if !(vm.noise_sd_log >= 0.0) {
            return Err(Error::config("sim.value_model.noise_sd_log", "must be >= 0"));
        }
        let ac = &self.ability_curve;
        if !(ac.curvature >= 0.0
            && ac.idiosyncratic_sd >= 0.0
            && ac.talent_sd >= 0.0
            && ac.level_volatility >= 0.0)
        {
            return Err(Error::config(
                "sim.ability_curve",
                "curvature and standard deviations must be >= 0",
            ));
        }
        if !(0.0..=1.0).contains(&self.transfer_fraction) {
            return Err(Error::config("sim.transfer_fraction", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.injury_rate) {
            return Err(Error::config("sim.injury_rate", "must lie in [0, 1]"));
        }
        if !(self.rotation_sd >= 0.0) {
            return Err(Error::config("sim.rotation_sd", "must be >= 0"));
        }
        if !(self.rotation_age_slope >= 0.0) {
            return Err(Error::config("sim.rotation_age_slope", "must be >= 0"));
        }
        if self.n_nationalities == 0 {
            return Err(Error::config("sim.n_nationalities", "must be positive"));
        }
        self.rating.validate()
    }
}
