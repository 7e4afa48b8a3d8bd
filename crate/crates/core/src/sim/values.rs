use chrono::NaiveDate;
use rand_distr::{Distribution, Normal};

use super::config::ValueModel;
use crate::seed::Rng;

/// Inputs of the value formula at one date.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueInputs {
    pub rating: f64,
    pub age: f64,
    pub months_left: u32,
    /// 0 for the lowest league, increasing towards the top league.
    pub league_level: u32,
    pub log_noise: f64,
}

pub fn rating_z(rating: f64, vm: &ValueModel) -> f64 {
    (rating - vm.rating_reference) / vm.rating_scale
}

pub fn age_factor(age: f64, vm: &ValueModel) -> f64 {
    (-vm.age_discount * (age - vm.age_reference).max(0.0)).exp()
}

/// 1 with six or more months left, dropping linearly to
/// `1 - contract_discount` at expiry.
pub fn contract_factor(months_left: u32, vm: &ValueModel) -> f64 {
    if months_left >= 6 {
        1.0
    } else {
        1.0 - vm.contract_discount * (6 - months_left) as f64 / 6.0
    }
}

/// Unrounded value in EUR.
pub fn transfer_value(x: &ValueInputs, vm: &ValueModel) -> f64 {
    vm.base_eur
        * (vm.rating_elasticity * rating_z(x.rating, vm)).exp()
        * age_factor(x.age, vm)
        * contract_factor(x.months_left, vm)
        * vm.league_premium.powi(x.league_level as i32)
        * x.log_noise.exp()
}

/// Value as stored: whole euros, at least 1.
pub fn stored_value(x: &ValueInputs, vm: &ValueModel) -> f64 {
    transfer_value(x, vm).round().max(1.0)
}

/// Persistent log-noise of one player's valuation.
#[derive(Debug, Clone)]
pub struct ValueNoise {
    state: f64,
    started: bool,
}

impl ValueNoise {
    pub fn new() -> Self {
        ValueNoise {
            state: 0.0,
            started: false,
        }
    }

    /// Advances the AR(1) log-noise by one month; stationary sd is `noise_sd_log`.
    pub fn step(&mut self, vm: &ValueModel, rng: &mut Rng) -> f64 {
        if vm.noise_sd_log <= 0.0 {
            return 0.0;
        }
        if !self.started {
            self.started = true;
            self.state = Normal::new(0.0, vm.noise_sd_log).unwrap().sample(rng);
        } else {
            let innov = vm.noise_sd_log * (1.0 - vm.noise_rho * vm.noise_rho).sqrt();
            self.state =
                vm.noise_rho * self.state + Normal::new(0.0, innov).unwrap().sample(rng);
        }
        self.state
    }
}

impl Default for ValueNoise {
    fn default() -> Self {
        Self::new()
    }
}

/// Months from `date` until the contract end (0 once expired).
pub fn months_left(date: NaiveDate, contract_end: Option<NaiveDate>) -> u32 {
    contract_end.map_or(0, |end| crate::dates::whole_months_between(date, end))
}
