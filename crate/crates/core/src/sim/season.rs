use std::collections::BTreeMap;

use chrono::{Datelike, Days, NaiveDate};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::config::SimConfig;
use super::population::{
    curve_ability, generate_population, innovation_sd, new_player, LatentAbility, Population,
    SimPlayer,
};
use crate::data::{ClubSpell, ContractPeriod};
use crate::dates::{add_months, ymd};
use crate::rating::{LineupEntry, MatchRecord, MatchResult};
use crate::seed::{rng_for, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct Club {
    pub club_id: u32,
    pub league_id: u32,
}

/// Mutable simulation state across seasons.
#[derive(Debug, Clone)]
pub struct World {
    pub cfg: SimConfig,
    pub players: Vec<SimPlayer>,
    pub clubs: Vec<Club>,
    pub nationality_offsets: Vec<f64>,
    pub latent: Vec<LatentAbility>,
    next_match_id: u64,
    seasons_played: u32,
    rng: Rng,
}

const STARTERS: usize = 11;
const SUBSTITUTES: usize = 3;

impl World {
    /// Builds the initial population and assigns it to clubs by ability:
    /// league 0 receives the strongest players.
    pub fn new(cfg: &SimConfig) -> World {
        let Population {
            mut players,
            nationality_offsets,
        } = generate_population(cfg);
        let mut rng = rng_for(cfg.seed, "sim/world");
        let clubs: Vec<Club> = (0..cfg.n_clubs)
            .map(|c| Club {
                club_id: c as u32,
                league_id: (c * cfg.n_leagues / cfg.n_clubs) as u32,
            })
            .collect();
        let start = ymd(cfg.start_year, 1, 1);
        let noise = Normal::new(0.0, 4.0).unwrap();
        let mut order: Vec<(f64, usize)> = players
            .iter()
            .enumerate()
            .map(|(i, p)| (p.ability_on(start, &cfg.ability_curve) + noise.sample(&mut rng), i))
            .collect();
        order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let per_club = cfg.n_players.div_ceil(cfg.n_clubs);
        for (rank, (_, idx)) in order.into_iter().enumerate() {
            let club = (rank / per_club).min(cfg.n_clubs - 1);
            let p = &mut players[idx];
            p.club = Some(club);
            p.spells.push(ClubSpell {
                club_id: club as u32,
                league_id: clubs[club].league_id,
                start,
                end: None,
                via_transfer: false,
            });
            let years = rng.random_range(0..=4);
            p.contracts.push(ContractPeriod {
                signed: start,
                end: ymd(cfg.start_year + years, 6, 30),
            });
        }
        World {
            cfg: cfg.clone(),
            players,
            clubs,
            nationality_offsets,
            latent: Vec::new(),
            next_match_id: 0,
            seasons_played: 0,
            rng,
        }
    }

    pub fn seasons_played(&self) -> u32 {
        self.seasons_played
    }

    fn ability(&self, idx: usize, date: NaiveDate) -> f64 {
        self.players[idx].ability_on(date, &self.cfg.ability_curve)
    }

    fn rosters(&self) -> Vec<Vec<usize>> {
        let mut rosters = vec![Vec::new(); self.clubs.len()];
        for (i, p) in self.players.iter().enumerate() {
            if let (Some(c), None) = (p.club, p.retired_on) {
                rosters[c].push(i);
            }
        }
        rosters
    }

    fn club_mean_abilities(&self, rosters: &[Vec<usize>], date: NaiveDate) -> Vec<f64> {
        rosters
            .iter()
            .map(|r| {
                if r.is_empty() {
                    self.cfg.ability_curve.talent_mean
                } else {
                    r.iter().map(|&i| self.ability(i, date)).sum::<f64>() / r.len() as f64
                }
            })
            .collect()
    }

    /// Simulates the next calendar season and returns its matches in date order.
    pub fn simulate_season(&mut self) -> Vec<MatchRecord> {
        let year = self.cfg.start_year + self.seasons_played as i32;
        let fixtures = self.season_fixtures(year);
        let mut matches = Vec::new();
        let mut fixture_iter = fixtures.into_iter().peekable();
        for month in 1..=12u32 {
            let date = ymd(year, month, 1);
            if month == 7 {
                self.retire_and_promote(date);
            }
            if month == 1 || month == 7 {
                self.transfer_window(date);
            }
            self.injuries(date);
            self.update_abilities(date);
            while let Some((d, _, _)) = fixture_iter.peek() {
                if d.month() != month {
                    break;
                }
                let (d, home, away) = fixture_iter.next().unwrap();
                if let Some(m) = self.play(d, home, away) {
                    matches.push(m);
                }
            }
        }
        self.seasons_played += 1;
        matches
    }

    /// (date, home club, away club) for every league and cup fixture of the year.
    fn season_fixtures(&mut self, year: i32) -> Vec<(NaiveDate, usize, usize)> {
        let rounds = self.cfg.matches_per_season as usize;
        let jan1 = ymd(year, 1, 1);
        let round_date = |r: usize| jan1 + Days::new((10 + r * 340 / rounds) as u64);
        let mut fixtures = Vec::new();
        for league in 0..self.cfg.n_leagues as u32 {
            let members: Vec<usize> = self
                .clubs
                .iter()
                .enumerate()
                .filter(|(_, c)| c.league_id == league)
                .map(|(i, _)| i)
                .collect();
            let schedule = double_round_robin(&members);
            for r in 0..rounds {
                for &(h, a) in &schedule[r % schedule.len()] {
                    fixtures.push((round_date(r), h, a));
                }
            }
        }
        let cup_rounds = self.cfg.cup_rounds_per_season as usize;
        for c in 0..cup_rounds {
            let date = round_date(c * rounds / cup_rounds) + Days::new(3);
            let mut order: Vec<usize> = (0..self.clubs.len()).collect();
            order.shuffle(&mut self.rng);
            let mut used = vec![false; self.clubs.len()];
            for i in 0..order.len() {
                let h = order[i];
                if used[h] {
                    continue;
                }
                let opp = order[i + 1..]
                    .iter()
                    .copied()
                    .find(|&o| !used[o] && self.clubs[o].league_id != self.clubs[h].league_id);
                if let Some(a) = opp {
                    used[h] = true;
                    used[a] = true;
                    fixtures.push((date, h, a));
                }
            }
        }
        fixtures.sort_by_key(|f| f.0);
        fixtures
    }

    fn injuries(&mut self, date: NaiveDate) {
        let max = self.cfg.max_injury_months.max(1);
        for p in self.players.iter_mut() {
            if !p.is_active() {
                continue;
            }
            if p.injured_until.is_some_and(|u| u <= date) {
                p.injured_until = None;
            }
            if p.injured_until.is_none() && self.rng.random::<f64>() < self.cfg.injury_rate {
                let months = self.rng.random_range(1..=max) as i32;
                p.injured_until = Some(add_months(date, months));
            }
        }
    }

    /// Monthly step of the latent process. Young players' talent drifts
    /// towards their club's mean ability; the deviation follows AR(1) with
    /// age-dependent innovations.
    fn update_abilities(&mut self, date: NaiveDate) {
        let rosters = self.rosters();
        let club_means = self.club_mean_abilities(&rosters, date);
        let curve = self.cfg.ability_curve.clone();
        for i in 0..self.players.len() {
            if !self.players[i].is_active() {
                continue;
            }
            let age = self.players[i].age_on(date);
            let ability = self.ability(i, date);
            let club = self.players[i].club.unwrap();
            let youth = ((curve.peak_age - age) / (curve.peak_age - 16.0)).clamp(0.0, 1.0);
            let gap = club_means[club] - ability;
            let sd = innovation_sd(age, ability, &curve);
            let eps = if sd > 0.0 {
                Normal::new(0.0, sd).unwrap().sample(&mut self.rng)
            } else {
                0.0
            };
            let p = &mut self.players[i];
            p.talent += curve.gap_learning * youth * gap;
            p.dev = self.cfg.ar1_rho * p.dev + eps;
            self.latent.push(LatentAbility {
                player_id: p.profile.player_id,
                date,
                ability: curve_ability(p.talent, age, &curve) + p.dev,
            });
        }
    }

    fn retire_and_promote(&mut self, date: NaiveDate) {
        let offsets = self.nationality_offsets.clone();
        let mut youth = Vec::new();
        for i in 0..self.players.len() {
            let p = &self.players[i];
            if p.retired_on.is_some() || p.age_on(date) < p.retire_age {
                continue;
            }
            let club = p.club;
            let p = &mut self.players[i];
            p.retired_on = Some(date);
            if let Some(s) = p.spells.last_mut() {
                s.end = Some(date);
            }
            p.club = None;
            if let Some(c) = club {
                youth.push(c);
            }
        }
        for club in youth {
            let id = self.players.len() as u32;
            let age = self.rng.random_range(16.0..19.0);
            let mut p = new_player(id, (date, age), &self.cfg, &offsets, &mut self.rng);
            p.club = Some(club);
            p.spells.push(ClubSpell {
                club_id: club as u32,
                league_id: self.clubs[club].league_id,
                start: date,
                end: None,
                via_transfer: false,
            });
            p.contracts.push(ContractPeriod {
                signed: date,
                end: ymd(date.year() + 3, 6, 30),
            });
            self.players.push(p);
        }
    }

    /// Biannual window: expired contracts are renewed or end in a free
    /// transfer; otherwise players move with a probability that grows with
    /// the mismatch between their ability and their club's level.
    fn transfer_window(&mut self, date: NaiveDate) {
        let mut rosters = self.rosters();
        let club_means = self.club_mean_abilities(&rosters, date);
        let target_size = self.cfg.squad_size();
        let max_size = target_size + 4;
        let min_size = target_size.saturating_sub(6).max(STARTERS + 2);
        let pick_noise = Normal::new(0.0, 4.0).unwrap();
        let year = date.year();
        for i in 0..self.players.len() {
            if !self.players[i].is_active() {
                continue;
            }
            let club = self.players[i].club.unwrap();
            let ability = self.ability(i, date);
            let age = self.players[i].age_on(date);
            let expired = self.players[i].contract_end().is_none_or(|e| e < date);
            let mismatch = 1.0 + (ability - club_means[club]).abs() / 8.0;
            let youth = if age < 23.0 { 1.5 } else { 1.0 };
            let p_move = if expired {
                0.4
            } else {
                (self.cfg.transfer_fraction * mismatch * youth).min(1.0)
            };
            let wants_move = self.rng.random::<f64>() < p_move;
            let can_leave = rosters[club].len() > min_size;
            if wants_move && can_leave {
                let target = ability + pick_noise.sample(&mut self.rng);
                let dest = (0..self.clubs.len())
                    .filter(|&c| c != club && rosters[c].len() < max_size)
                    .min_by(|&a, &b| {
                        (club_means[a] - target)
                            .abs()
                            .total_cmp(&(club_means[b] - target).abs())
                    });
                if let Some(dest) = dest {
                    rosters[club].retain(|&x| x != i);
                    rosters[dest].push(i);
                    let years = self.rng.random_range(1..=5);
                    let league_id = self.clubs[dest].league_id;
                    let p = &mut self.players[i];
                    if let Some(s) = p.spells.last_mut() {
                        s.end = Some(date);
                    }
                    p.spells.push(ClubSpell {
                        club_id: dest as u32,
                        league_id,
                        start: date,
                        end: None,
                        via_transfer: true,
                    });
                    p.club = Some(dest);
                    p.contracts.push(ContractPeriod {
                        signed: date,
                        end: ymd(year + years, 6, 30),
                    });
                    continue;
                }
            }
            if expired {
                let years = self.rng.random_range(1..=4);
                self.players[i].contracts.push(ContractPeriod {
                    signed: date,
                    end: ymd(year + years, 6, 30),
                });
            }
        }
    }

    /// Picks a lineup: the best available players by ability plus selection
    /// noise start, and the three weakest starters are substituted.
    fn lineup(&mut self, club: usize, date: NaiveDate) -> (Vec<LineupEntry>, f64) {
        let noise = Normal::new(0.0, 1.0).unwrap();
        let peak = self.cfg.ability_curve.peak_age;
        let mut avail: Vec<(f64, usize)> = Vec::new();
        for (i, p) in self.players.iter().enumerate() {
            if p.club == Some(club)
                && p.retired_on.is_none()
                && p.injured_until.is_none_or(|u| u <= date)
            {
                avail.push((i as f64, i));
            }
        }
        for a in avail.iter_mut() {
            let away = (self.players[a.1].age_on(date) - peak).abs() / 10.0;
            let sd = self.cfg.rotation_sd * (1.0 + self.cfg.rotation_age_slope * away);
            a.0 = self.ability(a.1, date) + sd * noise.sample(&mut self.rng);
        }
        avail.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let starters = avail.len().min(STARTERS);
        let subs = avail.len().saturating_sub(starters).min(SUBSTITUTES);
        let mut minutes = vec![90u32; starters];
        let mut entries = Vec::with_capacity(starters + subs);
        let mut sub_minutes = Vec::with_capacity(subs);
        for s in 0..subs {
            let off = self.rng.random_range(55..=85u32);
            minutes[starters - 1 - s] = off;
            sub_minutes.push(90 - off);
        }
        let mut weighted = 0.0;
        let mut total = 0.0;
        for (k, &(_, i)) in avail.iter().take(starters + subs).enumerate() {
            let m = if k < starters {
                minutes[k]
            } else {
                sub_minutes[k - starters]
            };
            weighted += self.ability(i, date) * m as f64;
            total += m as f64;
            entries.push(LineupEntry {
                player_id: self.players[i].profile.player_id,
                minutes: m,
            });
        }
        let strength = if total > 0.0 { weighted / total } else { f64::NAN };
        (entries, strength)
    }

    fn play(&mut self, date: NaiveDate, home: usize, away: usize) -> Option<MatchRecord> {
        let (home_lineup, home_strength) = self.lineup(home, date);
        let (away_lineup, away_strength) = self.lineup(away, date);
        if home_lineup.is_empty() || away_lineup.is_empty() {
            return None;
        }
        let result = sample_result(
            home_strength - away_strength,
            self.cfg.rating.logistic_scale,
            self.cfg.rating.draw_margin,
            &mut self.rng,
        );
        let (home_goals, away_goals) = sample_score(result, &mut self.rng);
        let id = self.next_match_id;
        self.next_match_id += 1;
        Some(MatchRecord {
            match_id: id,
            date,
            home_club: home as u32,
            away_club: away as u32,
            home: home_lineup,
            away: away_lineup,
            home_goals,
            away_goals,
            result,
        })
    }

    pub fn club_league(&self) -> BTreeMap<u32, u32> {
        self.clubs.iter().map(|c| (c.club_id, c.league_id)).collect()
    }
}

/// Outcome of a match whose latent strength gap is `diff`: the gap plus
/// logistic noise on the rating scale, with draws inside `±draw_margin`.
/// With no margin, P(home win) equals the rating engine's expected score.
pub fn sample_result(diff: f64, scale: f64, draw_margin: f64, rng: &mut Rng) -> MatchResult {
    let u: f64 = rng.random_range(f64::EPSILON..1.0);
    let z = diff + scale * (u / (1.0 - u)).log10();
    if z.abs() <= draw_margin && draw_margin > 0.0 {
        MatchResult::Draw
    } else if z > 0.0 {
        MatchResult::HomeWin
    } else {
        MatchResult::AwayWin
    }
}

fn sample_score(result: MatchResult, rng: &mut Rng) -> (u32, u32) {
    let low = match rng.random_range(0..10) {
        0..=4 => 0,
        5..=8 => 1,
        _ => 2,
    };
    let margin = 1 + u32::from(rng.random::<f64>() < 0.35) + u32::from(rng.random::<f64>() < 0.1);
    match result {
        MatchResult::HomeWin => (low + margin, low),
        MatchResult::AwayWin => (low, low + margin),
        MatchResult::Draw => (low, low),
    }
}

/// Circle-method double round robin over `clubs`; each inner vector is one round.
pub fn double_round_robin(clubs: &[usize]) -> Vec<Vec<(usize, usize)>> {
    let mut teams: Vec<Option<usize>> = clubs.iter().copied().map(Some).collect();
    if teams.len() % 2 == 1 {
        teams.push(None);
    }
    let n = teams.len();
    let mut first_leg = Vec::new();
    for r in 0..n - 1 {
        let mut round = Vec::new();
        for i in 0..n / 2 {
            let (a, b) = (teams[i], teams[n - 1 - i]);
            if let (Some(a), Some(b)) = (a, b) {
                round.push(if (r + i) % 2 == 0 { (a, b) } else { (b, a) });
            }
        }
        first_leg.push(round);
        let last = teams.pop().unwrap();
        teams.insert(1, last);
    }
    let second_leg: Vec<_> = first_leg
        .iter()
        .map(|r| r.iter().map(|&(h, a)| (a, h)).collect())
        .collect();
    first_leg.into_iter().chain(second_leg).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rating::{expected_score, RatingConfig};
    use std::collections::BTreeSet;

    fn home_win_rate(diff: f64, margin: f64, n: usize) -> (f64, usize) {
        let mut rng = rng_for(5, "mc");
        let mut wins = 0;
        let mut draws = 0;
        for _ in 0..n {
            match sample_result(diff, 40.0, margin, &mut rng) {
                MatchResult::HomeWin => wins += 1,
                MatchResult::Draw => draws += 1,
                MatchResult::AwayWin => {}
            }
        }
        (wins as f64 / n as f64, draws)
    }

    #[test]
    fn equal_teams_win_half_the_time() {
        let (rate, draws) = home_win_rate(0.0, 0.0, 10_000);
        assert!((rate - 0.5).abs() <= 0.02, "rate {rate}");
        assert_eq!(draws, 0);
    }

    #[test]
    fn ability_gap_follows_logistic() {
        let cfg = RatingConfig {
            logistic_scale: 40.0,
            ..RatingConfig::default()
        };
        for gap in [10.0, 25.0, -15.0] {
            let (rate, _) = home_win_rate(gap, 0.0, 10_000);
            let expected = expected_score(gap, 0.0, &cfg);
            assert!((rate - expected).abs() <= 0.02, "gap {gap}: {rate} vs {expected}");
        }
    }

    #[test]
    fn round_robin_is_complete() {
        let clubs: Vec<usize> = (0..6).collect();
        let rr = double_round_robin(&clubs);
        assert_eq!(rr.len(), 10);
        let mut pairs = BTreeSet::new();
        for round in &rr {
            let mut seen = BTreeSet::new();
            for &(h, a) in round {
                assert!(seen.insert(h) && seen.insert(a));
                pairs.insert((h, a));
            }
        }
        assert_eq!(pairs.len(), 30);
    }

    #[test]
    fn season_lineups_are_valid() {
        let cfg = SimConfig {
            n_players: 400,
            n_clubs: 16,
            n_leagues: 2,
            seasons: 2,
            ..SimConfig::default()
        };
        let mut world = World::new(&cfg);
        let m1 = world.simulate_season();
        assert!(!m1.is_empty());
        assert!(m1.windows(2).all(|w| w[0].date <= w[1].date));
        for m in &m1 {
            assert!(m.home.iter().chain(&m.away).all(|e| e.minutes <= 120));
            let hm: u32 = m.home.iter().map(|e| e.minutes).sum();
            assert!(hm <= 90 * 11);
            match m.result {
                MatchResult::HomeWin => assert!(m.home_goals > m.away_goals),
                MatchResult::AwayWin => assert!(m.home_goals < m.away_goals),
                MatchResult::Draw => assert_eq!(m.home_goals, m.away_goals),
            }
        }
    }
}
