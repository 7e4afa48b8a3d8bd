mod common;

use common::rng;
use proptest::prelude::*;
use rand::Rng;
use scoutcast::dates::ymd;
use scoutcast::rating::{
    apply_inactivity_penalty, expected_score, match_deltas, run_league_history, team_rating, update_after_match,
    LineupEntry, MatchRecord, MatchResult, RatingConfig, RatingState,
};
use scoutcast::sim::{sample_result, SimConfig};

fn state(id: u32, rating: f64) -> RatingState {
    RatingState {
        player_id: id,
        rating,
        last_match_date: None,
        months_inactive: 0,
    }
}

fn random_lineup(r: &mut impl Rng, first_id: u32, size: usize) -> Vec<(RatingState, u32)> {
    (0..size)
        .map(|i| (state(first_id + i as u32, r.random_range(40.0..120.0)), r.random_range(1..=90)))
        .collect()
}

#[test]
fn team_rating_examples() {
    assert_eq!(team_rating(&[(state(1, 1500.0), 90)]).unwrap(), 1500.0);
    assert_eq!(team_rating(&[(state(1, 1400.0), 90), (state(2, 1600.0), 90)]).unwrap(), 1500.0);
    let r = team_rating(&[(state(1, 1400.0), 90), (state(2, 1600.0), 45)]).unwrap();
    assert!((r - (1400.0 * 90.0 + 1600.0 * 45.0) / 135.0).abs() < 1e-9);
    assert!(team_rating(&[(state(1, 1400.0), 0)]).is_err());
}

#[test]
fn expected_score_examples() {
    let cfg = RatingConfig::default();
    assert_eq!(expected_score(80.0, 80.0, &cfg), 0.5);
    let e = expected_score(80.0 + cfg.logistic_scale, 80.0, &cfg);
    assert!((e - 10.0 / 11.0).abs() < 1e-12);
}

#[test]
fn update_examples() {
    // E = 0.75 needs a gap of s·log10(3)
    let cfg = RatingConfig {
        k_factor: 20.0,
        ..RatingConfig::default()
    };
    let gap = cfg.logistic_scale * 3f64.log10();
    let home = [(state(1, 80.0 + gap), 90), (state(2, 80.0 + gap), 45)];
    let away = [(state(3, 80.0), 90)];
    assert!((expected_score(80.0 + gap, 80.0, &cfg) - 0.75).abs() < 1e-12);
    let (hd, ad) = match_deltas(&home, &away, MatchResult::HomeWin, &cfg).unwrap();
    assert!((hd[0] - 5.0).abs() < 1e-9);
    assert!((hd[1] - 2.5).abs() < 1e-9);
    assert!((ad[0] + 5.0).abs() < 1e-9);

    let even = [(state(1, 80.0), 90)];
    let (hd, ad) = match_deltas(&even, &[(state(2, 80.0), 90)], MatchResult::Draw, &cfg).unwrap();
    assert_eq!((hd[0], ad[0]), (0.0, 0.0));

    let (h, _) = update_after_match(&home, &away, MatchResult::AwayWin, &cfg).unwrap();
    assert!(h[0].rating < 80.0 + gap);
}

#[test]
fn stronger_winner_moves_less() {
    let cfg = RatingConfig::default();
    let strong = [(state(1, 90.0), 90)];
    let weak = [(state(2, 70.0), 90)];
    let (favourite, _) = match_deltas(&strong, &weak, MatchResult::HomeWin, &cfg).unwrap();
    let (_, upset) = match_deltas(&strong, &weak, MatchResult::AwayWin, &cfg).unwrap();
    assert!(favourite[0].abs() < upset[0].abs());
}

#[test]
fn inactivity_penalty_examples() {
    let cfg = RatingConfig::default();
    let mut s = state(1, 80.0);
    s.last_match_date = Some(ymd(2019, 1, 10));
    assert_eq!(apply_inactivity_penalty(&s, ymd(2019, 3, 10), &cfg).rating, 80.0);
    let six = apply_inactivity_penalty(&s, ymd(2019, 7, 10), &cfg);
    assert_eq!(six.months_inactive, 6);
    assert!((six.rating - 74.0).abs() < 1e-12);
    let free = RatingConfig {
        inactivity_penalty_per_month: 0.0,
        ..cfg
    };
    assert_eq!(apply_inactivity_penalty(&s, ymd(2021, 7, 10), &free).rating, 80.0);
}

fn random_matches(n: usize, seed: u64) -> Vec<MatchRecord> {
    let mut r = rng(seed);
    let start = ymd(2014, 1, 1);
    (0..n)
        .map(|m| {
            let home_club = r.random_range(0..20u32);
            let away_club = (home_club + r.random_range(1..20u32)) % 20;
            let lineup = |club: u32, r: &mut rand_chacha::ChaCha8Rng| -> Vec<LineupEntry> {
                (0..14)
                    .map(|i| LineupEntry {
                        player_id: club * 14 + i,
                        minutes: if i < 11 { 90 } else { r.random_range(0..=45) },
                    })
                    .collect()
            };
            let result = match r.random_range(0..3) {
                0 => MatchResult::HomeWin,
                1 => MatchResult::Draw,
                _ => MatchResult::AwayWin,
            };
            MatchRecord {
                match_id: m as u64,
                date: start + chrono::Duration::days((m / 10) as i64),
                home_club,
                away_club,
                home: lineup(home_club, &mut r),
                away: lineup(away_club, &mut r),
                home_goals: 0,
                away_goals: 0,
                result,
            }
        })
        .collect()
}

#[test]
fn ten_thousand_matches_stay_finite_and_replay_exactly() {
    let cfg = RatingConfig::default();
    let matches = random_matches(10_000, 4);
    let a = run_league_history(&matches, &cfg).unwrap();
    let b = run_league_history(&matches, &cfg).unwrap();
    assert!(a.series.values().flatten().all(|p| p.value.is_finite()));
    assert_eq!(a.series.len(), b.series.len());
    for (pa, pb) in a.series.values().flatten().zip(b.series.values().flatten()) {
        assert_eq!(pa.value.to_bits(), pb.value.to_bits());
    }
    // one rating point per rated appearance
    let appearances: usize = matches
        .iter()
        .map(|m| m.home.iter().chain(&m.away).filter(|e| e.minutes > 0).count())
        .sum();
    assert_eq!(a.series.values().map(Vec::len).sum::<usize>(), appearances);
}

#[test]
fn empty_history_and_unsorted_input() {
    let cfg = RatingConfig::default();
    let h = run_league_history(&[], &cfg).unwrap();
    assert_eq!(h.rating_at(7, ymd(2020, 1, 1)), cfg.initial_rating);
    let mut m = random_matches(30, 5);
    m.swap(0, 29);
    assert!(run_league_history(&m, &cfg).is_err());
}

#[test]
fn equal_teams_without_draw_margin() {
    let mut r = rng(6);
    let scale = SimConfig::default().rating.logistic_scale;
    let mut wins = 0;
    for _ in 0..10_000 {
        let res = sample_result(0.0, scale, 0.0, &mut r);
        assert_ne!(res, MatchResult::Draw);
        wins += (res == MatchResult::HomeWin) as usize;
    }
    assert!((wins as f64 / 10_000.0 - 0.5).abs() < 0.02);
}

#[test]
fn win_frequency_follows_logistic() {
    let cfg = RatingConfig::default();
    let mut r = rng(7);
    for gap in [-12.0, 4.0, 15.0] {
        let wins = (0..10_000)
            .filter(|_| sample_result(gap, cfg.logistic_scale, 0.0, &mut r) == MatchResult::HomeWin)
            .count();
        let p = 1.0 / (1.0 + 10f64.powf(-gap / cfg.logistic_scale));
        assert!((wins as f64 / 10_000.0 - p).abs() < 0.02, "gap {gap}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn equal_minutes_conserve_rating(seed in 0u64..100_000, size in 1usize..16, res in 0usize..3) {
        let mut r = rng(seed);
        let home = random_lineup(&mut r, 0, size);
        let mut away = random_lineup(&mut r, 100, size);
        // same minute totals on both sides
        for (a, h) in away.iter_mut().zip(&home) {
            a.1 = h.1;
        }
        let result = [MatchResult::HomeWin, MatchResult::Draw, MatchResult::AwayWin][res];
        let cfg = RatingConfig::default();
        let (hd, ad) = match_deltas(&home, &away, result, &cfg).unwrap();
        let total: f64 = hd.iter().chain(&ad).sum();
        prop_assert!(total.abs() < 1e-9);
        let s = result.home_score() - expected_score(team_rating(&home).unwrap(), team_rating(&away).unwrap(), &cfg);
        for d in &hd {
            prop_assert!(d.signum() == s.signum() || *d == 0.0);
        }
    }

    #[test]
    fn expected_score_swap_symmetry(a in -500.0f64..500.0, b in -500.0f64..500.0) {
        let cfg = RatingConfig::default();
        let e = expected_score(a, b, &cfg) + expected_score(b, a, &cfg);
        prop_assert!((e - 1.0).abs() < 1e-12);
        prop_assert!(expected_score(a + 1.0, b, &cfg) >= expected_score(a, b, &cfg));
        if (a - b).abs() < 50.0 {
            prop_assert!(expected_score(a + 1.0, b, &cfg) > expected_score(a, b, &cfg));
        }
    }
}
