//! CSV persistence of simulated histories. A history directory holds one
//! file per series type plus `simconfig.json`.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use super::config::SimConfig;
use crate::data::{
    ClubSpell, ContractPeriod, MatchAppearance, PlayerHistory, PlayerProfile, Position, TimePoint,
};
use crate::error::{Error, Result};
use crate::io::{write_bytes, write_json};

pub const SIMCONFIG_FILE: &str = "simconfig.json";

#[derive(Serialize, Deserialize)]
struct PlayerRow {
    player_id: u32,
    birth_date: NaiveDate,
    nationality: u16,
    position: Position,
    retired_on: Option<NaiveDate>,
}

#[derive(Serialize, Deserialize)]
struct AppearanceRow {
    player_id: u32,
    match_id: u64,
    date: NaiveDate,
    club_id: u32,
    opponent_id: u32,
    minutes: u32,
    team_goals: u32,
    opponent_goals: u32,
}

#[derive(Serialize, Deserialize)]
struct SeriesRow {
    player_id: u32,
    date: NaiveDate,
    value: f64,
}

#[derive(Serialize, Deserialize)]
struct RatingRow {
    player_id: u32,
    date: NaiveDate,
    rating: f64,
}

#[derive(Serialize, Deserialize)]
struct SpellRow {
    player_id: u32,
    club_id: u32,
    league_id: u32,
    start: NaiveDate,
    end: Option<NaiveDate>,
    via_transfer: bool,
}

#[derive(Serialize, Deserialize)]
struct ContractRow {
    player_id: u32,
    signed: NaiveDate,
    end: NaiveDate,
}

fn write_rows<T: Serialize>(path: &Path, rows: impl Iterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::data(e.to_string()))?;
    write_bytes(path, &bytes)
}

fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::data(format!("{}: {other:?}", path.display())),
    })?;
    r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| Error::data(format!("{}: {e}", path.display())))
}

pub fn write_histories(dir: &Path, histories: &[PlayerHistory], cfg: &SimConfig) -> Result<()> {
    write_rows(
        &dir.join("players.csv"),
        histories.iter().map(|h| PlayerRow {
            player_id: h.profile.player_id,
            birth_date: h.profile.birth_date,
            nationality: h.profile.nationality,
            position: h.profile.position,
            retired_on: h.retired_on,
        }),
    )?;
    write_rows(
        &dir.join("appearances.csv"),
        histories.iter().flat_map(|h| {
            h.appearances.iter().map(|a| AppearanceRow {
                player_id: h.profile.player_id,
                match_id: a.match_id,
                date: a.date,
                club_id: a.club_id,
                opponent_id: a.opponent_id,
                minutes: a.minutes,
                team_goals: a.team_goals,
                opponent_goals: a.opponent_goals,
            })
        }),
    )?;
    write_rows(
        &dir.join("ratings.csv"),
        histories.iter().flat_map(|h| {
            h.rating_series.iter().map(|p| RatingRow {
                player_id: h.profile.player_id,
                date: p.date,
                rating: p.value,
            })
        }),
    )?;
    let series = |f: fn(&PlayerHistory) -> &Vec<TimePoint>| {
        histories.iter().flat_map(move |h| {
            f(h).iter().map(|p| SeriesRow {
                player_id: h.profile.player_id,
                date: p.date,
                value: p.value,
            })
        })
    };
    write_rows(&dir.join("values.csv"), series(|h| &h.value_series))?;
    write_rows(
        &dir.join("league_strength.csv"),
        series(|h| &h.club_league_strength),
    )?;
    write_rows(
        &dir.join("spells.csv"),
        histories.iter().flat_map(|h| {
            h.club_spells.iter().map(|s| SpellRow {
                player_id: h.profile.player_id,
                club_id: s.club_id,
                league_id: s.league_id,
                start: s.start,
                end: s.end,
                via_transfer: s.via_transfer,
            })
        }),
    )?;
    write_rows(
        &dir.join("contracts.csv"),
        histories.iter().flat_map(|h| {
            h.contracts.iter().map(|c| ContractRow {
                player_id: h.profile.player_id,
                signed: c.signed,
                end: c.end,
            })
        }),
    )?;
    write_json(&dir.join(SIMCONFIG_FILE), cfg)
}

fn get<'a>(
    by_id: &'a mut BTreeMap<u32, PlayerHistory>,
    id: u32,
    file: &str,
) -> Result<&'a mut PlayerHistory> {
    by_id
        .get_mut(&id)
        .ok_or_else(|| Error::data(format!("{file}: unknown player_id {id}")))
}

/// Loads histories written by [`write_histories`], together with the
/// simulator config they came from.
pub fn read_histories(dir: &Path) -> Result<(Vec<PlayerHistory>, SimConfig)> {
    let cfg: SimConfig = crate::io::read_json(&dir.join(SIMCONFIG_FILE))?;
    let players: Vec<PlayerRow> = read_rows(&dir.join("players.csv"))?;
    let mut by_id: BTreeMap<u32, PlayerHistory> = BTreeMap::new();
    for p in players {
        let h = PlayerHistory {
            profile: PlayerProfile {
                player_id: p.player_id,
                birth_date: p.birth_date,
                nationality: p.nationality,
                position: p.position,
            },
            appearances: Vec::new(),
            rating_series: Vec::new(),
            value_series: Vec::new(),
            club_spells: Vec::new(),
            contracts: Vec::new(),
            club_league_strength: Vec::new(),
            retired_on: p.retired_on,
        };
        if by_id.insert(p.player_id, h).is_some() {
            return Err(Error::data(format!("duplicate player_id {}", p.player_id)));
        }
    }
    for a in read_rows::<AppearanceRow>(&dir.join("appearances.csv"))? {
        get(&mut by_id, a.player_id, "appearances.csv")?
            .appearances
            .push(MatchAppearance {
                match_id: a.match_id,
                date: a.date,
                club_id: a.club_id,
                opponent_id: a.opponent_id,
                minutes: a.minutes,
                team_goals: a.team_goals,
                opponent_goals: a.opponent_goals,
            });
    }
    for r in read_rows::<RatingRow>(&dir.join("ratings.csv"))? {
        get(&mut by_id, r.player_id, "ratings.csv")?.rating_series.push(TimePoint {
            date: r.date,
            value: r.rating,
        });
    }
    for r in read_rows::<SeriesRow>(&dir.join("values.csv"))? {
        get(&mut by_id, r.player_id, "values.csv")?.value_series.push(TimePoint {
            date: r.date,
            value: r.value,
        });
    }
    for r in read_rows::<SeriesRow>(&dir.join("league_strength.csv"))? {
        get(&mut by_id, r.player_id, "league_strength.csv")?
            .club_league_strength
            .push(TimePoint {
                date: r.date,
                value: r.value,
            });
    }
    for s in read_rows::<SpellRow>(&dir.join("spells.csv"))? {
        get(&mut by_id, s.player_id, "spells.csv")?.club_spells.push(ClubSpell {
            club_id: s.club_id,
            league_id: s.league_id,
            start: s.start,
            end: s.end,
            via_transfer: s.via_transfer,
        });
    }
    for c in read_rows::<ContractRow>(&dir.join("contracts.csv"))? {
        get(&mut by_id, c.player_id, "contracts.csv")?.contracts.push(ContractPeriod {
            signed: c.signed,
            end: c.end,
        });
    }
    let histories: Vec<PlayerHistory> = by_id.into_values().collect();
    for h in &histories {
        h.validate()?;
    }
    Ok((histories, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let cfg = SimConfig {
            n_players: 120,
            n_clubs: 8,
            n_leagues: 2,
            seasons: 2,
            ..SimConfig::default()
        };
        let out = super::super::simulate(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_histories(dir.path(), &out.histories, &cfg).unwrap();
        let (back, cfg_back) = read_histories(dir.path()).unwrap();
        assert_eq!(cfg_back, cfg);
        assert_eq!(back, out.histories);
    }
}
