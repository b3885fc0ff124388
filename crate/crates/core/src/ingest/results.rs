//! Election results in the MIT Election Lab column layout.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::link::normalize_name;
use super::{CandidateRecord, Chamber, IngestError, RaceKey, ResultsRow, TitleSource};

const REQUIRED: [&str; 8] = ["year", "chamber", "state", "district", "candidate", "party", "votes", "totalvotes"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IncumbencySource {
    /// Matched against the previous cycle's winners in the same file.
    PriorCycle,
    /// Supplied by the overrides file.
    Override,
    /// No prior-cycle data for the seat; needs an override.
    Unresolved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadedResults {
    pub rows: Vec<ResultsRow>,
    pub candidates: Vec<CandidateRecord>,
}

impl LoadedResults {
    /// Keeps only rows and candidates from `years`.
    pub fn retain_years(&mut self, years: &[i32]) {
        self.rows.retain(|r| years.contains(&r.race.year));
        self.candidates.retain(|c| years.contains(&c.race.year));
    }
}

struct RawRow {
    line: u64,
    race: RaceKey,
    candidate_id: String,
    name: String,
    party: String,
    votes: u64,
    totalvotes: u64,
    vote_share: Option<f64>,
}

fn parse_district(chamber: Chamber, raw: &str) -> Option<u16> {
    if chamber == Chamber::Senate {
        return Some(0);
    }
    match raw.trim().to_ascii_lowercase().as_str() {
        "" | "al" | "at-large" | "at large" | "statewide" => Some(0),
        s => s.parse().ok(),
    }
}

fn derived_id(race: &RaceKey, name: &str) -> String {
    let tag = match race.chamber {
        Chamber::Senate => 'S',
        Chamber::House => 'H',
    };
    let mut slug = normalize_name(name).replace(' ', "-");
    if slug.is_empty() {
        slug = name.chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect();
    }
    format!("{}-{}-{}-{:02}-{slug}", race.year, tag, race.state, race.district)
}

/// Loads a results CSV with header `year,chamber,state,district,candidate,party,votes,totalvotes`
/// (optional `candidate_id`, `vote_share`). Vote share defaults to votes ÷ totalvotes, the
/// race winner is the plurality candidate, and incumbency comes from the prior cycle's winners
/// when the file carries that cycle.
pub fn load_results(path: &Path) -> Result<LoadedResults, IngestError> {
    let file = std::fs::File::open(path).map_err(|e| IngestError::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers().map_err(|e| IngestError::schema(path, 1, e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
    for name in REQUIRED {
        if col(name).is_none() {
            return Err(IngestError::schema(path, 1, format!("missing column {name}")));
        }
    }
    let c = |name: &str| col(name).unwrap();
    let (id_col, share_col) = (col("candidate_id"), col("vote_share"));

    let mut raw = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            IngestError::schema(path, e.position().map_or(0, |p| p.line()), e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let get = |i: usize| record.get(i).map(str::trim).unwrap_or("");
        let bad = |what: &str, v: &str| IngestError::schema(path, line, format!("invalid {what} {v:?}"));

        let year: i32 = get(c("year")).parse().map_err(|_| bad("year", get(c("year"))))?;
        let chamber: Chamber = get(c("chamber")).parse().map_err(|_| bad("chamber", get(c("chamber"))))?;
        let district = parse_district(chamber, get(c("district"))).ok_or_else(|| bad("district", get(c("district"))))?;
        let race = RaceKey::new(year, chamber, get(c("state")), district)
            .map_err(|e| IngestError::schema(path, line, e.to_string()))?;
        let name = get(c("candidate")).to_string();
        if name.is_empty() {
            return Err(IngestError::schema(path, line, "empty candidate name"));
        }
        let votes: u64 = get(c("votes")).parse().map_err(|_| bad("votes", get(c("votes"))))?;
        let totalvotes: u64 = get(c("totalvotes")).parse().map_err(|_| bad("totalvotes", get(c("totalvotes"))))?;
        if votes > totalvotes {
            return Err(IngestError::schema(path, line, format!("votes {votes} exceed totalvotes {totalvotes}")));
        }
        let vote_share = match share_col.map(get).filter(|s| !s.is_empty()) {
            Some(s) => {
                let v: f64 = s.parse().map_err(|_| bad("vote_share", s))?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(bad("vote_share", s));
                }
                Some(v)
            }
            None => None,
        };
        let candidate_id = match id_col.map(get).filter(|s| !s.is_empty()) {
            Some(id) => id.to_string(),
            None => derived_id(&race, &name),
        };
        raw.push(RawRow {
            line,
            race,
            candidate_id,
            name,
            party: get(c("party")).to_string(),
            votes,
            totalvotes,
            vote_share,
        });
    }

    let mut seen: BTreeMap<&str, &RaceKey> = BTreeMap::new();
    for r in &raw {
        if seen.insert(&r.candidate_id, &r.race).is_some() {
            return Err(IngestError::DuplicateCandidate { candidate_id: r.candidate_id.clone(), race: r.race.to_string() });
        }
    }

    let mut races: BTreeMap<RaceKey, Vec<&RawRow>> = BTreeMap::new();
    for r in &raw {
        races.entry(r.race.clone()).or_default().push(r);
    }

    let mut rows = Vec::with_capacity(raw.len());
    let mut winners: BTreeMap<RaceKey, String> = BTreeMap::new();
    for (race, members) in &races {
        let shares: Vec<f64> = members
            .iter()
            .map(|r| {
                r.vote_share.unwrap_or(if r.totalvotes == 0 { 0.0 } else { r.votes as f64 / r.totalvotes as f64 })
            })
            .collect();
        let total: f64 = shares.iter().sum();
        if total > 1.0 + 1e-9 {
            return Err(IngestError::schema(path, members[0].line, format!("vote shares in {race} sum to {total}")));
        }
        let top = members.iter().map(|r| r.votes).max().unwrap_or(0);
        let leaders: Vec<_> = members.iter().filter(|r| r.votes == top).collect();
        if leaders.len() != 1 {
            return Err(IngestError::InvalidRace(format!("{race}: no unique plurality winner")));
        }
        winners.insert(race.clone(), normalize_name(&leaders[0].name));
        for (r, share) in members.iter().zip(shares) {
            rows.push(ResultsRow {
                candidate_id: r.candidate_id.clone(),
                race: race.clone(),
                votes: r.votes,
                vote_share: share,
                win_lose: r.candidate_id == leaders[0].candidate_id,
            });
        }
    }

    let years_by_chamber: BTreeSet<(Chamber, i32)> = races.keys().map(|k| (k.chamber, k.year)).collect();
    let candidates = raw
        .iter()
        .map(|r| {
            let (incumbent, source) = prior_cycle_incumbency(&r.race, &r.name, &winners, &years_by_chamber);
            CandidateRecord {
                candidate_id: r.candidate_id.clone(),
                full_name: r.name.clone(),
                party: r.party.clone(),
                race: r.race.clone(),
                incumbent,
                incumbency_source: source,
                wikipedia_title: None,
                title_source: TitleSource::Unlinked,
                fec_id: None,
                stronghold: None,
            }
        })
        .collect();

    Ok(LoadedResults { rows, candidates })
}

/// House seats are checked against the same district two years earlier; Senate seats
/// against any Senate winner from the same state over the preceding six years.
fn prior_cycle_incumbency(
    race: &RaceKey,
    name: &str,
    winners: &BTreeMap<RaceKey, String>,
    years_by_chamber: &BTreeSet<(Chamber, i32)>,
) -> (bool, IncumbencySource) {
    let lookback: &[i32] = match race.chamber {
        Chamber::House => &[2],
        Chamber::Senate => &[2, 4, 6],
    };
    if !lookback.iter().all(|d| years_by_chamber.contains(&(race.chamber, race.year - d))) {
        return (false, IncumbencySource::Unresolved);
    }
    let key = normalize_name(name);
    let won = winners.iter().any(|(prior, winner)| {
        prior.chamber == race.chamber
            && prior.state == race.state
            && lookback.contains(&(race.year - prior.year))
            && (race.chamber == Chamber::Senate || prior.district == race.district)
            && *winner == key
    });
    (won, IncumbencySource::PriorCycle)
}
