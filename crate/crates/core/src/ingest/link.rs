//! Linking candidates to Wikipedia articles and FEC identifiers.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CandidateRecord, IncumbencySource, IngestError};

const SUFFIXES: [&str; 4] = ["jr", "sr", "ii", "iii"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TitleSource {
    /// Not linked yet.
    Unlinked,
    /// Explicit row in the overrides file.
    Override,
    /// Derived from the candidate's name.
    Heuristic,
    /// Several candidates share a normalized name and no override disambiguates them.
    Conflict,
    /// Known to have no article.
    NoArticle,
}

fn fold(token: &str) -> String {
    token.chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect()
}

fn is_suffix(token: &str) -> bool {
    SUFFIXES.contains(&fold(token).as_str())
}

/// Reorders "Last, First Middle" to "First Middle Last" unless the comma only
/// separates a suffix ("Smith, Jr.").
fn reorder(full_name: &str) -> String {
    match full_name.split_once(',') {
        Some((last, rest)) if !rest.trim().is_empty() && !rest.split_whitespace().all(is_suffix) => {
            format!("{} {}", rest.trim(), last.trim())
        }
        _ => full_name.replace(',', " "),
    }
}

/// Name tokens with suffixes and single-letter initials removed, original casing kept.
pub(crate) fn name_tokens(full_name: &str) -> Vec<String> {
    reorder(full_name)
        .split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()).to_string())
        .filter(|t| !t.is_empty() && !is_suffix(t) && fold(t).chars().count() > 1)
        .collect()
}

/// Linkage key: case-folded, punctuation-stripped, without generational
/// suffixes (Jr/Sr/II/III) or middle initials.
pub fn normalize_name(full_name: &str) -> String {
    name_tokens(full_name).iter().map(|t| fold(t)).collect::<Vec<_>>().join(" ")
}

fn heuristic_title(full_name: &str) -> String {
    reorder(full_name).split_whitespace().collect::<Vec<_>>().join("_")
}

/// One row of the overrides file. Empty cells leave the heuristic value in place.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkOverride {
    pub candidate_id: String,
    /// `Some(None)` marks a candidate known to have no article (cell value `-`).
    pub wikipedia_title: Option<Option<String>>,
    pub fec_id: Option<String>,
    pub incumbent: Option<bool>,
    pub stronghold: Option<bool>,
}

fn parse_flag(path: &Path, line: u64, col: &str, raw: &str) -> Result<Option<bool>, IngestError> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "" => Ok(None),
        "1" | "true" | "yes" => Ok(Some(true)),
        "0" | "false" | "no" => Ok(Some(false)),
        other => Err(IngestError::schema(path, line, format!("{col}: expected 0/1, got {other:?}"))),
    }
}

/// Reads `candidate_id,wikipedia_title,fec_id,incumbent[,stronghold]`. An empty file yields no overrides.
pub fn load_overrides(path: &Path) -> Result<BTreeMap<String, LinkOverride>, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
    let mut out = BTreeMap::new();
    if text.trim().is_empty() {
        return Ok(out);
    }
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| IngestError::schema(path, 1, e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let id_col = col("candidate_id").ok_or_else(|| IngestError::schema(path, 1, "missing column candidate_id"))?;
    let (title_col, fec_col, inc_col, sh_col) = (col("wikipedia_title"), col("fec_id"), col("incumbent"), col("stronghold"));

    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            IngestError::schema(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let cell = |c: Option<usize>| c.and_then(|i| record.get(i)).map(str::trim).unwrap_or("");
        let id = cell(Some(id_col)).to_string();
        if id.is_empty() {
            return Err(IngestError::schema(path, line, "empty candidate_id"));
        }
        let title = match cell(title_col) {
            "" => None,
            "-" => Some(None),
            t => Some(Some(t.to_string())),
        };
        let fec = Some(cell(fec_col)).filter(|s| !s.is_empty()).map(str::to_string);
        let ovr = LinkOverride {
            candidate_id: id.clone(),
            wikipedia_title: title,
            fec_id: fec,
            incumbent: parse_flag(path, line, "incumbent", cell(inc_col))?,
            stronghold: parse_flag(path, line, "stronghold", cell(sh_col))?,
        };
        if out.insert(id.clone(), ovr).is_some() {
            return Err(IngestError::schema(path, line, format!("duplicate override for {id}")));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkConflict {
    pub key: String,
    pub candidate_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linkage {
    /// Sorted by candidate id.
    pub candidates: Vec<CandidateRecord>,
    pub conflicts: Vec<LinkConflict>,
    /// Override rows naming candidates absent from the input.
    pub unused_overrides: Vec<String>,
}

/// Fills titles, FEC ids and override-supplied flags. Conflicting heuristic
/// keys are reported and left unlinked rather than guessed.
pub fn resolve_links(
    candidates: &[CandidateRecord],
    overrides: &BTreeMap<String, LinkOverride>,
) -> Linkage {
    let mut records: Vec<CandidateRecord> = candidates.to_vec();
    records.sort_by(|a, b| a.candidate_id.cmp(&b.candidate_id));

    let known: BTreeSet<&str> = records.iter().map(|c| c.candidate_id.as_str()).collect();
    let unused_overrides = overrides.keys().filter(|k| !known.contains(k.as_str())).cloned().collect();

    // key -> indices of candidates still needing a heuristic title
    let mut by_key: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, rec) in records.iter_mut().enumerate() {
        let ovr = overrides.get(&rec.candidate_id);
        if let Some(fec) = ovr.and_then(|o| o.fec_id.clone()) {
            rec.fec_id = Some(fec);
        }
        if let Some(inc) = ovr.and_then(|o| o.incumbent) {
            rec.incumbent = inc;
            rec.incumbency_source = IncumbencySource::Override;
        }
        if let Some(sh) = ovr.and_then(|o| o.stronghold) {
            rec.stronghold = Some(sh);
        }
        match ovr.and_then(|o| o.wikipedia_title.clone()) {
            Some(Some(title)) => {
                rec.wikipedia_title = Some(title);
                rec.title_source = TitleSource::Override;
            }
            Some(None) => {
                rec.wikipedia_title = None;
                rec.title_source = TitleSource::NoArticle;
            }
            None => by_key.entry(normalize_name(&rec.full_name)).or_default().push(i),
        }
    }

    let mut conflicts = Vec::new();
    for (key, members) in by_key {
        // Records sharing a key are one person when they share a state and never
        // appear in two different races of the same cycle.
        let states: BTreeSet<&str> = members.iter().map(|&i| records[i].race.state.as_str()).collect();
        let mut races_per_year: BTreeMap<i32, BTreeSet<_>> = BTreeMap::new();
        for &i in &members {
            races_per_year.entry(records[i].race.year).or_default().insert(records[i].race.clone());
        }
        let ambiguous = key.is_empty() || states.len() > 1 || races_per_year.values().any(|r| r.len() > 1);
        if ambiguous {
            for &i in &members {
                records[i].wikipedia_title = None;
                records[i].title_source = TitleSource::Conflict;
            }
            conflicts.push(LinkConflict {
                key,
                candidate_ids: members.iter().map(|&i| records[i].candidate_id.clone()).collect(),
            });
        } else {
            let title = heuristic_title(&records[members[0]].full_name);
            for &i in &members {
                records[i].wikipedia_title = Some(title.clone());
                records[i].title_source = TitleSource::Heuristic;
            }
        }
    }

    Linkage { candidates: records, conflicts, unused_overrides }
}

/// Strict form of [`resolve_links`]: any conflict is an error.
pub fn link_candidates(
    candidates: &[CandidateRecord],
    overrides: &BTreeMap<String, LinkOverride>,
) -> Result<Vec<CandidateRecord>, IngestError> {
    let linkage = resolve_links(candidates, overrides);
    if linkage.conflicts.is_empty() {
        Ok(linkage.candidates)
    } else {
        Err(IngestError::AmbiguousLink { keys: linkage.conflicts.into_iter().map(|c| c.key).collect() })
    }
}
