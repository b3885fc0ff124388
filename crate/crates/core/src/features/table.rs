use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::FeatureError;
use crate::ingest::{Chamber, RaceKey};

/// Election-anchored week index (0..=51) or the election-day cumulative snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Week {
    Index(u8),
    Final,
}

impl fmt::Display for Week {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Week::Index(w) => write!(f, "{w}"),
            Week::Final => f.write_str("final"),
        }
    }
}

impl FromStr for Week {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("final") {
            return Ok(Week::Final);
        }
        match s.parse::<u8>() {
            Ok(w) if (w as usize) < super::WEEKS => Ok(Week::Index(w)),
            _ => Err(format!("week must be 0..=51 or \"final\", got {s:?}")),
        }
    }
}

impl Serialize for Week {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Week {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Numeric fields addressable from a design specification.
pub const FEATURE_FIELDS: &[&str] = &[
    "view_ratio",
    "receipt_ratio",
    "news_ratio",
    "incumbent",
    "challenger",
    "open_seat",
    "has_page",
    "view_win",
    "via_win",
    "news_win",
    "stronghold",
    "vote_share",
    "win_lose",
];

/// A field lookup result: the field may be unknown, known but absent, or present.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldValue {
    Unknown,
    Absent,
    Value(f64),
}

/// One candidate's model-ready covariates for one week.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub candidate_id: String,
    pub race: RaceKey,
    pub week: Week,
    pub view_ratio: Option<f64>,
    pub receipt_ratio: Option<f64>,
    pub news_ratio: Option<f64>,
    pub incumbent: u8,
    pub challenger: u8,
    pub open_seat: u8,
    pub has_page: u8,
    pub view_win: u8,
    pub via_win: u8,
    pub news_win: u8,
    pub stronghold: Option<u8>,
    pub vote_share: f64,
    pub win_lose: u8,
}

impl FeatureRow {
    pub fn field(&self, name: &str) -> FieldValue {
        let flag = |v: u8| FieldValue::Value(f64::from(v));
        let opt = |v: Option<f64>| v.map_or(FieldValue::Absent, FieldValue::Value);
        match name {
            "view_ratio" => opt(self.view_ratio),
            "receipt_ratio" => opt(self.receipt_ratio),
            "news_ratio" => opt(self.news_ratio),
            "incumbent" => flag(self.incumbent),
            "challenger" => flag(self.challenger),
            "open_seat" => flag(self.open_seat),
            "has_page" => flag(self.has_page),
            "view_win" => flag(self.view_win),
            "via_win" => flag(self.via_win),
            "news_win" => flag(self.news_win),
            "stronghold" => opt(self.stronghold.map(f64::from)),
            "vote_share" => FieldValue::Value(self.vote_share),
            "win_lose" => flag(self.win_lose),
            _ => FieldValue::Unknown,
        }
    }
}

/// Flat CSV layout of [`FeatureRow`].
#[derive(Debug, Serialize, Deserialize)]
struct FeatureCsv {
    candidate_id: String,
    year: i32,
    chamber: Chamber,
    state: String,
    district: u16,
    week: Week,
    view_ratio: Option<f64>,
    receipt_ratio: Option<f64>,
    news_ratio: Option<f64>,
    incumbent: u8,
    challenger: u8,
    open_seat: u8,
    has_page: u8,
    view_win: u8,
    via_win: u8,
    news_win: u8,
    stronghold: Option<u8>,
    vote_share: f64,
    win_lose: u8,
}

impl From<&FeatureRow> for FeatureCsv {
    fn from(r: &FeatureRow) -> Self {
        FeatureCsv {
            candidate_id: r.candidate_id.clone(),
            year: r.race.year,
            chamber: r.race.chamber,
            state: r.race.state.clone(),
            district: r.race.district,
            week: r.week,
            view_ratio: r.view_ratio,
            receipt_ratio: r.receipt_ratio,
            news_ratio: r.news_ratio,
            incumbent: r.incumbent,
            challenger: r.challenger,
            open_seat: r.open_seat,
            has_page: r.has_page,
            view_win: r.view_win,
            via_win: r.via_win,
            news_win: r.news_win,
            stronghold: r.stronghold,
            vote_share: r.vote_share,
            win_lose: r.win_lose,
        }
    }
}

impl From<FeatureCsv> for FeatureRow {
    fn from(r: FeatureCsv) -> Self {
        FeatureRow {
            candidate_id: r.candidate_id,
            race: RaceKey { year: r.year, chamber: r.chamber, state: r.state, district: r.district },
            week: r.week,
            view_ratio: r.view_ratio,
            receipt_ratio: r.receipt_ratio,
            news_ratio: r.news_ratio,
            incumbent: r.incumbent,
            challenger: r.challenger,
            open_seat: r.open_seat,
            has_page: r.has_page,
            view_win: r.view_win,
            via_win: r.via_win,
            news_win: r.news_win,
            stronghold: r.stronghold,
            vote_share: r.vote_share,
            win_lose: r.win_lose,
        }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> FeatureError {
    FeatureError::Io { path: path.display().to_string(), source }
}

pub fn write_features_csv(path: &Path, rows: &[FeatureRow]) -> Result<(), FeatureError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e.into()))?;
    for row in rows {
        w.serialize(FeatureCsv::from(row)).map_err(|e| io_err(path, e.into()))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_features_csv(path: &Path) -> Result<Vec<FeatureRow>, FeatureError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e.into()))?;
    r.deserialize::<FeatureCsv>()
        .map(|rec| {
            rec.map(FeatureRow::from).map_err(|e| FeatureError::Parse {
                path: path.display().to_string(),
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn write_features_json(path: &Path, rows: &[FeatureRow]) -> Result<(), FeatureError> {
    let json = serde_json::to_vec_pretty(rows).map_err(|e| io_err(path, e.into()))?;
    std::fs::write(path, json).map_err(|e| io_err(path, e))
}

/// Checks the per-race invariants of a feature table and returns every violation found.
pub fn validate_features(rows: &[FeatureRow]) -> Vec<String> {
    let mut problems = Vec::new();
    let mut groups: BTreeMap<(&RaceKey, Week), Vec<&FeatureRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((&r.race, r.week)).or_default().push(r);
        if r.challenger + r.incumbent != 1 {
            problems.push(format!("{}: challenger and incumbent flags not complementary", r.candidate_id));
        }
        for (name, v) in [("view_ratio", r.view_ratio), ("receipt_ratio", r.receipt_ratio), ("news_ratio", r.news_ratio)] {
            if let Some(v) = v {
                if !(0.0..=1.0).contains(&v) {
                    problems.push(format!("{}: {name} {v} outside [0,1]", r.candidate_id));
                }
            }
        }
    }
    for ((race, week), members) in groups {
        let ratio_fields: [(&str, fn(&FeatureRow) -> Option<f64>); 3] = [
            ("view_ratio", |r| r.view_ratio),
            ("receipt_ratio", |r| r.receipt_ratio),
            ("news_ratio", |r| r.news_ratio),
        ];
        for (name, get) in ratio_fields {
            let present: Vec<f64> = members.iter().filter_map(|r| get(r)).collect();
            if present.is_empty() {
                continue;
            }
            let sum: f64 = present.iter().sum();
            if present.len() != members.len() || (sum - 1.0).abs() > 1e-9 {
                problems.push(format!("{race} week {week}: {name} sums to {sum}"));
            }
        }
        let win_fields: [(&str, fn(&FeatureRow) -> u8); 3] =
            [("view_win", |r| r.view_win), ("via_win", |r| r.via_win), ("news_win", |r| r.news_win)];
        for (name, get) in win_fields {
            let n: u32 = members.iter().map(|r| u32::from(get(r))).sum();
            if n > 1 {
                problems.push(format!("{race} week {week}: {n} candidates with {name} = 1"));
            }
        }
        let winners: u32 = members.iter().map(|r| u32::from(r.win_lose)).sum();
        if winners != 1 {
            problems.push(format!("{race} week {week}: {winners} winners"));
        }
        let open = u8::from(members.iter().all(|r| r.incumbent == 0));
        if members.iter().any(|r| r.open_seat != open) {
            problems.push(format!("{race} week {week}: open_seat flag inconsistent"));
        }
    }
    problems
}
