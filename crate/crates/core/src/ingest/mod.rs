//! Candidate-level raw data: election results, campaign receipts, Wikipedia
//! pageviews and television news mentions.
//!
//! Loaders are pure functions of their input files. The two remote sources go
//! through [`Fetcher`], which serves every request from an on-disk
//! [`ResponseCache`] before touching the network.

mod cache;
mod error;
mod http;
mod link;
mod pageviews;
mod receipts;
mod results;
mod tv;

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

pub use cache::{CachedResponse, ResponseCache};
pub use error::IngestError;
pub use http::{
    Fetcher, FetcherBuilder, HttpResponse, RateLimiter, ReqwestTransport, RetryPolicy, Transport,
    TransportFailure,
};
pub use link::{
    link_candidates, load_overrides, normalize_name, resolve_links, LinkConflict, LinkOverride,
    Linkage, TitleSource,
};
pub use pageviews::{pageviews_url, parse_pageviews, PAGEVIEWS_ENDPOINT};
pub use receipts::{load_receipts, ReceiptsLoad};
pub use results::{load_results, IncumbencySource, LoadedResults};
pub use tv::{
    parse_tv_timeline, tv_query, tv_url, DEFAULT_CHANNELS, TV_ENDPOINT,
};

/// Number of days fetched per candidate: 52 complete weeks ending on election day.
pub const WINDOW_DAYS: i64 = 364;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Chamber {
    Senate,
    House,
}

impl Chamber {
    pub fn as_str(self) -> &'static str {
        match self {
            Chamber::Senate => "Senate",
            Chamber::House => "House",
        }
    }
}

impl fmt::Display for Chamber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Chamber {
    type Err = String;

    /// Accepts the plain names as well as the "US SENATE" / "US HOUSE" office
    /// labels used by the MIT Election Lab files.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let folded = s.trim().to_ascii_lowercase();
        let folded = folded.strip_prefix("us ").unwrap_or(&folded);
        match folded {
            "senate" | "s" => Ok(Chamber::Senate),
            "house" | "h" => Ok(Chamber::House),
            _ => Err(format!("unknown chamber {s:?}")),
        }
    }
}

/// One contested seat in one general election.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RaceKey {
    pub year: i32,
    pub chamber: Chamber,
    pub state: String,
    pub district: u16,
}

impl RaceKey {
    pub fn new(year: i32, chamber: Chamber, state: &str, district: u16) -> Result<Self, IngestError> {
        if year % 2 != 0 {
            return Err(IngestError::OddYear(year));
        }
        let state = state.trim().to_ascii_uppercase();
        if state.len() != 2 || !state.chars().all(|c| c.is_ascii_alphabetic()) {
            return Err(IngestError::InvalidRace(format!("state {state:?} is not a postal code")));
        }
        if chamber == Chamber::Senate && district != 0 {
            return Err(IngestError::InvalidRace(format!(
                "Senate race {year} {state} has district {district}"
            )));
        }
        Ok(RaceKey { year, chamber, state, district })
    }
}

impl fmt::Display for RaceKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.chamber {
            Chamber::Senate => write!(f, "{} {} Senate", self.year, self.state),
            Chamber::House => write!(f, "{} {}-{:02}", self.year, self.state, self.district),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub candidate_id: String,
    pub full_name: String,
    pub party: String,
    pub race: RaceKey,
    pub incumbent: bool,
    pub incumbency_source: IncumbencySource,
    pub wikipedia_title: Option<String>,
    pub title_source: TitleSource,
    pub fec_id: Option<String>,
    pub stronghold: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    Pageviews,
    TvMentions,
}

/// Per-day counts for one candidate, starting at `start_date`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DailySeries {
    pub candidate_id: String,
    pub metric: Metric,
    pub start_date: NaiveDate,
    pub counts: Vec<u64>,
}

impl DailySeries {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn end_date(&self) -> NaiveDate {
        self.start_date + Duration::days(self.counts.len() as i64 - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsRow {
    pub candidate_id: String,
    pub race: RaceKey,
    pub votes: u64,
    pub vote_share: f64,
    pub win_lose: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiptsRow {
    pub candidate_id: String,
    pub receipts_usd: f64,
}

/// Inclusive calendar-date range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DateWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateWindow {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self, IngestError> {
        if end < start {
            return Err(IngestError::InvalidWindow(format!("{start} is after {end}")));
        }
        Ok(DateWindow { start, end })
    }

    /// The 52-week collection window whose last day is election day.
    pub fn election_year(eday: NaiveDate) -> Self {
        DateWindow { start: eday - Duration::days(WINDOW_DAYS - 1), end: eday }
    }

    pub fn len_days(&self) -> usize {
        ((self.end - self.start).num_days() + 1) as usize
    }

    pub fn days(&self) -> impl Iterator<Item = NaiveDate> {
        let start = self.start;
        (0..self.len_days() as i64).map(move |i| start + Duration::days(i))
    }

    /// Position of `date` inside the window.
    pub fn offset(&self, date: NaiveDate) -> Option<usize> {
        if date < self.start || date > self.end {
            return None;
        }
        Some((date - self.start).num_days() as usize)
    }
}

/// General election day: the first Tuesday after November 1.
pub fn election_day(year: i32) -> Result<NaiveDate, IngestError> {
    if year % 2 != 0 {
        return Err(IngestError::OddYear(year));
    }
    let nov1 = NaiveDate::from_ymd_opt(year, 11, 1)
        .ok_or_else(|| IngestError::InvalidWindow(format!("year {year} out of range")))?;
    let mut day = nov1 + Duration::days(1);
    while day.weekday() != Weekday::Tue {
        day += Duration::days(1);
    }
    Ok(day)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn election_days_for_recent_cycles() {
        assert_eq!(election_day(2016).unwrap(), NaiveDate::from_ymd_opt(2016, 11, 8).unwrap());
        assert_eq!(election_day(2018).unwrap(), NaiveDate::from_ymd_opt(2018, 11, 6).unwrap());
        assert!(matches!(election_day(2015), Err(IngestError::OddYear(2015))));
    }

    #[test]
    fn election_day_always_tuesday_between_nov_2_and_8() {
        for year in (1800..2400).step_by(2) {
            let d = election_day(year).unwrap();
            assert_eq!(d.weekday(), Weekday::Tue);
            assert_eq!(d.month(), 11);
            assert!((2..=8).contains(&d.day()), "{d}");
        }
    }

    #[test]
    fn election_year_window_is_52_weeks() {
        let eday = election_day(2018).unwrap();
        let w = DateWindow::election_year(eday);
        assert_eq!(w.len_days(), 364);
        assert_eq!(w.end, eday);
        assert_eq!(w.offset(eday), Some(363));
        assert_eq!(w.days().next(), Some(w.start));
    }

    #[test]
    fn race_key_invariants() {
        assert!(RaceKey::new(2016, Chamber::Senate, "ca", 0).is_ok());
        assert!(RaceKey::new(2016, Chamber::Senate, "CA", 3).is_err());
        assert!(RaceKey::new(2017, Chamber::House, "CA", 3).is_err());
        assert!(RaceKey::new(2016, Chamber::House, "Cal", 3).is_err());
        assert_eq!(RaceKey::new(2016, Chamber::House, "ny", 3).unwrap().state, "NY");
    }

    #[test]
    fn chamber_parses_office_labels() {
        assert_eq!("US SENATE".parse::<Chamber>().unwrap(), Chamber::Senate);
        assert_eq!("house".parse::<Chamber>().unwrap(), Chamber::House);
        assert!("governor".parse::<Chamber>().is_err());
    }
}
