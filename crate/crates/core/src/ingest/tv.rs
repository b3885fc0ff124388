//! GDELT TV API keyword timelines (Internet Archive Television News Archive).

use chrono::NaiveDate;
use percent_encoding::{utf8_percent_encode, NON_ALPHANUMERIC};
use serde::Deserialize;

use super::link::name_tokens;
use super::{DailySeries, DateWindow, Fetcher, IngestError, Metric};

pub const TV_ENDPOINT: &str = "gdelt-tv";

const API_BASE: &str = "https://api.gdeltproject.org/api/v2/tv/tv";

/// National cable networks plus CBS affiliates carried by the archive.
pub const DEFAULT_CHANNELS: &[&str] = &["CNN", "MSNBC", "FOXNEWS", "KPIX", "WUSA", "WBZ", "KYW", "WCBS"];

/// Quoted "First Last" phrase so the two names must appear consecutively.
pub fn tv_query(full_name: &str) -> Result<String, IngestError> {
    let tokens = name_tokens(full_name);
    match (tokens.first(), tokens.last()) {
        (Some(first), Some(last)) if tokens.len() >= 2 => Ok(format!("\"{first} {last}\"")),
        _ => Err(IngestError::EmptyName(full_name.to_string())),
    }
}

fn query_key(phrase: &str, channel: &str, window: &DateWindow) -> String {
    format!(
        "{} station:{}|{}|{}",
        phrase.to_lowercase(),
        channel.to_ascii_uppercase(),
        window.start.format("%Y%m%d"),
        window.end.format("%Y%m%d")
    )
}

pub fn tv_url(phrase: &str, channel: &str, window: &DateWindow) -> String {
    let query = format!("{phrase} station:{}", channel.to_ascii_uppercase());
    format!(
        "{API_BASE}?query={}&mode=timelinevol&datanorm=raw&timelinesmooth=0&datares=day&format=json&startdatetime={}000000&enddatetime={}235959",
        utf8_percent_encode(&query, NON_ALPHANUMERIC),
        window.start.format("%Y%m%d"),
        window.end.format("%Y%m%d"),
    )
}

#[derive(Debug, Deserialize)]
struct TimelineResponse {
    #[serde(default)]
    timeline: Vec<TimelineSeries>,
}

#[derive(Debug, Deserialize)]
struct TimelineSeries {
    #[serde(default)]
    data: Vec<TimelinePoint>,
}

#[derive(Debug, Deserialize)]
struct TimelinePoint {
    date: String,
    value: f64,
}

fn malformed(message: impl Into<String>) -> IngestError {
    IngestError::MalformedResponse { endpoint: TV_ENDPOINT.into(), message: message.into() }
}

/// Per-day raw clip counts, summed over every series in the response.
pub fn parse_tv_timeline(body: &[u8], window: &DateWindow) -> Result<Vec<u64>, IngestError> {
    let parsed: TimelineResponse = serde_json::from_slice(body).map_err(|e| malformed(e.to_string()))?;
    let mut counts = vec![0u64; window.len_days()];
    for series in parsed.timeline {
        for point in series.data {
            let day = point
                .date
                .get(..8)
                .and_then(|s| NaiveDate::parse_from_str(s, "%Y%m%d").ok())
                .ok_or_else(|| malformed(format!("bad date {:?}", point.date)))?;
            if !(point.value.is_finite() && point.value >= 0.0) {
                return Err(malformed(format!("bad count {} on {day}", point.value)));
            }
            if let Some(i) = window.offset(day) {
                counts[i] += point.value.round() as u64;
            }
        }
    }
    Ok(counts)
}

impl Fetcher {
    /// Daily mentions of the candidate's first and last name, summed across `channels`.
    pub fn fetch_tv_mentions(
        &self,
        candidate_id: &str,
        full_name: &str,
        channels: &[String],
        window: &DateWindow,
    ) -> Result<DailySeries, IngestError> {
        if channels.is_empty() || channels.iter().any(|c| c.trim().is_empty()) {
            return Err(IngestError::InvalidQuery("channel list must be non-empty".into()));
        }
        let phrase = tv_query(full_name)?;
        let mut counts = vec![0u64; window.len_days()];
        for channel in channels {
            let resp = self.request(
                TV_ENDPOINT,
                &query_key(&phrase, channel, window),
                &tv_url(&phrase, channel, window),
            )?;
            if resp.status != 200 {
                return Err(malformed(format!("HTTP {} for {phrase} on {channel}", resp.status)));
            }
            for (acc, c) in counts.iter_mut().zip(parse_tv_timeline(&resp.body, window)?) {
                *acc += c;
            }
        }
        Ok(DailySeries {
            candidate_id: candidate_id.to_string(),
            metric: Metric::TvMentions,
            start_date: window.start,
            counts,
        })
    }

    /// Stores a timeline response for one channel in the cache.
    pub fn seed_tv_mentions(
        &self,
        full_name: &str,
        channel: &str,
        window: &DateWindow,
        body: &[u8],
    ) -> Result<(), IngestError> {
        let phrase = tv_query(full_name)?;
        self.cache().put(
            TV_ENDPOINT,
            &query_key(&phrase, channel, window),
            &super::CachedResponse { status: 200, body: body.to_vec() },
        )
    }
}
