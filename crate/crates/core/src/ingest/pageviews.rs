//! Wikimedia REST per-article daily pageviews.

use chrono::NaiveDate;
use percent_encoding::{utf8_percent_encode, AsciiSet, CONTROLS};
use serde::Deserialize;

use super::{DailySeries, DateWindow, Fetcher, IngestError, Metric};

pub const PAGEVIEWS_ENDPOINT: &str = "wikimedia-pageviews";

const API_BASE: &str = "https://wikimedia.org/api/rest_v1/metrics/pageviews/per-article";

const TITLE: &AsciiSet = &CONTROLS
    .add(b' ')
    .add(b'"')
    .add(b'#')
    .add(b'%')
    .add(b'&')
    .add(b'/')
    .add(b'?')
    .add(b'<')
    .add(b'>')
    .add(b'`')
    .add(b'{')
    .add(b'}');

/// MediaWiki canonical form: underscores for spaces, upper-case first letter.
fn canonical_title(title: &str) -> String {
    let joined = title.split_whitespace().collect::<Vec<_>>().join("_");
    let mut chars = joined.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn ymd(d: NaiveDate) -> String {
    d.format("%Y%m%d").to_string()
}

fn query_key(title: &str, window: &DateWindow) -> String {
    format!(
        "en.wikipedia/all-access/user/{}/daily/{}/{}",
        canonical_title(title),
        ymd(window.start),
        ymd(window.end)
    )
}

pub fn pageviews_url(title: &str, window: &DateWindow) -> String {
    format!(
        "{API_BASE}/en.wikipedia/all-access/user/{}/daily/{}/{}",
        utf8_percent_encode(&canonical_title(title), TITLE),
        ymd(window.start),
        ymd(window.end)
    )
}

#[derive(Debug, Deserialize)]
struct PageviewsResponse {
    #[serde(default)]
    items: Vec<PageviewItem>,
}

#[derive(Debug, Deserialize)]
struct PageviewItem {
    timestamp: String,
    views: u64,
}

fn malformed(message: impl Into<String>) -> IngestError {
    IngestError::MalformedResponse { endpoint: PAGEVIEWS_ENDPOINT.into(), message: message.into() }
}

/// Parses a per-article response body into one count per day of `window`.
/// Days the API omits (zero views) are zero-filled; items outside the window are ignored.
pub fn parse_pageviews(body: &[u8], window: &DateWindow) -> Result<Vec<u64>, IngestError> {
    let parsed: PageviewsResponse = serde_json::from_slice(body).map_err(|e| malformed(e.to_string()))?;
    let mut counts = vec![0u64; window.len_days()];
    for item in parsed.items {
        let day = item
            .timestamp
            .get(..8)
            .and_then(|s| NaiveDate::parse_from_str(s, "%Y%m%d").ok())
            .ok_or_else(|| malformed(format!("bad timestamp {:?}", item.timestamp)))?;
        if let Some(i) = window.offset(day) {
            counts[i] = item.views;
        }
    }
    Ok(counts)
}

impl Fetcher {
    /// Daily user pageviews of `title` on English Wikipedia over `window`.
    pub fn fetch_pageviews(
        &self,
        candidate_id: &str,
        title: &str,
        window: &DateWindow,
    ) -> Result<DailySeries, IngestError> {
        if title.trim().is_empty() {
            return Err(IngestError::InvalidQuery("empty Wikipedia title".into()));
        }
        let today = chrono::Utc::now().date_naive();
        if window.end > today {
            return Err(IngestError::InvalidWindow(format!("window ends in the future ({})", window.end)));
        }
        let resp = self.request(PAGEVIEWS_ENDPOINT, &query_key(title, window), &pageviews_url(title, window))?;
        if resp.status == 404 {
            return Err(IngestError::PageNotFound { title: canonical_title(title) });
        }
        Ok(DailySeries {
            candidate_id: candidate_id.to_string(),
            metric: Metric::Pageviews,
            start_date: window.start,
            counts: parse_pageviews(&resp.body, window)?,
        })
    }

    /// Stores a pageview response in the cache as if it had been fetched.
    /// Used to record fixtures and to build synthetic corpora.
    pub fn seed_pageviews(&self, title: &str, window: &DateWindow, status: u16, body: &[u8]) -> Result<(), IngestError> {
        self.cache().put(
            PAGEVIEWS_ENDPOINT,
            &query_key(title, window),
            &super::CachedResponse { status, body: body.to_vec() },
        )
    }
}
