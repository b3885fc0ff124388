//! Election-anchored weekly series, race-relative ratios and binary "winner of
//! the metric" encodings.

mod assemble;
mod table;

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::ingest::{DailySeries, Metric, WINDOW_DAYS};

pub use assemble::{assemble_features, FeatureConfig, FeatureInputs, FeatureTable, RaceFlag};
pub use table::{
    read_features_csv, validate_features, write_features_csv, write_features_json, FeatureRow,
    FieldValue, Week, FEATURE_FIELDS,
};

pub const WEEKS: usize = 52;

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("series for {candidate_id} covers {start}..{end}, expected the 364 days ending {eday}")]
    WindowMismatch { candidate_id: String, start: NaiveDate, end: NaiveDate, eday: NaiveDate },

    #[error("series for {0} is already cumulative")]
    AlreadyCumulative(String),

    #[error("candidate {0} has no results row")]
    MissingResults(String),

    #[error("candidate {0} has unresolved incumbency; supply it in the overrides file")]
    MissingIncumbency(String),

    #[error("feature table violates {0}")]
    Invariant(String),

    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: u64, message: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// 52 weekly values, week 51 being the seven days ending on election day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeeklySeries {
    pub candidate_id: String,
    pub metric: Metric,
    pub values: Vec<f64>,
    pub cumulative: bool,
}

/// Mean daily count for each of the 52 election-anchored weeks.
pub fn weekly_average(daily: &DailySeries, eday: NaiveDate) -> Result<WeeklySeries, FeatureError> {
    let expected_start = eday - Duration::days(WINDOW_DAYS - 1);
    if daily.start_date != expected_start || daily.counts.len() != WINDOW_DAYS as usize {
        return Err(FeatureError::WindowMismatch {
            candidate_id: daily.candidate_id.clone(),
            start: daily.start_date,
            end: daily.start_date + Duration::days(daily.counts.len() as i64 - 1),
            eday,
        });
    }
    let values = daily
        .counts
        .chunks_exact(7)
        .map(|week| week.iter().map(|&c| c as f64).sum::<f64>() / 7.0)
        .collect();
    Ok(WeeklySeries { candidate_id: daily.candidate_id.clone(), metric: daily.metric, values, cumulative: false })
}

/// Running sum from week 0 through each week.
pub fn to_cumulative(weekly: &WeeklySeries) -> Result<WeeklySeries, FeatureError> {
    if weekly.cumulative {
        return Err(FeatureError::AlreadyCumulative(weekly.candidate_id.clone()));
    }
    let values = weekly
        .values
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    Ok(WeeklySeries { values, cumulative: true, ..weekly.clone() })
}

/// Shares of the race total. `ratios` holds `None` for every candidate when the
/// total is zero, and `zero_total` flags the race.
#[derive(Debug, Clone, PartialEq)]
pub struct RaceRatios<K: Ord> {
    pub ratios: BTreeMap<K, Option<f64>>,
    pub zero_total: bool,
}

/// Each candidate's value divided by the race total. Values are expected to be non-negative.
pub fn race_ratios<K: Ord + Clone>(values: &BTreeMap<K, f64>) -> RaceRatios<K> {
    let total: f64 = values.values().sum();
    let zero_total = !(total > 0.0);
    let ratios = values
        .iter()
        .map(|(k, &v)| (k.clone(), if zero_total { None } else { Some(v / total) }))
        .collect();
    RaceRatios { ratios, zero_total }
}

/// 1 for the unique maximizer, 0 for everyone else; a tied maximum awards nobody.
pub fn binary_outcome<K: Ord + Clone>(values: &BTreeMap<K, f64>) -> BTreeMap<K, u8> {
    let max = values.values().copied().fold(f64::NEG_INFINITY, f64::max);
    let at_max = values.values().filter(|&&v| v == max).count();
    values.iter().map(|(k, &v)| (k.clone(), u8::from(at_max == 1 && v == max))).collect()
}
