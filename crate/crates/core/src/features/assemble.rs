use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{binary_outcome, race_ratios, FeatureError, FeatureRow, Week, WeeklySeries};
use crate::ingest::{CandidateRecord, IncumbencySource, RaceKey, ReceiptsRow, ResultsRow};

/// Everything the feature builder consumes. Weekly series are the non-cumulative
/// weekly means; a candidate without a pageview series has no article.
#[derive(Debug, Clone, Default)]
pub struct FeatureInputs {
    pub candidates: Vec<CandidateRecord>,
    pub results: Vec<ResultsRow>,
    pub receipts: Vec<ReceiptsRow>,
    pub pageviews: BTreeMap<String, WeeklySeries>,
    pub mentions: BTreeMap<String, WeeklySeries>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Use running totals through the week (true) or that week's mean alone.
    pub cumulative: bool,
    /// For the Final snapshot, whether news mentions use election-day running totals.
    pub final_news_cumulative: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig { cumulative: true, final_news_cumulative: true }
    }
}

/// A race whose total for some metric was zero, leaving that ratio absent.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RaceFlag {
    pub race: RaceKey,
    pub week: Week,
    pub metric: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub rows: Vec<FeatureRow>,
    pub flags: Vec<RaceFlag>,
}

fn point_value(series: Option<&WeeklySeries>, week: Week, cumulative: bool) -> f64 {
    let Some(s) = series else { return 0.0 };
    let w = match week {
        Week::Index(w) => w as usize,
        Week::Final => s.values.len().saturating_sub(1),
    };
    if s.cumulative || !cumulative {
        s.values.get(w).copied().unwrap_or(0.0)
    } else {
        s.values.iter().take(w + 1).sum()
    }
}

/// Builds one feature row per candidate for `week`.
pub fn assemble_features(
    inputs: &FeatureInputs,
    week: Week,
    config: &FeatureConfig,
) -> Result<FeatureTable, FeatureError> {
    let results: BTreeMap<&str, &ResultsRow> = inputs.results.iter().map(|r| (r.candidate_id.as_str(), r)).collect();
    let receipts: BTreeMap<&str, f64> =
        inputs.receipts.iter().map(|r| (r.candidate_id.as_str(), r.receipts_usd)).collect();

    let (view_cum, news_cum) = match week {
        Week::Final => (true, config.final_news_cumulative),
        Week::Index(_) => (config.cumulative, config.cumulative),
    };

    let mut races: BTreeMap<&RaceKey, Vec<&CandidateRecord>> = BTreeMap::new();
    for c in &inputs.candidates {
        if !results.contains_key(c.candidate_id.as_str()) {
            return Err(FeatureError::MissingResults(c.candidate_id.clone()));
        }
        if c.incumbency_source == IncumbencySource::Unresolved {
            return Err(FeatureError::MissingIncumbency(c.candidate_id.clone()));
        }
        races.entry(&c.race).or_default().push(c);
    }

    let mut rows = Vec::with_capacity(inputs.candidates.len());
    let mut flags = Vec::new();
    for (race, mut members) in races {
        members.sort_by(|a, b| a.candidate_id.cmp(&b.candidate_id));
        let raw = |f: &dyn Fn(&CandidateRecord) -> f64| -> BTreeMap<&str, f64> {
            members.iter().map(|c| (c.candidate_id.as_str(), f(c))).collect()
        };
        let views = raw(&|c| point_value(inputs.pageviews.get(&c.candidate_id), week, view_cum));
        let money = raw(&|c| receipts.get(c.candidate_id.as_str()).copied().unwrap_or(0.0));
        let news = raw(&|c| point_value(inputs.mentions.get(&c.candidate_id), week, news_cum));

        let view_ratios = race_ratios(&views);
        let receipt_ratios = race_ratios(&money);
        let news_ratios = race_ratios(&news);
        for (metric, r) in [("view_ratio", &view_ratios), ("receipt_ratio", &receipt_ratios), ("news_ratio", &news_ratios)] {
            if r.zero_total {
                flags.push(RaceFlag { race: race.clone(), week, metric: metric.to_string() });
            }
        }
        let view_win = binary_outcome(&views);
        let via_win = binary_outcome(&money);
        let news_win = binary_outcome(&news);
        let open_seat = u8::from(members.iter().all(|c| !c.incumbent));

        for c in &members {
            let id = c.candidate_id.as_str();
            let result = results[id];
            rows.push(FeatureRow {
                candidate_id: c.candidate_id.clone(),
                race: race.clone(),
                week,
                view_ratio: view_ratios.ratios[id],
                receipt_ratio: receipt_ratios.ratios[id],
                news_ratio: news_ratios.ratios[id],
                incumbent: u8::from(c.incumbent),
                challenger: u8::from(!c.incumbent),
                open_seat,
                has_page: u8::from(inputs.pageviews.contains_key(id)),
                view_win: view_win[id],
                via_win: via_win[id],
                news_win: news_win[id],
                stronghold: c.stronghold.map(u8::from),
                vote_share: result.vote_share,
                win_lose: u8::from(result.win_lose),
            });
        }
    }
    Ok(FeatureTable { rows, flags })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::validate_features;
    use crate::ingest::{Chamber, Metric, TitleSource};

    fn cand(id: &str, race: &RaceKey, incumbent: bool) -> CandidateRecord {
        CandidateRecord {
            candidate_id: id.into(),
            full_name: id.into(),
            party: String::new(),
            race: race.clone(),
            incumbent,
            incumbency_source: IncumbencySource::Override,
            wikipedia_title: None,
            title_source: TitleSource::Unlinked,
            fec_id: None,
            stronghold: None,
        }
    }

    fn result(id: &str, race: &RaceKey, share: f64, win: bool) -> ResultsRow {
        ResultsRow { candidate_id: id.into(), race: race.clone(), votes: 0, vote_share: share, win_lose: win }
    }

    fn weekly(id: &str, metric: Metric, values: Vec<f64>) -> WeeklySeries {
        WeeklySeries { candidate_id: id.into(), metric, values, cumulative: false }
    }

    fn race(d: u16) -> RaceKey {
        RaceKey::new(2018, Chamber::House, "WA", d).unwrap()
    }

    #[test]
    fn candidate_without_page_gets_zero_views() {
        let r = race(1);
        let mut inputs = FeatureInputs {
            candidates: vec![cand("A", &r, true), cand("B", &r, false)],
            results: vec![result("A", &r, 0.6, true), result("B", &r, 0.4, false)],
            ..Default::default()
        };
        let mut a_views = vec![0.0; 52];
        a_views[10] = 500.0;
        inputs.pageviews.insert("A".into(), weekly("A", Metric::Pageviews, a_views));
        let t = assemble_features(&inputs, Week::Final, &FeatureConfig::default()).unwrap();
        let a = &t.rows[0];
        let b = &t.rows[1];
        assert_eq!((a.view_ratio, b.view_ratio), (Some(1.0), Some(0.0)));
        assert_eq!((a.has_page, b.has_page), (1, 0));
        assert_eq!((a.view_win, b.view_win), (1, 0));
        // nobody has receipts or mentions
        assert_eq!(a.receipt_ratio, None);
        assert_eq!(t.flags.len(), 2);
        assert_eq!((a.challenger, b.challenger, a.open_seat), (0, 1, 0));

        // before week 10 nobody has views yet
        let early = assemble_features(&inputs, Week::Index(9), &FeatureConfig::default()).unwrap();
        assert_eq!(early.rows[0].view_ratio, None);
        let later = assemble_features(&inputs, Week::Index(20), &FeatureConfig::default()).unwrap();
        assert_eq!(later.rows[0].view_ratio, Some(1.0));
        let weekly_only = FeatureConfig { cumulative: false, ..Default::default() };
        assert_eq!(assemble_features(&inputs, Week::Index(20), &weekly_only).unwrap().rows[0].view_ratio, None);
    }

    #[test]
    fn open_seat_marks_everyone_challenger() {
        let r = race(2);
        let inputs = FeatureInputs {
            candidates: vec![cand("A", &r, false), cand("B", &r, false)],
            results: vec![result("A", &r, 0.55, true), result("B", &r, 0.45, false)],
            receipts: vec![ReceiptsRow { candidate_id: "A".into(), receipts_usd: 3.0 }],
            ..Default::default()
        };
        let t = assemble_features(&inputs, Week::Final, &FeatureConfig::default()).unwrap();
        assert!(t.rows.iter().all(|r| r.open_seat == 1 && r.challenger == 1));
        assert_eq!(t.rows[1].receipt_ratio, Some(0.0));
        assert_eq!(t.rows[0].via_win, 1);
    }

    #[test]
    fn three_race_fixture_ratios_sum_to_one() {
        let mut inputs = FeatureInputs::default();
        let values = [[3.0, 1.0, 0.0], [5.0, 5.0, 2.0], [0.5, 9.0, 7.0]];
        for (d, vals) in values.iter().enumerate() {
            let r = race(d as u16 + 1);
            for (i, v) in vals.iter().enumerate() {
                let id = format!("r{d}c{i}");
                inputs.candidates.push(cand(&id, &r, i == 0));
                inputs.results.push(result(&id, &r, 0.3, i == 0));
                inputs.receipts.push(ReceiptsRow { candidate_id: id.clone(), receipts_usd: v * 1000.0 + 1.0 });
                inputs.pageviews.insert(id.clone(), weekly(&id, Metric::Pageviews, vec![*v; 52]));
                inputs.mentions.insert(id.clone(), weekly(&id, Metric::TvMentions, vec![*v + 1.0; 52]));
            }
        }
        let t = assemble_features(&inputs, Week::Final, &FeatureConfig::default()).unwrap();
        assert!(validate_features(&t.rows).is_empty(), "{:?}", validate_features(&t.rows));
        // oracle: sum of ratios per race recomputed independently
        let mut sums: BTreeMap<u16, f64> = BTreeMap::new();
        for r in &t.rows {
            *sums.entry(r.race.district).or_default() += r.view_ratio.unwrap();
        }
        assert!(sums.values().all(|s| (s - 1.0).abs() < 1e-12));
        // race 2 has a tie for the view maximum
        assert!(t.rows.iter().filter(|r| r.race.district == 2).all(|r| r.view_win == 0));
    }

    #[test]
    fn missing_results_and_incumbency_are_errors() {
        let r = race(1);
        let inputs = FeatureInputs { candidates: vec![cand("A", &r, true)], ..Default::default() };
        assert!(matches!(
            assemble_features(&inputs, Week::Final, &FeatureConfig::default()),
            Err(FeatureError::MissingResults(_))
        ));
        let mut c = cand("A", &r, true);
        c.incumbency_source = IncumbencySource::Unresolved;
        let inputs = FeatureInputs { candidates: vec![c], results: vec![result("A", &r, 1.0, true)], ..Default::default() };
        assert!(matches!(
            assemble_features(&inputs, Week::Final, &FeatureConfig::default()),
            Err(FeatureError::MissingIncumbency(_))
        ));
    }
}
