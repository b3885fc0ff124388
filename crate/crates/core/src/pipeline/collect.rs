use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::{create_dir, write_json, PipelineConfig, PipelineError};
use crate::ingest::{
    election_day, load_overrides, load_receipts, load_results, resolve_links, CandidateRecord, DailySeries,
    DateWindow, Fetcher, IngestError, LinkConflict, RateLimiter, ReceiptsLoad, ReqwestTransport, ResponseCache,
    ResultsRow, TitleSource,
};

/// Loaded, filtered and linked input files.
pub(crate) struct Inputs {
    pub candidates: Vec<CandidateRecord>,
    pub results: Vec<ResultsRow>,
    pub receipts: Option<ReceiptsLoad>,
    pub conflicts: Vec<LinkConflict>,
    pub unused_overrides: Vec<String>,
}

pub(crate) fn load_inputs(cfg: &PipelineConfig) -> Result<Inputs, PipelineError> {
    let mut loaded = load_results(&cfg.results)?;
    loaded.retain_years(&cfg.years);
    loaded.rows.retain(|r| cfg.chambers.contains(&r.race.chamber));
    loaded.candidates.retain(|c| cfg.chambers.contains(&c.race.chamber));
    let overrides = match &cfg.overrides {
        Some(p) => load_overrides(p)?,
        None => BTreeMap::new(),
    };
    let linkage = resolve_links(&loaded.candidates, &overrides);
    let receipts = cfg.receipts.as_deref().map(|p| load_receipts(p, &linkage.candidates)).transpose()?;
    Ok(Inputs {
        candidates: linkage.candidates,
        results: loaded.rows,
        receipts,
        conflicts: linkage.conflicts,
        unused_overrides: linkage.unused_overrides,
    })
}

pub(crate) fn build_fetcher(cfg: &PipelineConfig) -> Result<Fetcher, PipelineError> {
    let builder = Fetcher::builder(ResponseCache::new(&cfg.cache)).rate_limit(RateLimiter::per_second(cfg.rate_limit));
    Ok(if cfg.offline {
        builder.offline().build()
    } else {
        builder.transport(Arc::new(ReqwestTransport::new(&cfg.user_agent)?)).build()
    })
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct MissingPage {
    pub candidate_id: String,
    pub title: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct FetchFailure {
    pub candidate_id: String,
    pub source: &'static str,
    pub message: String,
    pub network: bool,
}

/// Daily series for every candidate that has them, plus what could not be had.
#[derive(Debug, Default)]
pub(crate) struct Collected {
    pub pageviews: BTreeMap<String, DailySeries>,
    pub mentions: BTreeMap<String, DailySeries>,
    pub missing_pages: Vec<MissingPage>,
    /// Candidates whose name yields no first and last name for the TV query.
    pub unnamed: Vec<String>,
    pub failures: Vec<FetchFailure>,
}

#[derive(Default)]
struct One {
    pageviews: Option<DailySeries>,
    mentions: Option<DailySeries>,
    missing_page: Option<MissingPage>,
    unnamed: bool,
    failures: Vec<FetchFailure>,
}

fn failure(c: &CandidateRecord, source: &'static str, e: &IngestError) -> FetchFailure {
    FetchFailure { candidate_id: c.candidate_id.clone(), source, message: e.to_string(), network: e.is_network() }
}

fn fetch_one(fetcher: &Fetcher, cfg: &PipelineConfig, c: &CandidateRecord) -> One {
    let mut one = One::default();
    let window = match election_day(c.race.year) {
        Ok(eday) => DateWindow::election_year(eday),
        Err(e) => {
            one.failures.push(failure(c, "results", &e));
            return one;
        }
    };
    if let Some(title) = &c.wikipedia_title {
        match fetcher.fetch_pageviews(&c.candidate_id, title, &window) {
            Ok(s) => one.pageviews = Some(s),
            // a guessed title that does not exist means the candidate has no article
            Err(IngestError::PageNotFound { title }) if c.title_source == TitleSource::Heuristic => {
                one.missing_page = Some(MissingPage { candidate_id: c.candidate_id.clone(), title });
            }
            Err(e) => one.failures.push(failure(c, "pageviews", &e)),
        }
    }
    if cfg.fetch_tv {
        match fetcher.fetch_tv_mentions(&c.candidate_id, &c.full_name, &cfg.channels, &window) {
            Ok(s) => one.mentions = Some(s),
            Err(IngestError::EmptyName(_)) => one.unnamed = true,
            Err(e) => one.failures.push(failure(c, "tv", &e)),
        }
    }
    one
}

pub(crate) fn collect(fetcher: &Fetcher, cfg: &PipelineConfig, candidates: &[CandidateRecord]) -> Collected {
    let per: Vec<One> = candidates.par_iter().map(|c| fetch_one(fetcher, cfg, c)).collect();
    let mut out = Collected::default();
    for (c, one) in candidates.iter().zip(per) {
        if let Some(s) = one.pageviews {
            out.pageviews.insert(c.candidate_id.clone(), s);
        }
        if let Some(s) = one.mentions {
            out.mentions.insert(c.candidate_id.clone(), s);
        }
        out.missing_pages.extend(one.missing_page);
        if one.unnamed {
            out.unnamed.push(c.candidate_id.clone());
        }
        out.failures.extend(one.failures);
    }
    out.missing_pages.sort();
    out.unnamed.sort();
    out.failures.sort();
    out
}

pub(crate) fn incomplete(failures: &[FetchFailure]) -> PipelineError {
    PipelineError::FetchIncomplete { failed: failures.len(), network: failures.iter().any(|f| f.network) }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FetchSummary {
    pub candidates: usize,
    pub linked_titles: usize,
    pub pageview_series: usize,
    pub tv_series: usize,
    /// Responses served from the cache.
    pub cached: usize,
    /// Responses fetched over the network.
    pub fetched: usize,
    pub missing_pages: Vec<MissingPage>,
    pub unnamed: Vec<String>,
    pub failed: Vec<FetchFailure>,
}

/// Populates the cache with every linked candidate's pageview and mention series and
/// writes `fetch_summary.json`. Partial progress stays in the cache on failure.
pub fn cmd_fetch(cfg: &PipelineConfig) -> Result<FetchSummary, PipelineError> {
    cfg.validate()?;
    let inputs = load_inputs(cfg)?;
    let fetcher = build_fetcher(cfg)?;
    let got = collect(&fetcher, cfg, &inputs.candidates);
    let summary = FetchSummary {
        candidates: inputs.candidates.len(),
        linked_titles: inputs.candidates.iter().filter(|c| c.wikipedia_title.is_some()).count(),
        pageview_series: got.pageviews.len(),
        tv_series: got.mentions.len(),
        cached: fetcher.cache_hits(),
        fetched: fetcher.network_fetches(),
        missing_pages: got.missing_pages,
        unnamed: got.unnamed,
        failed: got.failures,
    };
    create_dir(&cfg.out)?;
    write_json(&cfg.out.join("fetch_summary.json"), &summary)?;
    log::info!("fetch: cached {}, fetched {}, failed {}", summary.cached, summary.fetched, summary.failed.len());
    if summary.failed.is_empty() {
        Ok(summary)
    } else {
        Err(incomplete(&summary.failed))
    }
}
