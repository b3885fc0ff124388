//! Named experiments: the registry of published model specifications, the strata they
//! run on, weekly R² traces, group summaries, the challenger probability grid and
//! outcome tallies.

mod ops;
mod registry;
mod targets;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::features::{FeatureRow, Week};
use crate::ingest::{Chamber, RaceKey};
use crate::regress::RegressError;

pub use ops::{
    distribution_histogram, group_average_timeseries, group_slopes, outcome_tally, probability_grid,
    rsq_timeseries, GroupSlope, Histogram, OpponentType, PageviewOutcome, ProbabilityGridRow, Tally, Viability,
};
pub use registry::{registry, run_model, run_registry, stratum_rows, ModelEntry};
pub use targets::{published_targets, PublishedTarget};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("unknown model {0:?}")]
    UnknownModel(String),

    #[error("stratum of {0} is empty")]
    EmptyStratum(String),

    #[error("{model}: {source}")]
    Fit { model: String, source: RegressError },

    #[error("week {week}: {source}")]
    AtWeek { week: Week, source: Box<AnalysisError> },

    #[error("group {0} has no members")]
    EmptyGroup(String),

    #[error("group {group} has {n} rows; need more than 2")]
    GroupTooSmall { group: String, n: usize },

    #[error("fit lacks covariate {0:?}")]
    MissingCovariate(String),

    #[error("fit has covariate {0:?}, which the grid cannot set")]
    UnexpectedCovariate(String),

    #[error("need at least 2 bins, got {0}")]
    InvalidBins(usize),
}

/// Incumbency filter for a stratum or summary group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Incumbent,
    Challenger,
}

impl Role {
    pub fn matches(self, row: &FeatureRow) -> bool {
        match self {
            Role::Incumbent => row.incumbent == 1,
            Role::Challenger => row.challenger == 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Incumbent => "incumbent",
            Role::Challenger => "challenger",
        }
    }
}

/// Page availability among a race's top two finishers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PageStratum {
    Any,
    /// Top two do not both have an article (includes races where neither does).
    Mixed,
    /// Top two both have an article.
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stratum {
    pub chamber: Option<Chamber>,
    pub pages: PageStratum,
    pub role: Option<Role>,
}

impl Stratum {
    pub const fn chamber(chamber: Chamber) -> Self {
        Stratum { chamber: Some(chamber), pages: PageStratum::Any, role: None }
    }

    pub const fn with_pages(mut self, pages: PageStratum) -> Self {
        self.pages = pages;
        self
    }

    pub const fn with_role(mut self, role: Role) -> Self {
        self.role = Some(role);
        self
    }

    pub fn describe(&self) -> String {
        let mut parts = vec![self.chamber.map_or("all chambers".to_string(), |c| c.as_str().to_string())];
        match self.pages {
            PageStratum::Any => {}
            PageStratum::Mixed => parts.push("top two not both with pages".into()),
            PageStratum::Both => parts.push("top two both with pages".into()),
        }
        if let Some(r) = self.role {
            parts.push(format!("{}s", r.as_str()));
        }
        parts.join(", ")
    }

    /// Rows belonging to the stratum, in input order.
    pub fn filter<'a>(&self, rows: &'a [FeatureRow]) -> Vec<&'a FeatureRow> {
        let both = if self.pages == PageStratum::Any { BTreeSet::new() } else { both_page_races(rows) };
        rows.iter()
            .filter(|r| self.chamber.is_none_or(|c| r.race.chamber == c))
            .filter(|r| match self.pages {
                PageStratum::Any => true,
                PageStratum::Both => both.contains(&r.race),
                PageStratum::Mixed => !both.contains(&r.race),
            })
            .filter(|r| self.role.is_none_or(|role| role.matches(r)))
            .collect()
    }
}

/// Races whose two highest vote-share candidates both have an article. Ties in vote share
/// are broken by candidate id so the assignment is deterministic.
fn both_page_races(rows: &[FeatureRow]) -> BTreeSet<RaceKey> {
    let mut by_race: BTreeMap<&RaceKey, Vec<&FeatureRow>> = BTreeMap::new();
    for r in rows {
        by_race.entry(&r.race).or_default().push(r);
    }
    by_race
        .into_iter()
        .filter_map(|(race, mut members)| {
            members.sort_by(|a, b| b.vote_share.total_cmp(&a.vote_share).then_with(|| a.candidate_id.cmp(&b.candidate_id)));
            (members.len() >= 2 && members[..2].iter().all(|m| m.has_page == 1)).then(|| race.clone())
        })
        .collect()
}


#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;

    #[test]
    fn page_strata_use_top_two() {
        let rows = vec![
            // both leaders have pages, third-place has none
            row("a1", &house(1), 0.5, true, true, true),
            row("a2", &house(1), 0.4, false, false, true),
            row("a3", &house(1), 0.1, false, false, false),
            // runner-up lacks a page
            row("b1", &house(2), 0.6, true, true, true),
            row("b2", &house(2), 0.4, false, false, false),
            // neither has a page
            row("c1", &house(3), 0.6, true, true, false),
            row("c2", &house(3), 0.4, false, false, false),
            // uncontested
            row("d1", &house(4), 1.0, true, true, true),
        ];
        let ids = |s: Stratum| s.filter(&rows).iter().map(|r| r.candidate_id.clone()).collect::<Vec<_>>();
        let h = Stratum::chamber(Chamber::House);
        assert_eq!(ids(h.with_pages(PageStratum::Both)), vec!["a1", "a2", "a3"]);
        assert_eq!(ids(h.with_pages(PageStratum::Mixed)), vec!["b1", "b2", "c1", "c2", "d1"]);
        assert_eq!(ids(h.with_role(Role::Challenger)), vec!["a2", "a3", "b2", "c2"]);
        assert!(Stratum::chamber(Chamber::Senate).filter(&rows).is_empty());
    }
}
