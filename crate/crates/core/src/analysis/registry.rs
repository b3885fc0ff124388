use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::{AnalysisError, PageStratum, Stratum};
use crate::features::FeatureRow;
use crate::ingest::Chamber;
use crate::regress::{build_design, logit_fit, ols_fit, DesignSpec, Family, FitResult};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelEntry {
    pub name: &'static str,
    pub title: &'static str,
    pub family: Family,
    pub stratum: Stratum,
    /// Terms joined by `+`, interaction members by `:`.
    pub formula: &'static str,
    pub response: &'static str,
}

impl ModelEntry {
    pub fn spec(&self) -> DesignSpec {
        DesignSpec::parse(self.formula).expect("registry formulas are well formed")
    }
}

const HOUSE: Stratum = Stratum::chamber(Chamber::House);
const SENATE: Stratum = Stratum::chamber(Chamber::Senate);

const fn ols(name: &'static str, title: &'static str, stratum: Stratum, formula: &'static str) -> ModelEntry {
    ModelEntry { name, title, family: Family::Ols, stratum, formula, response: "vote_share" }
}

const fn logit(name: &'static str, title: &'static str, stratum: Stratum, formula: &'static str) -> ModelEntry {
    ModelEntry { name, title, family: Family::Logit, stratum, formula, response: "win_lose" }
}

static REGISTRY: &[ModelEntry] = &[
    ols("table3.model1", "House vote share on pageview ratio", HOUSE, "view_ratio"),
    ols("table3.model2", "House vote share on challenger status", HOUSE, "challenger"),
    ols("table3.model3", "House vote share on pageview ratio and challenger status", HOUSE, "view_ratio + challenger"),
    ols(
        "table3.model4",
        "House vote share with pageview by challenger interaction",
        HOUSE,
        "view_ratio + challenger + view_ratio:challenger",
    ),
    ols(
        "table3.model5",
        "House vote share with open-seat interaction",
        HOUSE,
        "view_ratio + challenger + open_seat + view_ratio:open_seat",
    ),
    ols("table4.model1", "House vote share on pageview ratio", HOUSE, "view_ratio"),
    ols("table4.model2", "House vote share on viability ratio", HOUSE, "receipt_ratio"),
    ols("table4.model3", "House vote share on pageview and viability ratios", HOUSE, "view_ratio + receipt_ratio"),
    ols(
        "table4.model4",
        "House vote share with pageview by viability interaction",
        HOUSE,
        "view_ratio + receipt_ratio + view_ratio:receipt_ratio",
    ),
    ols(
        "table4.model5",
        "House vote share with viability by challenger interaction",
        HOUSE,
        "receipt_ratio + challenger + receipt_ratio:challenger",
    ),
    ols(
        "table4.model6",
        "House vote share with viability by challenger by pageview interaction",
        HOUSE,
        "view_ratio + receipt_ratio + challenger + receipt_ratio:challenger:view_ratio",
    ),
    ols("table6.model1", "Senate vote share on pageview ratio", SENATE, "view_ratio"),
    ols("table6.model2", "Senate vote share on news ratio", SENATE, "news_ratio"),
    ols("table6.model3", "Senate vote share on pageview and news ratios", SENATE, "view_ratio + news_ratio"),
    ols(
        "table6.model4",
        "Senate vote share with pageview by news interaction",
        SENATE,
        "view_ratio + news_ratio + view_ratio:news_ratio",
    ),
    ols("appendixA.house", "House vote share on pageview ratio", HOUSE, "view_ratio"),
    ols("appendixA.senate", "Senate vote share on pageview ratio", SENATE, "view_ratio"),
    logit(
        "appendixC",
        "House wins on pageview outcome where the top two do not both have pages",
        HOUSE.with_pages(PageStratum::Mixed),
        "view_win",
    ),
    logit(
        "appendixD.binary",
        "House wins on pageview outcome where the top two both have pages",
        HOUSE.with_pages(PageStratum::Both),
        "view_win",
    ),
    logit(
        "appendixD.continuous",
        "House wins on pageview ratio where the top two both have pages",
        HOUSE.with_pages(PageStratum::Both),
        "view_ratio",
    ),
    ols(
        "appendixF.house",
        "House vote share on pageview, viability and incumbency",
        HOUSE,
        "view_ratio + receipt_ratio + view_ratio:receipt_ratio + incumbent + view_ratio:incumbent \
         + receipt_ratio:incumbent + view_ratio:receipt_ratio:incumbent",
    ),
    ols(
        "appendixF.senate",
        "Senate vote share on incumbency, pageview and viability",
        SENATE,
        "incumbent + view_ratio + receipt_ratio + incumbent:receipt_ratio",
    ),
    logit(
        "appendixH",
        "House wins on categorical race variables",
        HOUSE,
        "challenger + open_seat + stronghold + via_win + view_win",
    ),
];

/// Every shipped model, in presentation order.
pub fn registry() -> &'static [ModelEntry] {
    REGISTRY
}

pub fn lookup(name: &str) -> Result<&'static ModelEntry, AnalysisError> {
    REGISTRY.iter().find(|e| e.name == name).ok_or_else(|| AnalysisError::UnknownModel(name.to_string()))
}

pub fn stratum_rows<'a>(entry: &ModelEntry, rows: &'a [FeatureRow]) -> Vec<&'a FeatureRow> {
    entry.stratum.filter(rows)
}

pub fn run_model(entry: &ModelEntry, rows: &[FeatureRow]) -> Result<FitResult, AnalysisError> {
    let subset = stratum_rows(entry, rows);
    if subset.is_empty() {
        return Err(AnalysisError::EmptyStratum(entry.name.to_string()));
    }
    let wrap = |source| AnalysisError::Fit { model: entry.name.to_string(), source };
    let design = build_design(&subset, &entry.spec(), entry.response).map_err(wrap)?;
    match entry.family {
        Family::Ols => ols_fit(&design),
        Family::Logit => logit_fit(&design),
    }
    .map_err(wrap)
}

/// Fits the named models (all when `names` is empty). Unknown names fail up front; fit
/// failures are returned per model.
pub fn run_registry(
    rows: &[FeatureRow],
    names: &[String],
) -> Result<BTreeMap<String, Result<FitResult, AnalysisError>>, AnalysisError> {
    let entries: Vec<&ModelEntry> = if names.is_empty() {
        REGISTRY.iter().collect()
    } else {
        names.iter().map(|n| lookup(n)).collect::<Result<_, _>>()?
    };
    Ok(entries.par_iter().map(|e| (e.name.to_string(), run_model(e, rows))).collect::<Vec<_>>().into_iter().collect())
}
