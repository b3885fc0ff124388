use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::regress::FitResult;

/// A published value kept for side-by-side reporting. These are not checked against runs:
/// the original data are not redistributable, so a replication will differ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublishedTarget {
    pub model: String,
    /// A coefficient label or one of `adj_r2`, `f_stat`, `log_likelihood`, `pseudo_r2`,
    /// `n_obs`, `accuracy`, or a tally column.
    pub quantity: String,
    pub value: f64,
}

impl PublishedTarget {
    /// The matching value from a fit, when the fit exposes it.
    pub fn observed(&self, fit: &FitResult) -> Option<f64> {
        match self.quantity.as_str() {
            "adj_r2" => fit.ols_stats().map(|s| s.adj_r2),
            "f_stat" => fit.ols_stats().map(|s| s.f_stat),
            "log_likelihood" => Some(fit.log_likelihood()),
            "pseudo_r2" => fit.logit_stats().map(|s| s.pseudo_r2_mcfadden),
            "n_obs" => Some(fit.n_obs as f64),
            label => fit.coefficient(label),
        }
    }
}

pub fn published_targets() -> &'static [PublishedTarget] {
    static TARGETS: OnceLock<Vec<PublishedTarget>> = OnceLock::new();
    TARGETS.get_or_init(|| serde_json::from_str(include_str!("published_targets.json")).expect("embedded targets parse"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::registry;

    #[test]
    fn targets_name_real_models() {
        let t = published_targets();
        assert!(t.len() > 50);
        for target in t {
            let model = target.model.as_str();
            if model.starts_with("appendixE.") {
                continue;
            }
            let entry = registry().iter().find(|e| e.name == model).unwrap_or_else(|| panic!("{model}"));
            let labels = entry.spec().column_labels();
            let is_stat = ["adj_r2", "f_stat", "log_likelihood", "pseudo_r2", "n_obs", "accuracy"].contains(&target.quantity.as_str());
            assert!(is_stat || labels.contains(&target.quantity), "{model} {}", target.quantity);
        }
    }

    #[test]
    fn tally_targets_are_consistent() {
        let get = |m: &str, q: &str| published_targets().iter().find(|t| t.model == m && t.quantity == q).unwrap().value;
        for chamber in ["appendixE.house", "appendixE.senate"] {
            let sum: f64 = ["challenger_victory", "challenger_defeat", "incumbent_victory", "incumbent_defeat"]
                .iter()
                .map(|q| get(chamber, q))
                .sum();
            assert_eq!(sum, get(chamber, "total_candidates"));
        }
        assert_eq!(get("appendixE.house", "challenger_victory") - get("appendixE.house", "incumbent_defeat"), get("appendixE.house", "open_seat_races"));
    }
}
