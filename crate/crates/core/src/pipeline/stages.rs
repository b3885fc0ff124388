use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::collect::{build_fetcher, collect, incomplete, load_inputs, MissingPage};
use super::{create_dir, require, write_json, write_text, PipelineConfig, PipelineError};
use crate::analysis::{registry, run_registry, stratum_rows, ModelEntry};
use crate::features::{
    assemble_features, read_features_csv, validate_features, weekly_average, write_features_csv, write_features_json,
    FeatureConfig, FeatureInputs, FeatureRow, RaceFlag, Week, WeeklySeries,
};
use crate::ingest::{election_day, CandidateRecord, DailySeries, LinkConflict};
use crate::regress::{classify_accuracy, Family, FitResult};

pub(crate) fn features_dir(cfg: &PipelineConfig) -> PathBuf {
    cfg.out.join("features")
}

pub(crate) fn week_path(cfg: &PipelineConfig, cumulative: bool, week: u8) -> PathBuf {
    features_dir(cfg).join(if cumulative { "cumulative" } else { "weekly" }).join(format!("week_{week:02}.csv"))
}

pub(crate) fn final_rows(cfg: &PipelineConfig) -> Result<Vec<FeatureRow>, PipelineError> {
    let path = require(features_dir(cfg).join("final.csv"), "features")?;
    Ok(read_features_csv(&path)?)
}

fn to_weekly(
    series: &BTreeMap<String, DailySeries>,
    candidates: &BTreeMap<&str, &CandidateRecord>,
) -> Result<BTreeMap<String, WeeklySeries>, PipelineError> {
    series
        .iter()
        .map(|(id, daily)| {
            let eday = election_day(candidates[id.as_str()].race.year)?;
            Ok((id.clone(), weekly_average(daily, eday)?))
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
struct Validation<'a> {
    problems: &'a [String],
    zero_total_flags: &'a [RaceFlag],
    link_conflicts: &'a [LinkConflict],
    unused_overrides: &'a [String],
    unmatched_finance_ids: &'a [String],
    missing_receipts: &'a [(String, String)],
    missing_pages: &'a [MissingPage],
    unnamed_for_tv: &'a [String],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureSummary {
    pub candidates: usize,
    pub weeks: Vec<u8>,
    pub zero_total_flags: usize,
    pub link_conflicts: usize,
}

/// Builds per-week (cumulative and weekly) and election-day feature tables from the cached
/// series, writes them with a validation report, and fails on invariant violations.
pub fn cmd_features(cfg: &PipelineConfig) -> Result<FeatureSummary, PipelineError> {
    cfg.validate()?;
    let weeks = cfg.week_list()?;
    let inputs = load_inputs(cfg)?;
    let fetcher = build_fetcher(cfg)?;
    let got = collect(&fetcher, cfg, &inputs.candidates);
    if !got.failures.is_empty() {
        return Err(incomplete(&got.failures));
    }
    let by_id: BTreeMap<&str, &CandidateRecord> =
        inputs.candidates.iter().map(|c| (c.candidate_id.as_str(), c)).collect();
    let feature_inputs = FeatureInputs {
        candidates: inputs.candidates.clone(),
        results: inputs.results.clone(),
        receipts: inputs.receipts.as_ref().map(|r| r.rows.clone()).unwrap_or_default(),
        pageviews: to_weekly(&got.pageviews, &by_id)?,
        mentions: to_weekly(&got.mentions, &by_id)?,
    };

    let dir = features_dir(cfg);
    create_dir(&dir.join("cumulative"))?;
    create_dir(&dir.join("weekly"))?;
    let mut problems = Vec::new();
    let mut flags = Vec::new();
    for &w in &weeks {
        for cumulative in [true, false] {
            let fc = FeatureConfig { cumulative, ..FeatureConfig::default() };
            let table = assemble_features(&feature_inputs, Week::Index(w), &fc)?;
            problems.extend(validate_features(&table.rows));
            write_features_csv(&week_path(cfg, cumulative, w), &table.rows)?;
            if cumulative == cfg.cumulative {
                flags.extend(table.flags);
            }
        }
    }
    let fin = assemble_features(&feature_inputs, Week::Final, &FeatureConfig::default())?;
    problems.extend(validate_features(&fin.rows));
    flags.extend(fin.flags);
    write_features_csv(&dir.join("final.csv"), &fin.rows)?;
    write_features_json(&dir.join("final.json"), &fin.rows)?;

    let receipts = inputs.receipts.as_ref();
    write_json(
        &dir.join("validation.json"),
        &Validation {
            problems: &problems,
            zero_total_flags: &flags,
            link_conflicts: &inputs.conflicts,
            unused_overrides: &inputs.unused_overrides,
            unmatched_finance_ids: receipts.map_or(&[], |r| &r.unmatched_finance_ids),
            missing_receipts: receipts.map_or(&[], |r| &r.missing_candidates),
            missing_pages: &got.missing_pages,
            unnamed_for_tv: &got.unnamed,
        },
    )?;
    if !problems.is_empty() {
        return Err(PipelineError::Invariant(problems));
    }
    Ok(FeatureSummary {
        candidates: fin.rows.len(),
        weeks,
        zero_total_flags: flags.len(),
        link_conflicts: inputs.conflicts.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitIndexEntry {
    pub name: String,
    pub title: String,
    pub family: Family,
    pub ok: bool,
    pub n_obs: Option<usize>,
    pub converged: Option<bool>,
    pub accuracy: Option<f64>,
    pub error: Option<String>,
}

pub(crate) fn fits_dir(cfg: &PipelineConfig) -> PathBuf {
    cfg.out.join("fits")
}

pub(crate) fn logit_accuracy(entry: &ModelEntry, fit: &FitResult, rows: &[FeatureRow]) -> Option<f64> {
    if fit.family != Family::Logit {
        return None;
    }
    classify_accuracy(fit, &stratum_rows(entry, rows), 0.5).ok()
}

fn fit_text(entry: &ModelEntry, fit: &FitResult, accuracy: Option<f64>) -> String {
    let mut text = format!("{}: {}\n\n{}", entry.name, entry.title, fit.render_text());
    if let Some(a) = accuracy {
        text.push_str(&format!("Classification accuracy (threshold 0.5): {a:.4}\n"));
    }
    text
}

fn selected(cfg: &PipelineConfig) -> Vec<&'static ModelEntry> {
    registry().iter().filter(|e| cfg.models.is_empty() || cfg.models.iter().any(|m| m == e.name)).collect()
}

/// Fits the selected registry models on the election-day table. Every model is attempted;
/// the stage fails afterwards if any of them did.
pub fn cmd_fit(cfg: &PipelineConfig) -> Result<Vec<FitIndexEntry>, PipelineError> {
    cfg.validate()?;
    let rows = final_rows(cfg)?;
    let fits = run_registry(&rows, &cfg.models)?;
    let dir = fits_dir(cfg);
    create_dir(&dir)?;
    let mut index = Vec::new();
    let mut failed = Vec::new();
    for entry in selected(cfg) {
        let mut item = FitIndexEntry {
            name: entry.name.into(),
            title: entry.title.into(),
            family: entry.family,
            ok: false,
            n_obs: None,
            converged: None,
            accuracy: None,
            error: None,
        };
        match &fits[entry.name] {
            Ok(fit) => {
                let accuracy = logit_accuracy(entry, fit, &rows);
                write_text(&fit_path(&dir, entry.name, "json"), &fit.to_json())?;
                write_text(&fit_path(&dir, entry.name, "txt"), &fit_text(entry, fit, accuracy))?;
                item.ok = true;
                item.n_obs = Some(fit.n_obs);
                item.converged = Some(fit.converged);
                item.accuracy = accuracy;
            }
            Err(e) => {
                log::error!("{e}");
                item.error = Some(e.to_string());
                failed.push(entry.name.to_string());
            }
        }
        index.push(item);
    }
    write_json(&dir.join("index.json"), &index)?;
    if failed.is_empty() {
        Ok(index)
    } else {
        Err(PipelineError::ModelFailures(failed))
    }
}

pub(crate) fn fit_path(dir: &Path, name: &str, ext: &str) -> PathBuf {
    dir.join(format!("{name}.{ext}"))
}
