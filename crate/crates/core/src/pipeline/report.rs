use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::stages::{final_rows, fit_path, fits_dir, logit_accuracy, week_path};
use super::{io_err, require, write_json, write_text, PipelineConfig, PipelineError};
use crate::analysis::{
    distribution_histogram, group_average_timeseries, group_slopes, outcome_tally, probability_grid,
    published_targets, registry, rsq_timeseries, GroupSlope, ModelEntry, PageStratum, ProbabilityGridRow, Role,
    Stratum, Tally,
};
use crate::features::{read_features_csv, FeatureRow, FieldValue, Week};
use crate::ingest::Chamber;
use crate::regress::{significance_stars, Family, FitResult};

const HOUSE_VIEWS: &str = "appendixA.house";
const GRID_MODEL: &str = "appendixH";

fn news_entry(role: Role) -> ModelEntry {
    ModelEntry {
        name: match role {
            Role::Incumbent => "figure4.incumbent",
            Role::Challenger => "figure4.challenger",
        },
        title: "Pageview ratio on news ratio",
        family: Family::Ols,
        stratum: Stratum { chamber: None, pages: PageStratum::Any, role: Some(role) },
        formula: "news_ratio",
        response: "view_ratio",
    }
}

/// Shortest round-trip form; scientific notation for very small or large magnitudes.
fn num(v: f64) -> String {
    if !v.is_finite() {
        String::new()
    } else if v != 0.0 && !(1e-4..1e15).contains(&v.abs()) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), num)
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

/// Adjusted R² for one week, or None when that week's fit is not possible.
fn week_rsq(entry: &ModelEntry, week: u8, rows: &[FeatureRow], skipped: &mut Vec<String>) -> Option<f64> {
    match rsq_timeseries([(Week::Index(week), rows)], entry) {
        Ok(m) => m.values().next().copied(),
        Err(e) => {
            skipped.push(format!("{}: {e}", entry.name));
            None
        }
    }
}

fn group_mean(rows: &[FeatureRow], role: Role, field: &str, chamber: Option<Chamber>) -> Option<f64> {
    let stratum = Stratum { chamber, pages: PageStratum::Any, role: Some(role) };
    group_average_timeseries([(Week::Final, rows)], &stratum, field)
        .ok()
        .and_then(|m| m.values().next().copied())
        .filter(|v| v.is_finite())
}

#[derive(Debug, Clone, Serialize)]
struct WeekPoint {
    week: u8,
    values: BTreeMap<&'static str, Option<f64>>,
}

#[derive(Debug, Clone, Serialize)]
struct HistogramColumn {
    chamber: Chamber,
    field: &'static str,
    counts: Vec<u64>,
}

#[derive(Debug, Clone, Serialize)]
struct FitSummary {
    name: String,
    title: String,
    family: Family,
    n_obs: usize,
    converged: bool,
    /// Adjusted R² for OLS, McFadden pseudo-R² for logit.
    fit_measure: f64,
    model_pvalue: f64,
    accuracy: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct TargetComparison {
    model: String,
    quantity: String,
    published: f64,
    observed: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
struct Results {
    fits: Vec<FitSummary>,
    probability_grid: Vec<ProbabilityGridRow>,
    grid_stronghold: u8,
    tally: BTreeMap<Chamber, Tally>,
    group_slopes: Vec<GroupSlope>,
    histogram_edges: Vec<f64>,
    histograms: Vec<HistogramColumn>,
    figure2: Vec<WeekPoint>,
    figure3a: Vec<WeekPoint>,
    figure4: Vec<WeekPoint>,
    appendix_g: Vec<WeekPoint>,
    published_targets: Vec<TargetComparison>,
    skipped_weekly_fits: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportSummary {
    pub fits: usize,
    pub weeks: usize,
    pub files: Vec<String>,
}

fn load_fits(cfg: &PipelineConfig) -> Result<BTreeMap<&'static str, FitResult>, PipelineError> {
    let dir = fits_dir(cfg);
    let mut fits = BTreeMap::new();
    for entry in registry() {
        let path = fit_path(&dir, entry.name, "json");
        if !path.exists() {
            continue;
        }
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        let fit = FitResult::from_json(&text).map_err(|e| PipelineError::Io {
            path: path.clone(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
        })?;
        fits.insert(entry.name, fit);
    }
    Ok(fits)
}

/// Emits figure data, the probability grid, outcome tallies, `results.json` and a combined
/// markdown report from the feature tables and the stored fits.
pub fn cmd_report(cfg: &PipelineConfig) -> Result<ReportSummary, PipelineError> {
    cfg.validate()?;
    let weeks = cfg.week_list()?;
    let rows = final_rows(cfg)?;
    require(fits_dir(cfg).join("index.json"), "fit")?;
    let fits = load_fits(cfg)?;
    let grid_fit = fits.get(GRID_MODEL).ok_or_else(|| PipelineError::MissingFit(GRID_MODEL.into()))?;
    let grid = probability_grid(grid_fit, cfg.grid_stronghold)?;

    let read_week = |cumulative: bool, w: u8| -> Result<Vec<FeatureRow>, PipelineError> {
        Ok(read_features_csv(&require(week_path(cfg, cumulative, w), "features")?)?)
    };

    let house_views = registry().iter().find(|e| e.name == HOUSE_VIEWS).expect("registry entry");
    let (inc_news, chal_news) = (news_entry(Role::Incumbent), news_entry(Role::Challenger));
    let mut skipped = Vec::new();
    let (mut figure2, mut figure3a, mut figure4, mut appendix_g) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for &w in &weeks {
        let weekly = read_week(false, w)?;
        let cumulative = read_week(true, w)?;
        let monthly = (w % 4 == 3).then(|| week_rsq(house_views, w, &cumulative, &mut skipped)).flatten();
        figure2.push(WeekPoint {
            week: w,
            values: [("weekly_adj_r2", week_rsq(house_views, w, &weekly, &mut skipped)), ("cumulative_adj_r2", monthly)]
                .into(),
        });
        let traced = if cfg.cumulative { &cumulative } else { &weekly };
        figure3a.push(WeekPoint {
            week: w,
            values: [
                ("incumbent_view_ratio", group_mean(traced, Role::Incumbent, "view_ratio", Some(Chamber::House))),
                ("challenger_view_ratio", group_mean(traced, Role::Challenger, "view_ratio", Some(Chamber::House))),
            ]
            .into(),
        });
        figure4.push(WeekPoint {
            week: w,
            values: [
                ("incumbent_adj_r2", week_rsq(&inc_news, w, traced, &mut skipped)),
                ("challenger_adj_r2", week_rsq(&chal_news, w, traced, &mut skipped)),
            ]
            .into(),
        });
        appendix_g.push(WeekPoint {
            week: w,
            values: [
                ("incumbent_news_ratio", group_mean(traced, Role::Incumbent, "news_ratio", None)),
                ("challenger_news_ratio", group_mean(traced, Role::Challenger, "news_ratio", None)),
            ]
            .into(),
        });
    }

    let house: Vec<&FeatureRow> = Stratum::chamber(Chamber::House).filter(&rows);
    let slopes = group_slopes(&house, "challenger").unwrap_or_else(|e| {
        skipped.push(format!("group slopes: {e}"));
        Vec::new()
    });

    let mut histograms = Vec::new();
    let mut edges = Vec::new();
    for chamber in [Chamber::House, Chamber::Senate] {
        let members = Stratum::chamber(chamber).filter(&rows);
        for field in ["vote_share", "view_ratio"] {
            let values = members.iter().filter_map(|r| match r.field(field) {
                FieldValue::Value(v) => Some(v),
                _ => None,
            });
            let h = distribution_histogram(values, cfg.histogram_bins)?;
            edges = h.edges;
            histograms.push(HistogramColumn { chamber, field, counts: h.counts });
        }
    }

    let tally = outcome_tally(&rows);
    let entries: BTreeMap<&str, &ModelEntry> = registry().iter().map(|e| (e.name, e)).collect();
    let fit_summaries: Vec<FitSummary> = registry()
        .iter()
        .filter_map(|e| fits.get(e.name).map(|f| (e, f)))
        .map(|(e, f)| FitSummary {
            name: e.name.into(),
            title: e.title.into(),
            family: e.family,
            n_obs: f.n_obs,
            converged: f.converged,
            fit_measure: f
                .ols_stats()
                .map(|s| s.adj_r2)
                .or(f.logit_stats().map(|s| s.pseudo_r2_mcfadden))
                .unwrap_or(f64::NAN),
            model_pvalue: f.model_pvalue(),
            accuracy: logit_accuracy(e, f, &rows),
        })
        .collect();
    let accuracies: BTreeMap<&str, f64> =
        fit_summaries.iter().filter_map(|s| s.accuracy.map(|a| (entries[s.name.as_str()].name, a))).collect();

    let comparisons: Vec<TargetComparison> = published_targets()
        .iter()
        .map(|t| {
            let observed = if let Some(chamber) = t.model.strip_prefix("appendixE.") {
                let c = if chamber == "house" { Chamber::House } else { Chamber::Senate };
                serde_json::to_value(tally[&c]).ok().and_then(|v| v.get(&t.quantity).and_then(|x| x.as_f64()))
            } else if t.quantity == "accuracy" {
                accuracies.get(t.model.as_str()).copied()
            } else {
                fits.get(t.model.as_str()).and_then(|f| t.observed(f))
            };
            TargetComparison { model: t.model.clone(), quantity: t.quantity.clone(), published: t.value, observed }
        })
        .collect();

    let results = Results {
        fits: fit_summaries,
        probability_grid: grid,
        grid_stronghold: cfg.grid_stronghold,
        tally,
        group_slopes: slopes,
        histogram_edges: edges,
        histograms,
        figure2,
        figure3a,
        figure4,
        appendix_g,
        published_targets: comparisons,
        skipped_weekly_fits: skipped,
    };
    let files = write_outputs(cfg, &results, &fits)?;
    Ok(ReportSummary { fits: results.fits.len(), weeks: weeks.len(), files })
}

fn trace_csv(points: &[WeekPoint], columns: &[&'static str]) -> String {
    let mut header = vec!["week"];
    header.extend(columns);
    csv_text(
        &header,
        points.iter().map(|p| {
            let mut r = vec![p.week.to_string()];
            r.extend(columns.iter().map(|c| opt(p.values.get(c).copied().flatten())));
            r
        }),
    )
}

fn write_outputs(
    cfg: &PipelineConfig,
    res: &Results,
    fits: &BTreeMap<&'static str, FitResult>,
) -> Result<Vec<String>, PipelineError> {
    let out = &cfg.out;
    let mut files = Vec::new();
    let mut put = |name: &str, text: String| -> Result<(), PipelineError> {
        write_text(&out.join(name), &text)?;
        files.push(name.to_string());
        Ok(())
    };

    let mut header = vec!["bin_start".to_string(), "bin_end".to_string()];
    header.extend(res.histograms.iter().map(|h| format!("{}_{}", h.chamber.as_str().to_lowercase(), h.field)));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    put(
        "figure1_hist.csv",
        csv_text(
            &header,
            res.histogram_edges.windows(2).enumerate().map(|(i, e)| {
                let mut r = vec![num(e[0]), num(e[1])];
                r.extend(res.histograms.iter().map(|h| h.counts[i].to_string()));
                r
            }),
        ),
    )?;
    put("figure2.csv", trace_csv(&res.figure2, &["weekly_adj_r2", "cumulative_adj_r2"]))?;
    put("figure3a.csv", trace_csv(&res.figure3a, &["incumbent_view_ratio", "challenger_view_ratio"]))?;
    put(
        "figure3b.csv",
        csv_text(
            &["group", "n", "intercept", "slope", "se", "p_value"],
            res.group_slopes.iter().map(|s| {
                vec![s.group.clone(), s.n.to_string(), num(s.intercept), num(s.slope), num(s.se), num(s.p_value)]
            }),
        ),
    )?;
    put("figure4.csv", trace_csv(&res.figure4, &["incumbent_adj_r2", "challenger_adj_r2"]))?;
    put("appendixG.csv", trace_csv(&res.appendix_g, &["incumbent_news_ratio", "challenger_news_ratio"]))?;
    put(
        "grid.csv",
        csv_text(
            &["opponent_type", "viability", "pageview_outcome", "probability"],
            res.probability_grid.iter().map(|g| {
                vec![
                    format!("{:?}", g.opponent_type),
                    format!("{:?}", g.viability),
                    format!("{:?}", g.pageview_outcome),
                    num(g.probability),
                ]
            }),
        ),
    )?;
    put(
        "tally.csv",
        csv_text(
            &[
                "chamber",
                "total_candidates",
                "open_seat_races",
                "challenger_victory",
                "challenger_defeat",
                "incumbent_victory",
                "incumbent_defeat",
            ],
            res.tally.iter().map(|(c, t)| {
                [
                    c.as_str().to_string(),
                    t.total_candidates.to_string(),
                    t.open_seat_races.to_string(),
                    t.challenger_victory.to_string(),
                    t.challenger_defeat.to_string(),
                    t.incumbent_victory.to_string(),
                    t.incumbent_defeat.to_string(),
                ]
                .into()
            }),
        ),
    )?;
    put("report.md", markdown(res, fits))?;
    write_json(&out.join("results.json"), res)?;
    files.push("results.json".into());
    Ok(files)
}

fn markdown(res: &Results, fits: &BTreeMap<&'static str, FitResult>) -> String {
    let mut md = String::from("# ballotlens report\n\n");

    md.push_str("## Models\n\n| model | family | N | fit | p | accuracy |\n|---|---|---|---|---|---|\n");
    for f in &res.fits {
        let measure = if f.family == Family::Ols { "adj R²" } else { "pseudo R²" };
        let _ = writeln!(
            md,
            "| {} | {} | {} | {measure} {:.3}{} | {:.3e} | {} |",
            f.name,
            f.family.as_str(),
            f.n_obs,
            f.fit_measure,
            significance_stars(f.model_pvalue),
            f.model_pvalue,
            f.accuracy.map_or("".into(), |a| format!("{a:.3}")),
        );
    }

    let _ = write!(
        md,
        "\n## Probability of challenger victory\n\nFrom the appendixH coefficients with stronghold = {}. \
         Only the first cell corresponds to a published value; the others are computed, not matched.\n\n\
         | opponent | viability | pageviews | probability |\n|---|---|---|---|\n",
        res.grid_stronghold
    );
    for g in &res.probability_grid {
        let _ = writeln!(md, "| {:?} | {:?} | {:?} | {:.4} |", g.opponent_type, g.viability, g.pageview_outcome, g.probability);
    }

    md.push_str(
        "\n## Outcome tally\n\n| chamber | candidates | open-seat races | challenger wins | challenger losses | incumbent wins | incumbent losses |\n|---|---|---|---|---|---|---|\n",
    );
    for (c, t) in &res.tally {
        let _ = writeln!(
            md,
            "| {c} | {} | {} | {} | {} | {} | {} |",
            t.total_candidates, t.open_seat_races, t.challenger_victory, t.challenger_defeat, t.incumbent_victory, t.incumbent_defeat
        );
    }

    md.push_str("\n## Vote share on pageview ratio by group (House)\n\n| group | N | slope | SE |\n|---|---|---|---|\n");
    for s in &res.group_slopes {
        let _ = writeln!(md, "| {} | {} | {:.4} | {:.4} |", s.group, s.n, s.slope, s.se);
    }

    md.push_str(
        "\n## Published values\n\nValues printed in the original study, next to this run. They come from \
         live data collected in 2016 and 2018 and are not expected to match a replication.\n\n\
         | model | quantity | published | this run |\n|---|---|---|---|\n",
    );
    for t in &res.published_targets {
        let _ = writeln!(md, "| {} | {} | {} | {} |", t.model, t.quantity, t.published, t.observed.map_or("".into(), |v| format!("{v:.4}")));
    }

    if !res.skipped_weekly_fits.is_empty() {
        md.push_str("\n## Skipped fits\n\n");
        for s in &res.skipped_weekly_fits {
            let _ = writeln!(md, "- {s}");
        }
    }

    md.push_str("\n## Model output\n");
    for e in registry() {
        if let Some(f) = fits.get(e.name) {
            let _ = write!(md, "\n### {}\n\n{}\n\n```\n{}```\n", e.name, e.title, f.render_text());
        }
    }
    md
}
