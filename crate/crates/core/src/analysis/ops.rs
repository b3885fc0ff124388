use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::registry::run_model;
use super::{AnalysisError, ModelEntry, Stratum};
use crate::features::{FeatureRow, FieldValue, Week};
use crate::ingest::Chamber;
use crate::regress::{build_design, ols_fit, DesignSpec, FitResult, INTERCEPT};

/// Adjusted R² of `entry` fitted separately on each week's table.
pub fn rsq_timeseries<'a, I>(tables: I, entry: &ModelEntry) -> Result<BTreeMap<Week, f64>, AnalysisError>
where
    I: IntoIterator<Item = (Week, &'a [FeatureRow])>,
{
    let mut out = BTreeMap::new();
    for (week, rows) in tables {
        let fit = run_model(entry, rows).map_err(|e| AnalysisError::AtWeek { week, source: Box::new(e) })?;
        out.insert(week, fit.ols_stats().map_or(f64::NAN, |s| s.adj_r2));
    }
    Ok(out)
}

/// Unweighted mean of `field` over the stratum's rows, per week. Weeks where every value is
/// absent map to NaN.
pub fn group_average_timeseries<'a, I>(tables: I, group: &Stratum, field: &str) -> Result<BTreeMap<Week, f64>, AnalysisError>
where
    I: IntoIterator<Item = (Week, &'a [FeatureRow])>,
{
    let mut out = BTreeMap::new();
    let mut members = 0usize;
    for (week, rows) in tables {
        let (mut sum, mut n) = (0.0, 0usize);
        for r in group.filter(rows) {
            members += 1;
            if let FieldValue::Value(v) = r.field(field) {
                sum += v;
                n += 1;
            }
        }
        out.insert(week, if n == 0 { f64::NAN } else { sum / n as f64 });
    }
    if members == 0 {
        return Err(AnalysisError::EmptyGroup(group.describe()));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSlope {
    pub group: String,
    pub n: usize,
    pub intercept: f64,
    pub slope: f64,
    pub se: f64,
    pub p_value: f64,
}

/// Simple regression of vote share on pageview ratio within each value of `group_field`.
pub fn group_slopes(rows: &[&FeatureRow], group_field: &str) -> Result<Vec<GroupSlope>, AnalysisError> {
    let mut groups: BTreeMap<u64, Vec<&FeatureRow>> = BTreeMap::new();
    for r in rows {
        match r.field(group_field) {
            FieldValue::Value(v) => groups.entry(v.to_bits()).or_default().push(r),
            FieldValue::Absent => {}
            FieldValue::Unknown => {
                return Err(AnalysisError::Fit {
                    model: format!("slopes by {group_field}"),
                    source: crate::regress::RegressError::UnknownField(group_field.to_string()),
                })
            }
        }
    }
    let spec = DesignSpec::parse("view_ratio").expect("static formula");
    let mut out = Vec::new();
    for (bits, members) in groups {
        let label = format!("{group_field}={}", f64::from_bits(bits));
        let wrap = |source| AnalysisError::Fit { model: label.clone(), source };
        let d = build_design(&members, &spec, "vote_share").map_err(wrap)?;
        if d.nrows() <= 2 {
            return Err(AnalysisError::GroupTooSmall { group: label, n: d.nrows() });
        }
        let fit = ols_fit(&d).map_err(wrap)?;
        out.push(GroupSlope {
            group: label,
            n: d.nrows(),
            intercept: fit.coefficients[0],
            slope: fit.coefficients[1],
            se: fit.std_errors[1],
            p_value: fit.p_values[1],
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OpponentType {
    Incumbent,
    OpenSeat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Viability {
    LessViable,
    MoreViable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PageviewOutcome {
    Fewer,
    More,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityGridRow {
    pub opponent_type: OpponentType,
    pub viability: Viability,
    pub pageview_outcome: PageviewOutcome,
    pub probability: f64,
}

/// Win probability of a challenger under every combination of opponent type, fundraising
/// outcome and pageview outcome, holding `stronghold` fixed.
pub fn probability_grid(fit: &FitResult, stronghold: u8) -> Result<Vec<ProbabilityGridRow>, AnalysisError> {
    for required in ["challenger", "open_seat", "via_win", "view_win"] {
        if fit.index_of(required).is_none() {
            return Err(AnalysisError::MissingCovariate(required.to_string()));
        }
    }
    let wrap = |source| AnalysisError::Fit { model: "probability grid".into(), source };
    let mut rows = Vec::with_capacity(8);
    for opponent in [OpponentType::Incumbent, OpponentType::OpenSeat] {
        for viability in [Viability::LessViable, Viability::MoreViable] {
            for outcome in [PageviewOutcome::Fewer, PageviewOutcome::More] {
                let x = fit
                    .labels
                    .iter()
                    .map(|label| match label.as_str() {
                        INTERCEPT | "challenger" => Ok(1.0),
                        "open_seat" => Ok(f64::from(u8::from(opponent == OpponentType::OpenSeat))),
                        "via_win" => Ok(f64::from(u8::from(viability == Viability::MoreViable))),
                        "view_win" => Ok(f64::from(u8::from(outcome == PageviewOutcome::More))),
                        "stronghold" => Ok(f64::from(stronghold)),
                        other => Err(AnalysisError::UnexpectedCovariate(other.to_string())),
                    })
                    .collect::<Result<Vec<f64>, _>>()?;
                let probability = fit.predict_prob(&x).map_err(wrap)?;
                rows.push(ProbabilityGridRow { opponent_type: opponent, viability, pageview_outcome: outcome, probability });
            }
        }
    }
    Ok(rows)
}

/// Candidate outcome counts by incumbency, plus the number of open-seat races.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub total_candidates: usize,
    pub open_seat_races: usize,
    pub challenger_victory: usize,
    pub challenger_defeat: usize,
    pub incumbent_victory: usize,
    pub incumbent_defeat: usize,
}

/// Tallies per chamber; both chambers are always present.
pub fn outcome_tally(rows: &[FeatureRow]) -> BTreeMap<Chamber, Tally> {
    let mut out: BTreeMap<Chamber, Tally> = [(Chamber::Senate, Tally::default()), (Chamber::House, Tally::default())].into();
    let mut open_races = std::collections::BTreeSet::new();
    for r in rows {
        let t = out.get_mut(&r.race.chamber).expect("both chambers seeded");
        t.total_candidates += 1;
        match (r.incumbent == 1, r.win_lose == 1) {
            (true, true) => t.incumbent_victory += 1,
            (true, false) => t.incumbent_defeat += 1,
            (false, true) => t.challenger_victory += 1,
            (false, false) => t.challenger_defeat += 1,
        }
        if r.open_seat == 1 && open_races.insert(&r.race) {
            t.open_seat_races += 1;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Values outside [0, 1], not binned.
    pub out_of_range: u64,
}

/// Equal-width bins over [0, 1]; the last bin is closed on the right.
pub fn distribution_histogram<I: IntoIterator<Item = f64>>(values: I, bins: usize) -> Result<Histogram, AnalysisError> {
    if bins < 2 {
        return Err(AnalysisError::InvalidBins(bins));
    }
    let mut counts = vec![0u64; bins];
    let mut out_of_range = 0;
    for v in values {
        if !(0.0..=1.0).contains(&v) {
            out_of_range += 1;
            continue;
        }
        let i = ((v * bins as f64) as usize).min(bins - 1);
        counts[i] += 1;
    }
    let edges = (0..=bins).map(|i| i as f64 / bins as f64).collect();
    Ok(Histogram { edges, counts, out_of_range })
}
