//! Cycle-total campaign receipts (FEC candidate summaries).

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CandidateRecord, IngestError, ReceiptsRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiptsLoad {
    /// One row per candidate present in both inputs, in candidate order.
    pub rows: Vec<ReceiptsRow>,
    /// Finance rows whose candidate_id matches no known candidate.
    pub unmatched_finance_ids: Vec<String>,
    /// `(candidate_id, full_name)` of candidates with no finance row.
    pub missing_candidates: Vec<(String, String)>,
}

/// Reads `candidate_id,receipts_usd` and matches it against `candidates`.
pub fn load_receipts(path: &Path, candidates: &[CandidateRecord]) -> Result<ReceiptsLoad, IngestError> {
    let file = std::fs::File::open(path).map_err(|e| IngestError::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let headers = reader.headers().map_err(|e| IngestError::schema(path, 1, e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| IngestError::schema(path, 1, format!("missing column {name}")))
    };
    let (id_col, usd_col) = (col("candidate_id")?, col("receipts_usd")?);

    let mut amounts: BTreeMap<String, f64> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            IngestError::schema(path, e.position().map_or(0, |p| p.line()), e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record.get(id_col).unwrap_or("").trim();
        let raw = record.get(usd_col).unwrap_or("").trim();
        if id.is_empty() {
            return Err(IngestError::schema(path, line, "empty candidate_id"));
        }
        let usd: f64 = raw
            .replace([',', '$'], "")
            .parse()
            .map_err(|_| IngestError::schema(path, line, format!("invalid receipts_usd {raw:?}")))?;
        if !usd.is_finite() || usd < 0.0 {
            return Err(IngestError::schema(path, line, format!("receipts_usd must be non-negative, got {raw}")));
        }
        if amounts.insert(id.to_string(), usd).is_some() {
            return Err(IngestError::schema(path, line, format!("duplicate receipts row for {id}")));
        }
    }

    let known: BTreeSet<&str> = candidates.iter().map(|c| c.candidate_id.as_str()).collect();
    let mut ordered: Vec<&CandidateRecord> = candidates.iter().collect();
    ordered.sort_by(|a, b| a.candidate_id.cmp(&b.candidate_id));

    let mut rows = Vec::new();
    let mut missing = Vec::new();
    for c in ordered {
        match amounts.get(&c.candidate_id) {
            Some(&usd) => rows.push(ReceiptsRow { candidate_id: c.candidate_id.clone(), receipts_usd: usd }),
            None => missing.push((c.candidate_id.clone(), c.full_name.clone())),
        }
    }
    let unmatched = amounts.keys().filter(|id| !known.contains(id.as_str())).cloned().collect();
    Ok(ReceiptsLoad { rows, unmatched_finance_ids: unmatched, missing_candidates: missing })
}
