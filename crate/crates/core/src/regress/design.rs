use std::collections::BTreeSet;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::RegressError;
use crate::features::{FeatureRow, FieldValue, FEATURE_FIELDS};

pub const INTERCEPT: &str = "Intercept";

/// A main effect (one field) or a k-way interaction (product of k fields).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Term(pub Vec<String>);

impl Term {
    pub fn label(&self) -> String {
        self.0.join(":")
    }

    fn key(&self) -> BTreeSet<&str> {
        self.0.iter().map(String::as_str).collect()
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub terms: Vec<Term>,
    pub intercept: bool,
}

impl DesignSpec {
    /// Parses `"a + b + a:b"`. Terms are separated by `+`, interaction members by `:`.
    pub fn parse(formula: &str) -> Result<Self, RegressError> {
        let mut terms = Vec::new();
        for raw in formula.split('+').map(str::trim).filter(|t| !t.is_empty()) {
            let fields: Vec<String> = raw.split(':').map(|f| f.trim().to_string()).collect();
            if fields.iter().any(String::is_empty) {
                return Err(RegressError::BadTerm(raw.to_string()));
            }
            terms.push(Term(fields));
        }
        let spec = DesignSpec { terms, intercept: true };
        spec.check_terms()?;
        Ok(spec)
    }

    pub fn without_intercept(mut self) -> Self {
        self.intercept = false;
        self
    }

    /// Rebuilds a spec from fitted column labels.
    pub fn from_labels(labels: &[String]) -> Result<Self, RegressError> {
        let intercept = labels.first().is_some_and(|l| l == INTERCEPT);
        let terms = labels
            .iter()
            .filter(|l| l.as_str() != INTERCEPT)
            .map(|l| Term(l.split(':').map(str::to_string).collect()))
            .collect();
        let spec = DesignSpec { terms, intercept };
        spec.check_terms()?;
        Ok(spec)
    }

    fn check_terms(&self) -> Result<(), RegressError> {
        let mut seen = BTreeSet::new();
        for t in &self.terms {
            let key = t.key();
            if key.len() != t.0.len() || !seen.insert(key) {
                return Err(RegressError::BadTerm(t.label()));
            }
        }
        Ok(())
    }

    pub fn column_labels(&self) -> Vec<String> {
        let mut labels = Vec::with_capacity(self.terms.len() + 1);
        if self.intercept {
            labels.push(INTERCEPT.to_string());
        }
        labels.extend(self.terms.iter().map(Term::label));
        labels
    }

    pub fn fields(&self) -> BTreeSet<&str> {
        self.terms.iter().flat_map(|t| t.0.iter().map(String::as_str)).collect()
    }

    /// Every referenced field must exist in the feature schema.
    pub fn validate(&self) -> Result<(), RegressError> {
        match self.fields().into_iter().find(|f| !FEATURE_FIELDS.contains(f)) {
            Some(f) => Err(RegressError::UnknownField(f.to_string())),
            None => Ok(()),
        }
    }
}

/// Anything exposing named numeric fields.
pub trait FieldSource {
    fn field_value(&self, name: &str) -> FieldValue;
}

impl<T: FieldSource + ?Sized> FieldSource for &T {
    fn field_value(&self, name: &str) -> FieldValue {
        (**self).field_value(name)
    }
}

impl FieldSource for FeatureRow {
    fn field_value(&self, name: &str) -> FieldValue {
        self.field(name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub column_labels: Vec<String>,
    pub response_label: String,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    /// Input rows dropped because a referenced value was absent.
    pub excluded: usize,
}

impl DesignMatrix {
    /// Wraps raw numbers; rows of `x` must all have `labels.len()` entries.
    pub fn from_rows(labels: &[&str], x: &[Vec<f64>], y: &[f64]) -> Result<Self, RegressError> {
        let p = labels.len();
        if x.len() != y.len() {
            return Err(RegressError::DimensionMismatch { expected: x.len(), got: y.len() });
        }
        if let Some(bad) = x.iter().find(|r| r.len() != p) {
            return Err(RegressError::DimensionMismatch { expected: p, got: bad.len() });
        }
        let matrix = DMatrix::from_fn(x.len(), p, |i, j| x[i][j]);
        let d = DesignMatrix {
            column_labels: labels.iter().map(|s| s.to_string()).collect(),
            response_label: "y".into(),
            x: matrix,
            y: DVector::from_column_slice(y),
            excluded: 0,
        };
        d.check_finite()?;
        Ok(d)
    }

    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }

    fn check_finite(&self) -> Result<(), RegressError> {
        for i in 0..self.nrows() {
            if !self.y[i].is_finite() {
                return Err(RegressError::NonFinite { row: i, column: self.response_label.clone() });
            }
            for j in 0..self.ncols() {
                if !self.x[(i, j)].is_finite() {
                    return Err(RegressError::NonFinite { row: i, column: self.column_labels[j].clone() });
                }
            }
        }
        Ok(())
    }
}

/// Realizes `spec` over `rows`: intercept column first, then one column per term, where an
/// interaction column is the elementwise product of its fields. Rows with any absent referenced
/// value are dropped and counted.
pub fn build_design<R: FieldSource>(rows: &[R], spec: &DesignSpec, response: &str) -> Result<DesignMatrix, RegressError> {
    let probe = |name: &str| -> Result<(), RegressError> {
        if rows.first().is_some_and(|r| r.field_value(name) == FieldValue::Unknown) || !FEATURE_FIELDS.contains(&name) && rows.is_empty() {
            return Err(RegressError::UnknownField(name.to_string()));
        }
        Ok(())
    };
    probe(response)?;
    for f in spec.fields() {
        probe(f)?;
    }

    let p = spec.terms.len() + usize::from(spec.intercept);
    let mut data: Vec<f64> = Vec::with_capacity(rows.len() * p);
    let mut y = Vec::with_capacity(rows.len());
    let mut excluded = 0;
    'rows: for row in rows {
        let get = |name: &str| match row.field_value(name) {
            FieldValue::Value(v) => Ok(Some(v)),
            FieldValue::Absent => Ok(None),
            FieldValue::Unknown => Err(RegressError::UnknownField(name.to_string())),
        };
        let Some(target) = get(response)? else {
            excluded += 1;
            continue;
        };
        let mut values = Vec::with_capacity(p);
        if spec.intercept {
            values.push(1.0);
        }
        for term in &spec.terms {
            let mut product = 1.0;
            for f in &term.0 {
                match get(f)? {
                    Some(v) => product *= v,
                    None => {
                        excluded += 1;
                        continue 'rows;
                    }
                }
            }
            values.push(product);
        }
        data.extend(values);
        y.push(target);
    }
    if y.is_empty() {
        return Err(RegressError::EmptyAfterFiltering { excluded });
    }
    let n = y.len();
    let d = DesignMatrix {
        column_labels: spec.column_labels(),
        response_label: response.to_string(),
        x: DMatrix::from_row_slice(n, p, &data),
        y: DVector::from_vec(y),
        excluded,
    };
    d.check_finite()?;
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Week;
    use crate::ingest::{Chamber, RaceKey};

    fn row(view: Option<f64>, challenger: u8) -> FeatureRow {
        FeatureRow {
            candidate_id: "c".into(),
            race: RaceKey::new(2016, Chamber::House, "CA", 1).unwrap(),
            week: Week::Final,
            view_ratio: view,
            receipt_ratio: Some(0.5),
            news_ratio: None,
            incumbent: 1 - challenger,
            challenger,
            open_seat: 0,
            has_page: 1,
            view_win: 0,
            via_win: 0,
            news_win: 0,
            stronghold: None,
            vote_share: 0.5,
            win_lose: 0,
        }
    }

    #[test]
    fn intercept_column_first() {
        let rows = vec![row(Some(0.1), 0), row(Some(0.2), 1), row(Some(0.3), 0)];
        let d = build_design(&rows, &DesignSpec::parse("view_ratio").unwrap(), "vote_share").unwrap();
        assert_eq!((d.nrows(), d.ncols()), (3, 2));
        assert!(d.x.column(0).iter().all(|&v| v == 1.0));
        assert_eq!(d.column_labels, vec!["Intercept", "view_ratio"]);
    }

    #[test]
    fn interaction_is_product() {
        let rows = vec![row(Some(0.2), 1)];
        let spec = DesignSpec::parse("view_ratio + challenger + view_ratio:challenger").unwrap();
        let d = build_design(&rows, &spec, "vote_share").unwrap();
        assert_eq!(d.x.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.2, 1.0, 0.2]);
        assert_eq!(d.column_labels[3], "view_ratio:challenger");

        let three = DesignSpec::parse("receipt_ratio:challenger:view_ratio").unwrap();
        let d = build_design(&rows, &three, "vote_share").unwrap();
        assert_eq!(d.x[(0, 1)], 0.5 * 1.0 * 0.2);
    }

    #[test]
    fn unknown_field_and_bad_terms() {
        let rows = vec![row(Some(0.2), 1)];
        let spec = DesignSpec::parse("foo").unwrap();
        assert_eq!(build_design(&rows, &spec, "vote_share"), Err(RegressError::UnknownField("foo".into())));
        assert_eq!(spec.validate(), Err(RegressError::UnknownField("foo".into())));
        assert!(matches!(DesignSpec::parse("a + a"), Err(RegressError::BadTerm(_))));
        assert!(matches!(DesignSpec::parse("a:b + b:a"), Err(RegressError::BadTerm(_))));
        assert!(matches!(DesignSpec::parse("a:a"), Err(RegressError::BadTerm(_))));
        assert!(matches!(DesignSpec::parse("a: + b"), Err(RegressError::BadTerm(_))));
    }

    #[test]
    fn absent_values_excluded_and_counted() {
        let rows = vec![row(Some(0.2), 1), row(None, 0), row(Some(0.4), 0)];
        let d = build_design(&rows, &DesignSpec::parse("view_ratio").unwrap(), "vote_share").unwrap();
        assert_eq!((d.nrows(), d.excluded), (2, 1));
        let none = vec![row(None, 0)];
        assert_eq!(
            build_design(&none, &DesignSpec::parse("view_ratio").unwrap(), "vote_share"),
            Err(RegressError::EmptyAfterFiltering { excluded: 1 })
        );
    }

    #[test]
    fn labels_round_trip() {
        let spec = DesignSpec::parse("view_ratio + receipt_ratio:challenger:view_ratio").unwrap();
        assert_eq!(DesignSpec::from_labels(&spec.column_labels()).unwrap(), spec);
        let bare = spec.clone().without_intercept();
        assert_eq!(DesignSpec::from_labels(&bare.column_labels()).unwrap(), bare);
    }
}
