use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::diagnostics::Diagnostics;
use super::{DesignSpec, RegressError};

/// Serde adapter writing non-finite floats as `null` and reading `null` back as NaN.
pub(crate) mod nullable {
    use serde::de::DeserializeOwned;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub trait Shape: Sized {
        type Repr: Serialize + DeserializeOwned;
        fn to_repr(&self) -> Self::Repr;
        fn from_repr(r: Self::Repr) -> Self;
    }

    impl Shape for f64 {
        type Repr = Option<f64>;
        fn to_repr(&self) -> Option<f64> {
            self.is_finite().then_some(*self)
        }
        fn from_repr(r: Option<f64>) -> f64 {
            r.unwrap_or(f64::NAN)
        }
    }

    impl<T: Shape> Shape for Vec<T> {
        type Repr = Vec<T::Repr>;
        fn to_repr(&self) -> Self::Repr {
            self.iter().map(Shape::to_repr).collect()
        }
        fn from_repr(r: Self::Repr) -> Self {
            r.into_iter().map(T::from_repr).collect()
        }
    }

    impl Shape for [f64; 2] {
        type Repr = [Option<f64>; 2];
        fn to_repr(&self) -> Self::Repr {
            [self[0].to_repr(), self[1].to_repr()]
        }
        fn from_repr(r: Self::Repr) -> Self {
            [f64::from_repr(r[0]), f64::from_repr(r[1])]
        }
    }

    pub fn serialize<T: Shape, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
        v.to_repr().serialize(s)
    }

    pub fn deserialize<'de, T: Shape, D: Deserializer<'de>>(d: D) -> Result<T, D::Error> {
        T::Repr::deserialize(d).map(T::from_repr)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "OLS")]
    Ols,
    Logit,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Ols => "OLS",
            Family::Logit => "Logit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsStats {
    #[serde(with = "nullable")]
    pub r2: f64,
    #[serde(with = "nullable")]
    pub adj_r2: f64,
    #[serde(with = "nullable")]
    pub f_stat: f64,
    #[serde(with = "nullable")]
    pub f_pvalue: f64,
    #[serde(with = "nullable")]
    pub log_likelihood: f64,
    #[serde(with = "nullable")]
    pub aic: f64,
    #[serde(with = "nullable")]
    pub bic: f64,
    #[serde(with = "nullable")]
    pub rss: f64,
    pub df_model: usize,
    pub df_resid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitStats {
    #[serde(with = "nullable")]
    pub log_likelihood: f64,
    #[serde(with = "nullable")]
    pub ll_null: f64,
    #[serde(with = "nullable")]
    pub pseudo_r2_mcfadden: f64,
    #[serde(with = "nullable")]
    pub llr: f64,
    #[serde(with = "nullable")]
    pub llr_pvalue: f64,
    #[serde(with = "nullable")]
    pub aic: f64,
    #[serde(with = "nullable")]
    pub bic: f64,
    pub df_model: usize,
    pub df_resid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FitStats {
    Ols(OlsStats),
    Logit(LogitStats),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub family: Family,
    pub response: String,
    pub labels: Vec<String>,
    pub coefficients: Vec<f64>,
    #[serde(with = "nullable")]
    pub covariance: Vec<Vec<f64>>,
    #[serde(rename = "se", with = "nullable")]
    pub std_errors: Vec<f64>,
    /// t for OLS, z for logit.
    #[serde(rename = "stat", with = "nullable")]
    pub test_stats: Vec<f64>,
    #[serde(rename = "p", with = "nullable")]
    pub p_values: Vec<f64>,
    #[serde(rename = "ci95", with = "nullable")]
    pub conf_intervals_95: Vec<[f64; 2]>,
    pub fit_stats: FitStats,
    pub diagnostics: Option<Diagnostics>,
    pub converged: bool,
    pub iterations: usize,
    pub n_obs: usize,
    /// Rows dropped while building the design because of absent values.
    pub excluded: usize,
}

/// `***` below 0.001, `**` below 0.01, `*` below 0.05.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

impl FitResult {
    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn coefficient(&self, label: &str) -> Option<f64> {
        self.index_of(label).map(|i| self.coefficients[i])
    }

    pub fn spec(&self) -> Result<DesignSpec, RegressError> {
        DesignSpec::from_labels(&self.labels)
    }

    pub fn ols_stats(&self) -> Option<&OlsStats> {
        match &self.fit_stats {
            FitStats::Ols(s) => Some(s),
            FitStats::Logit(_) => None,
        }
    }

    pub fn logit_stats(&self) -> Option<&LogitStats> {
        match &self.fit_stats {
            FitStats::Logit(s) => Some(s),
            FitStats::Ols(_) => None,
        }
    }

    /// Overall model test: the F-test for OLS, the likelihood-ratio test for logit.
    pub fn model_pvalue(&self) -> f64 {
        match &self.fit_stats {
            FitStats::Ols(s) => s.f_pvalue,
            FitStats::Logit(s) => s.llr_pvalue,
        }
    }

    pub fn log_likelihood(&self) -> f64 {
        match &self.fit_stats {
            FitStats::Ols(s) => s.log_likelihood,
            FitStats::Logit(s) => s.log_likelihood,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit results always serialize")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// Plain-text summary laid out like a statsmodels printout.
    pub fn render_text(&self) -> String {
        let rule = "=".repeat(78);
        let thin = "-".repeat(78);
        let mut out = String::new();
        let title = match self.family {
            Family::Ols => "OLS Regression Results",
            Family::Logit => "Logit Regression Results",
        };
        let _ = writeln!(out, "{title:^78}");
        let _ = writeln!(out, "{rule}");
        let mut left: Vec<(String, String)> = vec![
            ("Dep. Variable:".into(), self.response.clone()),
            ("Model:".into(), match self.family {
                Family::Ols => "OLS".into(),
                Family::Logit => "Logit".into(),
            }),
            ("Method:".into(), match self.family {
                Family::Ols => "Least Squares".into(),
                Family::Logit => "MLE".into(),
            }),
            ("No. Observations:".into(), self.n_obs.to_string()),
        ];
        let right: Vec<(String, String)> = match &self.fit_stats {
            FitStats::Ols(s) => {
                left.push(("Df Residuals:".into(), s.df_resid.to_string()));
                left.push(("Df Model:".into(), s.df_model.to_string()));
                vec![
                    ("R-squared:".into(), fmt_num(s.r2, 3)),
                    ("Adj. R-squared:".into(), fmt_num(s.adj_r2, 3)),
                    ("F-statistic:".into(), fmt_sig(s.f_stat, 4)),
                    ("Prob (F-statistic):".into(), fmt_p(s.f_pvalue)),
                    ("Log-Likelihood:".into(), fmt_sig(s.log_likelihood, 5)),
                    ("AIC:".into(), fmt_sig(s.aic, 4)),
                    ("BIC:".into(), fmt_sig(s.bic, 4)),
                ]
            }
            FitStats::Logit(s) => {
                left.push(("Df Residuals:".into(), s.df_resid.to_string()));
                left.push(("Df Model:".into(), s.df_model.to_string()));
                left.push(("converged:".into(), if self.converged { "True" } else { "False" }.into()));
                vec![
                    ("Pseudo R-squ.:".into(), fmt_num(s.pseudo_r2_mcfadden, 4)),
                    ("Log-Likelihood:".into(), fmt_sig(s.log_likelihood, 5)),
                    ("LL-Null:".into(), fmt_sig(s.ll_null, 5)),
                    ("LLR p-value:".into(), fmt_p(s.llr_pvalue)),
                    ("AIC:".into(), fmt_sig(s.aic, 4)),
                    ("BIC:".into(), fmt_sig(s.bic, 4)),
                ]
            }
        };
        for i in 0..left.len().max(right.len()) {
            let (lk, lv) = left.get(i).cloned().unwrap_or_default();
            let (rk, rv) = right.get(i).cloned().unwrap_or_default();
            let _ = writeln!(out, "{lk:<18}{lv:>20}   {rk:<22}{rv:>15}").map(|_| ());
        }
        let _ = writeln!(out, "{rule}");

        let width = self.labels.iter().map(String::len).max().unwrap_or(0).max(9);
        let stat_name = match self.family {
            Family::Ols => ("t", "P>|t|"),
            Family::Logit => ("z", "P>|z|"),
        };
        let _ = writeln!(
            out,
            "{:<width$} {:>10} {:>10} {:>9} {:>8} {:>9} {:>9}",
            "", "coef", "std err", stat_name.0, stat_name.1, "[0.025", "0.975]"
        );
        let _ = writeln!(out, "{thin}");
        for (i, label) in self.labels.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:<width$} {:>10.4} {:>10.3} {:>9.3} {:>8.3} {:>9.3} {:>9.3}",
                label,
                self.coefficients[i],
                self.std_errors[i],
                self.test_stats[i],
                self.p_values[i],
                self.conf_intervals_95[i][0],
                self.conf_intervals_95[i][1],
            );
        }
        let _ = writeln!(out, "{rule}");
        if let Some(d) = &self.diagnostics {
            let _ = writeln!(out, "{:<18}{:>20}   {:<22}{:>15}", "Durbin-Watson:", fmt_num(d.durbin_watson, 3), "Jarque-Bera (JB):", fmt_num(d.jarque_bera, 3));
            let _ = writeln!(out, "{:<18}{:>20}   {:<22}{:>15}", "Skew:", fmt_num(d.skew, 3), "Prob(JB):", fmt_p(d.jb_pvalue));
            let _ = writeln!(out, "{:<18}{:>20}   {:<22}{:>15}", "Kurtosis:", fmt_num(d.kurtosis, 3), "Cond. No.", fmt_sig(d.condition_number, 3));
            let _ = writeln!(out, "{rule}");
        }
        if self.excluded > 0 {
            let _ = writeln!(out, "{} rows excluded for absent values.", self.excluded);
        }
        out
    }
}

fn fmt_num(v: f64, digits: usize) -> String {
    if v.is_finite() {
        format!("{v:.digits$}")
    } else {
        "nan".into()
    }
}

/// `digits` significant figures with a trailing point kept, like C's `%#g`.
fn fmt_sig(v: f64, digits: i32) -> String {
    if !v.is_finite() {
        return "nan".into();
    }
    if v == 0.0 {
        return "0.000".into();
    }
    let mag = v.abs().log10().floor() as i32;
    if !(-4..digits).contains(&mag) {
        let prec = (digits - 1) as usize;
        return format!("{v:.prec$e}");
    }
    let decimals = (digits - 1 - mag).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if decimals == 0 {
        format!("{s}.")
    } else {
        s
    }
}

fn fmt_p(p: f64) -> String {
    if !p.is_finite() {
        "nan".into()
    } else if p < 1e-3 && p > 0.0 {
        format!("{p:.2e}")
    } else {
        format!("{p:.3}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stars() {
        assert_eq!(significance_stars(0.0005), "***");
        assert_eq!(significance_stars(0.005), "**");
        assert_eq!(significance_stars(0.03), "*");
        assert_eq!(significance_stars(0.2), "");
    }

    #[test]
    fn headline_formatting() {
        assert_eq!(fmt_sig(-2967.2, 4), "-2967.");
        assert_eq!(fmt_sig(1491.6, 5), "1491.6");
        assert_eq!(fmt_sig(550.47, 4), "550.5");
        assert_eq!(fmt_sig(49.12, 3), "49.1");
        assert_eq!(fmt_p(3.4065e-14), "3.41e-14");
    }

    #[test]
    fn non_finite_round_trip() {
        #[derive(Serialize, Deserialize)]
        struct W {
            #[serde(with = "nullable")]
            v: Vec<[f64; 2]>,
        }
        let json = serde_json::to_string(&W { v: vec![[1.0, f64::INFINITY]] }).unwrap();
        assert_eq!(json, r#"{"v":[[1.0,null]]}"#);
        let back: W = serde_json::from_str(&json).unwrap();
        assert!(back.v[0][1].is_nan());
    }
}
