use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::features::WEEKS;
use crate::ingest::{Chamber, DEFAULT_CHANNELS};

/// Everything a pipeline run needs. Loaded from TOML; relative paths resolve against the
/// directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub years: Vec<i32>,
    pub chambers: Vec<Chamber>,
    pub results: PathBuf,
    pub receipts: Option<PathBuf>,
    pub overrides: Option<PathBuf>,
    pub cache: PathBuf,
    pub out: PathBuf,
    pub channels: Vec<String>,
    pub fetch_tv: bool,
    pub offline: bool,
    /// Registry models to fit; empty means all.
    pub models: Vec<String>,
    /// Week selection such as `0-51` or `3,7,51`.
    pub weeks: String,
    pub cumulative: bool,
    /// Requests per second across all hosts.
    pub rate_limit: f64,
    pub user_agent: String,
    pub grid_stronghold: u8,
    pub histogram_bins: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            years: vec![2016, 2018],
            chambers: vec![Chamber::House, Chamber::Senate],
            results: PathBuf::from("results.csv"),
            receipts: None,
            overrides: None,
            cache: PathBuf::from("cache"),
            out: PathBuf::from("out"),
            channels: DEFAULT_CHANNELS.iter().map(|s| s.to_string()).collect(),
            fetch_tv: true,
            offline: false,
            models: Vec::new(),
            weeks: "0-51".into(),
            cumulative: true,
            rate_limit: 10.0,
            user_agent: concat!("ballotlens/", env!("CARGO_PKG_VERSION")).into(),
            grid_stronghold: 0,
            histogram_bins: 20,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct ConfigOverrides {
    pub offline: bool,
    pub out: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub models: Option<Vec<String>>,
    pub weeks: Option<String>,
    pub cumulative: Option<bool>,
}

impl PipelineConfig {
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, PipelineError> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        Self::from_toml(&text, base).map_err(|e| match e {
            PipelineError::Config(m) => PipelineError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    fn resolve_paths(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.results);
        join(&mut self.cache);
        join(&mut self.out);
        self.receipts.iter_mut().for_each(join);
        self.overrides.iter_mut().for_each(join);
    }

    pub fn apply(&mut self, o: &ConfigOverrides) {
        self.offline |= o.offline;
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(cache) = &o.cache {
            self.cache = cache.clone();
        }
        if let Some(models) = &o.models {
            self.models = models.clone();
        }
        if let Some(weeks) = &o.weeks {
            self.weeks = weeks.clone();
        }
        if let Some(c) = o.cumulative {
            self.cumulative = c;
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.years.is_empty() {
            return bad("years must not be empty".into());
        }
        if let Some(y) = self.years.iter().find(|y| *y % 2 != 0) {
            return bad(format!("year {y} is odd; general elections fall on even years"));
        }
        if self.chambers.is_empty() {
            return bad("chambers must not be empty".into());
        }
        if self.fetch_tv && (self.channels.is_empty() || self.channels.iter().any(|c| c.trim().is_empty())) {
            return bad("channels must be non-empty when fetch_tv is set".into());
        }
        if !(self.rate_limit.is_finite() && self.rate_limit > 0.0) {
            return bad(format!("rate_limit must be positive, got {}", self.rate_limit));
        }
        if self.grid_stronghold > 1 {
            return bad(format!("grid_stronghold must be 0 or 1, got {}", self.grid_stronghold));
        }
        if self.histogram_bins < 2 {
            return bad(format!("histogram_bins must be at least 2, got {}", self.histogram_bins));
        }
        self.week_list()?;
        Ok(())
    }

    /// Sorted, de-duplicated week indices named by `weeks`.
    pub fn week_list(&self) -> Result<Vec<u8>, PipelineError> {
        parse_weeks(&self.weeks)
    }
}

pub fn parse_weeks(spec: &str) -> Result<Vec<u8>, PipelineError> {
    let bad = || PipelineError::Config(format!("invalid week selection {spec:?}; use e.g. 0-51 or 3,7,51"));
    let parse = |s: &str| -> Result<u8, PipelineError> {
        let w: u8 = s.trim().parse().map_err(|_| bad())?;
        if usize::from(w) < WEEKS {
            Ok(w)
        } else {
            Err(bad())
        }
    };
    let mut out = Vec::new();
    for part in spec.split(',') {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (parse(a)?, parse(b)?);
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(parse(part)?),
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}
