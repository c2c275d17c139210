//! Run configuration and its flat `key = value` file format.
//!
//! ```text
//! # comments and blank lines are ignored
//! threshold_n = 5
//! staple_percent = 0.05
//! n_sweep = 1,5,10,20
//! ```
//!
//! Keys are the field names below (case-insensitive; `-` and `_` are
//! interchangeable, and `threshold` is accepted for `threshold_n`).

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BuildConfig {
    pub threshold_n: u32,
    pub window_days: u32,
    pub n_sweep: Vec<u32>,
    pub staple_percent: f64,
    pub min_component: usize,
    pub min_tile: usize,
    pub cpm_k: usize,
    pub min_gain: usize,
    pub dedup_per_customer: bool,
    pub seed: u64,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            threshold_n: 5,
            window_days: crate::cooccur::DEFAULT_WINDOW_DAYS,
            n_sweep: vec![1, 5, 10, 20],
            staple_percent: 0.05,
            min_component: 5,
            min_tile: crate::tiles::DEFAULT_MIN_TILE,
            cpm_k: crate::tiles::DEFAULT_CPM_K,
            min_gain: crate::coverage::DEFAULT_MIN_GAIN,
            dedup_per_customer: false,
            seed: 0,
        }
    }
}

pub const KEYS: [&str; 10] = [
    "threshold_n",
    "window_days",
    "n_sweep",
    "staple_percent",
    "min_component",
    "min_tile",
    "cpm_k",
    "min_gain",
    "dedup_per_customer",
    "seed",
];

fn canonical(key: &str) -> String {
    let k = key.trim().to_ascii_lowercase().replace('-', "_");
    if k == "threshold" {
        "threshold_n".into()
    } else {
        k
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .trim()
        .parse()
        .map_err(|_| format!("{key}: cannot parse {value:?}"))
}

pub fn parse_sweep(value: &str) -> std::result::Result<Vec<u32>, String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num("n_sweep", s))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> std::result::Result<bool, String> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        other => Err(format!("{key}: expected a boolean, got {other:?}")),
    }
}

impl BuildConfig {
    /// Sets one field from its textual form. Unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let key = canonical(key);
        match key.as_str() {
            "threshold_n" => self.threshold_n = num(&key, value)?,
            "window_days" => self.window_days = num(&key, value)?,
            "n_sweep" => self.n_sweep = parse_sweep(value)?,
            "staple_percent" => self.staple_percent = num(&key, value)?,
            "min_component" => self.min_component = num(&key, value)?,
            "min_tile" => self.min_tile = num(&key, value)?,
            "cpm_k" => self.cpm_k = num(&key, value)?,
            "min_gain" => self.min_gain = num(&key, value)?,
            "dedup_per_customer" => self.dedup_per_customer = parse_bool(&key, value)?,
            "seed" => self.seed = num(&key, value)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .or_else(|| line.split_once(':'))
                .ok_or_else(|| Error::Config {
                    line: i + 1,
                    reason: format!("expected key = value, got {line:?}"),
                })?;
            self.set(key, value).map_err(|reason| Error::Config {
                line: i + 1,
                reason,
            })?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = BuildConfig::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.threshold_n == 0 {
            return Err(Error::param("threshold_n", "must be at least 1"));
        }
        if self.window_days == 0 {
            return Err(Error::param("window_days", "must be at least 1"));
        }
        if self.n_sweep.contains(&0) {
            return Err(Error::param("n_sweep", "thresholds must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.staple_percent) {
            return Err(Error::param(
                "staple_percent",
                format!("{} is outside [0, 1]", self.staple_percent),
            ));
        }
        if self.min_component == 0 {
            return Err(Error::param("min_component", "must be at least 1"));
        }
        if self.min_tile == 0 {
            return Err(Error::param("min_tile", "must be at least 1"));
        }
        if self.cpm_k < 3 {
            return Err(Error::param("cpm_k", "must be at least 3"));
        }
        if self.min_gain == 0 {
            return Err(Error::param("min_gain", "must be at least 1"));
        }
        Ok(())
    }

    /// The configured threshold plus the sweep, sorted and deduplicated.
    pub fn thresholds(&self) -> Vec<u32> {
        let mut all = self.n_sweep.clone();
        all.push(self.threshold_n);
        all.sort_unstable();
        all.dedup();
        all
    }
}
