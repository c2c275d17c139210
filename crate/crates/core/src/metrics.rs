//! Size-distribution entropy, inter-purchase gaps, power-law slope and rank
//! correlation.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::SaleLog;
use crate::numfmt::sig6;

/// Observed entropy of a size distribution against the uniform entropy for
/// the same number of members, both in bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub members: usize,
    pub min_size: u64,
    pub max_size: u64,
    #[serde(rename = "h1", serialize_with = "sig6")]
    pub observed: f64,
    #[serde(rename = "h0", serialize_with = "sig6")]
    pub uniform: f64,
}

pub fn size_entropy(sizes: &[u64]) -> Result<EntropyReport> {
    if sizes.is_empty() {
        return Err(Error::Degenerate(
            "size_entropy needs at least one size".into(),
        ));
    }
    if sizes.contains(&0) {
        return Err(Error::Degenerate(
            "size_entropy sizes must be positive".into(),
        ));
    }
    let total: f64 = sizes.iter().map(|&s| s as f64).sum();
    let observed = -sizes
        .iter()
        .map(|&s| {
            let p = s as f64 / total;
            p * p.log2()
        })
        .sum::<f64>();
    let uniform = (sizes.len() as f64).log2();
    let observed = if sizes.iter().all(|&s| s == sizes[0]) {
        uniform
    } else {
        observed
    };
    Ok(EntropyReport {
        members: sizes.len(),
        min_size: *sizes.iter().min().unwrap(),
        max_size: *sizes.iter().max().unwrap(),
        // keep H1 <= H0 when rounding error would push a uniform list over
        observed: observed.clamp(0.0, uniform),
        uniform,
    })
}

/// Days between consecutive distinct purchase dates of each customer.
pub fn interpurchase_histogram(log: &SaleLog) -> Result<BTreeMap<i64, usize>> {
    if let Some(index) = log.first_unsorted() {
        return Err(Error::UnsortedLog { index });
    }
    let mut hist = BTreeMap::new();
    for events in log.by_customer() {
        let mut prev: Option<NaiveDate> = None;
        for e in events {
            let d = e.date();
            if let Some(p) = prev {
                if d != p {
                    *hist.entry((d - p).num_days()).or_default() += 1;
                }
            }
            prev = Some(d);
        }
    }
    Ok(hist)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    /// Slope of log2(count) against log2(value).
    #[serde(serialize_with = "sig6")]
    pub alpha: f64,
    #[serde(serialize_with = "sig6")]
    pub intercept: f64,
    #[serde(serialize_with = "sig6")]
    pub r_squared: f64,
    pub bins: usize,
}

/// Ordinary least squares on the log-log histogram, ignoring bins with a
/// zero value or count.
pub fn fit_power_law<V, C>(hist: impl IntoIterator<Item = (V, C)>) -> Result<PowerLawFit>
where
    V: Into<f64>,
    C: Into<f64>,
{
    let points: Vec<(f64, f64)> = hist
        .into_iter()
        .map(|(v, c)| (v.into(), c.into()))
        .filter(|&(v, c)| v > 0.0 && c > 0.0)
        .map(|(v, c)| (v.log2(), c.log2()))
        .collect();
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::Degenerate(
            "power-law fit needs at least two bins with positive value and count".into(),
        ));
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let alpha = sxy / sxx;
    let intercept = mean_y - alpha * mean_x;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    Ok(PowerLawFit {
        alpha,
        intercept,
        r_squared,
        bins: points.len(),
    })
}

/// Ranks starting at 1; tied values share their average rank.
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
pub fn rank_correlation(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Degenerate(format!(
            "rank correlation inputs differ in length ({} vs {})",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::Degenerate(
            "rank correlation needs at least two points".into(),
        ));
    }
    let (rx, ry) = (average_ranks(xs), average_ranks(ys));
    let mean = (xs.len() as f64 + 1.0) / 2.0;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mean) * (b - mean);
        sxx += (a - mean).powi(2);
        syy += (b - mean).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate(
            "rank correlation input is constant".into(),
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}
