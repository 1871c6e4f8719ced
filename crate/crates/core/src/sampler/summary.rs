//! Posterior summaries of scalar draws.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fewest draws a summary is reported for.
pub const MIN_SUMMARY_DRAWS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub hdi_level: f64,
    pub hdi_low: f64,
    pub hdi_high: f64,
}

impl Summary {
    pub fn new(values: &[f64], level: f64) -> Result<Self> {
        check_values(values)?;
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (hdi_low, hdi_high) = hdi_sorted(&sorted, level)?;
        Ok(Summary {
            mean: mean(values),
            sd: sd(values),
            hdi_level: level,
            hdi_low,
            hdi_high,
        })
    }
}

/// Order statistics in the layout of a failure-time table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileSummary {
    pub min: f64,
    pub q05: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q95: f64,
    pub max: f64,
    pub mean: f64,
    pub sd: f64,
}

impl QuantileSummary {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Domain("need at least two values to summarise".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("summary input".into()));
        }
        let mut s = values.to_vec();
        s.sort_by(f64::total_cmp);
        Ok(QuantileSummary {
            min: s[0],
            q05: quantile_sorted(&s, 0.05),
            q25: quantile_sorted(&s, 0.25),
            q50: quantile_sorted(&s, 0.50),
            q75: quantile_sorted(&s, 0.75),
            q95: quantile_sorted(&s, 0.95),
            max: s[s.len() - 1],
            mean: mean(values),
            sd: sd(values),
        })
    }
}

fn check_values(values: &[f64]) -> Result<()> {
    if values.len() < MIN_SUMMARY_DRAWS {
        return Err(Error::Domain(format!(
            "summaries need at least {MIN_SUMMARY_DRAWS} draws, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("summary input".into()));
    }
    Ok(())
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation.
pub fn sd(values: &[f64]) -> f64 {
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m).powi(2)).sum();
    (ss / (values.len() as f64 - 1.0)).sqrt()
}

/// Linear-interpolation quantile of already sorted values.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("quantile {p} of {} values", values.len())));
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&s, p))
}

fn hdi_sorted(sorted: &[f64], level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!("HDI level must lie in (0, 1), got {level}")));
    }
    let n = sorted.len();
    let k = ((level * n as f64).ceil() as usize).clamp(1, n);
    let (i, _) = (0..=n - k)
        .map(|i| (i, sorted[i + k - 1] - sorted[i]))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("at least one window");
    Ok((sorted[i], sorted[i + k - 1]))
}

/// Shortest interval holding `ceil(level * n)` of the values.
pub fn hdi(values: &[f64], level: f64) -> Result<(f64, f64)> {
    check_values(values)?;
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    hdi_sorted(&s, level)
}
