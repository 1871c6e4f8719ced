//! Run configuration files. Every struct rejects unknown keys.

use relscm::counterfactual::Question;
use relscm::queries::{Intervention, ESTIMAND_GRID};
use relscm::{Cardinalities, Configuration, DeviceRecord, FixedConstants, Humidity, PriorConfig, Regime, SamplerConfig};
use serde::{Deserialize, Serialize};

fn default_level() -> f64 {
    0.95
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Must match the dataset when given.
    #[serde(default)]
    pub regime: Option<Regime>,
    #[serde(default)]
    pub cardinalities: Cardinalities,
    #[serde(default)]
    pub priors: PriorConfig,
    #[serde(default)]
    pub constants: FixedConstants,
    #[serde(default)]
    pub sampler: SamplerConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            regime: None,
            cardinalities: Cardinalities::default(),
            priors: PriorConfig::default(),
            constants: FixedConstants::default(),
            sampler: SamplerConfig::default(),
        }
    }
}

/// Assembly levels, without humidity.
#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Assembly {
    #[serde(rename = "x_S")]
    pub surface: usize,
    #[serde(rename = "x_T")]
    pub component: usize,
    #[serde(rename = "x_P")]
    pub pins: usize,
}

impl Assembly {
    pub fn at(self, humidity: Humidity) -> Configuration {
        Configuration::new(self.surface, self.component, self.pins, humidity)
    }
}

/// `delta1` of `to`, or the contrast `to - from` when `from` is given.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EstimandConfig {
    #[serde(default)]
    pub from: Option<Assembly>,
    pub to: Assembly,
    #[serde(rename = "x_H")]
    pub humidity: Humidity,
    #[serde(default = "default_grid")]
    pub w: Vec<f64>,
    #[serde(default = "default_level")]
    pub level: f64,
}

fn default_grid() -> Vec<f64> {
    ESTIMAND_GRID.to_vec()
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>, String> {
        if self.points < 2 || !(self.end > self.start) || self.start < 0.0 {
            return Err(format!(
                "grid needs 0 <= start < end and at least 2 points, got {self:?}"
            ));
        }
        let step = (self.end - self.start) / (self.points - 1) as f64;
        Ok((0..self.points).map(|i| self.start + step * i as f64).collect())
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ReliabilityConfig {
    #[serde(rename = "x_S")]
    pub surface: usize,
    #[serde(rename = "x_T")]
    pub component: usize,
    #[serde(rename = "x_P")]
    pub pins: usize,
    #[serde(rename = "x_H")]
    pub humidity: Humidity,
    /// Measured initial resistance; integrated out when absent.
    #[serde(default)]
    pub y0: Option<f64>,
    /// Defaults to the regime the draws were fitted to.
    #[serde(default)]
    pub regime: Option<Regime>,
    pub grid: Grid,
    #[serde(default = "default_level")]
    pub level: f64,
}

impl ReliabilityConfig {
    pub fn config(&self) -> Configuration {
        Configuration::new(self.surface, self.component, self.pins, self.humidity)
    }
}

fn default_replicates() -> usize {
    1
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FailureConfig {
    pub intervention: Intervention,
    /// Monte Carlo replicates per posterior draw.
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
}

/// A counterfactual query naming either an inline record or a device of `--data`.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CounterfactualConfig {
    #[serde(default)]
    pub device: Option<String>,
    #[serde(default)]
    pub record: Option<DeviceRecord>,
    #[serde(default)]
    pub target: usize,
    #[serde(default)]
    pub time: Option<f64>,
    #[serde(default, rename = "x_H")]
    pub humidity: Option<Humidity>,
    pub question: Question,
    #[serde(default = "default_level")]
    pub level: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PlotConfig {
    pub assemblies: Vec<Assembly>,
    #[serde(rename = "x_H")]
    pub humidity: Humidity,
    /// Times of the reliability curves.
    pub reliability_grid: Grid,
    /// Times of the expected-increase curves.
    pub increase_grid: Grid,
    #[serde(default)]
    pub y0: Option<f64>,
    #[serde(default = "default_level")]
    pub level: f64,
}
