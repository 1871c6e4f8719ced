//! Causal estimands, reliability functions and predictive failure times.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::density::normal_lpdf;
use crate::draws::PosteriorDraws;
use crate::error::{Error, Result};
use crate::sampler::summary::{QuantileSummary, Summary};
use crate::scm::{
    Configuration, DeviceRecord, FixedConstants, Humidity, ModelParams, Regime, HUMIDITY_LEVELS,
};

/// Operating times at which the accelerated estimands are tabulated.
pub const ESTIMAND_GRID: [f64; 7] = [0.72, 1.50, 2.00, 2.16, 2.50, 3.00, 3.60];

/// Largest share of posterior draws a query may drop before it fails.
pub const MAX_FAILED_SHARE: f64 = 0.01;

/// Factor values fixed by an intervention; `None` leaves a factor to follow
/// its pre-intervention distribution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Intervention {
    #[serde(default, rename = "x_S")]
    pub surface: Option<usize>,
    #[serde(default, rename = "x_T")]
    pub component: Option<usize>,
    #[serde(default, rename = "x_P")]
    pub pins: Option<usize>,
    #[serde(default, rename = "x_H")]
    pub humidity: Option<Humidity>,
}

impl Intervention {
    pub fn assembly(surface: usize, component: usize, pins: usize) -> Self {
        Intervention {
            surface: Some(surface),
            component: Some(component),
            pins: Some(pins),
            humidity: None,
        }
    }

    pub fn is_full_assembly(&self) -> bool {
        self.surface.is_some() && self.component.is_some() && self.pins.is_some()
    }

    /// Every configuration compatible with the intervention, weighted by the
    /// truncated factorisation: `P(x_H) P(x_S | x_H) P(x_T | x_H) P(x_P)` with
    /// the factors of intervened variables removed.
    pub fn mixture(&self, theta: &ModelParams) -> Result<Vec<(Configuration, f64)>> {
        let card = theta.cardinalities();
        let probe = Configuration::new(
            self.surface.unwrap_or(1),
            self.component.unwrap_or(1),
            self.pins.unwrap_or(1),
            Humidity::Normal,
        );
        probe.check(&card)?;
        let needs_tables = !(self.is_full_assembly() && self.humidity.is_some());
        let tables = if needs_tables { Some(theta.tables()?) } else { None };
        let levels = |fixed: Option<usize>, n: usize| match fixed {
            Some(v) => vec![v],
            None => (1..=n).collect(),
        };
        let humidities: Vec<Humidity> = match self.humidity {
            Some(h) => vec![h],
            None => Humidity::ALL.to_vec(),
        };
        let mut out = Vec::new();
        for h in humidities {
            let hi = h.index();
            for s in levels(self.surface, card.surface) {
                for t in levels(self.component, card.component) {
                    for p in levels(self.pins, card.pins) {
                        let mut w = 1.0;
                        if let Some(tb) = tables {
                            if self.humidity.is_none() {
                                w *= tb.humidity[hi];
                            }
                            if self.surface.is_none() {
                                w *= tb.surface[hi][s - 1];
                            }
                            if self.component.is_none() {
                                w *= tb.component[hi][t - 1];
                            }
                            if self.pins.is_none() {
                                w *= tb.pins[p - 1];
                            }
                        }
                        if w > 0.0 {
                            out.push((Configuration::new(s, t, p, h), w));
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Per-draw values of a scalar estimand with their summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimandResult {
    pub values: Vec<f64>,
    pub summary: Summary,
}

impl EstimandResult {
    pub fn new(values: Vec<f64>, level: f64) -> Result<Self> {
        let summary = Summary::new(&values, level)?;
        Ok(EstimandResult { values, summary })
    }
}

/// Expected increase of resistance after `w` kilohours of accelerated stress.
pub fn delta1(cfg: &Configuration, w: f64, theta: &ModelParams, c: &FixedConstants) -> Result<f64> {
    theta.increase(cfg, w, Regime::AcceleratedStress, c)
}

/// Difference of expected increases between two assemblies at a common humidity.
pub fn delta_contrast(
    from: &Configuration,
    to: &Configuration,
    humidity: Humidity,
    w: f64,
    theta: &ModelParams,
    c: &FixedConstants,
) -> Result<f64> {
    Ok(delta1(&to.with_humidity(humidity), w, theta, c)?
        - delta1(&from.with_humidity(humidity), w, theta, c)?)
}

fn per_draw(
    draws: &PosteriorDraws,
    f: impl Fn(&ModelParams) -> Result<f64>,
) -> Result<Vec<f64>> {
    draws.thetas().map(|theta| f(&theta)).collect()
}

pub fn delta1_posterior(
    cfg: &Configuration,
    w: f64,
    draws: &PosteriorDraws,
    level: f64,
) -> Result<EstimandResult> {
    let c = draws.constants();
    EstimandResult::new(per_draw(draws, |t| delta1(cfg, w, t, c))?, level)
}

pub fn delta_contrast_posterior(
    from: &Configuration,
    to: &Configuration,
    humidity: Humidity,
    w: f64,
    draws: &PosteriorDraws,
    level: f64,
) -> Result<EstimandResult> {
    let c = draws.constants();
    EstimandResult::new(
        per_draw(draws, |t| delta_contrast(from, to, humidity, w, t, c))?,
        level,
    )
}

fn standard_normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

fn check_sigma_y(theta: &ModelParams) -> Result<()> {
    if !(theta.sigma_y > 0.0) {
        return Err(Error::Domain(format!("sigmaY must be positive, got {}", theta.sigma_y)));
    }
    Ok(())
}

/// Probability that a device with initial resistance `y0` is still below the
/// failure threshold after `t` kilohours.
pub fn reliability_known_y0(
    t: f64,
    y0: f64,
    cfg: &Configuration,
    regime: Regime,
    theta: &ModelParams,
    c: &FixedConstants,
) -> Result<f64> {
    check_sigma_y(theta)?;
    let mean = theta.diff_mean(y0, cfg, t, regime, c)?;
    Ok(standard_normal_cdf(-mean / theta.sigma_y))
}

/// Mean and standard deviation of `Y_t - threshold * Y_0` for a future device
/// whose initial resistance is not yet known.
pub fn unknown_y0_difference(
    t: f64,
    cfg: &Configuration,
    regime: Regime,
    theta: &ModelParams,
    c: &FixedConstants,
) -> Result<(f64, f64)> {
    check_sigma_y(theta)?;
    let excess = c.threshold_excess();
    let mean = theta.increase(cfg, t, regime, c)? - excess * theta.mean_y0(cfg)?;
    let var = theta.sigma_y.powi(2) + excess.powi(2) * theta.sigma0.powi(2);
    Ok((mean, var.sqrt()))
}

/// Reliability at `t` before the device's initial resistance is measured.
pub fn reliability_unknown_y0(
    t: f64,
    cfg: &Configuration,
    regime: Regime,
    theta: &ModelParams,
    c: &FixedConstants,
) -> Result<f64> {
    let (mean, sd) = unknown_y0_difference(t, cfg, regime, theta, c)?;
    Ok(standard_normal_cdf(-mean / sd))
}

/// Posterior of a reliability curve at each time of `grid`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityPoint {
    pub t: f64,
    pub mean: f64,
    pub sd: f64,
    pub hdi_low: f64,
    pub hdi_high: f64,
}

/// Reliability curve over `grid`, with `y0` known (`Some`) or not (`None`).
pub fn reliability_curve(
    grid: &[f64],
    y0: Option<f64>,
    cfg: &Configuration,
    regime: Regime,
    draws: &PosteriorDraws,
    level: f64,
) -> Result<Vec<ReliabilityPoint>> {
    let c = draws.constants();
    grid.iter()
        .map(|&t| {
            let values = per_draw(draws, |theta| match y0 {
                Some(y0) => reliability_known_y0(t, y0, cfg, regime, theta, c),
                None => reliability_unknown_y0(t, cfg, regime, theta, c),
            })?;
            let s = Summary::new(&values, level)?;
            Ok(ReliabilityPoint {
                t,
                mean: s.mean,
                sd: s.sd,
                hdi_low: s.hdi_low,
                hdi_high: s.hdi_high,
            })
        })
        .collect()
}

/// What is known about the initial resistance when evaluating an outcome density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    /// `y0` was measured; requires the whole assembly to be intervened on.
    Observed(f64),
    /// `y0` is integrated out.
    Marginal,
}

/// Density of `Y_t` at `y` under an intervention on field (NS) devices,
/// mixing over the factors the intervention leaves free.
pub fn adjusted_outcome_density(
    y: f64,
    intervention: &Intervention,
    w: f64,
    baseline: Baseline,
    theta: &ModelParams,
    c: &FixedConstants,
) -> Result<f64> {
    check_sigma_y(theta)?;
    let mixture = intervention.mixture(theta)?;
    let mut density = 0.0;
    for (cfg, weight) in mixture {
        let inc = theta.increase(&cfg, w, Regime::NoStress, c)?;
        let (mean, sd) = match baseline {
            Baseline::Observed(y0) => {
                if !intervention.is_full_assembly() {
                    return Err(Error::Config(
                        "an observed y0 needs x_S, x_T and x_P all intervened on".into(),
                    ));
                }
                (y0 + inc, theta.sigma_y)
            }
            Baseline::Marginal => (
                theta.mean_y0(&cfg)? + inc,
                (theta.sigma0.powi(2) + theta.sigma_y.powi(2)).sqrt(),
            ),
        };
        density += weight * normal_lpdf(y, mean, sd).0.exp();
    }
    Ok(density)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailureTimeResult {
    pub values: Vec<f64>,
    /// Draws dropped because the degradation slope was not positive.
    pub excluded: usize,
    pub summary: QuantileSummary,
}

/// One predictive failure time per posterior draw and Monte Carlo replicate.
///
/// For each draw the humidity class (if not intervened on), the initial
/// resistance and the measurement noise are simulated, and the time at which
/// the expected trajectory crosses the threshold is solved in closed form.
pub fn predictive_failure_time<R: Rng + ?Sized>(
    intervention: &Intervention,
    draws: &PosteriorDraws,
    replicates: usize,
    rng: &mut R,
) -> Result<FailureTimeResult> {
    if !intervention.is_full_assembly() {
        return Err(Error::Config("failure-time prediction needs x_S, x_T and x_P".into()));
    }
    if replicates == 0 {
        return Err(Error::Config("replicates must be positive".into()));
    }
    if draws.regime() != Regime::NoStress {
        return Err(Error::Config(format!(
            "failure-time prediction needs draws fitted to {} data",
            Regime::NoStress
        )));
    }
    let c = draws.constants();
    let mut values = Vec::with_capacity(draws.len() * replicates);
    let mut excluded = 0;
    for theta in draws.thetas() {
        for _ in 0..replicates {
            match failure_time_once(intervention, &theta, c, rng)? {
                Some(w) => values.push(w),
                None => excluded += 1,
            }
        }
    }
    let total = draws.len() * replicates;
    if excluded as f64 > MAX_FAILED_SHARE * total as f64 {
        return Err(Error::TooManyFailedDraws {
            failed: excluded,
            total,
            reason: "degradation slope not positive".into(),
        });
    }
    let summary = QuantileSummary::new(&values)?;
    Ok(FailureTimeResult {
        values,
        excluded,
        summary,
    })
}

/// Simulated failure time under one parameter set; `None` if the device never fails.
pub fn failure_time_once<R: Rng + ?Sized>(
    intervention: &Intervention,
    theta: &ModelParams,
    c: &FixedConstants,
    rng: &mut R,
) -> Result<Option<f64>> {
    let humidity = match intervention.humidity {
        Some(h) => h,
        None => {
            let p = &theta.tables()?.humidity;
            let u: f64 = rng.random();
            if u < p[0] { Humidity::ALL[0] } else { Humidity::ALL[HUMIDITY_LEVELS - 1] }
        }
    };
    let cfg = Configuration::new(
        intervention.surface.unwrap_or(0),
        intervention.component.unwrap_or(0),
        intervention.pins.unwrap_or(0),
        humidity,
    );
    let u0: f64 = StandardNormal.sample(rng);
    let u3: f64 = StandardNormal.sample(rng);
    let y0 = theta.mean_y0(&cfg)? + theta.sigma0 * u0;
    let slope = theta.slope_sum(&cfg)?;
    if !(slope > 0.0) {
        return Ok(None);
    }
    Ok(Some(
        (c.threshold_excess() * y0 - theta.sigma_y * u3) * c.gamma / slope,
    ))
}

/// Censoring status of a device's failure time given its measurements.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Censoring {
    /// Failed in `(lower, upper]`.
    IntervalCensored { lower: f64, upper: f64 },
    /// Still working at `lower`.
    RightCensored { lower: f64 },
}

/// Locates the failure time between measurements. Reaching the threshold
/// exactly counts as failure.
pub fn censor_classify(record: &DeviceRecord, c: &FixedConstants) -> Result<Censoring> {
    let y0 = record.y0()?;
    if record.measurements.len() < 2 {
        return Err(Error::data(format!(
            "device {} needs a measurement after time zero",
            record.id
        )));
    }
    let threshold = c.threshold_factor * y0;
    for pair in record.measurements.windows(2) {
        if pair[1].resistance >= threshold {
            return Ok(Censoring::IntervalCensored {
                lower: pair[0].time,
                upper: pair[1].time,
            });
        }
    }
    let last = record.measurements[record.measurements.len() - 1].time;
    Ok(Censoring::RightCensored { lower: last })
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::scm::Measurement;

    fn c() -> FixedConstants {
        FixedConstants::default()
    }

    fn reference() -> Configuration {
        Configuration::new(1, 1, 1, Humidity::Normal)
    }

    #[test]
    fn delta1_reference_values() {
        let theta = ModelParams::reference();
        let x = reference();
        assert_eq!(delta1(&x, 0.0, &theta, &c()).unwrap(), 0.0);
        assert!((delta1(&x, 0.72, &theta, &c()).unwrap() - 7.33).abs() < 0.02);
        assert!((delta1(&x, 3.6, &theta, &c()).unwrap() - 163.58).abs() < 0.05);
        assert!(matches!(delta1(&x, -1.0, &theta, &c()), Err(Error::Domain(_))));
    }

    #[test]
    fn delta1_is_slope_part_plus_cubic_part() {
        let theta = ModelParams::reference();
        let x = Configuration::new(2, 4, 3, Humidity::High);
        for w in [0.5, 2.0, 2.7, 3.6] {
            let slope = theta.slope_sum(&x).unwrap() * w;
            let cubic = if w > 2.0 { theta.cubic_sum(&x).unwrap() * (w - 2.0f64).powi(3) } else { 0.0 };
            assert!((delta1(&x, w, &theta, &c()).unwrap() - slope - cubic).abs() < 1e-9);
        }
    }

    #[test]
    fn contrast_properties() {
        let theta = ModelParams::reference();
        let a = Configuration::new(1, 1, 1, Humidity::Normal);
        let b = Configuration::new(2, 1, 1, Humidity::Normal);
        let d = Configuration::new(3, 2, 4, Humidity::Normal);
        let h = Humidity::Normal;
        let w = 0.72;
        assert_eq!(delta_contrast(&a, &a, h, w, &theta, &c()).unwrap(), 0.0);
        let ab = delta_contrast(&a, &b, h, w, &theta, &c()).unwrap();
        assert!((ab - 0.144).abs() < 1e-12);
        assert_eq!(ab, -delta_contrast(&b, &a, h, w, &theta, &c()).unwrap());
        for w in ESTIMAND_GRID {
            let sum = delta_contrast(&a, &b, h, w, &theta, &c()).unwrap()
                + delta_contrast(&b, &d, h, w, &theta, &c()).unwrap();
            let direct = delta_contrast(&a, &d, h, w, &theta, &c()).unwrap();
            assert!((sum - direct).abs() < 1e-9);
        }
        let at_36 = delta_contrast(&a, &b, h, 3.6, &theta, &c()).unwrap();
        assert!((at_36 - (0.2 * 3.6 + 10.0 * 1.6f64.powi(3))).abs() < 1e-9);
    }

    #[test]
    fn reliability_known_y0_cases() {
        let theta = ModelParams::reference();
        let x = Configuration::new(2, 2, 2, Humidity::High);
        let r0 = reliability_known_y0(0.0, 1000.0, &x, Regime::NoStress, &theta, &c()).unwrap();
        assert_eq!(r0, 1.0);
        // median crossing: slope * t / gamma = 0.1 * y0
        let s = theta.slope_sum(&x).unwrap();
        let t = 0.1 * 1000.0 * 10.0 / s;
        let r = reliability_known_y0(t, 1000.0, &x, Regime::NoStress, &theta, &c()).unwrap();
        assert!((r - 0.5).abs() < 1e-9);
        let mut bad = theta.clone();
        bad.sigma_y = 0.0;
        assert!(matches!(
            reliability_known_y0(1.0, 1000.0, &x, Regime::NoStress, &bad, &c()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn reliability_matches_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Configuration::new(3, 1, 2, Humidity::Normal);
        for _ in 0..5 {
            let mut theta = ModelParams::reference();
            theta.beta1 = rng.random_range(5.0..15.0);
            theta.sigma_y = rng.random_range(0.3..3.0);
            let t = rng.random_range(30.0..90.0);
            let y0 = 1000.0;
            let mean = theta.diff_mean(y0, &x, t, Regime::NoStress, &c()).unwrap();
            // Simpson's rule for the normal density on (mean - 12 sd, 0)
            let sd = theta.sigma_y;
            let lo = (mean - 12.0 * sd).min(-1e-9);
            let n = 20_000;
            let h = (0.0 - lo) / n as f64;
            let f = |q: f64| normal_lpdf(q, mean, sd).0.exp();
            let mut s = f(lo) + f(0.0);
            for i in 1..n {
                s += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            let quad = s * h / 3.0;
            let r = reliability_known_y0(t, y0, &x, Regime::NoStress, &theta, &c()).unwrap();
            assert!((r - quad).abs() < 1e-8, "{r} vs {quad}");
        }
    }

    #[test]
    fn reliability_unknown_y0_cases() {
        let mut theta = ModelParams::reference();
        let x = Configuration::new(1, 3, 2, Humidity::Normal);
        let (_, sd) = unknown_y0_difference(1.0, &x, Regime::NoStress, &theta, &c()).unwrap();
        assert!((sd * sd - 0.26).abs() < 1e-12);

        let mut grid_prev = 1.0;
        for i in 0..200 {
            let t = 60.0 * i as f64 / 199.0;
            let r = reliability_unknown_y0(t, &x, Regime::NoStress, &theta, &c()).unwrap();
            assert!(r <= grid_prev + 1e-15 && (0.0..=1.0).contains(&r));
            grid_prev = r;
        }

        theta.sigma0 = 0.0;
        let y0 = theta.mean_y0(&x).unwrap();
        for t in [10.0, 90.0, 97.0, 120.0] {
            let a = reliability_unknown_y0(t, &x, Regime::NoStress, &theta, &c()).unwrap();
            let b = reliability_known_y0(t, y0, &x, Regime::NoStress, &theta, &c()).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mixture_weights() {
        let mut theta = ModelParams::reference();
        let full = Intervention::assembly(1, 2, 3);
        let m = full.mixture(&theta).unwrap();
        assert_eq!(m.len(), 2);
        assert!((m.iter().map(|(_, w)| w).sum::<f64>() - 1.0).abs() < 1e-12);
        let only_s = Intervention {
            surface: Some(2),
            ..Intervention::default()
        };
        let m = only_s.mixture(&theta).unwrap();
        assert_eq!(m.len(), 2 * 4 * 4);
        assert!((m.iter().map(|(_, w)| w).sum::<f64>() - 1.0).abs() < 1e-12);
        theta.tables = None;
        assert!(matches!(full.mixture(&theta), Err(Error::Config(_))));
        let pinned = Intervention {
            humidity: Some(Humidity::High),
            ..full
        };
        assert_eq!(pinned.mixture(&theta).unwrap(), vec![(Configuration::new(1, 2, 3, Humidity::High), 1.0)]);
    }

    #[test]
    fn degenerate_humidity_gives_single_component() {
        let mut theta = ModelParams::reference();
        theta.tables.as_mut().unwrap().humidity = vec![0.0, 1.0];
        let i = Intervention::assembly(2, 2, 2);
        let cfg = Configuration::new(2, 2, 2, Humidity::High);
        let y0 = 1001.0;
        let w = 36.0;
        let mean = y0 + theta.increase(&cfg, w, Regime::NoStress, &c()).unwrap();
        for y in [mean - 1.0, mean, mean + 0.3] {
            let d = adjusted_outcome_density(y, &i, w, Baseline::Observed(y0), &theta, &c()).unwrap();
            assert!((d - normal_lpdf(y, mean, theta.sigma_y).0.exp()).abs() < 1e-14);
        }
    }

    #[test]
    fn adjusted_density_integrates_to_one() {
        let theta = ModelParams::reference();
        let cases = [
            (Intervention::assembly(1, 1, 4), Baseline::Observed(1000.0)),
            (Intervention::assembly(3, 3, 3), Baseline::Marginal),
            (Intervention { surface: Some(2), ..Intervention::default() }, Baseline::Marginal),
        ];
        for (i, b) in cases {
            let (lo, hi, n) = (900.0, 1200.0, 60_000);
            let h = (hi - lo) / n as f64;
            let mut total = 0.0;
            for k in 0..=n {
                let y = lo + k as f64 * h;
                let wgt = if k == 0 || k == n { 0.5 } else { 1.0 };
                total += wgt * adjusted_outcome_density(y, &i, 36.0, b, &theta, &c()).unwrap();
            }
            assert!((total * h - 1.0).abs() < 1e-6, "{}", total * h);
        }
    }

    #[test]
    fn observed_baseline_needs_full_assembly() {
        let theta = ModelParams::reference();
        let i = Intervention { surface: Some(1), ..Intervention::default() };
        assert!(adjusted_outcome_density(1000.0, &i, 1.0, Baseline::Observed(1000.0), &theta, &c()).is_err());
    }

    #[test]
    fn noiseless_failure_time_is_closed_form() {
        let mut theta = ModelParams::reference();
        theta.sigma0 = 0.0;
        theta.sigma_y = 0.0;
        theta.tables.as_mut().unwrap().humidity = vec![1.0, 0.0];
        let i = Intervention::assembly(1, 1, 4);
        let cfg = Configuration::new(1, 1, 4, Humidity::Normal);
        let y0 = theta.mean_y0(&cfg).unwrap();
        let expected = 100.0 * 10.0 * (y0 / 1000.0) / theta.slope_sum(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let w = failure_time_once(&i, &theta, &c(), &mut rng).unwrap().unwrap();
            assert!((w - expected).abs() < 1e-12 * expected);
        }
    }

    #[test]
    fn non_positive_slope_never_fails() {
        let mut theta = ModelParams::reference();
        theta.beta1 = -20.0;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let i = Intervention::assembly(1, 1, 1);
        assert_eq!(failure_time_once(&i, &theta, &c(), &mut rng).unwrap(), None);
    }

    fn repeated(theta: &ModelParams, n: usize) -> PosteriorDraws {
        let provenance = crate::draws::Provenance {
            spec: crate::posterior::FitSpec::new(Regime::NoStress),
            sampler: crate::sampler::SamplerConfig::default(),
            chains: vec![],
        };
        PosteriorDraws::new(vec![theta.to_flat(); n], vec![n], provenance).unwrap()
    }

    #[test]
    fn failure_time_survival_matches_unknown_y0_reliability() {
        let mut theta = ModelParams::reference();
        theta.tables.as_mut().unwrap().humidity = vec![0.3, 0.7];
        let draws = repeated(&theta, 200);
        let i = Intervention::assembly(3, 3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = predictive_failure_time(&i, &draws, 250, &mut rng).unwrap();
        assert_eq!(r.values.len(), 50_000);
        assert_eq!(r.excluded, 0);
        let n = r.values.len() as f64;
        for t in [85.0, 88.0, 90.0, 92.0, 95.0] {
            let empirical = r.values.iter().filter(|&&w| w > t).count() as f64 / n;
            let exact: f64 = Humidity::ALL
                .iter()
                .zip([0.3, 0.7])
                .map(|(&h, p)| {
                    let cfg = Configuration::new(3, 3, 3, h);
                    p * reliability_unknown_y0(t, &cfg, Regime::NoStress, &theta, &c()).unwrap()
                })
                .sum();
            let se = (exact * (1.0 - exact) / n).sqrt().max(1e-4);
            assert!((empirical - exact).abs() < 4.0 * se, "t={t}: {empirical} vs {exact}");
        }
    }

    #[test]
    fn too_many_non_failing_draws_is_an_error() {
        let mut theta = ModelParams::reference();
        theta.beta1 = -20.0;
        let draws = repeated(&theta, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let err = predictive_failure_time(&Intervention::assembly(1, 1, 1), &draws, 1, &mut rng).unwrap_err();
        assert!(matches!(err, Error::TooManyFailedDraws { failed: 10, total: 10, .. }));
    }

    fn record(values: &[(f64, f64)]) -> DeviceRecord {
        DeviceRecord {
            id: "r".into(),
            config: reference(),
            regime: Regime::NoStress,
            measurements: values
                .iter()
                .map(|&(time, resistance)| Measurement { time, resistance })
                .collect(),
        }
    }

    #[test]
    fn censoring_cases() {
        let never = record(&[(0.0, 1000.0), (7.2, 1050.0), (21.6, 1080.0), (36.0, 1099.0)]);
        assert_eq!(
            censor_classify(&never, &c()).unwrap(),
            Censoring::RightCensored { lower: 36.0 }
        );
        let late = record(&[(0.0, 1000.0), (7.2, 1050.0), (21.6, 1080.0), (36.0, 1120.0)]);
        assert_eq!(
            censor_classify(&late, &c()).unwrap(),
            Censoring::IntervalCensored { lower: 21.6, upper: 36.0 }
        );
        let tie = record(&[(0.0, 1000.0), (7.2, 1000.0 * 1.1), (21.6, 1080.0)]);
        assert_eq!(
            censor_classify(&tie, &c()).unwrap(),
            Censoring::IntervalCensored { lower: 0.0, upper: 7.2 }
        );
        assert!(censor_classify(&record(&[(0.0, 1000.0)]), &c()).is_err());
        assert!(matches!(censor_classify(&record(&[]), &c()), Err(Error::Data { .. })));
    }
}
