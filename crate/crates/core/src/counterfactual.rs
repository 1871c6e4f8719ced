//! Counterfactuals by residual recovery on the twin network.
//!
//! Each posterior draw fixes the structural functions; the exogenous noise of
//! a device is recovered from its factual measurements, then pushed through
//! the modified structural equation.

use serde::{Deserialize, Serialize};

use crate::draws::PosteriorDraws;
use crate::error::{Error, Result};
use crate::queries::MAX_FAILED_SHARE;
use crate::sampler::summary::{QuantileSummary, Summary};
use crate::scm::{DeviceRecord, FixedConstants, Humidity, ModelParams, Regime};

/// Exogenous noise of measurement `t` under `theta`; `t = 0` gives `u_0`.
pub fn recover_residual(record: &DeviceRecord, t: usize, theta: &ModelParams, c: &FixedConstants) -> Result<f64> {
    let y0 = record.y0()?;
    if t == 0 {
        return Ok(y0 - theta.mean_y0(&record.config)?);
    }
    let m = record.measurement(t)?;
    Ok(m.resistance - theta.mean_yt(y0, &record.config, m.time, record.regime, c)?)
}

fn later_measurement(record: &DeviceRecord, t: usize) -> Result<f64> {
    if t == 0 {
        return Err(Error::Domain(
            "the initial resistance does not depend on time or humidity; pick t >= 1".into(),
        ));
    }
    Ok(record.measurement(t)?.time)
}

/// Resistance measurement `t` would have shown with operating time `w_new`
/// and humidity `humidity` in place of the factual ones.
pub fn cf_outcome(
    record: &DeviceRecord,
    t: usize,
    w_new: f64,
    humidity: Humidity,
    theta: &ModelParams,
    c: &FixedConstants,
) -> Result<f64> {
    let w = later_measurement(record, t)?;
    if !(w_new >= 0.0) || !w_new.is_finite() {
        return Err(Error::Domain(format!("counterfactual time must be finite and >= 0, got {w_new}")));
    }
    let y = record.measurement(t)?.resistance;
    let cf_cfg = record.config.with_humidity(humidity);
    // y_t - h(x, w) is the recovered residual; adding the difference of the
    // two increases keeps the factual override exact in floating point
    let shift = theta.increase(&cf_cfg, w_new, record.regime, c)?
        - theta.increase(&record.config, w, record.regime, c)?;
    Ok(y + shift)
}

pub fn cf_outcome_at_time(
    record: &DeviceRecord,
    t: usize,
    w_new: f64,
    theta: &ModelParams,
    c: &FixedConstants,
) -> Result<f64> {
    cf_outcome(record, t, w_new, record.config.humidity, theta, c)
}

pub fn cf_outcome_humidity(
    record: &DeviceRecord,
    t: usize,
    humidity: Humidity,
    theta: &ModelParams,
    c: &FixedConstants,
) -> Result<f64> {
    let w = later_measurement(record, t)?;
    cf_outcome(record, t, w, humidity, theta, c)
}

/// Time at which a field device would have reached the failure threshold,
/// keeping the noise of its last measurement.
pub fn cf_failure_time(record: &DeviceRecord, theta: &ModelParams, c: &FixedConstants) -> Result<f64> {
    cf_failure_time_with(record, record.config.humidity, theta, c)
}

/// As [`cf_failure_time`], with humidity set to `humidity`.
pub fn cf_failure_time_with(
    record: &DeviceRecord,
    humidity: Humidity,
    theta: &ModelParams,
    c: &FixedConstants,
) -> Result<f64> {
    if record.regime != Regime::NoStress {
        return Err(Error::Config(format!(
            "counterfactual failure times are defined for {} devices only, device {} is {}",
            Regime::NoStress,
            record.id,
            record.regime
        )));
    }
    let last = record.measurements.len().saturating_sub(1);
    later_measurement(record, last)?;
    let slope = theta.slope_sum(&record.config.with_humidity(humidity))?;
    if !(slope > 0.0) {
        return Err(Error::NonFailingTrajectory { slope_sum: slope });
    }
    let y0 = record.y0()?;
    let u = recover_residual(record, last, theta, c)?;
    Ok((c.threshold_excess() * y0 - u) * c.gamma / slope)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Question {
    OutcomeUnderOverride,
    FailureTime,
}

/// A factual device and the world in which it is re-examined.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterfactualQuery {
    pub record: DeviceRecord,
    /// Index of the measurement whose counterfactual value is wanted.
    #[serde(default)]
    pub target: usize,
    /// Overriding operating time in kilohours.
    #[serde(default)]
    pub time: Option<f64>,
    #[serde(default, rename = "x_H")]
    pub humidity: Option<Humidity>,
    pub question: Question,
}

impl CounterfactualQuery {
    pub fn validate(&self) -> Result<()> {
        self.record.validate()?;
        match self.question {
            Question::OutcomeUnderOverride => {
                if self.time.is_none() && self.humidity.is_none() {
                    return Err(Error::Config("an outcome query needs a time or humidity override".into()));
                }
                later_measurement(&self.record, self.target)?;
            }
            Question::FailureTime => {
                if self.time.is_some() {
                    return Err(Error::Config("a failure-time query cannot override time".into()));
                }
                if self.record.regime != Regime::NoStress {
                    return Err(Error::Config("failure-time queries need a field (NS) device".into()));
                }
            }
        }
        Ok(())
    }

    /// The counterfactual value under one parameter draw.
    pub fn evaluate(&self, theta: &ModelParams, c: &FixedConstants) -> Result<f64> {
        let humidity = self.humidity.unwrap_or(self.record.config.humidity);
        match self.question {
            Question::OutcomeUnderOverride => {
                let w = match self.time {
                    Some(w) => w,
                    None => later_measurement(&self.record, self.target)?,
                };
                cf_outcome(&self.record, self.target, w, humidity, theta, c)
            }
            Question::FailureTime => cf_failure_time_with(&self.record, humidity, theta, c),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualResult {
    pub values: Vec<f64>,
    /// Draws under which the device never fails.
    pub excluded: usize,
    pub summary: Summary,
    pub quantiles: QuantileSummary,
}

/// Evaluates `query` under every posterior draw.
pub fn cf_posterior(query: &CounterfactualQuery, draws: &PosteriorDraws, level: f64) -> Result<CounterfactualResult> {
    query.validate()?;
    if query.record.regime != draws.regime() {
        return Err(Error::Config(format!(
            "device {} is {} but the draws were fitted to {} data",
            query.record.id,
            query.record.regime,
            draws.regime()
        )));
    }
    query.record.config.check(&draws.provenance().spec.cardinalities)?;
    let c = draws.constants();
    let mut values = Vec::with_capacity(draws.len());
    let mut excluded = 0;
    for theta in draws.thetas() {
        match query.evaluate(&theta, c) {
            Ok(v) => values.push(v),
            Err(Error::NonFailingTrajectory { .. }) => excluded += 1,
            Err(e) => return Err(e),
        }
    }
    if excluded as f64 > MAX_FAILED_SHARE * draws.len() as f64 {
        return Err(Error::TooManyFailedDraws {
            failed: excluded,
            total: draws.len(),
            reason: "degradation slope not positive".into(),
        });
    }
    let summary = Summary::new(&values, level)?;
    let quantiles = QuantileSummary::new(&values)?;
    Ok(CounterfactualResult {
        values,
        excluded,
        summary,
        quantiles,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::datagen::generate_device;
    use crate::scm::Configuration;

    fn c() -> FixedConstants {
        FixedConstants::default()
    }

    fn device(seed: u64, cfg: Configuration, regime: Regime, theta: &ModelParams) -> DeviceRecord {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        generate_device("d", cfg, regime, theta, &c(), true, &mut rng).unwrap()
    }

    fn noiseless() -> ModelParams {
        let mut theta = ModelParams::reference();
        theta.sigma0 = 0.0;
        theta.sigma_y = 0.0;
        theta
    }

    #[test]
    fn noiseless_record_has_zero_residuals() {
        let theta = noiseless();
        for regime in [Regime::NoStress, Regime::AcceleratedStress] {
            let r = device(1, Configuration::new(2, 3, 1, Humidity::High), regime, &theta);
            for t in 0..4 {
                assert!(recover_residual(&r, t, &theta, &c()).unwrap().abs() < 1e-9);
            }
        }
    }

    #[test]
    fn residual_matches_subtraction_oracle() {
        let truth = ModelParams::reference();
        let r = device(2, Configuration::new(4, 1, 2, Humidity::Normal), Regime::NoStress, &truth);
        let mut theta = truth.clone();
        theta.beta1 = 12.5;
        theta.mu0 = 990.0;
        let cfg = r.config;
        let y0 = r.measurements[0].resistance;
        let mean_y0 = 990.0 + theta.alpha_s[3] + theta.alpha_t[0] + theta.alpha_p[1];
        assert!((recover_residual(&r, 0, &theta, &c()).unwrap() - (y0 - mean_y0)).abs() < 1e-9);
        for t in 1..4 {
            let m = r.measurements[t];
            let slope = 12.5 + theta.delta1_s[3] + theta.delta1_t[0] + theta.delta1_p[1] + theta.delta1_h[0];
            let oracle = m.resistance - y0 - slope * m.time / 10.0;
            let got = recover_residual(&r, t, &theta, &c()).unwrap();
            assert!((got - oracle).abs() < 1e-9, "{got} vs {oracle}");
            assert_eq!(cfg, r.config);
        }
        assert!(matches!(recover_residual(&r, 7, &theta, &c()), Err(Error::Data { .. })));
    }

    #[test]
    fn factual_overrides_reproduce_observations() {
        let truth = ModelParams::reference();
        let mut theta = truth.clone();
        theta.beta1 = 9.3;
        theta.beta2 = 28.0;
        for regime in [Regime::NoStress, Regime::AcceleratedStress] {
            for seed in 0..20 {
                let cfg = Configuration::new(1 + seed as usize % 4, 2, 3, Humidity::ALL[seed as usize % 2]);
                let r = device(seed, cfg, regime, &truth);
                for t in 1..4 {
                    let m = r.measurements[t];
                    assert_eq!(cf_outcome_at_time(&r, t, m.time, &theta, &c()).unwrap(), m.resistance);
                    assert_eq!(cf_outcome_humidity(&r, t, cfg.humidity, &theta, &c()).unwrap(), m.resistance);
                }
            }
        }
    }

    #[test]
    fn time_zero_and_linearity() {
        let theta = ModelParams::reference();
        let r = device(3, Configuration::new(1, 1, 1, Humidity::High), Regime::NoStress, &theta);
        let y0 = r.measurements[0].resistance;
        for t in 1..4 {
            let u = recover_residual(&r, t, &theta, &c()).unwrap();
            let at0 = cf_outcome_at_time(&r, t, 0.0, &theta, &c()).unwrap();
            assert!((at0 - (y0 + u)).abs() < 1e-9);
            let w = r.measurements[t].time;
            let once = cf_outcome_at_time(&r, t, w, &theta, &c()).unwrap() - y0 - u;
            let twice = cf_outcome_at_time(&r, t, 2.0 * w, &theta, &c()).unwrap() - y0 - u;
            assert!((twice - 2.0 * once).abs() < 1e-9);
        }
        assert!(cf_outcome_at_time(&r, 1, -1.0, &theta, &c()).is_err());
        assert!(cf_outcome_at_time(&r, 0, 1.0, &theta, &c()).is_err());
    }

    #[test]
    fn failure_time_closed_form() {
        let mut theta = noiseless();
        theta.beta1 = 20.0;
        for d in [&mut theta.delta1_s, &mut theta.delta1_t, &mut theta.delta1_p, &mut theta.delta1_h] {
            d.iter_mut().for_each(|v| *v = 0.0);
        }
        theta.mu0 = 1000.0;
        for a in [&mut theta.alpha_s, &mut theta.alpha_t, &mut theta.alpha_p] {
            a.iter_mut().for_each(|v| *v = 0.0);
        }
        let r = device(4, Configuration::new(1, 1, 1, Humidity::Normal), Regime::NoStress, &theta);
        assert!((cf_failure_time(&r, &theta, &c()).unwrap() - 50.0).abs() < 1e-9);
    }

    #[test]
    fn failure_time_errors() {
        let theta = ModelParams::reference();
        let as_dev = device(5, Configuration::new(1, 1, 1, Humidity::Normal), Regime::AcceleratedStress, &theta);
        assert!(matches!(cf_failure_time(&as_dev, &theta, &c()), Err(Error::Config(_))));
        let ns = device(5, Configuration::new(1, 1, 1, Humidity::Normal), Regime::NoStress, &theta);
        let mut flat = theta.clone();
        flat.beta1 = -50.0;
        assert!(matches!(
            cf_failure_time(&ns, &flat, &c()),
            Err(Error::NonFailingTrajectory { .. })
        ));
        let mut short = ns.clone();
        short.measurements.truncate(1);
        assert!(cf_failure_time(&short, &theta, &c()).is_err());
    }

    #[test]
    fn humidity_contrast_is_the_slope_difference() {
        let theta = ModelParams::reference();
        let r = device(6, Configuration::new(2, 2, 2, Humidity::High), Regime::NoStress, &theta);
        let t = 2;
        let w = r.measurements[t].time;
        let diff = cf_outcome_humidity(&r, t, Humidity::Normal, &theta, &c()).unwrap() - r.measurements[t].resistance;
        let oracle = (theta.delta1_h[0] - theta.delta1_h[1]) * w / 10.0;
        assert!((diff - oracle).abs() < 1e-10);
    }

    fn record_strategy() -> impl Strategy<Value = (DeviceRecord, ModelParams)> {
        (
            1usize..=4,
            1usize..=4,
            1usize..=4,
            0usize..2,
            any::<u64>(),
            5.0f64..15.0,
            -1.0f64..1.0,
        )
            .prop_map(|(s, t, p, h, seed, beta1, shift)| {
                let truth = ModelParams::reference();
                let cfg = Configuration::new(s, t, p, Humidity::ALL[h]);
                let r = device(seed, cfg, Regime::NoStress, &truth);
                let mut theta = truth;
                theta.beta1 = beta1;
                theta.delta1_h = vec![shift, -shift];
                (r, theta)
            })
    }

    proptest! {
        #[test]
        fn failure_time_is_a_fixed_point((r, theta) in record_strategy()) {
            let wf = cf_failure_time(&r, &theta, &c()).unwrap();
            let y = cf_outcome_at_time(&r, 3, wf, &theta, &c()).unwrap();
            let y0 = r.measurements[0].resistance;
            prop_assert!((y - 1.1 * y0).abs() < 1e-8);
        }

        #[test]
        fn residual_cancels_in_humidity_contrast((r, theta) in record_strategy(), bump in -5.0f64..5.0) {
            let mut other = r.clone();
            other.measurements[2].resistance += bump;
            let contrast = |rec: &DeviceRecord| {
                cf_outcome_humidity(rec, 2, Humidity::Normal, &theta, &c()).unwrap()
                    - cf_outcome_humidity(rec, 2, Humidity::High, &theta, &c()).unwrap()
            };
            prop_assert!((contrast(&r) - contrast(&other)).abs() < 1e-10);
        }

        #[test]
        fn outcome_increases_with_time((r, theta) in record_strategy(), a in 0.0f64..80.0, b in 0.0f64..80.0) {
            prop_assume!((a - b).abs() > 1e-6);
            let ya = cf_outcome_at_time(&r, 1, a, &theta, &c()).unwrap();
            let yb = cf_outcome_at_time(&r, 1, b, &theta, &c()).unwrap();
            prop_assert_eq!(a < b, ya < yb);
        }
    }

    fn draws_around(theta: &ModelParams, n: usize, seed: u64) -> PosteriorDraws {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..n)
            .map(|_| {
                let mut t = theta.clone();
                t.beta1 += rng.random_range(-0.1..0.1);
                t.mu0 += rng.random_range(-0.5..0.5);
                t.to_flat()
            })
            .collect();
        let provenance = crate::draws::Provenance {
            spec: crate::posterior::FitSpec::new(Regime::NoStress),
            sampler: crate::sampler::SamplerConfig::default(),
            chains: vec![],
        };
        PosteriorDraws::new(rows, vec![n / 2, n - n / 2], provenance).unwrap()
    }

    #[test]
    fn posterior_consistency_query_has_zero_variance() {
        let theta = ModelParams::reference();
        let r = device(9, Configuration::new(3, 1, 2, Humidity::High), Regime::NoStress, &theta);
        let draws = draws_around(&theta, 400, 1);
        let q = CounterfactualQuery {
            record: r.clone(),
            target: 2,
            time: Some(r.measurements[2].time),
            humidity: None,
            question: Question::OutcomeUnderOverride,
        };
        let res = cf_posterior(&q, &draws, 0.9).unwrap();
        assert!(res.values.iter().all(|&v| v == r.measurements[2].resistance));
        assert!(res.summary.sd < 1e-9);
    }

    #[test]
    fn posterior_summary_is_recomputable() {
        let theta = ModelParams::reference();
        let r = device(10, Configuration::new(3, 1, 2, Humidity::High), Regime::NoStress, &theta);
        let draws = draws_around(&theta, 401, 2);
        let q = CounterfactualQuery {
            record: r,
            target: 3,
            time: None,
            humidity: Some(Humidity::Normal),
            question: Question::FailureTime,
        };
        let res = cf_posterior(&q, &draws, 0.9).unwrap();
        assert_eq!(res.values.len(), 401);
        let mean = res.values.iter().sum::<f64>() / 401.0;
        assert!((res.summary.mean - mean).abs() < 1e-9);
        let mut sorted = res.values.clone();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(res.quantiles.q50, sorted[200]);
        assert_eq!(res.quantiles.min, sorted[0]);
        assert_eq!(res.quantiles.q25, sorted[100]);
    }

    #[test]
    fn query_validation() {
        let theta = ModelParams::reference();
        let r = device(11, Configuration::new(1, 1, 1, Humidity::High), Regime::NoStress, &theta);
        let base = CounterfactualQuery {
            record: r,
            target: 1,
            time: None,
            humidity: None,
            question: Question::OutcomeUnderOverride,
        };
        assert!(base.validate().is_err());
        let ft_with_time = CounterfactualQuery {
            time: Some(1.0),
            question: Question::FailureTime,
            ..base.clone()
        };
        assert!(ft_with_time.validate().is_err());
        let as_draws = {
            let mut t = theta.clone();
            t.tables = None;
            let provenance = crate::draws::Provenance {
                spec: crate::posterior::FitSpec::new(Regime::AcceleratedStress),
                sampler: crate::sampler::SamplerConfig::default(),
                chains: vec![],
            };
            PosteriorDraws::new(vec![t.to_flat(); 200], vec![100, 100], provenance).unwrap()
        };
        let q = CounterfactualQuery {
            time: Some(1.0),
            ..base
        };
        assert!(matches!(cf_posterior(&q, &as_draws, 0.9), Err(Error::Config(_))));
    }

    #[test]
    fn many_non_failing_draws_is_an_error() {
        let mut theta = ModelParams::reference();
        let r = device(12, Configuration::new(1, 1, 1, Humidity::High), Regime::NoStress, &theta);
        theta.beta1 = -30.0;
        let draws = draws_around(&theta, 200, 3);
        let q = CounterfactualQuery {
            record: r,
            target: 3,
            time: None,
            humidity: None,
            question: Question::FailureTime,
        };
        assert!(matches!(cf_posterior(&q, &draws, 0.9), Err(Error::TooManyFailedDraws { .. })));
    }
}
