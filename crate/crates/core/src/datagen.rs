//! Forward simulation of the SCM.
//!
//! Every device draws from its own ChaCha stream (`seed`, stream = device
//! index), so a record does not depend on how many devices were generated
//! before it or in which order.

use rand::Rng;
use rand::SeedableRng;
use rand::distr::weighted::WeightedIndex;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scm::{
    Configuration, DeviceRecord, FixedConstants, Humidity, Measurement, ModelParams, Regime,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Design {
    /// Every configuration, `replicates` devices each.
    FullFactorial { replicates: usize },
    /// `n` devices with configurations drawn from the probability tables.
    Observational { n: usize },
}

/// Everything needed to regenerate a dataset. Omitted `truth` and
/// `constants` fall back to [`ModelParams::reference`] and the defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    #[serde(default = "ModelParams::reference")]
    pub truth: ModelParams,
    #[serde(default)]
    pub constants: FixedConstants,
    pub regime: Regime,
    pub design: Design,
    pub seed: u64,
    /// Jitter field measurement times around their nominal values. Accelerated
    /// experiments always use the nominal times.
    #[serde(default = "default_jitter")]
    pub jitter: bool,
}

fn default_jitter() -> bool {
    true
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        self.truth.validate_structure()?;
        self.constants.validate()?;
        match self.design {
            Design::FullFactorial { replicates: 0 } => {
                Err(Error::Config("replicates must be >= 1".into()))
            }
            Design::Observational { n: 0 } => Err(Error::Config("n must be >= 1".into())),
            Design::Observational { .. } => self.truth.tables().map(|_| ()),
            Design::FullFactorial { .. } => Ok(()),
        }
    }

    pub fn len(&self) -> usize {
        match self.design {
            Design::FullFactorial { replicates } => {
                replicates * self.truth.cardinalities().cells()
            }
            Design::Observational { n } => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Independent random stream for device `index` under `seed`.
pub fn device_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Measurement time `r` (1-based) for a given Beta(5,5) draw `u`.
pub fn measurement_time(r: usize, u: f64, c: &FixedConstants) -> Result<f64> {
    let nominal = r
        .checked_sub(1)
        .and_then(|i| c.nominal_times.get(i))
        .ok_or_else(|| {
            Error::Domain(format!(
                "measurement index {r} outside 1..={}",
                c.nominal_times.len()
            ))
        })?;
    Ok(nominal + (u - 0.5) / 100.0)
}

/// Realised field measurement time: nominal time plus a Beta(5,5) jitter of at most five hours.
pub fn sample_measurement_time<R: Rng + ?Sized>(
    r: usize,
    c: &FixedConstants,
    rng: &mut R,
) -> Result<f64> {
    let beta = Beta::new(5.0, 5.0).expect("valid Beta parameters");
    measurement_time(r, beta.sample(rng), c)
}

fn categorical<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> Result<usize> {
    let dist = WeightedIndex::new(p)
        .map_err(|e| Error::InvalidParams(format!("bad probability vector {p:?}: {e}")))?;
    Ok(dist.sample(rng))
}

/// Draws humidity first, then surface and component given humidity, then pins.
pub fn sample_config_observational<R: Rng + ?Sized>(
    theta: &ModelParams,
    rng: &mut R,
) -> Result<Configuration> {
    let tables = theta.tables()?;
    let humidity = Humidity::ALL[categorical(&tables.humidity, rng)?];
    let h = humidity.index();
    let surface = categorical(&tables.surface[h], rng)? + 1;
    let component = categorical(&tables.component[h], rng)? + 1;
    let pins = categorical(&tables.pins, rng)? + 1;
    Ok(Configuration::new(surface, component, pins, humidity))
}

/// Simulates the four measurements of one device.
pub fn generate_device<R: Rng + ?Sized>(
    id: impl Into<String>,
    config: Configuration,
    regime: Regime,
    theta: &ModelParams,
    c: &FixedConstants,
    jitter: bool,
    rng: &mut R,
) -> Result<DeviceRecord> {
    let mut times = Vec::with_capacity(c.nominal_times.len());
    for r in 1..=c.nominal_times.len() {
        let w = if jitter && regime == Regime::NoStress {
            sample_measurement_time(r, c, rng)?
        } else {
            c.nominal_times[r - 1]
        };
        times.push(w);
    }

    let u0: f64 = rng.sample(StandardNormal);
    let y0 = theta.mean_y0(&config)? + theta.sigma0 * u0;
    let mut measurements = vec![Measurement {
        time: 0.0,
        resistance: y0,
    }];
    for w in times {
        let ut: f64 = rng.sample(StandardNormal);
        let y = theta.mean_yt(y0, &config, w, regime, c)? + theta.sigma_y * ut;
        measurements.push(Measurement {
            time: w,
            resistance: y,
        });
    }
    Ok(DeviceRecord {
        id: id.into(),
        config,
        regime,
        measurements,
    })
}

pub fn generate_dataset(spec: &GeneratorSpec) -> Result<Vec<DeviceRecord>> {
    spec.validate()?;
    let theta = &spec.truth;
    let id = |j: usize| format!("ID{:04}", j + 1);
    match spec.design {
        Design::FullFactorial { replicates } => theta
            .cardinalities()
            .configurations()
            .flat_map(|cfg| std::iter::repeat_n(cfg, replicates))
            .enumerate()
            .map(|(j, cfg)| {
                let mut rng = device_rng(spec.seed, j as u64);
                generate_device(
                    id(j),
                    cfg,
                    spec.regime,
                    theta,
                    &spec.constants,
                    spec.jitter,
                    &mut rng,
                )
            })
            .collect(),
        Design::Observational { n } => (0..n)
            .map(|j| {
                let mut rng = device_rng(spec.seed, j as u64);
                let cfg = sample_config_observational(theta, &mut rng)?;
                generate_device(
                    id(j),
                    cfg,
                    spec.regime,
                    theta,
                    &spec.constants,
                    spec.jitter,
                    &mut rng,
                )
            })
            .collect(),
    }
}
