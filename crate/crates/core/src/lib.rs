//! Structural causal model of resistance degradation in electronic devices,
//! with Bayesian fitting, causal queries and twin-network counterfactuals.

pub mod counterfactual;
pub mod datagen;
pub mod density;
pub mod draws;
pub mod error;
pub mod fit;
pub mod io;
pub mod posterior;
pub mod queries;
pub mod sampler;
pub mod scm;
pub mod transform;

pub use draws::{DiagnosticsReport, PosteriorDraws, Provenance};
pub use error::{Error, Result};
pub use fit::fit;
pub use posterior::{FitSpec, PriorConfig};
pub use sampler::SamplerConfig;
pub use scm::{
    Cardinalities, Configuration, DeviceRecord, FixedConstants, Humidity, Measurement, ModelParams,
    ProbabilityTables, Regime,
};
