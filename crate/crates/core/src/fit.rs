//! Fitting the model: posterior target, sampler run, constrained draws.

use crate::draws::{PosteriorDraws, Provenance};
use crate::error::Result;
use crate::posterior::{FitSpec, PosteriorTarget};
use crate::sampler::{self, SamplerConfig};
use crate::scm::DeviceRecord;

/// Samples the posterior of `spec` given `data`.
pub fn fit(data: &[DeviceRecord], spec: &FitSpec, cfg: &SamplerConfig) -> Result<PosteriorDraws> {
    let target = PosteriorTarget::new(data, spec.clone())?;
    let chains = sampler::run(&target, cfg)?;
    let layout = target.layout();
    let mut rows = Vec::with_capacity(cfg.chains * cfg.draws);
    let mut lengths = Vec::with_capacity(chains.len());
    let mut stats = Vec::with_capacity(chains.len());
    for chain in chains {
        lengths.push(chain.draws.len());
        for v in &chain.draws {
            rows.push(layout.constrain(v)?.theta.to_flat());
        }
        stats.push(chain.stats);
    }
    PosteriorDraws::new(
        rows,
        lengths,
        Provenance {
            spec: spec.clone(),
            sampler: cfg.clone(),
            chains: stats,
        },
    )
}
