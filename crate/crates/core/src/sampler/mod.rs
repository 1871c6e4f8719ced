//! Multi-chain MCMC over a differentiable log density.
//!
//! The transition kernel is the No-U-Turn sampler with multinomial trajectory
//! sampling and a diagonal mass matrix, tuned during warmup by dual averaging
//! of the step size and windowed variance estimation.

mod adaptation;
pub mod diagnostics;
mod nuts;
pub mod summary;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use diagnostics::{ess_bulk, split_rhat, Diagnostic};
pub use summary::{hdi, quantile, Summary};

/// A log density known up to a constant, with its gradient.
///
/// Implementations must be reentrant: chains evaluate the same target from
/// several threads at once.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;

    /// Writes the gradient into `grad` and returns the log density. Points
    /// outside the support return `-inf`.
    fn log_density_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64;

    fn log_density(&self, x: &[f64]) -> f64 {
        let mut grad = vec![0.0; self.dim()];
        self.log_density_and_gradient(x, &mut grad)
    }

    /// Starting point of a chain.
    fn initial_point(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        (0..self.dim()).map(|_| rng.random_range(-2.0..=2.0)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub chains: usize,
    pub warmup: usize,
    /// Retained draws per chain.
    pub draws: usize,
    pub seed: u64,
    pub target_accept: f64,
    pub max_tree_depth: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            chains: 4,
            warmup: 1000,
            draws: 5000,
            seed: 20240229,
            target_accept: 0.8,
            max_tree_depth: 10,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 || self.draws == 0 {
            return Err(Error::Config("chains and draws must be positive".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::Config(format!(
                "target_accept must lie in (0, 1), got {}",
                self.target_accept
            )));
        }
        if !(1..=30).contains(&self.max_tree_depth) {
            return Err(Error::Config(format!(
                "max_tree_depth must lie in 1..=30, got {}",
                self.max_tree_depth
            )));
        }
        Ok(())
    }

    /// Random stream of one chain.
    pub fn chain_rng(&self, chain: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(chain as u64);
        rng
    }
}

/// Post-warmup state and behaviour of one chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    pub step_size: f64,
    pub inverse_metric: Vec<f64>,
    pub divergences: usize,
    pub max_depth_hits: usize,
    pub mean_accept_stat: f64,
    pub mean_tree_depth: f64,
}

#[derive(Clone, Debug)]
pub struct Chain {
    /// Retained draws in the target's coordinates, one row per iteration.
    pub draws: Vec<Vec<f64>>,
    pub stats: ChainStats,
}

/// Runs every chain of `cfg` on `target`, concurrently.
///
/// Chain `k` uses stream `k` of a ChaCha generator seeded by `cfg.seed`, so
/// the result does not depend on thread scheduling.
pub fn run<T: LogDensity>(target: &T, cfg: &SamplerConfig) -> Result<Vec<Chain>> {
    cfg.validate()?;
    if target.dim() == 0 {
        return Err(Error::Config("target has no coordinates".into()));
    }
    let results: Vec<Result<Chain>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..cfg.chains)
            .map(|k| scope.spawn(move || run_chain(target, cfg, k)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sampler thread panicked"))
            .collect()
    });
    results.into_iter().collect()
}

const MAX_INIT_ATTEMPTS: usize = 100;

fn run_chain<T: LogDensity>(target: &T, cfg: &SamplerConfig, chain: usize) -> Result<Chain> {
    let mut rng = cfg.chain_rng(chain);
    let dim = target.dim();
    let mut state = None;
    for _ in 0..MAX_INIT_ATTEMPTS {
        let q = target.initial_point(&mut rng);
        let s = nuts::State::new(target, q);
        if s.log_density.is_finite() && s.grad.iter().all(|g| g.is_finite()) {
            state = Some(s);
            break;
        }
    }
    let mut state = state.ok_or_else(|| {
        Error::Domain(format!(
            "chain {chain}: no finite starting point after {MAX_INIT_ATTEMPTS} attempts"
        ))
    })?;

    let mut inverse_metric = vec![1.0; dim];
    let mut step_size = nuts::find_reasonable_step_size(target, &state, 1.0, &inverse_metric, &mut rng);
    let mut step = adaptation::StepSizeAdapter::new(step_size, cfg.target_accept);
    let mut windows = adaptation::MetricWindows::new(cfg.warmup, dim);
    let mut accepted_since_update = false;

    for iteration in 0..cfg.warmup {
        let t = nuts::transition(target, &state, step_size, &inverse_metric, cfg.max_tree_depth, &mut rng);
        state = t.state;
        accepted_since_update |= t.accept_stat > 0.0;
        step_size = step.update(t.accept_stat);
        if let Some(variance) = windows.observe(&state.q) {
            if !accepted_since_update {
                return Err(Error::AdaptationFailure {
                    chain,
                    iteration,
                    step_size,
                    log_density: state.log_density,
                });
            }
            accepted_since_update = false;
            inverse_metric = variance;
            step_size = nuts::find_reasonable_step_size(target, &state, step_size, &inverse_metric, &mut rng);
            step.restart(step_size);
        }
    }
    if cfg.warmup > 0 {
        if !accepted_since_update {
            return Err(Error::AdaptationFailure {
                chain,
                iteration: cfg.warmup - 1,
                step_size,
                log_density: state.log_density,
            });
        }
        step_size = step.final_step_size();
    }

    let mut draws = Vec::with_capacity(cfg.draws);
    let mut divergences = 0;
    let mut max_depth_hits = 0;
    let mut accept_total = 0.0;
    let mut depth_total = 0usize;
    for _ in 0..cfg.draws {
        let t = nuts::transition(target, &state, step_size, &inverse_metric, cfg.max_tree_depth, &mut rng);
        state = t.state;
        divergences += usize::from(t.divergent);
        max_depth_hits += usize::from(t.depth >= cfg.max_tree_depth);
        accept_total += t.accept_stat;
        depth_total += t.depth;
        draws.push(state.q.clone());
    }
    let n = cfg.draws as f64;
    Ok(Chain {
        draws,
        stats: ChainStats {
            step_size,
            inverse_metric,
            divergences,
            max_depth_hits,
            mean_accept_stat: accept_total / n,
            mean_tree_depth: depth_total as f64 / n,
        },
    })
}
