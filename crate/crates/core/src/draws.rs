//! Posterior draws of the model parameters and their diagnostics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::posterior::FitSpec;
use crate::sampler::{ChainStats, Diagnostic, SamplerConfig, Summary};
use crate::scm::{FixedConstants, ModelParams, Regime};

/// Largest R-hat of a converged fit.
pub const RHAT_THRESHOLD: f64 = 1.01;
/// Smallest bulk ESS of a converged fit.
pub const ESS_THRESHOLD: f64 = 400.0;

/// Where a set of draws came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub spec: FitSpec,
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub chains: Vec<ChainStats>,
}

/// `G x dim` constrained parameter draws in [`ModelParams::to_flat`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorDraws {
    names: Vec<String>,
    chain_lengths: Vec<usize>,
    rows: Vec<Vec<f64>>,
    provenance: Provenance,
}

impl PosteriorDraws {
    /// Checks shapes and that every row is a valid parameter set.
    pub fn new(rows: Vec<Vec<f64>>, chain_lengths: Vec<usize>, provenance: Provenance) -> Result<Self> {
        let spec = &provenance.spec;
        let names = ModelParams::param_names(&spec.cardinalities, spec.tables_active());
        if chain_lengths.iter().sum::<usize>() != rows.len() || chain_lengths.contains(&0) {
            return Err(Error::data(format!(
                "chain lengths {chain_lengths:?} do not partition {} draws",
                rows.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != names.len() {
                return Err(Error::data(format!(
                    "draw {i} has {} values, expected {}",
                    row.len(),
                    names.len()
                )));
            }
            ModelParams::from_flat(&spec.cardinalities, spec.tables_active(), row)?
                .validate()
                .map_err(|e| Error::data(format!("draw {i}: {e}")))?;
        }
        Ok(PosteriorDraws {
            names,
            chain_lengths,
            rows,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn chain_lengths(&self) -> &[usize] {
        &self.chain_lengths
    }

    pub fn chains(&self) -> usize {
        self.chain_lengths.len()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn regime(&self) -> Regime {
        self.provenance.spec.regime
    }

    pub fn constants(&self) -> &FixedConstants {
        &self.provenance.spec.constants
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Draw `i` as a parameter set.
    pub fn theta(&self, i: usize) -> ModelParams {
        let spec = &self.provenance.spec;
        ModelParams::from_flat(&spec.cardinalities, spec.tables_active(), &self.rows[i])
            .expect("rows are validated on construction")
    }

    pub fn thetas(&self) -> impl Iterator<Item = ModelParams> + '_ {
        (0..self.len()).map(|i| self.theta(i))
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Config(format!("no parameter named {name:?}")))
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Splits any per-draw sequence along chain boundaries.
    pub fn by_chain<'a, T>(&self, values: &'a [T]) -> Vec<&'a [T]> {
        let mut out = Vec::with_capacity(self.chains());
        let mut start = 0;
        for &n in &self.chain_lengths {
            out.push(&values[start..start + n]);
            start += n;
        }
        out
    }

    /// Split R-hat and bulk ESS of every parameter.
    pub fn diagnostics(&self) -> Result<DiagnosticsReport> {
        if self.chains() < 2 {
            return Err(Error::Config(format!(
                "diagnostics need at least 2 chains, got {}",
                self.chains()
            )));
        }
        let parameters = (0..self.names.len())
            .map(|j| {
                let col: Vec<f64> = self.rows.iter().map(|r| r[j]).collect();
                Diagnostic::compute(self.names[j].clone(), &self.by_chain(&col))
            })
            .collect();
        Ok(DiagnosticsReport::new(parameters))
    }

    /// Mean, sd and HDI of every parameter.
    pub fn summarize(&self, level: f64) -> Result<Vec<(String, Summary)>> {
        (0..self.names.len())
            .map(|j| {
                let col: Vec<f64> = self.rows.iter().map(|r| r[j]).collect();
                Ok((self.names[j].clone(), Summary::new(&col, level)?))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub parameters: Vec<Diagnostic>,
    pub max_rhat: f64,
    pub min_ess: f64,
    /// Parameters whose diagnostics are not applicable (constant draws).
    pub degenerate: Vec<String>,
    pub converged: bool,
}

impl DiagnosticsReport {
    pub fn new(parameters: Vec<Diagnostic>) -> Self {
        let max_rhat = parameters
            .iter()
            .filter_map(|d| d.rhat)
            .fold(f64::NEG_INFINITY, f64::max);
        let min_ess = parameters
            .iter()
            .filter_map(|d| d.ess)
            .fold(f64::INFINITY, f64::min);
        let degenerate = parameters
            .iter()
            .filter(|d| d.is_degenerate())
            .map(|d| d.name.clone())
            .collect();
        let converged = max_rhat <= RHAT_THRESHOLD && min_ess >= ESS_THRESHOLD;
        DiagnosticsReport {
            parameters,
            max_rhat,
            min_ess,
            degenerate,
            converged,
        }
    }

    /// Parameters that violate either threshold.
    pub fn offenders(&self) -> Vec<&Diagnostic> {
        self.parameters
            .iter()
            .filter(|d| {
                d.rhat.is_some_and(|r| r > RHAT_THRESHOLD) || d.ess.is_some_and(|e| e < ESS_THRESHOLD)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::Cardinalities;

    fn provenance(regime: Regime) -> Provenance {
        Provenance {
            spec: FitSpec::new(regime),
            sampler: SamplerConfig::default(),
            chains: vec![],
        }
    }

    #[test]
    fn rejects_invalid_rows_and_partitions() {
        let mut theta = ModelParams::reference();
        theta.tables = None;
        let row = theta.to_flat();
        let p = provenance(Regime::AcceleratedStress);
        assert!(PosteriorDraws::new(vec![row.clone(); 4], vec![2, 2], p.clone()).is_ok());
        assert!(PosteriorDraws::new(vec![row.clone(); 4], vec![3, 2], p.clone()).is_err());
        let mut bad = row.clone();
        bad[1] += 1.0;
        assert!(PosteriorDraws::new(vec![row.clone(), bad], vec![2], p.clone()).is_err());
        // NS draws need tables
        assert!(PosteriorDraws::new(vec![row; 2], vec![2], provenance(Regime::NoStress)).is_err());
    }

    #[test]
    fn columns_and_chains() {
        let theta = ModelParams::reference();
        let mut rows = Vec::new();
        for i in 0..6 {
            let mut t = theta.clone();
            t.beta1 = i as f64;
            rows.push(t.to_flat());
        }
        let d = PosteriorDraws::new(rows, vec![4, 2], provenance(Regime::NoStress)).unwrap();
        assert_eq!(d.column("beta1").unwrap(), vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let col = d.column("beta1").unwrap();
        let split = d.by_chain(&col);
        assert_eq!(split[1], &[4.0, 5.0]);
        assert_eq!(d.theta(3).beta1, 3.0);
        assert!(d.column("nope").is_err());
        assert_eq!(
            d.names().len(),
            ModelParams::param_names(&Cardinalities::default(), true).len()
        );
    }

    #[test]
    fn constant_draws_are_degenerate_not_fatal() {
        let mut theta = ModelParams::reference();
        theta.tables = None;
        let rows = vec![theta.to_flat(); 200];
        let d = PosteriorDraws::new(rows, vec![100, 100], provenance(Regime::AcceleratedStress)).unwrap();
        let report = d.diagnostics().unwrap();
        assert_eq!(report.degenerate.len(), d.names().len());
        let single = PosteriorDraws::new(
            vec![theta.to_flat(); 10],
            vec![10],
            provenance(Regime::AcceleratedStress),
        )
        .unwrap();
        assert!(single.diagnostics().is_err());
    }
}
