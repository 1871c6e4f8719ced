//! Rank-normalised split R-hat and bulk effective sample size.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Convergence diagnostics of one scalar quantity. `None` marks a quantity
/// for which the diagnostic is undefined, such as a constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub name: String,
    pub rhat: Option<f64>,
    pub ess: Option<f64>,
}

impl Diagnostic {
    pub fn compute(name: impl Into<String>, chains: &[&[f64]]) -> Self {
        Diagnostic {
            name: name.into(),
            rhat: split_rhat(chains),
            ess: ess_bulk(chains),
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.rhat.is_none()
    }
}

fn split(chains: &[&[f64]]) -> Option<Vec<Vec<f64>>> {
    if chains.is_empty() {
        return None;
    }
    let half = chains.iter().map(|c| c.len()).min()? / 2;
    if half < 2 {
        return None;
    }
    let mut out = Vec::with_capacity(2 * chains.len());
    for c in chains {
        out.push(c[..half].to_vec());
        out.push(c[c.len() - half..].to_vec());
    }
    Some(out)
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // 1-based ranks, ties share their average
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Replaces every draw by the normal score of its pooled rank.
fn rank_normalise(chains: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let pooled: Vec<f64> = chains.iter().flatten().copied().collect();
    let s = pooled.len() as f64;
    let ranks = average_ranks(&pooled);
    let normal = Normal::standard();
    let mut it = ranks.into_iter();
    chains
        .iter()
        .map(|c| {
            c.iter()
                .map(|_| normal.inverse_cdf((it.next().unwrap() - 0.375) / (s + 0.25)))
                .collect()
        })
        .collect()
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

fn is_degenerate(chains: &[Vec<f64>]) -> bool {
    let first = chains[0][0];
    chains.iter().flatten().any(|v| !v.is_finite()) || chains.iter().flatten().all(|v| *v == first)
}

fn basic_rhat(chains: &[Vec<f64>]) -> Option<f64> {
    let n = chains[0].len() as f64;
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let within = mean(&chains.iter().map(|c| variance(c)).collect::<Vec<_>>());
    if !(within > 0.0) {
        return None;
    }
    let between = n * variance(&means);
    let var_plus = (n - 1.0) / n * within + between / n;
    Some((var_plus / within).sqrt())
}

/// Maximum of the rank-normalised split R-hat for location and for scale
/// (computed on the folded draws).
pub fn split_rhat(chains: &[&[f64]]) -> Option<f64> {
    let split = split(chains)?;
    if is_degenerate(&split) {
        return None;
    }
    let bulk = basic_rhat(&rank_normalise(&split))?;
    let mut pooled: Vec<f64> = split.iter().flatten().copied().collect();
    pooled.sort_by(f64::total_cmp);
    let median = super::summary::quantile_sorted(&pooled, 0.5);
    let folded: Vec<Vec<f64>> = split
        .iter()
        .map(|c| c.iter().map(|v| (v - median).abs()).collect())
        .collect();
    let tail = if is_degenerate(&folded) {
        bulk
    } else {
        basic_rhat(&rank_normalise(&folded)).unwrap_or(bulk)
    };
    Some(bulk.max(tail))
}

/// Biased autocovariance at `lag`.
fn autocovariance(x: &[f64], mean: f64, lag: usize) -> f64 {
    let n = x.len();
    (0..n - lag).map(|i| (x[i] - mean) * (x[i + lag] - mean)).sum::<f64>() / n as f64
}

fn ess(chains: &[Vec<f64>]) -> Option<f64> {
    let m = chains.len();
    let n = chains[0].len();
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let acov = |lag: usize| -> f64 {
        chains
            .iter()
            .zip(&means)
            .map(|(c, &mu)| autocovariance(c, mu, lag))
            .sum::<f64>()
            / m as f64
    };
    let nf = n as f64;
    let mean_var = acov(0) * nf / (nf - 1.0);
    let mut var_plus = mean_var * (nf - 1.0) / nf;
    if m > 1 {
        var_plus += variance(&means);
    }
    if !(var_plus > 0.0) {
        return None;
    }
    let rho = |lag: usize| 1.0 - (mean_var - acov(lag)) / var_plus;

    let mut rho_hat = vec![0.0; n];
    rho_hat[0] = 1.0;
    let mut even = 1.0;
    let mut odd = rho(1);
    rho_hat[1] = odd;
    let mut t = 0;
    while t + 4 < n && even + odd > 0.0 {
        t += 2;
        even = rho(t);
        odd = rho(t + 1);
        if even + odd >= 0.0 {
            rho_hat[t] = even;
            rho_hat[t + 1] = odd;
        }
    }
    let max_t = t;
    if even > 0.0 {
        rho_hat[max_t] = even;
    }
    // initial monotone sequence
    let mut t = 0;
    while t + 4 <= max_t {
        t += 2;
        let prev = rho_hat[t - 2] + rho_hat[t - 1];
        if rho_hat[t] + rho_hat[t + 1] > prev {
            rho_hat[t] = prev / 2.0;
            rho_hat[t + 1] = prev / 2.0;
        }
    }
    let total = (m * n) as f64;
    let tau = (-1.0 + 2.0 * rho_hat[..max_t].iter().sum::<f64>() + rho_hat[max_t])
        .max(1.0 / total.log10());
    Some(total / tau)
}

/// Bulk effective sample size: ESS of the rank-normalised split chains.
pub fn ess_bulk(chains: &[&[f64]]) -> Option<f64> {
    let split = split(chains)?;
    if is_degenerate(&split) {
        return None;
    }
    ess(&rank_normalise(&split))
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    use super::*;

    fn iid(seed: u64, chains: usize, n: usize, shift: impl Fn(usize) -> f64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..chains)
            .map(|c| (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) + shift(c)).collect())
            .collect()
    }

    fn refs(v: &[Vec<f64>]) -> Vec<&[f64]> {
        v.iter().map(|c| c.as_slice()).collect()
    }

    #[test]
    fn iid_draws_have_rhat_near_one_and_full_ess() {
        let draws = iid(1, 4, 1000, |_| 0.0);
        let r = split_rhat(&refs(&draws)).unwrap();
        assert!((0.99..=1.01).contains(&r), "{r}");
        let e = ess_bulk(&refs(&draws)).unwrap();
        assert!(e > 3000.0 && e < 5000.0, "{e}");
    }

    #[test]
    fn shifted_chains_have_large_rhat() {
        let draws = iid(2, 4, 1000, |c| if c == 0 { 2.0 } else { 0.0 });
        assert!(split_rhat(&refs(&draws)).unwrap() > 1.1);
    }

    #[test]
    fn ar1_chain_ess_matches_theory() {
        // ESS of an AR(1) with coefficient phi is n (1 - phi) / (1 + phi)
        let phi: f64 = 0.8;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let mut x = 0.0;
                (0..20_000)
                    .map(|_| {
                        let e: f64 = rng.sample(StandardNormal);
                        x = phi * x + (1.0 - phi * phi).sqrt() * e;
                        x
                    })
                    .collect()
            })
            .collect();
        let expected = 80_000.0 * (1.0 - phi) / (1.0 + phi);
        let e = ess_bulk(&refs(&chains)).unwrap();
        assert!((e / expected - 1.0).abs() < 0.15, "{e} vs {expected}");
    }

    #[test]
    fn constant_parameter_is_not_applicable() {
        let draws = vec![vec![1.5; 100]; 4];
        let d = Diagnostic::compute("c", &refs(&draws));
        assert!(d.is_degenerate());
        assert!(d.ess.is_none());
    }

    #[test]
    fn scale_difference_is_caught_by_folding() {
        let mut draws = iid(4, 4, 1000, |_| 0.0);
        draws[0].iter_mut().for_each(|v| *v *= 3.0);
        assert!(split_rhat(&refs(&draws)).unwrap() > 1.05);
    }

    #[test]
    fn ties_share_average_rank() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }
}
