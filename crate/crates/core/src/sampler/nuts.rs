//! No-U-Turn transitions with multinomial sampling along the trajectory.
//!
//! A trajectory is doubled in a random direction until the generalised
//! no-U-turn criterion fails between its ends, or between either sub-trajectory
//! and the first point of the other. Within a new sub-trajectory the
//! candidate is drawn uniformly by weight; across doublings it is biased
//! towards the newer half.

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use super::LogDensity;

const MAX_ENERGY_ERROR: f64 = 1000.0;

#[derive(Clone, Debug)]
pub(super) struct State {
    pub q: Vec<f64>,
    pub log_density: f64,
    pub grad: Vec<f64>,
}

impl State {
    pub fn new<T: LogDensity + ?Sized>(target: &T, q: Vec<f64>) -> Self {
        let mut grad = vec![0.0; q.len()];
        let log_density = target.log_density_and_gradient(&q, &mut grad);
        State { q, log_density, grad }
    }
}

/// Position plus momentum, the unit the leapfrog integrator advances.
#[derive(Clone, Debug)]
struct Phase {
    state: State,
    p: Vec<f64>,
}

pub(super) struct Transition {
    pub state: State,
    pub accept_stat: f64,
    pub depth: usize,
    pub divergent: bool,
}

fn kinetic(p: &[f64], inv_metric: &[f64]) -> f64 {
    0.5 * p.iter().zip(inv_metric).map(|(p, m)| p * p * m).sum::<f64>()
}

fn sharp(p: &[f64], inv_metric: &[f64]) -> Vec<f64> {
    p.iter().zip(inv_metric).map(|(p, m)| p * m).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn hamiltonian(z: &Phase, inv_metric: &[f64]) -> f64 {
    let h = -z.state.log_density + kinetic(&z.p, inv_metric);
    if h.is_nan() {
        f64::INFINITY
    } else {
        h
    }
}

fn sample_momentum(inv_metric: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
    inv_metric
        .iter()
        .map(|m| {
            let z: f64 = rng.sample(StandardNormal);
            z / m.sqrt()
        })
        .collect()
}

fn leapfrog<T: LogDensity + ?Sized>(target: &T, z: &mut Phase, eps: f64, inv_metric: &[f64]) {
    let n = z.p.len();
    for i in 0..n {
        z.p[i] += 0.5 * eps * z.state.grad[i];
    }
    for i in 0..n {
        z.state.q[i] += eps * inv_metric[i] * z.p[i];
    }
    z.state.log_density = target.log_density_and_gradient(&z.state.q, &mut z.state.grad);
    for i in 0..n {
        z.p[i] += 0.5 * eps * z.state.grad[i];
    }
}

/// `p_sharp_plus . rho > 0` and `p_sharp_minus . rho > 0`.
fn no_u_turn(sharp_minus: &[f64], sharp_plus: &[f64], rho: &[f64]) -> bool {
    dot(sharp_plus, rho) > 0.0 && dot(sharp_minus, rho) > 0.0
}

struct Subtree {
    proposal: State,
    log_sum_weight: f64,
    rho: Vec<f64>,
    /// Momentum at the first and last point, in integration order.
    p_first: Vec<f64>,
    p_last: Vec<f64>,
}

struct Walk<'a, T: ?Sized> {
    target: &'a T,
    inv_metric: &'a [f64],
    eps: f64,
    h0: f64,
    n_leapfrog: usize,
    sum_metro_prob: f64,
    divergent: bool,
}

impl<T: LogDensity + ?Sized> Walk<'_, T> {
    /// Extends the trajectory by `2^depth` leapfrog steps from `edge`, which
    /// is left at the new end. Returns `None` when the sub-trajectory diverges
    /// or turns back on itself.
    fn build(&mut self, depth: usize, edge: &mut Phase, rng: &mut dyn RngCore) -> Option<Subtree> {
        if depth == 0 {
            leapfrog(self.target, edge, self.eps, self.inv_metric);
            self.n_leapfrog += 1;
            let h = hamiltonian(edge, self.inv_metric);
            if h - self.h0 > MAX_ENERGY_ERROR {
                self.divergent = true;
                return None;
            }
            let log_weight = self.h0 - h;
            self.sum_metro_prob += if log_weight > 0.0 { 1.0 } else { log_weight.exp() };
            return Some(Subtree {
                proposal: edge.state.clone(),
                log_sum_weight: log_weight,
                rho: edge.p.clone(),
                p_first: edge.p.clone(),
                p_last: edge.p.clone(),
            });
        }
        let init = self.build(depth - 1, edge, rng)?;
        let fin = self.build(depth - 1, edge, rng)?;

        let log_sum_weight = log_sum_exp(init.log_sum_weight, fin.log_sum_weight);
        let take_final = fin.log_sum_weight > log_sum_weight
            || rng.random::<f64>() < (fin.log_sum_weight - log_sum_weight).exp();
        let proposal = if take_final { fin.proposal } else { init.proposal };

        let rho = add(&init.rho, &fin.rho);
        let m = self.inv_metric;
        let sharp_begin = sharp(&init.p_first, m);
        let sharp_end = sharp(&fin.p_last, m);
        let persist = no_u_turn(&sharp_begin, &sharp_end, &rho)
            && no_u_turn(&sharp_begin, &sharp(&fin.p_first, m), &add(&init.rho, &fin.p_first))
            && no_u_turn(&sharp(&init.p_last, m), &sharp_end, &add(&fin.rho, &init.p_last));
        if !persist {
            return None;
        }
        Some(Subtree {
            proposal,
            log_sum_weight,
            rho,
            p_first: init.p_first,
            p_last: fin.p_last,
        })
    }
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

pub(super) fn transition<T: LogDensity + ?Sized>(
    target: &T,
    current: &State,
    eps: f64,
    inv_metric: &[f64],
    max_depth: usize,
    rng: &mut dyn RngCore,
) -> Transition {
    let p0 = sample_momentum(inv_metric, rng);
    let start = Phase {
        state: current.clone(),
        p: p0.clone(),
    };
    let h0 = hamiltonian(&start, inv_metric);
    let mut walk = Walk {
        target,
        inv_metric,
        eps,
        h0,
        n_leapfrog: 0,
        sum_metro_prob: 0.0,
        divergent: false,
    };

    // backward end first, forward end second
    let mut ends = [start.clone(), start];
    let mut end_momenta = [p0.clone(), p0.clone()];
    let mut rho = p0;
    let mut sample = current.clone();
    let mut log_sum_weight = 0.0;
    let mut depth = 0;

    while depth < max_depth {
        let forward = rng.random::<f64>() > 0.5;
        let (dir, side) = if forward { (1.0, 1) } else { (-1.0, 0) };
        walk.eps = dir * eps;
        let Some(sub) = walk.build(depth, &mut ends[side], rng) else {
            break;
        };
        depth += 1;

        if sub.log_sum_weight > log_sum_weight
            || rng.random::<f64>() < (sub.log_sum_weight - log_sum_weight).exp()
        {
            sample = sub.proposal;
        }
        log_sum_weight = log_sum_exp(log_sum_weight, sub.log_sum_weight);

        let old_edge = end_momenta[side].clone();
        let old_far = end_momenta[1 - side].clone();
        let merged = add(&rho, &sub.rho);
        let old_rho = std::mem::replace(&mut rho, merged);
        end_momenta[side] = sub.p_last.clone();

        let m = inv_metric;
        let sharp_far = sharp(&old_far, m);
        let sharp_new_end = sharp(&sub.p_last, m);
        let persist = no_u_turn(&sharp_far, &sharp_new_end, &rho)
            && no_u_turn(&sharp_far, &sharp(&sub.p_first, m), &add(&old_rho, &sub.p_first))
            && no_u_turn(&sharp(&old_edge, m), &sharp_new_end, &add(&sub.rho, &old_edge));
        if !persist {
            break;
        }
    }

    let accept_stat = if walk.n_leapfrog == 0 {
        0.0
    } else {
        walk.sum_metro_prob / walk.n_leapfrog as f64
    };
    Transition {
        state: sample,
        accept_stat,
        depth,
        divergent: walk.divergent,
    }
}

/// Doubles or halves `eps` until one leapfrog step from `current` crosses an
/// acceptance probability of 0.8.
pub(super) fn find_reasonable_step_size<T: LogDensity + ?Sized>(
    target: &T,
    current: &State,
    eps: f64,
    inv_metric: &[f64],
    rng: &mut dyn RngCore,
) -> f64 {
    let threshold = 0.8f64.ln();
    let mut eps = eps;
    let mut direction = 0.0;
    for _ in 0..100 {
        let mut z = Phase {
            state: current.clone(),
            p: sample_momentum(inv_metric, rng),
        };
        let h0 = hamiltonian(&z, inv_metric);
        leapfrog(target, &mut z, eps, inv_metric);
        let delta = h0 - hamiltonian(&z, inv_metric);
        let up = delta > threshold;
        if direction == 0.0 {
            direction = if up { 1.0 } else { -1.0 };
        } else if (direction > 0.0) != up {
            break;
        }
        let next = if direction > 0.0 { 2.0 * eps } else { 0.5 * eps };
        if !(next > 1e-12 && next < 1e7) {
            break;
        }
        eps = next;
    }
    eps
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    struct Normal1;

    impl LogDensity for Normal1 {
        fn dim(&self) -> usize {
            1
        }

        fn log_density_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
            grad[0] = -x[0];
            -0.5 * x[0] * x[0]
        }
    }

    #[test]
    fn leapfrog_is_reversible() {
        let mut z = Phase {
            state: State::new(&Normal1, vec![0.3]),
            p: vec![1.2],
        };
        let start = z.clone();
        for _ in 0..10 {
            leapfrog(&Normal1, &mut z, 0.1, &[1.0]);
        }
        for _ in 0..10 {
            leapfrog(&Normal1, &mut z, -0.1, &[1.0]);
        }
        assert!((z.state.q[0] - start.state.q[0]).abs() < 1e-12);
        assert!((z.p[0] - start.p[0]).abs() < 1e-12);
    }

    #[test]
    fn energy_is_nearly_conserved_for_small_steps() {
        let mut z = Phase {
            state: State::new(&Normal1, vec![1.0]),
            p: vec![0.5],
        };
        let h0 = hamiltonian(&z, &[1.0]);
        for _ in 0..100 {
            leapfrog(&Normal1, &mut z, 0.01, &[1.0]);
        }
        assert!((hamiltonian(&z, &[1.0]) - h0).abs() < 1e-4);
    }

    #[test]
    fn huge_step_is_divergent() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = State::new(&Normal1, vec![1.0]);
        let mut saw_divergence = false;
        for _ in 0..20 {
            let t = transition(&Normal1, &s, 1e4, &[1.0], 10, &mut rng);
            saw_divergence |= t.divergent;
            assert!(t.accept_stat < 1e-6);
        }
        assert!(saw_divergence);
    }

    #[test]
    fn step_size_search_lands_in_a_sane_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = State::new(&Normal1, vec![0.0]);
        let eps = find_reasonable_step_size(&Normal1, &s, 1e-4, &[1.0], &mut rng);
        assert!(eps > 0.1 && eps < 10.0, "{eps}");
    }
}
