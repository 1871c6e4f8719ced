//! Maps between constrained parameters and unconstrained real coordinates.
//!
//! * sum-to-zero vectors keep their first `n - 1` entries free; the last is minus their sum.
//! * positive scales use `exp`.
//! * simplexes use stick-breaking with the usual `log(K - k)` offset, so the
//!   origin maps to the uniform simplex.

use crate::error::{Error, Result};

pub fn sum_to_zero(free: &[f64]) -> Vec<f64> {
    let mut v = free.to_vec();
    let total: f64 = free.iter().sum();
    v.push(-total);
    v
}

/// Chain rule from a gradient on the full vector to the free coordinates.
pub fn sum_to_zero_pullback(grad_full: &[f64], out: &mut [f64]) {
    let last = grad_full[grad_full.len() - 1];
    for (o, g) in out.iter_mut().zip(grad_full) {
        *o += g - last;
    }
}

fn softplus(a: f64) -> f64 {
    if a > 0.0 {
        a + (-a).exp().ln_1p()
    } else {
        a.exp().ln_1p()
    }
}

fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// A simplex produced by stick-breaking, with what the pullback needs.
#[derive(Clone, Debug)]
pub struct SimplexPoint {
    pub x: Vec<f64>,
    pub log_x: Vec<f64>,
    pub log_jacobian: f64,
    z: Vec<f64>,
    remaining: Vec<f64>,
}

pub fn stick_breaking(y: &[f64]) -> SimplexPoint {
    let k = y.len() + 1;
    let mut x = Vec::with_capacity(k);
    let mut log_x = Vec::with_capacity(k);
    let mut z = Vec::with_capacity(k - 1);
    let mut remaining = Vec::with_capacity(k - 1);
    let mut log_r: f64 = 0.0;
    let mut log_jacobian = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let a = yi - ((k - 1 - i) as f64).ln();
        let log_z = -softplus(-a);
        let log_1mz = -softplus(a);
        let r = log_r.exp();
        z.push(sigmoid(a));
        remaining.push(r);
        log_x.push(log_r + log_z);
        x.push((log_r + log_z).exp());
        log_jacobian += log_z + log_1mz + log_r;
        log_r += log_1mz;
    }
    log_x.push(log_r);
    x.push(log_r.exp());
    SimplexPoint {
        x,
        log_x,
        log_jacobian,
        z,
        remaining,
    }
}

pub fn stick_breaking_inverse(x: &[f64]) -> Result<Vec<f64>> {
    let k = x.len();
    if k < 2 || x.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Domain(format!(
            "stick-breaking needs a strictly positive simplex, got {x:?}"
        )));
    }
    let mut y = Vec::with_capacity(k - 1);
    for i in 0..k - 1 {
        let remaining: f64 = x[i..].iter().sum();
        let z = x[i] / remaining;
        y.push((z / (1.0 - z)).ln() + ((k - 1 - i) as f64).ln());
    }
    Ok(y)
}

/// Adds `d/dy [f(x(y)) + log|J(y)|]` to `out`, given `grad_x = df/dx`.
pub fn stick_breaking_pullback(point: &SimplexPoint, grad_x: &[f64], out: &mut [f64]) {
    let k = point.x.len();
    let mut g_r = grad_x[k - 1];
    for i in (0..k - 1).rev() {
        let z = point.z[i];
        let r = point.remaining[i];
        out[i] += (grad_x[i] - g_r) * r * z * (1.0 - z) + (1.0 - 2.0 * z);
        g_r = grad_x[i] * z + g_r * (1.0 - z) + 1.0 / r;
    }
}
