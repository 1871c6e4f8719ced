//! Log densities used by the likelihood and the priors, each paired with its
//! derivative in the random variable.

use statrs::function::gamma::ln_gamma;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// `log N(x | mean, sd^2)` and its derivative in `x`.
pub fn normal_lpdf(x: f64, mean: f64, sd: f64) -> (f64, f64) {
    let r = (x - mean) / sd;
    (-0.5 * LN_2PI - sd.ln() - 0.5 * r * r, -r / sd)
}

/// Location-scale Student-t log density and its derivative in `x`.
pub fn student_t_lpdf(x: f64, df: f64, loc: f64, scale: f64) -> (f64, f64) {
    let z = (x - loc) / scale;
    let norm = ln_gamma(0.5 * (df + 1.0))
        - ln_gamma(0.5 * df)
        - 0.5 * (df * std::f64::consts::PI).ln()
        - scale.ln();
    let lp = norm - 0.5 * (df + 1.0) * (z * z / df).ln_1p();
    let d = -(df + 1.0) * z / (scale * (df + z * z));
    (lp, d)
}

/// Student-t with location zero truncated to the positive half-line.
pub fn half_student_t_lpdf(x: f64, df: f64, scale: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (f64::NEG_INFINITY, 0.0);
    }
    let (lp, d) = student_t_lpdf(x, df, 0.0, scale);
    (lp + std::f64::consts::LN_2, d)
}

/// Symmetric Dirichlet log density evaluated from `log x`; also returns
/// `d/dx_k = (concentration - 1) / x_k` through `grad_x`.
pub fn dirichlet_lpdf(x: &[f64], log_x: &[f64], concentration: f64, grad_x: &mut [f64]) -> f64 {
    let k = x.len() as f64;
    let mut lp = ln_gamma(concentration * k) - k * ln_gamma(concentration);
    if concentration != 1.0 {
        for ((lx, &xi), g) in log_x.iter().zip(x).zip(grad_x.iter_mut()) {
            lp += (concentration - 1.0) * lx;
            *g += (concentration - 1.0) / xi;
        }
    }
    lp
}
