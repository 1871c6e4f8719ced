//! Unnormalised log posterior of the model over an unconstrained parameterisation.
//!
//! The likelihood follows the DAG factorisation: a Gaussian term for every
//! initial resistance, a Gaussian term for every later measurement given `y0`,
//! and, for observational (NS) data, categorical terms for the configuration
//! factors. Design variables of an accelerated experiment contribute nothing.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::density::{dirichlet_lpdf, half_student_t_lpdf, normal_lpdf, student_t_lpdf, LN_2PI};
use crate::error::{Error, Result};
use crate::sampler::LogDensity;
use crate::scm::{
    Cardinalities, Configuration, DeviceRecord, FixedConstants, ModelParams, ProbabilityTables,
    Regime, HUMIDITY_LEVELS,
};
use crate::transform::{
    stick_breaking, stick_breaking_inverse, stick_breaking_pullback, sum_to_zero,
    sum_to_zero_pullback, SimplexPoint,
};

/// Hyperparameters of the elicited priors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorConfig {
    /// Degrees of freedom shared by every Student prior.
    pub df: f64,
    pub mu0_location: f64,
    pub mu0_scale: f64,
    /// Scale of the `beta1`, `beta2` priors.
    pub coefficient_scale: f64,
    /// Scale of the priors on the free coordinates of every `alpha` and `delta` vector.
    pub effect_scale: f64,
    /// Scale of the half-Student priors on `sigma0` and `sigmaY`.
    pub sigma_scale: f64,
    pub dirichlet_concentration: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            df: 3.0,
            mu0_location: 1000.0,
            mu0_scale: 1000.0,
            coefficient_scale: 50.0,
            effect_scale: 25.0,
            sigma_scale: 2.5,
            dirichlet_concentration: 1.0,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("df", self.df),
            ("mu0_scale", self.mu0_scale),
            ("coefficient_scale", self.coefficient_scale),
            ("effect_scale", self.effect_scale),
            ("sigma_scale", self.sigma_scale),
            ("dirichlet_concentration", self.dirichlet_concentration),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("prior {name} must be positive, got {v}")));
            }
        }
        if !self.mu0_location.is_finite() {
            return Err(Error::Config("prior mu0_location must be finite".into()));
        }
        Ok(())
    }
}

/// What is being fitted: regime, factor sizes, priors and the known constants.
///
/// Probability tables are estimated exactly when the data are observational (NS).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    pub regime: Regime,
    #[serde(default)]
    pub cardinalities: Cardinalities,
    #[serde(default)]
    pub priors: PriorConfig,
    #[serde(default)]
    pub constants: FixedConstants,
}

impl FitSpec {
    pub fn new(regime: Regime) -> Self {
        FitSpec {
            regime,
            cardinalities: Cardinalities::default(),
            priors: PriorConfig::default(),
            constants: FixedConstants::default(),
        }
    }

    pub fn tables_active(&self) -> bool {
        self.regime == Regime::NoStress
    }

    pub fn validate(&self) -> Result<()> {
        self.cardinalities.validate()?;
        self.priors.validate()?;
        self.constants.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Factor {
    Surface,
    Component,
    Pins,
    Humidity,
}

impl Factor {
    fn suffix(self) -> &'static str {
        match self {
            Factor::Surface => "S",
            Factor::Component => "T",
            Factor::Pins => "P",
            Factor::Humidity => "H",
        }
    }
}

/// Storage location of one parameter block inside [`ModelParams`].
#[derive(Clone, Copy, Debug)]
enum Slot {
    Mu0,
    Beta1,
    Beta2,
    Sigma0,
    SigmaY,
    Alpha(Factor),
    Delta1(Factor),
    Delta2(Factor),
    PiH,
    PiP,
    PiS(usize),
    PiT(usize),
}

impl Slot {
    fn name(self) -> String {
        match self {
            Slot::Mu0 => "mu0".into(),
            Slot::Beta1 => "beta1".into(),
            Slot::Beta2 => "beta2".into(),
            Slot::Sigma0 => "sigma0".into(),
            Slot::SigmaY => "sigmaY".into(),
            Slot::Alpha(f) => format!("alpha_{}", f.suffix()),
            Slot::Delta1(f) => format!("delta1_{}", f.suffix()),
            Slot::Delta2(f) => format!("delta2_{}", f.suffix()),
            Slot::PiH => "pi_H".into(),
            Slot::PiP => "pi_P".into(),
            Slot::PiS(h) => format!("pi_S[{}]", h + 1),
            Slot::PiT(h) => format!("pi_T[{}]", h + 1),
        }
    }

    fn scalar(self, theta: &ModelParams) -> f64 {
        match self {
            Slot::Mu0 => theta.mu0,
            Slot::Beta1 => theta.beta1,
            Slot::Beta2 => theta.beta2,
            Slot::Sigma0 => theta.sigma0,
            Slot::SigmaY => theta.sigma_y,
            _ => unreachable!("{self:?} is not a scalar"),
        }
    }

    fn scalar_mut(self, theta: &mut ModelParams) -> &mut f64 {
        match self {
            Slot::Mu0 => &mut theta.mu0,
            Slot::Beta1 => &mut theta.beta1,
            Slot::Beta2 => &mut theta.beta2,
            Slot::Sigma0 => &mut theta.sigma0,
            Slot::SigmaY => &mut theta.sigma_y,
            _ => unreachable!("{self:?} is not a scalar"),
        }
    }

    fn vector(self, theta: &ModelParams) -> &[f64] {
        let tables = || theta.tables.as_ref().expect("layout requires probability tables");
        match self {
            Slot::Alpha(Factor::Surface) => &theta.alpha_s,
            Slot::Alpha(Factor::Component) => &theta.alpha_t,
            Slot::Alpha(Factor::Pins) => &theta.alpha_p,
            Slot::Delta1(Factor::Surface) => &theta.delta1_s,
            Slot::Delta1(Factor::Component) => &theta.delta1_t,
            Slot::Delta1(Factor::Pins) => &theta.delta1_p,
            Slot::Delta1(Factor::Humidity) => &theta.delta1_h,
            Slot::Delta2(Factor::Surface) => &theta.delta2_s,
            Slot::Delta2(Factor::Component) => &theta.delta2_t,
            Slot::Delta2(Factor::Pins) => &theta.delta2_p,
            Slot::Delta2(Factor::Humidity) => &theta.delta2_h,
            Slot::PiH => &tables().humidity,
            Slot::PiP => &tables().pins,
            Slot::PiS(h) => &tables().surface[h],
            Slot::PiT(h) => &tables().component[h],
            _ => unreachable!("{self:?} is not a vector"),
        }
    }

    fn vector_mut(self, theta: &mut ModelParams) -> &mut Vec<f64> {
        if matches!(self, Slot::PiH | Slot::PiP | Slot::PiS(_) | Slot::PiT(_)) {
            let tables = theta
                .tables
                .as_mut()
                .expect("layout requires probability tables");
            return match self {
                Slot::PiH => &mut tables.humidity,
                Slot::PiP => &mut tables.pins,
                Slot::PiS(h) => &mut tables.surface[h],
                Slot::PiT(h) => &mut tables.component[h],
                _ => unreachable!(),
            };
        }
        match self {
            Slot::Alpha(Factor::Surface) => &mut theta.alpha_s,
            Slot::Alpha(Factor::Component) => &mut theta.alpha_t,
            Slot::Alpha(Factor::Pins) => &mut theta.alpha_p,
            Slot::Delta1(Factor::Surface) => &mut theta.delta1_s,
            Slot::Delta1(Factor::Component) => &mut theta.delta1_t,
            Slot::Delta1(Factor::Pins) => &mut theta.delta1_p,
            Slot::Delta1(Factor::Humidity) => &mut theta.delta1_h,
            Slot::Delta2(Factor::Surface) => &mut theta.delta2_s,
            Slot::Delta2(Factor::Component) => &mut theta.delta2_t,
            Slot::Delta2(Factor::Pins) => &mut theta.delta2_p,
            Slot::Delta2(Factor::Humidity) => &mut theta.delta2_h,
            _ => unreachable!("{self:?} is not a vector"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Real,
    SumToZero,
    Positive,
    Simplex,
}

#[derive(Clone, Debug)]
struct Block {
    slot: Slot,
    kind: Kind,
    offset: usize,
    /// Number of unconstrained coordinates.
    len: usize,
}

/// Named arrangement of the unconstrained coordinates.
///
/// Order: `mu0`, free coordinates of `alpha_S/T/P`, `beta1`, free coordinates
/// of `delta1_S/T/P/H`, `beta2`, free coordinates of `delta2_S/T/P/H`,
/// `log sigma0`, `log sigmaY`, then (NS only) stick-breaking coordinates of
/// `pi_H`, `pi_P`, each row of `pi_S` and each row of `pi_T`.
#[derive(Clone, Debug)]
pub struct Layout {
    card: Cardinalities,
    tables: bool,
    blocks: Vec<Block>,
    dim: usize,
}

/// A constrained point together with the pieces needed for its gradient.
#[derive(Clone, Debug)]
pub struct Constrained {
    pub theta: ModelParams,
    pub log_jacobian: f64,
    simplexes: Vec<SimplexPoint>,
}

impl Layout {
    pub fn new(card: Cardinalities, tables: bool) -> Self {
        let factors = [Factor::Surface, Factor::Component, Factor::Pins];
        let size = |f: Factor| match f {
            Factor::Surface => card.surface,
            Factor::Component => card.component,
            Factor::Pins => card.pins,
            Factor::Humidity => HUMIDITY_LEVELS,
        };
        let mut spec: Vec<(Slot, Kind, usize)> = vec![(Slot::Mu0, Kind::Real, 1)];
        for f in factors {
            spec.push((Slot::Alpha(f), Kind::SumToZero, size(f) - 1));
        }
        spec.push((Slot::Beta1, Kind::Real, 1));
        for f in factors.into_iter().chain([Factor::Humidity]) {
            spec.push((Slot::Delta1(f), Kind::SumToZero, size(f) - 1));
        }
        spec.push((Slot::Beta2, Kind::Real, 1));
        for f in factors.into_iter().chain([Factor::Humidity]) {
            spec.push((Slot::Delta2(f), Kind::SumToZero, size(f) - 1));
        }
        spec.push((Slot::Sigma0, Kind::Positive, 1));
        spec.push((Slot::SigmaY, Kind::Positive, 1));
        if tables {
            spec.push((Slot::PiH, Kind::Simplex, HUMIDITY_LEVELS - 1));
            spec.push((Slot::PiP, Kind::Simplex, card.pins - 1));
            for h in 0..HUMIDITY_LEVELS {
                spec.push((Slot::PiS(h), Kind::Simplex, card.surface - 1));
            }
            for h in 0..HUMIDITY_LEVELS {
                spec.push((Slot::PiT(h), Kind::Simplex, card.component - 1));
            }
        }
        let mut offset = 0;
        let blocks = spec
            .into_iter()
            .map(|(slot, kind, len)| {
                let b = Block {
                    slot,
                    kind,
                    offset,
                    len,
                };
                offset += len;
                b
            })
            .collect();
        Layout {
            card,
            tables,
            blocks,
            dim: offset,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cardinalities(&self) -> Cardinalities {
        self.card
    }

    pub fn has_tables(&self) -> bool {
        self.tables
    }

    /// Index of `mu0` in the unconstrained vector.
    pub fn mu0_index(&self) -> usize {
        0
    }

    pub fn coordinate_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.dim);
        for b in &self.blocks {
            let base = b.slot.name();
            match b.kind {
                Kind::Real => names.push(base),
                Kind::Positive => names.push(format!("log_{base}")),
                Kind::SumToZero => names.extend((1..=b.len).map(|i| format!("{base}[{i}]"))),
                Kind::Simplex => {
                    names.extend((1..=b.len).map(|i| format!("{base}.stick[{i}]")))
                }
            }
        }
        names
    }

    /// A parameter set of the right shape with every entry zero.
    pub fn zeroed(&self) -> ModelParams {
        let c = &self.card;
        ModelParams {
            mu0: 0.0,
            alpha_s: vec![0.0; c.surface],
            alpha_t: vec![0.0; c.component],
            alpha_p: vec![0.0; c.pins],
            beta1: 0.0,
            delta1_s: vec![0.0; c.surface],
            delta1_t: vec![0.0; c.component],
            delta1_p: vec![0.0; c.pins],
            delta1_h: vec![0.0; HUMIDITY_LEVELS],
            beta2: 0.0,
            delta2_s: vec![0.0; c.surface],
            delta2_t: vec![0.0; c.component],
            delta2_p: vec![0.0; c.pins],
            delta2_h: vec![0.0; HUMIDITY_LEVELS],
            sigma0: 0.0,
            sigma_y: 0.0,
            tables: self.tables.then(|| ProbabilityTables {
                humidity: vec![0.0; HUMIDITY_LEVELS],
                pins: vec![0.0; c.pins],
                surface: vec![vec![0.0; c.surface]; HUMIDITY_LEVELS],
                component: vec![vec![0.0; c.component]; HUMIDITY_LEVELS],
            }),
        }
    }

    pub fn constrain(&self, v: &[f64]) -> Result<Constrained> {
        if v.len() != self.dim {
            return Err(Error::Domain(format!(
                "unconstrained vector has {} coordinates, layout needs {}",
                v.len(),
                self.dim
            )));
        }
        let mut theta = self.zeroed();
        let mut log_jacobian = 0.0;
        let mut simplexes = Vec::new();
        for b in &self.blocks {
            let y = &v[b.offset..b.offset + b.len];
            match b.kind {
                Kind::Real => *b.slot.scalar_mut(&mut theta) = y[0],
                Kind::Positive => {
                    *b.slot.scalar_mut(&mut theta) = y[0].exp();
                    log_jacobian += y[0];
                }
                Kind::SumToZero => *b.slot.vector_mut(&mut theta) = sum_to_zero(y),
                Kind::Simplex => {
                    let p = stick_breaking(y);
                    log_jacobian += p.log_jacobian;
                    b.slot.vector_mut(&mut theta).clone_from(&p.x);
                    simplexes.push(p);
                }
            }
        }
        Ok(Constrained {
            theta,
            log_jacobian,
            simplexes,
        })
    }

    pub fn unconstrain(&self, theta: &ModelParams) -> Result<Vec<f64>> {
        theta.validate()?;
        if theta.cardinalities() != self.card {
            return Err(Error::InvalidParams(format!(
                "parameters have cardinalities {:?}, layout expects {:?}",
                theta.cardinalities(),
                self.card
            )));
        }
        if self.tables && theta.tables.is_none() {
            return Err(Error::InvalidParams("probability tables are required".into()));
        }
        let mut v = vec![0.0; self.dim];
        for b in &self.blocks {
            let out = &mut v[b.offset..b.offset + b.len];
            match b.kind {
                Kind::Real => out[0] = b.slot.scalar(theta),
                Kind::Positive => out[0] = b.slot.scalar(theta).ln(),
                Kind::SumToZero => out.copy_from_slice(&b.slot.vector(theta)[..b.len]),
                Kind::Simplex => out.copy_from_slice(&stick_breaking_inverse(b.slot.vector(theta))?),
            }
        }
        Ok(v)
    }

    /// Gradient in the unconstrained coordinates of `f(theta) + log|J|`, given `df/dtheta`.
    fn pullback(&self, point: &Constrained, grad: &ModelParams, out: &mut [f64]) {
        out.iter_mut().for_each(|g| *g = 0.0);
        let mut simplexes = point.simplexes.iter();
        for b in &self.blocks {
            let o = &mut out[b.offset..b.offset + b.len];
            match b.kind {
                Kind::Real => o[0] = b.slot.scalar(grad),
                Kind::Positive => {
                    o[0] = b.slot.scalar(grad) * b.slot.scalar(&point.theta) + 1.0
                }
                Kind::SumToZero => sum_to_zero_pullback(b.slot.vector(grad), o),
                Kind::Simplex => {
                    let p = simplexes.next().expect("one simplex point per simplex block");
                    stick_breaking_pullback(p, b.slot.vector(grad), o);
                }
            }
        }
    }
}

fn check_scales(theta: &ModelParams) -> Result<()> {
    if theta.to_flat().iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("parameter vector".into()));
    }
    if !(theta.sigma0 > 0.0 && theta.sigma_y > 0.0) {
        return Err(Error::Domain(format!(
            "noise scales must be positive, got sigma0={} sigmaY={}",
            theta.sigma0, theta.sigma_y
        )));
    }
    Ok(())
}

fn categorical_log_terms(tables: &ProbabilityTables, cfg: &Configuration) -> f64 {
    let h = cfg.humidity.index();
    tables.humidity[h].ln()
        + tables.pins[cfg.pins - 1].ln()
        + tables.surface[h][cfg.surface - 1].ln()
        + tables.component[h][cfg.component - 1].ln()
}

/// Log-likelihood of `data` evaluated device by device.
///
/// Does not require the effect vectors to sum to zero, so reparameterisations
/// that leave the mean structure unchanged can be compared directly.
pub fn log_likelihood(
    theta: &ModelParams,
    data: &[DeviceRecord],
    regime: Regime,
    c: &FixedConstants,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::data("dataset is empty"));
    }
    check_scales(theta)?;
    let tables = match regime {
        Regime::NoStress => Some(theta.tables()?),
        Regime::AcceleratedStress => None,
    };
    let mut lp = 0.0;
    for rec in data {
        if rec.regime != regime {
            return Err(Error::data(format!(
                "device {} was recorded under {} but the likelihood is for {regime}",
                rec.id, rec.regime
            )));
        }
        let y0 = rec.y0()?;
        if !y0.is_finite() {
            return Err(Error::NonFinite(format!("initial resistance of {}", rec.id)));
        }
        lp += normal_lpdf(y0, theta.mean_y0(&rec.config)?, theta.sigma0).0;
        for m in &rec.measurements[1..] {
            if !m.resistance.is_finite() {
                return Err(Error::NonFinite(format!("resistance of {}", rec.id)));
            }
            let mean = theta.mean_yt(y0, &rec.config, m.time, regime, c)?;
            lp += normal_lpdf(m.resistance, mean, theta.sigma_y).0;
        }
        if let Some(t) = tables {
            lp += categorical_log_terms(t, &rec.config);
        }
    }
    Ok(lp)
}

/// Log prior density, accumulating `d/dtheta` into `grad` when given.
fn prior_terms(theta: &ModelParams, spec: &FitSpec, mut grad: Option<&mut ModelParams>) -> f64 {
    let p = &spec.priors;
    let mut lp = 0.0;

    let (l, d) = student_t_lpdf(theta.mu0, p.df, p.mu0_location, p.mu0_scale);
    lp += l;
    if let Some(g) = grad.as_deref_mut() {
        g.mu0 += d;
    }
    for slot in [Slot::Beta1, Slot::Beta2] {
        let (l, d) = student_t_lpdf(slot.scalar(theta), p.df, 0.0, p.coefficient_scale);
        lp += l;
        if let Some(g) = grad.as_deref_mut() {
            *slot.scalar_mut(g) += d;
        }
    }
    for slot in [Slot::Sigma0, Slot::SigmaY] {
        let (l, d) = half_student_t_lpdf(slot.scalar(theta), p.df, p.sigma_scale);
        lp += l;
        if let Some(g) = grad.as_deref_mut() {
            *slot.scalar_mut(g) += d;
        }
    }
    let effects = [
        Slot::Alpha(Factor::Surface),
        Slot::Alpha(Factor::Component),
        Slot::Alpha(Factor::Pins),
        Slot::Delta1(Factor::Surface),
        Slot::Delta1(Factor::Component),
        Slot::Delta1(Factor::Pins),
        Slot::Delta1(Factor::Humidity),
        Slot::Delta2(Factor::Surface),
        Slot::Delta2(Factor::Component),
        Slot::Delta2(Factor::Pins),
        Slot::Delta2(Factor::Humidity),
    ];
    for slot in effects {
        let v = slot.vector(theta);
        for (i, &x) in v[..v.len() - 1].iter().enumerate() {
            let (l, d) = student_t_lpdf(x, p.df, 0.0, p.effect_scale);
            lp += l;
            if let Some(g) = grad.as_deref_mut() {
                slot.vector_mut(g)[i] += d;
            }
        }
    }
    if spec.tables_active() {
        let mut rows = vec![Slot::PiH, Slot::PiP];
        rows.extend((0..HUMIDITY_LEVELS).map(Slot::PiS));
        rows.extend((0..HUMIDITY_LEVELS).map(Slot::PiT));
        for slot in rows {
            let x = slot.vector(theta);
            let log_x: Vec<f64> = x.iter().map(|v| v.ln()).collect();
            let mut gx = vec![0.0; x.len()];
            lp += dirichlet_lpdf(x, &log_x, p.dirichlet_concentration, &mut gx);
            if let Some(g) = grad.as_deref_mut() {
                for (o, d) in slot.vector_mut(g).iter_mut().zip(gx) {
                    *o += d;
                }
            }
        }
    }
    lp
}

/// Log prior density of `theta` under `spec`.
pub fn log_prior(theta: &ModelParams, spec: &FitSpec) -> Result<f64> {
    check_scales(theta)?;
    if theta.cardinalities() != spec.cardinalities {
        return Err(Error::InvalidParams(format!(
            "parameters have cardinalities {:?}, fit expects {:?}",
            theta.cardinalities(),
            spec.cardinalities
        )));
    }
    if spec.tables_active() {
        theta.tables()?.validate(&spec.cardinalities)?;
    }
    Ok(prior_terms(theta, spec, None))
}

#[derive(Clone, Copy, Debug, Default)]
struct CellStats {
    devices: f64,
    mean0: f64,
    /// Sum of squared deviations of `y0` from `mean0`.
    ss0: f64,
    /// Number of later measurements.
    later: f64,
    // sums over later measurements of products of d = y_t - y0, x = g(w), z = cubic basis
    dd: f64,
    dx: f64,
    dz: f64,
    xx: f64,
    xz: f64,
    zz: f64,
}

/// Per-configuration sufficient statistics of a dataset. The likelihood
/// depends on the data only through these.
#[derive(Clone, Debug)]
pub struct SufficientStats {
    tables: bool,
    cells: Vec<(Configuration, CellStats)>,
    devices: usize,
    y0_mean: f64,
}

impl SufficientStats {
    pub fn new(data: &[DeviceRecord], spec: &FitSpec) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::data("dataset is empty"));
        }
        let card = spec.cardinalities;
        let c = &spec.constants;
        let mut cells = vec![CellStats::default(); card.cells()];
        let mut y0_sum = 0.0;
        for rec in data {
            rec.validate()?;
            rec.config.check(&card)?;
            if rec.regime != spec.regime {
                return Err(Error::data(format!(
                    "device {} was recorded under {} but the fit is for {}",
                    rec.id, rec.regime, spec.regime
                )));
            }
            let y0 = rec.y0()?;
            y0_sum += y0;
            let cell = &mut cells[rec.config.cell_index(&card)];
            cell.devices += 1.0;
            let delta = y0 - cell.mean0;
            cell.mean0 += delta / cell.devices;
            cell.ss0 += delta * (y0 - cell.mean0);
            for m in &rec.measurements[1..] {
                let d = m.resistance - y0;
                let x = c.time_transform(m.time, spec.regime)?;
                let z = c.cubic_basis(m.time, spec.regime)?;
                cell.later += 1.0;
                cell.dd += d * d;
                cell.dx += d * x;
                cell.dz += d * z;
                cell.xx += x * x;
                cell.xz += x * z;
                cell.zz += z * z;
            }
        }
        let cells = card
            .configurations()
            .zip(cells)
            .filter(|(_, s)| s.devices > 0.0)
            .collect();
        Ok(SufficientStats {
            tables: spec.tables_active(),
            cells,
            devices: data.len(),
            y0_mean: y0_sum / data.len() as f64,
        })
    }

    pub fn devices(&self) -> usize {
        self.devices
    }

    /// Mean initial resistance over all devices.
    pub fn y0_mean(&self) -> f64 {
        self.y0_mean
    }

    /// Log-likelihood, accumulating `d/dtheta` into `grad` when given.
    ///
    /// `theta` must have the shape of the fit; finiteness is the caller's concern.
    pub fn log_likelihood(&self, theta: &ModelParams, mut grad: Option<&mut ModelParams>) -> f64 {
        let half_ln_2pi = 0.5 * LN_2PI;
        let (s0, sy) = (theta.sigma0, theta.sigma_y);
        let (ln_s0, ln_sy) = (s0.ln(), sy.ln());
        let (v0, vy) = (s0 * s0, sy * sy);
        let tables = if self.tables { theta.tables.as_ref() } else { None };
        let mut lp = 0.0;
        for (cfg, st) in &self.cells {
            let (si, ti, pi, hi) = (
                cfg.surface - 1,
                cfg.component - 1,
                cfg.pins - 1,
                cfg.humidity.index(),
            );
            let m0 = theta.mu0 + theta.alpha_s[si] + theta.alpha_t[ti] + theta.alpha_p[pi];
            let dev = st.mean0 - m0;
            let r0 = st.ss0 + st.devices * dev * dev;
            lp -= st.devices * (half_ln_2pi + ln_s0) + r0 / (2.0 * v0);

            let s = theta.beta1
                + theta.delta1_s[si]
                + theta.delta1_t[ti]
                + theta.delta1_p[pi]
                + theta.delta1_h[hi];
            let k = theta.beta2
                + theta.delta2_s[si]
                + theta.delta2_t[ti]
                + theta.delta2_p[pi]
                + theta.delta2_h[hi];
            let q = st.dd - 2.0 * s * st.dx - 2.0 * k * st.dz
                + s * s * st.xx
                + 2.0 * s * k * st.xz
                + k * k * st.zz;
            lp -= st.later * (half_ln_2pi + ln_sy) + q / (2.0 * vy);

            if let Some(t) = tables {
                lp += st.devices
                    * (t.humidity[hi].ln()
                        + t.pins[pi].ln()
                        + t.surface[hi][si].ln()
                        + t.component[hi][ti].ln());
            }

            if let Some(g) = grad.as_deref_mut() {
                let g_m0 = st.devices * dev / v0;
                g.mu0 += g_m0;
                g.alpha_s[si] += g_m0;
                g.alpha_t[ti] += g_m0;
                g.alpha_p[pi] += g_m0;
                g.sigma0 += -st.devices / s0 + r0 / (v0 * s0);

                let g_s = (st.dx - s * st.xx - k * st.xz) / vy;
                g.beta1 += g_s;
                g.delta1_s[si] += g_s;
                g.delta1_t[ti] += g_s;
                g.delta1_p[pi] += g_s;
                g.delta1_h[hi] += g_s;
                let g_k = (st.dz - s * st.xz - k * st.zz) / vy;
                g.beta2 += g_k;
                g.delta2_s[si] += g_k;
                g.delta2_t[ti] += g_k;
                g.delta2_p[pi] += g_k;
                g.delta2_h[hi] += g_k;
                g.sigma_y += -st.later / sy + q / (vy * sy);

                if let (Some(t), Some(gt)) = (tables, g.tables.as_mut()) {
                    gt.humidity[hi] += st.devices / t.humidity[hi];
                    gt.pins[pi] += st.devices / t.pins[pi];
                    gt.surface[hi][si] += st.devices / t.surface[hi][si];
                    gt.component[hi][ti] += st.devices / t.component[hi][ti];
                }
            }
        }
        lp
    }
}

/// The log posterior of a fit as a density on unconstrained coordinates.
#[derive(Clone, Debug)]
pub struct PosteriorTarget {
    spec: FitSpec,
    layout: Layout,
    stats: SufficientStats,
}

impl PosteriorTarget {
    pub fn new(data: &[DeviceRecord], spec: FitSpec) -> Result<Self> {
        spec.validate()?;
        let stats = SufficientStats::new(data, &spec)?;
        let layout = Layout::new(spec.cardinalities, spec.tables_active());
        Ok(PosteriorTarget {
            spec,
            layout,
            stats,
        })
    }

    pub fn spec(&self) -> &FitSpec {
        &self.spec
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn stats(&self) -> &SufficientStats {
        &self.stats
    }

    fn evaluate(&self, v: &[f64], grad: Option<&mut [f64]>) -> f64 {
        if v.iter().any(|x| !x.is_finite()) {
            return f64::NEG_INFINITY;
        }
        let Ok(point) = self.layout.constrain(v) else {
            return f64::NEG_INFINITY;
        };
        let theta = &point.theta;
        if !(theta.sigma0 > 0.0 && theta.sigma0.is_finite())
            || !(theta.sigma_y > 0.0 && theta.sigma_y.is_finite())
        {
            return f64::NEG_INFINITY;
        }
        let lp = match grad {
            None => {
                prior_terms(theta, &self.spec, None)
                    + self.stats.log_likelihood(theta, None)
                    + point.log_jacobian
            }
            Some(out) => {
                let mut g = self.layout.zeroed();
                let lp = prior_terms(theta, &self.spec, Some(&mut g))
                    + self.stats.log_likelihood(theta, Some(&mut g))
                    + point.log_jacobian;
                self.layout.pullback(&point, &g, out);
                lp
            }
        };
        if lp.is_finite() {
            lp
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn log_posterior(&self, v: &[f64]) -> f64 {
        self.evaluate(v, None)
    }

    /// Log posterior and its gradient, written into `grad`.
    pub fn log_posterior_grad(&self, v: &[f64], grad: &mut [f64]) -> f64 {
        self.evaluate(v, Some(grad))
    }
}

impl LogDensity for PosteriorTarget {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn log_density_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.log_posterior_grad(x, grad)
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.log_posterior(x)
    }

    /// Uniform on `[-2, 2]` except `mu0`, which starts at the sample mean of `y0`.
    fn initial_point(&self, rng: &mut dyn rand::RngCore) -> Vec<f64> {
        let mut v: Vec<f64> = (0..self.dim()).map(|_| rng.random_range(-2.0..=2.0)).collect();
        v[self.layout.mu0_index()] = self.stats.y0_mean();
        v
    }
}
