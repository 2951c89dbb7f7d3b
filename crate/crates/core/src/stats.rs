//! Distributions, cumulants and fluctuation-relation checks derived from
//! generating functions.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, FcsError, Result};
use crate::evolve::{
    generating_function_heat, generating_function_series, generating_function_work,
    generating_function_work_reversed, resolved_work, Quantity, ResolvedWork, StepControl,
};
use crate::linop::{c, max_abs, C64};
use crate::liouville::CountingField;
use crate::model::{SystemModel, Temperature};

/// Probabilities on the lattice `(offset + k)·spacing`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyDistribution {
    pub spacing: f64,
    pub offset: i64,
    pub probabilities: Vec<f64>,
}

impl EnergyDistribution {
    pub fn new(spacing: f64, offset: i64, probabilities: Vec<f64>) -> Result<Self> {
        if !(spacing > 0.0) {
            return Err(invalid("spacing", format!("must be positive, got {spacing}")));
        }
        Ok(EnergyDistribution {
            spacing,
            offset,
            probabilities,
        })
    }

    pub fn energy(&self, k: usize) -> f64 {
        (self.offset + k as i64) as f64 * self.spacing
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.probabilities.iter().enumerate().map(|(k, &p)| (self.energy(k), p))
    }

    /// Probability of the lattice point nearest to `energy`, zero off the support.
    pub fn probability_at(&self, energy: f64) -> f64 {
        let m = (energy / self.spacing).round() as i64 - self.offset;
        if m < 0 {
            return 0.0;
        }
        self.probabilities.get(m as usize).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.points().map(|(e, p)| e * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.points().map(|(e, p)| (e - mean).powi(2) * p).sum()
    }

    /// `Σ P(w) e^{−βw}`.
    pub fn exponential_average(&self, beta: f64) -> f64 {
        self.points().map(|(e, p)| p * (-beta * e).exp()).sum()
    }
}

/// Mean and variance of a transferred energy, optionally with the ratio
/// `F = tanh(βν/2)·Var/(ν·mean)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentSet {
    pub mean: f64,
    pub variance: f64,
    pub ratio: Option<f64>,
}

impl MomentSet {
    pub fn with_ratio(mut self, temperature: Temperature, nu: f64) -> Self {
        let scale = match temperature {
            Temperature::Zero => 1.0,
            Temperature::Finite(beta) => (beta * nu / 2.0).tanh(),
        };
        self.ratio = Some(scale * self.variance / (nu * self.mean));
        self
    }
}

/// Counting-field grid `u_k = −π/Δ + 2πk/(NΔ)`.
pub fn counting_grid(n: usize, spacing: f64) -> Result<Vec<f64>> {
    if n < 2 || !n.is_power_of_two() {
        return Err(FcsError::InvalidGrid(format!("size {n} is not a power of two")));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(FcsError::InvalidGrid(format!("spacing {spacing} must be positive")));
    }
    let base = -std::f64::consts::PI / spacing;
    let step = 2.0 * std::f64::consts::PI / (n as f64 * spacing);
    Ok((0..n).map(|k| base + step * k as f64).collect())
}

fn check_grid(us: &[f64], spacing: f64) -> Result<()> {
    let expected = counting_grid(us.len(), spacing)?;
    let scale = std::f64::consts::PI / spacing;
    for (k, (a, b)) in us.iter().zip(&expected).enumerate() {
        if (a - b).abs() > 1e-10 * scale {
            return Err(FcsError::InvalidGrid(format!("point {k} is {a}, expected {b}")));
        }
    }
    Ok(())
}

/// `(1/N) Σ_k G(u_k) e^{−iu_k mΔ}` for `m ∈ [−N/2, N/2)`.
fn raw_inverse(us: &[f64], values: &[C64], spacing: f64) -> Vec<C64> {
    let n = us.len() as i64;
    (-n / 2..n / 2)
        .map(|m| {
            let e = m as f64 * spacing;
            values
                .iter()
                .zip(us)
                .map(|(g, &u)| g * c(0.0, -u * e).exp())
                .sum::<C64>()
                / n as f64
        })
        .collect()
}

const RESIDUE_TOL: f64 = 1e-6;
const NEGATIVE_TOL: f64 = 1e-6;
const NORMALIZATION_TOL: f64 = 1e-6;

fn finalize(spacing: f64, offset: i64, raw: &[C64]) -> Result<EnergyDistribution> {
    let residue = raw.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if residue > RESIDUE_TOL {
        return Err(FcsError::Normalization(format!(
            "imaginary residue {residue:.3e} after inversion"
        )));
    }
    let lowest = raw.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    if lowest < -NEGATIVE_TOL {
        return Err(FcsError::Normalization(format!(
            "negative probability {lowest:.3e} after inversion"
        )));
    }
    let total: f64 = raw.iter().map(|z| z.re).sum();
    if (total - 1.0).abs() > NORMALIZATION_TOL {
        return Err(FcsError::Normalization(format!("probabilities sum to {total}")));
    }
    let clipped: Vec<f64> = raw.iter().map(|z| z.re.max(0.0)).collect();
    let norm: f64 = clipped.iter().sum();
    EnergyDistribution::new(spacing, offset, clipped.into_iter().map(|p| p / norm).collect())
}

/// Fourier inversion of a generating function sampled on [`counting_grid`].
pub fn invert_distribution(us: &[f64], values: &[C64], spacing: f64) -> Result<EnergyDistribution> {
    if us.len() != values.len() {
        return Err(FcsError::DimensionMismatch {
            expected: us.len(),
            found: values.len(),
        });
    }
    check_grid(us, spacing)?;
    let n = us.len() as i64;
    finalize(spacing, -n / 2, &raw_inverse(us, values, spacing))
}

/// Lattice and resolution settings for distribution inversion.
#[derive(Debug, Clone, Copy)]
pub struct GridSettings {
    pub size: usize,
    pub spacing: f64,
    /// Largest size reached by automatic doubling.
    pub max_size: usize,
    /// Doubling stops once both boundary bins carry less than this.
    pub boundary_tol: f64,
}

impl GridSettings {
    pub fn new(size: usize, spacing: f64) -> Self {
        GridSettings {
            size,
            spacing,
            max_size: 4096,
            boundary_tol: 1e-8,
        }
    }
}

fn boundary_weight(raw: &[C64]) -> f64 {
    match (raw.first(), raw.last()) {
        (Some(a), Some(b)) => a.norm().max(b.norm()),
        _ => 0.0,
    }
}

fn with_doubling<F>(settings: GridSettings, mut attempt: F) -> Result<EnergyDistribution>
where
    F: FnMut(&[f64]) -> Result<(EnergyDistribution, f64)>,
{
    let mut n = settings.size;
    loop {
        let us = counting_grid(n, settings.spacing)?;
        let (dist, edge) = attempt(&us)?;
        if edge < settings.boundary_tol {
            return Ok(dist);
        }
        if n >= settings.max_size {
            log::warn!("boundary bins still carry {edge:.2e} at grid size {n}");
            return Ok(dist);
        }
        n *= 2;
    }
}

/// Heat distribution `P(Q)` at time `t` by inversion of `G_Q`.
pub fn heat_distribution(
    model: &SystemModel,
    t: f64,
    settings: GridSettings,
    control: StepControl,
) -> Result<EnergyDistribution> {
    with_doubling(settings, |us| {
        let tags = model.num_counting_tags();
        let values: Vec<C64> = us
            .par_iter()
            .map(|&u| generating_function_heat(model, &CountingField::uniform(tags, c(u, 0.0)), t, control).map(|s| s.value))
            .collect::<Result<_>>()?;
        let raw = raw_inverse(us, &values, settings.spacing);
        let edge = boundary_weight(&raw);
        Ok((finalize(settings.spacing, -(us.len() as i64) / 2, &raw)?, edge))
    })
}

/// Accumulates the eigenstate-resolved heat transfers onto the work lattice:
/// the pair `(i, f)` shifts its heat distribution by `E_f − E_i`, rounded to
/// the nearest lattice point.
fn resolved_distribution(us: &[f64], samples: &[ResolvedWork], spacing: f64) -> Result<(EnergyDistribution, f64)> {
    let first = &samples[0];
    let n = us.len() as i64;
    let mut shifts = Vec::new();
    for (i, &ei) in first.initial_energies.iter().enumerate() {
        for (f, &ef) in first.final_energies.iter().enumerate() {
            shifts.push((i, f, ((ef - ei) / spacing).round() as i64));
        }
    }
    let lo = shifts.iter().map(|s| s.2).min().unwrap_or(0);
    let hi = shifts.iter().map(|s| s.2).max().unwrap_or(0);
    let offset = -n / 2 + lo;
    let mut acc = vec![C64::new(0.0, 0.0); (n + hi - lo) as usize];
    let mut edge = 0.0f64;
    for (i, f, shift) in shifts {
        let p = first.populations[i];
        if p == 0.0 {
            continue;
        }
        let values: Vec<C64> = samples.iter().map(|s| s.transfers[(f, i)]).collect();
        let raw = raw_inverse(us, &values, spacing);
        edge = edge.max(p * boundary_weight(&raw));
        for (k, z) in raw.into_iter().enumerate() {
            acc[(k as i64 + shift - lo) as usize] += z * p;
        }
    }
    Ok((finalize(spacing, offset, &acc)?, edge))
}

/// Work distribution `P(w)` at time `t` for the forward or time-reversed protocol.
///
/// Uses the eigenstate-resolved route so that level shifts of `H(0)` and
/// `H(t)` away from the lattice land in the nearest bin instead of leaking.
pub fn work_distribution(
    model: &SystemModel,
    t: f64,
    reversed: bool,
    settings: GridSettings,
    control: StepControl,
) -> Result<EnergyDistribution> {
    with_doubling(settings, |us| {
        let tags = model.num_counting_tags();
        let samples: Vec<ResolvedWork> = us
            .par_iter()
            .map(|&u| resolved_work(model, &CountingField::uniform(tags, c(u, 0.0)), t, reversed, control))
            .collect::<Result<_>>()?;
        resolved_distribution(us, &samples, settings.spacing)
    })
}

/// First two cumulants `κ₁ = −i ∂ ln G`, `κ₂ = −∂² ln G` at `u = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cumulants {
    pub first: f64,
    pub second: f64,
}

impl Cumulants {
    pub fn moments(self) -> MomentSet {
        MomentSet {
            mean: self.first,
            variance: self.second,
            ratio: None,
        }
    }
}

/// Offsets, in units of the base step `h`, at which the sampler is evaluated.
pub const STENCIL: [f64; 7] = [-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0];

const STABILITY_TOL: f64 = 1e-4;

fn richardson(coarse: C64, fine: C64, floor: f64, what: &str) -> Result<C64> {
    let scale = fine.norm().max(floor);
    if (coarse - fine).norm() > STABILITY_TOL * scale {
        return Err(FcsError::Numerical(format!(
            "{what} unstable: {coarse} vs {fine} at two step sizes"
        )));
    }
    Ok((fine * 16.0 - coarse) / 15.0)
}

/// Cumulants from `G` sampled at `STENCIL[k]·h`.
pub fn cumulants_from_samples(values: &[C64; 7], h: f64) -> Result<Cumulants> {
    if values[3].norm() == 0.0 || values.iter().any(|v| v.norm() == 0.0) {
        return Err(FcsError::Numerical("generating function vanished near u = 0".into()));
    }
    let l: Vec<C64> = values.iter().map(|v| v.ln()).collect();
    let (m2, m1, mh, z, ph, p1, p2) = (l[0], l[1], l[2], l[3], l[4], l[5], l[6]);
    let d1 = |f2: C64, f1: C64, g1: C64, g2: C64, s: f64| (-f2 + f1 * 8.0 - g1 * 8.0 + g2) / (12.0 * s);
    let d2 = |f2: C64, f1: C64, g1: C64, g2: C64, s: f64| {
        (-f2 + f1 * 16.0 - z * 30.0 + g1 * 16.0 - g2) / (12.0 * s * s)
    };
    let first = richardson(d1(p2, p1, m1, m2, h), d1(p1, ph, mh, m1, h / 2.0), 1e-10 / h, "first derivative")?;
    let second = richardson(d2(p2, p1, m1, m2, h), d2(p1, ph, mh, m1, h / 2.0), 1e-10 / (h * h), "second derivative")?;
    Ok(Cumulants {
        first: (c(0.0, -1.0) * first).re,
        second: -second.re,
    })
}

/// Five-point differences of `ln G` with one Richardson refinement.
pub fn cumulants_from_gf<F>(sampler: F, h: f64) -> Result<Cumulants>
where
    F: Fn(f64) -> Result<C64>,
{
    if !(h > 0.0) {
        return Err(invalid("h", format!("must be positive, got {h}")));
    }
    let mut values = [C64::new(0.0, 0.0); 7];
    for (v, s) in values.iter_mut().zip(STENCIL) {
        *v = sampler(s * h)?;
    }
    cumulants_from_samples(&values, h)
}

/// Cumulants of work or heat at every time in `times`.
pub fn moment_series(
    model: &SystemModel,
    quantity: Quantity,
    times: &[f64],
    h: f64,
    control: StepControl,
) -> Result<Vec<(f64, Cumulants)>> {
    let tags = model.num_counting_tags();
    let series: Vec<Vec<C64>> = STENCIL
        .par_iter()
        .map(|&s| {
            let u = CountingField::uniform(tags, c(s * h, 0.0));
            generating_function_series(model, quantity, &u, times, control)
                .map(|v| v.into_iter().map(|g| g.value).collect())
        })
        .collect::<Result<_>>()?;
    times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let mut values = [C64::new(0.0, 0.0); 7];
            for (v, s) in values.iter_mut().zip(&series) {
                *v = s[k];
            }
            Ok((t, cumulants_from_samples(&values, h)?))
        })
        .collect()
}

fn finite_beta(model: &SystemModel) -> Result<f64> {
    match model.temperature() {
        Temperature::Finite(beta) => Ok(beta),
        Temperature::Zero => Err(FcsError::Precondition(
            "fluctuation relations need a finite temperature".into(),
        )),
    }
}

/// `|G_w(iβ, t) − 1|`.
pub fn check_jarzynski(model: &SystemModel, t: f64, control: StepControl) -> Result<f64> {
    let beta = finite_beta(model)?;
    let u = CountingField::uniform(model.num_counting_tags(), c(0.0, beta));
    Ok((generating_function_work(model, &u, t, control)?.value - 1.0).norm())
}

/// `|G_Q(iβ, t) − 1|`, which heat does not keep at zero.
pub fn check_jarzynski_heat(model: &SystemModel, t: f64, control: StepControl) -> Result<f64> {
    let beta = finite_beta(model)?;
    let u = CountingField::uniform(model.num_counting_tags(), c(0.0, beta));
    Ok((generating_function_heat(model, &u, t, control)?.value - 1.0).norm())
}

/// `|ln[P(w)/P_rev(−w)] − βw|` at each lattice point where both sides exceed `p_floor`.
pub fn crooks_deviations(
    forward: &EnergyDistribution,
    reverse: &EnergyDistribution,
    beta: f64,
    p_floor: f64,
) -> Vec<(f64, f64)> {
    forward
        .points()
        .filter_map(|(w, p)| {
            let q = reverse.probability_at(-w);
            (p > p_floor && q > p_floor).then(|| (w, ((p / q).ln() - beta * w).abs()))
        })
        .collect()
}

/// Floor below which probabilities are too noisy for log-ratios.
pub const CROOKS_FLOOR: f64 = 1e-6;

/// Largest Crooks deviation over the common support.
pub fn check_crooks(
    forward: &EnergyDistribution,
    reverse: &EnergyDistribution,
    beta: f64,
    p_floor: f64,
) -> Result<f64> {
    let devs = crooks_deviations(forward, reverse, beta, p_floor);
    if devs.is_empty() {
        return Err(FcsError::Precondition("no lattice point above the probability floor".into()));
    }
    Ok(devs.into_iter().map(|(_, d)| d).fold(0.0, f64::max))
}

/// `max |G_w(u,t) − G^tr_w(iβ − u, t)|` over `us`. Needs `H(0) = H(t)`.
pub fn check_symmetry(model: &SystemModel, t: f64, us: &[f64], control: StepControl) -> Result<f64> {
    let beta = finite_beta(model)?;
    let mismatch = max_abs(&(model.hamiltonian_at(0.0) - model.hamiltonian_at(t)));
    if mismatch > 1e-10 {
        return Err(FcsError::Precondition(format!(
            "protocol is not closed: |H(0) − H(t)| = {mismatch:.3e}"
        )));
    }
    let tags = model.num_counting_tags();
    let devs: Vec<f64> = us
        .par_iter()
        .map(|&u| {
            let field = CountingField::uniform(tags, c(u, 0.0));
            let fwd = generating_function_work(model, &field, t, control)?.value;
            let rev = generating_function_work_reversed(model, &field.reflected(beta), t, control)?.value;
            Ok((fwd - rev).norm())
        })
        .collect::<Result<_>>()?;
    Ok(devs.into_iter().fold(0.0, f64::max))
}
