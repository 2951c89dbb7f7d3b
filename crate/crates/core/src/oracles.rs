//! Closed-form reference results, written against scalar math only.

use num_complex::Complex64;

/// Dominant eigenvalue of the damped driven oscillator,
/// `Γ|α|²(e^{iuν} − 1)` with `|α|² = 4Ω²/(Γ² + 4(ν − ω_d)²)`.
pub fn ho_lambda(u: Complex64, nu: f64, omega: f64, omega_d: f64, gamma: f64) -> Complex64 {
    let delta = nu - omega_d;
    let alpha_sq = 4.0 * omega * omega / (gamma * gamma + 4.0 * delta * delta);
    ((Complex64::i() * u * nu).exp() - 1.0) * (gamma * alpha_sq)
}

/// Poisson weights `xⁿe^{−x}/n!` for `n = 0..len`.
pub fn poisson_weights(x: f64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut w = (-x).exp();
    for n in 0..len {
        out.push(w);
        w *= x / (n + 1) as f64;
    }
    out
}

/// Fano factor of photons emitted by a resonantly driven two-level system.
pub fn qubit_fano(omega: f64, delta: f64, gamma: f64) -> f64 {
    let denom = gamma * gamma + 2.0 * omega * omega + 4.0 * delta * delta;
    1.0 - 2.0 * omega * omega * (3.0 * gamma * gamma - 4.0 * delta * delta) / (denom * denom)
}

/// Averaged second-order correlation of the effective three-level emitter.
pub fn avg_g2(t: f64, gamma: f64, omega_r: f64) -> f64 {
    let x = gamma / omega_r;
    1.0 + (-gamma * t).exp() * (0.5 * (x * x - 1.0) * (omega_r * t).cos() - x * (omega_r * t).sin())
}

/// Heat generating function of an undriven qubit relaxing from equilibrium.
pub fn undriven_heat_gf(u: Complex64, t: f64, nu: f64, gamma: f64, beta: f64) -> Complex64 {
    let i = Complex64::i();
    let bn = beta * nu;
    let stationary = ((u * nu).cos() + bn.cosh()) / (1.0 + bn.cosh());
    let decay = (-((-bn).exp() + 1.0) * gamma * t).exp();
    let shift = ((beta - i * u) * nu).exp();
    let jump = ((i * u * nu).exp() - 1.0).powu(2);
    stationary - jump * shift * decay / (bn.exp() + 1.0).powi(2)
}

/// Variance of the heat of the undriven qubit, second cumulant of [`undriven_heat_gf`].
pub fn undriven_heat_variance(t: f64, nu: f64, gamma: f64, beta: f64) -> f64 {
    let bn = beta * nu;
    nu * nu * (1.0 - (-(1.0 + (-bn).exp()) * gamma * t).exp()) / (1.0 + bn.cosh())
}
