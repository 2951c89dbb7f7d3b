//! System models: a time-dependent Hamiltonian protocol, jump channels with
//! detailed-balance rates, and a bath temperature.
//!
//! Energies are in units where ħ = 1. Basis state 0 of a qubit is the upper
//! level (`σz = diag(1, −1)`).

use std::f64::consts::{FRAC_PI_2, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, FcsError, Result};
use crate::linop::{
    annihilation, c, ensure_hermitian, hermitian_eigen, identity, kron, re, sigma_minus, sigma_x,
    sigma_y, sigma_z, spectral_function, OperatorMatrix, I,
};

/// Bath temperature, either a finite inverse temperature or the β = ∞ limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Temperature {
    Finite(f64),
    Zero,
}

impl Temperature {
    pub fn finite(beta: f64) -> Result<Self> {
        if beta.is_finite() && beta >= 0.0 {
            Ok(Temperature::Finite(beta))
        } else {
            Err(invalid("beta", format!("must be finite and non-negative, got {beta}")))
        }
    }

    /// `e^{−βE}`; zero at zero temperature for positive `E`.
    pub fn boltzmann_factor(&self, energy: f64) -> f64 {
        match *self {
            Temperature::Finite(beta) => (-beta * energy).exp(),
            Temperature::Zero => 0.0,
        }
    }

    pub fn beta(&self) -> f64 {
        match *self {
            Temperature::Finite(beta) => beta,
            Temperature::Zero => f64::INFINITY,
        }
    }
}

/// A dissipation channel `Ŝ` with transition energy ν and emission rate Γ₋.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpChannel {
    pub lowering: OperatorMatrix,
    pub transition_energy: f64,
    pub down_rate: f64,
    /// Index of the counting field that dresses this channel.
    pub counting_tag: usize,
}

impl JumpChannel {
    pub fn new(
        lowering: OperatorMatrix,
        transition_energy: f64,
        down_rate: f64,
        counting_tag: usize,
    ) -> Result<Self> {
        if !(transition_energy > 0.0) {
            return Err(invalid("transition_energy", "must be positive"));
        }
        if !(down_rate >= 0.0) {
            return Err(invalid("down_rate", "must be non-negative"));
        }
        Ok(JumpChannel {
            lowering,
            transition_energy,
            down_rate,
            counting_tag,
        })
    }

    /// Absorption rate `Γ₊ = e^{−βν} Γ₋`.
    pub fn up_rate(&self, temperature: Temperature) -> f64 {
        temperature.boltzmann_factor(self.transition_energy) * self.down_rate
    }
}

/// A drive entering the Hamiltonian as `amplitude · cos(frequency·t + phase) · operator`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveTerm {
    pub operator: OperatorMatrix,
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

impl DriveTerm {
    pub fn cosine(operator: OperatorMatrix, amplitude: f64, frequency: f64, phase: f64) -> Result<Self> {
        ensure_hermitian(&operator)?;
        Ok(DriveTerm {
            operator,
            amplitude,
            frequency,
            phase,
        })
    }

    /// `Ω(A† e^{−iωt} + A e^{iωt})` split into two Hermitian cosine terms.
    pub fn rotating(lowering: &OperatorMatrix, amplitude: f64, frequency: f64) -> Result<[Self; 2]> {
        let quadrature_x = lowering + lowering.adjoint();
        let quadrature_y = (lowering - lowering.adjoint()) * I;
        Ok([
            DriveTerm::cosine(quadrature_x, amplitude, frequency, 0.0)?,
            DriveTerm::cosine(quadrature_y, amplitude, frequency, -FRAC_PI_2)?,
        ])
    }

    pub fn coefficient(&self, t: f64) -> f64 {
        self.amplitude * (self.frequency * t + self.phase).cos()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    dim: usize,
    static_hamiltonian: OperatorMatrix,
    drive_terms: Vec<DriveTerm>,
    channels: Vec<JumpChannel>,
    temperature: Temperature,
    /// Drives act only for `t < cutoff` when set.
    drive_cutoff: Option<f64>,
}

impl SystemModel {
    pub fn new(
        static_hamiltonian: OperatorMatrix,
        drive_terms: Vec<DriveTerm>,
        channels: Vec<JumpChannel>,
        temperature: Temperature,
    ) -> Result<Self> {
        ensure_hermitian(&static_hamiltonian)?;
        let dim = static_hamiltonian.nrows();
        for op in drive_terms
            .iter()
            .map(|d| &d.operator)
            .chain(channels.iter().map(|ch| &ch.lowering))
        {
            if op.shape() != (dim, dim) {
                return Err(FcsError::DimensionMismatch {
                    expected: dim,
                    found: op.nrows(),
                });
            }
        }
        Ok(SystemModel {
            dim,
            static_hamiltonian,
            drive_terms,
            channels,
            temperature,
            drive_cutoff: None,
        })
    }

    /// Switch every drive off from `t1` on.
    pub fn with_drive_cutoff(mut self, t1: f64) -> Self {
        self.drive_cutoff = Some(t1);
        self
    }

    pub fn with_temperature(mut self, temperature: Temperature) -> Self {
        self.temperature = temperature;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn static_hamiltonian(&self) -> &OperatorMatrix {
        &self.static_hamiltonian
    }

    pub fn drive_terms(&self) -> &[DriveTerm] {
        &self.drive_terms
    }

    pub fn channels(&self) -> &[JumpChannel] {
        &self.channels
    }

    pub fn temperature(&self) -> Temperature {
        self.temperature
    }

    pub fn drive_cutoff(&self) -> Option<f64> {
        self.drive_cutoff
    }

    pub fn is_static(&self) -> bool {
        self.drive_terms.iter().all(|d| d.amplitude == 0.0)
    }

    /// Scalar drive coefficients at time `t`, honoring the cutoff.
    pub fn drive_coefficients(&self, t: f64) -> Vec<f64> {
        let active = self.drive_cutoff.is_none_or(|t1| t < t1);
        self.drive_terms
            .iter()
            .map(|d| if active { d.coefficient(t) } else { 0.0 })
            .collect()
    }

    pub fn hamiltonian_at(&self, t: f64) -> OperatorMatrix {
        let mut h = self.static_hamiltonian.clone();
        for (d, coeff) in self.drive_terms.iter().zip(self.drive_coefficients(t)) {
            if coeff != 0.0 {
                h += &d.operator * re(coeff);
            }
        }
        h
    }

    pub fn num_counting_tags(&self) -> usize {
        self.channels.iter().map(|ch| ch.counting_tag + 1).max().unwrap_or(0)
    }

    /// Largest total jump rate over channels, used for step-size selection.
    pub fn max_rate(&self) -> f64 {
        self.channels
            .iter()
            .map(|ch| {
                let strength = crate::linop::norm_bound(&ch.lowering).powi(2);
                (ch.down_rate + ch.up_rate(self.temperature)) * strength
            })
            .fold(0.0, f64::max)
    }

    /// Shortest drive period `2π/ω` among active drives.
    pub fn drive_period(&self) -> Option<f64> {
        self.drive_terms
            .iter()
            .filter(|d| d.amplitude != 0.0 && d.frequency > 0.0)
            .map(|d| 2.0 * std::f64::consts::PI / d.frequency)
            .reduce(f64::min)
    }

    /// Upper bound on ‖H(t)‖ over all t.
    pub fn hamiltonian_norm_bound(&self) -> f64 {
        crate::linop::norm_bound(&self.static_hamiltonian)
            + self
                .drive_terms
                .iter()
                .map(|d| d.amplitude.abs() * crate::linop::norm_bound(&d.operator))
                .sum::<f64>()
    }
}

/// Equilibrium state of `h` at the given temperature. At zero temperature the
/// ground eigenspace is populated uniformly.
pub fn gibbs_state(h: &OperatorMatrix, temperature: Temperature) -> Result<OperatorMatrix> {
    let (values, vectors) = hermitian_eigen(h)?;
    let e_min = values[0];
    let tol = 1e-9 * values.iter().map(|e| e.abs()).fold(1.0, f64::max);
    let weight = |e: f64| match temperature {
        Temperature::Finite(beta) => (-beta * (e - e_min)).exp(),
        Temperature::Zero => {
            if e - e_min <= tol {
                1.0
            } else {
                0.0
            }
        }
    };
    let z: f64 = values.iter().map(|&e| weight(e)).sum();
    let rho = spectral_function(&values, &vectors, |e| re(weight(e) / z));
    Ok(rho)
}

fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("must be positive, got {value}")))
    }
}

/// `H(t) = ν σz/2 + Ω cos(ω_d t) σx` with emission through `σ₋`.
pub fn build_driven_qubit(
    nu: f64,
    omega: f64,
    omega_d: f64,
    gamma_down: f64,
    temperature: Temperature,
) -> Result<SystemModel> {
    require_positive("nu", nu)?;
    require_positive("gamma", gamma_down)?;
    let h0 = sigma_z() * re(nu / 2.0);
    let drive = DriveTerm::cosine(sigma_x(), omega, omega_d, 0.0)?;
    let channel = JumpChannel::new(sigma_minus(), nu, gamma_down, 0)?;
    SystemModel::new(h0, vec![drive], vec![channel], temperature)
}

/// Rotating-frame qubit `H = (Ω σx + δ σz)/2` at zero temperature.
///
/// Heat quanta carry transition energy 1 (units of ν).
pub fn build_rwa_qubit(omega: f64, delta: f64, gamma: f64) -> Result<SystemModel> {
    require_positive("gamma", gamma)?;
    let h = (sigma_x() * re(omega) + sigma_z() * re(delta)) * re(0.5);
    let channel = JumpChannel::new(sigma_minus(), 1.0, gamma, 0)?;
    SystemModel::new(h, vec![], vec![channel], Temperature::Zero)
}

/// Mean occupation `|α|² = 4Ω²/(Γ² + 4δ²)` of the driven oscillator's coherent state.
pub fn coherent_occupation(nu: f64, omega: f64, omega_d: f64, gamma: f64) -> f64 {
    let delta = nu - omega_d;
    4.0 * omega * omega / (gamma * gamma + 4.0 * delta * delta)
}

/// Poisson weight beyond the last retained Fock level.
pub fn fock_truncation_tail(n_fock: usize, mean: f64) -> f64 {
    let mut term = (-mean).exp();
    let mut kept = term;
    for n in 1..n_fock {
        term *= mean / n as f64;
        kept += term;
    }
    (1.0 - kept).max(0.0)
}

/// Smallest Fock dimension leaving less than `tail` of a Poisson(mean) outside.
pub fn auto_fock_dimension(mean: f64, tail: f64) -> usize {
    let mut n = 2;
    while fock_truncation_tail(n, mean) > tail && n < 512 {
        n += 1;
    }
    // margin for the dressed eigenvector, which is broader than the Poisson weights
    n + 3
}

const FOCK_TAIL_WARNING: f64 = 1e-8;

fn oscillator_parts(
    nu: f64,
    omega: f64,
    omega_d: f64,
    gamma: f64,
    n_fock: usize,
) -> Result<(OperatorMatrix, JumpChannel)> {
    require_positive("nu", nu)?;
    require_positive("gamma", gamma)?;
    if n_fock < 2 {
        return Err(invalid("n_fock", "must be at least 2"));
    }
    let mean = coherent_occupation(nu, omega, omega_d, gamma);
    let tail = fock_truncation_tail(n_fock, mean);
    if tail > FOCK_TAIL_WARNING {
        log::warn!(
            "Fock truncation n_fock={n_fock} leaves {tail:.2e} of the coherent state (|α|²={mean:.3}) outside"
        );
    }
    let a = annihilation(n_fock);
    let channel = JumpChannel::new(a.clone(), nu, gamma, 0)?;
    Ok((a, channel))
}

/// Lab-frame oscillator `ν a†a + Ω(a† e^{−iω_d t} + a e^{iω_d t})` at zero temperature.
pub fn build_harmonic_oscillator(
    nu: f64,
    omega: f64,
    omega_d: f64,
    gamma: f64,
    n_fock: usize,
) -> Result<SystemModel> {
    let (a, channel) = oscillator_parts(nu, omega, omega_d, gamma, n_fock)?;
    let h0 = a.adjoint() * &a * re(nu);
    let drives = DriveTerm::rotating(&a, omega, omega_d)?.to_vec();
    SystemModel::new(h0, drives, vec![channel], Temperature::Zero)
}

/// The same oscillator in the frame rotating at `ω_d`:
/// `(ν − ω_d) a†a + Ω(a + a†)`, static.
pub fn build_harmonic_oscillator_rotating(
    nu: f64,
    omega: f64,
    omega_d: f64,
    gamma: f64,
    n_fock: usize,
) -> Result<SystemModel> {
    let (a, channel) = oscillator_parts(nu, omega, omega_d, gamma, n_fock)?;
    let h = a.adjoint() * &a * re(nu - omega_d) + (&a + a.adjoint()) * re(omega);
    SystemModel::new(h, vec![], vec![channel], Temperature::Zero)
}

/// Two identical resonantly driven qubits with flip-flop exchange,
/// `H = Ω/2 Σⱼ σx⁽ʲ⁾ + (ω_xx/2)(σx⁽¹⁾σx⁽²⁾ + σy⁽¹⁾σy⁽²⁾)`, each emitting into its own
/// bath (counting tags 0 and 1), zero temperature.
pub fn build_coupled_qubits(omega: f64, omega_xx: f64, gamma: f64) -> Result<SystemModel> {
    require_positive("gamma", gamma)?;
    let id = identity(2);
    let x1 = kron(&sigma_x(), &id);
    let x2 = kron(&id, &sigma_x());
    let y1 = kron(&sigma_y(), &id);
    let y2 = kron(&id, &sigma_y());
    let h = (&x1 + &x2) * re(omega / 2.0) + (&x1 * &x2 + &y1 * &y2) * re(omega_xx / 2.0);
    let channels = vec![
        JumpChannel::new(kron(&sigma_minus(), &id), 1.0, gamma, 0)?,
        JumpChannel::new(kron(&id, &sigma_minus()), 1.0, gamma, 1)?,
    ];
    SystemModel::new(h, vec![], channels, Temperature::Zero)
}

/// Analytic levels of [`build_coupled_qubits`] in the order
/// `[0, (ω_xx − R)/2, (ω_xx + R)/2, −ω_xx]` with `R = √(4Ω² + ω_xx²)`.
pub fn coupled_qubit_levels(omega: f64, omega_xx: f64) -> [f64; 4] {
    let r = (4.0 * omega * omega + omega_xx * omega_xx).sqrt();
    [0.0, (omega_xx - r) / 2.0, (omega_xx + r) / 2.0, -omega_xx]
}

/// Effective Rabi frequency `Ω_R = Ω²/ω_xx` between the two lowest Bell-like levels.
pub fn effective_rabi_frequency(omega: f64, omega_xx: f64) -> f64 {
    omega * omega / omega_xx
}

/// Jump operator of the three-level reduction: the jump rate Γ is folded into
/// the matrix, so the channel rate is 1.
pub fn three_level_jump(gamma: f64) -> OperatorMatrix {
    let a = c(0.0, (gamma / 2.0).sqrt());
    let b = c(0.0, gamma.sqrt());
    let mut s = OperatorMatrix::zeros(3, 3);
    s[(0, 2)] = a;
    s[(1, 2)] = a;
    s[(2, 0)] = b;
    s[(2, 1)] = -b;
    s
}

/// Three-level reduction of the coupled qubits at `ω_xx ≫ Ω ≫ Γ`.
pub fn build_three_level(omega_r: f64, gamma: f64) -> Result<SystemModel> {
    require_positive("omega_r", omega_r)?;
    require_positive("gamma", gamma)?;
    let mut h = OperatorMatrix::zeros(3, 3);
    h[(0, 0)] = re(-omega_r / 2.0);
    h[(1, 1)] = re(omega_r / 2.0);
    let channel = JumpChannel::new(three_level_jump(gamma), 1.0, 1.0, 0)?;
    SystemModel::new(h, vec![], vec![channel], Temperature::Zero)
}

/// Undriven qubit `ν σz/2` coupled to a bath at finite β.
pub fn build_undriven_qubit(nu: f64, gamma: f64, beta: f64) -> Result<SystemModel> {
    require_positive("nu", nu)?;
    require_positive("gamma", gamma)?;
    let temperature = Temperature::finite(beta)?;
    let h = sigma_z() * re(nu / 2.0);
    let channel = JumpChannel::new(sigma_minus(), nu, gamma, 0)?;
    SystemModel::new(h, vec![], vec![channel], temperature)
}

/// Bell-basis amplitudes of the degenerate level at `ω_xx = Ω/√2`, used in docs and tests.
pub fn degenerate_pair_states() -> ([f64; 4], [f64; 4]) {
    let s6 = 6f64.sqrt();
    (
        [SQRT_2 / s6, -1.0 / s6, -1.0 / s6, SQRT_2 / s6],
        [0.0, -1.0 / SQRT_2, 1.0 / SQRT_2, 0.0],
    )
}
