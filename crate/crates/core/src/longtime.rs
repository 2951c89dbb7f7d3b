//! Long-time heat statistics from the dominant eigenvalue `λ(u)` of the
//! dressed generator of a static model.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{FcsError, Result};
use crate::evolve::{propagate_sampled, Direction, StepControl};
use crate::linop::{c, re, trace, trace_functional, vectorize, OperatorMatrix, C64};
use crate::liouville::{assemble, dissipator_derivative, stationary_state, CountingField};
use crate::model::{build_coupled_qubits, SystemModel};

/// Taylor coefficients of `λ(u)` at `u = 0`.
///
/// `lambda1[k] = −i∂_kλ` is the mean heat current into bath `k`,
/// `lambda2[k] = −∂²_kλ` its variance rate and `lambda12 = −∂₁∂₂λ` the
/// covariance rate between the first two baths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CumulantSet {
    pub quantum: f64,
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
    pub lambda12: f64,
}

impl CumulantSet {
    pub fn total_lambda1(&self) -> f64 {
        self.lambda1.iter().sum()
    }

    /// Variance rate with every bath counted by one shared field.
    pub fn total_lambda2(&self) -> f64 {
        self.lambda2.iter().sum::<f64>() + 2.0 * self.lambda12
    }

    pub fn fano(&self) -> f64 {
        self.total_lambda2() / (self.quantum * self.total_lambda1())
    }

    pub fn fano_single(&self, tag: usize) -> f64 {
        self.lambda2[tag] / (self.quantum * self.lambda1[tag])
    }

    /// `C₁₂(t) = λ₁₂·t`.
    pub fn c12(&self, t: f64) -> f64 {
        self.lambda12 * t
    }
}

fn common_quantum(model: &SystemModel) -> Result<f64> {
    let first = model
        .channels()
        .first()
        .ok_or_else(|| FcsError::Precondition("model has no jump channels".into()))?
        .transition_energy;
    if model.channels().iter().any(|ch| (ch.transition_energy - first).abs() > 1e-12 * first) {
        return Err(FcsError::Precondition("channels carry different quanta".into()));
    }
    Ok(first)
}

/// Perturbative expansion of `λ(u)` to second order in the counting fields.
///
/// The eigenvector correction `ρ_k` solves `A₀ρ_k = ∂_kλ ρ_st − A_kρ_st` with
/// `Tr ρ_k = 0`; the bordered matrix `[[A₀, ρ_st], [vec(I)ᵀ, 0]]` makes that
/// system square and nonsingular.
pub fn cumulant_expansion(model: &SystemModel) -> Result<CumulantSet> {
    let quantum = common_quantum(model)?;
    let tags = model.num_counting_tags();
    let rho_st = vectorize(&stationary_state(model)?);
    let a0 = assemble(model, &CountingField::zero(tags), 0.0)?;
    let ell = trace_functional(model.dim());
    let n = a0.nrows();

    let mut bordered = nalgebra::DMatrix::<C64>::zeros(n + 1, n + 1);
    bordered.view_mut((0, 0), (n, n)).copy_from(&a0);
    bordered.view_mut((0, n), (n, 1)).copy_from(&rho_st);
    bordered.view_mut((n, 0), (1, n)).copy_from(&ell.transpose());
    let lu = bordered.lu();

    let project = |v: &DVector<C64>| (ell.transpose() * v)[(0, 0)];
    let mut first = Vec::with_capacity(tags);
    let mut corrections = Vec::with_capacity(tags);
    let mut firsts_sup = Vec::with_capacity(tags);
    for tag in 0..tags {
        let ak = dissipator_derivative(model, tag, 1)?;
        let ak_rho = &ak * &rho_st;
        let dk = project(&ak_rho);
        let mut rhs = DVector::<C64>::zeros(n + 1);
        rhs.rows_mut(0, n).copy_from(&(&rho_st * dk - &ak_rho));
        let sol = lu
            .solve(&rhs)
            .ok_or_else(|| FcsError::Numerical("singular bordered system".into()))?;
        first.push(dk);
        corrections.push(sol.rows(0, n).into_owned());
        firsts_sup.push(ak);
    }

    let mut lambda1 = Vec::with_capacity(tags);
    let mut lambda2 = Vec::with_capacity(tags);
    for tag in 0..tags {
        let akk = dissipator_derivative(model, tag, 2)?;
        let second = project(&(&akk * &rho_st)) + project(&(&firsts_sup[tag] * &corrections[tag])) * 2.0;
        lambda1.push((c(0.0, -1.0) * first[tag]).re);
        lambda2.push(-second.re);
    }
    let lambda12 = if tags >= 2 {
        let mixed = project(&(&firsts_sup[0] * &corrections[1])) + project(&(&firsts_sup[1] * &corrections[0]));
        -mixed.re
    } else {
        0.0
    };
    Ok(CumulantSet {
        quantum,
        lambda1,
        lambda2,
        lambda12,
    })
}

/// Eigenvalue of `A_u` with the largest real part, from a dense eigensolve.
pub fn dominant_eigenvalue_numeric(model: &SystemModel, u: &CountingField) -> Result<C64> {
    if !model.is_static() {
        return Err(FcsError::NotStatic);
    }
    let a = assemble(model, u, 0.0)?;
    let dense = faer::Mat::<faer::c64>::from_fn(a.nrows(), a.ncols(), |i, j| {
        let z = a[(i, j)];
        faer::c64::new(z.re, z.im)
    });
    let values = dense
        .eigenvalues()
        .map_err(|e| FcsError::Numerical(format!("eigensolver failed: {e:?}")))?;
    values
        .into_iter()
        .max_by(|a, b| a.re.total_cmp(&b.re))
        .map(|z| c(z.re, z.im))
        .ok_or_else(|| FcsError::Numerical("empty spectrum".into()))
}

/// Normalized second-order emission correlation `g⁽²⁾(t)` of the selected channels.
///
/// The stationary state is collapsed with `Σ Γ_j S_j ρ S_j†`, evolved with `A₀`
/// and detected with `Σ Γ_k S_k†S_k`; `None` selects every channel.
pub fn g2_correlator(
    model: &SystemModel,
    times: &[f64],
    channels: Option<&[usize]>,
    control: StepControl,
) -> Result<Vec<f64>> {
    let rho_st = stationary_state(model)?;
    let selected: Vec<_> = match channels {
        Some(sel) => sel
            .iter()
            .map(|&k| {
                model.channels().get(k).ok_or_else(|| {
                    FcsError::Precondition(format!("channel {k} does not exist"))
                })
            })
            .collect::<Result<_>>()?,
        None => model.channels().iter().collect(),
    };
    let d = model.dim();
    let mut collapsed = OperatorMatrix::zeros(d, d);
    let mut detector = OperatorMatrix::zeros(d, d);
    for ch in &selected {
        let s = &ch.lowering;
        let sd = s.adjoint();
        collapsed += s * &rho_st * &sd * re(ch.down_rate);
        detector += &sd * s * re(ch.down_rate);
        let up = ch.up_rate(model.temperature());
        if up != 0.0 {
            collapsed += &sd * &rho_st * s * re(up);
            detector += s * &sd * re(up);
        }
    }
    let intensity = trace(&(&detector * &rho_st)).re;
    if intensity <= 1e-300 {
        return Err(FcsError::ZeroIntensity);
    }
    let zero = CountingField::zero(model.num_counting_tags());
    let states = propagate_sampled(model, &zero, times, &collapsed, Direction::Forward, control)?;
    Ok(states
        .iter()
        .map(|s| trace(&(&detector * &s.matrix)).re / (intensity * intensity))
        .collect())
}

/// Centered moving average of width `window` on a uniform grid starting at 0,
/// reflecting the series evenly about `t = 0`.
pub fn smooth_even(times: &[f64], values: &[f64], window: f64) -> Result<Vec<f64>> {
    if times.len() != values.len() || times.len() < 2 {
        return Err(FcsError::Precondition("smoothing needs matching series of length ≥ 2".into()));
    }
    let step = times[1] - times[0];
    let uniform = times[0].abs() < 1e-12
        && times.windows(2).all(|w| ((w[1] - w[0]) - step).abs() < 1e-9 * step.max(1.0));
    if !uniform || step <= 0.0 {
        return Err(FcsError::Precondition("smoothing needs a uniform grid from 0".into()));
    }
    let half = ((0.5 * window) / step).round() as i64;
    let n = values.len() as i64;
    Ok((0..n)
        .map(|i| {
            let (mut sum, mut count) = (0.0, 0usize);
            for j in i - half..=i + half {
                let k = j.abs();
                if k < n {
                    sum += values[k as usize];
                    count += 1;
                }
            }
            sum / count as f64
        })
        .collect())
}

/// One point of a coupled-qubit Fano sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub omega: f64,
    pub omega_xx: f64,
    pub fano_double: f64,
    pub fano_single: f64,
    /// `λ₁₂/(ν²Γ)`, the growth rate of `C₁₂/(ν²Γt)`.
    pub c12_rate: f64,
    /// `ω_xx > Ω²/(2Γ)`.
    pub entangled_flag: bool,
    pub error: Option<String>,
}

/// Cumulant expansion of the coupled-qubit family on the grid `omegas × omega_xxs`.
/// Failures are recorded per point with NaN values.
pub fn sweep_fano(omegas: &[f64], omega_xxs: &[f64], gamma: f64) -> Vec<SweepPoint> {
    let grid: Vec<(f64, f64)> = omegas
        .iter()
        .flat_map(|&o| omega_xxs.iter().map(move |&w| (o, w)))
        .collect();
    grid.par_iter()
        .map(|&(omega, omega_xx)| {
            let entangled_flag = omega_xx > omega * omega / (2.0 * gamma);
            let result = build_coupled_qubits(omega, omega_xx, gamma).and_then(|m| cumulant_expansion(&m));
            match result {
                Ok(set) => SweepPoint {
                    omega,
                    omega_xx,
                    fano_double: set.fano(),
                    fano_single: set.fano_single(0),
                    c12_rate: set.lambda12 / (set.quantum * set.quantum * gamma),
                    entangled_flag,
                    error: None,
                },
                Err(e) => SweepPoint {
                    omega,
                    omega_xx,
                    fano_double: f64::NAN,
                    fano_single: f64::NAN,
                    c12_rate: f64::NAN,
                    entangled_flag,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

/// Stationary heat current `Σ ν_j (Γ₋⟨S†S⟩ − Γ₊⟨SS†⟩)` computed directly from the jump rates.
pub fn emission_current(model: &SystemModel) -> Result<f64> {
    let rho = stationary_state(model)?;
    let mut total = 0.0;
    for ch in model.channels() {
        let sd = ch.lowering.adjoint();
        let emitted = trace(&(&ch.lowering * &rho * &sd)).re;
        let absorbed = trace(&(&sd * &rho * &ch.lowering)).re;
        total += ch.transition_energy * (ch.down_rate * emitted - ch.up_rate(model.temperature()) * absorbed);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;
    use crate::oracles::{avg_g2, ho_lambda, qubit_fano};

    #[test]
    fn harmonic_oscillator_poissonian() {
        let n = auto_fock_dimension(1.0, 1e-12);
        let m = build_harmonic_oscillator_rotating(1.0, 0.05, 1.0, 0.1, n).unwrap();
        let set = cumulant_expansion(&m).unwrap();
        assert!((set.lambda1[0] - 0.1).abs() < 1e-9);
        assert!((set.fano() - 1.0).abs() < 1e-9);
        let u = 0.6;
        let num = dominant_eigenvalue_numeric(&m, &CountingField::real(&[u])).unwrap();
        assert!((num - ho_lambda(c(u, 0.0), 1.0, 0.05, 1.0, 0.1)).norm() < 1e-9);
    }

    #[test]
    fn qubit_fano_point() {
        let set = cumulant_expansion(&build_rwa_qubit(1.0, 0.0, 1.0).unwrap()).unwrap();
        assert!((set.fano() - 1.0 / 3.0).abs() < 1e-12);
        assert!((set.fano() - qubit_fano(1.0, 0.0, 1.0)).abs() < 1e-12);
        assert_eq!(set.lambda12, 0.0);
    }

    #[test]
    fn zero_field_eigenvalue_vanishes() {
        let m = build_rwa_qubit(0.8, 0.2, 1.0).unwrap();
        assert!(dominant_eigenvalue_numeric(&m, &CountingField::zero(1)).unwrap().norm() < 1e-12);
        let driven = build_driven_qubit(1.0, 0.1, 1.0, 0.1, Temperature::Zero).unwrap();
        assert_eq!(dominant_eigenvalue_numeric(&driven, &CountingField::zero(1)).unwrap_err(), FcsError::NotStatic);
    }

    #[test]
    fn expansion_matches_finite_differences() {
        let m = build_coupled_qubits(3.0, 7.0, 1.0).unwrap();
        let set = cumulant_expansion(&m).unwrap();
        let h = 1e-3;
        let lam = |a: f64, b: f64| dominant_eigenvalue_numeric(&m, &CountingField::real(&[a, b])).unwrap();
        let d1 = (lam(h, 0.0) - lam(-h, 0.0)) / (2.0 * h);
        let d2 = (lam(h, 0.0) - lam(0.0, 0.0) * 2.0 + lam(-h, 0.0)) / (h * h);
        let mixed = (lam(h, h) - lam(h, -h) - lam(-h, h) + lam(-h, -h)) / (4.0 * h * h);
        assert!(((c(0.0, -1.0) * d1).re - set.lambda1[0]).abs() < 1e-6);
        assert!((-d2.re - set.lambda2[0]).abs() < 1e-5);
        assert!((-mixed.re - set.lambda12).abs() < 1e-5);
    }

    #[test]
    fn mean_current_is_emission_rate() {
        for m in [build_coupled_qubits(3.0, 7.0, 1.0).unwrap(), build_rwa_qubit(0.7, 0.4, 1.3).unwrap()] {
            let set = cumulant_expansion(&m).unwrap();
            assert!((set.total_lambda1() - emission_current(&m).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_qubits_symmetric() {
        let set = cumulant_expansion(&build_coupled_qubits(4.0, 9.0, 1.0).unwrap()).unwrap();
        assert!((set.lambda1[0] - set.lambda1[1]).abs() < 1e-12);
        assert!((set.lambda2[0] - set.lambda2[1]).abs() < 1e-12);
    }

    #[test]
    fn three_level_g2_matches_oracle() {
        let (omega_r, gamma) = (0.625, 1.0);
        let m = build_three_level(omega_r, gamma).unwrap();
        let times: Vec<f64> = (0..=50).map(|k| k as f64 * 0.2).collect();
        let g = g2_correlator(&m, &times, None, StepControl::default()).unwrap();
        for (t, v) in times.iter().zip(g) {
            assert!((v - avg_g2(*t, gamma, omega_r)).abs() < 1e-8, "t={t}: {v}");
        }
    }

    #[test]
    fn g2_decorrelates() {
        let m = build_rwa_qubit(1.0, 0.0, 1.0).unwrap();
        let g = g2_correlator(&m, &[0.0, 40.0], None, StepControl::default()).unwrap();
        assert!(g[0].abs() < 1e-10);
        assert!((g[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn g2_zero_intensity() {
        let m = build_rwa_qubit(1.0, 0.0, 1.0).unwrap();
        let dark = SystemModel::new(m.static_hamiltonian() * re(0.0), vec![], m.channels().to_vec(), Temperature::Zero).unwrap();
        assert_eq!(g2_correlator(&dark, &[0.0], None, StepControl::default()).unwrap_err(), FcsError::ZeroIntensity);
    }

    #[test]
    fn smoothing_behaviour() {
        let times: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let ones = vec![1.0; 10];
        assert_eq!(smooth_even(&times, &ones, 3.0).unwrap(), ones);
        let ramp: Vec<f64> = times.clone();
        let s = smooth_even(&times, &ramp, 2.0).unwrap();
        assert!((s[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((s[5] - 5.0).abs() < 1e-15);
        assert!(smooth_even(&[0.0, 1.0, 3.0], &[1.0; 3], 1.0).is_err());
    }

    #[test]
    fn sweep_reports_every_point() {
        let pts = sweep_fano(&[2.0, 5.0], &[2.0, 40.0], 1.0);
        assert_eq!(pts.len(), 4);
        assert!(pts.iter().all(|p| p.error.is_none()));
        // three-level estimate: bunching wins once Γ/Ω_R > √3
        let p = pts.iter().find(|p| p.omega == 2.0 && p.omega_xx == 40.0).unwrap();
        assert!(p.entangled_flag);
        assert!(p.fano_double > 1.0);
        let q = pts.iter().find(|p| p.omega == 5.0 && p.omega_xx == 40.0).unwrap();
        assert!(q.fano_double < 1.0);
    }
}
