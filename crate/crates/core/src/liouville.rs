//! Counting-field-dressed Liouvillians.
//!
//! For each channel `j` with lowering operator `Sⱼ`, transition energy `νⱼ` and
//! counting field `u = u[tagⱼ]`, the dissipator is
//!
//! ```text
//! Γ₋ e^{iuν} S ρ S† + Γ₊ e^{−iuν} S† ρ S − (Γ₋/2){S†S, ρ} − (Γ₊/2){S S†, ρ}
//! ```
//!
//! with `Γ₊ = e^{−βν} Γ₋`. Emission into the bath is counted with a positive
//! phase, so `Tr ρ(t, u)` generates the distribution of heat released.

use nalgebra::SVD;

use crate::error::{FcsError, Result};
use crate::linop::{
    anticommutator_superop, c, commutator_superop, devectorize, min_eigenvalue, re,
    sandwich_superop, trace, trace_functional, OperatorMatrix, SuperOperator, C64, I,
};
use crate::model::SystemModel;

/// Counting fields indexed by channel tag. Complex entries are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct CountingField(Vec<C64>);

impl CountingField {
    pub fn new(values: Vec<C64>) -> Self {
        CountingField(values)
    }

    pub fn zero(tags: usize) -> Self {
        CountingField(vec![C64::new(0.0, 0.0); tags])
    }

    /// The same value on every tag (the "double channel" for two baths).
    pub fn uniform(tags: usize, u: C64) -> Self {
        CountingField(vec![u; tags])
    }

    pub fn real(values: &[f64]) -> Self {
        CountingField(values.iter().map(|&u| re(u)).collect())
    }

    pub fn values(&self) -> &[C64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `iβ − u` entrywise.
    pub fn reflected(&self, beta: f64) -> Self {
        CountingField(self.0.iter().map(|&u| c(0.0, beta) - u).collect())
    }

    fn check(&self, model: &SystemModel) -> Result<()> {
        let needed = model.num_counting_tags();
        if self.0.len() < needed {
            Err(FcsError::CountingFieldTooShort {
                len: self.0.len(),
                tag: needed - 1,
            })
        } else {
            Ok(())
        }
    }
}

/// Dressed dissipator `L_u`. Time independent.
pub fn dissipator(model: &SystemModel, u: &CountingField) -> Result<SuperOperator> {
    u.check(model)?;
    let d = model.dim();
    let mut out = SuperOperator::zeros(d * d, d * d);
    for ch in model.channels() {
        let s = &ch.lowering;
        let sd = s.adjoint();
        let nu = ch.transition_energy;
        let uj = u.values()[ch.counting_tag];
        let down = ch.down_rate;
        let up = ch.up_rate(model.temperature());
        if down != 0.0 {
            let phase = (I * uj * nu).exp();
            out += sandwich_superop(s, &sd)? * (phase * down);
            out -= anticommutator_superop(&(&sd * s)) * re(down / 2.0);
        }
        if up != 0.0 {
            let phase = (-I * uj * nu).exp();
            out += sandwich_superop(&sd, s)? * (phase * up);
            out -= anticommutator_superop(&(s * &sd)) * re(up / 2.0);
        }
    }
    Ok(out)
}

/// `k`-th derivative of the dissipator with respect to the counting field on `tag`, at u = 0.
pub fn dissipator_derivative(model: &SystemModel, tag: usize, order: u32) -> Result<SuperOperator> {
    let d = model.dim();
    let mut out = SuperOperator::zeros(d * d, d * d);
    for ch in model.channels().iter().filter(|ch| ch.counting_tag == tag) {
        let s = &ch.lowering;
        let sd = s.adjoint();
        let nu = ch.transition_energy;
        let down = ch.down_rate;
        let up = ch.up_rate(model.temperature());
        if down != 0.0 {
            out += sandwich_superop(s, &sd)? * ((I * nu).powu(order) * down);
        }
        if up != 0.0 {
            out += sandwich_superop(&sd, s)? * ((-I * nu).powu(order) * up);
        }
    }
    Ok(out)
}

/// Forward generator `A_u(t) = −i[H(t), ·] + L_u`.
pub fn assemble(model: &SystemModel, u: &CountingField, t: f64) -> Result<SuperOperator> {
    Ok(dissipator(model, u)? - commutator_superop(&model.hamiltonian_at(t)) * I)
}

/// Time-reversed generator `A^tr_u(t) = +i[H(t), ·] + L_u`.
pub fn assemble_time_reversed(model: &SystemModel, u: &CountingField, t: f64) -> Result<SuperOperator> {
    Ok(dissipator(model, u)? + commutator_superop(&model.hamiltonian_at(t)) * I)
}

/// Generator split into a constant part plus drive superoperators scaled by
/// scalar coefficients, so time stepping never rebuilds a superoperator.
#[derive(Debug, Clone)]
pub struct GeneratorParts {
    pub constant: SuperOperator,
    pub drives: Vec<SuperOperator>,
}

impl GeneratorParts {
    pub fn new(model: &SystemModel, u: &CountingField, reversed: bool) -> Result<Self> {
        let sign = if reversed { I } else { -I };
        let constant = dissipator(model, u)? + commutator_superop(model.static_hamiltonian()) * sign;
        let drives = model
            .drive_terms()
            .iter()
            .map(|d| commutator_superop(&d.operator) * sign)
            .collect();
        Ok(GeneratorParts { constant, drives })
    }

    pub fn at(&self, coefficients: &[f64]) -> SuperOperator {
        let mut a = self.constant.clone();
        for (m, &k) in self.drives.iter().zip(coefficients) {
            if k != 0.0 {
                a += m * re(k);
            }
        }
        a
    }
}

/// Relative threshold below which a singular value counts as zero.
const KERNEL_TOL: f64 = 1e-9;

/// Dimension of the kernel of the undressed generator.
pub fn kernel_dimension(a0: &SuperOperator) -> usize {
    let svd = SVD::new(a0.clone(), false, false);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    svd.singular_values
        .iter()
        .filter(|&&s| s <= KERNEL_TOL * smax.max(1e-300))
        .count()
}

/// Unique unit-trace stationary state of a static model.
pub fn stationary_state(model: &SystemModel) -> Result<OperatorMatrix> {
    if !model.is_static() {
        return Err(FcsError::NotStatic);
    }
    let a0 = assemble(model, &CountingField::zero(model.num_counting_tags()), 0.0)?;
    let dim = kernel_dimension(&a0);
    if dim != 1 {
        return Err(FcsError::DegenerateKernel { dim });
    }
    let n = a0.nrows();
    // row 0 belongs to the trace dependency vec(I)ᵀA₀ = 0, so swapping it for
    // the normalization row leaves a nonsingular system
    let mut system = a0;
    let tr = trace_functional(model.dim());
    for k in 0..n {
        system[(0, k)] = tr[k];
    }
    let mut rhs = nalgebra::DVector::<C64>::zeros(n);
    rhs[0] = re(1.0);
    let x = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| FcsError::Numerical("singular stationary system".into()))?;
    let rho = devectorize(&x)?;
    let rho = (&rho + rho.adjoint()) * re(0.5);
    let rho = &rho / trace(&rho);
    let lowest = min_eigenvalue(&rho);
    if lowest < -1e-9 {
        return Err(FcsError::Numerical(format!(
            "stationary state has negative eigenvalue {lowest:.3e}"
        )));
    }
    Ok(rho)
}
