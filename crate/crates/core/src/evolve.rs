//! Time-ordered propagation of counting states and the work and heat
//! generating functions built on top of it.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{invalid, FcsError, Result};
use crate::linop::{
    c, devectorize, hermitian_eigen, hermitian_exponential_factor, trace, vectorize, OperatorMatrix,
    StateVector, C64,
};
use crate::liouville::{CountingField, GeneratorParts};
use crate::model::{gibbs_state, SystemModel};

/// Density matrix dressed by a counting field at time `t`.
#[derive(Debug, Clone)]
pub struct CountingState {
    pub matrix: OperatorMatrix,
    pub u: CountingField,
    pub t: f64,
}

/// One evaluation of a generating function.
#[derive(Debug, Clone)]
pub struct GFSample {
    pub u: CountingField,
    pub t: f64,
    pub value: C64,
}

/// Step-size policy for the fixed-step integrator.
#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    /// Initial step; `None` picks [`default_time_step`].
    pub dt: Option<f64>,
    /// Accepted difference between a run and its half-step refinement.
    pub tolerance: f64,
    pub max_halvings: u32,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            dt: None,
            tolerance: 1e-8,
            max_halvings: 8,
        }
    }
}

impl StepControl {
    pub fn with_dt(dt: Option<f64>) -> Self {
        StepControl {
            dt,
            ..Self::default()
        }
    }
}

/// `min(T/200, 0.01/Γmax, 0.02/‖H‖)`, skipping terms that do not apply.
pub fn default_time_step(model: &SystemModel) -> f64 {
    let mut dt = f64::INFINITY;
    if let Some(period) = model.drive_period() {
        dt = dt.min(period / 200.0);
    }
    let rate = model.max_rate();
    if rate > 0.0 {
        dt = dt.min(0.01 / rate);
    }
    let norm = model.hamiltonian_norm_bound();
    if norm > 0.0 {
        dt = dt.min(0.02 / norm);
    }
    if dt.is_finite() {
        dt
    } else {
        0.01
    }
}

/// Time direction of a propagation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Direction {
    Forward,
    /// Protocol read backwards from `horizon`: the generator at step time `s`
    /// is the time-reversed one at `horizon − s`.
    Reversed { horizon: f64 },
}

struct Integrator<'a> {
    model: &'a SystemModel,
    parts: GeneratorParts,
    direction: Direction,
}

impl Integrator<'_> {
    fn protocol_time(&self, s: f64) -> f64 {
        match self.direction {
            Direction::Forward => s,
            Direction::Reversed { horizon } => horizon - s,
        }
    }

    fn breakpoints(&self, end: f64) -> Vec<f64> {
        match self.model.drive_cutoff() {
            Some(t1) => {
                let b = match self.direction {
                    Direction::Forward => t1,
                    Direction::Reversed { horizon } => horizon - t1,
                };
                if b > 0.0 && b < end {
                    vec![b]
                } else {
                    vec![]
                }
            }
            None => vec![],
        }
    }

    fn drives_active(&self, a: f64, b: f64) -> bool {
        match self.model.drive_cutoff() {
            Some(t1) => self.protocol_time(0.5 * (a + b)) < t1,
            None => true,
        }
    }

    fn rhs(&self, s: f64, active: bool, x: &StateVector) -> StateVector {
        let mut out = &self.parts.constant * x;
        if active {
            let t = self.protocol_time(s);
            for (term, sup) in self.model.drive_terms().iter().zip(&self.parts.drives) {
                let k = term.coefficient(t);
                if k != 0.0 {
                    out += (sup * x) * c(k, 0.0);
                }
            }
        }
        out
    }

    fn segment(&self, a: f64, b: f64, x: &mut StateVector, dt: f64) {
        let len = b - a;
        if len <= 0.0 {
            return;
        }
        let n = ((len / dt) - 1e-9).ceil().max(1.0) as usize;
        let h = len / n as f64;
        let active = self.drives_active(a, b);
        let hc = c(h, 0.0);
        let half = c(0.5 * h, 0.0);
        for k in 0..n {
            let s = a + k as f64 * h;
            let k1 = self.rhs(s, active, x);
            let k2 = self.rhs(s + 0.5 * h, active, &(&*x + &k1 * half));
            let k3 = self.rhs(s + 0.5 * h, active, &(&*x + &k2 * half));
            let k4 = self.rhs(s + h, active, &(&*x + &k3 * hc));
            *x += (k1 + (k2 + k3) * c(2.0, 0.0) + k4) * c(h / 6.0, 0.0);
        }
    }

    fn run(&self, times: &[f64], x0: &StateVector, dt: f64) -> Vec<StateVector> {
        let end = times.last().copied().unwrap_or(0.0);
        let mut stops: Vec<(f64, bool)> = times.iter().map(|&t| (t, true)).collect();
        stops.extend(self.breakpoints(end).into_iter().map(|b| (b, false)));
        stops.sort_by(|p, q| p.0.total_cmp(&q.0).then(q.1.cmp(&p.1)));
        let mut x = x0.clone();
        let mut s = 0.0;
        let mut out = Vec::with_capacity(times.len());
        for (stop, sample) in stops {
            self.segment(s, stop, &mut x, dt);
            s = s.max(stop);
            if sample {
                out.push(x.clone());
            }
        }
        out
    }
}

fn scaled_difference(a: &[StateVector], b: &[StateVector]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let scale = x.camax().max(1.0);
            (x - y).camax() / scale
        })
        .fold(0.0, f64::max)
}

/// Evolves `initial` and returns the state at each of `times` (non-decreasing, ≥ 0).
pub fn propagate_sampled(
    model: &SystemModel,
    u: &CountingField,
    times: &[f64],
    initial: &OperatorMatrix,
    direction: Direction,
    control: StepControl,
) -> Result<Vec<CountingState>> {
    if initial.nrows() != model.dim() || initial.ncols() != model.dim() {
        return Err(FcsError::DimensionMismatch {
            expected: model.dim(),
            found: initial.nrows(),
        });
    }
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("times", "must be finite, non-negative and sorted"));
    }
    let reversed = matches!(direction, Direction::Reversed { .. });
    let integrator = Integrator {
        model,
        parts: GeneratorParts::new(model, u, reversed)?,
        direction,
    };
    let mut dt = control.dt.unwrap_or_else(|| default_time_step(model));
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("dt", format!("must be positive, got {dt}")));
    }
    let x0 = vectorize(initial);
    let mut coarse = integrator.run(times, &x0, dt);
    for _ in 0..=control.max_halvings {
        dt *= 0.5;
        let fine = integrator.run(times, &x0, dt);
        let diff = scaled_difference(&coarse, &fine);
        if !diff.is_finite() {
            return Err(FcsError::Numerical("propagation produced non-finite values".into()));
        }
        if diff < control.tolerance {
            return fine
                .iter()
                .zip(times)
                .map(|(x, &t)| {
                    Ok(CountingState {
                        matrix: devectorize(x)?,
                        u: u.clone(),
                        t,
                    })
                })
                .collect();
        }
        coarse = fine;
    }
    Err(FcsError::Numerical(format!(
        "step doubling did not converge below {:.1e} (final dt {dt:.3e})",
        control.tolerance
    )))
}

/// Solves `dρ/dt = A_u(t)ρ` (or the reversed protocol) up to `t_final`.
pub fn propagate(
    model: &SystemModel,
    u: &CountingField,
    t_final: f64,
    initial: &OperatorMatrix,
    reversed: bool,
    control: StepControl,
) -> Result<CountingState> {
    let direction = if reversed {
        Direction::Reversed { horizon: t_final }
    } else {
        Direction::Forward
    };
    let mut states = propagate_sampled(model, u, &[t_final], initial, direction, control)?;
    Ok(states.pop().expect("one sample requested"))
}

/// Equilibrium state of the instantaneous Hamiltonian `H(t)` at the model temperature.
pub fn equilibrium_state(model: &SystemModel, t: f64) -> Result<OperatorMatrix> {
    gibbs_state(&model.hamiltonian_at(t), model.temperature())
}

fn measurement_phase(model: &SystemModel, t: f64, u: &CountingField, sign: f64) -> Result<OperatorMatrix> {
    // two-point measurements use the field of the first tag
    let u0 = u.values().first().copied().unwrap_or(C64::new(0.0, 0.0));
    hermitian_exponential_factor(&model.hamiltonian_at(t), c(0.0, sign) * u0)
}

/// `G_w(u,t) = Tr[e^{iuH(t)} ρ(t,u)]` starting from `e^{−iuH(0)}ρ₀`.
pub fn generating_function_work_with_initial(
    model: &SystemModel,
    u: &CountingField,
    t: f64,
    rho0: &OperatorMatrix,
    control: StepControl,
) -> Result<GFSample> {
    let start = measurement_phase(model, 0.0, u, -1.0)? * rho0;
    let state = propagate(model, u, t, &start, false, control)?;
    let value = trace(&(measurement_phase(model, t, u, 1.0)? * state.matrix));
    Ok(GFSample { u: u.clone(), t, value })
}

pub fn generating_function_work(
    model: &SystemModel,
    u: &CountingField,
    t: f64,
    control: StepControl,
) -> Result<GFSample> {
    generating_function_work_with_initial(model, u, t, &equilibrium_state(model, 0.0)?, control)
}

/// `G_Q(u,t) = Tr ρ(t,u)` starting from the undressed `ρ₀`.
pub fn generating_function_heat_with_initial(
    model: &SystemModel,
    u: &CountingField,
    t: f64,
    rho0: &OperatorMatrix,
    control: StepControl,
) -> Result<GFSample> {
    let state = propagate(model, u, t, rho0, false, control)?;
    Ok(GFSample {
        u: u.clone(),
        t,
        value: trace(&state.matrix),
    })
}

pub fn generating_function_heat(
    model: &SystemModel,
    u: &CountingField,
    t: f64,
    control: StepControl,
) -> Result<GFSample> {
    generating_function_heat_with_initial(model, u, t, &equilibrium_state(model, 0.0)?, control)
}

/// Work generating function of the time-reversed protocol, started from
/// equilibrium at `H(t)` and measured against `H(0)` at the end.
pub fn generating_function_work_reversed(
    model: &SystemModel,
    u: &CountingField,
    t: f64,
    control: StepControl,
) -> Result<GFSample> {
    let rho0 = equilibrium_state(model, t)?;
    let start = measurement_phase(model, t, u, -1.0)? * rho0;
    let state = propagate(model, u, t, &start, true, control)?;
    let value = trace(&(measurement_phase(model, 0.0, u, 1.0)? * state.matrix));
    Ok(GFSample { u: u.clone(), t, value })
}

/// Which generating function a time series refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Work,
    Heat,
}

/// Generating function of `quantity` at every time in `times` from a single propagation.
pub fn generating_function_series(
    model: &SystemModel,
    quantity: Quantity,
    u: &CountingField,
    times: &[f64],
    control: StepControl,
) -> Result<Vec<GFSample>> {
    let rho0 = equilibrium_state(model, 0.0)?;
    let start = match quantity {
        Quantity::Work => measurement_phase(model, 0.0, u, -1.0)? * rho0,
        Quantity::Heat => rho0,
    };
    let states = propagate_sampled(model, u, times, &start, Direction::Forward, control)?;
    states
        .into_iter()
        .map(|s| {
            let value = match quantity {
                Quantity::Work => trace(&(measurement_phase(model, s.t, u, 1.0)? * &s.matrix)),
                Quantity::Heat => trace(&s.matrix),
            };
            Ok(GFSample { u: u.clone(), t: s.t, value })
        })
        .collect()
}

/// Evaluates `f` on every field in parallel, preserving order.
pub fn map_fields<F>(fields: &[CountingField], f: F) -> Result<Vec<GFSample>>
where
    F: Fn(&CountingField) -> Result<GFSample> + Sync + Send,
{
    fields.par_iter().map(f).collect()
}

/// Work generating function split by initial and final energy eigenstates:
/// `transfers[(f, i)] = Tr[P_f U_u(P_i)]` so that
/// `G_w(u) = Σ p_i e^{iu(E_f − E_i)} transfers[(f, i)]`.
#[derive(Debug, Clone)]
pub struct ResolvedWork {
    pub initial_energies: Vec<f64>,
    pub final_energies: Vec<f64>,
    pub populations: Vec<f64>,
    pub transfers: DMatrix<C64>,
}

impl ResolvedWork {
    pub fn value(&self, u: f64) -> C64 {
        let mut g = C64::new(0.0, 0.0);
        for (i, (&ei, &p)) in self.initial_energies.iter().zip(&self.populations).enumerate() {
            for (f, &ef) in self.final_energies.iter().enumerate() {
                g += c(0.0, u * (ef - ei)).exp() * p * self.transfers[(f, i)];
            }
        }
        g
    }
}

/// Eigenstate-resolved transfers for the forward or reversed protocol.
pub fn resolved_work(
    model: &SystemModel,
    u: &CountingField,
    t: f64,
    reversed: bool,
    control: StepControl,
) -> Result<ResolvedWork> {
    let (t_start, t_end) = if reversed { (t, 0.0) } else { (0.0, t) };
    let h_start = model.hamiltonian_at(t_start);
    let rho0 = gibbs_state(&h_start, model.temperature())?;
    let (e_i, v_i) = hermitian_eigen(&h_start)?;
    let (e_f, v_f) = hermitian_eigen(&model.hamiltonian_at(t_end))?;
    let d = model.dim();
    let mut populations = Vec::with_capacity(d);
    let mut transfers = DMatrix::zeros(d, d);
    for i in 0..d {
        let ket = v_i.column(i);
        populations.push((ket.adjoint() * &rho0 * ket)[(0, 0)].re);
        let projector = ket * ket.adjoint();
        let out = propagate(model, u, t, &projector, reversed, control)?.matrix;
        for f in 0..d {
            let bra = v_f.column(f);
            transfers[(f, i)] = (bra.adjoint() * &out * bra)[(0, 0)];
        }
    }
    Ok(ResolvedWork {
        initial_energies: e_i,
        final_energies: e_f,
        populations,
        transfers,
    })
}
