//! Subcommand implementations.

use std::path::Path;

use fcs_core::evolve::{Quantity, StepControl};
use fcs_core::longtime::{cumulant_expansion, g2_correlator, smooth_even, sweep_fano};
use fcs_core::oracles::avg_g2;
use fcs_core::stats::{
    check_crooks, check_jarzynski, check_symmetry, heat_distribution, moment_series, work_distribution,
    EnergyDistribution, GridSettings, MomentSet,
};
use fcs_core::{FcsError, SystemModel, Temperature};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{num, opt_num, OutDir};
use crate::{CrooksSource, Failure};

/// Largest accepted `|G_w(iβ) − 1|`.
pub const JARZYNSKI_TOL: f64 = 1e-3;
/// Largest accepted Crooks log-ratio deviation.
pub const CROOKS_TOL: f64 = 0.05;
/// Probabilities below this are left out of the Crooks gate.
pub const CROOKS_FLOOR: f64 = 1e-3;
pub const SYMMETRY_TOL: f64 = 1e-6;
const SYMMETRY_POINTS: usize = 32;

pub struct Context {
    pub cfg: RunConfig,
    pub model: SystemModel,
    pub out: OutDir,
    pub control: StepControl,
}

impl Context {
    pub fn new(config: &Path, out: &Path, dt: Option<f64>) -> Result<Self, Failure> {
        let cfg = RunConfig::load(config)?;
        let model = cfg.build_model()?;
        let control = StepControl::with_dt(dt.or(cfg.run.dt));
        let out = OutDir::create(out)?;
        Ok(Context {
            cfg,
            model,
            out,
            control,
        })
    }

    fn grid(&self) -> GridSettings {
        GridSettings::new(self.cfg.counting.grid_size, self.cfg.spacing(&self.model))
    }

    fn beta(&self) -> Option<f64> {
        match self.model.temperature() {
            Temperature::Finite(b) => Some(b),
            Temperature::Zero => None,
        }
    }
}

/// Check outcome: a value, or the reason it does not apply.
#[derive(Debug, Serialize)]
struct Check {
    value: Option<f64>,
    reason: Option<String>,
}

impl Check {
    fn from(result: Result<f64, FcsError>) -> Result<Self, Failure> {
        match result {
            Ok(v) => Ok(Check {
                value: Some(v),
                reason: None,
            }),
            Err(FcsError::Precondition(reason)) => Ok(Check {
                value: None,
                reason: Some(reason),
            }),
            Err(e) => Err(e.into()),
        }
    }

    fn skipped(reason: &str) -> Self {
        Check {
            value: None,
            reason: Some(reason.into()),
        }
    }
}

#[derive(Serialize)]
struct Checks {
    t: f64,
    jarzynski_residual: Check,
    crooks_max_dev: Check,
    symmetry_max_dev: Check,
}

#[derive(Serialize)]
struct MomentRow {
    t: f64,
    work: MomentSet,
    heat: MomentSet,
}

#[derive(Serialize)]
struct Moments {
    quantum: f64,
    series: Vec<MomentRow>,
}

fn sample_times(t_final: f64, samples: usize) -> Vec<f64> {
    (1..=samples).map(|k| t_final * k as f64 / samples as f64).collect()
}

fn zero_temperature_reason() -> Check {
    Check::skipped("fluctuation relations need a finite temperature")
}

fn jarzynski(ctx: &Context, t: f64) -> Result<Check, Failure> {
    match ctx.beta() {
        Some(_) => Check::from(check_jarzynski(&ctx.model, t, ctx.control)),
        None => Ok(zero_temperature_reason()),
    }
}

fn crooks(
    ctx: &Context,
    forward: &EnergyDistribution,
    reverse: &EnergyDistribution,
) -> Result<Check, Failure> {
    match ctx.beta() {
        Some(beta) => Check::from(check_crooks(forward, reverse, beta, CROOKS_FLOOR)),
        None => Ok(zero_temperature_reason()),
    }
}

/// Symmetry over one drive period, or over `t_final` for a static model.
fn symmetry(ctx: &Context, t_final: f64) -> Result<(f64, Check), Failure> {
    let t = ctx.model.drive_period().unwrap_or(t_final);
    if ctx.beta().is_none() {
        return Ok((t, zero_temperature_reason()));
    }
    let spacing = ctx.cfg.spacing(&ctx.model);
    let us: Vec<f64> = (0..SYMMETRY_POINTS)
        .map(|k| (-1.0 + 2.0 * k as f64 / SYMMETRY_POINTS as f64) * std::f64::consts::PI / spacing)
        .collect();
    Ok((t, Check::from(check_symmetry(&ctx.model, t, &us, ctx.control))?))
}

pub fn simulate(ctx: &Context) -> Result<(), Failure> {
    let t_final = ctx.cfg.t_final(&ctx.model)?;
    let grid = ctx.grid();
    let work = work_distribution(&ctx.model, t_final, false, grid, ctx.control)?;
    let heat = heat_distribution(&ctx.model, t_final, grid, ctx.control)?;
    ctx.out.distribution(&ctx.cfg.output.work_csv, &work)?;
    ctx.out.distribution(&ctx.cfg.output.heat_csv, &heat)?;

    let quantum = ctx.cfg.quantum(&ctx.model);
    let times = sample_times(t_final, ctx.cfg.run.samples);
    let h = 0.1 / grid.spacing;
    let temperature = ctx.model.temperature();
    let w = moment_series(&ctx.model, Quantity::Work, &times, h, ctx.control)?;
    let q = moment_series(&ctx.model, Quantity::Heat, &times, h, ctx.control)?;
    let series = w
        .into_iter()
        .zip(q)
        .map(|((t, w), (_, q))| MomentRow {
            t,
            work: w.moments().with_ratio(temperature, quantum),
            heat: q.moments().with_ratio(temperature, quantum),
        })
        .collect();
    ctx.out
        .json(&ctx.cfg.output.moments_json, "moments", &Moments { quantum, series })?;

    let crooks_max_dev = match ctx.beta() {
        Some(_) => {
            let reverse = work_distribution(&ctx.model, t_final, true, grid, ctx.control)?;
            crooks(ctx, &work, &reverse)?
        }
        None => zero_temperature_reason(),
    };
    let checks = Checks {
        t: t_final,
        jarzynski_residual: jarzynski(ctx, t_final)?,
        crooks_max_dev,
        symmetry_max_dev: symmetry(ctx, t_final)?.1,
    };
    ctx.out.json(&ctx.cfg.output.checks_json, "fluctuation_checks", &checks)
}

#[derive(Serialize)]
struct LongTime {
    quantum: f64,
    lambda1: Vec<f64>,
    lambda2: Vec<f64>,
    lambda12: f64,
    total_lambda1: f64,
    total_lambda2: f64,
    fano: f64,
    fano_single: Vec<f64>,
}

pub fn longtime(ctx: &Context) -> Result<(), Failure> {
    let set = cumulant_expansion(&ctx.model)?;
    let doc = LongTime {
        quantum: set.quantum,
        fano_single: (0..set.lambda1.len()).map(|k| set.fano_single(k)).collect(),
        total_lambda1: set.total_lambda1(),
        total_lambda2: set.total_lambda2(),
        fano: set.fano(),
        lambda1: set.lambda1,
        lambda2: set.lambda2,
        lambda12: set.lambda12,
    };
    ctx.out.json(&ctx.cfg.output.cumulants_json, "cumulants", &doc)
}

pub fn sweep(ctx: &Context) -> Result<(), Failure> {
    let axes = ctx
        .cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Failure::Config("sweep: missing [sweep] block".into()))?;
    if !matches!(ctx.cfg.system, crate::config::SystemConfig::CoupledQubits { .. }) {
        return Err(Failure::Config("sweep: system.type must be coupled_qubits".into()));
    }
    let (omegas, omega_xxs) = (axes.omega.values(), axes.omega_xx.values());
    if omegas.is_empty() || omega_xxs.is_empty() {
        return Err(Failure::Config("sweep: empty axis".into()));
    }
    let points = sweep_fano(&omegas, &omega_xxs, ctx.cfg.gamma()?);
    for p in points.iter().filter(|p| p.error.is_some()) {
        log::warn!("sweep point ({}, {}) failed: {}", p.omega, p.omega_xx, p.error.as_deref().unwrap_or(""));
    }
    ctx.out.csv(
        &ctx.cfg.output.sweep_csv,
        &["omega", "omega_xx", "fano_double", "fano_single", "c12_rate", "entangled_flag", "error"],
        points.into_iter().map(|p| {
            vec![
                Some(num(p.omega)),
                Some(num(p.omega_xx)),
                opt_num(p.fano_double),
                opt_num(p.fano_single),
                opt_num(p.c12_rate),
                Some(p.entangled_flag.to_string()),
                p.error,
            ]
        }),
    )
}

pub fn g2(ctx: &Context) -> Result<(), Failure> {
    let t_final = ctx.cfg.t_final(&ctx.model)?;
    let step = ctx.cfg.run.t_step.unwrap_or(t_final / 400.0);
    let n = (t_final / step).round() as usize;
    let times: Vec<f64> = (0..=n).map(|k| k as f64 * step).collect();
    let raw = g2_correlator(&ctx.model, &times, ctx.cfg.counting.channels.as_deref(), ctx.control)?;
    let values = match ctx.cfg.run.window {
        Some(w) => smooth_even(&times, &raw, w)?,
        None => raw,
    };
    let oracle = ctx.cfg.g2_oracle_parameters();
    ctx.out.csv(
        &ctx.cfg.output.g2_csv,
        &["t", "g2", "avg_g2_oracle"],
        times.iter().zip(values).map(|(&t, g)| {
            vec![
                Some(num(t)),
                Some(num(g)),
                oracle.map(|(gamma, omega_r)| num(avg_g2(t, gamma, omega_r))),
            ]
        }),
    )
}

struct Gate {
    name: &'static str,
    check: Check,
    tolerance: f64,
}

impl Gate {
    /// `None` when the gate does not apply.
    fn passed(&self) -> Option<bool> {
        self.check.value.map(|v| v <= self.tolerance)
    }
}

pub fn check_ft(ctx: &Context, source: CrooksSource) -> Result<(), Failure> {
    let t_final = ctx.cfg.t_final(&ctx.model)?;
    let grid = ctx.grid();
    let crooks_check = match (ctx.beta(), source) {
        (None, _) => zero_temperature_reason(),
        (Some(_), CrooksSource::Work) => {
            let fwd = work_distribution(&ctx.model, t_final, false, grid, ctx.control)?;
            let rev = work_distribution(&ctx.model, t_final, true, grid, ctx.control)?;
            crooks(ctx, &fwd, &rev)?
        }
        (Some(_), CrooksSource::Heat) => {
            let heat = heat_distribution(&ctx.model, t_final, grid, ctx.control)?;
            crooks(ctx, &heat, &heat)?
        }
    };
    let (t_sym, symmetry_check) = symmetry(ctx, t_final)?;
    let gates = [
        Gate {
            name: "jarzynski",
            check: jarzynski(ctx, t_final)?,
            tolerance: JARZYNSKI_TOL,
        },
        Gate {
            name: match source {
                CrooksSource::Work => "crooks(work)",
                CrooksSource::Heat => "crooks(heat)",
            },
            check: crooks_check,
            tolerance: CROOKS_TOL,
        },
        Gate {
            name: "symmetry",
            check: symmetry_check,
            tolerance: SYMMETRY_TOL,
        },
    ];
    println!("t_final = {t_final}, symmetry over t = {t_sym}");
    println!("{:<14} {:<6} {:>12} {:>10}", "gate", "status", "value", "tolerance");
    let mut failed = Vec::new();
    for g in &gates {
        let status = match g.passed() {
            Some(true) => "pass",
            Some(false) => {
                failed.push(g.name);
                "FAIL"
            }
            None => "skip",
        };
        let value = g.check.value.map_or_else(|| "-".to_string(), |v| format!("{v:.3e}"));
        println!("{:<14} {:<6} {:>12} {:>10.1e}", g.name, status, value, g.tolerance);
        if let Some(reason) = &g.check.reason {
            println!("{:<14} {reason}", "");
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Gate(failed.join(", ")))
    }
}
