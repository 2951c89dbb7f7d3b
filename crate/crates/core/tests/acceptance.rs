//! Acceptance criteria. Each test prints one `criterion N: PASS|FAIL` line.

use std::f64::consts::{PI, SQRT_2};
use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use fcs_core::evolve::{generating_function_heat, generating_function_work, Quantity, StepControl};
use fcs_core::linop::{c, re, sigma_minus, sigma_x, sigma_z};
use fcs_core::longtime::{
    cumulant_expansion, dominant_eigenvalue_numeric, g2_correlator, smooth_even, sweep_fano,
};
use fcs_core::model::*;
use fcs_core::oracles::{undriven_heat_gf, avg_g2, ho_lambda, qubit_fano};
use fcs_core::stats::*;
use fcs_core::CountingField;

const NU: f64 = 1.0;
const OMEGA: f64 = 0.05;
const GAMMA: f64 = 0.007;
const BETA: f64 = 2.0;
const PERIOD: f64 = 2.0 * PI;
const REFERENCE_WORK: [f64; 6] = [0.0031, 0.0589, 0.3305, 0.4351, 0.1693, 0.0030];
const REFERENCE_HEAT: [f64; 5] = [0.0017, 0.0609, 0.7676, 0.1593, 0.0106];

fn report(n: u32, ok: bool, detail: String) {
    // written to the stream itself so the line also shows for passing tests
    let line = format!("criterion {n}: {} - {detail}\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    assert!(ok, "criterion {n} failed: {detail}");
}

fn reference_model() -> SystemModel {
    build_driven_qubit(NU, OMEGA, NU, GAMMA, Temperature::Finite(BETA)).unwrap()
}

struct ReferenceRun {
    work: EnergyDistribution,
    work_reversed: EnergyDistribution,
    heat: EnergyDistribution,
    elapsed: Duration,
}

fn reference_run() -> &'static ReferenceRun {
    static CELL: OnceLock<ReferenceRun> = OnceLock::new();
    CELL.get_or_init(|| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        pool.install(|| {
            let m = reference_model();
            let t = 5.0 * PERIOD;
            let grid = GridSettings::new(64, NU);
            let control = StepControl::default();
            let start = Instant::now();
            let work = work_distribution(&m, t, false, grid, control).unwrap();
            let heat = heat_distribution(&m, t, grid, control).unwrap();
            let elapsed = start.elapsed();
            let work_reversed = work_distribution(&m, t, true, grid, control).unwrap();
            ReferenceRun {
                work,
                work_reversed,
                heat,
                elapsed,
            }
        })
    })
}

fn table_deviation(d: &EnergyDistribution, first: i32, table: &[f64]) -> (f64, Vec<f64>) {
    let produced: Vec<f64> = (0..table.len())
        .map(|k| d.probability_at((first + k as i32) as f64 * NU))
        .collect();
    let dev = produced
        .iter()
        .zip(table)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max);
    (dev, produced)
}

fn fmt(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

#[test]
fn criterion_01_work_distribution() {
    let f = reference_run();
    let (dev, produced) = table_deviation(&f.work, -2, &REFERENCE_WORK);
    let fast = f.elapsed < Duration::from_secs(30);
    report(
        1,
        dev <= 0.005 && fast,
        format!(
            "P_w(-2..3) = {} vs {}, max dev {dev:.4} (tol 0.005), runtime {:.2?} (target 30 s)",
            fmt(&produced),
            fmt(&REFERENCE_WORK),
            f.elapsed
        ),
    );
}

#[test]
fn criterion_02_heat_distribution() {
    let f = reference_run();
    let (dev, produced) = table_deviation(&f.heat, -2, &REFERENCE_HEAT);
    report(
        2,
        dev <= 0.005,
        format!("P_Q(-2..2) = {} vs {}, max dev {dev:.4} (tol 0.005)", fmt(&produced), fmt(&REFERENCE_HEAT)),
    );
}

#[test]
fn criterion_03_crooks() {
    let f = reference_run();
    let ratio = |w: f64| (f.work.probability_at(w) / f.work_reversed.probability_at(-w)).ln();
    let d1 = (ratio(NU) - BETA * NU).abs();
    let d2 = (ratio(2.0 * NU) - 2.0 * BETA * NU).abs();
    report(
        3,
        d1 <= 0.02 && d2 <= 0.05,
        format!("|ln ratio(1) - 2| = {d1:.4} (tol 0.02), |ln ratio(2) - 4| = {d2:.4} (tol 0.05)"),
    );
}

#[test]
fn criterion_04_jarzynski() {
    let residual = check_jarzynski(&reference_model(), 5.0 * PERIOD, StepControl::default()).unwrap();
    let table = EnergyDistribution::new(NU, -2, REFERENCE_WORK.to_vec()).unwrap();
    let table_avg = table.exponential_average(BETA);
    let table_dev = (table_avg - 0.9973).abs();
    report(
        4,
        residual <= 1e-3 && table_dev <= 0.005,
        format!(
            "|G_w(i beta, 5T) - 1| = {residual:.2e} (tol 1e-3); table sum P e^(-beta w) = {table_avg:.4}, \
             |.. - 0.9973| = {table_dev:.4} (tol 0.005)"
        ),
    );
}

#[test]
fn criterion_05_symmetry() {
    let us: Vec<f64> = (0..32).map(|k| -PI + 2.0 * PI * k as f64 / 32.0).collect();
    let dev = check_symmetry(&reference_model(), PERIOD, &us, StepControl::default()).unwrap();
    report(5, dev <= 1e-6, format!("max |G_w(u) - G_w^tr(i beta - u)| over 32 u = {dev:.2e} (tol 1e-6)"));
}

#[test]
fn criterion_06_harmonic_oscillator() {
    let start = Instant::now();
    let (gamma, omega) = (0.1, 0.05);
    let mean = coherent_occupation(NU, omega, NU, gamma);
    let n = auto_fock_dimension(mean, 1e-12);
    let m = build_harmonic_oscillator_rotating(NU, omega, NU, gamma, n).unwrap();
    let mut dev = 0.0f64;
    for k in 0..=20 {
        let u = -1.0 + 0.1 * k as f64;
        let num = dominant_eigenvalue_numeric(&m, &CountingField::real(&[u])).unwrap();
        dev = dev.max((num - ho_lambda(c(u, 0.0), NU, omega, NU, gamma)).norm());
    }
    let fano = cumulant_expansion(&m).unwrap().fano();
    let elapsed = start.elapsed();
    report(
        6,
        dev <= 1e-6 && (fano - 1.0).abs() <= 1e-6 && elapsed < Duration::from_secs(5),
        format!("fock {n}, max |lambda - oracle| = {dev:.2e} (tol 1e-6), fano = {fano:.9}, runtime {elapsed:.2?}"),
    );
}

#[test]
fn criterion_07_qubit_fano() {
    let start = Instant::now();
    let gamma = 1.0;
    let mut worst = 0.0f64;
    for i in 0..10 {
        for j in 0..10 {
            let omega = gamma * (0.1 + 4.9 * i as f64 / 9.0);
            let delta = gamma * 3.0 * j as f64 / 9.0;
            let f = cumulant_expansion(&build_rwa_qubit(omega, delta, gamma).unwrap()).unwrap().fano();
            let oracle = qubit_fano(omega, delta, gamma);
            worst = worst.max(((f - oracle) / oracle).abs());
        }
    }
    let mut boundary = 0.0f64;
    for omega in [0.3, 1.0, 4.0] {
        let m = build_rwa_qubit(omega, 3f64.sqrt() * gamma / 2.0, gamma).unwrap();
        boundary = boundary.max((cumulant_expansion(&m).unwrap().fano() - 1.0).abs());
    }
    let elapsed = start.elapsed();
    report(
        7,
        worst <= 1e-8 && boundary <= 1e-9 && elapsed < Duration::from_secs(5),
        format!("max rel dev {worst:.2e} (tol 1e-8), boundary |F - 1| = {boundary:.2e} (tol 1e-9), runtime {elapsed:.2?}"),
    );
}

#[test]
fn criterion_08_undriven_heat() {
    let (gamma, beta) = (0.2, 2.0);
    let control = StepControl::default();
    let m = build_undriven_qubit(NU, gamma, beta).unwrap();
    let mut dev = 0.0f64;
    for u in [c(0.3, 0.0), c(1.1, 0.0), c(0.0, beta)] {
        for gt in [0.1, 1.0, 10.0] {
            let t = gt / gamma;
            let g = generating_function_heat(&m, &CountingField::new(vec![u]), t, control).unwrap().value;
            dev = dev.max((g - undriven_heat_gf(u, t, NU, gamma, beta)).norm());
        }
    }
    let cold_beta = 20.0;
    let cold = build_undriven_qubit(NU, gamma, cold_beta).unwrap();
    let t = 50.0 / gamma;
    let g = generating_function_heat(&cold, &CountingField::new(vec![c(0.0, cold_beta)]), t, control)
        .unwrap()
        .value;
    let limit = (g - 2.0).norm();
    report(
        8,
        dev <= 1e-8 && limit <= 1e-3,
        format!("max |G_Q - closed form| = {dev:.2e} (tol 1e-8); |G_Q(i beta) - 2| at beta 20, Gamma t 50 = {limit:.2e} (tol 1e-3)"),
    );
}

#[test]
fn criterion_09_g2() {
    let control = StepControl::default();
    let (gamma, omega, omega_xx) = (1.0, 5.0, 40.0);
    let omega_r = effective_rabi_frequency(omega, omega_xx);

    let three = build_three_level(omega_r, gamma).unwrap();
    let times: Vec<f64> = (0..=200).map(|k| k as f64 * 0.05 / gamma).collect();
    let g3 = g2_correlator(&three, &times, None, control).unwrap();
    let dev3 = times
        .iter()
        .zip(&g3)
        .map(|(t, g)| (g - avg_g2(*t, gamma, omega_r)).abs())
        .fold(0.0, f64::max);

    let window = 2.0 * PI / omega_xx;
    let step = window / 40.0;
    let horizon = 3.0 / gamma + window;
    let fine: Vec<f64> = (0..=(horizon / step).ceil() as usize).map(|k| k as f64 * step).collect();
    let full = build_coupled_qubits(omega, omega_xx, gamma).unwrap();
    let raw = g2_correlator(&full, &fine, None, control).unwrap();
    let smooth = smooth_even(&fine, &raw, window).unwrap();
    let mut rel = 0.0f64;
    let mut bunched = true;
    for (t, g) in fine.iter().zip(&smooth) {
        if gamma * t <= 3.0 {
            let o = avg_g2(*t, gamma, omega_r);
            rel = rel.max(((g - o) / o).abs());
            bunched &= smooth[0] >= *g;
        }
    }
    report(
        9,
        dev3 <= 1e-8 && rel <= 0.05 && bunched,
        format!(
            "three-level max dev {dev3:.2e} (tol 1e-8); two-qubit smoothed rel dev {rel:.4} (tol 0.05), \
             g2(0) = {:.4}, bunching {bunched}",
            smooth[0]
        ),
    );
}

#[test]
fn criterion_10_fano_map_structure() {
    let start = Instant::now();
    let gamma = 1.0;
    let axis: Vec<f64> = (1..=40).map(|k| k as f64).collect();
    let points = sweep_fano(&axis, &axis, gamma);
    let failures = points.iter().filter(|p| p.error.is_some()).count();
    let super_points = points.iter().filter(|p| p.fano_double > 1.0).count();
    let violations = points
        .iter()
        .filter(|p| p.fano_double > 1.0 && p.omega_xx <= p.omega * p.omega / (2.0 * gamma))
        .count();

    let mut peak_ok = true;
    let mut single_ok = true;
    let mut peaks = Vec::new();
    for omega in [5.0, 10.0, 20.0] {
        let w = omega / SQRT_2;
        let line = sweep_fano(&[omega], &[w, 1.2 * w, 0.8 * w], gamma);
        peak_ok &= line[0].c12_rate > line[1].c12_rate && line[0].c12_rate > line[2].c12_rate;
        single_ok &= line[0].fano_single < 1.0;
        peaks.push(format!("{:.4}/{:.4}/{:.4}", line[0].c12_rate, line[1].c12_rate, line[2].c12_rate));
    }
    let elapsed = start.elapsed();
    report(
        10,
        failures == 0 && violations == 0 && peak_ok && single_ok && elapsed < Duration::from_secs(120),
        format!(
            "{super_points} super-Poissonian points, {violations} outside the entangled region, {failures} failed; \
             C12 rate line/+20%/-20% = {}; F1 < 1 on line {single_ok}; runtime {elapsed:.2?}",
            peaks.join(", ")
        ),
    );
}

#[test]
fn criterion_11_limits() {
    let control = StepControl::default();
    let h = 0.1 / NU;
    let m = reference_model();
    let early = moment_series(&m, Quantity::Work, &[PERIOD / 2.0], h, control).unwrap();
    let f_early = early[0].1.moments().with_ratio(m.temperature(), NU).ratio.unwrap();

    let hot = build_driven_qubit(NU, OMEGA, NU, GAMMA, Temperature::Finite(0.1 / NU)).unwrap();
    let times: Vec<f64> = (1..=20).map(|k| k as f64 * PERIOD / 2.0).collect();
    let series = moment_series(&hot, Quantity::Work, &times, h, control).unwrap();
    let hot_dev = series
        .iter()
        .map(|(_, k)| (k.moments().with_ratio(hot.temperature(), NU).ratio.unwrap() - 1.0).abs())
        .fold(0.0, f64::max);

    let t0 = 1e-3 / GAMMA;
    let heat = moment_series(&m, Quantity::Heat, &[t0], h, control).unwrap()[0].1;
    report(
        11,
        (f_early - 1.0).abs() <= 0.05 && hot_dev < 0.05 && heat.second > 0.0 && heat.first.abs() < 1e-6 * NU,
        format!(
            "F_w(T/2) = {f_early:.4}; max |F_w - 1| at beta 0.1 = {hot_dev:.4}; \
             at Gamma t 1e-3 Var Q = {:.3e}, <Q> = {:.3e}",
            heat.second, heat.first
        ),
    );
}

#[test]
fn criterion_12_zero_temperature_equivalence() {
    let t1 = 5.0 * PERIOD;
    let drive = DriveTerm::cosine(sigma_x(), OMEGA, NU, -PI / 2.0).unwrap();
    let channel = JumpChannel::new(sigma_minus(), NU, GAMMA, 0).unwrap();
    let m = SystemModel::new(sigma_z() * re(NU / 2.0), vec![drive], vec![channel], Temperature::Zero)
        .unwrap()
        .with_drive_cutoff(t1);
    let t = 20.0 / GAMMA;
    let control = StepControl::default();
    let mut dev = 0.0f64;
    for k in 0..=16 {
        let u = CountingField::real(&[-PI + 2.0 * PI * k as f64 / 16.0]);
        let w = generating_function_work(&m, &u, t, control).unwrap().value;
        let q = generating_function_heat(&m, &u, t, control).unwrap().value;
        dev = dev.max((w - q).norm());
    }
    report(12, dev <= 1e-4, format!("max |G_w - G_Q| at Gamma t 20 over u in [-pi, pi] = {dev:.2e} (tol 1e-4)"));
}
