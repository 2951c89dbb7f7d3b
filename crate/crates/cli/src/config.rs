//! Run configuration, read from TOML or JSON.

use std::path::Path;

use fcs_core::linop::{re, sigma_minus, sigma_x, sigma_z};
use fcs_core::model::{self, DriveTerm, JumpChannel};
use fcs_core::{SystemModel, Temperature};
use serde::Deserialize;

use crate::Failure;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemConfig,
    #[serde(default)]
    pub bath: BathConfig,
    #[serde(default)]
    pub counting: CountingConfig,
    #[serde(default)]
    pub run: RunBlock,
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemConfig {
    DrivenQubit {
        #[serde(default = "one")]
        nu: f64,
        omega: f64,
        omega_d: Option<f64>,
        #[serde(default)]
        phase: f64,
        /// Drive switched off from this time on.
        drive_cutoff: Option<f64>,
    },
    RwaQubit {
        omega: f64,
        #[serde(default)]
        delta: f64,
    },
    HarmonicOscillator {
        #[serde(default = "one")]
        nu: f64,
        omega: f64,
        omega_d: Option<f64>,
        n_fock: Option<usize>,
        #[serde(default)]
        rotating: bool,
    },
    CoupledQubits {
        omega: f64,
        omega_xx: f64,
    },
    ThreeLevel {
        omega_r: f64,
    },
    UndrivenQubit {
        #[serde(default = "one")]
        nu: f64,
    },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathConfig {
    /// Downward rate Γ₋.
    pub gamma: Option<f64>,
    pub beta: Option<f64>,
    #[serde(default)]
    pub zero_temperature: bool,
}

fn default_grid() -> usize {
    64
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountingConfig {
    #[serde(default = "default_grid")]
    pub grid_size: usize,
    /// Lattice spacing Δ; defaults to the channel quantum.
    pub spacing: Option<f64>,
    /// Channels collapsed and detected by `g2`; all when absent.
    pub channels: Option<Vec<usize>>,
}

impl Default for CountingConfig {
    fn default() -> Self {
        CountingConfig {
            grid_size: default_grid(),
            spacing: None,
            channels: None,
        }
    }
}

fn default_samples() -> usize {
    10
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    pub t_final: Option<f64>,
    /// Alternative to `t_final` in drive periods.
    pub periods: Option<f64>,
    pub dt: Option<f64>,
    /// Number of moment samples along `(0, t_final]`.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Moving-average window applied to `g2`.
    pub window: Option<f64>,
    /// Output step of the `g2` grid.
    pub t_step: Option<f64>,
}

impl Default for RunBlock {
    fn default() -> Self {
        RunBlock {
            t_final: None,
            periods: None,
            dt: None,
            samples: default_samples(),
            window: None,
            t_step: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    List(Vec<f64>),
    Range { start: f64, stop: f64, count: usize },
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Axis::List(v) => v.clone(),
            Axis::Range { start, stop, count } => match count {
                0 => vec![],
                1 => vec![*start],
                n => (0..*n)
                    .map(|k| start + (stop - start) * k as f64 / (*n - 1) as f64)
                    .collect(),
            },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub omega: Axis,
    pub omega_xx: Axis,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub work_csv: String,
    pub heat_csv: String,
    pub moments_json: String,
    pub checks_json: String,
    pub cumulants_json: String,
    pub sweep_csv: String,
    pub g2_csv: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            work_csv: "work_distribution.csv".into(),
            heat_csv: "heat_distribution.csv".into(),
            moments_json: "moments.json".into(),
            checks_json: "fluctuation_checks.json".into(),
            cumulants_json: "cumulants.json".into(),
            sweep_csv: "sweep.csv".into(),
            g2_csv: "g2.csv".into(),
        }
    }
}

fn config_error(field: &str, reason: impl std::fmt::Display) -> Failure {
    Failure::Config(format!("{field}: {reason}"))
}

fn positive(field: &str, value: f64) -> Result<f64, Failure> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(config_error(field, format!("must be positive, got {value}")))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
        let json = path
            .extension()
            .is_some_and(|ext| ext.eq_ignore_ascii_case("json"));
        let cfg: RunConfig = if json {
            serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), Failure> {
        let n = self.counting.grid_size;
        if n < 2 || !n.is_power_of_two() {
            return Err(config_error("counting.grid_size", format!("must be a power of two, got {n}")));
        }
        if let Some(s) = self.counting.spacing {
            positive("counting.spacing", s)?;
        }
        if let Some(t) = self.run.t_final {
            positive("run.t_final", t)?;
        }
        if let Some(p) = self.run.periods {
            positive("run.periods", p)?;
        }
        if self.run.t_final.is_some() && self.run.periods.is_some() {
            return Err(config_error("run", "give either t_final or periods, not both"));
        }
        if let Some(dt) = self.run.dt {
            positive("run.dt", dt)?;
        }
        if let Some(w) = self.run.window {
            positive("run.window", w)?;
        }
        if let Some(s) = self.run.t_step {
            positive("run.t_step", s)?;
        }
        if self.run.samples == 0 {
            return Err(config_error("run.samples", "must be at least 1"));
        }
        if let Some(beta) = self.bath.beta {
            if !(beta >= 0.0 && beta.is_finite()) {
                return Err(config_error("bath.beta", format!("must be finite and non-negative, got {beta}")));
            }
            if self.bath.zero_temperature {
                return Err(config_error("bath", "give either beta or zero_temperature, not both"));
            }
        }
        Ok(())
    }

    pub fn gamma(&self) -> Result<f64, Failure> {
        positive(
            "bath.gamma",
            self.bath.gamma.ok_or_else(|| config_error("bath.gamma", "missing"))?,
        )
    }

    fn temperature(&self) -> Result<Temperature, Failure> {
        match (self.bath.beta, self.bath.zero_temperature) {
            (Some(beta), false) => Ok(Temperature::Finite(beta)),
            (None, true) => Ok(Temperature::Zero),
            _ => Err(config_error("bath", "set beta or zero_temperature = true")),
        }
    }

    fn zero_temperature_only(&self, kind: &str) -> Result<(), Failure> {
        if self.bath.beta.is_some() {
            return Err(config_error("bath.beta", format!("system `{kind}` is defined at zero temperature only")));
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<SystemModel, Failure> {
        let gamma = self.gamma()?;
        let model = match &self.system {
            SystemConfig::DrivenQubit {
                nu,
                omega,
                omega_d,
                phase,
                drive_cutoff,
            } => {
                let nu = positive("system.nu", *nu)?;
                let drive = DriveTerm::cosine(sigma_x(), *omega, omega_d.unwrap_or(nu), *phase)?;
                let channel = JumpChannel::new(sigma_minus(), nu, gamma, 0)?;
                let m = SystemModel::new(sigma_z() * re(nu / 2.0), vec![drive], vec![channel], self.temperature()?)?;
                match drive_cutoff {
                    Some(t1) => m.with_drive_cutoff(positive("system.drive_cutoff", *t1)?),
                    None => m,
                }
            }
            SystemConfig::RwaQubit { omega, delta } => {
                self.zero_temperature_only("rwa_qubit")?;
                model::build_rwa_qubit(*omega, *delta, gamma)?
            }
            SystemConfig::HarmonicOscillator {
                nu,
                omega,
                omega_d,
                n_fock,
                rotating,
            } => {
                self.zero_temperature_only("harmonic_oscillator")?;
                let omega_d = omega_d.unwrap_or(*nu);
                let n = n_fock.unwrap_or_else(|| {
                    model::auto_fock_dimension(model::coherent_occupation(*nu, *omega, omega_d, gamma), 1e-12)
                });
                if *rotating {
                    model::build_harmonic_oscillator_rotating(*nu, *omega, omega_d, gamma, n)?
                } else {
                    model::build_harmonic_oscillator(*nu, *omega, omega_d, gamma, n)?
                }
            }
            SystemConfig::CoupledQubits { omega, omega_xx } => {
                self.zero_temperature_only("coupled_qubits")?;
                model::build_coupled_qubits(*omega, *omega_xx, gamma)?
            }
            SystemConfig::ThreeLevel { omega_r } => {
                self.zero_temperature_only("three_level")?;
                model::build_three_level(*omega_r, gamma)?
            }
            SystemConfig::UndrivenQubit { nu } => {
                let beta = self
                    .bath
                    .beta
                    .ok_or_else(|| config_error("bath.beta", "required for undriven_qubit"))?;
                model::build_undriven_qubit(*nu, gamma, beta)?
            }
        };
        Ok(model)
    }

    /// Energy quantum of the first channel.
    pub fn quantum(&self, model: &SystemModel) -> f64 {
        model.channels().first().map(|c| c.transition_energy).unwrap_or(1.0)
    }

    pub fn spacing(&self, model: &SystemModel) -> f64 {
        self.counting.spacing.unwrap_or_else(|| self.quantum(model))
    }

    pub fn t_final(&self, model: &SystemModel) -> Result<f64, Failure> {
        match (self.run.t_final, self.run.periods) {
            (Some(t), _) => Ok(t),
            (None, Some(p)) => model
                .drive_period()
                .map(|period| p * period)
                .ok_or_else(|| config_error("run.periods", "system has no periodic drive")),
            (None, None) => Err(config_error("run.t_final", "missing (or give run.periods)")),
        }
    }

    /// `(Γ, Ω_R)` for the averaged three-level correlation, when the system has one.
    pub fn g2_oracle_parameters(&self) -> Option<(f64, f64)> {
        let gamma = self.bath.gamma?;
        match self.system {
            SystemConfig::CoupledQubits { omega, omega_xx } => {
                Some((gamma, model::effective_rabi_frequency(omega, omega_xx)))
            }
            SystemConfig::ThreeLevel { omega_r } => Some((gamma, omega_r)),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig, Failure> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Failure::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    #[test]
    fn driven_qubit_config() {
        let cfg = parse(
            "[system]\ntype = \"driven_qubit\"\nomega = 0.05\n[bath]\ngamma = 0.007\nbeta = 2.0\n[run]\nperiods = 5\n",
        )
        .unwrap();
        let m = cfg.build_model().unwrap();
        assert!((cfg.t_final(&m).unwrap() - 10.0 * std::f64::consts::PI).abs() < 1e-12);
        assert_eq!(cfg.spacing(&m), 1.0);
        assert_eq!(cfg.counting.grid_size, 64);
    }

    #[test]
    fn unknown_field_rejected() {
        let err = parse("[system]\ntype = \"rwa_qubit\"\nomega = 1.0\nomgea = 2\n").unwrap_err();
        assert!(matches!(err, Failure::Config(m) if m.contains("omgea")));
    }

    #[test]
    fn grid_must_be_power_of_two() {
        let err = parse("[system]\ntype = \"rwa_qubit\"\nomega = 1.0\n[counting]\ngrid_size = 48\n").unwrap_err();
        assert!(matches!(err, Failure::Config(m) if m.contains("counting.grid_size")));
    }

    #[test]
    fn temperature_required_for_driven_qubit() {
        let cfg = parse("[system]\ntype = \"driven_qubit\"\nomega = 0.05\n[bath]\ngamma = 0.007\n").unwrap();
        assert!(matches!(cfg.build_model(), Err(Failure::Config(m)) if m.contains("bath")));
    }

    #[test]
    fn rwa_rejects_beta() {
        let cfg = parse("[system]\ntype = \"rwa_qubit\"\nomega = 1.0\n[bath]\ngamma = 1.0\nbeta = 1.0\n").unwrap();
        assert!(matches!(cfg.build_model(), Err(Failure::Config(m)) if m.contains("bath.beta")));
    }

    #[test]
    fn axis_forms() {
        assert_eq!(Axis::Range { start: 1.0, stop: 3.0, count: 3 }.values(), vec![1.0, 2.0, 3.0]);
        assert_eq!(Axis::List(vec![4.0]).values(), vec![4.0]);
    }
}
