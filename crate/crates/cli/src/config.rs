//! Experiment configuration: TOML files with sections `[grid]`, `[data]`,
//! `[run]`, `[tolerances]`. Unknown keys are rejected, omitted keys take the
//! defaults of the standard small-data scenario.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

/// Errors from loading or validating a configuration file.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid config key {key}: {reason}")]
    Invalid { key: String, reason: String },
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        reason: reason.into(),
    }
}

/// The five executable scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Scenario {
    SimulateSp,
    SimulateKg,
    Justify,
    Converge,
    Balance,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::SimulateSp => "simulate-sp",
            Scenario::SimulateKg => "simulate-kg",
            Scenario::Justify => "justify",
            Scenario::Converge => "converge",
            Scenario::Balance => "balance",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        match name {
            "simulate-sp" => Some(Scenario::SimulateSp),
            "simulate-kg" => Some(Scenario::SimulateKg),
            "justify" => Some(Scenario::Justify),
            "converge" => Some(Scenario::Converge),
            "balance" => Some(Scenario::Balance),
            _ => None,
        }
    }

    /// Scenarios that run the paired-trajectory machinery and therefore
    /// inherit the `s > 7/2` hypothesis.
    fn needs_sobolev_index(self) -> bool {
        matches!(
            self,
            Scenario::Justify | Scenario::Converge | Scenario::Balance
        )
    }
}

/// Initial data profiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ShapeKind {
    GaussianDerivative,
    SinePacket,
}

impl ShapeKind {
    pub fn to_core(self) -> shortpulse::short_pulse::DataShape {
        match self {
            ShapeKind::GaussianDerivative => {
                shortpulse::short_pulse::DataShape::GaussianDerivative
            }
            ShapeKind::SinePacket => shortpulse::short_pulse::DataShape::SinePacket,
        }
    }
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    grid: Option<RawGrid>,
    data: Option<RawData>,
    run: Option<RawRun>,
    tolerances: Option<RawTolerances>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    length: Option<f64>,
    n: Option<usize>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawData {
    shape: Option<String>,
    amplitude: Option<f64>,
    width: Option<f64>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawRun {
    scenario: Option<String>,
    epsilon: Option<Vec<f64>>,
    t_end: Option<f64>,
    dt: Option<f64>,
    cfl: Option<f64>,
    s: Option<f64>,
    delta_cap: Option<f64>,
    samples: Option<usize>,
    seed: Option<u64>,
    out_dir: Option<String>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawTolerances {
    mean_tol: Option<f64>,
    residual_cap: Option<f64>,
    constant_cap: Option<f64>,
    perturbation: Option<f64>,
}

/// Validated configuration with all defaults applied. Serialized verbatim
/// into the run manifest.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub grid_length: f64,
    pub grid_n: usize,
    pub shape: ShapeKind,
    /// `None` tunes the amplitude so the smallness functional meets
    /// `delta_cap`.
    pub amplitude: Option<f64>,
    pub width: f64,
    pub epsilon: Vec<f64>,
    pub t_end: f64,
    /// Explicit integrator step; `None` derives one from the stability cap.
    pub dt: Option<f64>,
    pub cfl: f64,
    pub s: f64,
    pub delta_cap: f64,
    pub samples: usize,
    pub seed: u64,
    pub out_dir: Option<String>,
    pub mean_tol: f64,
    pub residual_cap: f64,
    pub constant_cap: f64,
    pub perturbation: f64,
}

impl ExperimentConfig {
    pub fn justify_options(&self) -> shortpulse::justification::JustifyOptions {
        shortpulse::justification::JustifyOptions {
            t_end: self.t_end,
            samples: self.samples,
            s: self.s,
            cfl: self.cfl,
            mean_tol: self.mean_tol,
            ..shortpulse::justification::JustifyOptions::default()
        }
    }
}

/// Parses and validates the file at `path` for the scenario selected on the
/// command line. A `scenario` key in the file must agree with the
/// subcommand.
pub fn parse_config(path: &Path, scenario: Scenario) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let raw: RawConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    validate(raw, scenario)
}

fn validate(raw: RawConfig, scenario: Scenario) -> Result<ExperimentConfig, ConfigError> {
    let grid = raw.grid.unwrap_or_default();
    let data = raw.data.unwrap_or_default();
    let run = raw.run.unwrap_or_default();
    let tol = raw.tolerances.unwrap_or_default();

    if let Some(named) = &run.scenario {
        let parsed = Scenario::from_name(named)
            .ok_or_else(|| invalid("run.scenario", format!("unknown scenario {named:?}")))?;
        if parsed != scenario {
            return Err(invalid(
                "run.scenario",
                format!(
                    "config names scenario {:?} but the {:?} subcommand was invoked",
                    named,
                    scenario.name()
                ),
            ));
        }
    }

    let grid_length = grid.length.unwrap_or(64.0 * PI);
    if !(grid_length > 0.0) {
        return Err(invalid("grid.length", "must be positive"));
    }
    let grid_n = grid.n.unwrap_or(1024);
    if grid_n < 8 || grid_n % 2 != 0 {
        return Err(invalid("grid.n", "must be even and at least 8"));
    }

    let shape = match data.shape.as_deref() {
        None | Some("gaussian_derivative") => ShapeKind::GaussianDerivative,
        Some("sine_packet") => ShapeKind::SinePacket,
        Some(other) => {
            return Err(invalid(
                "data.shape",
                format!("unknown shape {other:?} (expected gaussian_derivative or sine_packet)"),
            ))
        }
    };
    if let Some(a) = data.amplitude {
        if !(a >= 0.0) {
            return Err(invalid("data.amplitude", "must be non-negative"));
        }
    }
    let width = data.width.unwrap_or(1.0);
    if !(width > 0.0) {
        return Err(invalid("data.width", "must be positive"));
    }

    let epsilon = run
        .epsilon
        .unwrap_or_else(shortpulse::justification::default_epsilons);
    if epsilon.is_empty() {
        return Err(invalid("run.epsilon", "needs at least one value"));
    }
    for &e in &epsilon {
        if !(e > 0.0 && e < 1.0) {
            return Err(invalid(
                "run.epsilon",
                format!("every value must lie in (0, 1), got {e}"),
            ));
        }
    }

    let t_end = run.t_end.unwrap_or(1.0);
    if !(t_end > 0.0) {
        return Err(invalid("run.t_end", "must be positive"));
    }
    if let Some(dt) = run.dt {
        if !(dt > 0.0) {
            return Err(invalid("run.dt", "must be positive"));
        }
    }
    let cfl = run.cfl.unwrap_or(0.2);
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(invalid("run.cfl", "must lie in (0, 1]"));
    }
    let s = run.s.unwrap_or(4.0);
    if scenario.needs_sobolev_index() && !(s > 3.5) {
        return Err(invalid(
            "run.s",
            format!("scenario {} requires s > 7/2, got {s}", scenario.name()),
        ));
    }
    let delta_cap = run.delta_cap.unwrap_or(0.1);
    if !(delta_cap > 0.0) {
        return Err(invalid("run.delta_cap", "must be positive"));
    }
    let samples = run.samples.unwrap_or(50);
    if samples < 2 {
        return Err(invalid("run.samples", "needs at least two intervals"));
    }

    let mean_tol = tol.mean_tol.unwrap_or(shortpulse::spectral::MEAN_TOL);
    if !(mean_tol > 0.0) {
        return Err(invalid("tolerances.mean_tol", "must be positive"));
    }
    let residual_cap = tol.residual_cap.unwrap_or(1e-3);
    if !(residual_cap > 0.0) {
        return Err(invalid("tolerances.residual_cap", "must be positive"));
    }
    let constant_cap = tol.constant_cap.unwrap_or(1e3);
    if !(constant_cap > 0.0) {
        return Err(invalid("tolerances.constant_cap", "must be positive"));
    }
    let perturbation = tol.perturbation.unwrap_or(0.5);
    if !(0.0..=1.0).contains(&perturbation) {
        return Err(invalid(
            "tolerances.perturbation",
            "must lie in [0, 1] (the proximity bound uses cap 1)",
        ));
    }

    Ok(ExperimentConfig {
        scenario,
        grid_length,
        grid_n,
        shape,
        amplitude: data.amplitude,
        width,
        epsilon,
        t_end,
        dt: run.dt,
        cfl,
        s,
        delta_cap,
        samples,
        seed: run.seed.unwrap_or(12345),
        out_dir: run.out_dir,
        mean_tol,
        residual_cap,
        constant_cap,
        perturbation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_str(text: &str, scenario: Scenario) -> Result<ExperimentConfig, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        validate(raw, scenario)
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_str("[run]\nscenario = \"converge\"\n", Scenario::Converge).unwrap();
        assert_eq!(cfg.s, 4.0);
        assert_eq!(cfg.cfl, 0.2);
        assert_eq!(cfg.epsilon, vec![0.2, 0.1, 0.05, 0.025]);
        assert_eq!(cfg.grid_n, 1024);
        assert_eq!(cfg.samples, 50);
        assert!(cfg.amplitude.is_none());
    }

    #[test]
    fn low_sobolev_index_is_rejected_for_converge() {
        let err = parse_str("[run]\ns = 3.0\n", Scenario::Converge).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { key, .. } if key == "run.s"));
        // The plain simulation scenarios accept any Sobolev index.
        assert!(parse_str("[run]\ns = 3.0\n", Scenario::SimulateSp).is_ok());
    }

    #[test]
    fn negative_horizon_is_rejected() {
        let err = parse_str("[run]\nt_end = -1.0\n", Scenario::Justify).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { key, .. } if key == "run.t_end"));
    }

    #[test]
    fn epsilon_outside_unit_interval_is_rejected() {
        let err = parse_str("[run]\nepsilon = [0.5, 1.0]\n", Scenario::Justify).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { key, .. } if key == "run.epsilon"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse_str("[run]\nbogus = 1\n", Scenario::Justify).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("bogus"), "error should name the key: {msg}");
        let err = parse_str("[typo]\nx = 1\n", Scenario::Justify).unwrap_err();
        assert!(format!("{err}").contains("typo"));
    }

    #[test]
    fn scenario_mismatch_is_rejected() {
        let err = parse_str("[run]\nscenario = \"balance\"\n", Scenario::Justify).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { key, .. } if key == "run.scenario"));
    }
}
