//! Run manifest: configuration snapshot, per-stage timings, hard checks,
//! metrics, and recorded solver aborts, serialized to `summary.json`.

use crate::config::ExperimentConfig;
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

/// One hard pass/fail check; any failure makes the process exit nonzero.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// A recorded solver abort (the run keeps going and reports it).
#[derive(Debug, Clone, Serialize)]
pub struct Abort {
    pub stage: String,
    pub error: String,
    /// Simulation time at which the solver stopped, when known.
    pub solver_time: Option<f64>,
    /// Wall-clock seconds since the Unix epoch when the abort was recorded.
    pub unix_time: f64,
}

#[derive(Debug, Clone, Serialize)]
struct Timing {
    stage: String,
    seconds: f64,
}

/// Everything `summary.json` holds.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub version: String,
    pub scenario: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    timings: Vec<Timing>,
    checks: Vec<Check>,
    metrics: BTreeMap<String, f64>,
    aborts: Vec<Abort>,
    pub passed: bool,
}

impl RunManifest {
    pub fn new(config: ExperimentConfig) -> Self {
        RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            scenario: config.scenario.name().to_string(),
            seed: config.seed,
            config,
            timings: Vec::new(),
            checks: Vec::new(),
            metrics: BTreeMap::new(),
            aborts: Vec::new(),
            passed: true,
        }
    }

    /// Runs `f` as a named stage and records its wall-clock duration.
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> T) -> T {
        let start = Instant::now();
        let out = f(self);
        self.timings.push(Timing {
            stage: name.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }

    /// Records a hard check. Each check name may appear exactly once.
    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        assert!(
            self.checks.iter().all(|c| c.name != name),
            "check {name} recorded twice"
        );
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        });
        self.passed &= passed;
    }

    /// Records an informational value (does not gate the exit status).
    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }

    /// Records a solver abort with a wall-clock timestamp.
    pub fn abort(&mut self, stage: &str, error: impl Into<String>, solver_time: Option<f64>) {
        let unix_time = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0);
        self.aborts.push(Abort {
            stage: stage.to_string(),
            error: error.into(),
            solver_time,
            unix_time,
        });
    }

    /// Writes `summary.json` (pretty-printed, LF endings).
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let mut body = serde_json::to_string_pretty(self).expect("manifest serializes");
        body.push('\n');
        std::fs::write(dir.join("summary.json"), body)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_config, Scenario};

    fn config() -> ExperimentConfig {
        let dir = std::env::temp_dir().join(format!("sp-manifest-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.toml");
        std::fs::write(&path, "[run]\nscenario = \"justify\"\n").unwrap();
        parse_config(&path, Scenario::Justify).unwrap()
    }

    #[test]
    fn failed_check_flips_the_verdict() {
        let mut m = RunManifest::new(config());
        m.check("a", true, "");
        assert!(m.passed);
        m.check("b", false, "boom");
        assert!(!m.passed);
    }

    #[test]
    #[should_panic(expected = "recorded twice")]
    fn duplicate_check_names_are_a_bug() {
        let mut m = RunManifest::new(config());
        m.check("a", true, "");
        m.check("a", true, "");
    }
}
