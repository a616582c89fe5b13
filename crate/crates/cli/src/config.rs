//! Experiment configuration: defaults, an optional TOML file, and flag
//! overrides, merged in that order.

use anyhow::{ensure, Context, Result};
use serde::Deserialize;
use sirlab::model::{InitialCondition, ModelParams, Scenario};
use sirlab::ode::OdeOptions;
use sirlab::tolerances::{DEFAULT_ABS_TOL, DEFAULT_REL_TOL};
use sirlab::trajectory::uniform_grid;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Label stamped into every emitted table's metadata.
    pub name: String,
    pub tau: f64,
    pub gamma: f64,
    pub n: u32,
    pub s0: f64,
    pub i0: f64,
    pub t_end: f64,
    pub dt: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Population sweep for figure1, figure2 and converge.
    pub n_list: Vec<u32>,
    /// Transmission-rate sweep for figure2.
    pub tau_list: Vec<f64>,
    pub closure_lower: [f64; 4],
    pub closure_upper: [f64; 4],
    /// Alternative upper family used on the fast-transmission figure row.
    pub closure_upper_strong: [f64; 4],
    /// Replications for gillespie, instance count for lemmas.
    pub reps: u64,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "default".to_string(),
            tau: 3.0,
            gamma: 0.25,
            n: 30,
            s0: 0.9,
            i0: 0.1,
            t_end: 5.0,
            dt: 0.01,
            rel_tol: DEFAULT_REL_TOL,
            abs_tol: DEFAULT_ABS_TOL,
            n_list: vec![10, 30, 100],
            tau_list: vec![1.0, 3.0],
            closure_lower: [0.5, 1.0, 0.5, 1.0],
            closure_upper: [-1.0, -0.8, -0.4, 0.5],
            closure_upper_strong: [-1.0, -1.0, -0.8, 1.0],
            reps: 20_000,
            seed: 0,
            out: PathBuf::from("out"),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub tau: Option<f64>,
    pub gamma: Option<f64>,
    pub n: Option<u32>,
    pub s0: Option<f64>,
    pub i0: Option<f64>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub reps: Option<u64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let cfg = match path {
            None => Self::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config file {}", p.display()))?;
                toml::from_str(&text)
                    .with_context(|| format!("parsing config file {}", p.display()))?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies flag overrides. A single --n or --tau also narrows the sweep
    /// lists, so the sweep subcommands honor the flags.
    pub fn apply(&mut self, ov: &Overrides) -> Result<()> {
        if let Some(tau) = ov.tau {
            self.tau = tau;
            self.tau_list = vec![tau];
        }
        if let Some(n) = ov.n {
            self.n = n;
            self.n_list = vec![n];
        }
        if let Some(gamma) = ov.gamma {
            self.gamma = gamma;
        }
        if let Some(s0) = ov.s0 {
            self.s0 = s0;
        }
        if let Some(i0) = ov.i0 {
            self.i0 = i0;
        }
        if let Some(t_end) = ov.t_end {
            self.t_end = t_end;
        }
        if let Some(dt) = ov.dt {
            self.dt = dt;
        }
        if let Some(reps) = ov.reps {
            self.reps = reps;
        }
        if let Some(seed) = ov.seed {
            self.seed = seed;
        }
        if let Some(out) = &ov.out {
            self.out = out.clone();
        }
        self.validate()
    }

    fn validate(&self) -> Result<()> {
        ensure!(!self.n_list.is_empty(), "n_list must not be empty");
        ensure!(!self.tau_list.is_empty(), "tau_list must not be empty");
        ensure!(
            self.rel_tol > 0.0 && self.abs_tol > 0.0,
            "solver tolerances must be positive"
        );
        Ok(())
    }

    /// The single-run parameter set (checks rates and the population).
    pub fn params(&self) -> Result<ModelParams> {
        Ok(ModelParams::new(self.tau, self.gamma, self.n)?)
    }

    pub fn initial(&self) -> Result<InitialCondition> {
        Ok(InitialCondition::new(self.s0, self.i0)?)
    }

    /// The single-run scenario (additionally checks count integrality).
    pub fn scenario(&self) -> Result<Scenario> {
        Ok(Scenario::new(self.params()?, self.initial()?)?)
    }

    pub fn grid(&self) -> Result<Vec<f64>> {
        Ok(uniform_grid(self.t_end, self.dt)?)
    }

    pub fn ode_options(&self) -> OdeOptions<f64> {
        OdeOptions::with_tolerances(self.rel_tol, self.abs_tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn defaults_validate_and_build_a_scenario() {
        let cfg = ExperimentConfig::default();
        assert!(cfg.scenario().is_ok());
        assert_eq!(cfg.grid().unwrap().len(), 501);
    }

    #[test]
    fn file_values_are_read_and_flags_win() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "tau = 1.0\nn = 10\nseed = 42").unwrap();
        let mut cfg = ExperimentConfig::load(Some(file.path())).unwrap();
        assert_eq!(cfg.tau, 1.0);
        assert_eq!(cfg.n, 10);
        assert_eq!(cfg.seed, 42);
        let ov = Overrides { tau: Some(3.0), ..Default::default() };
        cfg.apply(&ov).unwrap();
        assert_eq!(cfg.tau, 3.0);
        assert_eq!(cfg.tau_list, vec![3.0]);
        assert_eq!(cfg.n, 10);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "tua = 1.0").unwrap();
        assert!(ExperimentConfig::load(Some(file.path())).is_err());
    }

    #[test]
    fn empty_sweeps_are_rejected() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "n_list = []").unwrap();
        assert!(ExperimentConfig::load(Some(file.path())).is_err());
    }
}
