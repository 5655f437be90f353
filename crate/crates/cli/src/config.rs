use std::path::{Path, PathBuf};

use fpp_core::lattice::WeightParams;
use fpp_core::oriented::{ensure_supercritical, DEFAULT_CRITICAL_P};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const WORKERS_ENV: &str = "FPP_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Alpha,
    Fpt,
    FCurve,
    Tail,
    Breakpoints,
    Traces,
    Probe,
    Oracle,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Alpha => "alpha",
            Experiment::Fpt => "fpt",
            Experiment::FCurve => "f-curve",
            Experiment::Tail => "tail",
            Experiment::Breakpoints => "breakpoints",
            Experiment::Traces => "traces",
            Experiment::Probe => "probe",
            Experiment::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Everything an experiment needs. Missing fields in a config file take the
/// defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub a: f64,
    pub b: f64,
    pub p: Option<f64>,
    pub p_grid: Option<Vec<f64>>,
    pub p0: Option<f64>,
    pub q: Option<f64>,
    pub n: Option<usize>,
    pub n_grid: Option<Vec<usize>>,
    pub reps: usize,
    /// Survival horizon for break points; `0` means "equal to the level
    /// count" in `breakpoints` and "no break-point estimate" in `alpha`.
    pub horizon: usize,
    pub eps: Option<f64>,
    /// Direction `x` for `fpt` and `traces`; targets sit near `n x`.
    pub direction: Option<[f64; 2]>,
    /// Frozen speed at `p0` (or at `p` for `tail`); estimated when absent.
    pub alpha0: Option<f64>,
    /// Level and replicate budget used when `alpha0` has to be estimated.
    pub alpha_n: usize,
    pub alpha_reps: usize,
    pub critical_p: f64,
    pub seed: u64,
    pub workers: Option<usize>,
    pub out_path: Option<PathBuf>,
    pub format: Option<Format>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Alpha,
            a: 1.0,
            b: 2.0,
            p: None,
            p_grid: None,
            p0: None,
            q: None,
            n: None,
            n_grid: None,
            reps: 100,
            horizon: 0,
            eps: None,
            direction: None,
            alpha0: None,
            alpha_n: 2000,
            alpha_reps: 400,
            critical_p: DEFAULT_CRITICAL_P,
            seed: 1,
            workers: None,
            out_path: None,
            format: None,
        }
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))
    }

    /// `p_grid`, or the single `p`.
    pub fn ps(&self) -> Result<Vec<f64>, CliError> {
        match (&self.p_grid, self.p) {
            (Some(g), _) if !g.is_empty() => Ok(g.clone()),
            (_, Some(p)) => Ok(vec![p]),
            _ => Err(bad("need p or p_grid")),
        }
    }

    /// `n_grid`, or the single `n`.
    pub fn ns(&self) -> Result<Vec<usize>, CliError> {
        match (&self.n_grid, self.n) {
            (Some(g), _) if !g.is_empty() => Ok(g.clone()),
            (_, Some(n)) => Ok(vec![n]),
            _ => Err(bad("need n or n_grid")),
        }
    }

    pub fn p0(&self) -> Result<f64, CliError> {
        self.p0.ok_or_else(|| bad("need p0"))
    }

    pub fn weights(&self, p: f64) -> Result<WeightParams, CliError> {
        WeightParams::new(self.a, self.b, p).map_err(|e| bad(e.to_string()))
    }

    pub fn workers(&self) -> usize {
        self.workers
            .or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse().ok()))
            .unwrap_or(1)
            .max(1)
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or(match &self.out_path {
            Some(p) if p.extension().is_some_and(|e| e == "json") => Format::Json,
            _ => Format::Csv,
        })
    }

    fn supercritical(&self, p: f64) -> Result<(), CliError> {
        ensure_supercritical(p, self.critical_p).map_err(|e| bad(e.to_string()))
    }

    /// Checks the preconditions of the selected experiment before any work
    /// starts.
    pub fn validate(&self) -> Result<(), CliError> {
        self.weights(0.5)?;
        if self.reps == 0 {
            return Err(bad("reps must be at least 1"));
        }
        let positive_ns = |ns: Vec<usize>| {
            if ns.contains(&0) {
                Err(bad("levels must be at least 1"))
            } else {
                Ok(())
            }
        };
        let probabilities = |ps: &[f64]| {
            for &p in ps {
                self.weights(p)?;
            }
            Ok::<(), CliError>(())
        };
        match self.experiment {
            Experiment::Alpha => {
                for p in self.ps()? {
                    self.weights(p)?;
                    self.supercritical(p)?;
                }
                positive_ns(self.ns()?)?;
            }
            Experiment::Fpt => {
                probabilities(&self.ps()?)?;
                positive_ns(self.ns()?)?;
                if self.direction == Some([0.0, 0.0]) {
                    return Err(bad("direction must be nonzero"));
                }
            }
            Experiment::FCurve | Experiment::Probe => {
                let p0 = self.p0()?;
                self.weights(p0)?;
                self.supercritical(p0)?;
                probabilities(&self.ps()?)?;
                positive_ns(self.ns()?)?;
                if self.alpha0.is_none() && self.alpha_n == 0 {
                    return Err(bad("alpha_n must be at least 1"));
                }
                if self.experiment == Experiment::Probe {
                    let q = self.q.ok_or_else(|| bad("probe needs q"))?;
                    let probe = crate::run::probe_config(self, self.ns()?[0], self.alpha0.unwrap_or(0.0), q)?;
                    probe.validate().map_err(|e| bad(e.to_string()))?;
                    for p in self.ps()? {
                        self.supercritical(p)?;
                    }
                }
            }
            Experiment::Tail => {
                for p in self.ps()? {
                    self.weights(p)?;
                    self.supercritical(p)?;
                }
                positive_ns(self.ns()?)?;
                match self.eps {
                    Some(e) if e > 0.0 => {}
                    _ => return Err(bad("tail needs eps > 0")),
                }
            }
            Experiment::Breakpoints => {
                for p in self.ps()? {
                    self.weights(p)?;
                    self.supercritical(p)?;
                }
                positive_ns(self.ns()?)?;
            }
            Experiment::Traces => {
                probabilities(&self.ps()?)?;
                positive_ns(self.ns()?)?;
            }
            Experiment::Oracle => probabilities(&self.ps()?)?,
        }
        Ok(())
    }
}
