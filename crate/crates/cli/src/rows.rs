use std::io::Write;
use std::path::Path;

use fpp_core::stats::EstimateWithCI;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Format};
use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// CSV header, in column order.
pub const COLUMNS: [&str; 19] = [
    "experiment",
    "statistic",
    "a",
    "b",
    "p",
    "p0",
    "n",
    "m",
    "horizon",
    "eps",
    "replicate",
    "estimate",
    "stderr",
    "reps",
    "excluded",
    "seed",
    "alpha0",
    "ok",
    "version",
];

/// One output line. `m` is the target column when the statistic refers to a
/// single target; `replicate` is set for per-replicate rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub statistic: String,
    pub a: f64,
    pub b: f64,
    pub p: Option<f64>,
    pub p0: Option<f64>,
    pub n: Option<i64>,
    pub m: Option<i64>,
    pub horizon: Option<u64>,
    pub eps: Option<f64>,
    pub replicate: Option<u64>,
    pub estimate: f64,
    pub stderr: Option<f64>,
    pub reps: u64,
    pub excluded: u64,
    pub seed: u64,
    pub alpha0: Option<f64>,
    pub ok: Option<bool>,
    pub version: String,
}

impl ResultRow {
    pub fn new(cfg: &ExperimentConfig, statistic: &str, estimate: f64) -> Self {
        Self {
            experiment: cfg.experiment.name().to_string(),
            statistic: statistic.to_string(),
            a: cfg.a,
            b: cfg.b,
            p: None,
            p0: None,
            n: None,
            m: None,
            horizon: None,
            eps: None,
            replicate: None,
            estimate,
            stderr: None,
            reps: 1,
            excluded: 0,
            seed: cfg.seed,
            alpha0: None,
            ok: None,
            version: VERSION.to_string(),
        }
    }

    pub fn from_estimate(cfg: &ExperimentConfig, statistic: &str, e: &EstimateWithCI) -> Self {
        Self {
            stderr: Some(e.stderr),
            reps: e.reps as u64,
            excluded: e.excluded as u64,
            ..Self::new(cfg, statistic, e.mean)
        }
    }

    pub fn p(mut self, p: f64) -> Self {
        self.p = Some(p);
        self
    }
    pub fn p0(mut self, p0: f64) -> Self {
        self.p0 = Some(p0);
        self
    }
    pub fn n(mut self, n: usize) -> Self {
        self.n = Some(n as i64);
        self
    }
    pub fn m(mut self, m: i64) -> Self {
        self.m = Some(m);
        self
    }
    pub fn horizon(mut self, h: usize) -> Self {
        self.horizon = Some(h as u64);
        self
    }
    pub fn eps(mut self, eps: f64) -> Self {
        self.eps = Some(eps);
        self
    }
    pub fn replicate(mut self, r: usize) -> Self {
        self.replicate = Some(r as u64);
        self
    }
    pub fn reps(mut self, reps: usize, excluded: usize) -> Self {
        self.reps = reps as u64;
        self.excluded = excluded as u64;
        self
    }
    pub fn alpha0(mut self, a: f64) -> Self {
        self.alpha0 = Some(a);
        self
    }
    pub fn ok(mut self, ok: bool) -> Self {
        self.ok = Some(ok);
        self
    }

    fn fields(&self) -> [String; 19] {
        let num = |x: f64| format!("{x:.16e}");
        let opt_num = |x: Option<f64>| x.map(num).unwrap_or_default();
        let opt = |x: Option<String>| x.unwrap_or_default();
        [
            self.experiment.clone(),
            self.statistic.clone(),
            num(self.a),
            num(self.b),
            opt_num(self.p),
            opt_num(self.p0),
            opt(self.n.map(|v| v.to_string())),
            opt(self.m.map(|v| v.to_string())),
            opt(self.horizon.map(|v| v.to_string())),
            opt_num(self.eps),
            opt(self.replicate.map(|v| v.to_string())),
            num(self.estimate),
            opt_num(self.stderr),
            self.reps.to_string(),
            self.excluded.to_string(),
            self.seed.to_string(),
            opt_num(self.alpha0),
            opt(self.ok.map(|v| v.to_string())),
            self.version.clone(),
        ]
    }
}

/// CSV with the fixed header; floats carry 17 significant digits.
pub fn to_csv(rows: &[ResultRow]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Runtime(e.to_string());
    w.write_record(COLUMNS).map_err(io)?;
    for r in rows {
        w.write_record(r.fields()).map_err(io)?;
    }
    w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))
}

/// Reads back a file written by [`to_csv`].
pub fn from_csv(data: &[u8]) -> Result<Vec<ResultRow>, CliError> {
    let mut r = csv::Reader::from_reader(data);
    r.deserialize()
        .collect::<Result<Vec<ResultRow>, _>>()
        .map_err(|e| CliError::Runtime(e.to_string()))
}

pub fn to_json(rows: &[ResultRow]) -> Result<Vec<u8>, CliError> {
    let mut out = serde_json::to_vec_pretty(rows).map_err(|e| CliError::Runtime(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

pub fn emit(rows: &[ResultRow], format: Format, out_path: Option<&Path>) -> Result<(), CliError> {
    if rows.is_empty() {
        return Err(CliError::Runtime("no rows to write".into()));
    }
    let bytes = match format {
        Format::Csv => to_csv(rows)?,
        Format::Json => to_json(rows)?,
    };
    match out_path {
        Some(path) => std::fs::write(path, bytes)
            .map_err(|e| CliError::Output(format!("{}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(&bytes)
            .map_err(|e| CliError::Output(format!("stdout: {e}"))),
    }
}
