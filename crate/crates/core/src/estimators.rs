//! Monte Carlo estimates of time constants, the critical-direction curve
//! `f(p)`, the flat-edge event, the speed gap and the singularity-shape fit.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use crate::stats::EstimateWithCI;

use crate::fpp::first_passage_time;
use crate::lattice::{nearest_lattice_point, target_point, LatticeError, WeightParams};
use crate::oriented::{ensure_supercritical, estimate_alpha_slope, OrientedError, DEFAULT_CRITICAL_P};
use crate::stats::ReplicatePlan;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Oriented(#[from] OrientedError),
    #[error("invalid probe configuration: {0}")]
    Config(String),
    #[error("direction must be nonzero")]
    ZeroDirection,
    #[error("singularity fit needs at least 2 grid points below p0, got {0}")]
    TooFewPoints(usize),
}

/// Settings of a sweep below (and at) `p0` along the frozen direction `alpha0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub a: f64,
    pub b: f64,
    pub p0: f64,
    pub q: f64,
    pub p_grid: Vec<f64>,
    pub n: usize,
    pub reps: usize,
    pub horizon: usize,
    pub alpha0: EstimateWithCI,
    pub seed: u64,
    pub critical_p: f64,
}

impl ProbeConfig {
    #[allow(clippy::too_many_arguments)]
    pub fn new(a: f64, b: f64, p0: f64, q: f64, p_grid: Vec<f64>, n: usize, reps: usize, seed: u64) -> Self {
        Self {
            a,
            b,
            p0,
            q,
            p_grid,
            n,
            reps,
            horizon: 0,
            alpha0: EstimateWithCI { mean: f64::NAN, stderr: f64::NAN, reps: 1, excluded: 0 },
            seed,
            critical_p: DEFAULT_CRITICAL_P,
        }
    }

    /// Checks the ordering `critical < q < p0 < 1`, the grid range and the
    /// replicate counts. Returns grid points with `p0 - p >= 1/e`, which sit
    /// outside the regime where `log(1 / (p0 - p)) > 1`.
    pub fn validate(&self) -> Result<Vec<f64>, EstimatorError> {
        WeightParams::new(self.a, self.b, self.p0)?;
        if !(self.critical_p < self.q && self.q < self.p0 && self.p0 < 1.0) {
            return Err(EstimatorError::Config(format!(
                "need critical ({}) < q ({}) < p0 ({}) < 1",
                self.critical_p, self.q, self.p0
            )));
        }
        if let Some(p) = self.p_grid.iter().find(|&&p| !(self.q..=self.p0).contains(&p)) {
            return Err(EstimatorError::Config(format!("grid point {p} outside [q, p0]")));
        }
        if self.n == 0 || self.reps == 0 {
            return Err(EstimatorError::Config("n and reps must be at least 1".into()));
        }
        let limit = (-1f64).exp();
        Ok(self.p_grid.iter().copied().filter(|p| self.p0 - p >= limit).collect())
    }

    pub fn weights(&self, p: f64) -> Result<WeightParams, EstimatorError> {
        Ok(WeightParams::new(self.a, self.b, p)?)
    }

    pub fn plan(&self) -> ReplicatePlan {
        ReplicatePlan::new(self.seed, self.reps)
    }
}

/// Speed estimate at `p0` to be frozen into a [`ProbeConfig`] before a sweep.
pub fn freeze_alpha0(
    a: f64,
    b: f64,
    p0: f64,
    n: usize,
    plan: &ReplicatePlan,
    critical_p: f64,
) -> Result<EstimateWithCI, EstimatorError> {
    ensure_supercritical(p0, critical_p)?;
    let wp = WeightParams::new(a, b, p0)?;
    Ok(estimate_alpha_slope(&wp, n, plan)?)
}

/// `T(0, nearest lattice point to n x) / n` over the replicates of `plan`.
pub fn estimate_time_constant(
    x: [f64; 2],
    wp: &WeightParams,
    n: usize,
    plan: &ReplicatePlan,
) -> Result<EstimateWithCI, EstimatorError> {
    if x == [0.0, 0.0] {
        return Err(EstimatorError::ZeroDirection);
    }
    let nf = n as f64;
    let target = nearest_lattice_point([x[0] * nf, x[1] * nf]);
    let samples = plan.map(|_, f| first_passage_time(target, &f, wp).time / nf);
    Ok(EstimateWithCI::from_samples(&samples, 0))
}

/// Per-replicate `T(0, target_point(alpha0 n, n))` at parameter `p`.
/// Replicate `i` sees the same noise for every `p`.
pub fn critical_direction_times(cfg: &ProbeConfig, p: f64) -> Result<Vec<f64>, EstimatorError> {
    let wp = cfg.weights(p)?;
    let n = cfg.n as i64;
    let target = target_point(cfg.alpha0.mean * n as f64, n);
    Ok(cfg.plan().map(|_, f| first_passage_time(target, &f, &wp).time))
}

/// `T = a n` exactly. Any path to level `n` has at least `n` edges, so a time
/// below `a n + min(a, b - a) / 2` can only come from `n` edges of weight `a`.
pub fn is_flat(time: f64, a: f64, b: f64, n: usize) -> bool {
    time < a * n as f64 + 0.5 * a.min(b - a)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbePoint {
    pub p: f64,
    pub f: EstimateWithCI,
    pub flat: EstimateWithCI,
    pub times: Vec<f64>,
}

/// `f` estimate and flat-edge frequency from one shared set of passage times.
pub fn probe_point(cfg: &ProbeConfig, p: f64) -> Result<ProbePoint, EstimatorError> {
    let times = critical_direction_times(cfg, p)?;
    let nf = cfg.n as f64;
    let scaled: Vec<f64> = times.iter().map(|t| t / nf).collect();
    let hits = times.iter().filter(|&&t| is_flat(t, cfg.a, cfg.b, cfg.n)).count();
    Ok(ProbePoint {
        p,
        f: EstimateWithCI::from_samples(&scaled, 0),
        flat: EstimateWithCI::from_counts(hits, times.len(), 0),
        times,
    })
}

pub fn estimate_f(cfg: &ProbeConfig, p: f64) -> Result<EstimateWithCI, EstimatorError> {
    Ok(probe_point(cfg, p)?.f)
}

/// Frequency of the event `T = a n` at level `n`.
pub fn flat_edge_fraction(cfg: &ProbeConfig, p: f64, n: usize) -> Result<EstimateWithCI, EstimatorError> {
    let at_n = ProbeConfig { n, ..cfg.clone() };
    Ok(probe_point(&at_n, p)?.flat)
}

/// True when each per-replicate time is at most its value at the previous
/// (smaller) `p`. `points` must be sorted by increasing `p`.
pub fn shared_seed_nonincreasing(points: &[ProbePoint]) -> bool {
    points.windows(2).all(|w| {
        w[0].p <= w[1].p
            && w[0].times.iter().zip(&w[1].times).all(|(lo_p, hi_p)| hi_p <= lo_p)
            && w[1].f.mean <= w[0].f.mean
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub alpha_p0: EstimateWithCI,
    pub alpha_p: EstimateWithCI,
    pub gap: f64,
    pub combined_stderr: f64,
    /// `2 (p0 - p)`.
    pub bound: f64,
    /// `gap >= bound - 3 combined_stderr`.
    pub holds: bool,
}

/// Compares the speed drop `alpha(p0) - alpha(p)` with `2 (p0 - p)`, both
/// speeds measured on the same replicate fields.
pub fn gap_check(
    a: f64,
    b: f64,
    p0: f64,
    p: f64,
    n: usize,
    plan: &ReplicatePlan,
    critical_p: f64,
) -> Result<GapReport, EstimatorError> {
    ensure_supercritical(p0, critical_p)?;
    ensure_supercritical(p, critical_p)?;
    let alpha_p0 = estimate_alpha_slope(&WeightParams::new(a, b, p0)?, n, plan)?;
    let alpha_p = estimate_alpha_slope(&WeightParams::new(a, b, p)?, n, plan)?;
    let gap = alpha_p0.mean - alpha_p.mean;
    let combined_stderr = alpha_p0.combined_stderr(&alpha_p);
    let bound = 2.0 * (p0 - p);
    Ok(GapReport {
        alpha_p0,
        alpha_p,
        gap,
        combined_stderr,
        bound,
        holds: gap >= bound - 3.0 * combined_stderr,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularityFit {
    pub delta_hat: f64,
    pub residual_norm: f64,
    /// `(p, f(p) - a)` for every grid point used.
    pub h_values: Vec<(f64, EstimateWithCI)>,
    /// Grid points where `h` is not at least three standard errors above zero.
    pub not_positive: Vec<f64>,
}

/// `(p0 - p)^2 / ln(1 / (p0 - p))`.
pub fn singularity_shape(p0: f64, p: f64) -> f64 {
    let d = p0 - p;
    d * d / (1.0 / d).ln()
}

/// One-parameter least squares `h(p) ~ delta * g(p)`.
pub fn singularity_fit(
    cfg: &ProbeConfig,
    h_values: &[(f64, EstimateWithCI)],
) -> Result<SingularityFit, EstimatorError> {
    let used: Vec<(f64, EstimateWithCI)> = h_values.iter().copied().filter(|(p, _)| *p < cfg.p0).collect();
    if used.len() < 2 {
        return Err(EstimatorError::TooFewPoints(used.len()));
    }
    let g: Vec<f64> = used.iter().map(|(p, _)| singularity_shape(cfg.p0, *p)).collect();
    let sgg: f64 = g.iter().map(|x| x * x).sum();
    let sgh: f64 = g.iter().zip(&used).map(|(x, (_, h))| x * h.mean).sum();
    let delta_hat = sgh / sgg;
    let residual_norm = g
        .iter()
        .zip(&used)
        .map(|(x, (_, h))| (h.mean - delta_hat * x).powi(2))
        .sum::<f64>()
        .sqrt();
    let not_positive = used
        .iter()
        .filter(|(_, h)| !(h.mean > 0.0 && h.mean >= 3.0 * h.stderr))
        .map(|(p, _)| *p)
        .collect();
    Ok(SingularityFit { delta_hat, residual_norm, h_values: used, not_positive })
}
