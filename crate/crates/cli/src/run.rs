use fpp_core::estimators::{
    estimate_time_constant, freeze_alpha0, gap_check, probe_point, shared_seed_nonincreasing, singularity_fit,
    ProbeConfig, ProbePoint,
};
use fpp_core::fpp::{first_passage_time, minimal_edge_count, oracle_case};
use fpp_core::lattice::{nearest_lattice_point, target_point};
use fpp_core::oriented::{
    conditioned_runs, estimate_alpha_ratio, estimate_alpha_slope, estimate_tail_probability, ratio_from_runs,
    regeneration_inequality_check, tail_trend,
};
use fpp_core::stats::{EstimateWithCI, ReplicatePlan};
use fpp_core::traces::{d_opt, decompose, retained_edges_are_upward_a, suboptimal_budget_check};

use crate::config::{Experiment, ExperimentConfig};
use crate::rows::ResultRow;
use crate::CliError;

/// Offset separating the replicate stream used to freeze a speed from the
/// stream used by the experiment itself.
const ALPHA_STREAM: u64 = 0x0A1F_A000;

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Runs `cfg` on a pool of `cfg.workers()` threads. Output rows are ordered
/// by grid index and do not depend on the worker count.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, CliError> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers())
        .build()
        .map_err(runtime)?;
    pool.install(|| match cfg.experiment {
        Experiment::Alpha => alpha(cfg),
        Experiment::Fpt => fpt(cfg),
        Experiment::FCurve => f_curve(cfg, false),
        Experiment::Probe => f_curve(cfg, true),
        Experiment::Tail => tail(cfg),
        Experiment::Breakpoints => breakpoints(cfg),
        Experiment::Traces => traces(cfg),
        Experiment::Oracle => oracle(cfg),
    })
}

fn plan(cfg: &ExperimentConfig) -> ReplicatePlan {
    ReplicatePlan::new(cfg.seed, cfg.reps)
}

fn alpha_plan(cfg: &ExperimentConfig) -> ReplicatePlan {
    ReplicatePlan::new(cfg.seed.wrapping_add(ALPHA_STREAM), cfg.alpha_reps)
}

fn alpha(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, CliError> {
    let mut rows = Vec::new();
    for p in cfg.ps()? {
        let wp = cfg.weights(p)?;
        for n in cfg.ns()? {
            let slope = estimate_alpha_slope(&wp, n, &plan(cfg)).map_err(runtime)?;
            log::info!("alpha p={p} n={n}: {} extinct of {}", slope.excluded, cfg.reps);
            rows.push(ResultRow::from_estimate(cfg, "alpha_slope", &slope).p(p).n(n));
            if cfg.horizon > 0 {
                let r = estimate_alpha_ratio(&wp, n, cfg.horizon, &plan(cfg)).map_err(runtime)?;
                log::info!("alpha p={p} n={n}: {} conditioned runs rejected", r.alpha.excluded);
                let base = |stat: &str, v: f64| {
                    ResultRow::new(cfg, stat, v).p(p).n(n).horizon(cfg.horizon).reps(r.alpha.reps, r.alpha.excluded)
                };
                rows.push(ResultRow::from_estimate(cfg, "alpha_ratio", &r.alpha).p(p).n(n).horizon(cfg.horizon));
                rows.push(base("kappa", r.kappa));
                rows.push(base("mean_x", r.mean_x));
            }
        }
    }
    Ok(rows)
}

fn fpt(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, CliError> {
    let x = cfg.direction.unwrap_or([0.0, 1.0]);
    let mut rows = Vec::new();
    for p in cfg.ps()? {
        let wp = cfg.weights(p)?;
        for n in cfg.ns()? {
            let target = nearest_lattice_point([x[0] * n as f64, x[1] * n as f64]);
            let e = estimate_time_constant(x, &wp, n, &plan(cfg)).map_err(runtime)?;
            rows.push(ResultRow::from_estimate(cfg, "time_constant", &e).p(p).n(n).m(target.m));
        }
    }
    Ok(rows)
}

/// The configured `alpha0`, or a fresh estimate at `p0` on its own stream.
fn frozen_alpha0(cfg: &ExperimentConfig, p0: f64) -> Result<EstimateWithCI, CliError> {
    if let Some(a) = cfg.alpha0 {
        return Ok(EstimateWithCI { mean: a, stderr: 0.0, reps: 1, excluded: 0 });
    }
    let e = freeze_alpha0(cfg.a, cfg.b, p0, cfg.alpha_n, &alpha_plan(cfg), cfg.critical_p).map_err(runtime)?;
    log::info!("frozen alpha0 = {} +- {} at p0 = {p0}", e.mean, e.stderr);
    Ok(e)
}

pub(crate) fn probe_config(cfg: &ExperimentConfig, n: usize, alpha0: f64, q: f64) -> Result<ProbeConfig, CliError> {
    let mut probe = ProbeConfig::new(cfg.a, cfg.b, cfg.p0()?, q, cfg.ps()?, n, cfg.reps, cfg.seed);
    probe.horizon = cfg.horizon;
    probe.critical_p = cfg.critical_p;
    probe.alpha0 = EstimateWithCI { mean: alpha0, stderr: 0.0, reps: 1, excluded: 0 };
    Ok(probe)
}

fn f_curve(cfg: &ExperimentConfig, fit: bool) -> Result<Vec<ResultRow>, CliError> {
    let p0 = cfg.p0()?;
    let alpha0 = frozen_alpha0(cfg, p0)?;
    let mut rows = Vec::new();
    if cfg.alpha0.is_none() {
        rows.push(
            ResultRow::from_estimate(cfg, "alpha0", &alpha0)
                .p(p0)
                .p0(p0)
                .n(cfg.alpha_n)
                .alpha0(alpha0.mean),
        );
    }
    let mut ps = cfg.ps()?;
    ps.sort_by(f64::total_cmp);
    for n in cfg.ns()? {
        let mut probe = probe_config(cfg, n, alpha0.mean, cfg.q.unwrap_or(cfg.critical_p))?;
        probe.alpha0 = alpha0;
        if fit {
            for p in probe.validate().map_err(|e| CliError::Config(e.to_string()))? {
                log::warn!("grid point p = {p} has p0 - p >= 1/e");
            }
        }
        let target = target_point(alpha0.mean * n as f64, n as i64);
        let row = |stat: &str, e: &EstimateWithCI, p: f64| {
            ResultRow::from_estimate(cfg, stat, e).p(p).p0(p0).n(n).m(target.m).alpha0(alpha0.mean)
        };
        let points: Vec<ProbePoint> = ps
            .iter()
            .map(|&p| probe_point(&probe, p).map_err(runtime))
            .collect::<Result<_, _>>()?;
        let mut h_values = Vec::new();
        for pt in &points {
            rows.push(row("f", &pt.f, pt.p));
            rows.push(row("flat_fraction", &pt.flat, pt.p));
            let h = EstimateWithCI { mean: pt.f.mean - cfg.a, ..pt.f };
            rows.push(row("h", &h, pt.p).ok(h.mean > 0.0 && h.mean >= 3.0 * h.stderr));
            h_values.push((pt.p, h));
        }
        let monotone = shared_seed_nonincreasing(&points);
        rows.push(
            ResultRow::new(cfg, "f_nonincreasing", if monotone { 1.0 } else { 0.0 })
                .p0(p0)
                .n(n)
                .m(target.m)
                .reps(cfg.reps, 0)
                .alpha0(alpha0.mean)
                .ok(monotone),
        );
        if fit {
            let gap_plan = alpha_plan(cfg);
            for &p in ps.iter().filter(|&&p| p < p0) {
                let g = gap_check(cfg.a, cfg.b, p0, p, cfg.alpha_n, &gap_plan, cfg.critical_p).map_err(runtime)?;
                rows.push(
                    ResultRow::new(cfg, "alpha_gap", g.gap)
                        .p(p)
                        .p0(p0)
                        .n(cfg.alpha_n)
                        .reps(cfg.alpha_reps, g.alpha_p.excluded + g.alpha_p0.excluded)
                        .ok(g.holds),
                );
                rows.last_mut().unwrap().stderr = Some(g.combined_stderr);
            }
            let s = singularity_fit(&probe, &h_values).map_err(runtime)?;
            let fit_row = |stat: &str, v: f64| {
                ResultRow::new(cfg, stat, v)
                    .p0(p0)
                    .n(n)
                    .m(target.m)
                    .reps(cfg.reps, 0)
                    .alpha0(alpha0.mean)
                    .ok(s.not_positive.is_empty())
            };
            rows.push(fit_row("delta_hat", s.delta_hat));
            rows.push(fit_row("residual_norm", s.residual_norm));
        }
    }
    Ok(rows)
}

fn tail(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, CliError> {
    let eps = cfg.eps.expect("validated");
    let ns = cfg.ns()?;
    let mut rows = Vec::new();
    for p in cfg.ps()? {
        let wp = cfg.weights(p)?;
        let alpha_ref = match cfg.alpha0 {
            Some(a) => a,
            None => {
                let e = estimate_alpha_slope(&wp, cfg.alpha_n, &alpha_plan(cfg)).map_err(runtime)?;
                rows.push(ResultRow::from_estimate(cfg, "alpha0", &e).p(p).n(cfg.alpha_n).alpha0(e.mean));
                e.mean
            }
        };
        let estimates: Vec<EstimateWithCI> = ns
            .iter()
            .map(|&n| estimate_tail_probability(&wp, alpha_ref, eps, n, &plan(cfg)))
            .collect();
        for (&n, e) in ns.iter().zip(&estimates) {
            rows.push(ResultRow::from_estimate(cfg, "tail_probability", e).p(p).n(n).eps(eps).alpha0(alpha_ref));
        }
        if ns.len() >= 2 {
            let trend = tail_trend(&ns, &estimates);
            rows.push(
                ResultRow::new(cfg, "decay_slope", trend.decay_slope)
                    .p(p)
                    .eps(eps)
                    .reps(cfg.reps, 0)
                    .alpha0(alpha_ref)
                    .ok(trend.nonincreasing && trend.decay_slope > 0.0),
            );
        }
    }
    Ok(rows)
}

fn breakpoints(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, CliError> {
    let mut rows = Vec::new();
    for p in cfg.ps()? {
        let wp = cfg.weights(p)?;
        for n in cfg.ns()? {
            let horizon = if cfg.horizon == 0 { n } else { cfg.horizon };
            let (runs, rejected) = conditioned_runs(&wp, n, horizon, &plan(cfg)).map_err(runtime)?;
            log::info!("breakpoints p={p} n={n}: {} accepted, {rejected} rejected", runs.len());
            let ratio = ratio_from_runs(&runs, rejected).map_err(runtime)?;
            let regen = runs.iter().filter(|r| regeneration_inequality_check(r).all_hold()).count();
            let sums = runs.iter().filter(|r| r.increments_consistent()).count();
            let k = runs.len();
            let base = |stat: &str, v: f64| ResultRow::new(cfg, stat, v).p(p).n(n).horizon(horizon).reps(k, rejected);
            rows.push(ResultRow::from_estimate(cfg, "alpha_ratio", &ratio.alpha).p(p).n(n).horizon(horizon));
            rows.push(base("kappa", ratio.kappa));
            rows.push(base("mean_x", ratio.mean_x));
            rows.push(base("break_points", ratio.break_points as f64));
            rows.push(base("increments_consistent", sums as f64 / k as f64).ok(sums == k));
            rows.push(base("regeneration_inequality", regen as f64 / k as f64).ok(regen == k));
        }
    }
    Ok(rows)
}

fn traces(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, CliError> {
    let x = cfg.direction.unwrap_or([0.0, 1.0]);
    let mut rows = Vec::new();
    for p in cfg.ps()? {
        let wp = cfg.weights(p)?;
        for n in cfg.ns()? {
            let target = nearest_lattice_point([x[0] * n as f64, x[1] * n as f64]);
            let min_edges = minimal_edge_count(target);
            let checks = plan(cfg).map(|_, f| {
                let g = first_passage_time(target, &f, &wp).geodesic;
                let d = decompose(&g, &f, &wp);
                [
                    d.x_intervals_disjoint() as u8 as f64,
                    d.trace_counts_balanced() as u8 as f64,
                    d_opt(&g, &d).is_ok() as u8 as f64,
                    retained_edges_are_upward_a(&g, &d) as u8 as f64,
                    suboptimal_budget_check(&g, &d, &wp, min_edges) as u8 as f64,
                    d.suboptimal_count as f64,
                    d.j as f64,
                ]
            });
            let names = [
                "x_intervals_disjoint",
                "trace_counts_balanced",
                "d_opt_agree",
                "retained_upward_a",
                "suboptimal_budget",
                "suboptimal_count",
                "j",
            ];
            for (k, name) in names.iter().enumerate() {
                let samples: Vec<f64> = checks.iter().map(|c| c[k]).collect();
                let e = EstimateWithCI::from_samples(&samples, 0);
                let mut r = ResultRow::from_estimate(cfg, name, &e).p(p).n(n).m(target.m);
                if k < 5 {
                    r = r.ok(e.mean == 1.0);
                }
                rows.push(r);
            }
        }
    }
    Ok(rows)
}

fn oracle(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, CliError> {
    let mut rows = Vec::new();
    for p in cfg.ps()? {
        let wp = cfg.weights(p)?;
        let cases = plan(cfg).map(|i, f| oracle_case(i, &f, &wp));
        for (i, case) in cases.into_iter().enumerate() {
            let case = case.map_err(runtime)?;
            // -1 marks a target the windowed search cannot reach.
            let time = case.search.unwrap_or(-1.0);
            let mut row = ResultRow::new(cfg, "oracle_match", time).p(p).m(case.target.m).replicate(i);
            row.n = Some(case.target.n);
            rows.push(row.ok(case.matches()));
        }
    }
    Ok(rows)
}
