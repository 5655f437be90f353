//! Oriented percolation through `a`-edges and the right edge of its front.
//!
//! Columns at level `n` are evolved level by level: `x` is occupied at
//! `n + 1` when an occupied neighbour `x ∓ 1` at level `n` has an open
//! (`a`-weight) upward edge to it. On top of that this module builds
//!
//! * the origin process with the diagonal fallback (`r'_n`),
//! * the half-line process (`r_n`), truncated to sources in `[-2n, 0]`,
//! * break points: levels where `(r'_n, n)` survives `H` further levels,
//! * estimators of the speed `alpha(p)` and of the upper tail of `r_n`.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{LatticeError, LatticePoint, NoiseField, WeightParams};
use crate::stats::{jackknife_ratio, linear_fit, EstimateWithCI, ReplicatePlan};

/// Oriented bond percolation threshold on this lattice, taken from the
/// numerical literature. Only used to reject clearly subcritical inputs.
pub const DEFAULT_CRITICAL_P: f64 = 0.6447;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrientedError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("p = {p} is not above the critical value {critical}")]
    Subcritical { p: f64, critical: f64 },
    #[error("{extinct} of {reps} half-line runs died inside the truncation; p is too small")]
    TooManyExtinct { extinct: usize, reps: usize },
    #[error("only {accepted} of {wanted} conditioned runs accepted after {attempts} attempts")]
    TooManyRejections { accepted: usize, wanted: usize, attempts: usize },
    #[error("no validated break points were found")]
    NoBreakPoints,
}

pub fn ensure_supercritical(p: f64, critical: f64) -> Result<(), OrientedError> {
    if p > critical {
        Ok(())
    } else {
        Err(OrientedError::Subcritical { p, critical })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrontState {
    pub level: i64,
    pub occupied: Vec<i64>,
    /// The fallback singleton replaced an empty front at this level.
    pub reset: bool,
}

/// One level of the front. `front` is sorted; `out` comes back sorted and
/// without duplicates.
#[inline]
pub(crate) fn advance(front: &[i64], level: i64, f: &NoiseField, thr: u64, out: &mut Vec<i64>) {
    out.clear();
    for &x in front {
        let (left, right) = f.up_open(x, level, thr);
        if left && out.last() != Some(&(x - 1)) {
            out.push(x - 1);
        }
        if right {
            out.push(x + 1);
        }
    }
}

/// Raw front `xi_n^A` for `n = 0..=steps`, started at level 0.
pub fn evolve_front(
    initial: &[i64],
    f: &NoiseField,
    wp: &WeightParams,
    steps: usize,
) -> Result<Vec<FrontState>, OrientedError> {
    let mut cur: Vec<i64> = initial.to_vec();
    for &x in &cur {
        LatticePoint::new(x, 0)?;
    }
    cur.sort_unstable();
    cur.dedup();
    let thr = wp.threshold();
    let mut states = Vec::with_capacity(steps + 1);
    states.push(FrontState { level: 0, occupied: cur.clone(), reset: false });
    let mut next = Vec::new();
    for level in 0..steps as i64 {
        advance(&cur, level, f, thr, &mut next);
        std::mem::swap(&mut cur, &mut next);
        states.push(FrontState { level: level + 1, occupied: cur.clone(), reset: false });
    }
    Ok(states)
}

/// `r'_0, ..., r'_N` for the origin process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RightEdgeTrace {
    pub values: Vec<i64>,
    pub resets: Vec<bool>,
    pub p: f64,
    pub seed: u64,
    pub levels: usize,
}

/// Origin process with the fallback: when no column of level `n + 1` is
/// reachable from the current set, the set becomes `{n + 1}`.
pub fn origin_right_edge(f: &NoiseField, wp: &WeightParams, levels: usize) -> RightEdgeTrace {
    origin_fronts(f, wp, levels, |_| {})
}

fn origin_fronts(
    f: &NoiseField,
    wp: &WeightParams,
    levels: usize,
    mut visit: impl FnMut(&FrontState),
) -> RightEdgeTrace {
    let thr = wp.threshold();
    let mut cur = vec![0i64];
    let mut next = Vec::new();
    let mut values = vec![0i64];
    let mut resets = vec![false];
    visit(&FrontState { level: 0, occupied: cur.clone(), reset: false });
    for level in 0..levels as i64 {
        advance(&cur, level, f, thr, &mut next);
        let reset = next.is_empty();
        if reset {
            next.push(level + 1);
        }
        std::mem::swap(&mut cur, &mut next);
        values.push(*cur.last().unwrap());
        resets.push(reset);
        visit(&FrontState { level: level + 1, occupied: cur.clone(), reset });
    }
    RightEdgeTrace { values, resets, p: wp.p, seed: f.seed(), levels }
}

/// Every state of the origin process with fallback, for inspection.
pub fn origin_front_states(f: &NoiseField, wp: &WeightParams, levels: usize) -> Vec<FrontState> {
    let mut states = Vec::with_capacity(levels + 1);
    origin_fronts(f, wp, levels, |s| states.push(s.clone()));
    states
}

/// `r_n` of the process started from the even columns of `[-2n, 0]`;
/// `None` when that front dies before level `n`.
///
/// Oriented paths on this lattice cannot cross without sharing a vertex, so
/// the right-first depth-first path from the rightmost source that reaches
/// level `n` ends at the rightmost reachable column. Vertices found unable to
/// reach level `n` are remembered across sources.
pub fn halfline_right_edge(f: &NoiseField, wp: &WeightParams, n: usize) -> Option<i64> {
    let thr = wp.threshold();
    let n_i = n as i64;
    let mut dead: HashSet<(i64, i64)> = HashSet::new();
    // (column, level, next branch: 0 right, 1 left, 2 done)
    let mut stack: Vec<(i64, i64, u8)> = Vec::with_capacity(n + 1);
    for source in (-n_i..=0).rev().map(|k| 2 * k) {
        stack.push((source, 0, 0));
        while let Some(top) = stack.last_mut() {
            let (m, k, state) = *top;
            if k == n_i {
                return Some(m);
            }
            let step = match state {
                0 => 1,
                1 => -1,
                _ => {
                    dead.insert((m, k));
                    stack.pop();
                    continue;
                }
            };
            top.2 += 1;
            let (left, right) = f.up_open(m, k, thr);
            let open = if step == 1 { right } else { left };
            if open && !dead.contains(&(m + step, k + 1)) {
                stack.push((m + step, k + 1, 0));
            }
        }
    }
    None
}

/// Same quantity as [`halfline_right_edge`], by stepping the whole front.
pub fn halfline_right_edge_by_front(f: &NoiseField, wp: &WeightParams, n: usize) -> Option<i64> {
    let thr = wp.threshold();
    let n_i = n as i64;
    let mut cur: Vec<i64> = (-n_i..=0).map(|k| 2 * k).collect();
    let mut next = Vec::with_capacity(cur.len() + n);
    for level in 0..n_i {
        advance(&cur, level, f, thr, &mut next);
        if next.is_empty() {
            return None;
        }
        std::mem::swap(&mut cur, &mut next);
    }
    cur.last().copied()
}

/// Whether the oriented `a`-cluster of `start` still has a point `h` levels up.
pub fn survives_to_horizon(start: LatticePoint, f: &NoiseField, wp: &WeightParams, h: usize) -> bool {
    let thr = wp.threshold();
    let mut cur = vec![start.m];
    let mut next = Vec::new();
    for level in start.n..start.n + h as i64 {
        advance(&cur, level, f, thr, &mut next);
        if next.is_empty() {
            return false;
        }
        std::mem::swap(&mut cur, &mut next);
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BreakPointRecord {
    /// Level `T_i` of the break point.
    pub t: i64,
    /// Column `r'_{T_i}`.
    pub r_at_t: i64,
    /// `T_i - T_{i-1}`.
    pub tau: i64,
    /// `r'_{T_i} - r'_{T_{i-1}}`.
    pub x: i64,
    /// Survival from the break point was checked over the full horizon.
    pub validated: bool,
}

/// A run accepted under the conditioning on origin survival.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionedRun {
    pub trace: RightEdgeTrace,
    pub break_points: Vec<BreakPointRecord>,
    pub horizon: usize,
}

impl ConditionedRun {
    /// Break points marked validated, in order.
    pub fn validated(&self) -> impl Iterator<Item = &BreakPointRecord> {
        self.break_points.iter().filter(|b| b.validated)
    }

    /// `sum tau_i = T_m`, `sum X_i = r'_{T_m}` and `|X_i| <= tau_i` over the
    /// recorded break points.
    pub fn increments_consistent(&self) -> bool {
        let Some(last) = self.break_points.last() else {
            return true;
        };
        let tau: i64 = self.break_points.iter().map(|b| b.tau).sum();
        let x: i64 = self.break_points.iter().map(|b| b.x).sum();
        tau == last.t
            && x == self.trace.values[last.t as usize]
            && x == last.r_at_t
            && self.break_points.iter().all(|b| b.x.abs() <= b.tau)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejected {
    /// First level at which the origin front was empty.
    pub died_at: i64,
}

/// Break points of `r'` on levels `1..=levels`.
///
/// The sample is rejected unless the origin front survives to
/// `levels + horizon`; an accepted run therefore never uses the fallback
/// below that level. Level `n` is a break point when `(r'_n, n)` survives
/// `horizon` levels, which is decided for all `n` at once by a backward pass
/// computing, for each point, the length of its longest upward `a`-path
/// (capped at `horizon`).
pub fn extract_break_points(
    f: &NoiseField,
    wp: &WeightParams,
    levels: usize,
    horizon: usize,
) -> Result<ConditionedRun, Rejected> {
    assert!(horizon >= 1, "horizon must be at least one level");
    let thr = wp.threshold();
    let top = (levels + horizon) as i64;

    let mut right = Vec::with_capacity(levels + 1);
    right.push(0i64);
    let mut cur = vec![0i64];
    let mut next = Vec::new();
    for level in 0..top {
        advance(&cur, level, f, thr, &mut next);
        if next.is_empty() {
            return Err(Rejected { died_at: level + 1 });
        }
        std::mem::swap(&mut cur, &mut next);
        if level < levels as i64 {
            right.push(*cur.last().unwrap());
        }
    }

    let depth = horizon_depths(&right, f, thr, horizon, top);
    let h = horizon as i64;
    let mut break_points = Vec::new();
    let (mut prev_t, mut prev_r) = (0i64, 0i64);
    for n in 1..=levels {
        if depth[n] >= horizon {
            let t = n as i64;
            break_points.push(BreakPointRecord {
                t,
                r_at_t: right[n],
                tau: t - prev_t,
                x: right[n] - prev_r,
                validated: t + h <= top,
            });
            prev_t = t;
            prev_r = right[n];
        }
    }

    let trace = RightEdgeTrace {
        resets: vec![false; right.len()],
        values: right,
        p: wp.p,
        seed: f.seed(),
        levels,
    };
    Ok(ConditionedRun { trace, break_points, horizon })
}

/// For every `n` in `1..right.len()`, the capped longest upward `a`-path
/// length from `(right[n], n)`. Index 0 is unused.
fn horizon_depths(right: &[i64], f: &NoiseField, thr: u64, horizon: usize, top: i64) -> Vec<usize> {
    let levels = right.len() - 1;
    let mut out = vec![0usize; right.len()];
    if levels == 0 {
        return out;
    }
    let h = horizon as i64;
    let lo = right[1..].iter().min().unwrap() - h - 1;
    let hi = right[1..].iter().max().unwrap() + h + 1;
    let first = |k: i64| if (lo + k).rem_euclid(2) == 0 { lo } else { lo + 1 };
    let width = ((hi - lo) / 2 + 2) as usize;
    let cap = horizon as u32;

    let mut above = vec![0u32; width];
    let mut row = vec![0u32; width];
    for k in (1..top).rev() {
        let c0 = first(k);
        let c1 = first(k + 1);
        for (i, slot) in row.iter_mut().enumerate() {
            let x = c0 + 2 * i as i64;
            if x > hi {
                *slot = 0;
                continue;
            }
            let (left, right_open) = f.up_open(x, k, thr);
            let look = |col: i64| -> u32 {
                let d = col - c1;
                if d < 0 || col > hi {
                    0
                } else {
                    above.get((d / 2) as usize).copied().unwrap_or(0)
                }
            };
            let mut best = 0u32;
            if left {
                best = best.max(1 + look(x - 1));
            }
            if right_open {
                best = best.max(1 + look(x + 1));
            }
            *slot = best.min(cap);
        }
        if k as usize <= levels {
            let x = right[k as usize];
            out[k as usize] = row[((x - c0) / 2) as usize] as usize;
        }
        std::mem::swap(&mut above, &mut row);
    }
    out
}

/// Outcome of checking `|r'_{T_{N_n + 1}} - r'_n| <= 2 tau_{N_n + 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegenerationReport {
    /// `(n, holds)` for every level with a following validated break point.
    pub checked: Vec<(i64, bool)>,
    /// Levels without a following validated break point.
    pub skipped: usize,
}

impl RegenerationReport {
    pub fn all_hold(&self) -> bool {
        self.checked.iter().all(|&(_, ok)| ok)
    }
}

pub fn regeneration_inequality_check(run: &ConditionedRun) -> RegenerationReport {
    let r = &run.trace.values;
    let bps: Vec<&BreakPointRecord> = run.validated().collect();
    let mut checked = Vec::new();
    let mut skipped = 0;
    let mut j = 0usize;
    for n in 1..r.len() as i64 {
        while j < bps.len() && bps[j].t <= n {
            j += 1;
        }
        match bps.get(j) {
            Some(bp) => {
                let lhs = (bp.r_at_t - r[n as usize]).abs();
                checked.push((n, lhs <= 2 * bp.tau));
            }
            None => skipped += 1,
        }
    }
    RegenerationReport { checked, skipped }
}

/// Mean and standard error of `r_n / n` over independent half-line runs.
/// Extinct runs are left out and counted in `excluded`.
pub fn estimate_alpha_slope(
    wp: &WeightParams,
    n: usize,
    plan: &ReplicatePlan,
) -> Result<EstimateWithCI, OrientedError> {
    let edges = plan.map(|_, f| halfline_right_edge(&f, wp, n));
    let extinct = edges.iter().filter(|e| e.is_none()).count();
    if 2 * extinct > plan.reps || extinct == plan.reps {
        return Err(OrientedError::TooManyExtinct { extinct, reps: plan.reps });
    }
    let samples: Vec<f64> = edges.iter().flatten().map(|&r| r as f64 / n as f64).collect();
    Ok(EstimateWithCI::from_samples(&samples, extinct))
}

/// Accepted conditioned runs for the first replicates of `plan` (in index
/// order) until `plan.reps` runs are accepted.
pub fn conditioned_runs(
    wp: &WeightParams,
    levels: usize,
    horizon: usize,
    plan: &ReplicatePlan,
) -> Result<(Vec<ConditionedRun>, usize), OrientedError> {
    let wanted = plan.reps;
    let max_attempts = 50 * wanted.max(1);
    let mut accepted = Vec::with_capacity(wanted);
    let mut rejected = 0usize;
    let mut start = 0usize;
    while accepted.len() < wanted {
        if start >= max_attempts {
            return Err(OrientedError::TooManyRejections {
                accepted: accepted.len(),
                wanted,
                attempts: start,
            });
        }
        let batch = (wanted - accepted.len()).max(8) * 2;
        let end = (start + batch).min(max_attempts);
        for out in plan.map_range(start, end, |_, f| extract_break_points(&f, wp, levels, horizon)) {
            if accepted.len() == wanted {
                break;
            }
            match out {
                Ok(run) => accepted.push(run),
                Err(_) => rejected += 1,
            }
        }
        start = end;
    }
    Ok((accepted, rejected))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    /// Pooled `sum X_i / sum tau_i` with a jackknife (over runs) standard error.
    pub alpha: EstimateWithCI,
    /// Mean break-point spacing.
    pub kappa: f64,
    pub mean_x: f64,
    pub break_points: usize,
}

pub fn ratio_from_runs(runs: &[ConditionedRun], rejected: usize) -> Result<RatioEstimate, OrientedError> {
    let mut num = Vec::with_capacity(runs.len());
    let mut den = Vec::with_capacity(runs.len());
    let mut count = 0usize;
    for run in runs {
        let (mut sx, mut st) = (0i64, 0i64);
        for bp in run.validated() {
            sx += bp.x;
            st += bp.tau;
            count += 1;
        }
        num.push(sx as f64);
        den.push(st as f64);
    }
    if count == 0 {
        return Err(OrientedError::NoBreakPoints);
    }
    let (ratio, se) = jackknife_ratio(&num, &den);
    let total_tau: f64 = den.iter().sum();
    let total_x: f64 = num.iter().sum();
    Ok(RatioEstimate {
        alpha: EstimateWithCI { mean: ratio, stderr: se, reps: runs.len(), excluded: rejected },
        kappa: total_tau / count as f64,
        mean_x: total_x / count as f64,
        break_points: count,
    })
}

/// Break-point estimate of the speed: mean displacement per regeneration
/// divided by the mean regeneration time.
pub fn estimate_alpha_ratio(
    wp: &WeightParams,
    levels: usize,
    horizon: usize,
    plan: &ReplicatePlan,
) -> Result<RatioEstimate, OrientedError> {
    let (runs, rejected) = conditioned_runs(wp, levels, horizon, plan)?;
    ratio_from_runs(&runs, rejected)
}

/// Frequency of `r_n >= (alpha_ref + eps) n` over `plan.reps` half-line runs.
/// Extinct runs count as misses and are reported in `excluded`.
pub fn estimate_tail_probability(
    wp: &WeightParams,
    alpha_ref: f64,
    eps: f64,
    n: usize,
    plan: &ReplicatePlan,
) -> EstimateWithCI {
    let level = (alpha_ref + eps) * n as f64;
    let edges = plan.map(|_, f| halfline_right_edge(&f, wp, n));
    let extinct = edges.iter().filter(|e| e.is_none()).count();
    let hits = edges.iter().flatten().filter(|&&r| r as f64 >= level).count();
    EstimateWithCI::from_counts(hits, plan.reps, extinct)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailTrend {
    pub ns: Vec<usize>,
    pub estimates: Vec<EstimateWithCI>,
    /// Each estimate is at most the previous one plus three combined standard errors.
    pub nonincreasing: bool,
    /// Least-squares slope of `-ln P` against `n`, with `P = (hits + 1/2) / (reps + 1)`
    /// so that empty cells stay finite.
    pub decay_slope: f64,
}

pub fn tail_trend(ns: &[usize], estimates: &[EstimateWithCI]) -> TailTrend {
    assert_eq!(ns.len(), estimates.len());
    let nonincreasing = estimates
        .windows(2)
        .all(|w| w[1].mean <= w[0].mean + 3.0 * w[0].combined_stderr(&w[1]));
    let x: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let y: Vec<f64> = estimates
        .iter()
        .map(|e| {
            let hits = (e.mean * e.reps as f64).round();
            -((hits + 0.5) / (e.reps as f64 + 1.0)).ln()
        })
        .collect();
    let decay_slope = if x.len() >= 2 { linear_fit(&x, &y).0 } else { f64::NAN };
    TailTrend { ns: ns.to_vec(), estimates: estimates.to_vec(), nonincreasing, decay_slope }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wp(p: f64) -> WeightParams {
        WeightParams::new(1.0, 2.0, p).unwrap()
    }

    #[test]
    fn halfline_search_matches_front() {
        for seed in 0..300u64 {
            let f = NoiseField::new(seed);
            for p in [0.3, 0.55, 0.65, 0.8, 1.0] {
                for n in [0usize, 1, 7, 40] {
                    assert_eq!(
                        halfline_right_edge(&f, &wp(p), n),
                        halfline_right_edge_by_front(&f, &wp(p), n),
                        "seed {seed} p {p} n {n}"
                    );
                }
            }
        }
    }

    #[test]
    fn full_cone_at_p_one() {
        let states = evolve_front(&[0], &NoiseField::new(1), &wp(1.0), 5).unwrap();
        for s in &states {
            let expected: Vec<i64> = (0..=s.level).map(|k| 2 * k - s.level).collect();
            assert_eq!(s.occupied, expected);
        }
    }

    #[test]
    fn dies_at_p_zero() {
        let states = evolve_front(&[0], &NoiseField::new(1), &wp(0.0), 3).unwrap();
        assert!(states[1].occupied.is_empty());
        assert!(states[3].occupied.is_empty());
    }

    #[test]
    fn evolve_rejects_odd_columns() {
        assert!(evolve_front(&[1], &NoiseField::new(1), &wp(0.5), 3).is_err());
    }

    #[test]
    fn evolve_matches_hand_recursion() {
        let f = NoiseField::new(99);
        let w = wp(0.6);
        let thr = w.threshold();
        let states = evolve_front(&[-2, 0, 2], &f, &w, 2).unwrap();
        // Recompute level by level from the raw edge tests.
        let mut cur = vec![-2i64, 0, 2];
        for level in 0..2i64 {
            let mut next = std::collections::BTreeSet::new();
            for &x in &cur {
                let (l, r) = f.up_open(x, level, thr);
                if l {
                    next.insert(x - 1);
                }
                if r {
                    next.insert(x + 1);
                }
            }
            cur = next.into_iter().collect();
            assert_eq!(states[level as usize + 1].occupied, cur);
        }
    }

    #[test]
    fn origin_edge_diagonal_at_p_one() {
        let t = origin_right_edge(&NoiseField::new(3), &wp(1.0), 20);
        assert_eq!(t.values, (0..=20).collect::<Vec<i64>>());
        assert!(t.resets.iter().all(|r| !r));
    }

    #[test]
    fn fallback_to_diagonal_when_origin_is_closed() {
        let w = wp(0.35);
        let thr = w.threshold();
        let seed = (0u64..)
            .find(|&s| NoiseField::new(s).up_open(0, 0, thr) == (false, false))
            .unwrap();
        let states = origin_front_states(&NoiseField::new(seed), &w, 3);
        assert_eq!(states[1].occupied, vec![1]);
        assert!(states[1].reset);
    }

    #[test]
    fn fronts_stay_in_cone() {
        let f = NoiseField::new(17);
        for s in origin_front_states(&f, &wp(0.7), 200) {
            assert!(s.occupied.iter().all(|x| x.abs() <= s.level && (x + s.level) % 2 == 0));
        }
    }

    #[test]
    fn halfline_is_diagonal_at_p_one() {
        assert_eq!(halfline_right_edge(&NoiseField::new(0), &wp(1.0), 50), Some(50));
        assert_eq!(halfline_right_edge(&NoiseField::new(0), &wp(0.0), 50), None);
    }

    #[test]
    fn survival_limits() {
        let f = NoiseField::new(5);
        assert!(survives_to_horizon(LatticePoint::ORIGIN, &f, &wp(1.0), 100));
        assert!(!survives_to_horizon(LatticePoint::ORIGIN, &f, &wp(0.0), 1));
    }

    #[test]
    fn every_level_breaks_at_p_one() {
        let run = extract_break_points(&NoiseField::new(4), &wp(1.0), 30, 10).unwrap();
        assert_eq!(run.break_points.len(), 30);
        assert!(run.break_points.iter().all(|b| b.tau == 1 && b.x == 1 && b.validated));
        assert!(run.increments_consistent());
        let rep = regeneration_inequality_check(&run);
        assert!(rep.all_hold());
        assert_eq!(rep.checked.len(), 29);
        assert_eq!(rep.skipped, 1);
    }

    #[test]
    fn rejected_at_p_zero() {
        assert_eq!(
            extract_break_points(&NoiseField::new(4), &wp(0.0), 10, 5),
            Err(Rejected { died_at: 1 })
        );
    }

    /// Break points recomputed with one forward survival check per level.
    fn break_levels_by_forward_checks(f: &NoiseField, w: &WeightParams, levels: usize, h: usize) -> Vec<i64> {
        let trace = origin_right_edge(f, w, levels);
        (1..=levels as i64)
            .filter(|&n| {
                let pt = LatticePoint { m: trace.values[n as usize], n };
                survives_to_horizon(pt, f, w, h)
            })
            .collect()
    }

    #[test]
    fn backward_depths_match_forward_checks() {
        let w = wp(0.72);
        let mut seen = 0;
        for seed in 0..40 {
            let f = NoiseField::new(seed);
            if let Ok(run) = extract_break_points(&f, &w, 150, 40) {
                let fast: Vec<i64> = run.break_points.iter().map(|b| b.t).collect();
                assert_eq!(fast, break_levels_by_forward_checks(&f, &w, 150, 40), "seed {seed}");
                seen += 1;
            }
        }
        assert!(seen > 5);
    }

    #[test]
    fn hand_built_regeneration_check() {
        // r' = 0, 1, 0, 1, 2, 3 with break points at 2 and 5.
        let run = ConditionedRun {
            trace: RightEdgeTrace {
                values: vec![0, 1, 0, 1, 2, 3],
                resets: vec![false; 6],
                p: 0.8,
                seed: 0,
                levels: 5,
            },
            break_points: vec![
                BreakPointRecord { t: 2, r_at_t: 0, tau: 2, x: 0, validated: true },
                BreakPointRecord { t: 5, r_at_t: 3, tau: 3, x: 3, validated: true },
            ],
            horizon: 3,
        };
        assert!(run.increments_consistent());
        let mut broken = run.clone();
        broken.break_points[1].x = 4;
        assert!(!broken.increments_consistent());
        let rep = regeneration_inequality_check(&run);
        // n = 1 -> next break at 2: |0 - 1| <= 4; n = 2, 3, 4 -> next at 5:
        // |3 - 0| <= 6, |3 - 1| <= 6, |3 - 2| <= 6; n = 5 has no successor.
        assert_eq!(rep.checked, vec![(1, true), (2, true), (3, true), (4, true)]);
        assert_eq!(rep.skipped, 1);
    }

    #[test]
    fn slope_estimate_degenerate() {
        let e = estimate_alpha_slope(&wp(1.0), 40, &ReplicatePlan::new(1, 8)).unwrap();
        assert_eq!((e.mean, e.stderr, e.excluded), (1.0, 0.0, 0));
        assert!(matches!(
            estimate_alpha_slope(&wp(0.1), 40, &ReplicatePlan::new(1, 8)),
            Err(OrientedError::TooManyExtinct { .. })
        ));
    }

    #[test]
    fn ratio_estimate_degenerate() {
        let r = estimate_alpha_ratio(&wp(1.0), 50, 10, &ReplicatePlan::new(2, 4)).unwrap();
        assert_eq!(r.alpha.mean, 1.0);
        assert_eq!(r.kappa, 1.0);
        assert_eq!(r.alpha.excluded, 0);
    }

    #[test]
    fn tail_at_p_one_is_empty() {
        let e = estimate_tail_probability(&wp(1.0), 1.0, 0.5, 60, &ReplicatePlan::new(3, 10));
        assert_eq!(e.mean, 0.0);
    }

    #[test]
    fn supercritical_guard() {
        assert!(ensure_supercritical(0.8, DEFAULT_CRITICAL_P).is_ok());
        assert!(ensure_supercritical(0.6, DEFAULT_CRITICAL_P).is_err());
    }
}
