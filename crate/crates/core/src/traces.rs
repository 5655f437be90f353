//! Sub-optimal edges of a geodesic and its x-, y- and xy-traces.
//!
//! An edge spans the horizontal strip between its two levels. Within each
//! strip the edge with the smallest midpoint column (earliest in path order on
//! ties) is the only one that is not *repeated*. An edge is *sub-optimal* when
//! it has weight `b` or is repeated. Projecting the sub-optimal edges on the
//! column axis and merging gives the x-trace; dropping every edge whose
//! projection sits inside the x-trace leaves the optimal edges, whose maximal
//! runs (in path order) give the y-trace.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fpp::{path_weight, PathRecord};
use crate::lattice::{NoiseField, WeightParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error("entropy is defined on [0, 1], got {0}")]
    Domain(f64),
    #[error("d_opt mismatch: trace gives {by_trace}, optimal edges give {by_edges}")]
    DOptMismatch { by_trace: i64, by_edges: i64 },
    #[error("y-trace endpoint list must have even length, got {0}")]
    OddEndpoints(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EdgeClass {
    Optimal,
    SuboptimalB,
    SuboptimalRepeated,
}

impl EdgeClass {
    pub fn is_suboptimal(self) -> bool {
        self != EdgeClass::Optimal
    }
}

/// Per-edge classes in path order. `b`-weight wins over repetition.
pub fn classify_edges(geodesic: &PathRecord, f: &NoiseField, wp: &WeightParams) -> Vec<EdgeClass> {
    let thr = wp.threshold();
    let steps: Vec<_> = geodesic.steps().collect();
    // strip (lower level) -> (twice the midpoint column, path index) of the leftmost edge
    let mut leftmost: std::collections::HashMap<i64, (i64, usize)> = Default::default();
    for (i, (_, _, e)) in steps.iter().enumerate() {
        let key = (2 * e.low.m + e.dir.dm(), i);
        leftmost
            .entry(e.low.n)
            .and_modify(|cur| {
                if key < *cur {
                    *cur = key;
                }
            })
            .or_insert(key);
    }
    steps
        .iter()
        .enumerate()
        .map(|(i, (_, _, e))| {
            if f.edge_word(e) >= thr {
                EdgeClass::SuboptimalB
            } else if leftmost[&e.low.n].1 != i {
                EdgeClass::SuboptimalRepeated
            } else {
                EdgeClass::Optimal
            }
        })
        .collect()
}

/// Closed integer intervals, sorted and pairwise disjoint.
pub type Intervals = Vec<(i64, i64)>;

/// Union of the column projections of the sub-optimal edges.
pub fn x_trace(classes: &[EdgeClass], geodesic: &PathRecord) -> Intervals {
    let mut units: Vec<(i64, i64)> = geodesic
        .steps()
        .zip(classes)
        .filter(|(_, c)| c.is_suboptimal())
        .map(|((_, _, e), _)| e.x_projection())
        .collect();
    units.sort_unstable();
    let mut merged: Intervals = Vec::new();
    for (l, r) in units {
        match merged.last_mut() {
            Some(last) if l <= last.1 => last.1 = last.1.max(r),
            _ => merged.push((l, r)),
        }
    }
    merged
}

fn inside(intervals: &[(i64, i64)], span: (i64, i64)) -> bool {
    intervals.iter().any(|&(l, r)| l <= span.0 && span.1 <= r)
}

/// Per-edge flag: the edge survives removal of everything projecting into
/// the x-trace.
pub fn retained_edges(geodesic: &PathRecord, x_intervals: &[(i64, i64)]) -> Vec<bool> {
    geodesic
        .steps()
        .map(|(_, _, e)| !inside(x_intervals, e.x_projection()))
        .collect()
}

/// `(initial level, terminal level)` of each maximal run of retained edges.
pub fn y_trace(retained: &[bool], geodesic: &PathRecord) -> Intervals {
    let v = geodesic.vertices();
    let mut out = Vec::new();
    let mut run_start: Option<usize> = None;
    for (i, &keep) in retained.iter().enumerate() {
        match (keep, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(s)) => {
                out.push((v[s].n, v[i].n));
                run_start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = run_start {
        out.push((v[s].n, v[retained.len()].n));
    }
    out
}

/// Decodes a y-trace written as its endpoint sequence `y1, y1', y2, y2', ...`.
pub fn y_trace_from_endpoints(endpoints: &[i64]) -> Result<Intervals, TraceError> {
    if !endpoints.len().is_multiple_of(2) {
        return Err(TraceError::OddEndpoints(endpoints.len()));
    }
    Ok(endpoints.chunks(2).map(|c| (c[0], c[1])).collect())
}

pub fn y_trace_endpoints(intervals: &[(i64, i64)]) -> Vec<i64> {
    intervals.iter().flat_map(|&(a, b)| [a, b]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceDecomposition {
    pub classes: Vec<EdgeClass>,
    pub x_intervals: Intervals,
    pub y_intervals: Intervals,
    pub retained: Vec<bool>,
    pub j1: usize,
    pub j2: usize,
    pub j: usize,
    pub suboptimal_count: usize,
    /// Weight of the decomposed path.
    pub weight: f64,
}

pub fn decompose(geodesic: &PathRecord, f: &NoiseField, wp: &WeightParams) -> TraceDecomposition {
    let classes = classify_edges(geodesic, f, wp);
    let x_intervals = x_trace(&classes, geodesic);
    let retained = retained_edges(geodesic, &x_intervals);
    let y_intervals = y_trace(&retained, geodesic);
    let (j1, j2) = (x_intervals.len(), y_intervals.len());
    TraceDecomposition {
        suboptimal_count: classes.iter().filter(|c| c.is_suboptimal()).count(),
        classes,
        x_intervals,
        y_intervals,
        retained,
        j1,
        j2,
        j: j1.max(j2),
        weight: path_weight(geodesic, f, wp),
    }
}

impl TraceDecomposition {
    pub fn x_trace_length(&self) -> i64 {
        self.x_intervals.iter().map(|(l, r)| r - l).sum()
    }

    pub fn x_intervals_disjoint(&self) -> bool {
        self.x_intervals.iter().all(|(l, r)| l <= r)
            && self.x_intervals.windows(2).all(|w| w[0].1 < w[1].0)
    }

    pub fn trace_counts_balanced(&self) -> bool {
        self.j1.abs_diff(self.j2) <= 1
    }
}

/// Rightward displacement carried by the optimal edges, computed as the
/// path's displacement minus the x-trace length and checked against the
/// direct sum over retained edges.
pub fn d_opt(geodesic: &PathRecord, dec: &TraceDecomposition) -> Result<i64, TraceError> {
    let by_trace = geodesic.end().m - geodesic.start().m - dec.x_trace_length();
    let by_edges: i64 = geodesic
        .steps()
        .zip(&dec.retained)
        .filter(|(_, keep)| **keep)
        .map(|((from, to, _), _)| to.m - from.m)
        .sum();
    if by_trace == by_edges {
        Ok(by_trace)
    } else {
        Err(TraceError::DOptMismatch { by_trace, by_edges })
    }
}

/// Every retained edge is traversed upward and carries weight `a`.
pub fn retained_edges_are_upward_a(geodesic: &PathRecord, dec: &TraceDecomposition) -> bool {
    geodesic
        .steps()
        .zip(dec.retained.iter().zip(&dec.classes))
        .filter(|(_, (keep, _))| **keep)
        .all(|((from, to, _), (_, class))| to.n == from.n + 1 && *class != EdgeClass::SuboptimalB)
}

/// `suboptimal_count <= nu * (T - a n)` for a path ending at level `n >= 1`.
pub fn suboptimal_budget_check(
    geodesic: &PathRecord,
    dec: &TraceDecomposition,
    wp: &WeightParams,
    n: i64,
) -> bool {
    let excess = dec.weight - wp.a * n as f64;
    let ok = dec.suboptimal_count as f64 <= wp.nu() * excess + 1e-9 * dec.weight.max(1.0);
    if !ok {
        log::warn!(
            "sub-optimal budget exceeded: {} edges, excess {excess}, path {:?}",
            dec.suboptimal_count,
            geodesic.vertices()
        );
    }
    ok
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KBound {
    pub k: u64,
    /// Both regime conditions hold: `log(1/(p0 - p)) > 1` and
    /// `a nu / log(1/(p0 - p)) <= 1`.
    pub regime_ok: bool,
}

/// `floor(a nu delta (p0 - p)^2 n / log(1 / (p0 - p)))`, zero when `p >= p0`.
pub fn k_bound(a: f64, b: f64, delta: f64, p0: f64, p: f64, n: u64) -> KBound {
    let gap = p0 - p;
    if gap <= 0.0 {
        return KBound { k: 0, regime_ok: false };
    }
    let nu = 1.0 / (b - a).min(a);
    let log_inv = (1.0 / gap).ln();
    let k = (a * nu * delta * gap * gap * n as f64 / log_inv).floor().max(0.0) as u64;
    KBound { k, regime_ok: log_inv > 1.0 && a * nu / log_inv <= 1.0 }
}

/// Binary entropy in nats, `H(0) = H(1) = 0`.
pub fn entropy(x: f64) -> Result<f64, TraceError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(TraceError::Domain(x));
    }
    let term = |t: f64| if t == 0.0 { 0.0 } else { -t * t.ln() };
    Ok(term(x) + term(1.0 - x))
}

/// `ln C(u, v)`, exact integer arithmetic while it fits in 128 bits.
pub fn ln_binomial(u: u64, v: u64) -> f64 {
    assert!(v <= u);
    let v = v.min(u - v);
    let mut c: u128 = 1;
    for i in 0..v {
        match c.checked_mul((u - i) as u128) {
            Some(x) => c = x / (i + 1) as u128,
            None => return (0..v).map(|i| ((u - i) as f64).ln() - ((i + 1) as f64).ln()).sum(),
        }
    }
    (c as f64).ln()
}

/// `C(u, v) <= exp(u H(v / u))`, compared in the log domain.
pub fn entropy_binomial_check(u: u64, v: u64) -> bool {
    assert!(u >= 1 && v <= u);
    let rhs = u as f64 * entropy(v as f64 / u as f64).expect("v/u in [0, 1]");
    ln_binomial(u, v) <= rhs
}

/// Largest grid point `x` such that `H(t) <= 2 t ln(1/t)` at every grid point up to `x`.
pub fn entropy_small_x_threshold(grid: &[f64]) -> Option<f64> {
    let mut last = None;
    for &x in grid {
        let h = entropy(x).ok()?;
        if h <= 2.0 * x * (1.0 / x).ln() {
            last = Some(x);
        } else {
            break;
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Edge, LatticePoint};

    fn pt(m: i64, n: i64) -> LatticePoint {
        LatticePoint::new(m, n).unwrap()
    }

    fn path(v: &[(i64, i64)]) -> PathRecord {
        PathRecord::new(v.iter().map(|&(m, n)| pt(m, n)).collect()).unwrap()
    }

    fn all_a() -> WeightParams {
        WeightParams::new(1.0, 2.0, 1.0).unwrap()
    }

    #[test]
    fn all_optimal_upward_path() {
        let g = path(&[(0, 0), (1, 1), (2, 2), (1, 3), (2, 4)]);
        let f = NoiseField::new(0);
        let dec = decompose(&g, &f, &all_a());
        assert!(dec.classes.iter().all(|&c| c == EdgeClass::Optimal));
        assert_eq!(dec.suboptimal_count, 0);
        assert!(dec.x_intervals.is_empty());
        assert_eq!(dec.y_intervals, vec![(0, 4)]);
        assert_eq!(d_opt(&g, &dec), Ok(2));
        assert!(suboptimal_budget_check(&g, &dec, &all_a(), 4));
    }

    #[test]
    fn zigzag_within_one_strip() {
        let g = path(&[(0, 0), (1, 1), (2, 0), (3, 1)]);
        let classes = classify_edges(&g, &NoiseField::new(0), &all_a());
        assert_eq!(
            classes,
            vec![EdgeClass::Optimal, EdgeClass::SuboptimalRepeated, EdgeClass::SuboptimalRepeated]
        );
        assert_eq!(x_trace(&classes, &g), vec![(1, 3)]);
    }

    #[test]
    fn single_b_edge() {
        let w = WeightParams::new(1.0, 2.0, 0.5).unwrap();
        let thr = w.threshold();
        // A field whose up-right edge at (1, 1) is b and all others on the path are a.
        let g = path(&[(0, 0), (1, 1), (2, 2), (3, 3)]);
        let (seed, f) = (0u64..)
            .map(|s| (s, NoiseField::new(s)))
            .find(|(_, f)| {
                let word = |m, n| f.up_words(m, n).1;
                word(0, 0) < thr && word(1, 1) >= thr && word(2, 2) < thr
            })
            .unwrap();
        let dec = decompose(&g, &f, &w);
        assert_eq!(
            dec.classes,
            vec![EdgeClass::Optimal, EdgeClass::SuboptimalB, EdgeClass::Optimal],
            "seed {seed}"
        );
        assert_eq!(dec.x_intervals, vec![(1, 2)]);
        assert_eq!(dec.y_intervals, vec![(0, 1), (2, 3)]);
        assert_eq!(d_opt(&g, &dec), Ok(2));
        assert_eq!(dec.weight, 4.0);
        assert!(suboptimal_budget_check(&g, &dec, &w, 3));
        assert!(retained_edges_are_upward_a(&g, &dec));
        assert!(dec.trace_counts_balanced());
    }

    #[test]
    fn touching_projections_merge() {
        let g = path(&[(0, 0), (1, 1), (2, 2)]);
        let classes = vec![EdgeClass::SuboptimalB, EdgeClass::SuboptimalB];
        assert_eq!(x_trace(&classes, &g), vec![(0, 2)]);
        let none = vec![EdgeClass::Optimal, EdgeClass::Optimal];
        assert!(x_trace(&none, &g).is_empty());
        let one = vec![EdgeClass::Optimal, EdgeClass::SuboptimalB];
        assert_eq!(x_trace(&one, &g), vec![(1, 2)]);
    }

    #[test]
    fn y_trace_codec() {
        let iv = y_trace_from_endpoints(&[1, 2, 2, 5, 7, 8]).unwrap();
        assert_eq!(iv, vec![(1, 2), (2, 5), (7, 8)]);
        assert_eq!(y_trace_endpoints(&iv), vec![1, 2, 2, 5, 7, 8]);
        assert!(y_trace_from_endpoints(&[1, 2, 3]).is_err());
        let g = path(&[(0, 0), (1, 1)]);
        assert!(y_trace(&[false], &g).is_empty());
    }

    #[test]
    fn k_bound_examples() {
        let kb = k_bound(1.0, 2.0, 0.4, 0.8, 0.7, 10_000);
        assert_eq!(kb.k, 17);
        assert!(kb.regime_ok);
        assert_eq!(k_bound(1.0, 2.0, 0.4, 0.8, 0.8, 10_000).k, 0);
        assert_eq!(k_bound(1.0, 2.0, 0.0, 0.8, 0.7, 10_000).k, 0);
        assert!(!k_bound(1.0, 2.0, 0.4, 0.8, 0.2, 10_000).regime_ok);
    }

    #[test]
    fn entropy_values() {
        assert!((entropy(0.5).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((entropy(0.1).unwrap() - 0.325_083).abs() < 1e-6);
        assert_eq!(entropy(0.0).unwrap(), 0.0);
        assert_eq!(entropy(0.3).unwrap(), entropy(0.7).unwrap());
        assert!(entropy(1.2).is_err());
        assert!(entropy(-0.1).is_err());
    }

    #[test]
    fn binomial_entropy_examples() {
        assert!((ln_binomial(4, 2) - 6f64.ln()).abs() < 1e-15);
        assert!(entropy_binomial_check(4, 2));
        assert!(entropy_binomial_check(9, 0));
        assert!((ln_binomial(60, 30) - 118_264_581_564_861_424f64.ln()).abs() < 1e-12);
        assert!(entropy_binomial_check(2000, 700));
    }

    #[test]
    fn small_x_threshold_is_one_half() {
        let grid: Vec<f64> = (1..10_000).map(|i| i as f64 / 10_000.0).collect();
        assert_eq!(entropy_small_x_threshold(&grid), Some(0.5));
    }

    #[test]
    fn b_precedes_repetition() {
        let w = WeightParams::new(1.0, 2.0, 0.0).unwrap();
        let g = path(&[(0, 0), (1, 1), (2, 0)]);
        let c = classify_edges(&g, &NoiseField::new(1), &w);
        assert_eq!(c, vec![EdgeClass::SuboptimalB, EdgeClass::SuboptimalB]);
        let e = Edge::between(pt(1, 1), pt(2, 0)).unwrap();
        assert_eq!(e.x_projection(), (1, 2));
    }
}
