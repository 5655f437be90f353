//! First passage times and geodesics from the origin.
//!
//! Passage times are exact shortest-path values on a finite window. The
//! unrestricted time `T(0, v)` is computed on [`safety_window`], which holds
//! every path that could beat a minimal-edge-count path. The search itself is
//! an A* label-setting pass with the admissible heuristic `a * dist(u, v)`,
//! confined to the box of points `u` with `a * (|u| + |v - u|)` below the cost
//! of one explicit minimal path.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{Edge, LatticeError, LatticePoint, NoiseField, WeightParams, Window};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FppError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("{0} lies outside the search window")]
    OutsideWindow(LatticePoint),
    #[error("{0} cannot be reached inside the window")]
    Unreachable(LatticePoint),
    #[error("window has {0} edges; exhaustive search is limited to {MAX_BRUTE_FORCE_EDGES}")]
    WindowTooLarge(usize),
    #[error("path is empty")]
    EmptyPath,
}

pub const MAX_BRUTE_FORCE_EDGES: usize = 16;

/// A lattice path as its vertex sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathRecord {
    vertices: Vec<LatticePoint>,
}

impl PathRecord {
    pub fn new(vertices: Vec<LatticePoint>) -> Result<Self, FppError> {
        if vertices.is_empty() {
            return Err(FppError::EmptyPath);
        }
        for v in &vertices {
            LatticePoint::new(v.m, v.n)?;
        }
        for w in vertices.windows(2) {
            if !w[0].is_adjacent(w[1]) {
                return Err(LatticeError::NotAdjacent(w[0], w[1]).into());
            }
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[LatticePoint] {
        &self.vertices
    }

    pub fn start(&self) -> LatticePoint {
        self.vertices[0]
    }

    pub fn end(&self) -> LatticePoint {
        *self.vertices.last().unwrap()
    }

    pub fn edge_count(&self) -> usize {
        self.vertices.len() - 1
    }

    /// Steps in path order as `(from, to, canonical edge)`.
    pub fn steps(&self) -> impl Iterator<Item = (LatticePoint, LatticePoint, Edge)> + '_ {
        self.vertices
            .windows(2)
            .map(|w| (w[0], w[1], Edge::between(w[0], w[1]).expect("validated path")))
    }
}

/// Sum of edge weights along the path, accumulated from the first vertex.
pub fn path_weight(path: &PathRecord, f: &NoiseField, wp: &WeightParams) -> f64 {
    let thr = wp.threshold();
    path.steps()
        .fold(0.0, |acc, (_, _, e)| acc + if f.edge_word(&e) < thr { wp.a } else { wp.b })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassageResult {
    pub time: f64,
    pub geodesic: PathRecord,
    pub window_used: Window,
}

/// Minimal number of edges between the origin and `target`.
pub fn minimal_edge_count(target: LatticePoint) -> i64 {
    target.m.abs().max(target.n.abs())
}

/// `[-R, R]^2` with `R = ceil((b / a) * L0)` and `L0 = max(|m|, |n|)`.
///
/// A path with more than `(b / a) * L0` edges costs more than `b * L0`, the
/// worst case of a minimal path, so every geodesic lies inside.
pub fn safety_window(target: LatticePoint, wp: &WeightParams) -> Window {
    let l0 = minimal_edge_count(target);
    let r = ((wp.b / wp.a) * l0 as f64).ceil() as i64;
    Window::square(r)
}

/// One explicit minimal-edge-count path from the origin to `target`.
pub fn straight_path(target: LatticePoint) -> PathRecord {
    let mut v = vec![LatticePoint::ORIGIN];
    let (mut x, mut y) = (0i64, 0i64);
    let mut alt = 1i64;
    while (x, y) != (target.m, target.n) {
        let rx = target.m - x;
        let ry = target.n - y;
        let dx = if rx != 0 { rx.signum() } else { alt };
        let dy = if ry != 0 { ry.signum() } else { alt };
        if rx == 0 || ry == 0 {
            alt = -alt;
        }
        x += dx;
        y += dy;
        v.push(LatticePoint { m: x, n: y });
    }
    PathRecord { vertices: v }
}

/// Exact `T(0, target)` and its canonical geodesic.
pub fn first_passage_time(target: LatticePoint, f: &NoiseField, wp: &WeightParams) -> PassageResult {
    let target = LatticePoint::new(target.m, target.n).expect("target must be a lattice point");
    let window = safety_window(target, wp);
    if target == LatticePoint::ORIGIN {
        return PassageResult {
            time: 0.0,
            geodesic: PathRecord { vertices: vec![target] },
            window_used: window,
        };
    }
    let upper = path_weight(&straight_path(target), f, wp);
    let region = pruning_box(target, upper / wp.a)
        .intersect(&window)
        .expect("box holds the origin");
    let (time, geodesic) = search(target, f, wp, region).expect("minimal path lies in the box");
    PassageResult { time, geodesic, window_used: window }
}

/// Shortest path from the origin to `target` using only points of `window`.
pub fn first_passage_time_in(
    target: LatticePoint,
    f: &NoiseField,
    wp: &WeightParams,
    window: &Window,
) -> Result<PassageResult, FppError> {
    let target = LatticePoint::new(target.m, target.n)?;
    for pt in [LatticePoint::ORIGIN, target] {
        if !window.contains(pt) {
            return Err(FppError::OutsideWindow(pt));
        }
    }
    let (time, geodesic) = search(target, f, wp, *window)?;
    Ok(PassageResult { time, geodesic, window_used: *window })
}

/// Points `u` with `dist(0, u) + dist(u, target) <= k`, as a bounding rectangle.
fn pruning_box(target: LatticePoint, k: f64) -> Window {
    // |x| + |m - x| = max(|m|, |2x - m|) <= k gives x in [(m - k) / 2, (m + k) / 2].
    let k = (k * (1.0 + 1e-12)).floor() as i64 + 1;
    let span = |c: i64| ((c - k).div_euclid(2), (c + k).div_euclid(2) + 1);
    let (m0, m1) = span(target.m);
    let (n0, n1) = span(target.n);
    Window { m_min: m0, m_max: m1, n_min: n0, n_max: n1 }
}

struct Grid {
    w: Window,
    width: usize,
}

impl Grid {
    fn new(w: Window) -> Self {
        Self { w, width: ((w.m_max - w.m_min) / 2 + 1) as usize }
    }

    fn len(&self) -> usize {
        self.width * (self.w.n_max - self.w.n_min + 1) as usize
    }

    #[inline(always)]
    fn index(&self, p: LatticePoint) -> Option<usize> {
        if !self.w.contains(p) {
            return None;
        }
        let col = (p.m - self.w.m_min).div_euclid(2) as usize;
        Some((p.n - self.w.n_min) as usize * self.width + col)
    }
}

#[derive(PartialEq)]
struct Entry {
    f: f64,
    pt: LatticePoint,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.pt.cmp(&self.pt))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[inline(always)]
fn incident(p: LatticePoint) -> [(LatticePoint, Edge); 4] {
    use crate::lattice::Direction::{UpLeft, UpRight};
    let ul = LatticePoint { m: p.m - 1, n: p.n + 1 };
    let ur = LatticePoint { m: p.m + 1, n: p.n + 1 };
    let dl = LatticePoint { m: p.m - 1, n: p.n - 1 };
    let dr = LatticePoint { m: p.m + 1, n: p.n - 1 };
    [
        (ul, Edge { low: p, dir: UpLeft }),
        (ur, Edge { low: p, dir: UpRight }),
        (dl, Edge { low: dl, dir: UpRight }),
        (dr, Edge { low: dr, dir: UpLeft }),
    ]
}

/// A* from the origin to `target` inside `region`. Settles every point whose
/// key does not exceed the optimum so the canonical geodesic can be rebuilt:
/// walking back from the target, the predecessor is the lexicographically
/// smallest neighbour `u` with `dist(u) + w(u, v) == dist(v)`.
fn search(
    target: LatticePoint,
    f: &NoiseField,
    wp: &WeightParams,
    region: Window,
) -> Result<(f64, PathRecord), FppError> {
    let grid = Grid::new(region);
    let mut dist = vec![f64::INFINITY; grid.len()];
    let mut done = vec![false; grid.len()];
    let thr = wp.threshold();
    let weight = |e: &Edge| if f.edge_word(e) < thr { wp.a } else { wp.b };
    // Scaled below `a` so rounding can never make the heuristic inconsistent.
    let slope = wp.a * (1.0 - 1e-9);
    let h = |p: LatticePoint| slope * p.distance(target) as f64;

    let origin = LatticePoint::ORIGIN;
    let oi = grid.index(origin).ok_or(FppError::OutsideWindow(origin))?;
    if grid.index(target).is_none() {
        return Err(FppError::OutsideWindow(target));
    }
    dist[oi] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Entry { f: h(origin), pt: origin });
    let mut best: Option<f64> = None;

    while let Some(Entry { f: key, pt }) = heap.pop() {
        if let Some(t) = best {
            if key > t {
                break;
            }
        }
        let i = grid.index(pt).unwrap();
        if done[i] {
            continue;
        }
        done[i] = true;
        let g = dist[i];
        if pt == target {
            best = Some(g);
        }
        for (q, e) in incident(pt) {
            let Some(j) = grid.index(q) else { continue };
            if done[j] {
                continue;
            }
            let ng = g + weight(&e);
            if ng < dist[j] {
                dist[j] = ng;
                heap.push(Entry { f: ng + h(q), pt: q });
            }
        }
    }

    let time = best.ok_or(FppError::Unreachable(target))?;
    let mut rev = vec![target];
    let mut v = target;
    while v != origin {
        let dv = dist[grid.index(v).unwrap()];
        let mut pred: Option<LatticePoint> = None;
        for (u, e) in incident(v) {
            let Some(j) = grid.index(u) else { continue };
            if done[j] && dist[j] + weight(&e) == dv && pred.is_none_or(|p| u < p) {
                pred = Some(u);
            }
        }
        v = pred.expect("settled point on a geodesic has a tight predecessor");
        rev.push(v);
    }
    rev.reverse();
    Ok((time, PathRecord { vertices: rev }))
}

/// Exhaustive oracle: minimum weight over all simple paths from the origin to
/// `target` inside `window`. Walks that revisit a vertex contain a cycle of
/// positive weight, so simple paths suffice.
pub fn brute_force_passage_time(
    target: LatticePoint,
    f: &NoiseField,
    wp: &WeightParams,
    window: &Window,
) -> Result<f64, FppError> {
    let target = LatticePoint::new(target.m, target.n)?;
    let edges = window.edge_count();
    if edges > MAX_BRUTE_FORCE_EDGES {
        return Err(FppError::WindowTooLarge(edges));
    }
    for pt in [LatticePoint::ORIGIN, target] {
        if !window.contains(pt) {
            return Err(FppError::OutsideWindow(pt));
        }
    }

    fn dfs(
        v: LatticePoint,
        acc: f64,
        ctx: &(LatticePoint, &NoiseField, &WeightParams, &Window),
        on_path: &mut Vec<LatticePoint>,
        best: &mut f64,
    ) {
        let (target, f, wp, window) = *ctx;
        if v == target {
            *best = best.min(acc);
            return;
        }
        for (u, e) in incident(v) {
            if !window.contains(u) || on_path.contains(&u) {
                continue;
            }
            let w = crate::lattice::edge_weight(f, &e, wp);
            on_path.push(u);
            dfs(u, acc + w, ctx, on_path, best);
            on_path.pop();
        }
    }

    let mut best = f64::INFINITY;
    let mut on_path = vec![LatticePoint::ORIGIN];
    dfs(LatticePoint::ORIGIN, 0.0, &(target, f, wp, window), &mut on_path, &mut best);
    if best.is_finite() {
        Ok(best)
    } else {
        Err(FppError::Unreachable(target))
    }
}

/// One comparison between the search and the exhaustive oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCase {
    pub target: LatticePoint,
    pub window: Window,
    /// Whether the search ran unrestricted (`true`) or inside `window`.
    pub unrestricted: bool,
    pub search: Option<f64>,
    pub exhaustive: Option<f64>,
}

impl OracleCase {
    pub fn matches(&self) -> bool {
        self.search == self.exhaustive
    }
}

/// Case `index` of the oracle comparison for field `f`.
///
/// Even cases compare the unrestricted time to one of the four targets at
/// distance 1 against exhaustive search on its safety window (16 edges when
/// `b = 2a`). Odd cases draw a small window around the origin with at most
/// [`MAX_BRUTE_FORCE_EDGES`] edges and a target inside it, and compare the
/// windowed search against exhaustive search on the same window.
pub fn oracle_case(index: usize, f: &NoiseField, wp: &WeightParams) -> Result<OracleCase, FppError> {
    if index.is_multiple_of(2) {
        let (m, n) = [(1, 1), (-1, 1), (1, -1), (-1, -1)][(index / 2) % 4];
        let target = LatticePoint { m, n };
        let window = safety_window(target, wp);
        let search = first_passage_time(target, f, wp).time;
        let exhaustive = brute_force_passage_time(target, f, wp, &window)?;
        return Ok(OracleCase {
            target,
            window,
            unrestricted: true,
            search: Some(search),
            exhaustive: Some(exhaustive),
        });
    }
    let mut state = crate::stats::mix64(f.seed() ^ index as u64);
    let mut draw = |k: u64| {
        state = crate::stats::mix64(state);
        (state % k) as i64
    };
    let window = loop {
        let w = Window::new(-draw(4), draw(4), -draw(3), draw(3));
        if let Ok(w) = w {
            if (1..=MAX_BRUTE_FORCE_EDGES).contains(&w.edge_count()) {
                break w;
            }
        }
    };
    let points: Vec<LatticePoint> = window.points().collect();
    let target = points[draw(points.len() as u64) as usize];
    let ok = |r: Result<f64, FppError>| match r {
        Ok(t) => Ok(Some(t)),
        Err(FppError::Unreachable(_)) => Ok(None),
        Err(e) => Err(e),
    };
    let search = ok(first_passage_time_in(target, f, wp, &window).map(|r| r.time))?;
    let exhaustive = ok(brute_force_passage_time(target, f, wp, &window))?;
    Ok(OracleCase { target, window, unrestricted: false, search, exhaustive })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(m: i64, n: i64) -> LatticePoint {
        LatticePoint::new(m, n).unwrap()
    }

    fn wp(p: f64) -> WeightParams {
        WeightParams::new(1.0, 2.0, p).unwrap()
    }

    #[test]
    fn oracle_cases_match() {
        for p in [0.3, 0.7] {
            for i in 0..200 {
                let case = oracle_case(i, &NoiseField::new(1000 + i as u64), &wp(p)).unwrap();
                assert!(case.matches(), "{case:?}");
                assert!(case.window.edge_count() <= MAX_BRUTE_FORCE_EDGES);
                assert_eq!(case.unrestricted, i % 2 == 0);
            }
        }
    }

    #[test]
    fn safety_window_arithmetic() {
        assert_eq!(safety_window(pt(10, 10), &wp(0.5)), Window::square(20));
        assert_eq!(safety_window(pt(0, 2), &wp(0.5)), Window::square(4));
        assert_eq!(safety_window(pt(0, 0), &wp(0.5)), Window::square(0));
    }

    #[test]
    fn all_a_diagonal() {
        let f = NoiseField::new(3);
        let r = first_passage_time(pt(7, 7), &f, &wp(1.0));
        assert_eq!(r.time, 7.0);
        let expected: Vec<_> = (0..=7).map(|k| pt(k, k)).collect();
        assert_eq!(r.geodesic.vertices(), &expected[..]);
    }

    #[test]
    fn all_b_vertical() {
        let f = NoiseField::new(3);
        let r = first_passage_time(pt(0, 2), &f, &wp(0.0));
        assert_eq!(r.time, 4.0);
        assert_eq!(r.geodesic.edge_count(), 2);
    }

    #[test]
    fn origin_target_is_degenerate() {
        let r = first_passage_time(LatticePoint::ORIGIN, &NoiseField::new(1), &wp(0.5));
        assert_eq!(r.time, 0.0);
        assert_eq!(r.window_used, Window::square(0));
        assert_eq!(r.geodesic.edge_count(), 0);
    }

    #[test]
    fn straight_path_is_minimal() {
        for (m, n) in [(0, 6), (6, 0), (-3, 5), (5, -3), (4, 4), (-7, -1), (2, 0), (0, -2)] {
            let p = straight_path(pt(m, n));
            assert_eq!(p.end(), pt(m, n));
            assert_eq!(p.edge_count() as i64, minimal_edge_count(pt(m, n)));
        }
    }

    #[test]
    fn matches_brute_force_on_tiny_windows() {
        let w = Window::new(-2, 2, -1, 2).unwrap();
        assert_eq!(w.edge_count(), 12);
        let targets: Vec<_> = w.points().collect();
        for seed in 0..50u64 {
            let f = NoiseField::new(seed);
            for p in [0.3, 0.7] {
                for &t in &targets {
                    let fast = first_passage_time_in(t, &f, &wp(p), &w).unwrap();
                    let slow = brute_force_passage_time(t, &f, &wp(p), &w).unwrap();
                    assert_eq!(fast.time, slow, "seed {seed} p {p} target {t}");
                }
            }
        }
    }

    #[test]
    fn brute_force_refuses_large_windows() {
        let w = Window::square(3);
        assert!(matches!(
            brute_force_passage_time(pt(1, 1), &NoiseField::new(0), &wp(0.5), &w),
            Err(FppError::WindowTooLarge(_))
        ));
    }

    #[test]
    fn brute_force_degenerate_cases() {
        let w = Window::square(2);
        let f = NoiseField::new(11);
        assert_eq!(brute_force_passage_time(pt(1, 1), &f, &wp(1.0), &w).unwrap(), 1.0);
        assert_eq!(brute_force_passage_time(pt(0, 2), &f, &wp(0.0), &w).unwrap(), 4.0);
    }

    #[test]
    fn geodesic_resums_to_time() {
        for seed in 0..20 {
            let f = NoiseField::new(seed);
            let w = wp(0.6);
            let r = first_passage_time(pt(8, 30), &f, &w);
            assert_eq!(path_weight(&r.geodesic, &f, &w), r.time);
            assert_eq!(r.geodesic.start(), LatticePoint::ORIGIN);
            assert_eq!(r.geodesic.end(), pt(8, 30));
        }
    }

    #[test]
    fn path_record_validation() {
        assert!(PathRecord::new(vec![]).is_err());
        assert!(PathRecord::new(vec![pt(0, 0), pt(2, 0)]).is_err());
        assert!(PathRecord::new(vec![pt(0, 0), pt(1, 1), pt(2, 0)]).is_ok());
    }
}
