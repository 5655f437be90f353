//! Geometry of the rotated lattice and the seeded edge-weight field.
//!
//! Points are `(m, n)` with `m + n` even. Every edge joins a point to one of
//! its two upper neighbours `(m ± 1, n + 1)`, so an edge is stored once, by
//! its lower endpoint and a direction.
//!
//! Edge weights are derived from a per-edge uniform `U_e` that is a pure
//! function of `(seed, edge)`. The weight is `a` when `U_e < p`, so for a
//! fixed seed the set of `a`-edges only grows with `p`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LatticeError {
    #[error("point ({m}, {n}) is not on the lattice: m + n must be even")]
    Parity { m: i64, n: i64 },
    #[error("invalid weight parameters: {0}")]
    Weights(String),
    #[error("empty window [{m_min}, {m_max}] x [{n_min}, {n_max}]")]
    EmptyWindow {
        m_min: i64,
        m_max: i64,
        n_min: i64,
        n_max: i64,
    },
    #[error("points ({0:?}) and ({1:?}) are not adjacent")]
    NotAdjacent(LatticePoint, LatticePoint),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticePoint {
    pub m: i64,
    pub n: i64,
}

impl LatticePoint {
    pub const ORIGIN: LatticePoint = LatticePoint { m: 0, n: 0 };

    pub fn new(m: i64, n: i64) -> Result<Self, LatticeError> {
        if (m + n).rem_euclid(2) != 0 {
            return Err(LatticeError::Parity { m, n });
        }
        Ok(Self { m, n })
    }

    /// Graph distance on the lattice: `max(|dm|, |dn|)`.
    pub fn distance(self, other: LatticePoint) -> i64 {
        (self.m - other.m).abs().max((self.n - other.n).abs())
    }

    pub fn is_adjacent(self, other: LatticePoint) -> bool {
        (self.m - other.m).abs() == 1 && (self.n - other.n).abs() == 1
    }
}

impl std::fmt::Display for LatticePoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {})", self.m, self.n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    UpLeft,
    UpRight,
}

impl Direction {
    pub fn dm(self) -> i64 {
        match self {
            Direction::UpLeft => -1,
            Direction::UpRight => 1,
        }
    }

    pub fn flipped(self) -> Direction {
        match self {
            Direction::UpLeft => Direction::UpRight,
            Direction::UpRight => Direction::UpLeft,
        }
    }
}

/// Canonical edge: lower endpoint plus the direction of the upper endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub low: LatticePoint,
    pub dir: Direction,
}

impl Edge {
    pub fn high(&self) -> LatticePoint {
        LatticePoint {
            m: self.low.m + self.dir.dm(),
            n: self.low.n + 1,
        }
    }

    /// The canonical edge joining two adjacent points, in either order.
    pub fn between(u: LatticePoint, v: LatticePoint) -> Result<Edge, LatticeError> {
        if !u.is_adjacent(v) {
            return Err(LatticeError::NotAdjacent(u, v));
        }
        let (low, high) = if u.n < v.n { (u, v) } else { (v, u) };
        let dir = if high.m > low.m {
            Direction::UpRight
        } else {
            Direction::UpLeft
        };
        Ok(Edge { low, dir })
    }

    /// Column interval `[min m, max m]` covered by the edge.
    pub fn x_projection(&self) -> (i64, i64) {
        let h = self.high().m;
        (self.low.m.min(h), self.low.m.max(h))
    }
}

/// Passage-time law: weight `a` with probability `p`, else `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    pub a: f64,
    pub b: f64,
    pub p: f64,
}

impl WeightParams {
    pub fn new(a: f64, b: f64, p: f64) -> Result<Self, LatticeError> {
        if !(a.is_finite() && b.is_finite() && 0.0 < a && a < b) {
            return Err(LatticeError::Weights(format!("need 0 < a < b < inf, got a={a}, b={b}")));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(LatticeError::Weights(format!("need 0 <= p <= 1, got p={p}")));
        }
        Ok(Self { a, b, p })
    }

    pub fn with_p(&self, p: f64) -> Result<Self, LatticeError> {
        Self::new(self.a, self.b, p)
    }

    /// `nu = 1 / min(b - a, a)`, the inverse of the least extra cost of a sub-optimal edge.
    pub fn nu(&self) -> f64 {
        1.0 / (self.b - self.a).min(self.a)
    }

    /// Integer threshold on the 32-bit edge word: the edge is an `a`-edge iff
    /// `word < threshold`. Equivalent to `word * 2^-32 < p` exactly.
    pub fn threshold(&self) -> u64 {
        (self.p * TWO_POW_32).ceil() as u64
    }
}

/// Finite rectangle of the lattice, bounds inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub m_min: i64,
    pub m_max: i64,
    pub n_min: i64,
    pub n_max: i64,
}

impl Window {
    pub fn new(m_min: i64, m_max: i64, n_min: i64, n_max: i64) -> Result<Self, LatticeError> {
        let w = Self { m_min, m_max, n_min, n_max };
        let has_point = m_min <= m_max
            && n_min <= n_max
            && (m_max > m_min || n_max > n_min || (m_min + n_min).rem_euclid(2) == 0);
        if !has_point {
            return Err(LatticeError::EmptyWindow { m_min, m_max, n_min, n_max });
        }
        Ok(w)
    }

    pub fn square(r: i64) -> Self {
        Self { m_min: -r, m_max: r, n_min: -r, n_max: r }
    }

    pub fn contains(&self, pt: LatticePoint) -> bool {
        (self.m_min..=self.m_max).contains(&pt.m) && (self.n_min..=self.n_max).contains(&pt.n)
    }

    pub fn contains_edge(&self, e: &Edge) -> bool {
        self.contains(e.low) && self.contains(e.high())
    }

    pub fn intersect(&self, other: &Window) -> Option<Window> {
        Window::new(
            self.m_min.max(other.m_min),
            self.m_max.min(other.m_max),
            self.n_min.max(other.n_min),
            self.n_max.min(other.n_max),
        )
        .ok()
    }

    /// Lattice points of the window in `(n, m)` row-major order.
    pub fn points(&self) -> impl Iterator<Item = LatticePoint> + '_ {
        (self.n_min..=self.n_max).flat_map(move |n| {
            let first = if (self.m_min + n).rem_euclid(2) == 0 { self.m_min } else { self.m_min + 1 };
            (first..=self.m_max).step_by(2).map(move |m| LatticePoint { m, n })
        })
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.points().flat_map(move |low| {
            [Direction::UpLeft, Direction::UpRight]
                .into_iter()
                .map(move |dir| Edge { low, dir })
                .filter(move |e| self.contains(e.high()))
        })
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }
}

/// Every edge incident to `pt` whose other endpoint lies in `w`.
///
/// Order: up-left, up-right, down-left, down-right. A point outside the
/// window has no incident window edges.
pub fn neighbors(pt: LatticePoint, w: &Window) -> Result<Vec<Edge>, LatticeError> {
    let pt = LatticePoint::new(pt.m, pt.n)?;
    if !w.contains(pt) {
        return Ok(Vec::new());
    }
    let candidates = [
        Edge { low: pt, dir: Direction::UpLeft },
        Edge { low: pt, dir: Direction::UpRight },
        Edge { low: LatticePoint { m: pt.m - 1, n: pt.n - 1 }, dir: Direction::UpRight },
        Edge { low: LatticePoint { m: pt.m + 1, n: pt.n - 1 }, dir: Direction::UpLeft },
    ];
    Ok(candidates.into_iter().filter(|e| w.contains_edge(e)).collect())
}

const TWO_POW_32: f64 = 4_294_967_296.0;
const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline(always)]
fn splitmix_finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stateless keyed noise over the edges of the lattice.
///
/// For a lower endpoint `(m, n)` the 64-bit word is
/// `splitmix_finalize(splitmix_finalize(seed) + key * GOLDEN)` with
/// `key = (n as u32) << 32 | (m as u32)`. The high half of the word drives the
/// up-left edge, the low half the up-right edge, and `U_e = half * 2^-32`.
/// Only wrapping integer arithmetic is involved, so the field is identical on
/// every platform and independent of query order.
///
/// A mirrored field reads the noise of the reflected edge (`m -> -m`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseField {
    seed: u64,
    mirrored: bool,
    key: u64,
}

impl NoiseField {
    pub fn new(seed: u64) -> Self {
        Self { seed, mirrored: false, key: splitmix_finalize(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mirrored(&self) -> Self {
        Self { mirrored: !self.mirrored, ..*self }
    }

    pub fn is_mirrored(&self) -> bool {
        self.mirrored
    }

    #[inline(always)]
    fn raw_word(&self, m: i64, n: i64) -> u64 {
        let key = ((n as u32 as u64) << 32) | (m as u32 as u64);
        splitmix_finalize(self.key.wrapping_add(key.wrapping_mul(GOLDEN)))
    }

    /// The two 32-bit edge words `(up-left, up-right)` of the upward edges at `(m, n)`.
    #[inline(always)]
    pub fn up_words(&self, m: i64, n: i64) -> (u64, u64) {
        if self.mirrored {
            let w = self.raw_word(-m, n);
            (w & 0xFFFF_FFFF, w >> 32)
        } else {
            let w = self.raw_word(m, n);
            (w >> 32, w & 0xFFFF_FFFF)
        }
    }

    /// Whether the up-left and up-right edges at `(m, n)` carry weight `a`.
    #[inline(always)]
    pub fn up_open(&self, m: i64, n: i64, threshold: u64) -> (bool, bool) {
        let (l, r) = self.up_words(m, n);
        (l < threshold, r < threshold)
    }

    #[inline(always)]
    pub fn edge_word(&self, e: &Edge) -> u64 {
        let (l, r) = self.up_words(e.low.m, e.low.n);
        match e.dir {
            Direction::UpLeft => l,
            Direction::UpRight => r,
        }
    }
}

/// `U_e` in `[0, 1)`.
pub fn edge_uniform(f: &NoiseField, e: &Edge) -> f64 {
    f.edge_word(e) as f64 / TWO_POW_32
}

pub fn is_a_edge(f: &NoiseField, e: &Edge, threshold: u64) -> bool {
    f.edge_word(e) < threshold
}

pub fn edge_weight(f: &NoiseField, e: &Edge, wp: &WeightParams) -> f64 {
    if edge_uniform(f, e) < wp.p {
        wp.a
    } else {
        wp.b
    }
}

/// `(floor(x), n)`, moved one column left when the parity is wrong.
pub fn target_point(x: f64, n: i64) -> LatticePoint {
    let fl = x.floor() as i64;
    let m = if (fl + n).rem_euclid(2) == 0 { fl } else { fl - 1 };
    LatticePoint { m, n }
}

/// Lattice point closest to `x` in Euclidean distance, ties to the
/// lexicographically smallest `(m, n)`.
pub fn nearest_lattice_point(x: [f64; 2]) -> LatticePoint {
    let (fx, fy) = (x[0].floor() as i64, x[1].floor() as i64);
    let mut best: Option<(f64, LatticePoint)> = None;
    for m in fx - 1..=fx + 2 {
        for n in fy - 1..=fy + 2 {
            if (m + n).rem_euclid(2) != 0 {
                continue;
            }
            let d = (m as f64 - x[0]).powi(2) + (n as f64 - x[1]).powi(2);
            let pt = LatticePoint { m, n };
            best = match best {
                Some((bd, bp)) if bd < d || (bd == d && bp < pt) => Some((bd, bp)),
                _ => Some((d, pt)),
            };
        }
    }
    best.expect("candidate block always holds a lattice point").1
}
