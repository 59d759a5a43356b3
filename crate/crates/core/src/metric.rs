//! Input model: ℓp geometry, normalized point sets, explicit distance
//! matrices and the brute-force all-pairs oracle.

use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::params::pow2;

/// An ℓp norm with rational exponent `p = num / den ≥ 1`, or ℓ∞.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Norm {
    Lp { num: u32, den: u32 },
    Infinity,
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl Norm {
    pub const L1: Norm = Norm::Lp { num: 1, den: 1 };
    pub const L2: Norm = Norm::Lp { num: 2, den: 1 };

    /// The ℓp norm with `p = num / den`, reduced to lowest terms.
    pub fn rational(num: u32, den: u32) -> Result<Norm> {
        if den == 0 || num < den {
            return Err(Error::InvalidInput(format!(
                "norm exponent {num}/{den} must be >= 1"
            )));
        }
        let g = gcd(num, den);
        Ok(Norm::Lp {
            num: num / g,
            den: den / g,
        })
    }

    /// Parses `"1"`, `"2"`, `"inf"`, or a ratio such as `"3/2"`.
    pub fn parse(text: &str) -> Result<Norm> {
        let t = text.trim();
        if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") || t == "∞" {
            return Ok(Norm::Infinity);
        }
        let bad = || Error::InvalidInput(format!("cannot parse norm exponent '{text}'"));
        match t.split_once('/') {
            Some((a, b)) => Norm::rational(
                a.trim().parse().map_err(|_| bad())?,
                b.trim().parse().map_err(|_| bad())?,
            ),
            None => Norm::rational(t.parse().map_err(|_| bad())?, 1),
        }
    }

    /// The exponent `p`, or `None` for ℓ∞.
    pub fn exponent(&self) -> Option<f64> {
        match *self {
            Norm::Lp { num, den } => Some(num as f64 / den as f64),
            Norm::Infinity => None,
        }
    }

    pub fn is_euclidean(&self) -> bool {
        *self == Norm::L2
    }

    /// `d^{1/p}`, the ℓp norm of the all-ones vector in `d` dimensions.
    pub fn root_dim(&self, d: usize) -> f64 {
        match *self {
            Norm::Infinity => 1.0,
            Norm::Lp { num: 1, den: 1 } => d as f64,
            Norm::Lp { num: 2, den: 1 } => (d as f64).sqrt(),
            Norm::Lp { num, den } => (d as f64).powf(den as f64 / num as f64),
        }
    }

    /// `⌈s · d^{1/p}⌉`, exact for p ∈ {1, 2, ∞}.
    pub fn ceil_scaled_root_dim(&self, s: u64, d: usize) -> u64 {
        let d = d as u64;
        match *self {
            Norm::Infinity => s,
            Norm::Lp { num: 1, den: 1 } => s * d,
            Norm::Lp { num: 2, den: 1 } => {
                let target = (s as u128) * (s as u128) * (d as u128);
                let mut r = (target as f64).sqrt() as u128;
                while r * r > target {
                    r -= 1;
                }
                while r * r < target {
                    r += 1;
                }
                r as u64
            }
            Norm::Lp { .. } => (s as f64 * self.root_dim(d as usize)).ceil() as u64,
        }
    }

    /// ‖v‖_p.
    pub fn norm(&self, v: &[f64]) -> f64 {
        self.norm_of_abs(v.iter().map(|x| x.abs()))
    }

    /// ‖a − b‖_p without a length check.
    #[inline]
    pub fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        self.norm_of_abs(a.iter().zip(b).map(|(x, y)| (x - y).abs()))
    }

    #[inline]
    fn norm_of_abs<I: Iterator<Item = f64> + Clone>(&self, terms: I) -> f64 {
        match *self {
            Norm::Infinity => terms.fold(0.0f64, f64::max),
            Norm::Lp { num: 1, den: 1 } => terms.sum(),
            _ => {
                let r = self.powered_sum(terms.clone(), 1.0);
                if r.is_finite() && r > 1e-140 {
                    return r;
                }
                // Powers over- or underflowed; factor out the largest term.
                let m = terms.clone().fold(0.0f64, f64::max);
                if m == 0.0 || !m.is_finite() {
                    return m;
                }
                m * self.powered_sum(terms, m)
            }
        }
    }

    fn powered_sum(&self, terms: impl Iterator<Item = f64>, by: f64) -> f64 {
        match *self {
            Norm::Lp { num: 2, den: 1 } => terms.map(|t| (t / by) * (t / by)).sum::<f64>().sqrt(),
            Norm::Lp { num, den } => {
                let p = num as f64 / den as f64;
                terms.map(|t| (t / by).powf(p)).sum::<f64>().powf(1.0 / p)
            }
            Norm::Infinity => unreachable!("handled by norm_of_abs"),
        }
    }
}

impl std::fmt::Display for Norm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Norm::Infinity => write!(f, "inf"),
            Norm::Lp { num, den: 1 } => write!(f, "{num}"),
            Norm::Lp { num, den } => write!(f, "{num}/{den}"),
        }
    }
}

/// ‖u − v‖_p.
pub fn lp_distance(u: &[f64], v: &[f64], norm: Norm) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    Ok(norm.dist(u, v))
}

/// A normalized embedding of `n` labeled points: the minimum pairwise
/// distance is 1 and `spread` is the diameter.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    n: usize,
    d: usize,
    norm: Norm,
    coords: Vec<f64>,
    scale: f64,
    spread: f64,
}

impl PointSet {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    /// Row-major `n × d` normalized coordinates.
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn point(&self, label: usize) -> &[f64] {
        &self.coords[label * self.d..(label + 1) * self.d]
    }

    /// Multiplier taking normalized distances back to input units.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Diameter of the normalized set.
    pub fn spread(&self) -> f64 {
        self.spread
    }

    #[inline]
    pub fn distance(&self, x: usize, y: usize) -> f64 {
        self.norm.dist(self.point(x), self.point(y))
    }

    /// Returns the same set with `scale` multiplied by `factor`.
    pub(crate) fn with_scale_factor(mut self, factor: f64) -> Self {
        self.scale *= factor;
        self
    }
}

struct PairExtremes {
    min: f64,
    max: f64,
    zero: Option<(usize, usize)>,
}

fn pair_extremes(coords: &[f64], n: usize, d: usize, norm: Norm, exec: Exec) -> PairExtremes {
    let rows = par::map_range(n, exec, |i| {
        let a = &coords[i * d..(i + 1) * d];
        let mut min = f64::INFINITY;
        let mut max = 0.0f64;
        let mut zero = None;
        for j in i + 1..n {
            let dist = norm.dist(a, &coords[j * d..(j + 1) * d]);
            if dist == 0.0 && zero.is_none() {
                zero = Some((i, j));
            }
            min = min.min(dist);
            max = max.max(dist);
        }
        PairExtremes { min, max, zero }
    });
    rows.into_iter().fold(
        PairExtremes {
            min: f64::INFINITY,
            max: 0.0,
            zero: None,
        },
        |acc, r| PairExtremes {
            min: acc.min.min(r.min),
            max: acc.max.max(r.max),
            zero: acc.zero.or(r.zero),
        },
    )
}

/// Scales `coords` (row-major, `d` columns) so the closest pair is at
/// distance exactly 1 or marginally above.
pub fn normalize(coords: Vec<f64>, d: usize, norm: Norm) -> Result<PointSet> {
    normalize_with(coords, d, norm, Exec::default())
}

pub fn normalize_with(mut coords: Vec<f64>, d: usize, norm: Norm, exec: Exec) -> Result<PointSet> {
    if d == 0 {
        return Err(Error::InvalidInput("dimension must be positive".into()));
    }
    if !coords.len().is_multiple_of(d) {
        return Err(Error::InvalidInput(format!(
            "{} coordinates do not form rows of length {d}",
            coords.len()
        )));
    }
    let n = coords.len() / d;
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 points, got {n}"
        )));
    }
    if let Some(bad) = coords.iter().position(|c| !c.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite coordinate in point {}",
            bad / d
        )));
    }
    // A power-of-two prescale is exact and makes the result independent of
    // the input's binary exponent.
    let top = coords.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let mut scale = 1.0;
    if top > 0.0 {
        let p = pow2((top.log2().floor() as i32).clamp(-1022, 1023));
        coords.iter_mut().for_each(|c| *c /= p);
        scale = p;
    }
    let ext = pair_extremes(&coords, n, d, norm, exec);
    if let Some((first, second)) = ext.zero {
        return Err(Error::DuplicatePoint { first, second });
    }
    if !(ext.max * scale).is_finite() {
        return Err(Error::InvalidInput(
            "pairwise distance overflows f64".into(),
        ));
    }
    scale *= ext.min;
    coords.iter_mut().for_each(|c| *c /= ext.min);
    // Division can leave the closest pair a few ulps short of 1.
    let mut ext = pair_extremes(&coords, n, d, norm, exec);
    for i in 0..16 {
        if ext.min >= 1.0 {
            break;
        }
        let nudge = 1.0 + f64::EPSILON * f64::from(1u32 << i);
        coords.iter_mut().for_each(|c| *c *= nudge);
        scale /= nudge;
        ext = pair_extremes(&coords, n, d, norm, exec);
    }
    Ok(PointSet {
        n,
        d,
        norm,
        coords,
        scale,
        spread: ext.max,
    })
}

/// A symmetric, zero-diagonal matrix of pairwise distances.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl DistanceMatrix {
    /// Validates a general metric: symmetric, zero diagonal, positive
    /// off-diagonal, triangle inequality up to 1e-9 relative slack.
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::InvalidInput(format!(
                "distance matrix needs {} entries, got {}",
                n * n,
                entries.len()
            )));
        }
        if n < 2 {
            return Err(Error::InvalidInput("distance matrix needs n >= 2".into()));
        }
        for i in 0..n {
            if entries[i * n + i] != 0.0 {
                return Err(Error::InvalidInput(format!("nonzero diagonal at {i}")));
            }
            for j in i + 1..n {
                let a = entries[i * n + j];
                if !(a.is_finite() && a > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "distance ({i},{j}) = {a} is not positive and finite"
                    )));
                }
                if a != entries[j * n + i] {
                    return Err(Error::InvalidInput(format!("asymmetric entry ({i},{j})")));
                }
            }
        }
        let m = DistanceMatrix { n, entries };
        if let Some((x, y, z)) = m.triangle_violation(1e-9) {
            return Err(Error::InvalidInput(format!(
                "triangle inequality fails: d({x},{z}) > d({x},{y}) + d({y},{z})"
            )));
        }
        Ok(m)
    }

    pub(crate) fn from_raw(n: usize, entries: Vec<f64>) -> Self {
        DistanceMatrix { n, entries }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.entries[x * self.n + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.entries[x * self.n..(x + 1) * self.n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Smallest and largest off-diagonal entries.
    pub fn extremes(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for i in 0..self.n {
            for j in i + 1..self.n {
                lo = lo.min(self.get(i, j));
                hi = hi.max(self.get(i, j));
            }
        }
        (lo, hi)
    }

    /// First triple `(x, y, z)` with `d(x,z) > (d(x,y) + d(y,z))(1 + tol)`.
    pub fn triangle_violation(&self, tol: f64) -> Option<(usize, usize, usize)> {
        let n = self.n;
        for y in 0..n {
            let ry = self.row(y);
            for x in 0..n {
                let dxy = ry[x];
                let rx = self.row(x);
                for z in 0..n {
                    if rx[z] > (dxy + ry[z]) * (1.0 + tol) {
                        return Some((x, y, z));
                    }
                }
            }
        }
        None
    }
}

/// Exact all-pairs distances of a point set.
pub fn oracle_all_pairs(ps: &PointSet) -> DistanceMatrix {
    oracle_all_pairs_with(ps, Exec::default())
}

pub fn oracle_all_pairs_with(ps: &PointSet, exec: Exec) -> DistanceMatrix {
    let n = ps.len();
    let mut entries = vec![0.0; n * n];
    par::fill_rows(&mut entries, n, exec, |x, row| {
        let px = ps.point(x);
        for (y, slot) in row.iter_mut().enumerate() {
            if y != x {
                *slot = ps.norm.dist(px, ps.point(y));
            }
        }
    });
    DistanceMatrix::from_raw(n, entries)
}
