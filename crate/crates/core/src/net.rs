//! Quantization of normalized displacements.
//!
//! Both nets live on the lattice `(δ/d^{1/p})ℤ^d` with `δ = 1/m`, so a net
//! point is an integer vector `z` standing for `z · δ / d^{1/p}`. The
//! uniform grid packs the shifted `z_i` into one fixed-width integer. The
//! ranked ball net (ℓ2 only) maps the lattice points of a ball to a single
//! integer by nesting segments whose lengths are the capacity bounds
//! `M^k_δ(r)`.

use std::cell::RefCell;
use std::collections::HashMap;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use crate::bits::{BitReader, BitWriter};
use crate::error::{Error, Result};
use crate::metric::Norm;

/// `4√π` rounded up at 30 significant digits.
const FOUR_SQRT_PI_NUM: u128 = 708_981_540_362_206_410_919_266_993_337;
const FOUR_SQRT_PI_DEN: u128 = 100_000_000_000_000_000_000_000_000_000;

/// Rounds `eta_star` to the nearest point of `(δ/d^{1/p})ℤ^d`, `δ = 1/m`,
/// breaking ties toward −∞. Returns the integer multipliers.
pub fn round_to_grid(eta_star: &[f64], delta_inv: u64, norm: Norm) -> Result<Vec<i64>> {
    let d = eta_star.len();
    let m = delta_inv as f64;
    let norm_in = norm.norm(eta_star);
    let limit = 1.0 + 1.0 / m;
    if !(norm_in <= limit) {
        return Err(Error::NormOverflow {
            node: usize::MAX,
            norm: norm_in,
            limit,
        });
    }
    let scale = m * norm.root_dim(d);
    Ok(eta_star
        .iter()
        .map(|&x| (x * scale - 0.5).ceil() as i64)
        .collect())
}

/// The real vector a grid point stands for.
pub fn grid_point(z: &[i64], delta_inv: u64, norm: Norm) -> Vec<f64> {
    let side = 1.0 / (delta_inv as f64 * norm.root_dim(z.len()));
    z.iter().map(|&v| v as f64 * side).collect()
}

/// Encoding of grid points within radius `1 + δ`: the shifted coordinates
/// `z_i + B` are the digits of one base-`(2B + 1)` integer stored in a
/// fixed width.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridCodec {
    dim: usize,
    bound: u64,
    radix: u64,
    bits: u64,
}

impl GridCodec {
    pub fn new(dim: usize, delta_inv: u64, norm: Norm) -> Self {
        let bound = norm.ceil_scaled_root_dim(delta_inv + 1, dim);
        let radix = 2 * bound + 1;
        let count = BigUint::from(radix).pow(dim as u32);
        GridCodec {
            dim,
            bound,
            radix,
            bits: (count - 1u32).bits(),
        }
    }

    /// Largest admissible `|z_i|`.
    pub fn bound(&self) -> u64 {
        self.bound
    }

    /// Bits per grid point, `⌈d · log₂(2B + 1)⌉`.
    pub fn total_bits(&self) -> u64 {
        self.bits
    }

    pub fn encode(&self, z: &[i64], w: &mut BitWriter) -> Result<()> {
        if z.len() != self.dim {
            return Err(Error::Encode(format!(
                "grid point has {} coordinates, expected {}",
                z.len(),
                self.dim
            )));
        }
        let mut value = BigUint::zero();
        for &v in z.iter().rev() {
            if v.unsigned_abs() > self.bound {
                return Err(Error::Encode(format!(
                    "grid coordinate {v} outside ±{}",
                    self.bound
                )));
            }
            value = value * self.radix + (v + self.bound as i64) as u64;
        }
        w.write_big(&value, self.bits);
        Ok(())
    }

    pub fn decode(&self, r: &mut BitReader<'_>) -> Result<Vec<i64>> {
        let at = r.offset();
        let mut value = r.read_big(self.bits)?;
        let mut z = Vec::with_capacity(self.dim);
        for _ in 0..self.dim {
            let (q, digit) = value.div_rem(&BigUint::from(self.radix));
            z.push(digit.to_u64().expect("digit below radix") as i64 - self.bound as i64);
            value = q;
        }
        if !value.is_zero() {
            return Err(Error::format(at, "grid code out of range"));
        }
        Ok(z)
    }
}

fn ceil_sqrt(x: &BigUint) -> BigUint {
    let s = x.sqrt();
    if &(&s * &s) == x {
        s
    } else {
        s + 1u32
    }
}

fn isqrt_u128(x: u128) -> u64 {
    let mut r = (x as f64).sqrt() as u128;
    while r * r > x {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= x {
        r += 1;
    }
    r as u64
}

/// Lattice points of the ℓ2 ball of radius `r = num/den` on the grid
/// `(δ/√d)ℤ^d`, `δ = 1/m`, with segment ranking.
///
/// The remaining squared radius is tracked as the exact integer
/// `rem = (num·m)²·d − den²·Σz²`, so a coordinate value `i` fits iff
/// `den²·i² ≤ rem`.
#[derive(Debug)]
pub struct BallNet {
    dim: usize,
    den_sq: u128,
    top: u128,
    cache: RefCell<HashMap<(usize, u128), BigUint>>,
}

impl BallNet {
    /// Ball of radius `r_num / r_den` at precision `δ = 1/delta_inv`.
    pub fn new(dim: usize, delta_inv: u64, r_num: u64, r_den: u64) -> Result<Self> {
        if dim == 0 || delta_inv == 0 || r_den == 0 {
            return Err(Error::InvalidInput("degenerate ball net parameters".into()));
        }
        let scaled = (r_num as u128)
            .checked_mul(delta_inv as u128)
            .and_then(|s| s.checked_mul(s))
            .and_then(|s| s.checked_mul(dim as u128))
            .ok_or_else(|| Error::InvalidInput("ball net radius too large".into()))?;
        Ok(BallNet {
            dim,
            den_sq: (r_den as u128) * (r_den as u128),
            top: scaled,
            cache: RefCell::new(HashMap::new()),
        })
    }

    /// The ball of radius `1 + δ` used by the sketch codec.
    pub fn for_precision(dim: usize, delta_inv: u64) -> Result<Self> {
        BallNet::new(dim, delta_inv, delta_inv + 1, delta_inv)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Largest `|i|` with `den²·i² ≤ rem`.
    fn reach(&self, rem: u128) -> i64 {
        isqrt_u128(rem / self.den_sq) as i64
    }

    /// `M^k` for a `k`-dimensional slice with remaining squared radius
    /// `rem`: `max(1, ⌈A^k · (rem / (den²·d))^{k/2}⌉)`.
    fn cap(&self, k: usize, rem: u128) -> BigUint {
        if k == 0 {
            return BigUint::one();
        }
        if let Some(c) = self.cache.borrow().get(&(k, rem)) {
            return c.clone();
        }
        let k32 = k as u32;
        let num = BigUint::from(FOUR_SQRT_PI_NUM).pow(2 * k32) * BigUint::from(rem).pow(k32);
        let den = BigUint::from(FOUR_SQRT_PI_DEN).pow(2 * k32)
            * (BigUint::from(self.den_sq) * BigUint::from(self.dim)).pow(k32);
        let c = ceil_sqrt(&Integer::div_ceil(&num, &den)).max(BigUint::one());
        self.cache.borrow_mut().insert((k, rem), c.clone());
        c
    }

    /// `M^d_δ(r)`.
    pub fn capacity(&self) -> BigUint {
        self.cap(self.dim, self.top)
    }

    /// Bits of a stored index: `⌈log₂ capacity⌉`.
    pub fn index_width(&self) -> u64 {
        let c = self.capacity();
        if c <= BigUint::one() {
            0
        } else {
            (c - 1u32).bits()
        }
    }

    pub fn contains(&self, z: &[i64]) -> bool {
        z.len() == self.dim && {
            let sq: u128 = z.iter().map(|&v| (v as i128 * v as i128) as u128).sum();
            sq.checked_mul(self.den_sq).is_some_and(|s| s <= self.top)
        }
    }

    /// Sum of the segment lengths allotted inside a slice; never more than
    /// the slice's own capacity when the recursion is feasible.
    fn segment_total(&self, k: usize, rem: u128) -> BigUint {
        let reach = self.reach(rem);
        (-reach..=reach)
            .map(|i| self.cap(k - 1, rem - self.den_sq * (i as i128 * i as i128) as u128))
            .sum()
    }

    /// Checks segment feasibility for the slice at dimension `k`.
    pub fn segments_fit(&self, k: usize, rem: u128) -> bool {
        self.segment_total(k, rem) <= self.cap(k, rem)
    }

    /// 1-based rank of a lattice point of the ball.
    pub fn rank(&self, z: &[i64]) -> Result<BigUint> {
        if !self.contains(z) {
            return Err(Error::Encode(format!("point {z:?} is off the ball net")));
        }
        let mut offset = BigUint::zero();
        let mut rem = self.top;
        for (j, &zj) in z.iter().enumerate() {
            let k = self.dim - j;
            let total = self.segment_total(k, rem);
            if total > self.cap(k, rem) {
                return Err(Error::Encode(format!(
                    "segments overflow capacity at depth {j} (d = {})",
                    self.dim
                )));
            }
            let reach = self.reach(rem);
            for i in -reach..zj {
                offset += self.cap(k - 1, rem - self.den_sq * (i as i128 * i as i128) as u128);
            }
            rem -= self.den_sq * (zj as i128 * zj as i128) as u128;
        }
        Ok(offset + 1u32)
    }

    /// Inverse of [`BallNet::rank`].
    pub fn unrank(&self, index: &BigUint) -> Result<Vec<i64>> {
        if index.is_zero() || index > &self.capacity() {
            return Err(Error::Decode(format!(
                "ranked index {index} exceeds capacity"
            )));
        }
        let mut off = index - 1u32;
        let mut rem = self.top;
        let mut z = Vec::with_capacity(self.dim);
        for j in 0..self.dim {
            let k = self.dim - j;
            let reach = self.reach(rem);
            let mut found = None;
            for i in -reach..=reach {
                let r = rem - self.den_sq * (i as i128 * i as i128) as u128;
                let seg = self.cap(k - 1, r);
                if off < seg {
                    found = Some((i, r));
                    break;
                }
                off -= seg;
            }
            let Some((i, r)) = found else {
                return Err(Error::Decode(
                    "ranked index falls in segment padding".into(),
                ));
            };
            z.push(i);
            rem = r;
        }
        if !off.is_zero() {
            return Err(Error::Decode(
                "ranked index falls in segment padding".into(),
            ));
        }
        Ok(z)
    }

    pub fn encode(&self, z: &[i64], w: &mut BitWriter) -> Result<()> {
        let idx = self.rank(z)? - 1u32;
        w.write_big(&idx, self.index_width());
        Ok(())
    }

    pub fn decode(&self, r: &mut BitReader<'_>) -> Result<Vec<i64>> {
        let at = r.offset();
        let idx = r.read_big(self.index_width())? + 1u32;
        self.unrank(&idx)
            .map_err(|e| Error::format(at, e.to_string()))
    }

    /// Every lattice point of the ball in rank order.
    pub fn enumerate(&self) -> Vec<Vec<i64>> {
        let mut out = Vec::new();
        let mut cur = Vec::with_capacity(self.dim);
        self.enumerate_into(self.top, &mut cur, &mut out);
        out
    }

    fn enumerate_into(&self, rem: u128, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if cur.len() == self.dim {
            out.push(cur.clone());
            return;
        }
        let reach = self.reach(rem);
        for i in -reach..=reach {
            cur.push(i);
            self.enumerate_into(
                rem - self.den_sq * (i as i128 * i as i128) as u128,
                cur,
                out,
            );
            cur.pop();
        }
    }
}

/// `M^d_δ(r)` for `δ = 1/delta_inv`, `r = r_num / r_den`.
pub fn capacity(dim: usize, delta_inv: u64, r_num: u64, r_den: u64) -> Result<BigUint> {
    Ok(BallNet::new(dim, delta_inv, r_num, r_den)?.capacity())
}

/// Whether the radius-`(1+δ)` ball net in `dim` dimensions keeps its
/// segments within capacity, probed on the outermost and thinnest slices.
pub fn ranked_feasible(dim: usize, delta_inv: u64) -> bool {
    let Ok(net) = BallNet::for_precision(dim, delta_inv) else {
        return false;
    };
    // The tightest slices are the thin ones near the boundary, where a few
    // lattice points must fit in a capacity close to 1.
    (1..=dim).all(|k| {
        let unit = net.den_sq;
        std::iter::once(net.top)
            .chain((0..=16).map(|j| j * unit))
            .all(|rem| rem > net.top || net.segments_fit(k, rem))
    })
}

/// f64 view of a capacity, for reports.
pub fn capacity_log2(c: &BigUint) -> f64 {
    let bits = c.bits();
    if bits <= 1000 {
        c.to_f64().unwrap_or(f64::INFINITY).log2()
    } else {
        bits as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rounding_examples() {
        assert_eq!(round_to_grid(&[0.7], 2, Norm::L2).unwrap(), vec![1]);
        assert_eq!(grid_point(&[1], 2, Norm::L2), vec![0.5]);
        assert_eq!(round_to_grid(&[0.5], 2, Norm::L2).unwrap(), vec![1]);
        // Ties go down.
        assert_eq!(round_to_grid(&[0.25], 2, Norm::L2).unwrap(), vec![0]);
        assert_eq!(round_to_grid(&[-0.25], 2, Norm::L2).unwrap(), vec![-1]);
        assert!(matches!(
            round_to_grid(&[1.6], 2, Norm::L2),
            Err(Error::NormOverflow { .. })
        ));
    }

    #[test]
    fn rounding_error_is_at_most_half_delta() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for norm in [Norm::L1, Norm::L2, Norm::Infinity] {
            for d in [1usize, 2, 5, 16] {
                for m in [2u64, 4, 10, 37] {
                    for _ in 0..50 {
                        let v: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
                        let len = norm.norm(&v);
                        let v: Vec<f64> = v.iter().map(|x| x / len).collect();
                        let z = round_to_grid(&v, m, norm).unwrap();
                        let err = norm.dist(&grid_point(&z, m, norm), &v);
                        assert!(err <= 0.5 / m as f64 + 1e-12, "{norm} d={d} m={m}: {err}");
                    }
                }
            }
        }
    }

    #[test]
    fn grid_width_example() {
        let g = GridCodec::new(16, 10, Norm::L2);
        assert_eq!(g.bound(), 44);
        // 16 · log₂ 89 ≈ 103.6
        assert_eq!(g.total_bits(), 104);
    }

    #[test]
    fn grid_zero_vector() {
        let g = GridCodec::new(3, 5, Norm::L1);
        let mut w = BitWriter::new();
        g.encode(&[0, 0, 0], &mut w).unwrap();
        let len = w.len();
        let bytes = w.into_bytes();
        let mut r = BitReader::new(&bytes, len, 0);
        assert_eq!(g.decode(&mut r).unwrap(), vec![0, 0, 0]);
        assert!(g.encode(&[100, 0, 0], &mut BitWriter::new()).is_err());
    }

    #[test]
    fn capacity_examples() {
        assert_eq!(capacity(1, 2, 1, 1).unwrap(), BigUint::from(15u32));
        assert_eq!(capacity(3, 2, 0, 1).unwrap(), BigUint::one());
        // ⌈(4√π·4)^2⌉ = ⌈804.2477...⌉
        assert_eq!(capacity(2, 4, 1, 1).unwrap(), BigUint::from(805u32));
        let mut prev = BigUint::zero();
        for r in 0..20 {
            let c = capacity(3, 4, r, 4).unwrap();
            assert!(c >= prev);
            prev = c;
        }
    }

    #[test]
    fn one_dimensional_net() {
        let net = BallNet::new(1, 2, 1, 1).unwrap();
        let pts = net.enumerate();
        assert_eq!(pts, vec![vec![-2], vec![-1], vec![0], vec![1], vec![2]]);
        let ranks: Vec<BigUint> = pts.iter().map(|p| net.rank(p).unwrap()).collect();
        assert_eq!(ranks, (1u32..=5).map(BigUint::from).collect::<Vec<_>>());
        assert_eq!(net.unrank(&BigUint::one()).unwrap(), vec![-2]);
        assert!(net.unrank(&BigUint::from(6u32)).is_err());
        assert!(net.unrank(&BigUint::from(16u32)).is_err());
    }

    #[test]
    fn exhaustive_roundtrip_small() {
        for d in 1..=3 {
            for m in [2u64, 4] {
                for (rn, rd) in [(1u64, 1u64), (5, 4)] {
                    let net = BallNet::new(d, m, rn, rd).unwrap();
                    let cap = net.capacity();
                    let pts = net.enumerate();
                    assert!(BigUint::from(pts.len()) <= cap);
                    let mut seen = std::collections::HashSet::new();
                    for p in &pts {
                        let idx = net.rank(p).unwrap();
                        assert!(idx >= BigUint::one() && idx <= cap);
                        assert!(seen.insert(idx.clone()));
                        assert_eq!(&net.unrank(&idx).unwrap(), p);
                    }
                }
            }
        }
    }

    #[test]
    fn two_dimensional_decode_sweep() {
        let net = BallNet::new(2, 2, 3, 2).unwrap();
        let cap = net.capacity().to_u64().unwrap();
        let valid: std::collections::HashSet<u64> = net
            .enumerate()
            .iter()
            .map(|p| net.rank(p).unwrap().to_u64().unwrap())
            .collect();
        for idx in 1..=cap {
            let res = net.unrank(&BigUint::from(idx));
            assert_eq!(res.is_ok(), valid.contains(&idx), "index {idx}");
        }
    }

    #[test]
    fn feasibility_limit() {
        assert!(ranked_feasible(3, 5));
        assert!(ranked_feasible(12, 5));
        assert!(!ranked_feasible(16, 5));
        let net = BallNet::for_precision(16, 10).unwrap();
        let z = vec![0i64; 16];
        assert!(matches!(net.rank(&z), Err(Error::Encode(_))));
    }

    proptest! {
        #[test]
        fn grid_roundtrip(z in prop::collection::vec(-44i64..=44, 16)) {
            let g = GridCodec::new(16, 10, Norm::L2);
            let mut w = BitWriter::new();
            g.encode(&z, &mut w).unwrap();
            prop_assert_eq!(w.len(), g.total_bits());
            let len = w.len();
            let bytes = w.into_bytes();
            prop_assert_eq!(g.decode(&mut BitReader::new(&bytes, len, 0)).unwrap(), z);
        }

        #[test]
        fn ranked_spot_checks(seed in 0u64..500, d in 4usize..=8) {
            let m = 5;
            let net = BallNet::for_precision(d, m).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let reach = ((m + 1) as f64 * (d as f64).sqrt()) as i64;
            let z = loop {
                let z: Vec<i64> = (0..d).map(|_| rng.random_range(-reach..=reach)).collect();
                if net.contains(&z) {
                    break z;
                }
            };
            let idx = net.rank(&z).unwrap();
            prop_assert!(idx.bits() <= net.index_width().max(1));
            prop_assert_eq!(net.unrank(&idx).unwrap(), z);
        }
    }
}
