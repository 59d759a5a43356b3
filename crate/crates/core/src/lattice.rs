//! Exact integer surrogate offsets.
//!
//! A shifted surrogate is stored as an integer vector `S` in units of
//! `ε/d^{1/p}`. Each stored displacement adds `z · 2^shift`, so replay is
//! exact and independent of evaluation order. Small spreads fit in `i128`;
//! very large ones fall back to big integers.

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};

use crate::metric::Norm;

/// Integer type able to hold surrogate offsets.
pub trait Exact: Clone + PartialEq + std::fmt::Debug + Send + Sync + 'static {
    fn zero() -> Self;
    /// `self + z · 2^shift`, or `None` on overflow.
    fn add_shifted(&self, z: i64, shift: u32) -> Option<Self>;
    /// `self − other` as a float.
    fn diff_f64(&self, other: &Self) -> f64;
    fn to_big(&self) -> BigInt;
    fn from_big(v: &BigInt) -> Option<Self>;
}

impl Exact for i128 {
    fn zero() -> Self {
        0
    }

    fn add_shifted(&self, z: i64, shift: u32) -> Option<Self> {
        if z == 0 {
            return Some(*self);
        }
        let mag = (z.unsigned_abs() as u128).checked_shl(shift)?;
        if mag.leading_zeros() < 2 || mag >> shift != z.unsigned_abs() as u128 {
            return None;
        }
        let step = if z < 0 { -(mag as i128) } else { mag as i128 };
        self.checked_add(step)
    }

    fn diff_f64(&self, other: &Self) -> f64 {
        match self.checked_sub(*other) {
            Some(d) => d as f64,
            None => (BigInt::from(*self) - BigInt::from(*other))
                .to_f64()
                .unwrap_or(f64::NAN),
        }
    }

    fn to_big(&self) -> BigInt {
        BigInt::from(*self)
    }

    fn from_big(v: &BigInt) -> Option<Self> {
        v.to_i128()
    }
}

impl Exact for BigInt {
    fn zero() -> Self {
        Zero::zero()
    }

    fn add_shifted(&self, z: i64, shift: u32) -> Option<Self> {
        Some(self + (BigInt::from(z) << shift))
    }

    fn diff_f64(&self, other: &Self) -> f64 {
        (self - other).to_f64().unwrap_or(f64::INFINITY)
    }

    fn to_big(&self) -> BigInt {
        self.clone()
    }

    fn from_big(v: &BigInt) -> Option<Self> {
        Some(v.clone())
    }
}

/// `base + z · 2^shift` coordinatewise.
pub fn step<T: Exact>(base: &[T], z: &[i64], shift: u32) -> Option<Vec<T>> {
    base.iter()
        .zip(z)
        .map(|(b, &zi)| b.add_shifted(zi, shift))
        .collect()
}

/// `‖a − b‖_p` of two offset vectors, in offset units.
pub fn diff_norm<T: Exact>(a: &[T], b: &[T], norm: Norm) -> f64 {
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x.diff_f64(y)).collect();
    norm.norm(&diffs)
}

pub fn to_f64<T: Exact>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.diff_f64(&T::zero())).collect()
}

/// Whether offsets of magnitude below `2^bits` need big integers.
pub fn needs_wide(bits: u64) -> bool {
    bits + 2 > 126
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn narrow_overflow_is_detected() {
        assert_eq!(0i128.add_shifted(3, 4), Some(48));
        assert_eq!(5i128.add_shifted(-1, 2), Some(1));
        assert_eq!(0i128.add_shifted(1, 130), None);
        assert_eq!(0i128.add_shifted(1, 126), None);
        assert_eq!(0i128.add_shifted(1, 120), Some(1i128 << 120));
        assert_eq!(0i128.add_shifted(0, 500), Some(0));
    }

    proptest! {
        #[test]
        fn narrow_matches_wide(
            zs in prop::collection::vec((prop::collection::vec(-1000i64..1000, 3), 0u32..90), 1..12),
        ) {
            let mut narrow = vec![0i128; 3];
            let mut wide = vec![BigInt::from(0); 3];
            for (z, shift) in &zs {
                narrow = step(&narrow, z, *shift).unwrap();
                wide = step(&wide, z, *shift).unwrap();
            }
            let back: Vec<BigInt> = narrow.iter().map(Exact::to_big).collect();
            prop_assert_eq!(&back, &wide);
            let zero_n = vec![0i128; 3];
            let zero_w = vec![BigInt::from(0); 3];
            prop_assert_eq!(
                diff_norm(&narrow, &zero_n, Norm::L2),
                diff_norm(&wide, &zero_w, Norm::L2)
            );
        }
    }
}
