//! MSB-first bit streams with fixed-width and Elias-gamma integer codes.

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, Zero};

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default)]
pub struct BitWriter {
    bytes: Vec<u8>,
    len: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of bits written so far.
    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push_bit(&mut self, bit: bool) {
        let off = (self.len % 8) as u32;
        if off == 0 {
            self.bytes.push(0);
        }
        if bit {
            *self.bytes.last_mut().expect("byte pushed above") |= 0x80 >> off;
        }
        self.len += 1;
    }

    /// Low `width` bits of `value`, most significant first.
    pub fn write_bits(&mut self, value: u64, width: u32) {
        debug_assert!(width == 64 || value >> width == 0);
        for i in (0..width).rev() {
            self.push_bit((value >> i) & 1 == 1);
        }
    }

    pub fn write_big(&mut self, value: &BigUint, width: u64) {
        debug_assert!(value.bits() <= width);
        for i in (0..width).rev() {
            self.push_bit(value.bit(i));
        }
    }

    /// Two's complement in `width` bits; the caller checks the range.
    pub fn write_signed_big(&mut self, value: &BigInt, width: u64) {
        let modulus = BigInt::one() << width;
        let wrapped = if value.sign() == Sign::Minus {
            value + &modulus
        } else {
            value.clone()
        };
        self.write_big(
            &wrapped.to_biguint().expect("wrapped is nonnegative"),
            width,
        );
    }

    /// Elias gamma code of `value ≥ 1`.
    pub fn write_gamma(&mut self, value: u64) {
        assert!(value >= 1, "gamma code needs a positive integer");
        let width = 64 - value.leading_zeros();
        for _ in 1..width {
            self.push_bit(false);
        }
        self.write_bits(value, width);
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

/// Reads a bounded bit range; every error carries the absolute bit offset
/// of the failing read.
#[derive(Clone, Debug)]
pub struct BitReader<'a> {
    bytes: &'a [u8],
    pos: u64,
    end: u64,
    base: u64,
}

impl<'a> BitReader<'a> {
    /// A reader over the first `len` bits of `bytes`, reporting offsets
    /// relative to `base`.
    pub fn new(bytes: &'a [u8], len: u64, base: u64) -> Self {
        debug_assert!(len <= bytes.len() as u64 * 8);
        BitReader {
            bytes,
            pos: 0,
            end: len,
            base,
        }
    }

    pub fn position(&self) -> u64 {
        self.pos
    }

    /// Absolute offset of the next bit, for error messages.
    pub fn offset(&self) -> u64 {
        self.base + self.pos
    }

    pub fn remaining(&self) -> u64 {
        self.end - self.pos
    }

    pub fn error(&self, msg: impl Into<String>) -> Error {
        Error::format(self.offset(), msg)
    }

    pub fn read_bit(&mut self) -> Result<bool> {
        if self.pos >= self.end {
            return Err(self.error("unexpected end of payload"));
        }
        let byte = self.bytes[(self.pos / 8) as usize];
        let bit = byte & (0x80 >> (self.pos % 8)) != 0;
        self.pos += 1;
        Ok(bit)
    }

    pub fn read_bits(&mut self, width: u32) -> Result<u64> {
        debug_assert!(width <= 64);
        if self.remaining() < width as u64 {
            return Err(self.error("unexpected end of payload"));
        }
        let mut v = 0u64;
        for _ in 0..width {
            v = (v << 1) | self.read_bit()? as u64;
        }
        Ok(v)
    }

    pub fn read_big(&mut self, width: u64) -> Result<BigUint> {
        if self.remaining() < width {
            return Err(self.error("unexpected end of payload"));
        }
        let mut bytes = Vec::with_capacity(width.div_ceil(8) as usize);
        let head = (width % 8) as u32;
        if head > 0 {
            bytes.push(self.read_bits(head)? as u8);
        }
        for _ in 0..width / 8 {
            bytes.push(self.read_bits(8)? as u8);
        }
        Ok(BigUint::from_bytes_be(&bytes))
    }

    pub fn read_signed_big(&mut self, width: u64) -> Result<BigInt> {
        if width == 0 {
            return Ok(BigInt::zero());
        }
        let raw = BigInt::from(self.read_big(width)?);
        if raw.bit(width - 1) {
            Ok(raw - (BigInt::one() << width))
        } else {
            Ok(raw)
        }
    }

    pub fn read_gamma(&mut self) -> Result<u64> {
        let start = self.offset();
        let mut zeros = 0u32;
        while !self.read_bit()? {
            zeros += 1;
            if zeros >= 64 {
                return Err(Error::format(start, "gamma code longer than 64 bits"));
            }
        }
        let rest = self.read_bits(zeros)?;
        Ok((1u64 << zeros) | rest)
    }
}

/// Bits needed to write any value in `0..count`: `⌈log₂ count⌉`.
pub fn width_for(count: u64) -> u32 {
    if count <= 1 {
        0
    } else {
        64 - (count - 1).leading_zeros()
    }
}

/// Length of the gamma code of `value ≥ 1`.
pub fn gamma_len(value: u64) -> u64 {
    2 * (63 - value.leading_zeros() as u64) + 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gamma_codes() {
        let mut w = BitWriter::new();
        w.write_gamma(1);
        w.write_gamma(2);
        w.write_gamma(5);
        assert_eq!(w.len(), 1 + 3 + 5);
        // 1 | 010 | 00101
        assert_eq!(w.clone().into_bytes(), vec![0b1010_0010, 0b1000_0000]);
        let bytes = w.into_bytes();
        let mut r = BitReader::new(&bytes, 9, 0);
        assert_eq!(r.read_gamma().unwrap(), 1);
        assert_eq!(r.read_gamma().unwrap(), 2);
        assert_eq!(r.read_gamma().unwrap(), 5);
        assert!(r.read_bit().is_err());
        assert_eq!(gamma_len(5), 5);
        assert_eq!(gamma_len(1), 1);
    }

    #[test]
    fn widths() {
        assert_eq!(width_for(0), 0);
        assert_eq!(width_for(1), 0);
        assert_eq!(width_for(2), 1);
        assert_eq!(width_for(89), 7);
        assert_eq!(width_for(128), 7);
        assert_eq!(width_for(129), 8);
    }

    #[test]
    fn truncated_read_reports_offset() {
        let bytes = [0u8; 2];
        let mut r = BitReader::new(&bytes, 12, 100);
        r.read_bits(10).unwrap();
        match r.read_bits(3) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 110),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn mixed_roundtrip(
            vals in prop::collection::vec((1u64..u64::MAX, 0u64..1 << 20, -1000i64..1000), 0..40)
        ) {
            let mut w = BitWriter::new();
            for &(g, f, s) in &vals {
                w.write_gamma(g);
                w.write_bits(f, 20);
                w.write_signed_big(&BigInt::from(s), 11);
                w.write_big(&BigUint::from(f), 21);
            }
            let len = w.len();
            let bytes = w.into_bytes();
            let mut r = BitReader::new(&bytes, len, 0);
            for &(g, f, s) in &vals {
                prop_assert_eq!(r.read_gamma().unwrap(), g);
                prop_assert_eq!(r.read_bits(20).unwrap(), f);
                prop_assert_eq!(r.read_signed_big(11).unwrap(), BigInt::from(s));
                prop_assert_eq!(r.read_big(21).unwrap(), BigUint::from(f));
            }
            prop_assert_eq!(r.remaining(), 0);
        }
    }
}
