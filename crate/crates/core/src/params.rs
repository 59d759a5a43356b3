use crate::error::{Error, Result};

/// Accuracy parameter, snapped down to a negative power of two `2^{-t}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Epsilon {
    log2_inv: u32,
}

impl Epsilon {
    pub const MAX_LOG2_INV: u32 = 40;

    /// Largest `2^{-t} ≤ raw`, for `raw ∈ (0, 1/2]`.
    pub fn snap(raw: f64) -> Result<Self> {
        if !(raw > 0.0 && raw <= 0.5) {
            return Err(Error::InvalidInput(format!(
                "epsilon must lie in (0, 1/2], got {raw}"
            )));
        }
        let mut t = 1;
        while pow2(-(t as i32)) > raw {
            t += 1;
        }
        if t > Self::MAX_LOG2_INV {
            return Err(Error::InvalidInput(format!("epsilon {raw} is too small")));
        }
        Ok(Epsilon { log2_inv: t })
    }

    /// `ε = 2^{-t}` given `t ≥ 1`.
    pub fn from_log2_inv(t: u32) -> Result<Self> {
        if t == 0 || t > Self::MAX_LOG2_INV {
            return Err(Error::InvalidInput(format!(
                "epsilon exponent {t} out of range"
            )));
        }
        Ok(Epsilon { log2_inv: t })
    }

    pub fn value(&self) -> f64 {
        pow2(-(self.log2_inv as i32))
    }

    /// `t = log₂(1/ε)`.
    pub fn log2_inv(&self) -> u32 {
        self.log2_inv
    }

    /// `1/ε` as an integer.
    pub fn inverse(&self) -> u64 {
        1u64 << self.log2_inv
    }
}

/// Exact `2^e` for exponents in the normal f64 range.
pub(crate) fn pow2(e: i32) -> f64 {
    if e < -1022 {
        return 0.0;
    }
    if e > 1023 {
        return f64::INFINITY;
    }
    f64::from_bits(((e + 1023) as u64) << 52)
}

/// Which δ-net encodes the per-node displacements.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum NetKind {
    /// Ranked lattice points of an ℓ2 ball (p = 2 only).
    RankedBall,
    /// Fixed-width per-coordinate integers on `(δ/d^{1/p})ℤ^d`.
    #[default]
    UniformGrid,
}

/// Random-projection front end for Euclidean inputs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JlConfig {
    pub constant: f64,
    pub seed: u64,
}

impl Default for JlConfig {
    fn default() -> Self {
        JlConfig {
            constant: 4.0,
            seed: 0x5eed_0f1d_5eed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SketchParams {
    pub epsilon: Epsilon,
    pub net: NetKind,
    pub landmarks: bool,
    /// `None` disables random projection.
    pub jl: Option<JlConfig>,
}

impl SketchParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        Ok(SketchParams {
            epsilon: Epsilon::snap(epsilon)?,
            net: NetKind::default(),
            landmarks: false,
            jl: None,
        })
    }

    pub fn with_net(mut self, net: NetKind) -> Self {
        self.net = net;
        self
    }

    pub fn with_landmarks(mut self, on: bool) -> Self {
        self.landmarks = on;
        self
    }

    pub fn with_jl(mut self, jl: Option<JlConfig>) -> Self {
        self.jl = jl;
        self
    }
}
