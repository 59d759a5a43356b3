//! Front ends: sign-matrix random projection for Euclidean inputs and the
//! distance-vector embedding of general metrics into ℓ∞.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metric::{normalize_with, DistanceMatrix, Norm, PointSet};
use crate::par::{self, Exec};
use crate::params::{Epsilon, JlConfig};

/// `d′ = ⌈C · ε⁻² · ln n⌉`, at least 1.
pub fn jl_target_dim(n: usize, eps: Epsilon, constant: f64) -> usize {
    let inv = eps.inverse() as f64;
    ((constant * inv * inv * (n as f64).ln()).ceil() as usize).max(1)
}

/// Rows of `±1` entries, filled 64 signs per generator draw.
fn sign_matrix(rows: usize, cols: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(rows * cols);
    let mut word = 0u64;
    for i in 0..rows * cols {
        if i % 64 == 0 {
            word = rng.next_u64();
        }
        out.push(if (word >> (i % 64)) & 1 == 1 {
            1.0
        } else {
            -1.0
        });
    }
    out
}

/// Projects a Euclidean point set to `d′` dimensions when that is smaller
/// than `d`, then renormalizes. The returned scale maps back to the input
/// units of `ps`.
pub fn jl_project(ps: &PointSet, eps: Epsilon, config: JlConfig) -> Result<PointSet> {
    jl_project_with(ps, eps, config, Exec::default())
}

pub fn jl_project_with(
    ps: &PointSet,
    eps: Epsilon,
    config: JlConfig,
    exec: Exec,
) -> Result<PointSet> {
    if ps.norm() != Norm::L2 {
        return Err(Error::UnsupportedNorm(format!(
            "random projection needs p = 2, got p = {}",
            ps.norm()
        )));
    }
    if !(config.constant.is_finite() && config.constant > 0.0) {
        return Err(Error::InvalidInput(format!(
            "projection constant must be positive, got {}",
            config.constant
        )));
    }
    let (n, d) = (ps.len(), ps.dim());
    let target = jl_target_dim(n, eps, config.constant);
    if target >= d {
        return Ok(ps.clone());
    }
    let m = sign_matrix(target, d, config.seed);
    let norm = 1.0 / (target as f64).sqrt();
    let mut out = vec![0.0; n * target];
    par::fill_rows(&mut out, target, exec, |x, row| {
        let p = ps.point(x);
        for (k, slot) in row.iter_mut().enumerate() {
            let r = &m[k * d..(k + 1) * d];
            *slot = norm * r.iter().zip(p).map(|(a, b)| a * b).sum::<f64>();
        }
    });
    let projected = normalize_with(out, target, Norm::L2, exec)?;
    let factor = ps.scale();
    Ok(projected.with_scale_factor(factor))
}

/// Maps point `x` to `(D(x,0), …, D(x,n−1))` under ℓ∞, an isometry.
pub fn frechet_embed(dm: &DistanceMatrix) -> Result<PointSet> {
    normalize_with(
        dm.entries().to_vec(),
        dm.len(),
        Norm::Infinity,
        Exec::default(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{normalize, oracle_all_pairs};
    use rand::Rng;

    #[test]
    fn target_dimension() {
        let eps = Epsilon::from_log2_inv(2).unwrap();
        assert_eq!(jl_target_dim(500, eps, 4.0), 398);
        assert_eq!(jl_target_dim(1, eps, 4.0), 1);
    }

    #[test]
    fn identity_when_not_reducing() {
        let ps = normalize(vec![0.0, 0.0, 1.0, 2.0, 5.0, 1.0], 2, Norm::L2).unwrap();
        let out = jl_project(&ps, Epsilon::from_log2_inv(1).unwrap(), JlConfig::default()).unwrap();
        assert_eq!(out, ps);
    }

    #[test]
    fn deterministic_and_scale_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let raw: Vec<f64> = (0..40 * 300).map(|_| rng.random::<f64>()).collect();
        let eps = Epsilon::from_log2_inv(1).unwrap();
        let cfg = JlConfig {
            constant: 1.0,
            seed: 77,
        };
        let ps = normalize(raw.clone(), 300, Norm::L2).unwrap();
        let a = jl_project(&ps, eps, cfg).unwrap();
        let b = jl_project_with(&ps, eps, cfg, Exec::Sequential).unwrap();
        assert_eq!(a, b);
        assert!(a.dim() < 300);
        let scaled = normalize(raw.iter().map(|x| x * 8.0).collect(), 300, Norm::L2).unwrap();
        let c = jl_project(&scaled, eps, cfg).unwrap();
        assert_eq!(c.coords(), a.coords());
        assert_eq!(c.scale(), a.scale() * 8.0);
    }

    #[test]
    fn rejects_other_norms() {
        let ps = normalize(vec![0.0, 1.0, 3.0], 1, Norm::L1).unwrap();
        assert!(matches!(
            jl_project(&ps, Epsilon::from_log2_inv(1).unwrap(), JlConfig::default()),
            Err(Error::UnsupportedNorm(_))
        ));
    }

    #[test]
    fn frechet_examples() {
        let dm = DistanceMatrix::new(2, vec![0.0, 3.0, 3.0, 0.0]).unwrap();
        let ps = frechet_embed(&dm).unwrap();
        assert_eq!(ps.scale(), 3.0);
        assert_eq!(ps.coords(), &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(ps.distance(0, 1) * ps.scale(), 3.0);

        let mut e = vec![1.0; 16];
        for i in 0..4 {
            e[i * 4 + i] = 0.0;
        }
        let ps = frechet_embed(&DistanceMatrix::new(4, e).unwrap()).unwrap();
        let o = oracle_all_pairs(&ps);
        for x in 0..4 {
            for y in 0..4 {
                assert_eq!(o.get(x, y), if x == y { 0.0 } else { 1.0 });
            }
        }
    }
}
