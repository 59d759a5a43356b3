//! Seeded synthetic inputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::metric::DistanceMatrix;

/// Independent uniform coordinates in `[0, 1)`, row-major.
pub fn uniform(n: usize, d: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n * d).map(|_| rng.random::<f64>()).collect()
}

/// Unit-variance blobs around about `√n / 2` centers spread with standard
/// deviation 10.
pub fn gaussian_clusters(n: usize, d: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = ((n as f64).sqrt() / 2.0).ceil().max(1.0) as usize;
    let wide = Normal::new(0.0, 10.0).expect("valid deviation");
    let unit = Normal::new(0.0, 1.0).expect("valid deviation");
    let centers: Vec<f64> = (0..k * d).map(|_| wide.sample(&mut rng)).collect();
    let mut out = Vec::with_capacity(n * d);
    for _ in 0..n {
        let c = rng.random_range(0..k);
        out.extend((0..d).map(|j| centers[c * d + j] + unit.sample(&mut rng)));
    }
    out
}

/// One-dimensional points `0` and `2^{e_j}` with `e_1 = 0 < … < e_{n−1} = t`
/// evenly spaced, so consecutive gaps range from `1` to about `2^t` and
/// the spread is exactly `2^t`.
pub fn high_spread_line(n: usize, t: u32) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidInput("need at least 2 points".into()));
    }
    if t > 1000 {
        return Err(Error::InvalidInput(format!(
            "spread exponent {t} exceeds f64 range"
        )));
    }
    if n == 2 {
        return Ok(vec![0.0, 2f64.powi(t as i32)]);
    }
    if (t as usize) < n - 2 {
        return Err(Error::InvalidInput(format!(
            "spread exponent {t} too small for {n} distinct powers"
        )));
    }
    let mut out = vec![0.0];
    for j in 1..n {
        let e = ((j - 1) as f64 * t as f64 / (n - 2) as f64).round() as i32;
        out.push(2f64.powi(e));
    }
    Ok(out)
}

/// Shortest-path metric of a random connected graph: a random spanning
/// tree plus extra edges with probability `4/n`, weights uniform in
/// `[1, 10)`.
pub fn random_graph_metric(n: usize, seed: u64) -> Result<DistanceMatrix> {
    if n < 2 {
        return Err(Error::InvalidInput("need at least 2 points".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dist = vec![f64::INFINITY; n * n];
    for i in 0..n {
        dist[i * n + i] = 0.0;
    }
    let link = |a: usize, b: usize, w: f64, dist: &mut [f64]| {
        if w < dist[a * n + b] {
            dist[a * n + b] = w;
            dist[b * n + a] = w;
        }
    };
    for v in 1..n {
        let u = rng.random_range(0..v);
        let w = rng.random_range(1.0..10.0);
        link(u, v, w, &mut dist);
    }
    let p = (4.0 / n as f64).min(1.0);
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(p) {
                let w = rng.random_range(1.0..10.0);
                link(a, b, w, &mut dist);
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            let dik = dist[i * n + k];
            for j in 0..n {
                let via = dik + dist[k * n + j];
                if via < dist[i * n + j] {
                    dist[i * n + j] = via;
                }
            }
        }
    }
    // Floyd–Warshall keeps exact symmetry only up to summation order.
    for i in 0..n {
        for j in i + 1..n {
            let m = dist[i * n + j].min(dist[j * n + i]);
            dist[i * n + j] = m;
            dist[j * n + i] = m;
        }
    }
    DistanceMatrix::new(n, dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{normalize, Norm};

    #[test]
    fn deterministic() {
        assert_eq!(uniform(5, 3, 1), uniform(5, 3, 1));
        assert_ne!(uniform(5, 3, 1), uniform(5, 3, 2));
        assert_eq!(gaussian_clusters(20, 4, 9), gaussian_clusters(20, 4, 9));
    }

    #[test]
    fn two_uniform_points_normalize() {
        let ps = normalize(uniform(2, 3, 0), 3, Norm::L2).unwrap();
        assert_eq!(ps.distance(0, 1), 1.0);
    }

    #[test]
    fn high_spread() {
        let xs = high_spread_line(10, 512).unwrap();
        let ps = normalize(xs, 1, Norm::L2).unwrap();
        assert!(ps.spread() >= 2f64.powi(512));
        let xs = high_spread_line(10, 8).unwrap();
        assert_eq!(
            xs,
            vec![0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0]
        );
        assert!(high_spread_line(10, 7).is_err());
    }

    #[test]
    fn graph_metric_is_valid() {
        for seed in 0..5 {
            let dm = random_graph_metric(32, seed).unwrap();
            assert!(dm.triangle_violation(1e-9).is_none());
        }
    }
}
