//! End-to-end sketch construction.

use crate::annotate::{annotate, SurrogateTable, TauForest};
use crate::codec::{Header, Sketch};
use crate::error::{Error, Result};
use crate::estimate::{k_parameter, landmark_table};
use crate::hst::{build_hst_from_matrix, compress, Hierarchy};
use crate::io::Input;
use crate::metric::{normalize_with, oracle_all_pairs_with, DistanceMatrix, Norm, PointSet};
use crate::par::Exec;
use crate::params::{NetKind, SketchParams};
use crate::reduce::{frechet_embed, jl_project_with};

/// A sketch plus the build-side data needed to verify it.
#[derive(Clone, Debug)]
pub struct BuiltSketch {
    pub sketch: Sketch,
    /// The point set actually sketched (after projection, if any).
    pub points: PointSet,
    /// Normalized distances of `points`.
    pub distances: DistanceMatrix,
    pub hierarchy: Hierarchy,
    pub tau: TauForest,
    pub surrogates: SurrogateTable,
}

/// Sketches a normalized point set, projecting Euclidean inputs first when
/// `params.jl` is set.
pub fn build_sketch(ps: &PointSet, params: &SketchParams) -> Result<BuiltSketch> {
    build_sketch_with(ps, params, Exec::default())
}

pub fn build_sketch_with(ps: &PointSet, params: &SketchParams, exec: Exec) -> Result<BuiltSketch> {
    let eps = params.epsilon;
    let (points, jl_seed, jl_source_dim) = match params.jl {
        Some(cfg) if ps.norm() == Norm::L2 => {
            let out = jl_project_with(ps, eps, cfg, exec)?;
            if out.dim() < ps.dim() {
                (out, cfg.seed, ps.dim() as u64)
            } else {
                (out, 0, 0)
            }
        }
        _ => (ps.clone(), 0, 0),
    };
    if params.net == NetKind::RankedBall && points.norm() != Norm::L2 {
        return Err(Error::UnsupportedNorm(format!(
            "the ranked net needs p = 2, got p = {}",
            points.norm()
        )));
    }
    let distances = oracle_all_pairs_with(&points, exec);
    let hierarchy = compress(&build_hst_from_matrix(&distances), eps);
    let (ann, tau, surrogates) = annotate(&hierarchy, &points, &distances, eps)?;
    let header = Header {
        norm: points.norm(),
        n: points.len() as u64,
        d: points.dim() as u64,
        epsilon: eps,
        scale: points.scale(),
        spread: points.spread(),
        net: params.net,
        landmarks: params.landmarks,
        jl_seed,
        jl_source_dim,
    };
    let landmarks = params.landmarks.then(|| {
        let k = k_parameter(points.spread(), eps, points.dim(), points.norm());
        landmark_table(&hierarchy.tree, &ann, &surrogates.offsets, k)
    });
    let sketch = Sketch {
        header,
        tree: hierarchy.tree.clone(),
        ann,
        landmarks,
    };
    Ok(BuiltSketch {
        sketch,
        points,
        distances,
        hierarchy,
        tau,
        surrogates,
    })
}

/// Sketches a general finite metric through its ℓ∞ distance-vector
/// embedding.
pub fn sketch_metric(dm: &DistanceMatrix, params: &SketchParams) -> Result<BuiltSketch> {
    let ps = frechet_embed(dm)?;
    build_sketch(&ps, &params.with_jl(None))
}

/// Sketches raw input: point sets are normalized first, distance matrices
/// go through [`sketch_metric`].
pub fn sketch_input(input: &Input, params: &SketchParams, exec: Exec) -> Result<BuiltSketch> {
    match input {
        Input::Points { coords, d, norm } => build_sketch_with(
            &normalize_with(coords.clone(), *d, *norm, exec)?,
            params,
            exec,
        ),
        Input::Matrix(dm) => sketch_metric(dm, params),
    }
}
