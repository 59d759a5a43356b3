//! Compact sketches of finite metrics with (1 ± 4ε)-accurate distance
//! queries.
//!
//! A point set is normalized to minimum distance 1, organized into a
//! hierarchy of threshold-graph clusters, and every cluster center is
//! stored as a quantized displacement from an earlier, nearby center. The
//! resulting bitstream answers any pairwise query by comparing two
//! reconstructed surrogates.
//!
//! ```
//! use metric_sketch::{build_sketch, normalize, Estimator, Norm, SketchParams};
//!
//! let ps = normalize(vec![0.0, 0.0, 3.0, 4.0, 10.0, 0.0], 2, Norm::L2).unwrap();
//! let params = SketchParams::new(0.25).unwrap();
//! let built = build_sketch(&ps, &params).unwrap();
//! let bytes = built.sketch.to_bytes().unwrap();
//! let est = Estimator::from_bytes(&bytes).unwrap();
//! let d = est.estimate(0, 1).unwrap();
//! assert!((d - 5.0).abs() <= 5.0 * 4.0 * 0.25);
//! ```

pub mod annotate;
pub mod bits;
pub mod codec;
pub mod error;
pub mod estimate;
pub mod eval;
pub mod hst;
pub mod io;
pub mod lattice;
pub mod metric;
pub mod net;
pub mod par;
pub mod params;
pub mod reduce;
pub mod sketch;
pub mod synth;

pub use codec::{SizeReport, Sketch};
pub use error::{Error, ErrorClass, Result};
pub use estimate::{Estimator, Mode};
pub use metric::{
    lp_distance, normalize, normalize_with, oracle_all_pairs, oracle_all_pairs_with,
    DistanceMatrix, Norm, PointSet,
};
pub use par::Exec;
pub use params::{Epsilon, JlConfig, NetKind, SketchParams};
pub use sketch::{build_sketch, build_sketch_with, sketch_input, BuiltSketch};
