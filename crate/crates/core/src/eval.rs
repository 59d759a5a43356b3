//! Oracle comparison of a sketch against exact distances.

use std::fmt;
use std::time::Instant;

use crate::codec::SizeReport;
use crate::error::Result;
use crate::estimate::Estimator;
use crate::io::Input;
use crate::metric::{normalize_with, Norm};
use crate::par::Exec;
use crate::params::SketchParams;
use crate::sketch::{build_sketch_with, sketch_metric};

/// Error against the unprojected input.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EndToEnd {
    pub max_rel_error: f64,
    pub mean_rel_error: f64,
    /// `(1 + ε)(1 + 4ε) − 1`.
    pub budget: f64,
    pub fraction_within: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub n: usize,
    pub d: usize,
    pub source_dim: usize,
    pub norm: Norm,
    pub epsilon: f64,
    pub spread: f64,
    pub size: SizeReport,
    pub bits_per_point: f64,
    pub max_rel_error: f64,
    pub mean_rel_error: f64,
    pub worst_pair: (usize, usize),
    pub end_to_end: Option<EndToEnd>,
    pub build_ms: f64,
    pub query_ms: f64,
}

impl EvalReport {
    /// Whether every estimate lies within `1 ± 4ε` of the sketched
    /// distances.
    pub fn guarantee_holds(&self) -> bool {
        self.max_rel_error <= 4.0 * self.epsilon
    }

    /// Line-oriented `key=value` form.
    pub fn key_values(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push('=');
            out.push_str(&v);
            out.push('\n');
        };
        kv("n", self.n.to_string());
        kv("d", self.d.to_string());
        kv("source_d", self.source_dim.to_string());
        kv("p", self.norm.to_string());
        kv("epsilon", self.epsilon.to_string());
        kv("spread", format!("{:e}", self.spread));
        kv("total_bits", self.size.total_bits().to_string());
        kv("payload_bits", self.size.payload.to_string());
        kv("bits_per_point", format!("{:.3}", self.bits_per_point));
        for (name, bits) in self.size.sections() {
            kv(&format!("bits_{name}"), bits.to_string());
        }
        kv("max_rel_error", format!("{:.6e}", self.max_rel_error));
        kv("mean_rel_error", format!("{:.6e}", self.mean_rel_error));
        kv("bound", (4.0 * self.epsilon).to_string());
        kv(
            "worst_pair",
            format!("{},{}", self.worst_pair.0, self.worst_pair.1),
        );
        if let Some(e) = &self.end_to_end {
            kv("e2e_max_rel_error", format!("{:.6e}", e.max_rel_error));
            kv("e2e_mean_rel_error", format!("{:.6e}", e.mean_rel_error));
            kv("e2e_budget", e.budget.to_string());
            kv("e2e_fraction_within", format!("{:.6}", e.fraction_within));
        }
        kv("build_ms", format!("{:.1}", self.build_ms));
        kv("query_ms", format!("{:.1}", self.query_ms));
        out
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} points, d = {} (from {}), p = {}, eps = {}, spread = {:.4e}",
            self.n, self.d, self.source_dim, self.norm, self.epsilon, self.spread
        )?;
        writeln!(
            f,
            "size: {} bits ({:.1} bits/point)",
            self.size.total_bits(),
            self.bits_per_point
        )?;
        writeln!(
            f,
            "relative error: max {:.4e} (pair {},{}), mean {:.4e}, bound {}",
            self.max_rel_error,
            self.worst_pair.0,
            self.worst_pair.1,
            self.mean_rel_error,
            4.0 * self.epsilon
        )?;
        if let Some(e) = &self.end_to_end {
            writeln!(
                f,
                "end to end: max {:.4e}, mean {:.4e}, {:.2}% within {:.4}",
                e.max_rel_error,
                e.mean_rel_error,
                100.0 * e.fraction_within,
                e.budget
            )?;
        }
        write!(
            f,
            "build {:.1} ms, queries {:.1} ms",
            self.build_ms, self.query_ms
        )
    }
}

/// Builds a sketch of `input`, decodes it, and compares every pair with
/// the exact distances. Returns the report and the sketch bytes.
pub fn evaluate(input: &Input, params: &SketchParams, exec: Exec) -> Result<(EvalReport, Vec<u8>)> {
    let start = Instant::now();
    let (built, raw) = match input {
        Input::Points { coords, d, norm } => {
            let ps = normalize_with(coords.clone(), *d, *norm, exec)?;
            (build_sketch_with(&ps, params, exec)?, Some(ps))
        }
        Input::Matrix(dm) => (sketch_metric(dm, params)?, None),
    };
    let (bytes, size) = built.sketch.serialize()?;
    let build_ms = start.elapsed().as_secs_f64() * 1e3;

    let start = Instant::now();
    let est = Estimator::from_bytes(&bytes)?;
    let estimates = est.all_pairs(exec)?;
    let query_ms = start.elapsed().as_secs_f64() * 1e3;

    let n = built.points.len();
    let scale = built.points.scale();
    let (mut max, mut sum, mut worst) = (0.0f64, 0.0, (0, 1));
    let mut idx = 0;
    for x in 0..n {
        for y in x + 1..n {
            let truth = built.distances.get(x, y) * scale;
            let err = (estimates[idx] - truth).abs() / truth;
            if err > max {
                max = err;
                worst = (x, y);
            }
            sum += err;
            idx += 1;
        }
    }
    let pairs = (n * (n - 1) / 2) as f64;
    let eps = params.epsilon.value();
    let projected = built.sketch.header.jl_source_dim != 0;
    let end_to_end = raw.filter(|_| projected).map(|ps| {
        let budget = (1.0 + eps) * (1.0 + 4.0 * eps) - 1.0;
        let (mut max, mut sum, mut ok) = (0.0f64, 0.0, 0usize);
        let mut idx = 0;
        for x in 0..n {
            for y in x + 1..n {
                let truth = ps.distance(x, y) * ps.scale();
                let err = (estimates[idx] - truth).abs() / truth;
                max = max.max(err);
                sum += err;
                ok += (err <= budget) as usize;
                idx += 1;
            }
        }
        EndToEnd {
            max_rel_error: max,
            mean_rel_error: sum / pairs,
            budget,
            fraction_within: ok as f64 / pairs,
        }
    });
    let report = EvalReport {
        n,
        d: built.points.dim(),
        source_dim: match input {
            Input::Points { d, .. } => *d,
            Input::Matrix(dm) => dm.len(),
        },
        norm: built.points.norm(),
        epsilon: eps,
        spread: built.points.spread(),
        size,
        bits_per_point: size.total_bits() as f64 / n as f64,
        max_rel_error: max,
        mean_rel_error: sum / pairs,
        worst_pair: worst,
        end_to_end,
        build_ms,
        query_ms,
    };
    Ok((report, bytes))
}
