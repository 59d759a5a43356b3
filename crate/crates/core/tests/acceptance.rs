//! Acceptance driver: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines always reach the output.

use std::process::ExitCode;
use std::time::Instant;

use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use metric_sketch::eval::evaluate;
use metric_sketch::hst::node_count_bound;
use metric_sketch::io::Input;
use metric_sketch::net::BallNet;
use metric_sketch::synth::{gaussian_clusters, high_spread_line, random_graph_metric, uniform};
use metric_sketch::{
    build_sketch, normalize, sketch::sketch_metric, BuiltSketch, Epsilon, Estimator, Exec,
    JlConfig, Mode, Norm, SketchParams,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn pass(detail: impl Into<String>) -> Outcome {
    Outcome {
        pass: true,
        detail: detail.into(),
    }
}

fn fail(detail: impl Into<String>) -> Outcome {
    Outcome {
        pass: false,
        detail: detail.into(),
    }
}

struct Instance {
    label: String,
    eps: Epsilon,
    built: BuiltSketch,
    bytes: Vec<u8>,
}

/// p ∈ {1, 2, ∞}, n ∈ {50, 200}, d ∈ {2, 10}, ε ∈ {1/2, 1/4, 1/16}, 20
/// seeds each; even seeds uniform, odd seeds clustered.
fn corpus() -> impl Iterator<Item = (String, Vec<f64>, usize, Norm, Epsilon)> {
    let norms = [Norm::L1, Norm::L2, Norm::Infinity];
    let mut out = Vec::new();
    for norm in norms {
        for n in [50, 200] {
            for d in [2, 10] {
                for t in [1, 2, 4] {
                    for seed in 0..20u64 {
                        out.push((norm, n, d, t, seed));
                    }
                }
            }
        }
    }
    out.into_iter().map(|(norm, n, d, t, seed)| {
        let s = seed * 1000 + n as u64 * 10 + d as u64;
        let coords = if seed % 2 == 0 {
            uniform(n, d, s)
        } else {
            gaussian_clusters(n, d, s)
        };
        let label = format!("p={norm} n={n} d={d} eps=2^-{t} seed={seed}");
        (label, coords, d, norm, Epsilon::from_log2_inv(t).unwrap())
    })
}

fn build_corpus() -> Result<Vec<Instance>, String> {
    corpus()
        .map(|(label, coords, d, norm, eps)| {
            let ps = normalize(coords, d, norm).map_err(|e| format!("{label}: {e}"))?;
            let params = SketchParams::new(eps.value()).unwrap().with_landmarks(true);
            let built = build_sketch(&ps, &params).map_err(|e| format!("{label}: {e}"))?;
            let bytes = built
                .sketch
                .to_bytes()
                .map_err(|e| format!("{label}: {e}"))?;
            Ok(Instance {
                label,
                eps,
                built,
                bytes,
            })
        })
        .collect()
}

fn rel_err(est: f64, truth: f64) -> f64 {
    (est - truth).abs() / truth
}

fn distortion(corpus: &[Instance]) -> Outcome {
    let mut worst = (0.0f64, String::new());
    for inst in corpus {
        let est = match Estimator::from_bytes(&inst.bytes) {
            Ok(e) => e,
            Err(e) => return fail(format!("{}: {e}", inst.label)),
        };
        let all = est.all_pairs(Exec::Parallel).unwrap();
        let pts = &inst.built.points;
        let n = pts.len();
        let bound = 4.0 * inst.eps.value();
        let mut idx = 0;
        for x in 0..n {
            for y in x + 1..n {
                let truth = inst.built.distances.get(x, y) * pts.scale();
                let r = rel_err(all[idx], truth);
                if r > bound {
                    return fail(format!("{} pair ({x},{y}): {r} > {bound}", inst.label));
                }
                if r / bound > worst.0 {
                    worst = (r / bound, inst.label.clone());
                }
                idx += 1;
            }
        }
    }
    pass(format!(
        "{} instances, worst error {:.3} of the bound ({})",
        corpus.len(),
        worst.0,
        worst.1
    ))
}

fn tree_size(corpus: &[Instance]) -> Outcome {
    let mut worst = 0.0f64;
    for inst in corpus {
        let nodes = inst.built.hierarchy.tree.len();
        let bound = node_count_bound(inst.built.points.len(), inst.eps);
        if nodes > bound {
            return fail(format!("{}: {nodes} nodes > {bound}", inst.label));
        }
        worst = worst.max(nodes as f64 / bound as f64);
    }
    pass(format!("max nodes/bound {worst:.3}"))
}

fn surrogate_bounds(corpus: &[Instance]) -> Outcome {
    const SLACK: f64 = 1.0 + 1e-9;
    let mut worst = (0.0f64, 0.0f64);
    for inst in corpus {
        let t = &inst.built.hierarchy.tree;
        let s = &inst.built.surrogates;
        let eps = inst.eps.value();
        for v in 0..t.len() {
            let scale = 2f64.powi(t.level(v) as i32);
            let err = s.center_error[v];
            if err > scale * SLACK {
                return fail(format!("{} node {v}: {err} > 2^{}", inst.label, t.level(v)));
            }
            worst.0 = worst.0.max(err / scale);
            if t.is_subtree_leaf(v) {
                if err > eps * scale * SLACK {
                    return fail(format!(
                        "{} subtree leaf {v}: {err} > eps·2^{}",
                        inst.label,
                        t.level(v)
                    ));
                }
                worst.1 = worst.1.max(err / (eps * scale));
            }
        }
    }
    pass(format!(
        "max error/2^l {:.3}, at subtree leaves max error/(eps·2^l) {:.3}",
        worst.0, worst.1
    ))
}

fn ingress_bounds(corpus: &[Instance]) -> Outcome {
    let mut worst = 0.0f64;
    for inst in corpus {
        let h = &inst.built.hierarchy;
        let t = &h.tree;
        let ann = &inst.built.sketch.ann;
        let dm = &inst.built.distances;
        for v in 0..t.len() {
            if t.is_subtree_root(v) {
                continue;
            }
            let Some(u) = ann.ingress[v] else {
                return fail(format!("{} node {v} has no ingress", inst.label));
            };
            if t.level(u) > t.level(v) + 1 {
                return fail(format!(
                    "{} node {v}: ingress level {} > {} + 1",
                    inst.label,
                    t.level(u),
                    t.level(v)
                ));
            }
            let gap = dm.get(ann.centers[v], ann.centers[u]);
            let bound = 3.0 * 2f64.powi(t.level(v) as i32) + h.clusters.diameter(v);
            if gap > bound {
                return fail(format!("{} node {v}: {gap} > {bound}", inst.label));
            }
            worst = worst.max(gap / bound);
        }
    }
    pass(format!("max distance/bound {worst:.3}"))
}

fn grid_net() -> Outcome {
    let mut checked = 0usize;
    for dim in 1..=3 {
        for m in [2u64, 4, 8] {
            for (rn, rd) in [(1, 1), (m + 1, m)] {
                let net = BallNet::new(dim, m, rn, rd).unwrap();
                let label = format!("d={dim} delta=1/{m} r={rn}/{rd}");
                let pts = net.enumerate();
                let cap = net.capacity();
                if BigUint::from(pts.len()) > cap {
                    return fail(format!("{label}: {} points > capacity {cap}", pts.len()));
                }
                let mut ranks = Vec::with_capacity(pts.len());
                for z in &pts {
                    let r = match net.rank(z) {
                        Ok(r) => r,
                        Err(e) => return fail(format!("{label}: {e}")),
                    };
                    if net.unrank(&r).ok().as_ref() != Some(z) {
                        return fail(format!("{label}: unrank(rank({z:?})) differs"));
                    }
                    ranks.push(r);
                    // Segment sums along every slice the point passes through.
                    let mut rem = rn as u128 * m as u128;
                    rem = rem * rem * dim as u128;
                    for (j, &zj) in z.iter().enumerate() {
                        if !net.segments_fit(dim - j, rem) {
                            return fail(format!("{label}: segments overflow at {z:?} depth {j}"));
                        }
                        rem -= (rd as u128 * rd as u128) * (zj as i128 * zj as i128) as u128;
                    }
                }
                let before = ranks.len();
                ranks.sort();
                ranks.dedup();
                if ranks.len() != before {
                    return fail(format!("{label}: rank is not injective"));
                }
                checked += before;
            }
        }
    }
    pass(format!("{checked} lattice points over 18 nets"))
}

fn codec() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut header_trials = 0;
    let mut payload_trials = 0;
    let mut blobs = Vec::new();
    for i in 0..100u64 {
        let n = rng.random_range(2..60);
        let d = rng.random_range(1..6);
        let norm = [Norm::L1, Norm::L2, Norm::Infinity][i as usize % 3];
        let eps = Epsilon::from_log2_inv(rng.random_range(1..6)).unwrap();
        let mut params = SketchParams::new(eps.value())
            .unwrap()
            .with_landmarks(i % 2 == 0);
        if norm == Norm::L2 && d <= 3 && i % 4 == 1 {
            params = params.with_net(metric_sketch::NetKind::RankedBall);
        }
        let ps = normalize(uniform(n, d, i), d, norm).unwrap();
        let built = build_sketch(&ps, &params).unwrap();
        let (bytes, size) = built.sketch.serialize().unwrap();
        let again = match metric_sketch::Sketch::from_bytes(&bytes).and_then(|s| s.to_bytes()) {
            Ok(b) => b,
            Err(e) => return fail(format!("blob {i}: {e}")),
        };
        if again != bytes {
            return fail(format!("blob {i}: reserialization differs"));
        }
        blobs.push((bytes, size.header_bytes as usize - 4));
    }
    // Every header byte of a few blobs, each with several replacement values.
    for (bytes, header_len) in blobs.iter().take(10) {
        for pos in 0..*header_len {
            for _ in 0..4 {
                let mut bad = bytes.clone();
                let flip = rng.random_range(1..=255u8);
                bad[pos] ^= flip;
                header_trials += 1;
                if metric_sketch::Sketch::from_bytes(&bad).is_ok() {
                    return fail(format!("header byte {pos} ^ {flip:#x} decoded silently"));
                }
            }
        }
    }
    for t in 0..200 {
        let (bytes, header_len) = &blobs[t % blobs.len()];
        let payload_bits = (bytes.len() - 4 - header_len) * 8;
        let bit = rng.random_range(0..payload_bits);
        let mut bad = bytes.clone();
        bad[header_len + bit / 8] ^= 1 << (bit % 8);
        payload_trials += 1;
        if metric_sketch::Sketch::from_bytes(&bad).is_ok() {
            return fail(format!(
                "payload bit {bit} of blob {} decoded silently",
                t % blobs.len()
            ));
        }
    }
    pass(format!(
        "100 byte-exact roundtrips, {header_trials} header and {payload_trials} payload corruptions rejected"
    ))
}

fn bits_per_point(coords: Vec<f64>, d: usize, norm: Norm, t: u32) -> (f64, f64) {
    let ps = normalize(coords, d, norm).unwrap();
    let params = SketchParams::new(Epsilon::from_log2_inv(t).unwrap().value()).unwrap();
    let built = build_sketch(&ps, &params).unwrap();
    let (_, size) = built.sketch.serialize().unwrap();
    (size.total_bits() as f64 / ps.len() as f64, ps.spread())
}

fn size_scaling() -> (Outcome, Outcome) {
    let (n, d) = (200, 10);
    let coords = gaussian_clusters(n, d, 7);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut spread = 0.0;
    for t in 1..=6 {
        let (b, s) = bits_per_point(coords.clone(), d, Norm::L2, t);
        xs.push(t as f64);
        ys.push(b);
        spread = s;
    }
    let r2 = r_squared(&xs, &ys);
    let series = ys
        .iter()
        .map(|b| format!("{b:.1}"))
        .collect::<Vec<_>>()
        .join(" ");
    let a = if spread > 65536.0 {
        fail(format!("instance spread {spread} exceeds 2^16"))
    } else if r2 >= 0.95 {
        pass(format!("R² = {r2:.4}, bits/point {series}"))
    } else {
        fail(format!("R² = {r2:.4} < 0.95, bits/point {series}"))
    };

    let mut bpp = Vec::new();
    for t in [8u32, 64, 512] {
        let (b, _) = bits_per_point(high_spread_line(10, t).unwrap(), 1, Norm::L2, 2);
        bpp.push(b);
    }
    let growth = bpp.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - bpp.iter().cloned().fold(f64::INFINITY, f64::min);
    let detail = format!(
        "n=10 eps=1/4 bits/point at spread 2^8, 2^64, 2^512: {:.1}, {:.1}, {:.1} (growth {growth:.1})",
        bpp[0], bpp[1], bpp[2]
    );
    let b = if growth <= 8.0 {
        pass(detail)
    } else {
        fail(detail)
    };
    (a, b)
}

fn r_squared(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    sxy * sxy / (sxx * syy)
}

fn euclidean_end_to_end() -> Outcome {
    let (n, d) = (500, 1000);
    let input = Input::Points {
        coords: gaussian_clusters(n, d, 8),
        d,
        norm: Norm::L2,
    };
    let base = SketchParams::new(0.25).unwrap();
    let jl = base.with_jl(Some(JlConfig {
        constant: 4.0,
        seed: 2024,
    }));
    let (with, _) = match evaluate(&input, &jl, Exec::Parallel) {
        Ok(r) => r,
        Err(e) => return fail(e.to_string()),
    };
    let (without, _) = match evaluate(&input, &base, Exec::Parallel) {
        Ok(r) => r,
        Err(e) => return fail(e.to_string()),
    };
    let Some(e2e) = with.end_to_end else {
        return fail("projection did not reduce the dimension");
    };
    let ratio = without.size.total_bits() as f64 / with.size.total_bits() as f64;
    let detail = format!(
        "d' = {}, {:.2}% of pairs within {:.4} (max {:.4}), size ratio {ratio:.2}x ({} vs {} bits)",
        with.d,
        100.0 * e2e.fraction_within,
        e2e.budget,
        e2e.max_rel_error,
        without.size.total_bits(),
        with.size.total_bits()
    );
    if e2e.fraction_within >= 0.99 && ratio >= 5.0 && with.guarantee_holds() {
        pass(detail)
    } else {
        fail(detail)
    }
}

fn general_metrics() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for n in [32, 64] {
        for seed in 0..10 {
            let dm = random_graph_metric(n, seed).unwrap();
            let built = sketch_metric(&dm, &SketchParams::new(0.25).unwrap()).unwrap();
            let est = Estimator::from_bytes(&built.sketch.to_bytes().unwrap()).unwrap();
            for x in 0..n {
                for y in x + 1..n {
                    let r = rel_err(est.estimate(x, y).unwrap(), dm.get(x, y));
                    if r > 1.0 {
                        return fail(format!("n={n} seed={seed} pair ({x},{y}): {r} > 1"));
                    }
                    worst = worst.max(r);
                }
            }
            count += 1;
        }
    }
    pass(format!(
        "{count} graph metrics, max relative error {worst:.4}"
    ))
}

fn landmarks(corpus: &[Instance]) -> Outcome {
    let mut max_steps = 0usize;
    let mut k_seen = 0u32;
    for inst in corpus {
        let plain = Estimator::from_bytes_with(&inst.bytes, Mode::Precomputed).unwrap();
        let marks = match Estimator::from_bytes_with(&inst.bytes, Mode::Landmarks) {
            Ok(e) => e,
            Err(e) => return fail(format!("{}: {e}", inst.label)),
        };
        let k = marks.k() as usize;
        let n = plain.n();
        for x in 0..n {
            for y in x + 1..n {
                let a = plain.estimate(x, y).unwrap();
                let tr = marks.trace(x, y).unwrap();
                if a.to_bits() != tr.estimate.to_bits() {
                    return fail(format!(
                        "{} pair ({x},{y}): {a} vs {}",
                        inst.label, tr.estimate
                    ));
                }
                let steps = tr.steps_x.max(tr.steps_y);
                if steps > k {
                    return fail(format!(
                        "{} pair ({x},{y}): {steps} steps > K = {k}",
                        inst.label
                    ));
                }
                if steps > max_steps {
                    max_steps = steps;
                    k_seen = k as u32;
                }
            }
        }
    }
    pass(format!(
        "bit-identical on {} instances, max chain {max_steps} (K = {k_seen})",
        corpus.len()
    ))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    match build_corpus() {
        Ok(corpus) => {
            let built = start.elapsed().as_secs_f64();
            let t = Instant::now();
            let mut r = distortion(&corpus);
            r.detail += &format!(", {:.1}s", built + t.elapsed().as_secs_f64());
            results.push(("1 distortion <= 4eps", r));
            results.push(("2 tree size", tree_size(&corpus)));
            results.push(("3 surrogate bounds", surrogate_bounds(&corpus)));
            results.push(("4 ingress and level bounds", ingress_bounds(&corpus)));
            results.push(("10 landmark equivalence", landmarks(&corpus)));
        }
        Err(e) => {
            for name in [
                "1 distortion <= 4eps",
                "2 tree size",
                "3 surrogate bounds",
                "4 ingress and level bounds",
                "10 landmark equivalence",
            ] {
                results.push((name, fail(format!("corpus build failed: {e}"))));
            }
        }
    }
    results.push(("5 grid net", grid_net()));
    results.push(("6 codec", codec()));
    let (a, b) = size_scaling();
    results.push(("7a size vs log(1/eps)", a));
    results.push(("7b size vs log log spread", b));
    results.push(("8 euclidean end to end", euclidean_end_to_end()));
    results.push(("9 general metrics", general_metrics()));
    results.sort_by_key(|(name, _)| {
        let num: String = name.chars().take_while(|c| c.is_ascii_digit()).collect();
        (num.parse::<u32>().unwrap_or(0), name.to_string())
    });
    let mut ok = true;
    for (name, r) in &results {
        println!(
            "criterion {name}: {} ({})",
            if r.pass { "PASS" } else { "FAIL" },
            r.detail
        );
        ok &= r.pass;
    }
    println!(
        "acceptance finished in {:.1}s",
        start.elapsed().as_secs_f64()
    );
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
