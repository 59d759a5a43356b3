//! Centers, spanning trees over sibling clusters, ingresses, and quantized
//! surrogates for a compressed hierarchy.

use num_bigint::BigInt;

use crate::error::{Error, Result};
use crate::hst::{Hierarchy, NodeId, SketchTree};
use crate::lattice::{self, Exact};
use crate::metric::{DistanceMatrix, PointSet};
use crate::net::round_to_grid;
use crate::params::{pow2, Epsilon};

/// Per-node annotations. Displacement codes are lattice multipliers; the
/// codec decides how to write them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Annotations {
    pub centers: Vec<usize>,
    /// `None` exactly at subtree roots.
    pub ingress: Vec<Option<NodeId>>,
    pub inv_delta: Vec<u64>,
    /// `None` exactly at subtree roots.
    pub codes: Vec<Option<Vec<i64>>>,
}

/// Spanning trees over the short children of each node.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TauForest {
    /// τ-predecessor of each node among its siblings (`None` for τ-roots).
    pub pred: Vec<Option<NodeId>>,
    /// Short children of each node in τ preorder.
    pub order: Vec<Vec<NodeId>>,
}

/// Build-side surrogate data, kept for verification only.
#[derive(Clone, Debug, PartialEq)]
pub struct SurrogateTable {
    /// Exact offset `S(v)` of `s*(v)` from `f(c(root))`, in units of
    /// `ε/d^{1/p}`.
    pub offsets: Vec<Vec<BigInt>>,
    /// `‖f(c(v)) − s*(v)‖_p`.
    pub center_error: Vec<f64>,
    /// `‖η*(v)‖_p` (zero at subtree roots).
    pub eta_norm: Vec<f64>,
    /// Offset unit `ε/d^{1/p}`.
    pub unit: f64,
}

/// `5 + ⌈Δ/2^ℓ⌉`, with a tiny downward nudge against rounding dust.
pub fn inv_delta(diameter: f64, level: u32) -> u64 {
    let ratio = diameter / pow2(level as i32);
    5 + (ratio - 1e-12).max(0.0).ceil() as u64
}

/// Net precision of a node: `δ` or, at subtree leaves, `δ·ε`.
pub fn net_delta_inv(inv: u64, subtree_leaf: bool, eps: Epsilon) -> u64 {
    if subtree_leaf {
        inv << eps.log2_inv()
    } else {
        inv
    }
}

/// Shift applied to a node's multipliers in offset units.
pub fn offset_shift(level: u32, subtree_leaf: bool, eps: Epsilon) -> u32 {
    if subtree_leaf {
        level
    } else {
        level + eps.log2_inv()
    }
}

fn clusters_touch(dm: &DistanceMatrix, a: &[usize], b: &[usize], thresh: f64) -> bool {
    a.iter().any(|&x| {
        let row = dm.row(x);
        b.iter().any(|&y| row[y] < thresh)
    })
}

/// The point of `from` closest to cluster `to`; ties by smallest label.
fn closest_point(dm: &DistanceMatrix, from: &[usize], to: &[usize]) -> usize {
    let mut best = (f64::INFINITY, usize::MAX);
    for &x in from {
        let row = dm.row(x);
        let dx = to.iter().map(|&y| row[y]).fold(f64::INFINITY, f64::min);
        if dx < best.0 {
            best = (dx, x);
        }
    }
    best.1
}

/// Centers and τ trees, bottom-up.
pub fn assign_centers(h: &Hierarchy, dm: &DistanceMatrix) -> Result<(Vec<usize>, TauForest)> {
    let t = &h.tree;
    let mut centers = vec![usize::MAX; t.len()];
    let mut tau = TauForest {
        pred: vec![None; t.len()],
        order: vec![Vec::new(); t.len()],
    };
    for v in (0..t.len()).rev() {
        if let Some(x) = t.point_at(v) {
            centers[v] = x;
            continue;
        }
        let kids: Vec<NodeId> = t.short_children(v).collect();
        if kids.is_empty() {
            centers[v] = centers[t.children(v)[0]];
            continue;
        }
        let thresh = pow2(t.level(v) as i32);
        let k = kids.len();
        let mut adj = vec![Vec::new(); k];
        for i in 0..k {
            for j in i + 1..k {
                let (a, b) = (h.clusters.members(kids[i]), h.clusters.members(kids[j]));
                if clusters_touch(dm, a, b, thresh) {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        // Children are already sorted by smallest member, so index order is
        // label order.
        let mut seen = vec![false; k];
        let mut parent = vec![usize::MAX; k];
        let mut queue = std::collections::VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    parent[j] = i;
                    queue.push_back(j);
                }
            }
        }
        if let Some(lost) = seen.iter().position(|s| !s) {
            return Err(Error::Internal(format!(
                "children of node {v} are not connected below 2^{} (child {})",
                t.level(v),
                kids[lost]
            )));
        }
        let mut tau_kids = vec![Vec::new(); k];
        for j in 1..k {
            tau_kids[parent[j]].push(j);
            tau.pred[kids[j]] = Some(kids[parent[j]]);
        }
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            tau.order[v].push(kids[i]);
            stack.extend(tau_kids[i].iter().rev());
        }
        centers[v] = centers[kids[0]];
    }
    Ok((centers, tau))
}

/// Ingress of every non-subtree-root node.
pub fn assign_ingresses(
    h: &Hierarchy,
    tau: &TauForest,
    dm: &DistanceMatrix,
) -> Vec<Option<NodeId>> {
    let t = &h.tree;
    let mut ingress = vec![None; t.len()];
    for v in 0..t.len() {
        if t.is_subtree_root(v) {
            continue;
        }
        let Some(pred) = tau.pred[v] else {
            ingress[v] = t.parent(v);
            continue;
        };
        let y = closest_point(dm, h.clusters.members(pred), h.clusters.members(v));
        let mut path = Vec::new();
        let mut w = t.leaf(y);
        while w != pred {
            path.push(w);
            w = t.parent(w).expect("leaf(y) lies below pred");
        }
        let mut cur = pred;
        for &next in path.iter().rev() {
            if t.edge(next).is_long() {
                break;
            }
            cur = next;
        }
        ingress[v] = Some(cur);
    }
    ingress
}

/// Subtree nodes in τ-DFS order, starting at `root`.
pub fn tau_dfs_order(t: &SketchTree, tau: &TauForest, root: NodeId) -> Vec<NodeId> {
    let mut out = Vec::new();
    let mut stack = vec![root];
    while let Some(v) = stack.pop() {
        out.push(v);
        stack.extend(tau.order[v].iter().rev());
    }
    debug_assert!(out.iter().skip(1).all(|&v| !t.is_subtree_root(v)));
    out
}

/// Checks that every node of `order` comes after its ingress.
pub fn check_order(order: &[NodeId], ingress: &[Option<NodeId>]) -> Result<()> {
    let mut pos = std::collections::HashMap::with_capacity(order.len());
    for (i, &v) in order.iter().enumerate() {
        pos.insert(v, i);
    }
    for (i, &v) in order.iter().enumerate().skip(1) {
        let inv =
            ingress[v].ok_or_else(|| Error::Internal(format!("node {v} lacks an ingress")))?;
        match pos.get(&inv) {
            Some(&p) if p < i => {}
            _ => {
                return Err(Error::Internal(format!(
                    "node {v} is visited before its ingress {inv}"
                )))
            }
        }
    }
    Ok(())
}

/// Fills displacement codes subtree by subtree and returns the build-side
/// surrogate table.
pub fn compute_surrogates(
    h: &Hierarchy,
    tau: &TauForest,
    centers: &[usize],
    ingress: &[Option<NodeId>],
    ps: &PointSet,
    eps: Epsilon,
) -> Result<(Vec<u64>, Vec<Option<Vec<i64>>>, SurrogateTable)> {
    let t = &h.tree;
    let d = ps.dim();
    let norm = ps.norm();
    let unit = eps.value() / norm.root_dim(d);
    let inv: Vec<u64> = (0..t.len())
        .map(|v| inv_delta(h.clusters.diameter(v), t.level(v)))
        .collect();
    let mut codes = vec![None; t.len()];
    let mut offsets: Vec<Vec<BigInt>> = vec![Vec::new(); t.len()];
    let mut center_error = vec![0.0; t.len()];
    let mut eta_norm = vec![0.0; t.len()];
    for root in t.subtree_roots() {
        let order = tau_dfs_order(t, tau, root);
        check_order(&order, ingress)?;
        let origin = ps.point(centers[root]);
        offsets[root] = vec![BigInt::from(0); d];
        for &v in &order[1..] {
            let from = ingress[v].expect("checked above");
            let level = t.level(v);
            let leaf = t.is_subtree_leaf(v);
            let base: Vec<f64> = lattice::to_f64(&offsets[from]);
            let scale = inv[v] as f64 * pow2(level as i32);
            let eta: Vec<f64> = ps
                .point(centers[v])
                .iter()
                .zip(origin)
                .zip(&base)
                .map(|((c, o), s)| ((c - o) - s * unit) / scale)
                .collect();
            let m = net_delta_inv(inv[v], leaf, eps);
            let len = norm.norm(&eta);
            eta_norm[v] = len;
            if !(len <= 1.0 + 0.5 / m as f64) {
                return Err(Error::NormOverflow {
                    node: v,
                    norm: len,
                    limit: 1.0 + 0.5 / m as f64,
                });
            }
            let z = round_to_grid(&eta, m, norm)?;
            let shift = offset_shift(level, leaf, eps);
            offsets[v] =
                lattice::step(&offsets[from], &z, shift).expect("big integers do not overflow");
            codes[v] = Some(z);
        }
        for &v in &order {
            let s = lattice::to_f64(&offsets[v]);
            let err: Vec<f64> = ps
                .point(centers[v])
                .iter()
                .zip(origin)
                .zip(&s)
                .map(|((c, o), s)| (c - o) - s * unit)
                .collect();
            center_error[v] = norm.norm(&err);
        }
    }
    Ok((
        inv,
        codes,
        SurrogateTable {
            offsets,
            center_error,
            eta_norm,
            unit,
        },
    ))
}

/// Runs the full annotation pipeline.
pub fn annotate(
    h: &Hierarchy,
    ps: &PointSet,
    dm: &DistanceMatrix,
    eps: Epsilon,
) -> Result<(Annotations, TauForest, SurrogateTable)> {
    let (centers, tau) = assign_centers(h, dm)?;
    let ingress = assign_ingresses(h, &tau, dm);
    let (inv_delta, codes, table) = compute_surrogates(h, &tau, &centers, &ingress, ps, eps)?;
    Ok((
        Annotations {
            centers,
            ingress,
            inv_delta,
            codes,
        },
        tau,
        table,
    ))
}

/// Replays offsets from stored codes alone, one subtree at a time.
pub fn replay_offsets<T: Exact>(
    t: &SketchTree,
    ann: &Annotations,
    d: usize,
    eps: Epsilon,
) -> Result<Vec<Vec<T>>> {
    let mut out: Vec<Option<Vec<T>>> = vec![None; t.len()];
    for v in 0..t.len() {
        resolve(t, ann, d, eps, v, &mut out)?;
    }
    Ok(out.into_iter().map(|o| o.expect("resolved")).collect())
}

fn resolve<T: Exact>(
    t: &SketchTree,
    ann: &Annotations,
    d: usize,
    eps: Epsilon,
    v: NodeId,
    out: &mut [Option<Vec<T>>],
) -> Result<()> {
    let mut chain = Vec::new();
    let mut w = v;
    while out[w].is_none() {
        if chain.len() > t.len() {
            return Err(Error::Decode("ingress chain contains a cycle".into()));
        }
        chain.push(w);
        match ann.ingress[w] {
            Some(i) => w = i,
            None => {
                out[w] = Some(vec![T::zero(); d]);
                chain.pop();
                break;
            }
        }
    }
    for &u in chain.iter().rev() {
        let base = out[ann.ingress[u].expect("non-root")]
            .as_ref()
            .expect("replayed in order");
        let z = ann.codes[u]
            .as_ref()
            .ok_or_else(|| Error::Decode(format!("node {u} lacks a displacement")))?;
        let shift = offset_shift(t.level(u), t.is_subtree_leaf(u), eps);
        let next = lattice::step(base, z, shift)
            .ok_or_else(|| Error::Decode(format!("offset overflow at node {u}")))?;
        out[u] = Some(next);
    }
    Ok(())
}
