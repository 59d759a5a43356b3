//! Query side: shifted surrogates replayed from a decoded sketch.

use std::collections::HashMap;
use std::sync::OnceLock;

use num_bigint::BigInt;

use crate::annotate::{offset_shift, replay_offsets, Annotations};
use crate::codec::{LandmarkTable, Sketch};
use crate::error::{Error, Result};
use crate::hst::{NodeId, SketchTree};
use crate::lattice::{self, Exact};
use crate::metric::Norm;
use crate::par::{self, Exec};
use crate::params::Epsilon;

/// `K = max(1, ⌈log₂(2·Φ·d^{1/p}/ε)⌉)`, the bit budget of one offset.
pub fn k_parameter(spread: f64, eps: Epsilon, d: usize, norm: Norm) -> u32 {
    let x = 2.0 * spread * norm.root_dim(d) / eps.value();
    (x.log2().ceil().max(1.0)) as u32
}

/// Greedy landmark choice on a forest given by parent links: repeatedly
/// take the deepest remaining node (ties by index), climb `k` steps or
/// until a root, declare that node a landmark and drop its descendants.
/// Roots may be declared but are not returned.
pub fn select_landmarks(parent: &[Option<usize>], k: usize) -> Vec<usize> {
    let n = parent.len();
    let mut children = vec![Vec::new(); n];
    let mut depth = vec![usize::MAX; n];
    for (v, p) in parent.iter().enumerate() {
        if let Some(p) = *p {
            children[p].push(v);
        }
    }
    let mut stack: Vec<usize> = (0..n).filter(|&v| parent[v].is_none()).collect();
    for &r in &stack {
        depth[r] = 0;
    }
    while let Some(v) = stack.pop() {
        for &c in &children[v] {
            depth[c] = depth[v] + 1;
            stack.push(c);
        }
    }
    let mut by_depth: Vec<usize> = (0..n).collect();
    by_depth.sort_by_key(|&v| (std::cmp::Reverse(depth[v]), v));
    let mut removed = vec![false; n];
    let mut marks = Vec::new();
    for v in by_depth {
        if removed[v] {
            continue;
        }
        let mut top = v;
        for _ in 0..k {
            match parent[top] {
                Some(p) => top = p,
                None => break,
            }
        }
        if parent[top].is_some() {
            marks.push(top);
        }
        let mut stack = vec![top];
        while let Some(u) = stack.pop() {
            if !std::mem::replace(&mut removed[u], true) {
                stack.extend(&children[u]);
            }
        }
    }
    marks.sort_unstable();
    marks
}

/// Landmarks for every subtree of a sketch, with their exact offsets.
pub fn landmark_table(
    tree: &SketchTree,
    ann: &Annotations,
    offsets: &[Vec<BigInt>],
    k: u32,
) -> LandmarkTable {
    let part = tree.subtree_decomposition();
    let mut members: HashMap<NodeId, Vec<NodeId>> = HashMap::new();
    for v in 0..tree.len() {
        members.entry(part[v]).or_default().push(v);
    }
    let mut entries = Vec::new();
    for (_, nodes) in members {
        let local: HashMap<NodeId, usize> =
            nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let parent: Vec<Option<usize>> = nodes
            .iter()
            .map(|&v| ann.ingress[v].map(|i| local[&i]))
            .collect();
        for i in select_landmarks(&parent, k as usize) {
            entries.push((nodes[i], offsets[nodes[i]].clone()));
        }
    }
    entries.sort_by_key(|e| e.0);
    LandmarkTable { entries }
}

/// How shifted surrogates are obtained at query time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    /// Replay every node once at load.
    #[default]
    Precomputed,
    /// Replay on first use, caching per node.
    Lazy,
    /// Replay from the nearest stored landmark on every query.
    Landmarks,
}

struct Store<T: Exact> {
    full: Vec<Vec<T>>,
    lazy: Vec<OnceLock<Vec<T>>>,
    marks: HashMap<NodeId, Vec<T>>,
}

enum Engine {
    Narrow(Store<i128>),
    Wide(Store<BigInt>),
}

/// Answers distance queries from a decoded sketch.
pub struct Estimator {
    sketch: Sketch,
    mode: Mode,
    unit: f64,
    k: u32,
    engine: Engine,
}

/// One query with the ingress steps replayed for each endpoint.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Trace {
    pub estimate: f64,
    pub steps_x: usize,
    pub steps_y: usize,
}

impl Estimator {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Estimator::new(Sketch::from_bytes(bytes)?, Mode::default())
    }

    pub fn from_bytes_with(bytes: &[u8], mode: Mode) -> Result<Self> {
        Estimator::new(Sketch::from_bytes(bytes)?, mode)
    }

    pub fn new(sketch: Sketch, mode: Mode) -> Result<Self> {
        let h = &sketch.header;
        let d = h.d as usize;
        let k = k_parameter(h.spread, h.epsilon, d, h.norm);
        let unit = h.epsilon.value() / h.norm.root_dim(d);
        if mode == Mode::Landmarks && sketch.landmarks.is_none() {
            return Err(Error::InvalidInput("sketch has no landmark table".into()));
        }
        let engine = if lattice::needs_wide(k as u64 + 24) {
            Engine::Wide(Self::store(&sketch, mode)?)
        } else {
            Engine::Narrow(Self::store(&sketch, mode)?)
        };
        Ok(Estimator {
            sketch,
            mode,
            unit,
            k,
            engine,
        })
    }

    fn store<T: Exact>(sketch: &Sketch, mode: Mode) -> Result<Store<T>> {
        let t = &sketch.tree;
        let d = sketch.dim();
        let eps = sketch.header.epsilon;
        let mut store = Store {
            full: Vec::new(),
            lazy: Vec::new(),
            marks: HashMap::new(),
        };
        match mode {
            Mode::Precomputed => {
                store.full = replay_offsets(t, &sketch.ann, d, eps)
                    .map_err(|e| Error::format(0, e.to_string()))?;
            }
            Mode::Lazy => store.lazy = (0..t.len()).map(|_| OnceLock::new()).collect(),
            Mode::Landmarks => {
                let table = sketch.landmarks.as_ref().expect("checked by caller");
                for (v, coords) in &table.entries {
                    let row = coords
                        .iter()
                        .map(|c| T::from_big(c))
                        .collect::<Option<Vec<T>>>()
                        .ok_or_else(|| Error::format(0, "landmark offset overflows"))?;
                    store.marks.insert(*v, row);
                }
            }
        }
        Ok(store)
    }

    pub fn sketch(&self) -> &Sketch {
        &self.sketch
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn n(&self) -> usize {
        self.sketch.n()
    }

    /// The snapped accuracy parameter; estimates are within `1 ± 4ε`.
    pub fn epsilon(&self) -> Epsilon {
        self.sketch.header.epsilon
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// The node whose surrogate stands in for `x` below `u`.
    pub fn representative(&self, x: usize, u: NodeId) -> NodeId {
        let t = &self.sketch.tree;
        let mut rep = t.leaf(x);
        let mut w = rep;
        while w != u {
            let p = t.parent(w).expect("u is an ancestor");
            if t.edge(w).is_long() {
                rep = p;
            }
            w = p;
        }
        rep
    }

    fn check_label(&self, x: usize) -> Result<()> {
        if x >= self.n() {
            Err(Error::UnknownLabel(x))
        } else {
            Ok(())
        }
    }

    /// Estimated distance in input units.
    pub fn estimate(&self, x: usize, y: usize) -> Result<f64> {
        Ok(self.trace(x, y)?.estimate)
    }

    /// Estimate plus replay statistics.
    pub fn trace(&self, x: usize, y: usize) -> Result<Trace> {
        self.check_label(x)?;
        self.check_label(y)?;
        if x == y {
            return Ok(Trace {
                estimate: 0.0,
                steps_x: 0,
                steps_y: 0,
            });
        }
        let t = &self.sketch.tree;
        let u = t.lca(t.leaf(x), t.leaf(y));
        let (vx, vy) = (self.representative(x, u), self.representative(y, u));
        let norm = self.sketch.header.norm;
        let (dist, sx, sy) = match &self.engine {
            Engine::Narrow(s) => self.compare(s, vx, vy, norm)?,
            Engine::Wide(s) => self.compare(s, vx, vy, norm)?,
        };
        Ok(Trace {
            estimate: self.sketch.header.scale * self.unit * dist,
            steps_x: sx,
            steps_y: sy,
        })
    }

    fn compare<T: Exact>(
        &self,
        s: &Store<T>,
        a: NodeId,
        b: NodeId,
        norm: Norm,
    ) -> Result<(f64, usize, usize)> {
        match self.mode {
            Mode::Precomputed => Ok((lattice::diff_norm(&s.full[a], &s.full[b], norm), 0, 0)),
            Mode::Lazy => {
                let (ra, rb) = (self.lazy_get(s, a)?, self.lazy_get(s, b)?);
                Ok((lattice::diff_norm(ra, rb, norm), 0, 0))
            }
            Mode::Landmarks => {
                let (ra, sa) = self.replay_from_landmark(s, a)?;
                let (rb, sb) = self.replay_from_landmark(s, b)?;
                Ok((lattice::diff_norm(&ra, &rb, norm), sa, sb))
            }
        }
    }

    fn advance<T: Exact>(&self, base: &[T], u: NodeId) -> Result<Vec<T>> {
        let t = &self.sketch.tree;
        let z = self.sketch.ann.codes[u]
            .as_ref()
            .ok_or_else(|| Error::format(0, format!("node {u} lacks a displacement")))?;
        let shift = offset_shift(t.level(u), t.is_subtree_leaf(u), self.epsilon());
        lattice::step(base, z, shift)
            .ok_or_else(|| Error::format(0, format!("offset overflow at node {u}")))
    }

    /// Ingress chain from `v` back to the first node satisfying `known`.
    fn chain(&self, v: NodeId, known: impl Fn(NodeId) -> bool) -> Result<(Vec<NodeId>, NodeId)> {
        let mut chain = Vec::new();
        let mut w = v;
        while !known(w) {
            match self.sketch.ann.ingress[w] {
                Some(i) => {
                    chain.push(w);
                    w = i;
                }
                None => break,
            }
            if chain.len() > self.sketch.tree.len() {
                return Err(Error::format(0, "ingress chain contains a cycle"));
            }
        }
        Ok((chain, w))
    }

    fn lazy_get<'s, T: Exact>(&self, s: &'s Store<T>, v: NodeId) -> Result<&'s Vec<T>> {
        if let Some(r) = s.lazy[v].get() {
            return Ok(r);
        }
        let (chain, base) = self.chain(v, |w| s.lazy[w].get().is_some())?;
        let d = self.sketch.dim();
        let mut cur = s.lazy[base].get_or_init(|| vec![T::zero(); d]).clone();
        for &u in chain.iter().rev() {
            cur = self.advance(&cur, u)?;
            let _ = s.lazy[u].set(cur.clone());
        }
        Ok(s.lazy[v].get().expect("filled above"))
    }

    fn replay_from_landmark<T: Exact>(&self, s: &Store<T>, v: NodeId) -> Result<(Vec<T>, usize)> {
        let (chain, base) = self.chain(v, |w| s.marks.contains_key(&w))?;
        let mut cur = s
            .marks
            .get(&base)
            .cloned()
            .unwrap_or_else(|| vec![T::zero(); self.sketch.dim()]);
        for &u in chain.iter().rev() {
            cur = self.advance(&cur, u)?;
        }
        Ok((cur, chain.len()))
    }

    /// Shifted surrogate of a node in offset units, as big integers.
    pub fn offsets(&self, v: NodeId) -> Result<Vec<BigInt>> {
        fn big<T: Exact>(r: &[T]) -> Vec<BigInt> {
            r.iter().map(Exact::to_big).collect()
        }
        Ok(match &self.engine {
            Engine::Narrow(s) => big(&self.resolve(s, v)?),
            Engine::Wide(s) => big(&self.resolve(s, v)?),
        })
    }

    fn resolve<T: Exact>(&self, s: &Store<T>, v: NodeId) -> Result<Vec<T>> {
        match self.mode {
            Mode::Precomputed => Ok(s.full[v].clone()),
            Mode::Lazy => self.lazy_get(s, v).cloned(),
            Mode::Landmarks => Ok(self.replay_from_landmark(s, v)?.0),
        }
    }

    /// Estimates for a batch of pairs, in order.
    pub fn estimate_many(&self, pairs: &[(usize, usize)], exec: Exec) -> Result<Vec<f64>> {
        par::map_range(pairs.len(), exec, |i| self.estimate(pairs[i].0, pairs[i].1))
            .into_iter()
            .collect()
    }

    /// All `n(n−1)/2` estimates, row-major over `x < y`.
    pub fn all_pairs(&self, exec: Exec) -> Result<Vec<f64>> {
        let n = self.n();
        let rows = par::map_range(n, exec, |x| {
            (x + 1..n)
                .map(|y| self.estimate(x, y))
                .collect::<Result<Vec<f64>>>()
        });
        let mut out = Vec::with_capacity(n * (n - 1) / 2);
        for r in rows {
            out.extend(r?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_examples() {
        let half = Epsilon::from_log2_inv(1).unwrap();
        assert_eq!(k_parameter(2.0, half, 1, Norm::L2), 3);
        assert_eq!(k_parameter(1.0, half, 1, Norm::L2), 2);
        assert_eq!(k_parameter(0.25, half, 1, Norm::Infinity), 1);
        let q = Epsilon::from_log2_inv(4).unwrap();
        assert!(k_parameter(100.0, q, 10, Norm::L2) >= k_parameter(100.0, q, 5, Norm::L2));
        assert!(k_parameter(100.0, q, 5, Norm::L2) >= k_parameter(100.0, half, 5, Norm::L2));
        assert!(k_parameter(1000.0, q, 5, Norm::L2) >= k_parameter(100.0, q, 5, Norm::L2));
    }

    fn path(len: usize) -> Vec<Option<usize>> {
        (0..len).map(|i| i.checked_sub(1)).collect()
    }

    #[test]
    fn landmarks_on_paths() {
        for k in 1..6 {
            // The root is declared too but never stored.
            assert_eq!(select_landmarks(&path(2 * k + 1), k), vec![k]);
            assert!(select_landmarks(&path(k), k).is_empty());
        }
    }

    fn max_chain(parent: &[Option<usize>], marks: &[usize]) -> usize {
        (0..parent.len())
            .map(|v| {
                let mut w = v;
                let mut steps = 0;
                while !marks.contains(&w) {
                    match parent[w] {
                        Some(p) => {
                            w = p;
                            steps += 1;
                        }
                        None => break,
                    }
                }
                steps
            })
            .max()
            .unwrap_or(0)
    }

    #[test]
    fn landmarks_bound_chains() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let n = rng.random_range(1..200);
            let parent: Vec<Option<usize>> = (0..n)
                .map(|i| {
                    if i == 0 {
                        None
                    } else {
                        Some(rng.random_range(0..i))
                    }
                })
                .collect();
            for k in [1, 2, 3, 7] {
                let marks = select_landmarks(&parent, k);
                assert!(max_chain(&parent, &marks) <= k);
                assert!(marks.len() <= n.div_ceil(k));
            }
        }
    }
}
