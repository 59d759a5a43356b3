//! The 2-HST over threshold graphs and its long-edge compression.
//!
//! Level-`i` clusters are the connected components of the graph joining
//! points at distance `< 2^i`. They are read off a single minimum spanning
//! tree: an MST edge of weight `w` first appears at level `⌊log₂ w⌋ + 1`.

use crate::error::{Error, Result};
use crate::metric::{oracle_all_pairs, DistanceMatrix, PointSet};
use crate::params::{pow2, Epsilon};

pub type NodeId = usize;

/// Kind of the edge from a node up to its parent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    Short,
    /// A compressed path; `gap = ℓ(top) − ℓ(bottom) ≥ 2`.
    Long {
        gap: u32,
    },
}

impl EdgeKind {
    /// Level difference spanned by the edge.
    pub fn gap(&self) -> u32 {
        match *self {
            EdgeKind::Short => 1,
            EdgeKind::Long { gap } => gap,
        }
    }

    pub fn is_long(&self) -> bool {
        matches!(self, EdgeKind::Long { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub level: u32,
    pub parent: Option<NodeId>,
    /// Edge to the parent; `Short` for the root.
    pub edge: EdgeKind,
    pub children: Vec<NodeId>,
}

/// A rooted tree whose nodes are numbered in preorder (root = 0) and whose
/// leaves are in bijection with point labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SketchTree {
    nodes: Vec<Node>,
    leaf_of: Vec<NodeId>,
    point_at: Vec<Option<usize>>,
}

impl SketchTree {
    /// Assembles a tree from preorder-numbered nodes and the point label of
    /// every leaf. Checks structural consistency but not level semantics.
    pub fn from_nodes(nodes: Vec<Node>, leaf_points: &[(NodeId, usize)]) -> Result<Self> {
        let n_nodes = nodes.len();
        if n_nodes == 0 || nodes[0].parent.is_some() {
            return Err(Error::Internal("tree must have a root at index 0".into()));
        }
        for (v, node) in nodes.iter().enumerate() {
            for &c in &node.children {
                if c <= v || c >= n_nodes || nodes[c].parent != Some(v) {
                    return Err(Error::Internal(format!("bad child link {v} -> {c}")));
                }
            }
        }
        let n = leaf_points.len();
        let mut leaf_of = vec![usize::MAX; n];
        let mut point_at = vec![None; n_nodes];
        for &(v, x) in leaf_points {
            if x >= n || leaf_of[x] != usize::MAX || !nodes[v].children.is_empty() {
                return Err(Error::Internal(format!("bad leaf assignment {v} -> {x}")));
            }
            leaf_of[x] = v;
            point_at[v] = Some(x);
        }
        if nodes.iter().filter(|nd| nd.children.is_empty()).count() != n {
            return Err(Error::Internal(
                "leaf count differs from point count".into(),
            ));
        }
        Ok(SketchTree {
            nodes,
            leaf_of,
            point_at,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn n_points(&self) -> usize {
        self.leaf_of.len()
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, v: NodeId) -> &Node {
        &self.nodes[v]
    }

    pub fn level(&self, v: NodeId) -> u32 {
        self.nodes[v].level
    }

    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        self.nodes[v].parent
    }

    pub fn children(&self, v: NodeId) -> &[NodeId] {
        &self.nodes[v].children
    }

    pub fn edge(&self, v: NodeId) -> EdgeKind {
        self.nodes[v].edge
    }

    /// The leaf holding point `x`.
    pub fn leaf(&self, x: usize) -> NodeId {
        self.leaf_of[x]
    }

    /// The point label stored at a leaf.
    pub fn point_at(&self, v: NodeId) -> Option<usize> {
        self.point_at[v]
    }

    pub fn is_leaf(&self, v: NodeId) -> bool {
        self.nodes[v].children.is_empty()
    }

    pub fn is_subtree_root(&self, v: NodeId) -> bool {
        v == 0 || self.nodes[v].edge.is_long()
    }

    /// A node with no short-edge children.
    pub fn is_subtree_leaf(&self, v: NodeId) -> bool {
        self.nodes[v]
            .children
            .iter()
            .all(|&c| self.nodes[c].edge.is_long())
    }

    /// Children reached over short edges.
    pub fn short_children(&self, v: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes[v]
            .children
            .iter()
            .copied()
            .filter(|&c| !self.nodes[c].edge.is_long())
    }

    pub fn subtree_root_of(&self, mut v: NodeId) -> NodeId {
        while !self.is_subtree_root(v) {
            v = self.nodes[v].parent.expect("non-root has a parent");
        }
        v
    }

    pub fn long_edge_count(&self) -> usize {
        self.nodes.iter().filter(|nd| nd.edge.is_long()).count()
    }

    /// Subtree roots in preorder.
    pub fn subtree_roots(&self) -> Vec<NodeId> {
        (0..self.len())
            .filter(|&v| self.is_subtree_root(v))
            .collect()
    }

    /// Subtree leaves in preorder; the position in this list is the
    /// global subtree-leaf index.
    pub fn subtree_leaves(&self) -> Vec<NodeId> {
        (0..self.len())
            .filter(|&v| self.is_subtree_leaf(v))
            .collect()
    }

    /// Lowest common ancestor by parent walk.
    pub fn lca(&self, mut a: NodeId, mut b: NodeId) -> NodeId {
        while a != b {
            let (la, lb) = (self.level(a), self.level(b));
            if la <= lb {
                a = self.nodes[a].parent.expect("walk stays below the root");
            }
            if lb <= la {
                b = self.nodes[b].parent.expect("walk stays below the root");
            }
        }
        a
    }

    /// Level recomputed from the structure alone (leaves at 0, each edge
    /// adds its gap), or `None` if children disagree.
    pub fn structural_levels(&self) -> Option<Vec<u32>> {
        let mut lv = vec![0u32; self.len()];
        for v in (0..self.len()).rev() {
            let mut level = None;
            for &c in &self.nodes[v].children {
                let l = lv[c].checked_add(self.nodes[c].edge.gap())?;
                if level.is_some_and(|x| x != l) {
                    return None;
                }
                level = Some(l);
            }
            lv[v] = level.unwrap_or(0);
        }
        Some(lv)
    }

    /// Partition of the nodes into maximal short-edge-connected parts;
    /// entry `v` is the root of the part containing `v`.
    pub fn subtree_decomposition(&self) -> Vec<NodeId> {
        let mut part = vec![0; self.len()];
        for v in 0..self.len() {
            part[v] = if self.is_subtree_root(v) {
                v
            } else {
                part[self.nodes[v].parent.expect("non-root")]
            };
        }
        part
    }
}

/// Members and exact diameter of every node's cluster. Chains of
/// degree-1 nodes share one cluster entry.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterIndex {
    node_cluster: Vec<usize>,
    members: Vec<Vec<usize>>,
    diameter: Vec<f64>,
}

impl ClusterIndex {
    /// Sorted member labels of `C(v)`.
    pub fn members(&self, v: NodeId) -> &[usize] {
        &self.members[self.node_cluster[v]]
    }

    pub fn diameter(&self, v: NodeId) -> f64 {
        self.diameter[self.node_cluster[v]]
    }

    pub fn min_label(&self, v: NodeId) -> usize {
        self.members(v)[0]
    }
}

/// A tree together with the clusters of its nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Hierarchy {
    pub tree: SketchTree,
    pub clusters: ClusterIndex,
}

/// The level at which an MST edge of weight `w ≥ 1` joins its endpoints:
/// the smallest `i` with `w < 2^i`.
pub(crate) fn merge_level(w: f64) -> u32 {
    debug_assert!(w >= 1.0 && w.is_finite());
    let e = ((w.to_bits() >> 52) & 0x7ff) as i64 - 1023;
    (e + 1).max(1) as u32
}

/// Dense Prim. Returns `(u, v, w)` edges.
pub(crate) fn minimum_spanning_tree(dm: &DistanceMatrix) -> Vec<(usize, usize, f64)> {
    let n = dm.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut via = vec![0usize; n];
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    in_tree[0] = true;
    for (y, b) in best.iter_mut().enumerate().skip(1) {
        *b = dm.get(0, y);
    }
    for _ in 1..n {
        let mut next = usize::MAX;
        for y in 0..n {
            if !in_tree[y] && (next == usize::MAX || best[y] < best[next]) {
                next = y;
            }
        }
        in_tree[next] = true;
        edges.push((via[next], next, best[next]));
        let row = dm.row(next);
        for y in 0..n {
            if !in_tree[y] && row[y] < best[y] {
                best[y] = row[y];
                via[y] = next;
            }
        }
    }
    edges
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

struct RawNode {
    level: u32,
    children: Vec<usize>,
    edge: EdgeKind,
    cluster: usize,
}

/// Renumbers raw nodes in preorder from `root`, visiting children by
/// smallest member label.
fn assemble(raw: &[RawNode], root: usize, members: &[Vec<usize>]) -> (SketchTree, Vec<usize>) {
    let mut nodes = Vec::with_capacity(raw.len());
    let mut node_cluster = Vec::with_capacity(raw.len());
    let mut leaves = Vec::new();
    let mut stack = vec![(root, None::<NodeId>)];
    while let Some((r, parent)) = stack.pop() {
        let id = nodes.len();
        if let Some(p) = parent {
            let p: &mut Node = &mut nodes[p];
            p.children.push(id);
        }
        nodes.push(Node {
            level: raw[r].level,
            parent,
            edge: if parent.is_some() {
                raw[r].edge
            } else {
                EdgeKind::Short
            },
            children: Vec::new(),
        });
        node_cluster.push(raw[r].cluster);
        if raw[r].children.is_empty() {
            leaves.push((id, members[raw[r].cluster][0]));
        }
        let mut kids = raw[r].children.clone();
        kids.sort_by_key(|&c| members[raw[c].cluster][0]);
        for &c in kids.iter().rev() {
            stack.push((c, Some(id)));
        }
    }
    let tree = SketchTree::from_nodes(nodes, &leaves).expect("assembled tree is consistent");
    (tree, node_cluster)
}

/// Builds the uncompressed hierarchy of a point set.
pub fn build_hst(ps: &PointSet) -> Hierarchy {
    build_hst_from_matrix(&oracle_all_pairs(ps))
}

/// Builds the uncompressed hierarchy from normalized pairwise distances
/// (minimum off-diagonal entry ≥ 1).
pub fn build_hst_from_matrix(dm: &DistanceMatrix) -> Hierarchy {
    let n = dm.len();
    let mut edges: Vec<(u32, usize, usize)> = minimum_spanning_tree(dm)
        .into_iter()
        .map(|(u, v, w)| (merge_level(w), u, v))
        .collect();
    edges.sort_unstable();
    let top = edges.last().map_or(1, |e| e.0);

    let mut raw: Vec<RawNode> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut diameter: Vec<f64> = Vec::new();
    // One active node per current component, keyed by a representative point.
    let mut active: Vec<(usize, usize)> = Vec::with_capacity(n);
    for x in 0..n {
        members.push(vec![x]);
        diameter.push(0.0);
        raw.push(RawNode {
            level: 0,
            children: Vec::new(),
            edge: EdgeKind::Short,
            cluster: x,
        });
        active.push((x, x));
    }
    let mut uf = UnionFind::new(n);
    let mut next_edge = 0;
    for level in 1..=top {
        while next_edge < edges.len() && edges[next_edge].0 == level {
            let (_, u, v) = edges[next_edge];
            uf.union(u, v);
            next_edge += 1;
        }
        let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
        let mut slot = std::collections::HashMap::new();
        for &(rep, node) in &active {
            let r = uf.find(rep);
            let g = *slot.entry(r).or_insert_with(|| {
                groups.push((r, Vec::new()));
                groups.len() - 1
            });
            groups[g].1.push(node);
        }
        active.clear();
        for (r, kids) in groups {
            let cluster = if kids.len() == 1 {
                raw[kids[0]].cluster
            } else {
                let parts: Vec<&[usize]> =
                    kids.iter().map(|&k| &members[raw[k].cluster][..]).collect();
                let mut diam = kids
                    .iter()
                    .map(|&k| diameter[raw[k].cluster])
                    .fold(0.0f64, f64::max);
                for (i, a) in parts.iter().enumerate() {
                    for b in &parts[i + 1..] {
                        for &x in *a {
                            let row = dm.row(x);
                            for &y in *b {
                                diam = diam.max(row[y]);
                            }
                        }
                    }
                }
                let mut merged: Vec<usize> = parts.concat();
                merged.sort_unstable();
                members.push(merged);
                diameter.push(diam);
                members.len() - 1
            };
            raw.push(RawNode {
                level,
                children: kids,
                edge: EdgeKind::Short,
                cluster,
            });
            active.push((r, raw.len() - 1));
        }
    }
    debug_assert_eq!(active.len(), 1);
    let root = active[0].1;
    let (tree, node_cluster) = assemble(&raw, root, &members);
    Hierarchy {
        tree,
        clusters: ClusterIndex {
            node_cluster,
            members,
            diameter,
        },
    }
}

/// Whether the 1-path ending at a node of level `bottom` with diameter
/// `diam`, topped by a node of level `bottom + gap`, becomes a long edge.
pub(crate) fn should_compress(diam: f64, bottom: u32, gap: u32, eps: Epsilon) -> bool {
    if gap < 2 {
        return false;
    }
    diam == 0.0 || diam < pow2(bottom as i32 + gap as i32 - eps.log2_inv() as i32)
}

/// Replaces qualifying maximal chains of degree-1 nodes by long edges.
/// Surviving nodes keep their levels and clusters. Idempotent.
pub fn compress(h: &Hierarchy, eps: Epsilon) -> Hierarchy {
    let t = &h.tree;
    let cl = &h.clusters;
    let mut raw: Vec<RawNode> = Vec::with_capacity(t.len());
    // (source node, raw parent index, edge kind)
    let mut stack: Vec<(NodeId, Option<usize>, EdgeKind)> = vec![(t.root(), None, EdgeKind::Short)];
    while let Some((v, parent, edge)) = stack.pop() {
        let id = raw.len();
        raw.push(RawNode {
            level: t.level(v),
            children: Vec::new(),
            edge,
            cluster: cl.node_cluster[v],
        });
        if let Some(p) = parent {
            raw[p].children.push(id);
        }
        let parent_is_chain = t.children(v).len() == 1;
        for &c in t.children(v).iter().rev() {
            if !parent_is_chain && t.children(c).len() == 1 {
                // `c` tops a maximal chain; find its bottom.
                let mut b = c;
                while t.children(b).len() == 1 {
                    b = t.children(b)[0];
                }
                let gap = t.level(c) - t.level(b);
                if should_compress(cl.diameter(b), t.level(b), gap, eps) {
                    let top = raw.len();
                    raw.push(RawNode {
                        level: t.level(c),
                        children: Vec::new(),
                        edge: t.edge(c),
                        cluster: cl.node_cluster[c],
                    });
                    raw[id].children.push(top);
                    stack.push((b, Some(top), EdgeKind::Long { gap }));
                    continue;
                }
            }
            stack.push((c, Some(id), t.edge(c)));
        }
    }
    let (tree, node_cluster) = assemble(&raw, 0, &cl.members);
    Hierarchy {
        tree,
        clusters: ClusterIndex {
            node_cluster,
            members: cl.members.clone(),
            diameter: cl.diameter.clone(),
        },
    }
}

/// Upper bound on the compressed node count, `2n(3 + log₂(1/ε))`.
pub fn node_count_bound(n: usize, eps: Epsilon) -> usize {
    2 * n * (3 + eps.log2_inv() as usize)
}
