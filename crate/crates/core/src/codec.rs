//! The `MCSK` sketch format.
//!
//! A little-endian header followed by an MSB-first payload and a CRC-32 of
//! everything before it. Payload sections, in order:
//!
//! 1. tree shape as balanced parentheses in preorder (1 = enter, 0 = leave);
//! 2. for every non-root node, 1 bit short/long, then gamma(gap) if long;
//! 3. for every node: center label, ingress (non-subtree-roots only: 0 for
//!    the parent, or 1 and an index into the preorder list of subtree
//!    leaves), gamma(inv_delta − 4), and the displacement code
//!    (non-subtree-roots only);
//! 4. optional landmark table: per subtree, gamma(count + 1), then each
//!    landmark's node index and `d` two's-complement offsets of `K + 2`
//!    bits.

use std::collections::hash_map::Entry;
use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::One;

use crate::annotate::{net_delta_inv, Annotations};
use crate::bits::{gamma_len, width_for, BitReader, BitWriter};
use crate::error::{Error, Result};
use crate::estimate::k_parameter;
use crate::hst::{EdgeKind, Node, NodeId, SketchTree};
use crate::metric::Norm;
use crate::net::{BallNet, GridCodec};
use crate::params::{Epsilon, NetKind};

pub const MAGIC: &[u8; 4] = b"MCSK";
pub const VERSION: u16 = 1;

const FLAG_RANKED: u8 = 1;
const FLAG_LANDMARKS: u8 = 2;

/// Norm codes shared by the binary formats.
pub(crate) fn write_norm(out: &mut Vec<u8>, norm: Norm) {
    match norm {
        Norm::L1 => out.push(1),
        Norm::L2 => out.push(2),
        Norm::Infinity => out.push(255),
        Norm::Lp { num, den } => {
            out.push(0);
            out.extend_from_slice(&num.to_le_bytes());
            out.extend_from_slice(&den.to_le_bytes());
        }
    }
}

pub(crate) fn read_norm(c: &mut Cursor<'_>) -> Result<Norm> {
    let at = c.pos;
    match c.u8()? {
        1 => Ok(Norm::L1),
        2 => Ok(Norm::L2),
        255 => Ok(Norm::Infinity),
        0 => {
            let (num, den) = (c.u32()?, c.u32()?);
            match Norm::rational(num, den) {
                Ok(nm @ Norm::Lp { num: n2, den: d2 })
                    if (n2, d2) == (num, den) && nm != Norm::L1 && nm != Norm::L2 =>
                {
                    Ok(nm)
                }
                _ => Err(Error::format(
                    at as u64 * 8,
                    format!("bad norm exponent {num}/{den}"),
                )),
            }
        }
        other => Err(Error::format(
            at as u64 * 8,
            format!("unknown norm code {other}"),
        )),
    }
}

/// Little-endian byte cursor with format errors at bit offsets.
pub(crate) struct Cursor<'a> {
    pub bytes: &'a [u8],
    pub pos: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Cursor { bytes, pos: 0 }
    }

    pub fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < k {
            return Err(Error::format(self.pos as u64 * 8, "truncated header"));
        }
        let s = &self.bytes[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("2 bytes"),
        ))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Header {
    pub norm: Norm,
    pub n: u64,
    pub d: u64,
    pub epsilon: Epsilon,
    /// Multiplier from normalized to input units.
    pub scale: f64,
    pub spread: f64,
    pub net: NetKind,
    pub landmarks: bool,
    pub jl_seed: u64,
    /// Input dimension before random projection, or 0.
    pub jl_source_dim: u64,
}

/// Explicit shifted surrogates of landmark nodes, sorted by node.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LandmarkTable {
    pub entries: Vec<(NodeId, Vec<BigInt>)>,
}

/// The decoded sketch model.
#[derive(Clone, Debug, PartialEq)]
pub struct Sketch {
    pub header: Header,
    pub tree: SketchTree,
    pub ann: Annotations,
    pub landmarks: Option<LandmarkTable>,
}

/// Payload bits per section.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SizeReport {
    pub header_bytes: u64,
    pub shape: u64,
    pub gaps: u64,
    pub centers: u64,
    pub ingresses: u64,
    pub precisions: u64,
    pub displacements: u64,
    pub landmarks: u64,
    pub payload: u64,
}

impl SizeReport {
    pub fn total_bits(&self) -> u64 {
        self.header_bytes * 8 + self.payload
    }

    pub fn sections(&self) -> [(&'static str, u64); 7] {
        [
            ("shape", self.shape),
            ("gaps", self.gaps),
            ("centers", self.centers),
            ("ingresses", self.ingresses),
            ("precisions", self.precisions),
            ("displacements", self.displacements),
            ("landmarks", self.landmarks),
        ]
    }
}

enum Coder {
    Grid(HashMap<u64, GridCodec>),
    Ranked(HashMap<u64, BallNet>),
}

impl Coder {
    fn new(kind: NetKind) -> Self {
        match kind {
            NetKind::UniformGrid => Coder::Grid(HashMap::new()),
            NetKind::RankedBall => Coder::Ranked(HashMap::new()),
        }
    }

    fn encode(&mut self, z: &[i64], m: u64, norm: Norm, w: &mut BitWriter) -> Result<()> {
        match self {
            Coder::Grid(cache) => cache
                .entry(m)
                .or_insert_with(|| GridCodec::new(z.len(), m, norm))
                .encode(z, w),
            Coder::Ranked(cache) => {
                let net = match cache.entry(m) {
                    Entry::Occupied(e) => e.into_mut(),
                    Entry::Vacant(e) => e.insert(BallNet::for_precision(z.len(), m)?),
                };
                net.encode(z, w)
            }
        }
    }

    fn decode(&mut self, d: usize, m: u64, norm: Norm, r: &mut BitReader<'_>) -> Result<Vec<i64>> {
        match self {
            Coder::Grid(cache) => cache
                .entry(m)
                .or_insert_with(|| GridCodec::new(d, m, norm))
                .decode(r),
            Coder::Ranked(cache) => {
                let net = match cache.entry(m) {
                    Entry::Occupied(e) => e.into_mut(),
                    Entry::Vacant(e) => {
                        e.insert(BallNet::for_precision(d, m).map_err(|e| r.error(e.to_string()))?)
                    }
                };
                net.decode(r)
            }
        }
    }
}

/// Largest admissible `inv_delta`; keeps net precisions in 64 bits.
const MAX_INV_DELTA: u64 = 1 << 20;

fn landmark_width(h: &Header) -> u64 {
    k_parameter(h.spread, h.epsilon, h.d as usize, h.norm) as u64 + 2
}

impl Sketch {
    pub fn n(&self) -> usize {
        self.header.n as usize
    }

    pub fn dim(&self) -> usize {
        self.header.d as usize
    }

    fn validate_header(&self) -> Result<()> {
        let h = &self.header;
        if h.n < 2 || h.d == 0 {
            return Err(Error::Encode("sketch needs n >= 2 and d >= 1".into()));
        }
        if h.n != self.tree.n_points() as u64 {
            return Err(Error::Encode("header n differs from the tree".into()));
        }
        if h.net == NetKind::RankedBall && h.norm != Norm::L2 {
            return Err(Error::UnsupportedNorm("ranked net needs p = 2".into()));
        }
        if h.landmarks != self.landmarks.is_some() {
            return Err(Error::Encode("landmark flag and table disagree".into()));
        }
        Ok(())
    }

    fn write_header(&self, payload_bits: u64) -> Vec<u8> {
        let h = &self.header;
        let mut out = Vec::with_capacity(96);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        write_norm(&mut out, h.norm);
        out.extend_from_slice(&h.n.to_le_bytes());
        out.extend_from_slice(&h.d.to_le_bytes());
        out.extend_from_slice(&h.epsilon.value().to_le_bytes());
        out.extend_from_slice(&h.scale.to_le_bytes());
        out.extend_from_slice(&h.spread.to_le_bytes());
        let mut flags = 0;
        if h.net == NetKind::RankedBall {
            flags |= FLAG_RANKED;
        }
        if h.landmarks {
            flags |= FLAG_LANDMARKS;
        }
        out.push(flags);
        out.extend_from_slice(&h.jl_seed.to_le_bytes());
        out.extend_from_slice(&h.jl_source_dim.to_le_bytes());
        out.extend_from_slice(&payload_bits.to_le_bytes());
        out
    }

    /// Serializes to `MCSK` bytes.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        Ok(self.serialize()?.0)
    }

    /// Serializes and reports payload bits per section.
    pub fn serialize(&self) -> Result<(Vec<u8>, SizeReport)> {
        self.validate_header()?;
        let t = &self.tree;
        let ann = &self.ann;
        let n = self.n();
        let d = self.dim();
        let eps = self.header.epsilon;
        let norm = self.header.norm;
        let mut w = BitWriter::new();
        let mut rep = SizeReport::default();

        // Shape.
        let mark = w.len();
        let mut stack: Vec<(NodeId, bool)> = vec![(t.root(), false)];
        while let Some((v, done)) = stack.pop() {
            if done {
                w.push_bit(false);
                continue;
            }
            w.push_bit(true);
            stack.push((v, true));
            for &c in t.children(v).iter().rev() {
                stack.push((c, false));
            }
        }
        for v in 1..t.len() {
            w.push_bit(t.edge(v).is_long());
        }
        rep.shape = w.len() - mark;

        let mark = w.len();
        for v in 1..t.len() {
            if let EdgeKind::Long { gap } = t.edge(v) {
                w.write_gamma(gap as u64);
            }
        }
        rep.gaps = w.len() - mark;

        // Per-node fields.
        let leaves = t.subtree_leaves();
        let leaf_index: HashMap<NodeId, u64> = leaves
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, i as u64))
            .collect();
        let w_center = width_for(n as u64);
        let w_leaf = width_for(leaves.len() as u64);
        let mut coder = Coder::new(self.header.net);
        for v in 0..t.len() {
            let c = ann.centers[v];
            if c >= n {
                return Err(Error::Encode(format!(
                    "center {c} of node {v} out of range"
                )));
            }
            let mark = w.len();
            w.write_bits(c as u64, w_center);
            rep.centers += w.len() - mark;

            let root = t.is_subtree_root(v);
            if !root {
                let mark = w.len();
                let i = ann.ingress[v]
                    .ok_or_else(|| Error::Encode(format!("node {v} lacks an ingress")))?;
                if Some(i) == t.parent(v) {
                    w.push_bit(false);
                } else {
                    let idx = *leaf_index.get(&i).ok_or_else(|| {
                        Error::Encode(format!("ingress {i} of node {v} is not a subtree leaf"))
                    })?;
                    w.push_bit(true);
                    w.write_bits(idx, w_leaf);
                }
                rep.ingresses += w.len() - mark;
            }

            let inv = ann.inv_delta[v];
            if !(5..=MAX_INV_DELTA).contains(&inv) {
                return Err(Error::Encode(format!(
                    "precision {inv} of node {v} out of range"
                )));
            }
            let mark = w.len();
            w.write_gamma(inv - 4);
            rep.precisions += w.len() - mark;

            if !root {
                let z = ann.codes[v]
                    .as_ref()
                    .ok_or_else(|| Error::Encode(format!("node {v} lacks a displacement")))?;
                if z.len() != d {
                    return Err(Error::Encode(format!(
                        "displacement of node {v} has wrong length"
                    )));
                }
                let mark = w.len();
                let m = net_delta_inv(inv, t.is_subtree_leaf(v), eps);
                coder.encode(z, m, norm, &mut w)?;
                rep.displacements += w.len() - mark;
            }
        }

        if let Some(table) = &self.landmarks {
            let mark = w.len();
            let width = landmark_width(&self.header);
            let w_node = width_for(t.len() as u64);
            let part = t.subtree_decomposition();
            let limit = BigInt::one() << (width - 1);
            let mut by_root: HashMap<NodeId, Vec<&(NodeId, Vec<BigInt>)>> = HashMap::new();
            let mut prev = None;
            for e in &table.entries {
                if e.0 >= t.len() || t.is_subtree_root(e.0) || prev.is_some_and(|p| p >= e.0) {
                    return Err(Error::Encode(format!("bad landmark node {}", e.0)));
                }
                prev = Some(e.0);
                by_root.entry(part[e.0]).or_default().push(e);
            }
            for r in t.subtree_roots() {
                let entries = by_root.remove(&r).unwrap_or_default();
                w.write_gamma(entries.len() as u64 + 1);
                for (v, coords) in entries {
                    w.write_bits(*v as u64, w_node);
                    if coords.len() != d {
                        return Err(Error::Encode("landmark has wrong dimension".into()));
                    }
                    for c in coords {
                        if c >= &limit || c < &-&limit {
                            return Err(Error::Encode(format!(
                                "landmark offset needs more than {width} bits"
                            )));
                        }
                        w.write_signed_big(c, width);
                    }
                }
            }
            rep.landmarks = w.len() - mark;
        }

        rep.payload = w.len();
        let mut out = self.write_header(w.len());
        rep.header_bytes = out.len() as u64 + 4;
        out.extend_from_slice(&w.into_bytes());
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok((out, rep))
    }

    /// Parses and validates `MCSK` bytes.
    pub fn from_bytes(bytes: &[u8]) -> Result<Sketch> {
        let mut c = Cursor::new(bytes);
        if c.take(4)? != MAGIC {
            return Err(Error::format(0, "bad magic, not a sketch file"));
        }
        let version = c.u16()?;
        if version != VERSION {
            return Err(Error::format(32, format!("unsupported version {version}")));
        }
        let body = &bytes[..bytes.len() - 4];
        let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().expect("4 bytes"));
        if crc32fast::hash(body) != stored {
            return Err(Error::format(
                body.len() as u64 * 8,
                "checksum mismatch, sketch is corrupt",
            ));
        }
        let mut c = Cursor::new(body);
        c.pos = 6;
        let norm = read_norm(&mut c)?;
        let at = |c: &Cursor| c.pos as u64 * 8;
        let n = c.u64()?;
        let d = c.u64()?;
        let eps_at = at(&c);
        let eps_raw = c.f64()?;
        let scale = c.f64()?;
        let spread_at = at(&c);
        let spread = c.f64()?;
        let flags_at = at(&c);
        let flags = c.u8()?;
        let jl_seed = c.u64()?;
        let jl_source_dim = c.u64()?;
        let payload_bits = c.u64()?;
        let header_len = c.pos;
        if n < 2 || n > u32::MAX as u64 || d == 0 || d > u32::MAX as u64 {
            return Err(Error::format(6 * 8, format!("bad dimensions n={n}, d={d}")));
        }
        let epsilon = Epsilon::snap(eps_raw)
            .ok()
            .filter(|e| e.value() == eps_raw)
            .ok_or_else(|| Error::format(eps_at, format!("bad epsilon {eps_raw}")))?;
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::format(eps_at + 64, format!("bad scale {scale}")));
        }
        if !(spread.is_finite() && spread >= 1.0) {
            return Err(Error::format(spread_at, format!("bad spread {spread}")));
        }
        if flags & !(FLAG_RANKED | FLAG_LANDMARKS) != 0 {
            return Err(Error::format(flags_at, format!("unknown flags {flags:#x}")));
        }
        let net = if flags & FLAG_RANKED != 0 {
            NetKind::RankedBall
        } else {
            NetKind::UniformGrid
        };
        if net == NetKind::RankedBall && norm != Norm::L2 {
            return Err(Error::format(flags_at, "ranked net requires p = 2"));
        }
        if jl_source_dim != 0 && (jl_source_dim <= d || norm != Norm::L2) {
            return Err(Error::format(
                flags_at + 72,
                "inconsistent projection metadata",
            ));
        }
        let payload = &body[header_len..];
        if payload_bits.div_ceil(8) != payload.len() as u64 {
            return Err(Error::format(
                header_len as u64 * 8,
                format!(
                    "payload length {} bytes does not match {payload_bits} bits",
                    payload.len()
                ),
            ));
        }
        let header = Header {
            norm,
            n,
            d,
            epsilon,
            scale,
            spread,
            net,
            landmarks: flags & FLAG_LANDMARKS != 0,
            jl_seed,
            jl_source_dim,
        };
        let base = header_len as u64 * 8;
        let mut r = BitReader::new(payload, payload_bits, base);
        let sketch = decode_payload(header, &mut r)?;
        if r.remaining() != 0 {
            return Err(r.error("trailing bits after payload"));
        }
        let pad = (payload_bits % 8) as u32;
        if pad != 0 && payload.last().is_some_and(|b| b & (0xff >> pad) != 0) {
            return Err(Error::format(base + payload_bits, "nonzero padding bits"));
        }
        Ok(sketch)
    }
}

fn decode_payload(header: Header, r: &mut BitReader<'_>) -> Result<Sketch> {
    let n = header.n as usize;
    let d = header.d as usize;
    let eps = header.epsilon;

    // Shape.
    let mut nodes: Vec<Node> = Vec::new();
    let mut open: Vec<NodeId> = Vec::new();
    loop {
        let at = r.offset();
        let bit = r.read_bit()?;
        if bit {
            if (nodes.len() as u64 + 1) * 2 > r.position() + r.remaining() {
                return Err(Error::format(at, "tree larger than payload"));
            }
            let id = nodes.len();
            let parent = open.last().copied();
            if let Some(p) = parent {
                nodes[p].children.push(id);
            } else if id != 0 {
                return Err(Error::format(at, "second root in tree shape"));
            }
            nodes.push(Node {
                level: 0,
                parent,
                edge: EdgeKind::Short,
                children: Vec::new(),
            });
            open.push(id);
        } else {
            if open.pop().is_none() {
                return Err(Error::format(at, "unbalanced tree shape"));
            }
            if open.is_empty() {
                break;
            }
        }
    }
    let n_nodes = nodes.len();
    let n_leaves = nodes.iter().filter(|nd| nd.children.is_empty()).count();
    if n_leaves != n {
        return Err(r.error(format!("tree has {n_leaves} leaves, header says {n}")));
    }
    let mut kinds = vec![false; n_nodes];
    for k in kinds.iter_mut().skip(1) {
        *k = r.read_bit()?;
    }
    for v in 1..n_nodes {
        if kinds[v] {
            let at = r.offset();
            let gap = r.read_gamma()?;
            if !(2..=1 << 16).contains(&gap) {
                return Err(Error::format(at, format!("bad long-edge gap {gap}")));
            }
            let top = nodes[v].parent.expect("non-root");
            if nodes[top].children.len() != 1 {
                return Err(Error::format(at, "long edge under a branching node"));
            }
            nodes[v].edge = EdgeKind::Long { gap: gap as u32 };
        }
    }
    if nodes[0].children.len() < 2 {
        return Err(r.error("root must branch"));
    }

    // Per-node fields.
    let w_center = width_for(n as u64);
    let mut centers = vec![0usize; n_nodes];
    let mut ingress_raw: Vec<Option<(bool, u64, u64)>> = vec![None; n_nodes];
    let mut inv_delta = vec![0u64; n_nodes];
    let mut codes = vec![None; n_nodes];
    let is_long = |v: NodeId, nodes: &[Node]| nodes[v].edge.is_long();
    let subtree_leaf: Vec<bool> = (0..n_nodes)
        .map(|v| nodes[v].children.iter().all(|&c| is_long(c, &nodes)))
        .collect();
    let leaves: Vec<NodeId> = (0..n_nodes).filter(|&v| subtree_leaf[v]).collect();
    let w_leaf = width_for(leaves.len() as u64);
    let mut coder = Coder::new(header.net);
    for v in 0..n_nodes {
        let at = r.offset();
        let c = r.read_bits(w_center)? as usize;
        if c >= n {
            return Err(Error::format(at, format!("center {c} out of range")));
        }
        centers[v] = c;
        let root = v == 0 || is_long(v, &nodes);
        if !root {
            let at = r.offset();
            if r.read_bit()? {
                let idx = r.read_bits(w_leaf)?;
                ingress_raw[v] = Some((true, idx, at));
            } else {
                ingress_raw[v] = Some((false, 0, at));
            }
        }
        let at = r.offset();
        let inv = r.read_gamma()?.saturating_add(4);
        if inv > MAX_INV_DELTA {
            return Err(Error::format(at, format!("precision {inv} out of range")));
        }
        inv_delta[v] = inv;
        if !root {
            let m = net_delta_inv(inv, subtree_leaf[v], eps);
            codes[v] = Some(coder.decode(d, m, header.norm, r)?);
        }
    }

    let leaf_points: Vec<(NodeId, usize)> = (0..n_nodes)
        .filter(|&v| nodes[v].children.is_empty())
        .map(|v| (v, centers[v]))
        .collect();
    let mut seen = vec![false; n];
    for &(_, x) in &leaf_points {
        if std::mem::replace(&mut seen[x], true) {
            return Err(r.error(format!("point {x} appears at two leaves")));
        }
    }
    let mut tree =
        SketchTree::from_nodes(nodes, &leaf_points).map_err(|e| r.error(e.to_string()))?;
    let levels = tree
        .structural_levels()
        .ok_or_else(|| r.error("inconsistent levels in tree"))?;
    tree = relevel(tree, &levels, &leaf_points).map_err(|e| r.error(e.to_string()))?;

    let part = tree.subtree_decomposition();
    let mut ingress = vec![None; n_nodes];
    for v in 0..n_nodes {
        let Some((flag, idx, at)) = ingress_raw[v] else {
            continue;
        };
        let target = if flag {
            let t = *leaves
                .get(idx as usize)
                .ok_or_else(|| Error::format(at, "ingress index out of range"))?;
            if t == v || part[t] != part[v] {
                return Err(Error::format(at, "ingress outside the node's subtree"));
            }
            t
        } else {
            tree.parent(v).expect("non-root")
        };
        ingress[v] = Some(target);
    }
    for v in 0..n_nodes {
        // Each center must lie in its own cluster.
        let mut w = Some(tree.leaf(centers[v]));
        while let Some(u) = w.filter(|&u| tree.level(u) < tree.level(v)) {
            w = tree.parent(u);
        }
        if w != Some(v) {
            return Err(r.error(format!("center of node {v} lies outside its cluster")));
        }
    }

    let landmarks = if header.landmarks {
        let width = landmark_width(&header);
        let w_node = width_for(n_nodes as u64);
        let mut entries = Vec::new();
        for root in tree.subtree_roots() {
            let at = r.offset();
            let count = r.read_gamma()? - 1;
            if count > n_nodes as u64 {
                return Err(Error::format(at, "landmark count too large"));
            }
            let mut prev = None;
            for _ in 0..count {
                let at = r.offset();
                let v = r.read_bits(w_node)? as usize;
                if v >= n_nodes || v == root || part[v] != root || prev.is_some_and(|p| p >= v) {
                    return Err(Error::format(at, format!("bad landmark node {v}")));
                }
                prev = Some(v);
                let coords = (0..d)
                    .map(|_| r.read_signed_big(width))
                    .collect::<Result<Vec<_>>>()?;
                entries.push((v, coords));
            }
        }
        entries.sort_by_key(|e| e.0);
        Some(LandmarkTable { entries })
    } else {
        None
    };

    Ok(Sketch {
        header,
        tree,
        ann: Annotations {
            centers,
            ingress,
            inv_delta,
            codes,
        },
        landmarks,
    })
}

fn relevel(
    tree: SketchTree,
    levels: &[u32],
    leaf_points: &[(NodeId, usize)],
) -> Result<SketchTree> {
    let nodes: Vec<Node> = tree
        .nodes()
        .iter()
        .zip(levels)
        .map(|(nd, &l)| Node {
            level: l,
            ..nd.clone()
        })
        .collect();
    SketchTree::from_nodes(nodes, leaf_points)
}

/// Per-section bit counts of a serialized sketch.
pub fn size_report(bytes: &[u8]) -> Result<SizeReport> {
    Ok(Sketch::from_bytes(bytes)?.serialize()?.1)
}

/// Gamma-code bits a gap list would take, for reports.
pub fn gap_bits(gaps: impl IntoIterator<Item = u32>) -> u64 {
    gaps.into_iter().map(|g| gamma_len(g as u64)).sum()
}
