// SPDX-License-Identifier: Apache-2.0
//! Routing resource graph for the island-style fabric.
//!
//! Wires are length-1, bidirectional, one node per track segment. Switch
//! blocks use the disjoint pattern (track `t` only meets track `t`). Channel
//! coordinates follow the usual convention: `CHANX(x, y)` runs above tile
//! `(x, y)` and `CHANY(x, y)` runs to the right of it.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::arch::{ArchSpec, TileKind, IO_PADS_PER_TILE};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NodeKind {
    Source,
    Opin,
    Chanx,
    Chany,
    Ipin,
    Sink,
    TbIpin,
}

impl NodeKind {
    pub fn is_channel(self) -> bool {
        matches!(self, NodeKind::Chanx | NodeKind::Chany)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RrNode {
    pub kind: NodeKind,
    pub x: u16,
    pub y: u16,
    /// Track index for channel nodes, pin/BLE/pad index otherwise.
    pub index: u16,
    pub capacity: u8,
}

type NodeKey = (NodeKind, u16, u16, u16);

#[derive(Debug, Clone)]
pub struct RoutingResourceGraph {
    arch: ArchSpec,
    nodes: Vec<RrNode>,
    out_start: Vec<u32>,
    out_edges: Vec<NodeId>,
    in_start: Vec<u32>,
    in_edges: Vec<NodeId>,
    lookup: HashMap<NodeKey, NodeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrgJsonNode {
    pub id: u32,
    #[serde(flatten)]
    pub node: RrNode,
}

/// Golden-file form of the graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RrgJson {
    pub nodes: Vec<RrgJsonNode>,
    pub edges: Vec<[u32; 2]>,
}

/// A window of `n` consecutive tracks starting at `(pin * w) / pins`.
///
/// Switch blocks are disjoint, so a net keeps its track index end to end. A
/// strided pattern would lock each pin to one residue class (e.g. even
/// tracks at Fc = 0.5) and split the fabric into isolated planes; windows
/// span every class, and spreading their starts keeps pins on one side from
/// piling onto the same tracks.
fn pin_tracks(n: usize, w: usize, pin: usize, pins: usize) -> impl Iterator<Item = usize> {
    let start = pin * w / pins.max(1);
    (0..n).map(move |j| (start + j) % w)
}

#[derive(Clone, Copy)]
enum Side {
    Top,
    Right,
    Bottom,
    Left,
}

impl Side {
    fn of_pin(i: usize) -> Side {
        [Side::Top, Side::Right, Side::Bottom, Side::Left][i % 4]
    }
}

struct Builder {
    nodes: Vec<RrNode>,
    lookup: HashMap<NodeKey, NodeId>,
    edges: Vec<(u32, u32)>,
}

impl Builder {
    fn add(&mut self, kind: NodeKind, x: usize, y: usize, index: usize) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        let n = RrNode {
            kind,
            x: x as u16,
            y: y as u16,
            index: index as u16,
            capacity: 1,
        };
        self.nodes.push(n);
        self.lookup.insert((kind, n.x, n.y, n.index), id);
        id
    }

    fn get(&self, kind: NodeKind, x: usize, y: usize, index: usize) -> NodeId {
        self.lookup[&(kind, x as u16, y as u16, index as u16)]
    }

    fn edge(&mut self, from: NodeId, to: NodeId) {
        debug_assert_ne!(from, to);
        self.edges.push((from.0, to.0));
    }
}

/// Channel segment adjacent to side `side` of tile `(x, y)`.
fn side_channel(side: Side, x: usize, y: usize) -> (NodeKind, usize, usize) {
    match side {
        Side::Top => (NodeKind::Chanx, x, y),
        Side::Bottom => (NodeKind::Chanx, x, y - 1),
        Side::Right => (NodeKind::Chany, x, y),
        Side::Left => (NodeKind::Chany, x - 1, y),
    }
}

pub fn build_rrg(arch: &ArchSpec) -> Result<RoutingResourceGraph> {
    arch.validate()?;
    let cols = arch.core_columns();
    let h = arch.grid_height;
    let w = arch.channel_width_w;
    let mut b = Builder {
        nodes: Vec::new(),
        lookup: HashMap::new(),
        edges: Vec::new(),
    };

    for y in 0..=h + 1 {
        for x in 0..=cols + 1 {
            match arch.tile_kind(x, y) {
                TileKind::Clb => {
                    for ble in 0..arch.bles_per_clb {
                        let s = b.add(NodeKind::Source, x, y, ble);
                        let o = b.add(NodeKind::Opin, x, y, ble);
                        b.edge(s, o);
                    }
                    for i in 0..arch.clb_inputs {
                        let ip = b.add(NodeKind::Ipin, x, y, i);
                        let sk = b.add(NodeKind::Sink, x, y, i);
                        b.edge(ip, sk);
                    }
                }
                TileKind::Io => {
                    for p in 0..IO_PADS_PER_TILE {
                        let s = b.add(NodeKind::Source, x, y, p);
                        let o = b.add(NodeKind::Opin, x, y, p);
                        b.edge(s, o);
                        let ip = b.add(NodeKind::Ipin, x, y, p);
                        let sk = b.add(NodeKind::Sink, x, y, p);
                        b.edge(ip, sk);
                    }
                }
                TileKind::TraceBuffer => {
                    // The extra pin at index `tb_inputs_per_block` is the trigger control input.
                    for p in 0..=arch.tb_inputs_per_block {
                        b.add(NodeKind::TbIpin, x, y, p);
                    }
                }
                TileKind::Empty => {}
            }
        }
    }
    for y in 0..=h {
        for x in 1..=cols {
            for t in 0..w {
                b.add(NodeKind::Chanx, x, y, t);
            }
        }
    }
    for x in 0..=cols {
        for y in 1..=h {
            for t in 0..w {
                b.add(NodeKind::Chany, x, y, t);
            }
        }
    }

    let n_in = arch.tracks_for(arch.fc_in);
    let n_out = arch.tracks_for(arch.fc_out);
    let n_tb = arch.tracks_for(arch.tb_fc);

    for y in 0..=h + 1 {
        for x in 0..=cols + 1 {
            match arch.tile_kind(x, y) {
                TileKind::Clb => {
                    for ble in 0..arch.bles_per_clb {
                        let o = b.get(NodeKind::Opin, x, y, ble);
                        let (k, cx, cy) = side_channel(Side::of_pin(ble), x, y);
                        for t in pin_tracks(n_out, w, ble, arch.bles_per_clb) {
                            let c = b.get(k, cx, cy, t);
                            b.edge(o, c);
                        }
                    }
                    for i in 0..arch.clb_inputs {
                        let ip = b.get(NodeKind::Ipin, x, y, i);
                        let (k, cx, cy) = side_channel(Side::of_pin(i), x, y);
                        for t in pin_tracks(n_in, w, i, arch.clb_inputs) {
                            let c = b.get(k, cx, cy, t);
                            b.edge(c, ip);
                        }
                    }
                }
                TileKind::Io => {
                    let side = if x == 0 {
                        Side::Right
                    } else if x == cols + 1 {
                        Side::Left
                    } else if y == 0 {
                        Side::Top
                    } else {
                        Side::Bottom
                    };
                    let (k, cx, cy) = side_channel(side, x, y);
                    // Pads reach every track: with disjoint switch blocks a net
                    // never changes track, so a partial pattern could strand
                    // a pad from the tracks its one driver can use.
                    for p in 0..IO_PADS_PER_TILE {
                        let o = b.get(NodeKind::Opin, x, y, p);
                        for t in 0..w {
                            let c = b.get(k, cx, cy, t);
                            b.edge(o, c);
                        }
                        let ip = b.get(NodeKind::Ipin, x, y, p);
                        for t in 0..w {
                            let c = b.get(k, cx, cy, t);
                            b.edge(c, ip);
                        }
                    }
                }
                TileKind::TraceBuffer => {
                    // Trace inputs tap the horizontal channels only, alternating above and below.
                    for p in 0..=arch.tb_inputs_per_block {
                        let pin = b.get(NodeKind::TbIpin, x, y, p);
                        let side = if p % 2 == 0 { Side::Top } else { Side::Bottom };
                        let (k, cx, cy) = side_channel(side, x, y);
                        for t in pin_tracks(n_tb, w, p, arch.tb_inputs_per_block + 1) {
                            let c = b.get(k, cx, cy, t);
                            b.edge(c, pin);
                        }
                    }
                }
                TileKind::Empty => {}
            }
        }
    }

    // Switch block at corner (x, y): top-right corner of tile (x, y).
    for x in 0..=cols {
        for y in 0..=h {
            for t in 0..w {
                let mut segs = Vec::with_capacity(4);
                if x >= 1 {
                    segs.push(b.get(NodeKind::Chanx, x, y, t));
                }
                if x < cols {
                    segs.push(b.get(NodeKind::Chanx, x + 1, y, t));
                }
                if y >= 1 {
                    segs.push(b.get(NodeKind::Chany, x, y, t));
                }
                if y < h {
                    segs.push(b.get(NodeKind::Chany, x, y + 1, t));
                }
                for &a in &segs {
                    for &c in &segs {
                        if a != c {
                            b.edge(a, c);
                        }
                    }
                }
            }
        }
    }

    let Builder {
        nodes,
        lookup,
        mut edges,
    } = b;
    edges.sort_unstable();
    edges.dedup();
    Ok(RoutingResourceGraph::from_parts(
        arch.clone(),
        nodes,
        lookup,
        &edges,
    ))
}

fn csr(n: usize, edges: impl Iterator<Item = (u32, u32)> + Clone) -> (Vec<u32>, Vec<NodeId>) {
    let mut start = vec![0u32; n + 1];
    for (a, _) in edges.clone() {
        start[a as usize + 1] += 1;
    }
    for i in 0..n {
        start[i + 1] += start[i];
    }
    let mut fill = start.clone();
    let mut out = vec![NodeId(0); start[n] as usize];
    for (a, b) in edges {
        out[fill[a as usize] as usize] = NodeId(b);
        fill[a as usize] += 1;
    }
    (start, out)
}

impl RoutingResourceGraph {
    fn from_parts(
        arch: ArchSpec,
        nodes: Vec<RrNode>,
        lookup: HashMap<NodeKey, NodeId>,
        edges: &[(u32, u32)],
    ) -> Self {
        let n = nodes.len();
        let (out_start, out_edges) = csr(n, edges.iter().copied());
        let mut rev: Vec<(u32, u32)> = edges.iter().map(|&(a, b)| (b, a)).collect();
        rev.sort_unstable();
        let (in_start, in_edges) = csr(n, rev.iter().copied());
        RoutingResourceGraph {
            arch,
            nodes,
            out_start,
            out_edges,
            in_start,
            in_edges,
            lookup,
        }
    }

    /// Builds a graph from explicit nodes and edges. Used for hand-made
    /// fixtures; `arch` only supplies the pin-classification parameters.
    pub fn from_nodes_and_edges(
        arch: ArchSpec,
        nodes: Vec<RrNode>,
        edges: &[(NodeId, NodeId)],
    ) -> Self {
        let lookup = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| ((n.kind, n.x, n.y, n.index), NodeId(i as u32)))
            .collect();
        let mut e: Vec<(u32, u32)> = edges.iter().map(|(a, b)| (a.0, b.0)).collect();
        e.sort_unstable();
        e.dedup();
        Self::from_parts(arch, nodes, lookup, &e)
    }

    pub fn arch(&self) -> &ArchSpec {
        &self.arch
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn num_edges(&self) -> usize {
        self.out_edges.len()
    }

    #[inline]
    pub fn node(&self, id: NodeId) -> &RrNode {
        &self.nodes[id.idx()]
    }

    pub fn nodes(&self) -> &[RrNode] {
        &self.nodes
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len() as u32).map(NodeId)
    }

    #[inline]
    pub fn fanout(&self, id: NodeId) -> &[NodeId] {
        let i = id.idx();
        &self.out_edges[self.out_start[i] as usize..self.out_start[i + 1] as usize]
    }

    #[inline]
    pub fn fanin(&self, id: NodeId) -> &[NodeId] {
        let i = id.idx();
        &self.in_edges[self.in_start[i] as usize..self.in_start[i + 1] as usize]
    }

    pub fn has_edge(&self, from: NodeId, to: NodeId) -> bool {
        self.fanout(from).binary_search(&to).is_ok()
    }

    /// A routing multiplexer is any node with fan-in of at least two.
    pub fn is_mux(&self, id: NodeId) -> bool {
        self.fanin(id).len() >= 2
    }

    pub fn lookup(&self, kind: NodeKind, x: usize, y: usize, index: usize) -> Option<NodeId> {
        self.lookup
            .get(&(kind, x as u16, y as u16, index as u16))
            .copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.ids()
            .flat_map(move |a| self.fanout(a).iter().map(move |&b| (a, b)))
    }

    /// Trace-buffer data inputs (excludes trigger control pins).
    pub fn trace_inputs(&self) -> Vec<NodeId> {
        let limit = self.arch.tb_inputs_per_block as u16;
        self.ids()
            .filter(|&i| {
                let n = self.node(i);
                n.kind == NodeKind::TbIpin && n.index < limit
            })
            .collect()
    }

    /// Trigger control pins, one per trace-buffer block.
    pub fn control_pins(&self) -> Vec<NodeId> {
        let limit = self.arch.tb_inputs_per_block as u16;
        self.ids()
            .filter(|&i| {
                let n = self.node(i);
                n.kind == NodeKind::TbIpin && n.index == limit
            })
            .collect()
    }

    pub fn is_control_pin(&self, id: NodeId) -> bool {
        let n = self.node(id);
        n.kind == NodeKind::TbIpin && n.index as usize == self.arch.tb_inputs_per_block
    }

    /// SINK node behind an IPIN (IPINs feed exactly one SINK).
    pub fn sink_of_ipin(&self, ipin: NodeId) -> Option<NodeId> {
        self.fanout(ipin)
            .iter()
            .copied()
            .find(|&s| self.node(s).kind == NodeKind::Sink)
    }

    pub fn ipin_of_sink(&self, sink: NodeId) -> Option<NodeId> {
        self.fanin(sink).first().copied()
    }

    pub fn kind_histogram(&self) -> std::collections::BTreeMap<NodeKind, usize> {
        let mut h = std::collections::BTreeMap::new();
        for n in &self.nodes {
            *h.entry(n.kind).or_insert(0) += 1;
        }
        h
    }

    pub fn to_json(&self) -> RrgJson {
        RrgJson {
            nodes: self
                .nodes
                .iter()
                .enumerate()
                .map(|(i, n)| RrgJsonNode {
                    id: i as u32,
                    node: *n,
                })
                .collect(),
            edges: self.edges().map(|(a, b)| [a.0, b.0]).collect(),
        }
    }

    /// Nodes reachable from `start` by forward traversal.
    pub fn reachable_from(&self, start: NodeId) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut q = VecDeque::from([start]);
        seen[start.idx()] = true;
        while let Some(u) = q.pop_front() {
            for &v in self.fanout(u) {
                if !seen[v.idx()] {
                    seen[v.idx()] = true;
                    q.push_back(v);
                }
            }
        }
        seen
    }

    /// Manhattan distance between the tile locations of two nodes.
    #[inline]
    pub fn distance(&self, a: NodeId, b: NodeId) -> usize {
        let (na, nb) = (self.node(a), self.node(b));
        (na.x as i32 - nb.x as i32).unsigned_abs() as usize
            + (na.y as i32 - nb.y as i32).unsigned_abs() as usize
    }
}
