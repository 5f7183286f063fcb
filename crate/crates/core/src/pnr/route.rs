// SPDX-License-Identifier: Apache-2.0
//! Negotiated-congestion (PathFinder) router over the routing resource graph.
//!
//! Node cost is `(base + history) * (1 + pres_fac * overuse)`, where
//! `overuse` is how far adding this net would push the node past capacity.
//! Each net is routed as a tree by repeated A* from the partial tree to the
//! nearest unrouted sink group.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::types::{Placement, RouteNode, RouteTree, Routing};
use crate::circuits::{BlockKind, Netlist};
use crate::error::{Error, Result};
use crate::fabric::{NodeId, NodeKind, RoutingResourceGraph};

#[derive(Debug, Clone, PartialEq)]
pub struct RouterParams {
    pub seed: u64,
    pub max_iters: usize,
    pub pres_fac_first: f64,
    pub pres_fac_mult: f64,
    pub hist_fac: f64,
}

impl Default for RouterParams {
    fn default() -> Self {
        RouterParams {
            seed: 1,
            max_iters: 50,
            pres_fac_first: 0.5,
            pres_fac_mult: 1.3,
            hist_fac: 1.0,
        }
    }
}

impl RouterParams {
    pub fn with_seed(seed: u64) -> Self {
        RouterParams {
            seed,
            ..Self::default()
        }
    }
}

/// One net to route: reach at least one node of every sink group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteRequest {
    pub name: String,
    pub source: NodeId,
    /// Each group lists interchangeable targets (e.g. all SINKs of a CLB).
    pub sinks: Vec<Vec<NodeId>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteOutcome {
    /// One tree per request, in request order.
    pub trees: Vec<Vec<RouteNode>>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteFailure {
    pub iterations: usize,
    /// Nodes still over capacity when the iteration cap was hit.
    pub congested: Vec<NodeId>,
    /// Requests with a sink group no path can reach at all.
    pub unreachable: Vec<String>,
}

impl std::fmt::Display for RouteFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if !self.unreachable.is_empty() {
            write!(
                f,
                "no path for {} net(s), first `{}`",
                self.unreachable.len(),
                self.unreachable[0]
            )
        } else {
            write!(
                f,
                "{} congested node(s) after {} iterations",
                self.congested.len(),
                self.iterations
            )
        }
    }
}

impl From<RouteFailure> for Error {
    fn from(f: RouteFailure) -> Self {
        Error::Unroutable(f.to_string())
    }
}

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    f: f64,
    g: f64,
    node: u32,
}

impl Eq for Entry {}

impl Ord for Entry {
    // Min-heap on (f, node).
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f).then_with(|| o.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Reusable per-search buffers with generation stamps to avoid clearing.
pub(crate) struct Search {
    stamp: Vec<u32>,
    gen: u32,
    g: Vec<f64>,
    prev: Vec<u32>,
    target: Vec<u32>,
    tgen: u32,
    heap: BinaryHeap<Entry>,
}

const NO_PREV: u32 = u32::MAX;

impl Search {
    pub(crate) fn new(n: usize) -> Self {
        Search {
            stamp: vec![0; n],
            gen: 0,
            g: vec![0.0; n],
            prev: vec![NO_PREV; n],
            target: vec![0; n],
            tgen: 0,
            heap: BinaryHeap::new(),
        }
    }

    fn reset(&mut self) {
        self.gen += 1;
        self.heap.clear();
    }

    fn seen(&self, n: usize) -> bool {
        self.stamp[n] == self.gen
    }
}

struct Router<'a> {
    rrg: &'a RoutingResourceGraph,
    blocked: Option<&'a [bool]>,
    occ: Vec<u16>,
    hist: Vec<f64>,
    pres_fac: f64,
}

impl Router<'_> {
    #[inline]
    fn node_cost(&self, v: usize) -> f64 {
        let over = (self.occ[v] as f64 + 1.0 - self.rrg.nodes()[v].capacity as f64).max(0.0);
        (1.0 + self.hist[v]) * (1.0 + self.pres_fac * over)
    }

    /// Routes one request as a tree. Returns `None` if some group is
    /// unreachable.
    fn route_net(&self, req: &RouteRequest, s: &mut Search) -> Option<Vec<RouteNode>> {
        let rrg = self.rrg;
        let mut tree = vec![RouteNode {
            node: req.source,
            parent: None,
        }];
        let mut in_tree: HashSet<NodeId> = HashSet::from([req.source]);
        let src = rrg.node(req.source);
        let mut groups: Vec<&Vec<NodeId>> = req.sinks.iter().filter(|g| !g.is_empty()).collect();
        groups.sort_by_key(|g| {
            let t = rrg.node(g[0]);
            (t.x as i32 - src.x as i32).abs() + (t.y as i32 - src.y as i32).abs()
        });
        for group in groups {
            if group.iter().any(|t| in_tree.contains(t)) {
                continue;
            }
            s.tgen += 1;
            let mut locs: Vec<(i32, i32)> = Vec::new();
            for &t in group {
                s.target[t.idx()] = s.tgen;
                let n = rrg.node(t);
                if !locs.contains(&(n.x as i32, n.y as i32)) {
                    locs.push((n.x as i32, n.y as i32));
                }
            }
            let h = |v: usize| -> f64 {
                let n = &rrg.nodes()[v];
                locs.iter()
                    .map(|&(x, y)| ((n.x as i32 - x).abs() + (n.y as i32 - y).abs() - 2).max(0))
                    .min()
                    .unwrap_or(0) as f64
            };
            s.reset();
            for rn in &tree {
                let v = rn.node.idx();
                s.stamp[v] = s.gen;
                s.g[v] = 0.0;
                s.prev[v] = NO_PREV;
                s.heap.push(Entry {
                    f: h(v),
                    g: 0.0,
                    node: v as u32,
                });
            }
            let mut found = None;
            while let Some(Entry { g, node, .. }) = s.heap.pop() {
                let u = node as usize;
                if g > s.g[u] {
                    continue;
                }
                if s.target[u] == s.tgen {
                    found = Some(u);
                    break;
                }
                for &v in rrg.fanout(NodeId(node)) {
                    let vi = v.idx();
                    let is_target = s.target[vi] == s.tgen;
                    if !is_target {
                        if self.blocked.is_some_and(|b| b[vi]) {
                            continue;
                        }
                        match rrg.nodes()[vi].kind {
                            NodeKind::Sink | NodeKind::TbIpin => continue,
                            NodeKind::Ipin => {
                                let sink = rrg.fanout(v).first();
                                if sink.is_none_or(|k| s.target[k.idx()] != s.tgen) {
                                    continue;
                                }
                            }
                            _ => {}
                        }
                    }
                    let ng = g + self.node_cost(vi);
                    if !s.seen(vi) || ng < s.g[vi] {
                        s.stamp[vi] = s.gen;
                        s.g[vi] = ng;
                        s.prev[vi] = node;
                        s.heap.push(Entry {
                            f: ng + h(vi),
                            g: ng,
                            node: vi as u32,
                        });
                    }
                }
            }
            let end = found?;
            let mut path = Vec::new();
            let mut v = end as u32;
            while !in_tree.contains(&NodeId(v)) {
                path.push(v);
                v = s.prev[v as usize];
            }
            let mut parent = NodeId(v);
            for &p in path.iter().rev() {
                let node = NodeId(p);
                tree.push(RouteNode {
                    node,
                    parent: Some(parent),
                });
                in_tree.insert(node);
                parent = node;
            }
        }
        Some(tree)
    }
}

/// Routes every request with negotiated congestion. Nodes with
/// `blocked[n] == true` are never used except as explicit targets.
/// `observer` sees the history-cost vector after every iteration.
pub fn route_requests(
    rrg: &RoutingResourceGraph,
    requests: &[RouteRequest],
    blocked: Option<&[bool]>,
    params: &RouterParams,
    mut observer: Option<&mut dyn FnMut(usize, &[f64])>,
) -> std::result::Result<RouteOutcome, RouteFailure> {
    let n = rrg.len();
    let mut r = Router {
        rrg,
        blocked,
        occ: vec![0; n],
        hist: vec![0.0; n],
        pres_fac: params.pres_fac_first,
    };
    let mut order: Vec<usize> = (0..requests.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(params.seed));
    let mut trees: Vec<Vec<RouteNode>> = vec![Vec::new(); requests.len()];
    let mut search = Search::new(n);
    let mut congested = Vec::new();
    for iter in 1..=params.max_iters.max(1) {
        let mut unreachable = Vec::new();
        for &i in &order {
            let touches_overuse = trees[i]
                .iter()
                .any(|rn| r.occ[rn.node.idx()] > rrg.node(rn.node).capacity as u16);
            if iter > 1 && !touches_overuse {
                continue;
            }
            for rn in &trees[i] {
                r.occ[rn.node.idx()] -= 1;
            }
            match r.route_net(&requests[i], &mut search) {
                Some(t) => trees[i] = t,
                None => {
                    unreachable.push(requests[i].name.clone());
                    trees[i] = Vec::new();
                }
            }
            for rn in &trees[i] {
                r.occ[rn.node.idx()] += 1;
            }
        }
        if !unreachable.is_empty() {
            unreachable.sort();
            return Err(RouteFailure {
                iterations: iter,
                congested: Vec::new(),
                unreachable,
            });
        }
        congested = (0..n)
            .filter(|&v| r.occ[v] > rrg.nodes()[v].capacity as u16)
            .map(|v| NodeId(v as u32))
            .collect();
        if congested.is_empty() {
            log::debug!("routed {} nets in {iter} iterations", requests.len());
            return Ok(RouteOutcome {
                trees,
                iterations: iter,
            });
        }
        for &v in &congested {
            let over = r.occ[v.idx()] as f64 - rrg.node(v).capacity as f64;
            r.hist[v.idx()] += params.hist_fac * over;
        }
        r.pres_fac *= params.pres_fac_mult;
        if let Some(obs) = observer.as_mut() {
            obs(iter, &r.hist);
        }
    }
    Err(RouteFailure {
        iterations: params.max_iters.max(1),
        congested,
        unreachable: Vec::new(),
    })
}

/// Routing requests for a placed netlist. Sinks inside the driver's own CLB
/// use the local crossbar and need no routing; nets with no external sink
/// get no request. Returns `(net index, request)` pairs.
pub fn net_requests(
    netlist: &Netlist,
    placement: &Placement,
    rrg: &RoutingResourceGraph,
) -> Result<Vec<(usize, RouteRequest)>> {
    let missing =
        |what: &str, name: &str| Error::Internal(format!("no {what} node for block `{name}`"));
    let mut out = Vec::new();
    for (ni, net) in netlist.nets.iter().enumerate() {
        let d = placement.get(net.driver);
        let driver = netlist.block(net.driver);
        let source = rrg
            .lookup(NodeKind::Source, d.x as usize, d.y as usize, d.sub as usize)
            .ok_or_else(|| missing("SOURCE", &driver.name))?;
        let mut groups: Vec<Vec<NodeId>> = Vec::new();
        let mut seen_tiles = Vec::new();
        for pin in &net.sinks {
            let p = placement.get(pin.block);
            let blk = netlist.block(pin.block);
            if blk.kind == BlockKind::Output {
                let s = rrg
                    .lookup(NodeKind::Sink, p.x as usize, p.y as usize, p.sub as usize)
                    .ok_or_else(|| missing("SINK", &blk.name))?;
                groups.push(vec![s]);
            } else {
                let tile = p.tile();
                if (driver.kind.is_logic() && tile == d.tile()) || seen_tiles.contains(&tile) {
                    continue;
                }
                seen_tiles.push(tile);
                let sinks: Vec<NodeId> = (0..rrg.arch().clb_inputs)
                    .filter_map(|i| rrg.lookup(NodeKind::Sink, tile.0, tile.1, i))
                    .collect();
                if sinks.is_empty() {
                    return Err(missing("SINK", &blk.name));
                }
                groups.push(sinks);
            }
        }
        if !groups.is_empty() {
            out.push((
                ni,
                RouteRequest {
                    name: net.name.clone(),
                    source,
                    sinks: groups,
                },
            ));
        }
    }
    Ok(out)
}

/// Routes a placed netlist. The graph's channel width is recorded.
pub fn route(
    netlist: &Netlist,
    placement: &Placement,
    rrg: &RoutingResourceGraph,
    params: &RouterParams,
) -> Result<std::result::Result<Routing, RouteFailure>> {
    placement.validate(netlist, rrg.arch())?;
    let reqs = net_requests(netlist, placement, rrg)?;
    let just: Vec<RouteRequest> = reqs.iter().map(|(_, r)| r.clone()).collect();
    Ok(
        route_requests(rrg, &just, None, params, None).map(|o| Routing {
            channel_width: rrg.arch().channel_width_w,
            nets: reqs
                .iter()
                .zip(o.trees)
                .map(|((_, r), nodes)| RouteTree {
                    net: r.name.clone(),
                    nodes,
                })
                .collect(),
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fabric::{ArchSpec, RrNode};

    fn node(kind: NodeKind, x: u16, index: u16) -> RrNode {
        RrNode {
            kind,
            x,
            y: 0,
            index,
            capacity: 1,
        }
    }

    /// Two sources, two sinks; a shared middle node and one detour.
    ///   s0 -> a -> m -> t0      s1 -> b -> m -> t1,  b -> d -> t1
    fn diamond() -> RoutingResourceGraph {
        let nodes = vec![
            node(NodeKind::Source, 0, 0),
            node(NodeKind::Source, 0, 1),
            node(NodeKind::Chanx, 1, 0),
            node(NodeKind::Chanx, 1, 1),
            node(NodeKind::Chanx, 2, 0),
            node(NodeKind::Chanx, 2, 1),
            node(NodeKind::Sink, 3, 0),
            node(NodeKind::Sink, 3, 1),
        ];
        let e = |a: u32, b: u32| (NodeId(a), NodeId(b));
        let edges = [
            e(0, 2),
            e(1, 3),
            e(2, 4),
            e(3, 4),
            e(4, 6),
            e(4, 7),
            e(3, 5),
            e(5, 7),
        ];
        RoutingResourceGraph::from_nodes_and_edges(ArchSpec::default(), nodes, &edges)
    }

    #[test]
    fn negotiation_resolves_shared_node() {
        let g = diamond();
        let reqs = vec![
            RouteRequest {
                name: "a".into(),
                source: NodeId(0),
                sinks: vec![vec![NodeId(6)]],
            },
            RouteRequest {
                name: "b".into(),
                source: NodeId(1),
                sinks: vec![vec![NodeId(7)]],
            },
        ];
        for seed in 0..8 {
            let out =
                route_requests(&g, &reqs, None, &RouterParams::with_seed(seed), None).unwrap();
            let used: Vec<NodeId> = out.trees.iter().flatten().map(|r| r.node).collect();
            let set: HashSet<_> = used.iter().collect();
            assert_eq!(set.len(), used.len(), "overuse with seed {seed}");
        }
    }

    #[test]
    fn failure_names_congested_nodes() {
        let g = diamond();
        let reqs = vec![
            RouteRequest {
                name: "a".into(),
                source: NodeId(0),
                sinks: vec![vec![NodeId(6)]],
            },
            RouteRequest {
                name: "b".into(),
                source: NodeId(1),
                sinks: vec![vec![NodeId(6)]],
            },
        ];
        let f = route_requests(
            &g,
            &reqs,
            None,
            &RouterParams {
                max_iters: 5,
                ..Default::default()
            },
            None,
        )
        .unwrap_err();
        assert!(f.congested.contains(&NodeId(6)));
        let blocked = [false, false, false, false, true, false, false, false];
        let f = route_requests(
            &g,
            &reqs[..1],
            Some(&blocked),
            &RouterParams::default(),
            None,
        )
        .unwrap_err();
        assert_eq!(f.unreachable, vec!["a".to_string()]);
    }

    #[test]
    fn history_is_monotone() {
        let g = diamond();
        let reqs = vec![
            RouteRequest {
                name: "a".into(),
                source: NodeId(0),
                sinks: vec![vec![NodeId(6)]],
            },
            RouteRequest {
                name: "b".into(),
                source: NodeId(1),
                sinks: vec![vec![NodeId(6)]],
            },
        ];
        let mut last = vec![0.0; g.len()];
        let mut obs = |_: usize, h: &[f64]| {
            assert!(h.iter().zip(&last).all(|(a, b)| a >= b));
            last = h.to_vec();
        };
        let _ = route_requests(
            &g,
            &reqs,
            None,
            &RouterParams {
                max_iters: 10,
                ..Default::default()
            },
            Some(&mut obs),
        );
    }
}
