// SPDX-License-Identifier: Apache-2.0
//! Negotiated-congestion construction of the trace forest.
//!
//! Each connection (signal, copy) searches from the signal's OPIN through
//! spare routing nodes and ends either at a free trace input (opening a new
//! tree) or on any node of an existing tree it may join (multiplexer
//! overuse: the select is bound at debug time). Passing through another
//! tree's node is a conflict, priced by present and history costs and
//! negotiated away over iterations. Leftover conflicts are settled greedily
//! in routing order, and evicted connections get one more try under hard
//! constraints.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::types::{ConnectivityReport, Leaf, OverlayForest, OverlayTree, SignalSource};
use crate::error::{Error, Result};
use crate::fabric::{NodeId, NodeKind, ResourceMask, RoutingResourceGraph};
use crate::pnr::RouteNode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayParams {
    /// Distinct trace inputs each signal should reach.
    pub fanout_target: usize,
    /// Extra tracks over `w_min` the overlay is built at.
    pub width_margin: f64,
    pub max_iters: usize,
    /// Cost per shared node when joining an existing tree.
    pub share_cost: f64,
}

impl Default for OverlayParams {
    fn default() -> Self {
        OverlayParams {
            fanout_target: 2,
            width_margin: 0.3,
            max_iters: 50,
            share_cost: 0.05,
        }
    }
}

impl OverlayParams {
    pub fn validate(&self) -> Result<()> {
        if self.fanout_target == 0 {
            return Err(Error::validation("fanout_target must be at least 1"));
        }
        if !(self.width_margin >= 0.0) {
            return Err(Error::validation(format!(
                "width_margin must be >= 0, got {}",
                self.width_margin
            )));
        }
        if !(self.share_cost >= 0.0) {
            return Err(Error::validation("share_cost must be >= 0"));
        }
        Ok(())
    }
}

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Claim {
    tree: u32,
    next: u32,
    refs: u32,
    depth: u32,
}

#[derive(Debug, Clone)]
struct Routed {
    tree: u32,
    /// First tree node after the OPIN, through to the root.
    path: Vec<u32>,
}

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    cost: f64,
    node: u32,
    terminal: bool,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        o.cost
            .total_cmp(&self.cost)
            .then_with(|| o.terminal.cmp(&self.terminal))
            .then_with(|| o.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    /// Conflicts allowed at a price.
    Negotiate { pres: f64 },
    /// No node may be shared across trees.
    Hard,
}

struct Scratch {
    gen: u32,
    stamp: Vec<u32>,
    g: Vec<f64>,
    prev: Vec<u32>,
    tstamp: Vec<u32>,
    tg: Vec<f64>,
    tprev: Vec<u32>,
    ttree: Vec<u32>,
    heap: BinaryHeap<Entry>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch {
            gen: 0,
            stamp: vec![0; n],
            g: vec![0.0; n],
            prev: vec![NONE; n],
            tstamp: vec![0; n],
            tg: vec![0.0; n],
            tprev: vec![NONE; n],
            ttree: vec![NONE; n],
            heap: BinaryHeap::new(),
        }
    }
}

struct Builder<'a> {
    rrg: &'a RoutingResourceGraph,
    /// Channel nodes that are FREE in the mask.
    passable: Vec<bool>,
    /// FREE trace inputs usable as roots.
    root_ok: Vec<bool>,
    claims: Vec<Vec<Claim>>,
    hist: Vec<f64>,
    share: f64,
}

impl Builder<'_> {
    fn claim_of(&self, v: usize, tree: u32) -> Option<&Claim> {
        self.claims[v].iter().find(|c| c.tree == tree)
    }

    fn add(&mut self, r: &Routed) {
        let k = r.path.len();
        for (i, &v) in r.path.iter().enumerate() {
            let next = if i + 1 < k { r.path[i + 1] } else { NONE };
            let depth = (k - 1 - i) as u32;
            match self.claims[v as usize]
                .iter_mut()
                .find(|c| c.tree == r.tree)
            {
                Some(c) => {
                    debug_assert_eq!(c.next, next);
                    c.refs += 1;
                }
                None => self.claims[v as usize].push(Claim {
                    tree: r.tree,
                    next,
                    refs: 1,
                    depth,
                }),
            }
        }
    }

    fn remove(&mut self, r: &Routed) {
        for &v in &r.path {
            let cl = &mut self.claims[v as usize];
            if let Some(i) = cl.iter().position(|c| c.tree == r.tree) {
                cl[i].refs -= 1;
                if cl[i].refs == 0 {
                    cl.swap_remove(i);
                }
            }
        }
    }

    /// Chain from `v` (inclusive) to the root of `tree`.
    fn chain(&self, v: u32, tree: u32) -> Vec<u32> {
        let mut out = vec![v];
        let mut cur = v;
        while let Some(c) = self.claim_of(cur as usize, tree) {
            if c.next == NONE {
                break;
            }
            cur = c.next;
            out.push(cur);
        }
        out
    }

    fn pass_cost(&self, v: usize, mode: Mode) -> Option<f64> {
        if !self.passable[v] {
            return None;
        }
        let occupied = self.claims[v].len() as f64;
        match mode {
            Mode::Hard if occupied > 0.0 => None,
            Mode::Hard => Some(1.0 + self.hist[v]),
            Mode::Negotiate { pres } => Some((1.0 + self.hist[v]) * (1.0 + pres * occupied)),
        }
    }

    /// Cheapest way to end a connection on `v`: a tree to join (or `NONE`
    /// for a new tree rooted at `v`) and the extra cost.
    fn terminal(&self, v: usize, forbidden: &[u32], mode: Mode) -> Option<(u32, f64)> {
        let cl = &self.claims[v];
        if cl.is_empty() {
            return self.root_ok[v].then(|| (NONE, 1.0 + self.hist[v]));
        }
        if mode == Mode::Hard && cl.len() > 1 {
            return None;
        }
        let others = cl.len() as f64 - 1.0;
        let extra = match mode {
            Mode::Negotiate { pres } => (1.0 + self.hist[v]) * pres * others,
            Mode::Hard => 0.0,
        };
        cl.iter()
            .filter(|c| !forbidden.contains(&c.tree))
            .map(|c| (c.tree, self.share * (1.0 + c.depth as f64) + extra))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
    }

    fn search(
        &self,
        s: &mut Scratch,
        opin: NodeId,
        forbidden: &[u32],
        mode: Mode,
    ) -> Option<Routed> {
        s.gen += 1;
        let gen = s.gen;
        s.heap.clear();
        let o = opin.idx();
        s.stamp[o] = gen;
        s.g[o] = 0.0;
        s.prev[o] = NONE;
        s.heap.push(Entry {
            cost: 0.0,
            node: o as u32,
            terminal: false,
        });
        let mut end = None;
        while let Some(e) = s.heap.pop() {
            let u = e.node as usize;
            if e.terminal {
                if e.cost > s.tg[u] {
                    continue;
                }
                end = Some(u);
                break;
            }
            if e.cost > s.g[u] {
                continue;
            }
            for &v in self.rrg.fanout(NodeId(e.node)) {
                let vi = v.idx();
                if let Some((tree, extra)) = self.terminal(vi, forbidden, mode) {
                    let c = e.cost + extra;
                    if s.tstamp[vi] != gen || c < s.tg[vi] {
                        s.tstamp[vi] = gen;
                        s.tg[vi] = c;
                        s.tprev[vi] = e.node;
                        s.ttree[vi] = tree;
                        s.heap.push(Entry {
                            cost: c,
                            node: vi as u32,
                            terminal: true,
                        });
                    }
                }
                if let Some(pc) = self.pass_cost(vi, mode) {
                    let c = e.cost + pc;
                    if s.stamp[vi] != gen || c < s.g[vi] {
                        s.stamp[vi] = gen;
                        s.g[vi] = c;
                        s.prev[vi] = e.node;
                        s.heap.push(Entry {
                            cost: c,
                            node: vi as u32,
                            terminal: false,
                        });
                    }
                }
            }
        }
        let v = end?;
        let mut own = vec![v as u32];
        let mut cur = s.tprev[v];
        while cur != o as u32 {
            own.push(cur);
            cur = s.prev[cur as usize];
        }
        own.reverse();
        let tree = s.ttree[v];
        if tree == NONE {
            return Some(Routed {
                tree: v as u32,
                path: own,
            });
        }
        // Stop at the first node already in the joined tree.
        let cut = own
            .iter()
            .position(|&n| self.claim_of(n as usize, tree).is_some())
            .unwrap();
        let mut path = own[..cut].to_vec();
        path.extend(self.chain(own[cut], tree));
        Some(Routed { tree, path })
    }
}

/// Builds the trace forest over the FREE nodes of `mask`.
///
/// Never fails on routability: signals that cannot reach any trace input
/// are reported as unconnected.
pub fn build_trace_overlay(
    rrg: &RoutingResourceGraph,
    mask: &ResourceMask,
    signals: &[SignalSource],
    trace_inputs: &[NodeId],
    params: &OverlayParams,
    seed: u64,
) -> Result<(OverlayForest, ConnectivityReport)> {
    params.validate()?;
    if mask.len() != rrg.len() {
        return Err(Error::validation(
            "resource mask does not match the routing graph",
        ));
    }
    for (i, s) in signals.iter().enumerate() {
        if s.id as usize != i {
            return Err(Error::validation("signal ids must be 0..n in order"));
        }
        if rrg.node(s.opin).kind != NodeKind::Opin {
            return Err(Error::validation(format!(
                "signal `{}` does not start at an OPIN",
                s.name
            )));
        }
    }
    let start = Instant::now();
    let n = rrg.len();
    let passable: Vec<bool> = rrg
        .ids()
        .map(|v| rrg.node(v).kind.is_channel() && mask.is_free(v))
        .collect();
    let mut root_ok = vec![false; n];
    for &t in trace_inputs {
        if rrg.node(t).kind == NodeKind::TbIpin && !rrg.is_control_pin(t) && mask.is_free(t) {
            root_ok[t.idx()] = true;
        }
    }
    let mut b = Builder {
        rrg,
        passable,
        root_ok,
        claims: vec![Vec::new(); n],
        hist: vec![0.0; n],
        share: params.share_cost,
    };

    // Hardest first: signals far from any trace input; seeded tie-breaks.
    let roots: Vec<(i32, i32)> = trace_inputs
        .iter()
        .map(|&t| (rrg.node(t).x as i32, rrg.node(t).y as i32))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keyed: Vec<(i32, u64, usize)> = signals
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let o = rrg.node(s.opin);
            let d = roots
                .iter()
                .map(|&(x, y)| (o.x as i32 - x).abs() + (o.y as i32 - y).abs())
                .min()
                .unwrap_or(0);
            (-d, rng.gen::<u64>(), i)
        })
        .collect();
    keyed.sort_unstable();
    let conns: Vec<usize> = (0..params.fanout_target)
        .flat_map(|_| keyed.iter().map(|k| k.2))
        .collect();

    let mut routed: Vec<Option<Routed>> = vec![None; conns.len()];
    let mut dead = vec![false; conns.len()];
    let mut sig_conns: Vec<Vec<usize>> = vec![Vec::new(); signals.len()];
    for (ci, &s) in conns.iter().enumerate() {
        sig_conns[s].push(ci);
    }
    let forbidden_for = |ci: usize, routed: &[Option<Routed>]| -> Vec<u32> {
        sig_conns[conns[ci]]
            .iter()
            .filter(|&&o| o != ci)
            .filter_map(|&o| routed[o].as_ref().map(|r| r.tree))
            .collect()
    };
    let mut scratch = Scratch::new(n);
    let mut pres = 0.5;
    let mut iters = 0;
    for iter in 1..=params.max_iters.max(1) {
        iters = iter;
        for ci in 0..conns.len() {
            if dead[ci] {
                continue;
            }
            if iter > 1 {
                let conflicted = routed[ci]
                    .as_ref()
                    .is_some_and(|r| r.path.iter().any(|&v| b.claims[v as usize].len() > 1));
                if !conflicted {
                    continue;
                }
            }
            if let Some(r) = routed[ci].take() {
                b.remove(&r);
            }
            let forbidden = forbidden_for(ci, &routed);
            match b.search(
                &mut scratch,
                signals[conns[ci]].opin,
                &forbidden,
                Mode::Negotiate { pres },
            ) {
                Some(r) => {
                    b.add(&r);
                    routed[ci] = Some(r);
                }
                None => dead[ci] = true,
            }
        }
        let conflicted: Vec<usize> = (0..n).filter(|&v| b.claims[v].len() > 1).collect();
        if conflicted.is_empty() {
            break;
        }
        for v in conflicted {
            b.hist[v] += 1.0;
        }
        pres *= 1.3;
    }

    // Settle leftover conflicts in routing order.
    let mut owner: Vec<Option<(u32, u32)>> = vec![None; n];
    let mut accepted: Vec<Option<Routed>> = vec![None; conns.len()];
    let mut evicted = Vec::new();
    for ci in 0..conns.len() {
        let Some(r) = routed[ci].take() else { continue };
        let ok = r.path.iter().enumerate().all(|(i, &v)| {
            let next = r.path.get(i + 1).copied().unwrap_or(NONE);
            owner[v as usize].is_none_or(|o| o == (r.tree, next))
        }) && !forbidden_for(ci, &accepted).contains(&r.tree);
        if ok {
            for (i, &v) in r.path.iter().enumerate() {
                owner[v as usize] = Some((r.tree, r.path.get(i + 1).copied().unwrap_or(NONE)));
            }
            accepted[ci] = Some(r);
        } else {
            evicted.push(ci);
        }
    }
    // Retry evicted connections without any sharing across trees.
    b.claims.iter_mut().for_each(Vec::clear);
    for r in accepted.iter().flatten() {
        b.add(r);
    }
    let n_evicted = evicted.len();
    let mut repaired = 0;
    for ci in evicted {
        let forbidden = forbidden_for(ci, &accepted);
        if let Some(r) = b.search(
            &mut scratch,
            signals[conns[ci]].opin,
            &forbidden,
            Mode::Hard,
        ) {
            b.add(&r);
            accepted[ci] = Some(r);
            repaired += 1;
        }
    }

    // Assemble trees from the surviving claims.
    let mut trees: HashMap<u32, OverlayTree> = HashMap::new();
    for v in 0..n {
        for c in &b.claims[v] {
            let t = trees.entry(c.tree).or_insert_with(|| OverlayTree {
                root: NodeId(c.tree),
                nodes: Vec::new(),
                leaves: Vec::new(),
            });
            t.nodes.push(RouteNode {
                node: NodeId(v as u32),
                parent: (c.next != NONE).then_some(NodeId(c.next)),
            });
        }
    }
    for (ci, r) in accepted.iter().enumerate() {
        let Some(r) = r else { continue };
        let s = &signals[conns[ci]];
        let t = trees
            .get_mut(&r.tree)
            .expect("accepted connection has a tree");
        t.leaves.push(Leaf {
            signal: s.id,
            opin: s.opin,
            parent: NodeId(r.path[0]),
        });
    }
    let mut trees: Vec<OverlayTree> = trees.into_values().collect();
    trees.sort_by_key(|t| t.root);
    for t in &mut trees {
        t.leaves.sort_by_key(|l| (l.signal, l.parent));
        t.leaves.dedup();
    }
    let forest = OverlayForest {
        signals: signals.to_vec(),
        trees,
    };
    let mut report = ConnectivityReport::from_forest(&forest);
    report.build_time_s = start.elapsed().as_secs_f64();
    log::debug!(
        "trace overlay: {} trees, {:.4} connected, {iters} iterations, {n_evicted} evicted ({repaired} repaired)",
        forest.trees.len(),
        report.fraction_connected
    );
    Ok((forest, report))
}
