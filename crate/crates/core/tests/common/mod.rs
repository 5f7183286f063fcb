// SPDX-License-Identifier: Apache-2.0
//! Fixtures and independent oracles shared by the integration tests. Every
//! oracle here is written against the documented model, not the library
//! internals.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use debugfabric_core::circuits::{parse_netlist, BlockKind, Netlist, TriggerNetlist, gen_trigger};
use debugfabric_core::debug::DebugConfig;
use debugfabric_core::fabric::{
    build_rrg, margin_width, spare_mask, ArchSpec, NodeId, NodeKind, ResourceMask, RoutingResourceGraph,
};
use debugfabric_core::pnr::{
    find_min_channel_width, place, route, MinWidthParams, PlaceParams, Placement, RouterParams, Routing,
};
use debugfabric_core::suite::suite;
use debugfabric_core::trace::{signal_sources, SignalSource};
use debugfabric_core::trigger::{OverlayCell, OverlayFabric, OverlayLink, SaParams, SpareSlot, TriggerProblem};

/// A placed and routed user circuit.
pub struct Design {
    pub netlist: Netlist,
    pub arch: ArchSpec,
    pub placement: Placement,
    pub w_min: usize,
    pub routing: Routing,
    pub rrg: RoutingResourceGraph,
    pub mask: ResourceMask,
    pub sources: Vec<SignalSource>,
}

/// Suite circuit `index`, routed at the nearest even width ≥ 1.3 · w_min.
pub fn design(index: usize, seed: u64) -> Design {
    let c = &suite()[index];
    let netlist = c.netlist().unwrap();
    let arch = c.arch().unwrap();
    let placement = place(&netlist, &arch, &PlaceParams::with_seed(seed)).unwrap();
    let params = MinWidthParams { router: RouterParams::with_seed(seed), ..MinWidthParams::default() };
    let w_min = find_min_channel_width(&netlist, &placement, &arch, &params).unwrap().w_min;
    let rrg = build_rrg(&arch.with_channel_width(margin_width(w_min, 0.3))).unwrap();
    let routing = route(&netlist, &placement, &rrg, &RouterParams::with_seed(seed)).unwrap().unwrap();
    let mask = spare_mask(&rrg, &routing);
    let sources = signal_sources(&netlist, &placement, &rrg).unwrap();
    Design { netlist, arch, placement, w_min, routing, rrg, mask, sources }
}

// ---------------------------------------------------------------- matching

/// Maximum matching size by exhaustive search over injective assignments,
/// memoized on (left vertex, used right set).
pub fn brute_force_matching(adj: &[Vec<u32>], n_right: usize) -> usize {
    fn go(i: usize, used: u32, adj: &[Vec<u32>], memo: &mut HashMap<(usize, u32), usize>) -> usize {
        if i == adj.len() {
            return 0;
        }
        if let Some(&v) = memo.get(&(i, used)) {
            return v;
        }
        let mut best = go(i + 1, used, adj, memo);
        for &r in &adj[i] {
            if used & (1 << r) == 0 {
                best = best.max(1 + go(i + 1, used | (1 << r), adj, memo));
            }
        }
        memo.insert((i, used), best);
        best
    }
    assert!(n_right <= 32);
    go(0, 0, adj, &mut HashMap::new())
}

/// Random bipartite instance with up to 12 × 12 vertices.
pub fn random_bipartite(seed: u64) -> (Vec<Vec<u32>>, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nl = rng.gen_range(1..=12);
    let nr = rng.gen_range(1..=12);
    let density: f64 = rng.gen_range(0.05..0.6);
    let adj = (0..nl)
        .map(|_| (0..nr as u32).filter(|_| rng.gen_bool(density)).collect())
        .collect();
    (adj, nr)
}

// -------------------------------------------------------------- simulation

/// Forward propagation of signal identities through configured
/// multiplexers. Every OPIN drives its own identity; a node with fan-in ≥ 2
/// forwards only its selected input, a node with fan-in 1 is a fixed wire.
/// Returns trace input → OPIN for every trace input that receives a signal,
/// plus every node that carries a select more than once.
pub fn propagate(rrg: &RoutingResourceGraph, cfg: &DebugConfig) -> (BTreeMap<NodeId, NodeId>, Vec<NodeId>) {
    let mut sel: HashMap<NodeId, NodeId> = HashMap::new();
    let mut double = Vec::new();
    for s in &cfg.mux_selects {
        if sel.insert(s.node, s.input).is_some() {
            double.push(s.node);
        }
    }
    let mut val: HashMap<NodeId, NodeId> = HashMap::new();
    let mut queue: VecDeque<NodeId> = VecDeque::new();
    for id in rrg.ids().filter(|&id| rrg.node(id).kind == NodeKind::Opin) {
        val.insert(id, id);
        queue.push_back(id);
    }
    while let Some(u) = queue.pop_front() {
        let v = val[&u];
        for &w in rrg.fanout(u) {
            let passes = rrg.fanin(w).len() == 1 || sel.get(&w) == Some(&u);
            if passes && !val.contains_key(&w) {
                val.insert(w, v);
                queue.push_back(w);
            }
        }
    }
    let arrived = rrg
        .trace_inputs()
        .into_iter()
        .filter_map(|t| val.get(&t).map(|&o| (t, o)))
        .collect();
    (arrived, double)
}

/// Shortest OPIN → node path length (in nodes, both ends included) over
/// nodes allowed by `ok`.
pub fn bfs_len(rrg: &RoutingResourceGraph, from: NodeId, to: NodeId, ok: impl Fn(NodeId) -> bool) -> Option<usize> {
    let mut dist = HashMap::from([(from, 1usize)]);
    let mut q = VecDeque::from([from]);
    while let Some(u) = q.pop_front() {
        if u == to {
            return Some(dist[&u]);
        }
        for &w in rrg.fanout(u) {
            if (w == to || ok(w)) && !dist.contains_key(&w) {
                dist.insert(w, dist[&u] + 1);
                q.push_back(w);
            }
        }
    }
    None
}

// ------------------------------------------------------------ trigger SA

/// A tiny user circuit every fixture trigger taps.
pub fn tap_source() -> Netlist {
    parse_netlist(
        ".model user\n.inputs a b c d\n.outputs y\n.names a b p\n11 1\n.names c d q\n10 1\n.names p q y\n01 1\n.end\n",
        "user.blif",
    )
    .unwrap()
}

pub struct SaFixture {
    pub fabric: OverlayFabric,
    pub trig: TriggerNetlist,
    /// Feed reachability: per tap, per cell; per global slot.
    pub reach: Option<(Vec<Vec<bool>>, Vec<bool>)>,
}

/// A random fabric with at most 8 slots and a trigger of at most 4 LEs.
pub fn sa_fixture(seed: u64) -> SaFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_les = rng.gen_range(2..=4);
    let trig = gen_trigger(seed, n_les, &tap_source()).unwrap();
    let n_cells = rng.gen_range(2..=4);
    let mut budget = 8usize;
    let mut cells = Vec::new();
    for c in 0..n_cells {
        let left = n_cells - c - 1;
        let hi = (budget - left).min(3);
        let n = rng.gen_range(1..=hi);
        budget -= n;
        let slots = (0..n)
            .map(|b| SpareSlot { ble: b as u16, source: NodeId(0), opin: NodeId(0), output_ok: rng.gen_bool(0.85) })
            .collect();
        let inputs = (0..rng.gen_range(0..=2)).map(|_| NodeId(0)).collect();
        cells.push(OverlayCell { x: 1 + c as u16 % 2, y: 1 + c as u16 / 2, slots, inputs });
    }
    // Top up so the trigger always fits.
    while cells.iter().map(|c| c.slots.len()).sum::<usize>() < n_les {
        let c = cells.iter_mut().find(|c| c.slots.len() < 3).unwrap();
        let b = c.slots.len() as u16;
        c.slots.push(SpareSlot { ble: b, source: NodeId(0), opin: NodeId(0), output_ok: true });
    }
    let mut links = Vec::new();
    for (ci, c) in cells.iter().enumerate() {
        for s in c.slots.iter().filter(|s| s.output_ok) {
            for d in 0..cells.len() {
                if d != ci && rng.gen_bool(0.35) {
                    links.push(OverlayLink {
                        src_cell: ci as u32,
                        src_ble: s.ble,
                        dst_cell: d as u32,
                        dst_pin: NodeId(0),
                        path: vec![],
                    });
                }
            }
        }
    }
    let reach = rng.gen_bool(0.5).then(|| {
        let taps = trig.taps().len();
        let slots: usize = cells.iter().map(|c| c.slots.len()).sum();
        (
            (0..taps).map(|_| (0..cells.len()).map(|_| rng.gen_bool(0.7)).collect()).collect(),
            (0..slots).map(|_| rng.gen_bool(0.7)).collect(),
        )
    });
    SaFixture { fabric: OverlayFabric { link_budget: 0, cells, links }, trig, reach }
}

impl SaFixture {
    pub fn problem(&self, params: &SaParams) -> TriggerProblem {
        let p = TriggerProblem::new(&self.fabric, &self.trig, params).unwrap();
        match &self.reach {
            Some((taps, roots)) => p.with_feed_reach(taps, roots).unwrap(),
            None => p,
        }
    }

    /// Global slots as `(cell, ble, output usable)`, cells in order.
    pub fn slots(&self) -> Vec<(usize, u16, bool)> {
        let mut out = Vec::new();
        for (ci, c) in self.fabric.cells.iter().enumerate() {
            for s in &c.slots {
                out.push((ci, s.ble, s.output_ok));
            }
        }
        out
    }

    /// Cost of placing LE `i` (in `les()` order) at global slot `sites[i]`,
    /// computed straight from the model definition.
    pub fn oracle_cost(&self, sites: &[u32], params: &SaParams) -> i64 {
        let (blk, ind, feed) = (params.gamma_blk as i64, params.gamma_ind as i64, params.gamma_feed as i64);
        let slots = self.slots();
        let net = &self.trig.netlist;
        let les = self.trig.les();
        let taps = self.trig.taps();
        let slot_of = |b| slots[sites[les.iter().position(|&l| l == b).unwrap()] as usize];
        let occupied: HashSet<u32> = sites.iter().copied().collect();
        let link = |cell: usize, ble: u16, to: usize| {
            self.fabric.links.iter().any(|l| l.src_cell as usize == cell && l.src_ble == ble && l.dst_cell as usize == to)
        };
        let inputs = |cell: usize| self.fabric.cells[cell].inputs.len();
        let mut cost = 0;
        for n in &net.nets {
            let drv = n.driver;
            for s in &n.sinks {
                let sink = s.block;
                cost += if net.block(sink).kind == BlockKind::Output {
                    let a = slot_of(drv);
                    let g = sites[les.iter().position(|&l| l == drv).unwrap()] as usize;
                    match (a.2, &self.reach) {
                        (false, _) => blk,
                        (true, Some((_, roots))) if !roots[g] => feed,
                        _ => 0,
                    }
                } else if net.block(drv).kind == BlockKind::Input {
                    let t = taps.iter().position(|&x| x == drv).unwrap();
                    let cell = slot_of(sink).0;
                    match (inputs(cell), &self.reach) {
                        (0, _) => blk,
                        (_, Some((tc, _))) if !tc[t][cell] => feed,
                        _ => 0,
                    }
                } else {
                    let (a, b) = (slot_of(drv), slot_of(sink));
                    if a.0 == b.0 {
                        0
                    } else if !a.2 || inputs(b.0) == 0 {
                        blk
                    } else if link(a.0, a.1, b.0) {
                        1
                    } else {
                        // One free route-through slot: a sibling of the
                        // driver, or a slot one link away, linked onward.
                        let through = slots.iter().enumerate().any(|(r, &(rc, rb, _))| {
                            !occupied.contains(&(r as u32))
                                && link(rc, rb, b.0)
                                && (rc == a.0 || link(a.0, a.1, rc))
                        });
                        if through { ind } else { blk }
                    }
                };
            }
        }
        cost
    }

    /// Minimum oracle cost over every injective placement.
    pub fn exhaustive_min(&self, params: &SaParams) -> i64 {
        let n = self.trig.les().len();
        let m = self.slots().len();
        let mut best = i64::MAX;
        let mut sites = Vec::with_capacity(n);
        each_injection(n, m, &mut sites, &mut |s| best = best.min(self.oracle_cost(s, params)));
        best
    }
}

/// Calls `f` on every injective map `0..n → 0..m`.
pub fn each_injection(n: usize, m: usize, cur: &mut Vec<u32>, f: &mut dyn FnMut(&[u32])) {
    if cur.len() == n {
        f(cur);
        return;
    }
    for s in 0..m as u32 {
        if !cur.contains(&s) {
            cur.push(s);
            each_injection(n, m, cur, f);
            cur.pop();
        }
    }
}

/// Runs fixture `i` with annealing seed `i` for `i in 0..runs`, returning
/// how many runs ended at the exhaustive minimum.
pub fn sa_optimality(runs: u64) -> u64 {
    let params = SaParams::default();
    (0..runs)
        .filter(|&i| {
            let f = sa_fixture(i);
            let p = f.problem(&params);
            p.anneal(&params, i).cost == f.exhaustive_min(&params)
        })
        .count() as u64
}
