// SPDX-License-Identifier: Apache-2.0
//! Debug-time trigger mapping: anneal, realize connections over links, then
//! route input and output feeds over what is still free.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::anneal::{Anneal, SaParams, Term, TriggerProblem};
use super::fabric::OverlayFabric;
use crate::circuits::{BlockKind, TriggerNetlist};
use crate::debug::hopcroft_karp;
use crate::error::{Error, Result};
use crate::fabric::{NodeId, NodeKind, ResourceMask, RoutingResourceGraph};
use crate::par::Exec;
use crate::pnr::{route_requests, RouteNode, RouteRequest, RouterParams};
use crate::trace::SignalSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SlotRef {
    pub cell: u32,
    pub ble: u16,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeSite {
    pub le: String,
    pub cell: u32,
    pub ble: u16,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Realization {
    /// Both ends in one cell, through the local crossbar.
    Intra,
    /// One pre-routed link.
    Link { link: u32 },
    /// Through one route-through LE: either a sibling in the driver's cell
    /// and its link, or a first link, the route-through, and a second link.
    Indirect {
        links: Vec<u32>,
        route_through: Vec<SlotRef>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappedConnection {
    pub driver: String,
    pub sink: String,
    pub cost: u32,
    /// `None` when no chain could be realized (infeasible mapping).
    pub realization: Option<Realization>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteThrough {
    pub slot: SlotRef,
    pub driver: String,
}

/// Route from a user signal's output pin to input pins of the cells that
/// consume it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputFeed {
    pub signal: String,
    pub cells: Vec<u32>,
    pub tree: Vec<RouteNode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFeed {
    pub control_pin: NodeId,
    pub tree: Vec<RouteNode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerMapping {
    pub trigger: String,
    pub feasible: bool,
    pub cost: i64,
    pub blocked_terms: usize,
    /// LEs involved in blocked terms or unrealizable connections.
    pub violating_les: Vec<String>,
    pub sites: Vec<LeSite>,
    pub route_throughs: Vec<RouteThrough>,
    pub connections: Vec<MappedConnection>,
    pub input_feeds: Vec<InputFeed>,
    pub failed_inputs: Vec<String>,
    pub output_feed: Option<OutputFeed>,
    pub seed: u64,
    /// Best-so-far cost after each temperature of the winning run.
    pub history: Vec<i64>,
}

/// Everything a debug-time mapping needs from the compiled design.
pub struct MapContext<'a> {
    pub rrg: &'a RoutingResourceGraph,
    /// Occupancy after user routing and any overlays.
    pub mask: &'a ResourceMask,
    pub sources: &'a [SignalSource],
    pub fabric: &'a OverlayFabric,
}

/// Connection realizations for one assignment. Route-through slots are
/// handed out by maximum matching over (driver, target cell) pairs; a slot
/// forwards for one driver only.
struct Realized {
    /// Per LE → LE connection (in `TriggerProblem::conns` order, other kinds
    /// skipped); `None` if no chain exists.
    per_conn: Vec<Option<Realization>>,
    rt_owner: BTreeMap<SlotRef, u32>,
    /// LEs on unrealizable connections.
    failed: BTreeSet<u32>,
}

fn realize(
    fabric: &OverlayFabric,
    links_from: &HashMap<SlotRef, Vec<u32>>,
    problem: &TriggerProblem,
    sites: &[u32],
) -> Realized {
    let site = |le: u32| {
        let (cell, ble) = problem.slot(sites[le as usize]);
        SlotRef { cell, ble }
    };
    let slot_index: HashMap<SlotRef, u32> = (0..problem.num_slots() as u32)
        .map(|s| {
            let (cell, ble) = problem.slot(s);
            (SlotRef { cell, ble }, s)
        })
        .collect();
    let occupied: HashSet<SlotRef> = (0..problem.num_les() as u32).map(site).collect();
    let link_to = |from: SlotRef, target: u32| {
        links_from
            .get(&from)?
            .iter()
            .copied()
            .find(|&l| fabric.links[l as usize].dst_cell == target)
    };

    // Direct links first; collect the pairs that need a route-through.
    let mut chains: BTreeMap<(u32, u32), Option<Vec<u32>>> = BTreeMap::new();
    let mut options: BTreeMap<(u32, u32), Vec<(SlotRef, Vec<u32>)>> = BTreeMap::new();
    for c in &problem.conns {
        let Term::Le(v) = c.to else { continue };
        let (su, target) = (site(c.from), site(v).cell);
        let key = (c.from, target);
        if su.cell == target || chains.contains_key(&key) || options.contains_key(&key) {
            continue;
        }
        if let Some(l) = link_to(su, target) {
            chains.insert(key, Some(vec![l]));
            continue;
        }
        let mut opts = Vec::new();
        let free = |r: &SlotRef| !occupied.contains(r);
        for sl in &fabric.cells[su.cell as usize].slots {
            let r = SlotRef {
                cell: su.cell,
                ble: sl.ble,
            };
            if let Some(l) = link_to(r, target).filter(|_| free(&r)) {
                opts.push((r, vec![l]));
            }
        }
        for &l1 in links_from.get(&su).into_iter().flatten() {
            let mid = fabric.links[l1 as usize].dst_cell;
            for sl in &fabric.cells[mid as usize].slots {
                let r = SlotRef {
                    cell: mid,
                    ble: sl.ble,
                };
                if let Some(l2) = link_to(r, target).filter(|_| free(&r)) {
                    opts.push((r, vec![l1, l2]));
                }
            }
        }
        options.insert(key, opts);
    }

    let pairs: Vec<(u32, u32)> = options.keys().copied().collect();
    let adj: Vec<Vec<u32>> = pairs
        .iter()
        .map(|k| options[k].iter().map(|(r, _)| slot_index[r]).collect())
        .collect();
    let left: Vec<u32> = (0..pairs.len() as u32).collect();
    let matched = hopcroft_karp(&adj, &left, problem.num_slots());
    let mut rt_owner = BTreeMap::new();
    let mut leftover = Vec::new();
    for (i, m) in matched.into_iter().enumerate() {
        let key = pairs[i];
        match m.and_then(|s| options[&key].iter().find(|(r, _)| slot_index[r] == s)) {
            Some((r, chain)) => {
                rt_owner.insert(*r, key.0);
                chains.insert(key, Some(chain.clone()));
            }
            None => leftover.push(key),
        }
    }
    // Unmatched pairs may still share a slot that already forwards for the
    // same driver.
    for key in leftover {
        let chain = options[&key]
            .iter()
            .find(|(r, _)| rt_owner.get(r) == Some(&key.0))
            .map(|(_, ch)| ch.clone());
        chains.insert(key, chain);
    }

    let mut per_conn = Vec::new();
    let mut failed = BTreeSet::new();
    for c in &problem.conns {
        let Term::Le(v) = c.to else { continue };
        let (su, sv) = (site(c.from), site(v));
        if su.cell == sv.cell {
            per_conn.push(Some(Realization::Intra));
            continue;
        }
        per_conn.push(match &chains[&(c.from, sv.cell)] {
            Some(ls) => {
                let last = &fabric.links[*ls.last().unwrap() as usize];
                let fwd = SlotRef {
                    cell: last.src_cell,
                    ble: last.src_ble,
                };
                if fwd == su {
                    Some(Realization::Link { link: ls[0] })
                } else {
                    Some(Realization::Indirect {
                        links: ls.clone(),
                        route_through: vec![fwd],
                    })
                }
            }
            None => {
                failed.insert(c.from);
                failed.insert(v);
                None
            }
        });
    }
    Realized {
        per_conn,
        rt_owner,
        failed,
    }
}

/// Model cost with every unrealizable connection charged as blocked.
fn exact_cost(problem: &TriggerProblem, r: &Realized, sites: &[u32]) -> i64 {
    let costs = problem.conn_costs(sites);
    let mut cost: i64 = costs.iter().sum();
    let le_conns = problem
        .conns
        .iter()
        .zip(&costs)
        .filter(|(c, _)| matches!(c.to, Term::Le(_)));
    for ((_, &k), real) in le_conns.zip(&r.per_conn) {
        if real.is_none() {
            cost += problem.gamma_blk - k.min(problem.gamma_blk);
        }
    }
    cost
}

/// Greedy quench on the exact cost: relocate or swap LEs touching an
/// unrealizable connection while that strictly lowers the cost.
/// Model-blocked terms, plus connections the model prices as reachable but
/// realization could not chain.
fn blocked_total(problem: &TriggerProblem, r: &Realized, sites: &[u32]) -> usize {
    let costs = problem.conn_costs(sites);
    let unrealized = costs
        .iter()
        .zip(&problem.conns)
        .filter(|(_, c)| matches!(c.to, Term::Le(_)))
        .zip(&r.per_conn)
        .filter(|((&k, _), r)| r.is_none() && k < problem.gamma_blk)
        .count();
    costs.iter().filter(|&&k| k >= problem.gamma_blk).count() + unrealized
}

/// Anneal-and-realize rounds before a mapping is reported infeasible.
const ATTEMPTS: u64 = 4;

fn repair(
    fabric: &OverlayFabric,
    links_from: &HashMap<SlotRef, Vec<u32>>,
    problem: &TriggerProblem,
    sites: &mut [u32],
) {
    const ROUNDS: usize = 8;
    let mut r = realize(fabric, links_from, problem, sites);
    let mut cost = exact_cost(problem, &r, sites);
    for _ in 0..ROUNDS {
        if r.failed.is_empty() {
            return;
        }
        let mut best: Option<(i64, Vec<u32>)> = None;
        for &le in &r.failed {
            for to in 0..problem.num_slots() as u32 {
                let from = sites[le as usize];
                if to == from {
                    continue;
                }
                let mut cand = sites.to_vec();
                if let Some(o) = cand.iter().position(|&s| s == to) {
                    cand[o] = from;
                }
                cand[le as usize] = to;
                let rc = realize(fabric, links_from, problem, &cand);
                let c = exact_cost(problem, &rc, &cand);
                if c < best.as_ref().map_or(cost, |b| b.0) {
                    best = Some((c, cand));
                }
            }
        }
        let Some((c, cand)) = best else { return };
        sites.copy_from_slice(&cand);
        cost = c;
        r = realize(fabric, links_from, problem, sites);
    }
}

/// Maps `trig` onto the fabric. Feeds are only routed for feasible
/// placements; per-input feed failures are reported, not fatal.
pub fn map_trigger(
    ctx: &MapContext,
    trig: &TriggerNetlist,
    params: &SaParams,
    exec: Exec,
) -> Result<TriggerMapping> {
    let k = ctx.rrg.arch().lut_size_k;
    let net = &trig.netlist;
    if let Some(b) = net
        .blocks
        .iter()
        .find(|b| b.kind == BlockKind::Lut && b.inputs.len() > k)
    {
        return Err(Error::Capacity(format!(
            "trigger LUT `{}` has {} inputs, K = {k}",
            b.name,
            b.inputs.len()
        )));
    }
    let fabric = ctx.fabric;
    let (tap_cells, root_slots) = feed_reach(ctx, trig)?;
    let plain = TriggerProblem::new(fabric, trig, params)?;
    let problem = TriggerProblem::new(fabric, trig, params)?.with_feed_reach(&tap_cells, &root_slots)?;
    let mut links_from: HashMap<SlotRef, Vec<u32>> = HashMap::new();
    for (i, l) in fabric.links.iter().enumerate() {
        links_from
            .entry(SlotRef {
                cell: l.src_cell,
                ble: l.src_ble,
            })
            .or_default()
            .push(i as u32);
    }
    // Route-through contention is invisible to the annealer; when it leaves
    // connections unrealized, anneal again. Feed penalties crowd LEs into
    // few cells, so attempts alternate between the full model and one
    // without them (feasibility comes first), then move to the next seed.
    // Every candidate is scored on the full model.
    let mut chosen: Option<(usize, i64, Anneal, Vec<u32>, Realized)> = None;
    for attempt in 0..ATTEMPTS {
        let p = SaParams {
            seed: params.seed + attempt / 2 * params.restarts as u64,
            ..params.clone()
        };
        let search = if attempt % 2 == 0 { &problem } else { &plain };
        let best = search.solve(&p, exec);
        let mut sites = best.sites.clone();
        repair(fabric, &links_from, &problem, &mut sites);
        let real = realize(fabric, &links_from, &problem, &sites);
        let key = (
            blocked_total(&problem, &real, &sites),
            exact_cost(&problem, &real, &sites),
        );
        if chosen.as_ref().is_none_or(|c| key < (c.0, c.1)) {
            chosen = Some((key.0, key.1, best, sites, real));
        }
        if key.0 == 0 {
            break;
        }
        log::debug!("attempt {attempt}: {} blocked terms after realization", key.0);
    }
    let (blocked_terms, cost, best, sites, real) = chosen.expect("at least one attempt");

    let name = |le: u32| net.block(problem.les[le as usize]).name.clone();
    let mut violating: BTreeSet<u32> = problem.blocked_les(&sites).into_iter().collect();
    violating.extend(&real.failed);
    let costs = problem.conn_costs(&sites);
    let le_conns = problem
        .conns
        .iter()
        .zip(&costs)
        .filter_map(|(c, &k)| match c.to {
            Term::Le(v) => Some((c, v, k)),
            _ => None,
        });
    let connections = le_conns
        .zip(&real.per_conn)
        .map(|((c, v, k), r)| MappedConnection {
            driver: name(c.from),
            sink: name(v),
            cost: if r.is_some() { k } else { problem.gamma_blk } as u32,
            realization: r.clone(),
        })
        .collect();
    let feasible = blocked_terms == 0;
    debug_assert_eq!(feasible, violating.is_empty());

    let mut mapping = TriggerMapping {
        trigger: net.name.clone(),
        feasible,
        cost,
        blocked_terms,
        violating_les: violating.iter().map(|&l| name(l)).collect(),
        sites: (0..problem.num_les() as u32)
            .map(|le| {
                let (cell, ble) = problem.slot(sites[le as usize]);
                LeSite {
                    le: name(le),
                    cell,
                    ble,
                }
            })
            .collect(),
        route_throughs: real
            .rt_owner
            .iter()
            .map(|(&slot, &d)| RouteThrough {
                slot,
                driver: name(d),
            })
            .collect(),
        connections,
        input_feeds: Vec::new(),
        failed_inputs: Vec::new(),
        output_feed: None,
        seed: best.seed,
        history: best.history.clone(),
    };
    if feasible {
        route_feeds(ctx, trig, &mut mapping, params.seed)?;
    } else {
        log::warn!(
            "trigger `{}` is infeasible: {:?}",
            mapping.trigger,
            mapping.violating_les
        );
    }
    Ok(mapping)
}

/// Nodes feeds may not use: anything not FREE, plus the fabric itself.
fn feed_blocked(ctx: &MapContext) -> Vec<bool> {
    let mut blocked = ctx.mask.blocked();
    for n in ctx.fabric.nodes() {
        blocked[n.idx()] = true;
    }
    blocked
}

/// Which cells each tapped signal can reach over FREE nodes, and which
/// spare slots can reach a free control pin; one graph search per tap plus
/// one backward search from the control pins.
fn feed_reach(ctx: &MapContext, trig: &TriggerNetlist) -> Result<(Vec<Vec<bool>>, Vec<bool>)> {
    let (rrg, fabric) = (ctx.rrg, ctx.fabric);
    let blocked = feed_blocked(ctx);
    let opin_of: HashMap<&str, NodeId> = ctx.sources.iter().map(|s| (s.name.as_str(), s.opin)).collect();
    let search = |starts: &[NodeId], forward: bool| -> Vec<bool> {
        let mut seen = vec![false; rrg.len()];
        let mut queue: VecDeque<NodeId> = starts.iter().copied().collect();
        for &s in starts {
            seen[s.idx()] = true;
        }
        while let Some(u) = queue.pop_front() {
            let next = if forward { rrg.fanout(u) } else { rrg.fanin(u) };
            for &v in next {
                if !blocked[v.idx()] && !seen[v.idx()] {
                    seen[v.idx()] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    };
    let mut tap_cells = Vec::new();
    for tap in trig.taps() {
        let name = trig.netlist.block(tap).name.as_str();
        let &opin = opin_of.get(name).ok_or_else(|| Error::UnknownSignal(name.to_string()))?;
        let seen = search(&[opin], true);
        tap_cells.push(
            fabric
                .cells
                .iter()
                .map(|c| c.inputs.iter().any(|p| !blocked[p.idx()] && seen[p.idx()]))
                .collect(),
        );
    }
    let pins: Vec<NodeId> = rrg.control_pins().into_iter().filter(|p| !blocked[p.idx()]).collect();
    let back = search(&pins, false);
    let root_slots: Vec<bool> = fabric
        .cells
        .iter()
        .flat_map(|c| c.slots.iter())
        .map(|s| rrg.fanout(s.opin).iter().any(|v| back[v.idx()]))
        .collect();
    Ok((tap_cells, root_slots))
}

/// Routes the output feed and every input feed together with negotiated
/// congestion; if that fails, routes them one at a time (output first) and
/// records the ones that do not fit.
fn route_feeds(
    ctx: &MapContext,
    trig: &TriggerNetlist,
    m: &mut TriggerMapping,
    seed: u64,
) -> Result<()> {
    let (rrg, fabric) = (ctx.rrg, ctx.fabric);
    let net = &trig.netlist;
    let mut blocked = feed_blocked(ctx);
    let cell_of: HashMap<&str, u32> = m.sites.iter().map(|s| (s.le.as_str(), s.cell)).collect();
    let opin_of: HashMap<&str, NodeId> = ctx
        .sources
        .iter()
        .map(|s| (s.name.as_str(), s.opin))
        .collect();

    // Request 0 is the output feed (if any control pin is free).
    let mut reqs = Vec::new();
    let root = net.block(trig.root()).name.as_str();
    let site = m
        .sites
        .iter()
        .find(|s| s.le == root)
        .expect("root is placed");
    let slot = fabric.cells[site.cell as usize]
        .slot(site.ble)
        .expect("site is a spare slot");
    let pins: Vec<NodeId> = rrg
        .control_pins()
        .into_iter()
        .filter(|p| !blocked[p.idx()])
        .collect();
    let has_out = !pins.is_empty();
    if has_out {
        reqs.push(RouteRequest {
            name: "trigger_out".into(),
            source: slot.opin,
            sinks: vec![pins],
        });
    }
    let mut feeds = Vec::new();
    for tap in trig.taps() {
        let b = net.block(tap);
        let Some(out) = b.output else { continue };
        let Some(&opin) = opin_of.get(b.name.as_str()) else {
            return Err(Error::UnknownSignal(b.name.clone()));
        };
        let cells: BTreeSet<u32> = net
            .net(out)
            .sinks
            .iter()
            .map(|p| cell_of[net.block(p.block).name.as_str()])
            .collect();
        let groups: Vec<Vec<NodeId>> = cells
            .iter()
            .map(|&c| {
                fabric.cells[c as usize]
                    .inputs
                    .iter()
                    .filter(|p| !blocked[p.idx()])
                    .filter_map(|&p| rrg.sink_of_ipin(p))
                    .collect()
            })
            .collect();
        if groups.iter().any(|g| g.is_empty()) {
            m.failed_inputs.push(b.name.clone());
            continue;
        }
        feeds.push((b.name.clone(), cells.into_iter().collect::<Vec<u32>>()));
        reqs.push(RouteRequest {
            name: b.name.clone(),
            source: opin,
            sinks: groups,
        });
    }

    let trees: Vec<Option<Vec<RouteNode>>> = match route_requests(
        rrg,
        &reqs,
        Some(&blocked),
        &RouterParams::with_seed(seed),
        None,
    ) {
        Ok(out) => out.trees.into_iter().map(Some).collect(),
        Err(e) => {
            log::debug!("joint feed routing failed ({e}); routing feeds one by one");
            let single = RouterParams {
                max_iters: 1,
                ..RouterParams::with_seed(seed)
            };
            reqs.iter()
                .map(|req| {
                    let out = route_requests(
                        rrg,
                        std::slice::from_ref(req),
                        Some(&blocked),
                        &single,
                        None,
                    )
                    .ok()?;
                    let tree = out.trees.into_iter().next()?;
                    for rn in &tree {
                        blocked[rn.node.idx()] = true;
                    }
                    Some(tree)
                })
                .collect()
        }
    };
    let mut trees = trees.into_iter();
    if has_out {
        if let Some(tree) = trees.next().flatten() {
            let control_pin = tree
                .iter()
                .map(|rn| rn.node)
                .find(|&n| rrg.node(n).kind == NodeKind::TbIpin);
            m.output_feed = control_pin.map(|control_pin| OutputFeed { control_pin, tree });
        }
    }
    for ((signal, cells), tree) in feeds.into_iter().zip(trees) {
        match tree {
            Some(tree) => m.input_feeds.push(InputFeed {
                signal,
                cells,
                tree,
            }),
            None => m.failed_inputs.push(signal),
        }
    }
    m.failed_inputs.sort();
    if m.output_feed.is_none() {
        log::warn!(
            "trigger `{}`: no route to a trace-buffer control pin",
            m.trigger
        );
    }
    if !m.failed_inputs.is_empty() {
        log::warn!(
            "trigger `{}`: input feeds failed for {:?}",
            m.trigger,
            m.failed_inputs
        );
    }
    Ok(())
}
