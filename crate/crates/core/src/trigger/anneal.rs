// SPDX-License-Identifier: Apache-2.0
//! Simulated-annealing placement of trigger LEs onto overlay cells.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fabric::OverlayFabric;
use crate::circuits::{BlockId, BlockKind, TriggerNetlist};
use crate::error::{Error, Result};
use crate::par::Exec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaParams {
    pub seed: u64,
    /// Initial temperature = `t0_factor` · stddev of random-move costs.
    pub t0_factor: f64,
    /// Geometric cooling rate in the productive acceptance band; faster
    /// while nearly every move is accepted or nearly none are.
    pub cooling: f64,
    /// Moves per temperature = `moves_per_le` · |LEs|.
    pub moves_per_le: usize,
    /// Annealing stops below this temperature.
    pub t_min: f64,
    /// Annealing also stops once the best cost has not improved for this
    /// many temperatures at which small cost differences are discriminated.
    #[serde(default = "default_stall")]
    pub stall_temps: usize,
    /// Penalty for a connection through route-through LEs or chained links.
    pub gamma_ind: u32,
    /// Penalty for a connection that cannot leave or enter its cell.
    pub gamma_blk: u32,
    /// Penalty for a feed (tapped signal in, root out) that has pins but no
    /// free path; steers placement without making it infeasible.
    #[serde(default = "default_feed")]
    pub gamma_feed: u32,
    /// Independent runs with seeds `seed, seed+1, …`; the best one wins.
    pub restarts: usize,
}

fn default_stall() -> usize {
    10
}

fn default_feed() -> u32 {
    50
}

impl Default for SaParams {
    fn default() -> Self {
        SaParams {
            seed: 1,
            t0_factor: 20.0,
            cooling: 0.95,
            moves_per_le: 100,
            t_min: 0.05,
            stall_temps: default_stall(),
            gamma_ind: 5,
            gamma_blk: 10_000,
            gamma_feed: default_feed(),
            restarts: 1,
        }
    }
}

impl SaParams {
    pub fn with_seed(seed: u64) -> Self {
        SaParams {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_blk > self.gamma_ind && self.gamma_ind > 1) {
            return Err(Error::validation(
                "penalties must satisfy gamma_blk > gamma_ind > 1",
            ));
        }
        if self.gamma_feed >= self.gamma_blk {
            return Err(Error::validation("gamma_feed must be below gamma_blk"));
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            return Err(Error::validation("cooling rate must lie in (0, 1)"));
        }
        if self.moves_per_le == 0 || self.restarts == 0 {
            return Err(Error::validation(
                "moves_per_le and restarts must be positive",
            ));
        }
        if !(self.t0_factor > 0.0 && self.t_min > 0.0) {
            return Err(Error::validation("temperatures must be positive"));
        }
        Ok(())
    }
}

/// Cost-relevant connection of the trigger netlist.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Term {
    /// LE → LE.
    Le(u32),
    /// The root LE drives the trace-buffer control pin.
    Out,
    /// A user signal (by tap index) enters the LE's cell.
    In(u32),
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Conn {
    pub from: u32,
    pub to: Term,
}

impl Conn {
    fn touches(&self, le: u32) -> bool {
        self.from == le || self.to == Term::Le(le)
    }
}

const EMPTY: u32 = u32::MAX;

/// A trigger netlist bound to a fabric, with everything the cost function
/// needs precomputed.
///
/// Cost of an LE → LE connection: 0 inside one cell; `gamma_blk` if the
/// driver's output pin is unusable or the sink's cell has no input pin; 1
/// over a direct link from the driver's slot; `gamma_ind` through one
/// currently unoccupied route-through slot (a sibling in the driver's cell
/// that owns a link to the sink's cell, or a slot one link away that does);
/// `gamma_blk` otherwise.
/// The root output and every tapped user signal add `gamma_blk` when their
/// pin is unusable and, with [`TriggerProblem::with_feed_reach`],
/// `gamma_feed` when the pin is usable but no FREE path exists.
pub struct TriggerProblem {
    pub(crate) les: Vec<BlockId>,
    pub(crate) conns: Vec<Conn>,
    le_conns: Vec<Vec<u32>>,
    /// Global slot → (cell, ble, output usable).
    pub(crate) slots: Vec<(u32, u16, bool)>,
    cell_slots: Vec<Vec<u32>>,
    cell_inputs: Vec<usize>,
    n_cells: usize,
    /// `in_cost[tap * n_cells + cell]`: the tapped signal entering the cell.
    in_cost: Vec<i64>,
    /// Per slot: driving the trace-buffer control pin from it.
    root_cost: Vec<i64>,
    gamma_feed: i64,
    /// `direct[slot * n_cells + cell]`: a link runs from the slot to the cell.
    direct: Vec<bool>,
    /// Route-through slots for `slot → cell`, in CSR form over the same index.
    via_start: Vec<u32>,
    via: Vec<u32>,
    /// Per cell, every cell with its distance, nearest first.
    near: Vec<Vec<(u32, u32)>>,
    max_dist: u32,
    gamma_ind: i64,
    pub(crate) gamma_blk: i64,
}

/// Result of one annealing run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Anneal {
    pub seed: u64,
    pub cost: i64,
    /// LE (in `TriggerNetlist::les` order) → global slot.
    pub sites: Vec<u32>,
    /// Best-so-far cost after each temperature.
    pub history: Vec<i64>,
    pub moves: u64,
}

impl TriggerProblem {
    pub fn new(fabric: &OverlayFabric, trig: &TriggerNetlist, params: &SaParams) -> Result<Self> {
        params.validate()?;
        let net = &trig.netlist;
        let les = trig.les();
        let total = fabric.total_slots();
        if les.len() > total {
            return Err(Error::Capacity(format!(
                "trigger has {} LEs but the overlay offers {total} spare slots",
                les.len()
            )));
        }
        let taps: HashMap<BlockId, u32> = trig
            .taps()
            .into_iter()
            .enumerate()
            .map(|(i, b)| (b, i as u32))
            .collect();
        let index: HashMap<BlockId, u32> = les
            .iter()
            .enumerate()
            .map(|(i, &b)| (b, i as u32))
            .collect();
        let mut conns = Vec::new();
        for n in &net.nets {
            let drv = net.block(n.driver);
            for s in &n.sinks {
                match (drv.kind, net.block(s.block).kind) {
                    (_, BlockKind::Output) => conns.push(Conn {
                        from: index[&n.driver],
                        to: Term::Out,
                    }),
                    (BlockKind::Input, _) => conns.push(Conn {
                        from: index[&s.block],
                        to: Term::In(taps[&n.driver]),
                    }),
                    _ => conns.push(Conn {
                        from: index[&n.driver],
                        to: Term::Le(index[&s.block]),
                    }),
                }
            }
        }
        let mut le_conns = vec![Vec::new(); les.len()];
        for (i, c) in conns.iter().enumerate() {
            le_conns[c.from as usize].push(i as u32);
            if let Term::Le(v) = c.to {
                if v != c.from {
                    le_conns[v as usize].push(i as u32);
                }
            }
        }

        let nc = fabric.cells.len();
        let mut slots = Vec::with_capacity(total);
        let mut cell_slots = vec![Vec::new(); nc];
        let mut slot_of: HashMap<(u32, u16), u32> = HashMap::new();
        for (ci, c) in fabric.cells.iter().enumerate() {
            for s in &c.slots {
                slot_of.insert((ci as u32, s.ble), slots.len() as u32);
                cell_slots[ci].push(slots.len() as u32);
                slots.push((ci as u32, s.ble, s.output_ok));
            }
        }
        let cell_inputs: Vec<usize> = fabric.cells.iter().map(|c| c.inputs.len()).collect();
        let blk = params.gamma_blk as i64;
        let in_cost = (0..taps.len())
            .flat_map(|_| cell_inputs.iter().map(|&k| if k > 0 { 0 } else { blk }))
            .collect();
        let root_cost = slots.iter().map(|s| if s.2 { 0 } else { blk }).collect();

        let mut direct = vec![false; slots.len() * nc];
        let mut out_cells: Vec<Vec<u32>> = vec![Vec::new(); slots.len()];
        for l in &fabric.links {
            if let Some(&s) = slot_of.get(&(l.src_cell, l.src_ble)) {
                direct[s as usize * nc + l.dst_cell as usize] = true;
                out_cells[s as usize].push(l.dst_cell);
            }
        }
        for v in out_cells.iter_mut() {
            v.sort_unstable();
            v.dedup();
        }
        let mut via_start = Vec::with_capacity(slots.len() * nc + 1);
        let mut via = Vec::new();
        via_start.push(0);
        let mut buf = Vec::new();
        for s in 0..slots.len() {
            for c in 0..nc {
                buf.clear();
                if !direct[s * nc + c] {
                    // A free sibling that owns a link, or a free slot one
                    // link away that owns a link.
                    let own = slots[s].0 as usize;
                    buf.extend(
                        cell_slots[own]
                            .iter()
                            .copied()
                            .filter(|&r| direct[r as usize * nc + c]),
                    );
                    for &b in &out_cells[s] {
                        buf.extend(
                            cell_slots[b as usize]
                                .iter()
                                .copied()
                                .filter(|&r| direct[r as usize * nc + c]),
                        );
                    }
                    buf.sort_unstable();
                    buf.dedup();
                }
                via.extend_from_slice(&buf);
                via_start.push(via.len() as u32);
            }
        }

        let dist = |a: usize, b: usize| {
            let (ca, cb) = (&fabric.cells[a], &fabric.cells[b]);
            (ca.x as i32 - cb.x as i32).unsigned_abs() + (ca.y as i32 - cb.y as i32).unsigned_abs()
        };
        let near: Vec<Vec<(u32, u32)>> = (0..nc)
            .map(|a| {
                let mut v: Vec<(u32, u32)> = (0..nc).map(|b| (dist(a, b), b as u32)).collect();
                v.sort_unstable();
                v
            })
            .collect();
        let max_dist = near
            .iter()
            .filter_map(|v| v.last())
            .map(|&(d, _)| d)
            .max()
            .unwrap_or(0);

        Ok(TriggerProblem {
            les,
            conns,
            le_conns,
            slots,
            cell_slots,
            cell_inputs,
            n_cells: nc,
            in_cost,
            root_cost,
            gamma_feed: params.gamma_feed as i64,
            direct,
            via_start,
            via,
            near,
            max_dist,
            gamma_ind: params.gamma_ind as i64,
            gamma_blk: params.gamma_blk as i64,
        })
    }

    /// Replaces the pin-based feed terms with routability: `tap_cells[t][c]`
    /// says whether tap `t` (in [`TriggerNetlist::taps`] order) has a path
    /// into cell `c`, `root_slots[s]` whether global slot `s` reaches a
    /// control pin.
    pub fn with_feed_reach(mut self, tap_cells: &[Vec<bool>], root_slots: &[bool]) -> Result<Self> {
        let nc = self.n_cells;
        if tap_cells.len() * nc != self.in_cost.len()
            || tap_cells.iter().any(|v| v.len() != nc)
            || root_slots.len() != self.slots.len()
        {
            return Err(Error::validation("feed reachability does not match the problem"));
        }
        let feed = self.gamma_feed;
        let soften = |cost: &mut i64, ok: bool| {
            if *cost == 0 && !ok {
                *cost = feed;
            }
        };
        for (c, &ok) in self.in_cost.iter_mut().zip(tap_cells.concat().iter()) {
            soften(c, ok);
        }
        for (c, &ok) in self.root_cost.iter_mut().zip(root_slots) {
            soften(c, ok);
        }
        Ok(self)
    }

    pub fn num_les(&self) -> usize {
        self.les.len()
    }

    pub fn num_slots(&self) -> usize {
        self.slots.len()
    }

    /// `(cell, ble)` of a global slot.
    pub fn slot(&self, s: u32) -> (u32, u16) {
        let (c, b, _) = self.slots[s as usize];
        (c, b)
    }

    /// Route-through candidates for a connection from `slot` into `cell`.
    #[inline]
    fn via(&self, slot: u32, cell: u32) -> &[u32] {
        let k = slot as usize * self.n_cells + cell as usize;
        &self.via[self.via_start[k] as usize..self.via_start[k + 1] as usize]
    }

    fn occupancy(&self, sites: &[u32]) -> Vec<u32> {
        let mut occ = vec![EMPTY; self.slots.len()];
        for (le, &s) in sites.iter().enumerate() {
            occ[s as usize] = le as u32;
        }
        occ
    }

    #[inline]
    fn conn_cost(&self, c: &Conn, sites: &[u32], occ: &[u32]) -> i64 {
        let a = sites[c.from as usize];
        let (ca, _, out_ok) = self.slots[a as usize];
        match c.to {
            Term::Out => self.root_cost[a as usize],
            Term::In(t) => self.in_cost[t as usize * self.n_cells + ca as usize],
            Term::Le(v) => {
                let cb = self.slots[sites[v as usize] as usize].0;
                if ca == cb {
                    0
                } else if !out_ok || self.cell_inputs[cb as usize] == 0 {
                    self.gamma_blk
                } else if self.direct[a as usize * self.n_cells + cb as usize] {
                    1
                } else if self.via(a, cb).iter().any(|&r| occ[r as usize] == EMPTY) {
                    self.gamma_ind
                } else {
                    self.gamma_blk
                }
            }
        }
    }

    /// Whether a connection's cost depends on other LEs' positions.
    fn is_two_hop(&self, c: &Conn, sites: &[u32]) -> bool {
        let Term::Le(v) = c.to else { return false };
        let a = sites[c.from as usize];
        let cb = self.slots[sites[v as usize] as usize].0;
        self.slots[a as usize].0 != cb && !self.via(a, cb).is_empty()
    }

    /// Per-connection costs of an assignment (LE → global slot).
    pub(crate) fn conn_costs(&self, sites: &[u32]) -> Vec<i64> {
        let occ = self.occupancy(sites);
        self.conns
            .iter()
            .map(|c| self.conn_cost(c, sites, &occ))
            .collect()
    }

    /// Total cost of an assignment (LE → global slot).
    pub fn cost(&self, sites: &[u32]) -> i64 {
        self.conn_costs(sites).iter().sum()
    }

    /// Number of blocked terms in an assignment.
    pub fn blocked_terms(&self, sites: &[u32]) -> usize {
        self.conn_costs(sites)
            .iter()
            .filter(|&&c| c >= self.gamma_blk)
            .count()
    }

    /// LEs touching a blocked term, sorted.
    pub(crate) fn blocked_les(&self, sites: &[u32]) -> Vec<u32> {
        let mut v: Vec<u32> = self
            .conns
            .iter()
            .zip(self.conn_costs(sites))
            .filter(|(_, k)| *k >= self.gamma_blk)
            .flat_map(|(c, _)| match c.to {
                Term::Le(t) => vec![c.from, t],
                _ => vec![c.from],
            })
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// One seeded annealing run.
    pub fn anneal(&self, params: &SaParams, seed: u64) -> Anneal {
        let n = self.les.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<u32> = (0..self.slots.len() as u32).collect();
        order.shuffle(&mut rng);
        let mut w = Walk::new(self, order[..n].to_vec());
        let mut best = w.cur;
        let mut best_sites = w.sites.clone();
        let mut moves = 0u64;
        if n == 0 || best == 0 {
            return Anneal {
                seed,
                cost: best,
                sites: best_sites,
                history: vec![best],
                moves,
            };
        }
        let per_temp = params.moves_per_le * n;

        // Initial temperature from the spread of costs under random moves.
        let mut samples = Vec::with_capacity(per_temp);
        for _ in 0..per_temp {
            if w.try_move(&mut rng, self.max_dist, |_, _| true).is_some() && w.cur < best {
                best = w.cur;
                best_sites.clone_from(&w.sites);
            }
            samples.push(w.cur as f64);
            moves += 1;
        }
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let var = samples.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / samples.len() as f64;
        let mut t = params.t0_factor * var.sqrt();
        if t <= 0.0 {
            t = 1.0;
        }
        let mut rlim = self.max_dist.max(1) as f64;
        let mut history = Vec::new();
        let mut stall = 0;

        while best > 0 {
            let best_before = best;
            let (mut accepted, mut changed) = (0usize, 0usize);
            // Moves that leave the number of blocked terms alone.
            let (mut soft, mut soft_accepted) = (0usize, 0usize);
            let temp = t;
            for _ in 0..per_temp {
                moves += 1;
                let metropolis = |d: i64, rng: &mut ChaCha8Rng| {
                    d <= 0 || rng.gen::<f64>() < (-(d as f64) / temp).exp()
                };
                let Some((d, ok)) = w.try_move(&mut rng, rlim as u32, metropolis) else {
                    continue;
                };
                let is_soft = 2 * d.abs() < self.gamma_blk;
                soft += is_soft as usize;
                if ok {
                    accepted += 1;
                    soft_accepted += is_soft as usize;
                    if d != 0 {
                        changed += 1;
                        if w.cur < best {
                            best = w.cur;
                            best_sites.clone_from(&w.sites);
                        }
                    }
                }
            }
            history.push(best);
            let rate = accepted as f64 / per_temp as f64;
            let soft_rate = if soft == 0 {
                0.0
            } else {
                soft_accepted as f64 / soft as f64
            };
            // Stagnation only counts once small cost differences matter.
            stall = if best < best_before || soft_rate > 0.96 { 0 } else { stall + 1 };
            log::trace!(
                "T {t:.3} rate {rate:.3} soft {soft_rate:.3} cur {} best {best}",
                w.cur
            );
            if t < params.t_min
                || (changed == 0 && t < 1.0)
                || stall >= params.stall_temps
            {
                break;
            }
            rlim = (rlim * (1.0 - 0.44 + rate)).clamp(1.0, self.max_dist.max(1) as f64);
            // Race through random-walk phases (overall, or among moves that
            // do not change blockage) and the frozen phase; cool at the
            // configured rate in between.
            t *= match rate {
                r if r > 0.96 || soft_rate > 0.96 => 0.5,
                r if r > 0.8 => 0.9,
                r if r > 0.15 => params.cooling,
                _ => 0.8,
            };
        }
        if history.is_empty() {
            history.push(best);
        }
        debug_assert_eq!(best, self.cost(&best_sites));
        Anneal {
            seed,
            cost: best,
            sites: best_sites,
            history,
            moves,
        }
    }

    /// `params.restarts` runs with consecutive seeds; lowest cost wins, ties
    /// go to the earlier seed.
    pub fn solve(&self, params: &SaParams, exec: Exec) -> Anneal {
        let runs = exec.map_range(params.restarts, |i| {
            self.anneal(params, params.seed.wrapping_add(i as u64))
        });
        runs.into_iter()
            .reduce(|a, b| if b.cost < a.cost { b } else { a })
            .expect("at least one restart")
    }
}

/// Annealing state with incremental cost.
struct Walk<'p> {
    p: &'p TriggerProblem,
    sites: Vec<u32>,
    occ: Vec<u32>,
    cur: i64,
    /// Connections whose cost depends on route-through occupancy.
    two_hop: Vec<u32>,
    pos: Vec<u32>,
    scratch: Vec<u32>,
}

impl<'p> Walk<'p> {
    fn new(p: &'p TriggerProblem, sites: Vec<u32>) -> Self {
        let occ = p.occupancy(&sites);
        let cur = p.conns.iter().map(|c| p.conn_cost(c, &sites, &occ)).sum();
        let mut w = Walk {
            p,
            sites,
            occ,
            cur,
            two_hop: Vec::new(),
            pos: vec![EMPTY; p.conns.len()],
            scratch: Vec::new(),
        };
        for ci in 0..p.conns.len() as u32 {
            w.refresh(ci);
        }
        w
    }

    fn refresh(&mut self, ci: u32) {
        let want = self.p.is_two_hop(&self.p.conns[ci as usize], &self.sites);
        let at = self.pos[ci as usize];
        if want && at == EMPTY {
            self.pos[ci as usize] = self.two_hop.len() as u32;
            self.two_hop.push(ci);
        } else if !want && at != EMPTY {
            let last = *self.two_hop.last().unwrap();
            self.two_hop.swap_remove(at as usize);
            if last != ci {
                self.pos[last as usize] = at;
            }
            self.pos[ci as usize] = EMPTY;
        }
    }

    fn local(&self, le: u32, skip: Option<u32>) -> i64 {
        self.p.le_conns[le as usize]
            .iter()
            .map(|&ci| &self.p.conns[ci as usize])
            .filter(|c| skip.is_none_or(|s| !c.touches(s)))
            .map(|c| self.p.conn_cost(c, &self.sites, &self.occ))
            .sum()
    }

    fn watched(&self) -> i64 {
        self.scratch
            .iter()
            .map(|&ci| {
                self.p
                    .conn_cost(&self.p.conns[ci as usize], &self.sites, &self.occ)
            })
            .sum()
    }

    /// Proposes moving a random LE to a slot within `rlim` of it (swapping
    /// with any occupant), applies it if `accept` agrees, and returns the
    /// cost change and whether it was applied.
    fn try_move(
        &mut self,
        rng: &mut ChaCha8Rng,
        rlim: u32,
        mut accept: impl FnMut(i64, &mut ChaCha8Rng) -> bool,
    ) -> Option<(i64, bool)> {
        let p = self.p;
        let a = rng.gen_range(0..self.sites.len() as u32);
        let from = self.sites[a as usize];
        let cands = &p.near[p.slots[from as usize].0 as usize];
        let k = cands.partition_point(|&(d, _)| d <= rlim);
        let cs = &p.cell_slots[cands[rng.gen_range(0..k)].1 as usize];
        let mut to = cs[rng.gen_range(0..cs.len())];
        if to == from {
            // Null move; any other slot will do.
            if p.slots.len() < 2 {
                return None;
            }
            to = rng.gen_range(0..p.slots.len() as u32 - 1);
            to += (to >= from) as u32;
        }
        let b = (self.occ[to as usize] != EMPTY).then_some(self.occ[to as usize]);

        // A relocation frees `from` and fills `to`, which can change two-hop
        // connections elsewhere; a swap leaves occupancy as it was.
        self.scratch.clear();
        if b.is_none() {
            for &ci in &self.two_hop {
                let c = &p.conns[ci as usize];
                let Term::Le(v) = c.to else { continue };
                if c.touches(a) {
                    continue;
                }
                let cb = p.slots[self.sites[v as usize] as usize].0;
                let via = p.via(self.sites[c.from as usize], cb);
                if via.contains(&from) || via.contains(&to) {
                    self.scratch.push(ci);
                }
            }
        }
        let before = self.local(a, None) + b.map_or(0, |b| self.local(b, Some(a))) + self.watched();
        self.sites[a as usize] = to;
        self.occ[to as usize] = a;
        self.occ[from as usize] = b.unwrap_or(EMPTY);
        if let Some(b) = b {
            self.sites[b as usize] = from;
        }
        let delta =
            self.local(a, None) + b.map_or(0, |b| self.local(b, Some(a))) + self.watched() - before;
        if accept(delta, rng) {
            self.cur += delta;
            for le in std::iter::once(a).chain(b) {
                for i in 0..p.le_conns[le as usize].len() {
                    self.refresh(p.le_conns[le as usize][i]);
                }
            }
            Some((delta, true))
        } else {
            self.sites[a as usize] = from;
            self.occ[from as usize] = a;
            self.occ[to as usize] = b.unwrap_or(EMPTY);
            if let Some(b) = b {
                self.sites[b as usize] = to;
            }
            Some((delta, false))
        }
    }
}
