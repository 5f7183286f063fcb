// SPDX-License-Identifier: Apache-2.0
//! Simulated-annealing placement with a VPR-style adaptive schedule.
//!
//! Cost is the half-perimeter wirelength of every net, plus a penalty per
//! CLB input pin demanded beyond `clb_inputs`. A net counts as a CLB input
//! when some block in the CLB reads it and its driver sits elsewhere.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::types::{PlacedBlock, Placement};
use crate::circuits::{BlockId, BlockKind, Netlist};
use crate::error::{Error, Result};
use crate::fabric::{ArchSpec, IO_PADS_PER_TILE};

#[derive(Debug, Clone, PartialEq)]
pub struct PlaceParams {
    pub seed: u64,
    /// Moves per temperature are `inner_num * blocks^(4/3)`.
    pub inner_num: f64,
    /// Cost of one excess CLB input pin, in wirelength units.
    pub pin_penalty: i64,
}

impl Default for PlaceParams {
    fn default() -> Self {
        PlaceParams {
            seed: 1,
            inner_num: 1.0,
            pin_penalty: 5,
        }
    }
}

impl PlaceParams {
    pub fn with_seed(seed: u64) -> Self {
        PlaceParams {
            seed,
            ..Self::default()
        }
    }
}

/// Total half-perimeter wirelength of `placement`.
pub fn placement_cost(netlist: &Netlist, placement: &Placement) -> i64 {
    netlist
        .nets
        .iter()
        .map(|n| {
            let pins = std::iter::once(n.driver).chain(n.sinks.iter().map(|p| p.block));
            let (mut x0, mut x1, mut y0, mut y1) = (u16::MAX, 0, u16::MAX, 0);
            for b in pins {
                let p = placement.get(b);
                x0 = x0.min(p.x);
                x1 = x1.max(p.x);
                y0 = y0.min(p.y);
                y1 = y1.max(p.y);
            }
            (x1 - x0) as i64 + (y1 - y0) as i64
        })
        .sum()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Class {
    Logic,
    Io,
}

struct Slots {
    /// Tile of each slot.
    tile: Vec<(u16, u16)>,
    sub: Vec<u16>,
    per_tile: usize,
    /// Tile coordinate → first slot index.
    at: HashMap<(u16, u16), usize>,
}

impl Slots {
    fn new(tiles: &[(usize, usize)], per_tile: usize) -> Self {
        let mut s = Slots {
            tile: Vec::new(),
            sub: Vec::new(),
            per_tile,
            at: HashMap::new(),
        };
        for &(x, y) in tiles {
            s.at.insert((x as u16, y as u16), s.tile.len());
            for k in 0..per_tile {
                s.tile.push((x as u16, y as u16));
                s.sub.push(k as u16);
            }
        }
        s
    }

    fn len(&self) -> usize {
        self.tile.len()
    }
}

struct State<'a> {
    netlist: &'a Netlist,
    arch: &'a ArchSpec,
    logic: Slots,
    io: Slots,
    class: Vec<Class>,
    /// Slot index (within the block's class) of every block.
    slot: Vec<usize>,
    logic_occ: Vec<Option<BlockId>>,
    io_occ: Vec<Option<BlockId>>,
    net_pins: Vec<Vec<BlockId>>,
    block_nets: Vec<Vec<usize>>,
    net_cost: Vec<i64>,
    /// Excess input pins per CLB tile, indexed by first-slot / per_tile.
    clb_excess: Vec<i64>,
    penalty: i64,
    hpwl: i64,
    excess: i64,
}

impl<'a> State<'a> {
    fn tile_of(&self, b: BlockId) -> (u16, u16) {
        match self.class[b.idx()] {
            Class::Logic => self.logic.tile[self.slot[b.idx()]],
            Class::Io => self.io.tile[self.slot[b.idx()]],
        }
    }

    fn net_hpwl(&self, n: usize) -> i64 {
        let (mut x0, mut x1, mut y0, mut y1) = (u16::MAX, 0, u16::MAX, 0);
        for &b in &self.net_pins[n] {
            let (x, y) = self.tile_of(b);
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        (x1 - x0) as i64 + (y1 - y0) as i64
    }

    /// Excess external inputs of the CLB whose first logic slot is `first`.
    fn tile_excess(&self, first: usize) -> i64 {
        let here = self.logic.tile[first];
        let mut nets: Vec<u32> = Vec::with_capacity(16);
        for s in first..first + self.logic.per_tile {
            let Some(b) = self.logic_occ[s] else { continue };
            for &n in &self.netlist.block(b).inputs {
                let driver = self.netlist.net(n).driver;
                if self.tile_of(driver) != here && !nets.contains(&n.0) {
                    nets.push(n.0);
                }
            }
        }
        (nets.len() as i64 - self.arch.clb_inputs as i64).max(0)
    }

    fn cost(&self) -> i64 {
        self.hpwl + self.penalty * self.excess
    }

    fn recompute(&mut self) {
        for n in 0..self.net_pins.len() {
            self.net_cost[n] = self.net_hpwl(n);
        }
        self.hpwl = self.net_cost.iter().sum();
        for t in 0..self.clb_excess.len() {
            self.clb_excess[t] = self.tile_excess(t * self.logic.per_tile);
        }
        self.excess = self.clb_excess.iter().sum();
    }

    fn occ_mut(&mut self, c: Class) -> &mut Vec<Option<BlockId>> {
        match c {
            Class::Logic => &mut self.logic_occ,
            Class::Io => &mut self.io_occ,
        }
    }

    /// Moves `b` to `target`, swapping with any occupant.
    fn apply(&mut self, b: BlockId, target: usize) -> Option<BlockId> {
        let c = self.class[b.idx()];
        let from = self.slot[b.idx()];
        let other = self.occ_mut(c)[target];
        self.occ_mut(c)[target] = Some(b);
        self.occ_mut(c)[from] = other;
        self.slot[b.idx()] = target;
        if let Some(o) = other {
            self.slot[o.idx()] = from;
        }
        other
    }

    /// Applies a move and returns the cost delta, updating cached costs.
    fn try_move(
        &mut self,
        b: BlockId,
        target: usize,
        scratch: &mut Vec<usize>,
    ) -> (i64, Option<BlockId>) {
        let c = self.class[b.idx()];
        let from = self.slot[b.idx()];
        let other = self.apply(b, target);
        scratch.clear();
        scratch.extend_from_slice(&self.block_nets[b.idx()]);
        if let Some(o) = other {
            scratch.extend_from_slice(&self.block_nets[o.idx()]);
        }
        scratch.sort_unstable();
        scratch.dedup();
        let mut delta = 0;
        for &n in scratch.iter() {
            let new = self.net_hpwl(n);
            delta += new - self.net_cost[n];
            self.net_cost[n] = new;
        }
        self.hpwl += delta;
        if c == Class::Logic {
            let per = self.logic.per_tile;
            let (ta, tb) = (from / per, target / per);
            let mut d_ex = 0;
            for t in if ta == tb { vec![ta] } else { vec![ta, tb] } {
                let new = self.tile_excess(t * per);
                d_ex += new - self.clb_excess[t];
                self.clb_excess[t] = new;
            }
            self.excess += d_ex;
            delta += self.penalty * d_ex;
        }
        (delta, other)
    }

    fn undo(&mut self, b: BlockId, from: usize, scratch: &mut Vec<usize>) {
        // Moving back is itself a move; its delta restores the caches.
        self.try_move(b, from, scratch);
    }

    /// A random slot of `b`'s class within Chebyshev distance `rlim` tiles.
    fn propose(&self, b: BlockId, rlim: i32, rng: &mut ChaCha8Rng) -> Option<usize> {
        let slots = match self.class[b.idx()] {
            Class::Logic => &self.logic,
            Class::Io => &self.io,
        };
        if slots.len() < 2 {
            return None;
        }
        let cur = self.slot[b.idx()];
        let (x, y) = slots.tile[cur];
        for _ in 0..16 {
            let nx = x as i32 + rng.gen_range(-rlim..=rlim);
            let ny = y as i32 + rng.gen_range(-rlim..=rlim);
            if nx < 0 || ny < 0 {
                continue;
            }
            if let Some(&first) = slots.at.get(&(nx as u16, ny as u16)) {
                let s = first + rng.gen_range(0..slots.per_tile);
                if s != cur {
                    return Some(s);
                }
            }
        }
        None
    }

    fn snapshot(&self) -> Vec<usize> {
        self.slot.clone()
    }

    fn restore(&mut self, slots: &[usize]) {
        self.slot.copy_from_slice(slots);
        self.logic_occ.iter_mut().for_each(|s| *s = None);
        self.io_occ.iter_mut().for_each(|s| *s = None);
        for (i, &s) in slots.iter().enumerate() {
            let c = self.class[i];
            self.occ_mut(c)[s] = Some(BlockId(i as u32));
        }
        self.recompute();
    }
}

fn check_fit(netlist: &Netlist, arch: &ArchSpec) -> Result<()> {
    for b in &netlist.blocks {
        if b.kind == BlockKind::Lut && b.inputs.len() > arch.lut_size_k {
            return Err(Error::Capacity(format!(
                "LUT `{}` has {} inputs but the architecture has {}-LUTs",
                b.name,
                b.inputs.len(),
                arch.lut_size_k
            )));
        }
        if b.kind.is_logic() && b.inputs.len() > arch.clb_inputs {
            return Err(Error::Capacity(format!(
                "block `{}` needs more inputs than a CLB has",
                b.name
            )));
        }
    }
    let logic = netlist.blocks.iter().filter(|b| b.kind.is_logic()).count();
    let io = netlist.blocks.iter().filter(|b| b.kind.is_io()).count();
    if logic > arch.clb_slot_count() {
        return Err(Error::Capacity(format!(
            "{logic} logic blocks exceed {} BLE slots",
            arch.clb_slot_count()
        )));
    }
    if io > arch.io_slot_count() {
        return Err(Error::Capacity(format!(
            "{io} I/O blocks exceed {} pads",
            arch.io_slot_count()
        )));
    }
    Ok(())
}

fn init_state<'a>(
    netlist: &'a Netlist,
    arch: &'a ArchSpec,
    rng: &mut ChaCha8Rng,
    penalty: i64,
) -> State<'a> {
    let logic = Slots::new(&arch.clb_tiles(), arch.bles_per_clb);
    let io = Slots::new(&arch.io_tiles(), IO_PADS_PER_TILE);
    let class: Vec<Class> = netlist
        .blocks
        .iter()
        .map(|b| {
            if b.kind.is_logic() {
                Class::Logic
            } else {
                Class::Io
            }
        })
        .collect();
    let mut logic_free: Vec<usize> = (0..logic.len()).collect();
    let mut io_free: Vec<usize> = (0..io.len()).collect();
    logic_free.shuffle(rng);
    io_free.shuffle(rng);
    let mut logic_occ = vec![None; logic.len()];
    let mut io_occ = vec![None; io.len()];
    let mut slot = Vec::with_capacity(class.len());
    for (i, c) in class.iter().enumerate() {
        let s = match c {
            Class::Logic => logic_free.pop().unwrap(),
            Class::Io => io_free.pop().unwrap(),
        };
        match c {
            Class::Logic => logic_occ[s] = Some(BlockId(i as u32)),
            Class::Io => io_occ[s] = Some(BlockId(i as u32)),
        }
        slot.push(s);
    }
    let mut net_pins = Vec::with_capacity(netlist.nets.len());
    let mut block_nets = vec![Vec::new(); netlist.blocks.len()];
    for (ni, n) in netlist.nets.iter().enumerate() {
        let mut pins: Vec<BlockId> = std::iter::once(n.driver)
            .chain(n.sinks.iter().map(|p| p.block))
            .collect();
        pins.sort_unstable();
        pins.dedup();
        for &b in &pins {
            block_nets[b.idx()].push(ni);
        }
        net_pins.push(pins);
    }
    let n_clb = logic.len() / logic.per_tile.max(1);
    let mut st = State {
        netlist,
        arch,
        logic,
        io,
        class,
        slot,
        logic_occ,
        io_occ,
        net_cost: vec![0; net_pins.len()],
        net_pins,
        block_nets,
        clb_excess: vec![0; n_clb],
        penalty,
        hpwl: 0,
        excess: 0,
    };
    st.recompute();
    st
}

fn to_placement(st: &State<'_>) -> Placement {
    let blocks = st
        .netlist
        .blocks
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let s = st.slot[i];
            let (slots, _) = match st.class[i] {
                Class::Logic => (&st.logic, ()),
                Class::Io => (&st.io, ()),
            };
            let (x, y) = slots.tile[s];
            PlacedBlock {
                block: b.name.clone(),
                x,
                y,
                sub: slots.sub[s],
            }
        })
        .collect();
    Placement {
        netlist: st.netlist.name.clone(),
        blocks,
    }
}

/// A uniformly random legal placement (no annealing).
pub fn random_placement(netlist: &Netlist, arch: &ArchSpec, seed: u64) -> Result<Placement> {
    arch.validate()?;
    check_fit(netlist, arch)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(to_placement(&init_state(netlist, arch, &mut rng, 0)))
}

pub fn place(netlist: &Netlist, arch: &ArchSpec, params: &PlaceParams) -> Result<Placement> {
    arch.validate()?;
    check_fit(netlist, arch)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut st = init_state(netlist, arch, &mut rng, params.pin_penalty);
    let nblocks = netlist.blocks.len();
    let nets = netlist.nets.len().max(1) as f64;
    let max_r = (arch.core_columns() + 2).max(arch.grid_height + 2) as i32;
    let mut scratch = Vec::new();

    let mut best_cost = st.cost();
    let mut best = st.snapshot();

    // Initial temperature: 20x the standard deviation of costs seen over a
    // random walk of `nblocks` accepted moves.
    let mut samples = Vec::with_capacity(nblocks);
    for _ in 0..nblocks {
        let b = BlockId(rng.gen_range(0..nblocks) as u32);
        if let Some(t) = st.propose(b, max_r, &mut rng) {
            st.try_move(b, t, &mut scratch);
        }
        samples.push(st.cost() as f64);
    }
    let mean = samples.iter().sum::<f64>() / samples.len().max(1) as f64;
    let var = samples.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / samples.len().max(1) as f64;
    let mut temp = 20.0 * var.sqrt();
    if st.cost() < best_cost {
        best_cost = st.cost();
        best = st.snapshot();
    }

    let moves_per_t =
        ((params.inner_num * (nblocks as f64).powf(4.0 / 3.0)).ceil() as usize).max(1);
    let mut rlim = max_r as f64;
    let mut rounds = 0;
    while temp > 0.0 && st.cost() > 0 && rounds < 10_000 {
        rounds += 1;
        let mut accepted = 0usize;
        let mut tried = 0usize;
        for _ in 0..moves_per_t {
            let b = BlockId(rng.gen_range(0..nblocks) as u32);
            let Some(target) = st.propose(b, rlim.round().max(1.0) as i32, &mut rng) else {
                continue;
            };
            tried += 1;
            let from = st.slot[b.idx()];
            let (delta, _) = st.try_move(b, target, &mut scratch);
            if delta <= 0 || rng.gen::<f64>() < (-(delta as f64) / temp).exp() {
                accepted += 1;
            } else {
                st.undo(b, from, &mut scratch);
            }
        }
        if st.cost() < best_cost {
            best_cost = st.cost();
            best = st.snapshot();
        }
        let rate = if tried == 0 {
            0.0
        } else {
            accepted as f64 / tried as f64
        };
        temp *= if rate > 0.96 {
            0.5
        } else if rate > 0.8 {
            0.9
        } else if rate > 0.15 {
            0.95
        } else {
            0.8
        };
        rlim = (rlim * (1.0 - 0.44 + rate)).clamp(1.0, max_r as f64);
        if temp < 0.005 * st.cost() as f64 / nets {
            break;
        }
    }
    st.restore(&best);

    // Legalize leftover pin overflow with greedy quenches at rising penalty.
    let mut round = 0;
    while st.excess > 0 && round < 4 {
        round += 1;
        st.penalty *= 10;
        for _ in 0..moves_per_t * 20 {
            let b = BlockId(rng.gen_range(0..nblocks) as u32);
            if st.class[b.idx()] != Class::Logic {
                continue;
            }
            let Some(target) = st.propose(b, max_r, &mut rng) else {
                continue;
            };
            let from = st.slot[b.idx()];
            let (delta, _) = st.try_move(b, target, &mut scratch);
            if delta > 0 {
                st.undo(b, from, &mut scratch);
            }
            if st.excess == 0 {
                break;
            }
        }
    }
    if st.excess > 0 {
        return Err(Error::Capacity(format!(
            "cannot satisfy CLB input-pin limits ({} excess pins after legalization)",
            st.excess
        )));
    }
    log::debug!(
        "placed `{}`: hpwl {} after {rounds} temperatures",
        netlist.name,
        st.hpwl
    );
    Ok(to_placement(&st))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuits::{gen_synthetic, parse_netlist};

    fn arch(w: usize, h: usize) -> ArchSpec {
        ArchSpec {
            grid_width: w,
            grid_height: h,
            ..ArchSpec::default()
        }
    }

    #[test]
    fn single_lut_has_zero_cost() {
        let n = parse_netlist(".names y\n1\n", "t").unwrap();
        let p = place(&n, &arch(2, 2), &PlaceParams::default()).unwrap();
        p.validate(&n, &arch(2, 2)).unwrap();
        assert_eq!(placement_cost(&n, &p), 0);
    }

    #[test]
    fn deterministic_in_seed() {
        let n = gen_synthetic(3, 50, 0.6).unwrap();
        let a = place(&n, &arch(5, 5), &PlaceParams::with_seed(9)).unwrap();
        let b = place(&n, &arch(5, 5), &PlaceParams::with_seed(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn capacity_errors() {
        let n = gen_synthetic(3, 50, 0.6).unwrap();
        assert!(matches!(
            place(&n, &arch(2, 2), &PlaceParams::default()),
            Err(Error::Capacity(_))
        ));
        let wide = parse_netlist(".inputs a b c d e\n.names a b c d e y\n11111 1\n", "t").unwrap();
        assert!(matches!(
            place(&wide, &arch(2, 2), &PlaceParams::default()),
            Err(Error::Capacity(_))
        ));
    }

    #[test]
    fn annealing_beats_random() {
        let n = gen_synthetic(4, 60, 0.6).unwrap();
        let a = arch(5, 5);
        let p = place(&n, &a, &PlaceParams::default()).unwrap();
        p.validate(&n, &a).unwrap();
        let r = random_placement(&n, &a, 1).unwrap();
        assert!(placement_cost(&n, &p) < placement_cost(&n, &r));
    }
}
