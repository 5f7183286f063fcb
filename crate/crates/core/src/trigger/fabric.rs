// SPDX-License-Identifier: Apache-2.0
//! Trigger-overlay fabric: spare BLEs grouped per CLB ("cells") plus
//! pre-routed point-to-point links between nearby cells.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::fabric::{NodeId, NodeKind, Occupancy, ResourceMask, RoutingResourceGraph, TileKind};
use crate::pnr::{route_requests, Placement, RouteRequest, RouterParams};

/// One spare BLE of a cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpareSlot {
    pub ble: u16,
    pub source: NodeId,
    pub opin: NodeId,
    /// The output pin still reaches at least one free track.
    pub output_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlayCell {
    pub x: u16,
    pub y: u16,
    pub slots: Vec<SpareSlot>,
    /// Free CLB input pins with at least one free incoming track.
    pub inputs: Vec<NodeId>,
}

impl OverlayCell {
    pub fn available_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn available_outputs(&self) -> usize {
        self.slots.iter().filter(|s| s.output_ok).count()
    }

    pub fn slot(&self, ble: u16) -> Option<&SpareSlot> {
        self.slots.iter().find(|s| s.ble == ble)
    }
}

/// A pre-routed connection from a spare BLE output to a cell input pin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlayLink {
    pub src_cell: u32,
    pub src_ble: u16,
    pub dst_cell: u32,
    pub dst_pin: NodeId,
    /// OPIN, channel segments, IPIN.
    pub path: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlayFabric {
    pub link_budget: usize,
    /// Sorted by `(x, y)`.
    pub cells: Vec<OverlayCell>,
    pub links: Vec<OverlayLink>,
}

impl OverlayFabric {
    pub fn total_slots(&self) -> usize {
        self.cells.iter().map(|c| c.slots.len()).sum()
    }

    /// Every RRG node the fabric reserves: spare BLE source/output pins and
    /// link paths. Sorted.
    pub fn nodes(&self) -> Vec<NodeId> {
        let mut s = BTreeSet::new();
        for c in &self.cells {
            for sl in &c.slots {
                s.insert(sl.source);
                s.insert(sl.opin);
            }
        }
        for l in &self.links {
            s.extend(l.path.iter().copied());
        }
        s.into_iter().collect()
    }

    pub fn claim(&self, mask: &mut ResourceMask) {
        mask.claim(self.nodes(), Occupancy::OverlayTrigger);
    }

    /// Input pins consumed as link endpoints.
    pub fn link_pins(&self) -> HashSet<NodeId> {
        self.links.iter().map(|l| l.dst_pin).collect()
    }
}

/// Occupancy states a fabric node may be in: free, or already claimed by the
/// fabric itself.
fn usable(mask: &ResourceMask, n: NodeId) -> bool {
    matches!(mask.get(n), Occupancy::Free | Occupancy::OverlayTrigger)
}

/// Collects spare BLEs into cells and greedily pre-routes links between
/// nearby cells, nearest partners first, until every cell has `link_budget`
/// outgoing and incoming links or spare routing runs out.
pub fn build_trigger_fabric(
    rrg: &RoutingResourceGraph,
    mask: &ResourceMask,
    placement: &Placement,
    link_budget: usize,
    seed: u64,
) -> OverlayFabric {
    let arch = rrg.arch();
    let used: HashSet<(u16, u16, u16)> =
        placement.blocks.iter().map(|p| (p.x, p.y, p.sub)).collect();
    let mut tiles = arch.clb_tiles();
    tiles.sort_unstable();
    let free_track = |n: NodeId, fanout: bool| {
        let adj = if fanout { rrg.fanout(n) } else { rrg.fanin(n) };
        adj.iter()
            .any(|&c| rrg.node(c).kind.is_channel() && mask.is_free(c))
    };
    let mut cells = Vec::new();
    for (x, y) in tiles {
        debug_assert_eq!(arch.tile_kind(x, y), TileKind::Clb);
        let mut slots = Vec::new();
        for ble in 0..arch.bles_per_clb {
            if used.contains(&(x as u16, y as u16, ble as u16)) {
                continue;
            }
            let (Some(source), Some(opin)) = (
                rrg.lookup(NodeKind::Source, x, y, ble),
                rrg.lookup(NodeKind::Opin, x, y, ble),
            ) else {
                continue;
            };
            if !usable(mask, source) || !usable(mask, opin) {
                continue;
            }
            slots.push(SpareSlot {
                ble: ble as u16,
                source,
                opin,
                output_ok: free_track(opin, true),
            });
        }
        if slots.is_empty() {
            continue;
        }
        let inputs = (0..arch.clb_inputs)
            .filter_map(|i| rrg.lookup(NodeKind::Ipin, x, y, i))
            .filter(|&ip| mask.is_free(ip) && free_track(ip, false))
            .collect();
        cells.push(OverlayCell {
            x: x as u16,
            y: y as u16,
            slots,
            inputs,
        });
    }

    let links = route_links(rrg, mask, &cells, link_budget, seed);
    log::debug!(
        "trigger fabric: {} cells, {} links",
        cells.len(),
        links.len()
    );
    OverlayFabric {
        link_budget,
        cells,
        links,
    }
}

fn route_links(
    rrg: &RoutingResourceGraph,
    mask: &ResourceMask,
    cells: &[OverlayCell],
    budget: usize,
    seed: u64,
) -> Vec<OverlayLink> {
    let mut links = Vec::new();
    if budget == 0 || cells.len() < 2 {
        return links;
    }
    let dist = |a: &OverlayCell, b: &OverlayCell| {
        (a.x as i32 - b.x as i32).abs() + (a.y as i32 - b.y as i32).abs()
    };
    // Each cell's partners, nearest first; a few more than the budget so a
    // failed route can fall through to the next neighbour.
    let reach = 4 * budget;
    let partners: Vec<Vec<u32>> = cells
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let mut p: Vec<u32> = (0..cells.len() as u32)
                .filter(|&j| j as usize != i)
                .collect();
            p.sort_by_key(|&j| (dist(a, &cells[j as usize]), j));
            p.truncate(reach);
            p
        })
        .collect();
    let mut blocked = mask.blocked();
    for c in cells {
        for s in &c.slots {
            blocked[s.opin.idx()] = true;
        }
    }
    let mut n_out = vec![0usize; cells.len()];
    let mut n_in = vec![0usize; cells.len()];
    let mut per_slot: HashMap<(u32, u16), usize> = HashMap::new();
    let mut pin_used: HashSet<NodeId> = HashSet::new();
    let params = RouterParams {
        max_iters: 1,
        ..RouterParams::with_seed(seed)
    };
    for round in 0..reach {
        for a in 0..cells.len() {
            let Some(&b) = partners[a].get(round) else {
                continue;
            };
            let b = b as usize;
            if n_out[a] >= budget || n_in[b] >= budget {
                continue;
            }
            // Spread links over the cell's usable outputs.
            let Some(src) = cells[a]
                .slots
                .iter()
                .filter(|s| s.output_ok)
                .min_by_key(|s| {
                    (
                        per_slot.get(&(a as u32, s.ble)).copied().unwrap_or(0),
                        s.ble,
                    )
                })
            else {
                continue;
            };
            let group: Vec<NodeId> = cells[b]
                .inputs
                .iter()
                .filter(|p| !pin_used.contains(p))
                .filter_map(|&p| rrg.sink_of_ipin(p))
                .collect();
            if group.is_empty() {
                continue;
            }
            let req = RouteRequest {
                name: format!("link{}", links.len()),
                source: src.opin,
                sinks: vec![group],
            };
            let Ok(out) = route_requests(
                rrg,
                std::slice::from_ref(&req),
                Some(&blocked),
                &params,
                None,
            ) else {
                continue;
            };
            // Root-to-sink chain: every node after the OPIN in tree order.
            let mut path: Vec<NodeId> = out.trees[0].iter().map(|rn| rn.node).collect();
            if path
                .last()
                .is_some_and(|&n| rrg.node(n).kind == NodeKind::Sink)
            {
                path.pop();
            }
            let dst_pin = *path.last().expect("route reaches an input pin");
            for &n in &path[1..] {
                blocked[n.idx()] = true;
            }
            pin_used.insert(dst_pin);
            n_out[a] += 1;
            n_in[b] += 1;
            *per_slot.entry((a as u32, src.ble)).or_default() += 1;
            links.push(OverlayLink {
                src_cell: a as u32,
                src_ble: src.ble,
                dst_cell: b as u32,
                dst_pin,
                path,
            });
        }
    }
    links
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FabricViolation {
    pub cell: Option<u32>,
    pub link: Option<usize>,
    pub message: String,
}

/// Independent fabric check: spare slots really are spare, link paths are
/// connected, free of user and trace resources, and node-disjoint (links
/// leaving the same output pin share only that pin).
pub fn verify_fabric(
    rrg: &RoutingResourceGraph,
    mask: &ResourceMask,
    placement: &Placement,
    fabric: &OverlayFabric,
) -> Vec<FabricViolation> {
    let mut out = Vec::new();
    let arch = rrg.arch();
    let used: HashSet<(u16, u16, u16)> =
        placement.blocks.iter().map(|p| (p.x, p.y, p.sub)).collect();
    let mut v = |cell: Option<u32>, link: Option<usize>, message: String| {
        out.push(FabricViolation {
            cell,
            link,
            message,
        })
    };
    for (ci, c) in fabric.cells.iter().enumerate() {
        let ci = Some(ci as u32);
        if arch.tile_kind(c.x as usize, c.y as usize) != TileKind::Clb {
            v(ci, None, format!("cell at ({}, {}) is not a CLB", c.x, c.y));
            continue;
        }
        if c.inputs.len() > arch.clb_inputs || c.slots.len() > arch.bles_per_clb {
            v(ci, None, "more pins or slots than the CLB has".into());
        }
        for s in &c.slots {
            if used.contains(&(c.x, c.y, s.ble)) {
                v(
                    ci,
                    None,
                    format!("BLE {} is used by the user circuit", s.ble),
                );
            }
            let src = rrg.lookup(NodeKind::Source, c.x as usize, c.y as usize, s.ble as usize);
            let opin = rrg.lookup(NodeKind::Opin, c.x as usize, c.y as usize, s.ble as usize);
            if src != Some(s.source) || opin != Some(s.opin) {
                v(
                    ci,
                    None,
                    format!("BLE {} pins do not match the graph", s.ble),
                );
            } else if !usable(mask, s.opin) || !usable(mask, s.source) {
                v(ci, None, format!("BLE {} pins are not free", s.ble));
            }
        }
        for &p in &c.inputs {
            let n = rrg.node(p);
            if n.kind != NodeKind::Ipin || (n.x, n.y) != (c.x, c.y) {
                v(ci, None, format!("{p} is not an input pin of this cell"));
            } else if !usable(mask, p) {
                v(ci, None, format!("input pin {p} is not free"));
            }
        }
    }
    let mut owner: HashMap<NodeId, usize> = HashMap::new();
    for (li, l) in fabric.links.iter().enumerate() {
        let lk = Some(li);
        let (Some(src), Some(dst)) = (
            fabric.cells.get(l.src_cell as usize),
            fabric.cells.get(l.dst_cell as usize),
        ) else {
            v(None, lk, "link names an unknown cell".into());
            continue;
        };
        let Some(slot) = src.slot(l.src_ble) else {
            v(
                Some(l.src_cell),
                lk,
                format!("link leaves non-spare BLE {}", l.src_ble),
            );
            continue;
        };
        if l.path.len() < 3 || l.path[0] != slot.opin || *l.path.last().unwrap() != l.dst_pin {
            v(
                None,
                lk,
                "path does not run from the BLE output to the destination pin".into(),
            );
            continue;
        }
        if !dst.inputs.contains(&l.dst_pin) {
            v(
                Some(l.dst_cell),
                lk,
                format!("{} is not an input of the destination cell", l.dst_pin),
            );
        }
        for w in l.path.windows(2) {
            if !rrg.has_edge(w[0], w[1]) {
                v(None, lk, format!("no switch {} -> {}", w[0], w[1]));
            }
        }
        for &n in &l.path[1..] {
            if n != l.dst_pin && !rrg.node(n).kind.is_channel() {
                v(None, lk, format!("{n} inside the path is not a wire"));
            }
            if !usable(mask, n) {
                v(None, lk, format!("{n} is {:?}", mask.get(n)));
            }
            if let Some(o) = owner.insert(n, li) {
                v(None, lk, format!("{n} also used by link {o}"));
            }
        }
    }
    out
}
