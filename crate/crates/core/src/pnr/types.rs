// SPDX-License-Identifier: Apache-2.0
use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::circuits::{BlockId, Netlist};
use crate::error::{Error, Result};
use crate::fabric::{ArchSpec, NodeId, TileKind, IO_PADS_PER_TILE};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlacedBlock {
    pub block: String,
    pub x: u16,
    pub y: u16,
    /// BLE index inside a CLB, or pad index inside an I/O tile.
    pub sub: u16,
}

impl PlacedBlock {
    pub fn tile(&self) -> (usize, usize) {
        (self.x as usize, self.y as usize)
    }
}

/// Block → slot map, stored in netlist block order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub netlist: String,
    pub blocks: Vec<PlacedBlock>,
}

impl Placement {
    #[inline]
    pub fn get(&self, b: BlockId) -> &PlacedBlock {
        &self.blocks[b.idx()]
    }

    /// Inverse map: occupied slot `(x, y, sub)` → block.
    pub fn occupancy(&self) -> BTreeMap<(u16, u16, u16), BlockId> {
        self.blocks
            .iter()
            .enumerate()
            .map(|(i, p)| ((p.x, p.y, p.sub), BlockId(i as u32)))
            .collect()
    }

    /// Checks that the placement covers `netlist` and is legal on `arch`.
    pub fn validate(&self, netlist: &Netlist, arch: &ArchSpec) -> Result<()> {
        if self.blocks.len() != netlist.blocks.len() {
            return Err(Error::validation(format!(
                "placement has {} blocks, netlist has {}",
                self.blocks.len(),
                netlist.blocks.len()
            )));
        }
        let mut seen = HashSet::new();
        for (p, b) in self.blocks.iter().zip(&netlist.blocks) {
            if p.block != b.name {
                return Err(Error::validation(format!(
                    "placement lists `{}` where the netlist has `{}`",
                    p.block, b.name
                )));
            }
            let tile = arch.tile_kind(p.x as usize, p.y as usize);
            let ok = if b.kind.is_logic() {
                tile == TileKind::Clb && (p.sub as usize) < arch.bles_per_clb
            } else {
                tile == TileKind::Io && (p.sub as usize) < IO_PADS_PER_TILE
            };
            if !ok {
                return Err(Error::validation(format!(
                    "block `{}` placed on illegal slot ({}, {}, {})",
                    p.block, p.x, p.y, p.sub
                )));
            }
            if !seen.insert((p.x, p.y, p.sub)) {
                return Err(Error::validation(format!(
                    "slot ({}, {}, {}) holds more than one block",
                    p.x, p.y, p.sub
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteNode {
    pub node: NodeId,
    pub parent: Option<NodeId>,
}

/// Route tree of one net; `nodes[0]` is the root SOURCE and every other
/// node appears after its parent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteTree {
    pub net: String,
    pub nodes: Vec<RouteNode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Routing {
    pub channel_width: usize,
    pub nets: Vec<RouteTree>,
}

impl Routing {
    pub fn used_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nets
            .iter()
            .flat_map(|t| t.nodes.iter().map(|n| n.node))
    }

    /// Number of channel (wire) nodes used; the wirelength metric.
    pub fn wirelength(&self, rrg: &crate::fabric::RoutingResourceGraph) -> usize {
        self.used_nodes()
            .filter(|&n| rrg.node(n).kind.is_channel())
            .count()
    }
}
