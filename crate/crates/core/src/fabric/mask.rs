// SPDX-License-Identifier: Apache-2.0
use serde::{Deserialize, Serialize};

use super::rrg::{NodeId, RoutingResourceGraph};
use crate::pnr::Routing;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Occupancy {
    Free,
    User,
    OverlayTrace,
    OverlayTrigger,
}

/// Per-node occupancy of the routing resource graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourceMask {
    state: Vec<Occupancy>,
}

impl ResourceMask {
    pub fn all_free(n: usize) -> Self {
        ResourceMask {
            state: vec![Occupancy::Free; n],
        }
    }

    pub fn len(&self) -> usize {
        self.state.len()
    }

    pub fn is_empty(&self) -> bool {
        self.state.is_empty()
    }

    #[inline]
    pub fn get(&self, n: NodeId) -> Occupancy {
        self.state[n.idx()]
    }

    #[inline]
    pub fn is_free(&self, n: NodeId) -> bool {
        self.state[n.idx()] == Occupancy::Free
    }

    pub fn set(&mut self, n: NodeId, occ: Occupancy) {
        self.state[n.idx()] = occ;
    }

    /// Marks every listed node that is currently free as `occ`.
    pub fn claim(&mut self, nodes: impl IntoIterator<Item = NodeId>, occ: Occupancy) {
        for n in nodes {
            if self.is_free(n) {
                self.state[n.idx()] = occ;
            }
        }
    }

    pub fn count(&self, occ: Occupancy) -> usize {
        self.state.iter().filter(|&&s| s == occ).count()
    }

    pub fn nodes_with(&self, occ: Occupancy) -> impl Iterator<Item = NodeId> + '_ {
        self.state
            .iter()
            .enumerate()
            .filter(move |(_, &s)| s == occ)
            .map(|(i, _)| NodeId(i as u32))
    }

    /// `true` for every node that is not free; the blocked set routers use.
    pub fn blocked(&self) -> Vec<bool> {
        self.state.iter().map(|&s| s != Occupancy::Free).collect()
    }
}

/// Marks every node used by the user routing as `USER`; all others are free.
pub fn spare_mask(rrg: &RoutingResourceGraph, routing: &Routing) -> ResourceMask {
    let mut mask = ResourceMask::all_free(rrg.len());
    for n in routing.used_nodes() {
        mask.set(n, Occupancy::User);
    }
    mask
}
