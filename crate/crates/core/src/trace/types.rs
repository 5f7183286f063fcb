// SPDX-License-Identifier: Apache-2.0
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::circuits::Netlist;
use crate::error::{Error, Result};
use crate::fabric::{NodeId, NodeKind, Occupancy, ResourceMask, RoutingResourceGraph};
use crate::pnr::{Placement, RouteNode};

/// An observable user signal and the output pin that carries it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalSource {
    pub id: u32,
    pub name: String,
    pub opin: NodeId,
}

/// Every LUT, FF and primary-input output of a placed netlist, ids in
/// netlist block order.
pub fn signal_sources(
    netlist: &Netlist,
    placement: &Placement,
    rrg: &RoutingResourceGraph,
) -> Result<Vec<SignalSource>> {
    netlist
        .signals()
        .into_iter()
        .enumerate()
        .map(|(i, b)| {
            let p = placement.get(b);
            let opin = rrg
                .lookup(NodeKind::Opin, p.x as usize, p.y as usize, p.sub as usize)
                .ok_or_else(|| Error::Internal(format!("no OPIN under block `{}`", p.block)))?;
            Ok(SignalSource {
                id: i as u32,
                name: netlist.block(b).name.clone(),
                opin,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Leaf {
    pub signal: u32,
    pub opin: NodeId,
    /// Tree node the OPIN drives.
    pub parent: NodeId,
}

/// One tree. `parent` points toward the root (the direction signals flow);
/// the root TB_IPIN has no parent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlayTree {
    pub root: NodeId,
    pub nodes: Vec<RouteNode>,
    pub leaves: Vec<Leaf>,
}

impl OverlayTree {
    pub fn parent_map(&self) -> BTreeMap<NodeId, Option<NodeId>> {
        self.nodes.iter().map(|n| (n.node, n.parent)).collect()
    }

    /// Nodes from `from` to the root, following parents.
    pub fn path_to_root(&self, from: NodeId) -> Option<Vec<NodeId>> {
        let map = self.parent_map();
        let mut out = vec![from];
        let mut cur = from;
        while let Some(p) = *map.get(&cur)? {
            if out.len() > map.len() {
                return None;
            }
            out.push(p);
            cur = p;
        }
        (cur == self.root).then_some(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlayForest {
    pub signals: Vec<SignalSource>,
    /// Sorted by root id.
    pub trees: Vec<OverlayTree>,
}

impl OverlayForest {
    /// All routing nodes claimed by trees (leaf OPINs excluded).
    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.trees
            .iter()
            .flat_map(|t| t.nodes.iter().map(|n| n.node))
    }

    /// Roots of the trees each signal is a leaf of, indexed by signal id.
    pub fn trees_of_signals(&self) -> Vec<Vec<NodeId>> {
        let mut out = vec![Vec::new(); self.signals.len()];
        for t in &self.trees {
            for l in &t.leaves {
                if let Some(v) = out.get_mut(l.signal as usize) {
                    v.push(t.root);
                }
            }
        }
        for v in &mut out {
            v.sort_unstable();
            v.dedup();
        }
        out
    }

    pub fn tree(&self, root: NodeId) -> Option<&OverlayTree> {
        self.trees
            .binary_search_by_key(&root, |t| t.root)
            .ok()
            .map(|i| &self.trees[i])
    }

    pub fn signal_id(&self, name: &str) -> Option<u32> {
        self.signals.iter().find(|s| s.name == name).map(|s| s.id)
    }

    /// Marks every tree node as claimed by the trace overlay.
    pub fn claim(&self, mask: &mut ResourceMask) {
        mask.claim(self.nodes(), Occupancy::OverlayTrace);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalReach {
    pub signal: String,
    pub roots: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityReport {
    pub fraction_connected: f64,
    pub signals: usize,
    pub connected: usize,
    pub trees: usize,
    pub reach: Vec<SignalReach>,
    pub unconnected: Vec<String>,
    /// Wall time of the build; kept out of the artifact so it stays
    /// reproducible.
    #[serde(skip)]
    pub build_time_s: f64,
}

impl ConnectivityReport {
    /// Recounts connectivity from the forest itself.
    pub fn from_forest(forest: &OverlayForest) -> Self {
        let per = forest.trees_of_signals();
        let reach: Vec<SignalReach> = forest
            .signals
            .iter()
            .map(|s| SignalReach {
                signal: s.name.clone(),
                roots: per[s.id as usize].len(),
            })
            .collect();
        let unconnected: Vec<String> = reach
            .iter()
            .filter(|r| r.roots == 0)
            .map(|r| r.signal.clone())
            .collect();
        let connected = reach.len() - unconnected.len();
        let fraction_connected = if reach.is_empty() {
            1.0
        } else {
            connected as f64 / reach.len() as f64
        };
        ConnectivityReport {
            fraction_connected,
            signals: reach.len(),
            connected,
            trees: forest.trees.len(),
            reach,
            unconnected,
            build_time_s: 0.0,
        }
    }
}
