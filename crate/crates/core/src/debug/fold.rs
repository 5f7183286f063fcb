// SPDX-License-Identifier: Apache-2.0
use serde::{Deserialize, Serialize};

use crate::fabric::NodeId;
use crate::trace::OverlayForest;

/// Signals (left, by id) against trace inputs (right, by root id). Each tree
/// collapses onto its root: `s — t` iff `s` is a leaf of the tree at `t`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BipartiteConnectivity {
    pub signals: Vec<String>,
    pub trace_inputs: Vec<NodeId>,
    /// Sorted right-vertex indices per signal.
    pub adj: Vec<Vec<u32>>,
}

impl BipartiteConnectivity {
    pub fn num_edges(&self) -> usize {
        self.adj.iter().map(Vec::len).sum()
    }

    pub fn has_edge(&self, s: usize, t: usize) -> bool {
        self.adj[s].binary_search(&(t as u32)).is_ok()
    }
}

pub fn fold_to_bipartite(forest: &OverlayForest) -> BipartiteConnectivity {
    let trace_inputs: Vec<NodeId> = forest.trees.iter().map(|t| t.root).collect();
    let mut adj = vec![Vec::new(); forest.signals.len()];
    for (ti, t) in forest.trees.iter().enumerate() {
        for l in &t.leaves {
            adj[l.signal as usize].push(ti as u32);
        }
    }
    for a in &mut adj {
        a.sort_unstable();
        a.dedup();
    }
    BipartiteConnectivity {
        signals: forest.signals.iter().map(|s| s.name.clone()).collect(),
        trace_inputs,
        adj,
    }
}
