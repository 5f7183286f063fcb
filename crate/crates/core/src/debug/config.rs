// SPDX-License-Identifier: Apache-2.0
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::matching::Matching;
use crate::error::{Error, Result};
use crate::fabric::{NodeId, NodeKind, RoutingResourceGraph};
use crate::trace::OverlayForest;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchPair {
    pub signal: String,
    pub trace_input: NodeId,
}

/// Multiplexer `node` forwards the signal arriving from `input`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MuxSelect {
    pub node: NodeId,
    pub input: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DebugConfig {
    pub matching: Vec<MatchPair>,
    /// Sorted by node.
    pub mux_selects: Vec<MuxSelect>,
    pub unmatched: Vec<String>,
}

/// Sets, for every matched pair, each multiplexer on the leaf-to-root path
/// to its incoming path edge. `matching` indexes trace inputs in the order
/// of `forest.trees` (as produced by `fold_to_bipartite`).
pub fn emit_mux_config(forest: &OverlayForest, matching: &Matching) -> Result<DebugConfig> {
    let corrupt = |m: String| Error::Internal(format!("overlay forest is inconsistent: {m}"));
    let mut selects: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let mut pairs = Vec::with_capacity(matching.pairs.len());
    for &(s, ti) in &matching.pairs {
        let tree = forest
            .trees
            .get(ti as usize)
            .ok_or_else(|| corrupt(format!("no tree #{ti}")))?;
        let sig = forest
            .signals
            .get(s as usize)
            .ok_or_else(|| corrupt(format!("no signal #{s}")))?;
        let leaf = tree.leaves.iter().find(|l| l.signal == s).ok_or_else(|| {
            corrupt(format!(
                "`{}` is not a leaf of tree {}",
                sig.name, tree.root
            ))
        })?;
        let parent = tree.parent_map();
        let (mut pred, mut cur) = (leaf.opin, leaf.parent);
        for _ in 0..=parent.len() {
            if let Some(&prev) = selects.get(&cur) {
                if prev != pred {
                    return Err(corrupt(format!(
                        "mux {cur} selected from both {prev} and {pred}"
                    )));
                }
            }
            selects.insert(cur, pred);
            if cur == tree.root {
                break;
            }
            match parent.get(&cur) {
                Some(Some(p)) => {
                    pred = cur;
                    cur = *p;
                }
                _ => return Err(corrupt(format!("path from `{}` breaks at {cur}", sig.name))),
            }
        }
        if cur != tree.root {
            return Err(corrupt(format!(
                "path from `{}` never reaches {}",
                sig.name, tree.root
            )));
        }
        pairs.push(MatchPair {
            signal: sig.name.clone(),
            trace_input: tree.root,
        });
    }
    let unmatched = matching
        .unmatched
        .iter()
        .map(|&s| {
            forest
                .signals
                .get(s as usize)
                .map(|x| x.name.clone())
                .ok_or_else(|| corrupt(format!("no signal #{s}")))
        })
        .collect::<Result<_>>()?;
    Ok(DebugConfig {
        matching: pairs,
        mux_selects: selects
            .into_iter()
            .map(|(node, input)| MuxSelect { node, input })
            .collect(),
        unmatched,
    })
}

/// Follows the configured selects back from every trace input that has
/// one, returning the OPIN that drives it. Checks that every select uses a
/// real switch.
pub fn simulate_config(
    rrg: &RoutingResourceGraph,
    config: &DebugConfig,
) -> Result<BTreeMap<NodeId, NodeId>> {
    let sel: BTreeMap<NodeId, NodeId> = config
        .mux_selects
        .iter()
        .map(|m| (m.node, m.input))
        .collect();
    if sel.len() != config.mux_selects.len() {
        return Err(Error::Internal("a multiplexer has two selects".into()));
    }
    let mut out = BTreeMap::new();
    for (&node, _) in sel
        .iter()
        .filter(|(n, _)| rrg.node(**n).kind == NodeKind::TbIpin)
    {
        let mut cur = node;
        let mut steps = 0;
        while let Some(&from) = sel.get(&cur) {
            if !rrg.has_edge(from, cur) {
                return Err(Error::Internal(format!(
                    "select {from} -> {cur} is not a switch"
                )));
            }
            cur = from;
            steps += 1;
            if steps > sel.len() {
                return Err(Error::Internal(format!("select loop behind {node}")));
            }
        }
        if rrg.node(cur).kind != NodeKind::Opin {
            return Err(Error::Internal(format!(
                "trace input {node} is fed by a dangling {cur}"
            )));
        }
        out.insert(node, cur);
    }
    Ok(out)
}
