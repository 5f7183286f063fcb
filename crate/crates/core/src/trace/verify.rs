// SPDX-License-Identifier: Apache-2.0
//! Independent forest checker; trees are checked in parallel.

use std::collections::{HashMap, HashSet};

use serde::Serialize;

use super::types::{OverlayForest, OverlayTree};
use crate::fabric::{NodeId, NodeKind, Occupancy, ResourceMask, RoutingResourceGraph};
use crate::par::Exec;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ForestViolation {
    pub tree: Option<NodeId>,
    pub node: Option<NodeId>,
    pub message: String,
}

fn check_tree(
    rrg: &RoutingResourceGraph,
    mask: &ResourceMask,
    forest: &OverlayForest,
    t: &OverlayTree,
) -> Vec<ForestViolation> {
    let mut out = Vec::new();
    let mut bad = |node: Option<NodeId>, message: String| {
        out.push(ForestViolation {
            tree: Some(t.root),
            node,
            message,
        })
    };
    let in_range = |n: NodeId| n.idx() < rrg.len();
    if !in_range(t.root) || rrg.node(t.root).kind != NodeKind::TbIpin || rrg.is_control_pin(t.root)
    {
        bad(Some(t.root), "root is not a trace-buffer data input".into());
        return out;
    }
    let mut parent: HashMap<NodeId, Option<NodeId>> = HashMap::new();
    for rn in &t.nodes {
        if !in_range(rn.node) {
            bad(Some(rn.node), "node id out of range".into());
            return out;
        }
        if parent.insert(rn.node, rn.parent).is_some() {
            bad(Some(rn.node), "node listed twice".into());
        }
    }
    match parent.get(&t.root) {
        Some(None) => {}
        Some(Some(_)) => bad(Some(t.root), "root has a parent".into()),
        None => bad(Some(t.root), "root missing from node list".into()),
    }
    for rn in &t.nodes {
        let v = rn.node;
        match mask.get(v) {
            Occupancy::Free | Occupancy::OverlayTrace => {}
            occ => bad(Some(v), format!("tree uses a {occ:?} node")),
        }
        if v != t.root && !rrg.node(v).kind.is_channel() {
            bad(
                Some(v),
                format!("{:?} node inside a tree", rrg.node(v).kind),
            );
        }
        match rn.parent {
            None if v != t.root => bad(Some(v), "non-root node without parent".into()),
            Some(p) if !parent.contains_key(&p) => bad(Some(v), format!("parent {p} not in tree")),
            Some(p) if !rrg.has_edge(v, p) => bad(Some(v), format!("no switch {v} -> {p}")),
            _ => {}
        }
        // Parent chain must end at the root.
        let mut cur = v;
        let mut steps = 0;
        while let Some(Some(p)) = parent.get(&cur) {
            cur = *p;
            steps += 1;
            if steps > parent.len() {
                break;
            }
        }
        if cur != t.root {
            bad(Some(v), "parent chain does not reach the root".into());
        }
    }
    for l in &t.leaves {
        let sig = forest.signals.get(l.signal as usize);
        if sig.is_none_or(|s| s.opin != l.opin) {
            bad(
                Some(l.opin),
                format!("leaf for signal {} does not start at its OPIN", l.signal),
            );
            continue;
        }
        if !in_range(l.opin) || rrg.node(l.opin).kind != NodeKind::Opin {
            bad(Some(l.opin), "leaf is not an OPIN".into());
        } else if !parent.contains_key(&l.parent) {
            bad(Some(l.parent), "leaf attaches outside the tree".into());
        } else if !rrg.has_edge(l.opin, l.parent) {
            bad(
                Some(l.opin),
                format!("no switch {} -> {}", l.opin, l.parent),
            );
        }
    }
    out
}

pub fn verify_forest(
    rrg: &RoutingResourceGraph,
    mask: &ResourceMask,
    forest: &OverlayForest,
) -> Vec<ForestViolation> {
    verify_forest_with(Exec::default(), rrg, mask, forest)
}

pub fn verify_forest_with(
    exec: Exec,
    rrg: &RoutingResourceGraph,
    mask: &ResourceMask,
    forest: &OverlayForest,
) -> Vec<ForestViolation> {
    let mut out: Vec<ForestViolation> = exec
        .map(&forest.trees, |t| check_tree(rrg, mask, forest, t))
        .into_iter()
        .flatten()
        .collect();
    let mut roots = HashSet::new();
    let mut owner: HashMap<NodeId, NodeId> = HashMap::new();
    for t in &forest.trees {
        if !roots.insert(t.root) {
            out.push(ForestViolation {
                tree: Some(t.root),
                node: None,
                message: "two trees share a root".into(),
            });
        }
        for rn in &t.nodes {
            if let Some(other) = owner.insert(rn.node, t.root) {
                if other != t.root {
                    out.push(ForestViolation {
                        tree: Some(t.root),
                        node: Some(rn.node),
                        message: format!("node also belongs to tree {other}"),
                    });
                }
            }
        }
    }
    out
}
