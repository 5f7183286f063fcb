// SPDX-License-Identifier: Apache-2.0
//! Post-route legality checker. Written independently of the router: it
//! re-derives each net's required sinks directly from the placement.

use std::collections::{HashMap, HashSet};

use serde::Serialize;

use super::types::{Placement, Routing};
use crate::circuits::{BlockKind, Netlist};
use crate::fabric::{NodeId, NodeKind, RoutingResourceGraph};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoutingViolation {
    pub net: Option<String>,
    pub node: Option<NodeId>,
    pub message: String,
}

fn v(net: Option<&str>, node: Option<NodeId>, message: String) -> RoutingViolation {
    RoutingViolation {
        net: net.map(str::to_string),
        node,
        message,
    }
}

pub fn check_routing(
    netlist: &Netlist,
    placement: &Placement,
    rrg: &RoutingResourceGraph,
    routing: &Routing,
) -> Vec<RoutingViolation> {
    let mut out = Vec::new();
    if routing.channel_width != rrg.arch().channel_width_w {
        out.push(v(
            None,
            None,
            format!(
                "routing was made for W={} but the graph has W={}",
                routing.channel_width,
                rrg.arch().channel_width_w
            ),
        ));
    }
    let by_name: HashMap<&str, usize> = netlist
        .nets
        .iter()
        .enumerate()
        .map(|(i, n)| (n.name.as_str(), i))
        .collect();
    let mut routed = HashSet::new();
    let mut usage: HashMap<NodeId, usize> = HashMap::new();

    for tree in &routing.nets {
        let name = tree.net.as_str();
        let Some(&ni) = by_name.get(name) else {
            out.push(v(Some(name), None, "route tree for unknown net".into()));
            continue;
        };
        if !routed.insert(ni) {
            out.push(v(Some(name), None, "net routed twice".into()));
        }
        let net = &netlist.nets[ni];
        let d = placement.get(net.driver);
        let mut nodes = HashSet::new();
        for (k, rn) in tree.nodes.iter().enumerate() {
            if rn.node.idx() >= rrg.len() {
                out.push(v(Some(name), Some(rn.node), "node id out of range".into()));
                continue;
            }
            *usage.entry(rn.node).or_default() += 1;
            if !nodes.insert(rn.node) {
                out.push(v(
                    Some(name),
                    Some(rn.node),
                    "node appears twice in one tree".into(),
                ));
            }
            match (k, rn.parent) {
                (0, None) => {
                    let n = rrg.node(rn.node);
                    if n.kind != NodeKind::Source || (n.x, n.y, n.index) != (d.x, d.y, d.sub) {
                        out.push(v(
                            Some(name),
                            Some(rn.node),
                            "root is not the driver's SOURCE".into(),
                        ));
                    }
                }
                (0, Some(_)) => out.push(v(Some(name), Some(rn.node), "root has a parent".into())),
                (_, None) => out.push(v(
                    Some(name),
                    Some(rn.node),
                    "non-root node without parent".into(),
                )),
                (_, Some(p)) => {
                    if !nodes.contains(&p) {
                        out.push(v(
                            Some(name),
                            Some(rn.node),
                            format!("parent {p} not earlier in the tree"),
                        ));
                    } else if !rrg.has_edge(p, rn.node) {
                        out.push(v(
                            Some(name),
                            Some(rn.node),
                            format!("no switch {p} -> {}", rn.node),
                        ));
                    }
                }
            }
        }
        let sinks_at = |x: u16, y: u16| {
            nodes.iter().any(|&n| {
                let r = rrg.node(n);
                r.kind == NodeKind::Sink && r.x == x && r.y == y
            })
        };
        for pin in &net.sinks {
            let p = placement.get(pin.block);
            let blk = netlist.block(pin.block);
            let ok = match blk.kind {
                BlockKind::Output => nodes.iter().any(|&n| {
                    let r = rrg.node(n);
                    r.kind == NodeKind::Sink && (r.x, r.y, r.index) == (p.x, p.y, p.sub)
                }),
                _ => {
                    let local =
                        netlist.block(net.driver).kind.is_logic() && (p.x, p.y) == (d.x, d.y);
                    local || sinks_at(p.x, p.y)
                }
            };
            if !ok {
                out.push(v(
                    Some(name),
                    None,
                    format!("sink block `{}` not reached", blk.name),
                ));
            }
        }
    }
    for (ni, net) in netlist.nets.iter().enumerate() {
        if routed.contains(&ni) {
            continue;
        }
        let d = placement.get(net.driver);
        let driver_logic = netlist.block(net.driver).kind.is_logic();
        let needs = net.sinks.iter().any(|pin| {
            let p = placement.get(pin.block);
            netlist.block(pin.block).kind == BlockKind::Output
                || !driver_logic
                || (p.x, p.y) != (d.x, d.y)
        });
        if needs {
            out.push(v(
                Some(&net.name),
                None,
                "net has external sinks but no route".into(),
            ));
        }
    }
    let mut over: Vec<(NodeId, usize)> = usage
        .into_iter()
        .filter(|&(n, c)| c > rrg.node(n).capacity as usize)
        .collect();
    over.sort();
    for (n, c) in over {
        out.push(v(
            None,
            Some(n),
            format!("node used by {c} nets (capacity {})", rrg.node(n).capacity),
        ));
    }
    out
}
