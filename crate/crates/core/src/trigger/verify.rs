// SPDX-License-Identifier: Apache-2.0
//! Independent checker for trigger mappings.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Serialize;

use super::mapping::{MapContext, Realization, SlotRef, TriggerMapping};
use crate::circuits::{BlockKind, TriggerNetlist};
use crate::fabric::{NodeId, NodeKind};
use crate::pnr::RouteNode;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MappingViolation {
    pub le: Option<String>,
    pub message: String,
}

/// Re-derives slot injectivity, connection traceability, pin availability,
/// LUT fan-in and feed legality. Returns every violation found.
pub fn verify_mapping(
    ctx: &MapContext,
    trig: &TriggerNetlist,
    m: &TriggerMapping,
) -> Vec<MappingViolation> {
    let mut out = Vec::new();
    let mut bad = |le: Option<&str>, message: String| {
        out.push(MappingViolation {
            le: le.map(str::to_string),
            message,
        })
    };
    let (rrg, fabric, net) = (ctx.rrg, ctx.fabric, &trig.netlist);
    let k = rrg.arch().lut_size_k;

    // Placement.
    let mut site: HashMap<&str, SlotRef> = HashMap::new();
    let mut taken: HashMap<SlotRef, &str> = HashMap::new();
    for s in &m.sites {
        let r = SlotRef {
            cell: s.cell,
            ble: s.ble,
        };
        if fabric
            .cells
            .get(s.cell as usize)
            .and_then(|c| c.slot(s.ble))
            .is_none()
        {
            bad(
                Some(&s.le),
                format!("cell {} has no spare BLE {}", s.cell, s.ble),
            );
        }
        if let Some(other) = taken.insert(r, &s.le) {
            bad(
                Some(&s.le),
                format!("shares cell {} BLE {} with `{other}`", s.cell, s.ble),
            );
        }
        if site.insert(&s.le, r).is_some() {
            bad(Some(&s.le), "placed twice".into());
        }
    }
    for b in &net.blocks {
        if b.kind.is_logic() && !site.contains_key(b.name.as_str()) {
            bad(Some(&b.name), "LE is not placed".into());
        }
        if b.kind == BlockKind::Lut && b.inputs.len() > k {
            bad(
                Some(&b.name),
                format!("LUT has {} inputs, K = {k}", b.inputs.len()),
            );
        }
    }
    if m.sites.len() != net.blocks.iter().filter(|b| b.kind.is_logic()).count() {
        bad(None, "placement lists LEs the trigger does not have".into());
    }
    let mut rt: HashMap<SlotRef, &str> = HashMap::new();
    for r in &m.route_throughs {
        if fabric
            .cells
            .get(r.slot.cell as usize)
            .and_then(|c| c.slot(r.slot.ble))
            .is_none()
        {
            bad(
                Some(&r.driver),
                format!(
                    "route-through cell {} BLE {} is not spare",
                    r.slot.cell, r.slot.ble
                ),
            );
        }
        if let Some(o) = taken.get(&r.slot) {
            bad(
                Some(&r.driver),
                format!("route-through slot is occupied by `{o}`"),
            );
        }
        if rt.insert(r.slot, &r.driver).is_some() {
            bad(Some(&r.driver), "route-through slot listed twice".into());
        }
    }

    // Connections: the mapping must list exactly the trigger's LE → LE edges.
    let mut want: BTreeMap<(String, String), usize> = BTreeMap::new();
    for n in &net.nets {
        let d = net.block(n.driver);
        if !d.kind.is_logic() {
            continue;
        }
        for s in &n.sinks {
            let sb = net.block(s.block);
            if sb.kind.is_logic() {
                *want.entry((d.name.clone(), sb.name.clone())).or_default() += 1;
            }
        }
    }
    let mut have: BTreeMap<(String, String), usize> = BTreeMap::new();
    for c in &m.connections {
        *have.entry((c.driver.clone(), c.sink.clone())).or_default() += 1;
    }
    if want != have {
        bad(
            None,
            "connection list does not match the trigger netlist".into(),
        );
    }
    for c in &m.connections {
        let (Some(&su), Some(&sv)) = (site.get(c.driver.as_str()), site.get(c.sink.as_str()))
        else {
            continue;
        };
        let link_ok = |l: u32| fabric.links.get(l as usize);
        match &c.realization {
            None => {
                if m.feasible {
                    bad(
                        Some(&c.driver),
                        format!("connection to `{}` is not realized", c.sink),
                    );
                }
            }
            Some(Realization::Intra) => {
                if su.cell != sv.cell {
                    bad(
                        Some(&c.driver),
                        format!("intra connection to `{}` spans cells", c.sink),
                    );
                }
            }
            Some(Realization::Link { link }) => match link_ok(*link) {
                Some(l)
                    if l.src_cell == su.cell && l.src_ble == su.ble && l.dst_cell == sv.cell => {}
                _ => bad(
                    Some(&c.driver),
                    format!("link {link} does not join `{}` to `{}`", c.driver, c.sink),
                ),
            },
            Some(Realization::Indirect {
                links,
                route_through,
            }) => {
                let ls: Option<Vec<_>> = links.iter().map(|&l| link_ok(l)).collect();
                let ok = match (ls.as_deref(), route_through.as_slice()) {
                    (Some([l]), [r]) => {
                        // Sibling route-through in the driver's cell.
                        r.cell == su.cell && *r != su && (l.src_cell, l.src_ble) == (r.cell, r.ble)
                    }
                    (Some([l1, l2]), [r]) => {
                        (l1.src_cell, l1.src_ble) == (su.cell, su.ble)
                            && r.cell == l1.dst_cell
                            && (l2.src_cell, l2.src_ble) == (r.cell, r.ble)
                    }
                    _ => false,
                };
                let tail = ls.as_ref().and_then(|v| v.last()).map(|l| l.dst_cell);
                let owned = route_through
                    .iter()
                    .all(|r| rt.get(r) == Some(&c.driver.as_str()));
                if !ok || !owned || tail != Some(sv.cell) {
                    bad(
                        Some(&c.driver),
                        format!("link chain does not join `{}` to `{}`", c.driver, c.sink),
                    );
                }
            }
        }
        if m.feasible && su.cell != sv.cell {
            let cell = &fabric.cells[su.cell as usize];
            if !cell.slot(su.ble).is_some_and(|s| s.output_ok) {
                bad(
                    Some(&c.driver),
                    "external fan-out from a blocked output pin".into(),
                );
            }
            if fabric.cells[sv.cell as usize].inputs.is_empty() {
                bad(Some(&c.sink), "cell has no available input pin".into());
            }
        }
    }

    // Feeds: legal trees over free, non-fabric nodes, mutually disjoint.
    let fabric_nodes: HashSet<NodeId> = fabric.nodes().into_iter().collect();
    let link_pins = fabric.link_pins();
    let opin_of: HashMap<&str, NodeId> = ctx
        .sources
        .iter()
        .map(|s| (s.name.as_str(), s.opin))
        .collect();
    let mut feed_owner: HashMap<NodeId, String> = HashMap::new();
    let mut check_tree =
        |what: &str, root: NodeId, tree: &[RouteNode], out: &mut Vec<MappingViolation>| {
            let mut e = |message: String| {
                out.push(MappingViolation {
                    le: None,
                    message: format!("{what}: {message}"),
                })
            };
            if tree
                .first()
                .is_none_or(|r| r.node != root || r.parent.is_some())
            {
                e(format!("does not start at {root}"));
                return;
            }
            let mut seen = HashSet::from([root]);
            for rn in &tree[1..] {
                let v = rn.node;
                if v.idx() >= rrg.len() {
                    e(format!("{v} is out of range"));
                    return;
                }
                match rn.parent {
                    Some(p) if seen.contains(&p) && rrg.has_edge(p, v) => {}
                    _ => e(format!("{v} does not hang off an earlier node by a switch")),
                }
                if !seen.insert(v) {
                    e(format!("{v} listed twice"));
                }
                if !ctx.mask.is_free(v) {
                    e(format!("{v} is {:?}", ctx.mask.get(v)));
                }
                if fabric_nodes.contains(&v) || link_pins.contains(&v) {
                    e(format!("{v} belongs to the trigger fabric"));
                }
                if let Some(o) = feed_owner.insert(v, what.to_string()) {
                    e(format!("{v} is also used by {o}"));
                }
            }
        };
    let mut feeds_out = Vec::new();
    for f in &m.input_feeds {
        let what = format!("feed `{}`", f.signal);
        let Some(&opin) = opin_of.get(f.signal.as_str()) else {
            bad(None, format!("{what} taps an unknown signal"));
            continue;
        };
        check_tree(&what, opin, &f.tree, &mut feeds_out);
        let want: std::collections::BTreeSet<u32> = trig
            .taps()
            .into_iter()
            .filter(|&t| net.block(t).name == f.signal)
            .filter_map(|t| net.block(t).output)
            .flat_map(|o| {
                net.net(o)
                    .sinks
                    .iter()
                    .filter_map(|p| site.get(net.block(p.block).name.as_str()))
                    .map(|s| s.cell)
            })
            .collect();
        if want.iter().copied().collect::<Vec<_>>() != f.cells {
            bad(None, format!("{what} serves the wrong cells"));
        }
        for &c in &f.cells {
            let Some(cell) = fabric.cells.get(c as usize) else {
                continue;
            };
            let hit = f.tree.iter().any(|rn| {
                rrg.node(rn.node).kind == NodeKind::Ipin && cell.inputs.contains(&rn.node)
            });
            if !hit {
                bad(
                    None,
                    format!("{what} never enters cell {c} through an available input"),
                );
            }
        }
    }
    if let Some(of) = &m.output_feed {
        let root = net.block(trig.root()).name.as_str();
        match site
            .get(root)
            .and_then(|s| fabric.cells.get(s.cell as usize)?.slot(s.ble))
        {
            Some(slot) => check_tree("output feed", slot.opin, &of.tree, &mut feeds_out),
            None => bad(Some(root), "output feed from an unplaced root".into()),
        }
        if !rrg.is_control_pin(of.control_pin)
            || !of.tree.iter().any(|rn| rn.node == of.control_pin)
        {
            bad(None, "output feed does not end at a control pin".into());
        }
    }
    out.extend(feeds_out);
    out
}
