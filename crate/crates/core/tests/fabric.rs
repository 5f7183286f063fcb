// SPDX-License-Identifier: Apache-2.0
mod common;

use std::collections::{BTreeMap, HashSet};

use proptest::prelude::*;

use debugfabric_core::fabric::{build_rrg, spare_mask, ArchSpec, NodeKind, Occupancy};
use debugfabric_core::pnr::{Routing, RouteNode, RouteTree};
use debugfabric_core::Error;

fn tiny() -> ArchSpec {
    ArchSpec {
        grid_width: 1,
        grid_height: 1,
        lut_size_k: 2,
        bles_per_clb: 1,
        clb_inputs: 4,
        channel_width_w: 2,
        fc_in: 1.0,
        fc_out: 1.0,
        tb_column_period: 2,
        tb_inputs_per_block: 2,
        tb_fc: 1.0,
    }
}

/// Counts nodes cell by cell from the layout rules alone: CLBs carry a
/// SOURCE/OPIN pair per BLE and an IPIN/SINK pair per input, perimeter I/O
/// tiles (corners excluded) carry four pads with both pairs, trace-buffer
/// tiles carry data inputs plus one control input, and every channel segment
/// between tiles carries W tracks.
fn enumerate(a: &ArchSpec) -> BTreeMap<NodeKind, usize> {
    let mut cols = Vec::new();
    let (mut clbs, mut pos) = (0, 1);
    while clbs < a.grid_width {
        let tb = pos % a.tb_column_period == 0;
        cols.push(tb);
        clbs += usize::from(!tb);
        pos += 1;
    }
    let (nx, ny) = (cols.len(), a.grid_height);
    let mut h: BTreeMap<NodeKind, usize> = BTreeMap::new();
    let mut add = |k, n| *h.entry(k).or_insert(0) += n;
    for y in 0..=ny + 1 {
        for x in 0..=nx + 1 {
            let edge_x = x == 0 || x == nx + 1;
            let edge_y = y == 0 || y == ny + 1;
            if edge_x && edge_y {
                continue;
            }
            if edge_x || edge_y {
                for k in [NodeKind::Source, NodeKind::Opin, NodeKind::Ipin, NodeKind::Sink] {
                    add(k, 4);
                }
            } else if cols[x - 1] {
                add(NodeKind::TbIpin, a.tb_inputs_per_block + 1);
            } else {
                add(NodeKind::Source, a.bles_per_clb);
                add(NodeKind::Opin, a.bles_per_clb);
                add(NodeKind::Ipin, a.clb_inputs);
                add(NodeKind::Sink, a.clb_inputs);
            }
        }
    }
    add(NodeKind::Chanx, nx * (ny + 1) * a.channel_width_w);
    add(NodeKind::Chany, (nx + 1) * ny * a.channel_width_w);
    h
}

#[test]
fn single_tile_node_count_matches_enumeration() {
    let g = build_rrg(&tiny()).unwrap();
    assert_eq!(g.len(), enumerate(&tiny()).values().sum::<usize>());
    // Frozen: 1 BLE (2) + 4 inputs (8) + 4 I/O tiles (64) + 2·2 CHANX + 2·2 CHANY.
    assert_eq!(g.len(), 82);
    assert_eq!(g.kind_histogram(), enumerate(&tiny()));
}

#[test]
fn larger_grids_match_enumeration() {
    for (w, h, period) in [(3, 2, 2), (5, 4, 3), (8, 8, 4)] {
        let a = ArchSpec { grid_width: w, grid_height: h, tb_column_period: period, ..ArchSpec::default() };
        assert_eq!(build_rrg(&a).unwrap().kind_histogram(), enumerate(&a), "{w}x{h}/{period}");
    }
}

#[test]
fn zero_input_fraction_is_rejected() {
    let a = ArchSpec { fc_in: 0.0, ..ArchSpec::default() };
    assert!(matches!(build_rrg(&a), Err(Error::Validation(_))));
    let a = ArchSpec { grid_width: 0, ..ArchSpec::default() };
    assert!(matches!(build_rrg(&a), Err(Error::Validation(_))));
}

#[test]
fn square_histogram_is_rotation_invariant() {
    // A 90° rotation swaps rows and columns and hence CHANX and CHANY.
    let a = ArchSpec { grid_width: 4, grid_height: 4, tb_column_period: 8, fc_in: 0.5, fc_out: 0.5, ..ArchSpec::default() };
    let h = build_rrg(&a).unwrap().kind_histogram();
    let mut rotated = h.clone();
    rotated.insert(NodeKind::Chanx, h[&NodeKind::Chany]);
    rotated.insert(NodeKind::Chany, h[&NodeKind::Chanx]);
    assert_eq!(h, rotated);
}

#[test]
fn identical_arch_gives_identical_bytes() {
    let a = ArchSpec::default();
    let x = serde_json::to_string(&build_rrg(&a).unwrap().to_json()).unwrap();
    let y = serde_json::to_string(&build_rrg(&a).unwrap().to_json()).unwrap();
    assert_eq!(x, y);
}

#[test]
fn empty_routing_leaves_everything_free() {
    let g = build_rrg(&ArchSpec::default()).unwrap();
    let m = spare_mask(&g, &Routing { channel_width: 16, nets: vec![] });
    assert_eq!(m.count(Occupancy::Free), g.len());
}

#[test]
fn mask_is_user_exactly_on_route_nodes() {
    let g = build_rrg(&ArchSpec::default()).unwrap();
    let picked: Vec<_> = g.ids().step_by(37).collect();
    let tree = RouteTree {
        net: "n".into(),
        nodes: picked.iter().map(|&node| RouteNode { node, parent: None }).collect(),
    };
    let m = spare_mask(&g, &Routing { channel_width: 16, nets: vec![tree] });
    let user: HashSet<_> = m.nodes_with(Occupancy::User).collect();
    assert_eq!(user, picked.into_iter().collect());
}

#[test]
fn free_channel_count_is_total_minus_route_union() {
    let d = common::design(0, 1);
    // Union of route-tree nodes straight from the serialized routing.
    let json: serde_json::Value = serde_json::to_value(&d.routing).unwrap();
    let mut union = HashSet::new();
    for net in json["nets"].as_array().unwrap() {
        for n in net["nodes"].as_array().unwrap() {
            union.insert(n["node"].as_u64().unwrap() as u32);
        }
    }
    let chan = |i: u32| d.rrg.nodes()[i as usize].kind.is_channel();
    let total = (0..d.rrg.len() as u32).filter(|&i| chan(i)).count();
    let used = union.iter().filter(|&&i| chan(i)).count();
    let free = d.mask.nodes_with(Occupancy::Free).filter(|n| chan(n.0)).count();
    assert_eq!(free, total - used);
}

fn arch_strategy() -> impl Strategy<Value = ArchSpec> {
    (1usize..5, 1usize..5, 1usize..5, 1usize..5, 2usize..5, 1usize..4, 0.1f64..=1.0, 0.1f64..=1.0, 0.1f64..=1.0)
        .prop_map(|(gw, gh, bles, tb_in, period, half_w, fc_in, fc_out, tb_fc)| ArchSpec {
            grid_width: gw,
            grid_height: gh,
            lut_size_k: 4,
            bles_per_clb: bles,
            clb_inputs: 4,
            channel_width_w: 2 * half_w,
            fc_in,
            fc_out,
            tb_column_period: period,
            tb_inputs_per_block: tb_in,
            tb_fc,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn graph_invariants_hold(a in arch_strategy()) {
        let g = build_rrg(&a).unwrap();
        prop_assert_eq!(g.kind_histogram(), enumerate(&a));
        for (u, v) in g.edges() {
            prop_assert_ne!(u, v);
            let (nu, nv) = (g.node(u), g.node(v));
            if nu.kind.is_channel() && nv.kind.is_channel() {
                prop_assert_eq!(nu.index, nv.index);
            }
        }
        for id in g.ids() {
            let n = g.node(id);
            prop_assert_eq!(n.capacity, 1);
            match n.kind {
                NodeKind::TbIpin => prop_assert!(!g.fanin(id).is_empty()),
                NodeKind::Opin => {
                    prop_assert_eq!(g.fanin(id).len(), 1);
                    prop_assert_eq!(g.node(g.fanin(id)[0]).kind, NodeKind::Source);
                }
                NodeKind::Ipin => {
                    prop_assert_eq!(g.fanout(id).len(), 1);
                    prop_assert_eq!(g.node(g.fanout(id)[0]).kind, NodeKind::Sink);
                }
                NodeKind::Source => {
                    let seen = g.reachable_from(id);
                    prop_assert!(g.ids().any(|s| seen[s.idx()] && g.node(s).kind == NodeKind::Sink));
                }
                _ => {}
            }
        }
    }
}
