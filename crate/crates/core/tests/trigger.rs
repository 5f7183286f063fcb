// SPDX-License-Identifier: Apache-2.0
mod common;

use std::collections::HashSet;

use debugfabric_core::circuits::{gen_trigger, TriggerNetlist};
use debugfabric_core::fabric::{NodeId, Occupancy, ResourceMask};
use debugfabric_core::pnr::{check_routing, RouteNode};
use debugfabric_core::trace::{build_trace_overlay, OverlayForest, OverlayParams};
use debugfabric_core::trigger::{
    baseline_recompile_trigger, build_trigger_fabric, map_trigger, verify_fabric, verify_mapping, MapContext,
    OverlayFabric, SaParams, TriggerMapping,
};
use debugfabric_core::Exec;

// ---------------------------------------------------- exhaustive fixtures

#[test]
fn cost_function_matches_the_oracle_on_every_placement() {
    let params = SaParams::default();
    for seed in 0..40 {
        let f = common::sa_fixture(seed);
        let p = f.problem(&params);
        for (g, &(c, b, _)) in f.slots().iter().enumerate() {
            assert_eq!(p.slot(g as u32), (c as u32, b));
        }
        let mut sites = Vec::new();
        common::each_injection(p.num_les(), p.num_slots(), &mut sites, &mut |s| {
            let want = f.oracle_cost(s, &params);
            assert_eq!(p.cost(s), want, "fixture {seed}, sites {s:?}");
            // Feasible exactly when no term is blocked.
            assert_eq!(p.blocked_terms(s) == 0, want < params.gamma_blk as i64, "fixture {seed}, sites {s:?}");
        });
    }
}

#[test]
fn annealing_finds_the_exhaustive_minimum() {
    let hits = common::sa_optimality(100);
    assert!(hits >= 95, "{hits}/100 runs optimal");
}

#[test]
fn annealing_history_is_monotone_and_reports_the_best() {
    let params = SaParams::default();
    for seed in 0..20 {
        let f = common::sa_fixture(seed);
        let p = f.problem(&params);
        let a = p.anneal(&params, seed);
        assert!(a.history.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(a.history.last().copied(), Some(a.cost));
        assert_eq!(p.cost(&a.sites), a.cost);
        assert_eq!(a, p.anneal(&params, seed));
    }
}

// ------------------------------------------------------------ suite flow

struct Flow {
    d: common::Design,
    forest: OverlayForest,
    fabric: OverlayFabric,
    /// User routing plus both overlays.
    mask: ResourceMask,
}

fn flow(index: usize, link_budget: usize) -> Flow {
    let d = common::design(index, 1);
    let params = OverlayParams { fanout_target: 2, ..OverlayParams::default() };
    let (forest, _) = build_trace_overlay(&d.rrg, &d.mask, &d.sources, &d.rrg.trace_inputs(), &params, 1).unwrap();
    let mut mask = d.mask.clone();
    forest.claim(&mut mask);
    let fabric = build_trigger_fabric(&d.rrg, &mask, &d.placement, link_budget, 1);
    assert!(verify_fabric(&d.rrg, &mask, &d.placement, &fabric).is_empty());
    fabric.claim(&mut mask);
    Flow { d, forest, fabric, mask }
}

impl Flow {
    fn ctx(&self) -> MapContext<'_> {
        MapContext { rrg: &self.d.rrg, mask: &self.mask, sources: &self.d.sources, fabric: &self.fabric }
    }

    fn map(&self, trig: &TriggerNetlist, seed: u64) -> TriggerMapping {
        map_trigger(&self.ctx(), trig, &SaParams::with_seed(seed), Exec::default()).unwrap()
    }
}

#[test]
fn suite_mappings_verify_and_stay_off_user_resources() {
    let fl = flow(0, 8);
    let user: HashSet<NodeId> = fl.d.routing.used_nodes().collect();
    let forest: HashSet<NodeId> = fl.forest.nodes().collect();
    let fabric: HashSet<NodeId> = fl.fabric.nodes().into_iter().collect();
    assert!(fabric.is_disjoint(&user) && fabric.is_disjoint(&forest));
    let mut feasible = 0;
    for (seed, les) in [(1, 4), (2, 6), (3, 8), (4, 4)] {
        let trig = gen_trigger(seed, les, &fl.d.netlist).unwrap();
        let m = fl.map(&trig, seed);
        assert_eq!(m.feasible, m.blocked_terms == 0, "seed {seed}");
        assert_eq!(m.feasible, m.violating_les.is_empty(), "seed {seed}");
        assert!(m.history.windows(2).all(|w| w[1] <= w[0]));
        if !m.feasible {
            continue;
        }
        feasible += 1;
        let v = verify_mapping(&fl.ctx(), &trig, &m);
        assert!(v.is_empty(), "seed {seed}: {v:?}");
        // Feeds start at the tapped user OPIN; everything after it is spare.
        let trees = m.input_feeds.iter().map(|f| &f.tree).chain(m.output_feed.iter().map(|f| &f.tree));
        for rn in trees.flat_map(|t| &t[1..]) {
            assert!(!user.contains(&rn.node), "seed {seed}: feed uses user node {}", rn.node);
        }
        assert_eq!(m, fl.map(&trig, seed), "seed {seed} not deterministic");
    }
    assert!(feasible > 0);
}

#[test]
fn faults_in_a_mapping_are_reported() {
    let fl = flow(0, 8);
    let (trig, m) = (1..20)
        .map(|s| {
            let t = gen_trigger(s, 4, &fl.d.netlist).unwrap();
            let m = fl.map(&t, s);
            (t, m)
        })
        .find(|(_, m)| m.feasible && !m.input_feeds.is_empty())
        .expect("a feasible mapping with a feed");

    let mut twin = m.clone();
    twin.sites[1].cell = twin.sites[0].cell;
    twin.sites[1].ble = twin.sites[0].ble;
    let v = verify_mapping(&fl.ctx(), &trig, &twin);
    assert!(v.iter().any(|x| x.message.contains("shares cell")), "{v:?}");

    let user = fl.mask.nodes_with(Occupancy::User).find(|&n| fl.d.rrg.node(n).kind.is_channel()).unwrap();
    let mut over = m.clone();
    let tree = &mut over.input_feeds[0].tree;
    let last = tree.last().unwrap().node;
    tree.push(RouteNode { node: user, parent: Some(last) });
    let v = verify_mapping(&fl.ctx(), &trig, &over);
    assert!(v.iter().any(|x| x.message.contains("is User")), "{v:?}");
}

#[test]
fn too_many_les_is_a_capacity_error() {
    let fl = flow(0, 2);
    let trig = gen_trigger(1, fl.fabric.total_slots() + 1, &fl.d.netlist).unwrap();
    let e = map_trigger(&fl.ctx(), &trig, &SaParams::default(), Exec::default()).unwrap_err();
    assert!(matches!(e, debugfabric_core::Error::Capacity(_)), "{e}");
}

#[test]
fn baseline_recompile_is_deterministic_and_legal() {
    let d = common::design(0, 1);
    let trig = gen_trigger(1, 2, &d.netlist).unwrap();
    let arch = d.rrg.arch().clone();
    let a = baseline_recompile_trigger(&d.netlist, &trig, &arch, 3).unwrap();
    let b = baseline_recompile_trigger(&d.netlist, &trig, &arch, 3).unwrap();
    assert_eq!(a.placement, b.placement);
    assert_eq!(a.routing, b.routing);
    assert!(a.elapsed_s > 0.0);
    let merged = debugfabric_core::circuits::merge_trigger(&d.netlist, &trig).unwrap();
    let rrg = debugfabric_core::fabric::build_rrg(&arch).unwrap();
    assert!(check_routing(&merged, &a.placement, &rrg, &a.routing).is_empty());
}
