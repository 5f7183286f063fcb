// SPDX-License-Identifier: Apache-2.0
mod common;

use std::collections::{BTreeMap, HashSet};
use std::time::Instant;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use debugfabric_core::debug::{
    emit_mux_config, fold_to_bipartite, has_augmenting_path, hopcroft_karp, select_signals, BipartiteConnectivity,
    Matching,
};
use debugfabric_core::fabric::{ArchSpec, NodeId, NodeKind, Occupancy, RoutingResourceGraph, RrNode};
use debugfabric_core::pnr::RouteNode;
use debugfabric_core::trace::{build_trace_overlay, Leaf, OverlayForest, OverlayParams, OverlayTree, SignalSource};

fn bip(adj: Vec<Vec<u32>>, n_right: usize) -> BipartiteConnectivity {
    BipartiteConnectivity {
        signals: (0..adj.len()).map(|i| format!("s{i}")).collect(),
        trace_inputs: (0..n_right as u32).map(NodeId).collect(),
        adj,
    }
}

#[test]
fn hopcroft_karp_matches_brute_force_on_200_instances() {
    for seed in 0..200 {
        let (adj, nr) = common::random_bipartite(seed);
        let left: Vec<u32> = (0..adj.len() as u32).collect();
        let m = hopcroft_karp(&adj, &left, nr);
        let size = m.iter().flatten().count();
        assert_eq!(size, common::brute_force_matching(&adj, nr), "instance {seed}");
        // Valid: every pair is an edge, right side used once.
        let mut used = HashSet::new();
        for (l, r) in m.iter().enumerate() {
            if let Some(r) = r {
                assert!(adj[l].contains(r) && used.insert(*r));
            }
        }
    }
}

#[test]
fn selection_is_maximum_by_certificate_and_brute_force() {
    for seed in 0..50 {
        let (adj, nr) = common::random_bipartite(1000 + seed);
        let b = bip(adj.clone(), nr);
        let want: Vec<String> = b.signals.iter().step_by(2).cloned().collect();
        let m = select_signals(&b, &want).unwrap();
        assert!(!has_augmenting_path(&b, &m));
        let sub: Vec<Vec<u32>> = adj.iter().step_by(2).cloned().collect();
        assert_eq!(m.len(), common::brute_force_matching(&sub, nr));
        assert_eq!(m.pairs.len() + m.unmatched.len(), want.len());
    }
}

#[test]
fn empty_forest_folds_to_nothing() {
    let f = OverlayForest { signals: vec![], trees: vec![] };
    let b = fold_to_bipartite(&f);
    assert_eq!(b.num_edges(), 0);
    assert!(b.trace_inputs.is_empty());
    let cfg = emit_mux_config(&f, &Matching { pairs: vec![], unmatched: vec![] }).unwrap();
    assert!(cfg.mux_selects.is_empty() && cfg.matching.is_empty());
}

/// opin_a → c1 → c2 → t, and opin_b → c1.
fn path_fixture() -> (RoutingResourceGraph, OverlayForest) {
    let n = |kind, x, index| RrNode { kind, x, y: 1, index, capacity: 1 };
    let nodes = vec![
        n(NodeKind::Opin, 1, 0),
        n(NodeKind::Opin, 1, 1),
        n(NodeKind::Chanx, 1, 0),
        n(NodeKind::Chanx, 2, 0),
        n(NodeKind::TbIpin, 2, 0),
    ];
    let e = |a: u32, b: u32| (NodeId(a), NodeId(b));
    let g = RoutingResourceGraph::from_nodes_and_edges(ArchSpec::default(), nodes, &[e(0, 2), e(1, 2), e(2, 3), e(3, 4)]);
    let signals = vec![
        SignalSource { id: 0, name: "a".into(), opin: NodeId(0) },
        SignalSource { id: 1, name: "b".into(), opin: NodeId(1) },
    ];
    let tree = OverlayTree {
        root: NodeId(4),
        nodes: vec![
            RouteNode { node: NodeId(4), parent: None },
            RouteNode { node: NodeId(3), parent: Some(NodeId(4)) },
            RouteNode { node: NodeId(2), parent: Some(NodeId(3)) },
        ],
        leaves: vec![
            Leaf { signal: 0, opin: NodeId(0), parent: NodeId(2) },
            Leaf { signal: 1, opin: NodeId(1), parent: NodeId(2) },
        ],
    };
    (g, OverlayForest { signals, trees: vec![tree] })
}

#[test]
fn one_tree_folds_to_one_edge_per_leaf() {
    let (_, f) = path_fixture();
    let b = fold_to_bipartite(&f);
    assert_eq!(b.adj, vec![vec![0], vec![0]]);
    assert_eq!(b.trace_inputs, vec![NodeId(4)]);
    let m = select_signals(&b, &["a", "b"]).unwrap();
    assert_eq!(m.len(), 1);
    assert_eq!(m.unmatched.len(), 1);
}

#[test]
fn single_pair_on_three_node_path_reaches_its_trace_input() {
    let (g, f) = path_fixture();
    let m = select_signals(&fold_to_bipartite(&f), &["b"]).unwrap();
    let cfg = emit_mux_config(&f, &m).unwrap();
    assert_eq!(cfg.mux_selects.len(), 3);
    let (arrived, double) = common::propagate(&g, &cfg);
    assert!(double.is_empty());
    assert_eq!(arrived, BTreeMap::from([(NodeId(4), NodeId(1))]));
}

#[test]
fn unknown_signal_is_an_error() {
    let (_, f) = path_fixture();
    let e = select_signals(&fold_to_bipartite(&f), &["a", "nope"]).unwrap_err();
    assert!(e.to_string().contains("nope"));
}

#[test]
fn suite_fold_agrees_with_traversal_and_configs_propagate() {
    let d = common::design(2, 1);
    let params = OverlayParams { fanout_target: 2, ..OverlayParams::default() };
    let (f, _) = build_trace_overlay(&d.rrg, &d.mask, &d.sources, &d.rrg.trace_inputs(), &params, 1).unwrap();
    let b = fold_to_bipartite(&f);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let s = rng.gen_range(0..b.signals.len());
        let t = rng.gen_range(0..b.trace_inputs.len());
        // Walk parent pointers from every leaf of `s` in tree `t`.
        let tree = &f.trees[t];
        let parents: BTreeMap<NodeId, Option<NodeId>> = tree.nodes.iter().map(|n| (n.node, n.parent)).collect();
        let reaches = tree.leaves.iter().filter(|l| l.signal as usize == s).any(|l| {
            let mut cur = l.parent;
            for _ in 0..=parents.len() {
                match parents.get(&cur) {
                    Some(Some(p)) => cur = *p,
                    Some(None) => return cur == tree.root,
                    None => return false,
                }
            }
            false
        });
        assert_eq!(b.has_edge(s, t), reaches, "signal {s}, tree {t}");
    }

    let user_hash = serde_json::to_string(&d.routing).unwrap();
    for k in 0..50 {
        let want: Vec<String> = (0..rng.gen_range(1..=2 * b.trace_inputs.len()))
            .map(|_| b.signals[rng.gen_range(0..b.signals.len())].clone())
            .collect();
        let m = select_signals(&b, &want).unwrap();
        assert!(!has_augmenting_path(&b, &m));
        let cfg = emit_mux_config(&f, &m).unwrap();
        let (arrived, double) = common::propagate(&d.rrg, &cfg);
        assert!(double.is_empty(), "set {k}");
        let expect: BTreeMap<NodeId, NodeId> = cfg
            .matching
            .iter()
            .map(|p| (p.trace_input, d.sources.iter().find(|s| s.name == p.signal).unwrap().opin))
            .collect();
        // Matched signals arrive where matched; nothing else arrives anywhere.
        assert_eq!(arrived, expect, "set {k}");
        assert!(cfg.mux_selects.iter().all(|s| d.mask.get(s.node) != Occupancy::User));
    }
    assert_eq!(serde_json::to_string(&d.routing).unwrap(), user_hash);
}

#[test]
fn largest_circuit_debug_turn_is_quick() {
    let d = common::design(9, 1);
    let params = OverlayParams { fanout_target: 2, ..OverlayParams::default() };
    let (f, _) = build_trace_overlay(&d.rrg, &d.mask, &d.sources, &d.rrg.trace_inputs(), &params, 1).unwrap();
    let want: Vec<&str> = d.sources.iter().step_by(3).map(|s| s.name.as_str()).collect();
    let t = Instant::now();
    let b = fold_to_bipartite(&f);
    let m = select_signals(&b, &want).unwrap();
    let cfg = emit_mux_config(&f, &m).unwrap();
    let elapsed = t.elapsed().as_secs_f64();
    assert!(!cfg.matching.is_empty());
    assert!(elapsed < 1.0, "{elapsed:.3}s");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adding_a_request_never_shrinks_the_matching(seed in 0u64..10_000, extra in 0usize..12) {
        let (adj, nr) = common::random_bipartite(seed);
        let b = bip(adj, nr);
        let base: Vec<String> = b.signals.iter().skip(1).step_by(2).cloned().collect();
        let mut more = base.clone();
        more.push(b.signals[extra % b.signals.len()].clone());
        let m0 = select_signals(&b, &base).unwrap();
        let m1 = select_signals(&b, &more).unwrap();
        prop_assert!(m1.len() >= m0.len());
        prop_assert_eq!(select_signals(&b, &more).unwrap(), m1);
    }
}
