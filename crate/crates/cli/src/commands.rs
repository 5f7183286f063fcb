// SPDX-License-Identifier: Apache-2.0
//! One function per subcommand. Each returns its exit status and a JSON
//! summary; errors are classified by the caller.

use std::path::Path;

use anyhow::{anyhow, Result};
use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use debugfabric_core::circuits::{emit_blif, gen_synthetic, gen_trigger, parse_netlist, BlockKind, Netlist, TriggerNetlist};
use debugfabric_core::debug::{emit_mux_config, fold_to_bipartite, select_signals, DebugConfig};
use debugfabric_core::fabric::{spare_mask, ArchSpec, ResourceMask, RoutingResourceGraph};
use debugfabric_core::pnr::{check_routing, find_min_channel_width, MinWidthParams, MinWidthResult, Placement, RouterParams, Routing};
use debugfabric_core::suite::{size_grid, suite, BenchCircuit};
use debugfabric_core::trace::{
    build_trace_overlay, signal_sources, verify_forest, ConnectivityReport, OverlayForest, OverlayParams,
};
use debugfabric_core::trigger::{
    build_trigger_fabric, map_trigger, verify_fabric, verify_mapping, MapContext, OverlayFabric, SaParams,
    TriggerMapping,
};
use debugfabric_core::circuits::FF_RATIO;
use debugfabric_core::{Error, Exec};

use crate::flow::{compile, config_problems, mask_with, random_request, rrg_for, Order, Width};
use crate::project::*;
use crate::{bench, stats, Cli, Command, Status};

pub(crate) type Done = (Status, Value);

/// Build-time record of a trace overlay: how it was made and how well it
/// connects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayReport {
    pub order: Order,
    pub seed: u64,
    pub params: OverlayParams,
    pub connectivity: ConnectivityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub routing: Vec<String>,
    pub forest: Vec<String>,
    pub fabric: Vec<String>,
    pub debug_config: Vec<String>,
    pub trigger_config: Vec<String>,
    /// Artifacts that were present and checked.
    pub checked: Vec<String>,
    pub total: usize,
}

pub(crate) fn dispatch(cli: &Cli, record: &str, exec: Exec) -> Result<Done> {
    let mut p = Project::open(&cli.dir, record)?;
    match &cli.command {
        Command::GenArch(a) => gen_arch(&mut p, a),
        Command::SynthRandom(a) => synth_random(&mut p, a),
        Command::SynthTrigger(a) => synth_trigger(&mut p, a),
        Command::Pnr(a) => pnr(&mut p, a, exec),
        Command::Minw(a) => minw(&mut p, a, exec),
        Command::BuildTraceOverlay(a) => build_overlay(&mut p, a),
        Command::BuildTriggerFabric(a) => build_fabric(&mut p, a),
        Command::SelectSignals(a) => select(&mut p, a),
        Command::MapTrigger(a) => map(&mut p, a, exec),
        Command::Verify => verify(&mut p),
        Command::Stats(a) => stats::project_stats(&mut p, a.table),
        Command::Bench(a) => bench::run_bench(&mut p, a, exec),
        Command::BenchTriggerSpeedup(a) => bench::run_speedup(&mut p, a, exec),
    }
}

pub(crate) fn find_suite(name: &str) -> Result<BenchCircuit> {
    suite().into_iter().find(|c| c.name == name).ok_or_else(|| {
        let names: Vec<String> = suite().into_iter().map(|c| c.name).collect();
        Error::validation(format!("no suite circuit `{name}` (have {})", names.join(", "))).into()
    })
}

fn gen_arch(p: &mut Project, a: &crate::GenArchArgs) -> Result<Done> {
    let mut arch = ArchSpec {
        grid_width: a.grid_width,
        grid_height: a.grid_height,
        lut_size_k: a.lut_size,
        bles_per_clb: a.bles_per_clb,
        clb_inputs: a.clb_inputs,
        channel_width_w: a.channel_width,
        fc_in: a.fc_in,
        fc_out: a.fc_out,
        tb_column_period: a.tb_period,
        tb_inputs_per_block: a.tb_inputs,
        tb_fc: a.tb_fc,
    };
    if let Some(name) = &a.suite {
        arch = find_suite(name)?.arch()?;
    } else if let Some(n) = a.for_luts {
        let logic = n + (n as f64 * FF_RATIO).round() as usize;
        (arch.grid_width, arch.grid_height) = size_grid(logic, arch.bles_per_clb)?;
    }
    arch.validate()?;
    p.write_json(ARCH, &arch)?;
    Ok((Status::Success, json!({ "arch": arch, "clb_slots": arch.clb_slot_count() })))
}

fn netlist_summary(n: &Netlist) -> Value {
    json!({
        "name": n.name,
        "luts": n.count(BlockKind::Lut),
        "ffs": n.count(BlockKind::Ff),
        "inputs": n.count(BlockKind::Input),
        "outputs": n.count(BlockKind::Output),
        "nets": n.nets.len(),
    })
}

fn synth_random(p: &mut Project, a: &crate::SynthArgs) -> Result<Done> {
    let n = match &a.suite {
        Some(name) => find_suite(name)?.netlist()?,
        None => gen_synthetic(a.seed, a.luts, a.rent)?,
    };
    p.write_text(NETLIST, &emit_blif(&n))?;
    Ok((Status::Success, json!({ "netlist": netlist_summary(&n) })))
}

fn read_netlist(p: &mut Project) -> Result<Netlist> {
    let text = p.read_text(NETLIST)?;
    Ok(parse_netlist(&text, NETLIST)?)
}

fn synth_trigger(p: &mut Project, a: &crate::SynthTriggerArgs) -> Result<Done> {
    let user = read_netlist(p)?;
    let t = gen_trigger(a.seed, a.les, &user)?;
    p.write_text(&a.out, &emit_blif(&t.netlist))?;
    Ok((Status::Success, json!({ "trigger": netlist_summary(&t.netlist), "file": a.out })))
}

fn pnr(p: &mut Project, a: &crate::PnrArgs, exec: Exec) -> Result<Done> {
    let arch: ArchSpec = p.read_json(ARCH)?;
    let n = read_netlist(p)?;
    let width = match a.width {
        Some(w) => Width::Fixed(w),
        None => Width::Margin(a.margin),
    };
    let c = compile(&n, &arch, width, a.w_hi, a.seed, exec)?;
    let violations = check_routing(&n, &c.placement, &c.rrg, &c.routing);
    if !violations.is_empty() {
        return Err(Error::Internal(format!("router produced {} violations: {:?}", violations.len(), violations[0])).into());
    }
    p.write_json(PLACEMENT, &c.placement)?;
    p.write_json(ROUTING, &c.routing)?;
    if let Some(m) = &c.minw {
        p.write_json(MINW, m)?;
    }
    Ok((
        Status::Success,
        json!({
            "w_min": c.minw.as_ref().map(|m| m.w_min),
            "channel_width": c.routing.channel_width,
            "nets": c.routing.nets.len(),
            "wirelength": c.routing.wirelength(&c.rrg),
        }),
    ))
}

fn minw(p: &mut Project, a: &crate::MinwArgs, exec: Exec) -> Result<Done> {
    let arch: ArchSpec = p.read_json(ARCH)?;
    let n = read_netlist(p)?;
    let placement: Placement = p.read_json(PLACEMENT)?;
    let params = MinWidthParams { w_hi: a.w_hi, router: RouterParams::with_seed(a.seed), exec };
    let r: MinWidthResult = find_min_channel_width(&n, &placement, &arch, &params)?;
    p.write_json(MINW, &r)?;
    Ok((Status::Success, json!({ "w_min": r.w_min, "trials": r.trials.len() })))
}

/// The compiled user design as stored in the project.
struct Design {
    netlist: Netlist,
    placement: Placement,
    routing: Routing,
    rrg: RoutingResourceGraph,
}

fn read_design(p: &mut Project) -> Result<Design> {
    let arch: ArchSpec = p.read_json(ARCH)?;
    let netlist = read_netlist(p)?;
    let placement: Placement = p.read_json(PLACEMENT)?;
    let routing: Routing = p.read_json(ROUTING)?;
    placement.validate(&netlist, &arch)?;
    let rrg = rrg_for(&arch, &routing)?;
    Ok(Design { netlist, placement, routing, rrg })
}

fn need(p: &Project, name: &str, why: &str) -> Result<()> {
    if p.exists(name) {
        Ok(())
    } else {
        Err(Error::validation(format!("`{name}` is missing: {why}")).into())
    }
}

fn build_overlay(p: &mut Project, a: &crate::TraceArgs) -> Result<Done> {
    let d = read_design(p)?;
    let fabric: Option<OverlayFabric> = match a.order {
        Order::TraceFirst => None,
        Order::TriggerFirst => {
            need(p, TRIGGER_FABRIC, "with --order trigger-first run build-trigger-fabric first")?;
            Some(p.read_json(TRIGGER_FABRIC)?)
        }
    };
    let mask = mask_with(&d.rrg, &d.routing, None, fabric.as_ref());
    let sigs = signal_sources(&d.netlist, &d.placement, &d.rrg)?;
    let params = OverlayParams { fanout_target: a.fanout_target, max_iters: a.max_iters, ..Default::default() };
    let (forest, report) = build_trace_overlay(&d.rrg, &mask, &sigs, &d.rrg.trace_inputs(), &params, a.seed)?;
    info!("trace overlay: {}/{} signals connected", report.connected, report.signals);
    let violations = verify_forest(&d.rrg, &mask, &forest);
    if !violations.is_empty() {
        return Err(Error::Internal(format!("overlay has {} violations: {:?}", violations.len(), violations[0])).into());
    }
    p.write_json(OVERLAY, &forest)?;
    let rep = OverlayReport { order: a.order, seed: a.seed, params, connectivity: report };
    p.write_json(OVERLAY_REPORT, &rep)?;
    let c = &rep.connectivity;
    let status = if c.unconnected.is_empty() { Status::Success } else { Status::Partial };
    Ok((
        status,
        json!({
            "fraction_connected": c.fraction_connected,
            "signals": c.signals,
            "connected": c.connected,
            "trees": c.trees,
            "unconnected": c.unconnected,
        }),
    ))
}

fn build_fabric(p: &mut Project, a: &crate::FabricArgs) -> Result<Done> {
    let d = read_design(p)?;
    let forest: Option<OverlayForest> = match a.order {
        Order::TriggerFirst => None,
        Order::TraceFirst => {
            need(p, OVERLAY, "with --order trace-first run build-trace-overlay first")?;
            Some(p.read_json(OVERLAY)?)
        }
    };
    let mask = mask_with(&d.rrg, &d.routing, forest.as_ref(), None);
    let fabric = build_trigger_fabric(&d.rrg, &mask, &d.placement, a.link_budget, a.seed);
    let violations = verify_fabric(&d.rrg, &mask, &d.placement, &fabric);
    if !violations.is_empty() {
        return Err(Error::Internal(format!("fabric has {} violations: {:?}", violations.len(), violations[0])).into());
    }
    p.write_json(TRIGGER_FABRIC, &fabric)?;
    Ok((
        Status::Success,
        json!({
            "cells": fabric.cells.len(),
            "slots": fabric.total_slots(),
            "links": fabric.links.len(),
            "link_budget": fabric.link_budget,
        }),
    ))
}

fn select(p: &mut Project, a: &crate::SelectArgs) -> Result<Done> {
    let arch: ArchSpec = p.read_json(ARCH)?;
    let routing: Routing = p.read_json(ROUTING)?;
    let forest: OverlayForest = p.read_json(OVERLAY)?;
    let rrg = rrg_for(&arch, &routing)?;
    let want = match a.random {
        Some(k) => random_request(&forest.signals, k, &mut ChaCha8Rng::seed_from_u64(a.seed)),
        None => a.want.clone(),
    };
    let bip = fold_to_bipartite(&forest);
    let matching = select_signals(&bip, &want)?;
    let cfg = emit_mux_config(&forest, &matching)?;
    let problems = config_problems(&rrg, &spare_mask(&rrg, &routing), &forest.signals, &cfg);
    if !problems.is_empty() {
        return Err(Error::Internal(format!("configuration check failed: {}", problems.join("; "))).into());
    }
    p.write_json(DEBUG_CONFIG, &cfg)?;
    let status = if cfg.unmatched.is_empty() { Status::Success } else { Status::Partial };
    Ok((
        status,
        json!({
            "requested": want.len(),
            "matched": cfg.matching.len(),
            "unmatched": cfg.unmatched,
            "mux_selects": cfg.mux_selects.len(),
        }),
    ))
}

/// Overlay build order of the stored artifacts, from their provenance.
fn stored_order(p: &Project) -> Order {
    let derived_from_fabric = p
        .manifest()
        .artifacts
        .get(OVERLAY)
        .is_some_and(|r| r.inputs.contains_key(TRIGGER_FABRIC));
    if derived_from_fabric {
        Order::TriggerFirst
    } else {
        Order::TraceFirst
    }
}

/// Resolves `--trigger`: a relative name present in the project is a
/// project artifact, anything else is read from the filesystem.
fn read_trigger_text(p: &mut Project, path: &Path) -> Result<(String, String)> {
    let name = path.to_string_lossy().into_owned();
    if path.is_relative() && p.exists(&name) {
        Ok((p.read_text(&name)?, name))
    } else {
        Ok((p.read_external(path)?, name))
    }
}

fn map(p: &mut Project, a: &crate::MapArgs, exec: Exec) -> Result<Done> {
    let d = read_design(p)?;
    let fabric: OverlayFabric = p.read_json(TRIGGER_FABRIC)?;
    let forest: Option<OverlayForest> = if p.exists(OVERLAY) { Some(p.read_json(OVERLAY)?) } else { None };
    let (text, name) = read_trigger_text(p, &a.trigger)?;
    let trig = TriggerNetlist::new(parse_netlist(&text, &name)?, &d.netlist)?;
    let mask = mask_with(&d.rrg, &d.routing, forest.as_ref(), Some(&fabric));
    let sources = signal_sources(&d.netlist, &d.placement, &d.rrg)?;
    let ctx = MapContext { rrg: &d.rrg, mask: &mask, sources: &sources, fabric: &fabric };
    let params = SaParams {
        seed: a.seed,
        gamma_ind: a.gamma_ind,
        gamma_blk: a.gamma_blk,
        gamma_feed: a.gamma_feed,
        restarts: a.restarts,
        ..Default::default()
    };
    let m: TriggerMapping = map_trigger(&ctx, &trig, &params, exec)?;
    let violations = verify_mapping(&ctx, &trig, &m);
    if m.feasible && !violations.is_empty() {
        return Err(Error::Internal(format!("mapping has {} violations: {:?}", violations.len(), violations[0])).into());
    }
    p.write_json(TRIGGER_CONFIG, &m)?;
    let status = if !m.feasible {
        Status::AlgorithmicFailure
    } else if !m.failed_inputs.is_empty() || m.output_feed.is_none() {
        Status::Partial
    } else {
        Status::Success
    };
    Ok((
        status,
        json!({
            "feasible": m.feasible,
            "cost": m.cost,
            "blocked_terms": m.blocked_terms,
            "violating_les": m.violating_les,
            "failed_inputs": m.failed_inputs,
            "output_feed": m.output_feed.is_some(),
            "temperatures": m.history.len(),
        }),
    ))
}

fn strings<T: std::fmt::Debug>(v: Vec<T>) -> Vec<String> {
    v.iter().map(|x| format!("{x:?}")).collect()
}

fn verify(p: &mut Project) -> Result<Done> {
    let d = read_design(p)?;
    let order = stored_order(p);
    let mut rep = VerifyReport {
        routing: strings(check_routing(&d.netlist, &d.placement, &d.rrg, &d.routing)),
        forest: vec![],
        fabric: vec![],
        debug_config: vec![],
        trigger_config: vec![],
        checked: vec![ROUTING.into()],
        total: 0,
    };
    let forest: Option<OverlayForest> = if p.exists(OVERLAY) { Some(p.read_json(OVERLAY)?) } else { None };
    let fabric: Option<OverlayFabric> =
        if p.exists(TRIGGER_FABRIC) { Some(p.read_json(TRIGGER_FABRIC)?) } else { None };
    // Each overlay is checked against the occupancy it was built on.
    let before = |first: bool, other: Option<&OverlayFabric>, f: Option<&OverlayForest>| -> ResourceMask {
        if first {
            mask_with(&d.rrg, &d.routing, None, None)
        } else {
            mask_with(&d.rrg, &d.routing, f, other)
        }
    };
    if let Some(f) = &forest {
        let mask = before(order == Order::TraceFirst, fabric.as_ref(), None);
        rep.forest = strings(verify_forest(&d.rrg, &mask, f));
        rep.checked.push(OVERLAY.into());
    }
    if let Some(fab) = &fabric {
        let mask = before(order == Order::TriggerFirst, None, forest.as_ref());
        rep.fabric = strings(verify_fabric(&d.rrg, &mask, &d.placement, fab));
        rep.checked.push(TRIGGER_FABRIC.into());
    }
    if let (Some(f), true) = (&forest, p.exists(DEBUG_CONFIG)) {
        let cfg: DebugConfig = p.read_json(DEBUG_CONFIG)?;
        rep.debug_config = config_problems(&d.rrg, &spare_mask(&d.rrg, &d.routing), &f.signals, &cfg);
        rep.checked.push(DEBUG_CONFIG.into());
    }
    if let (Some(fab), true) = (&fabric, p.exists(TRIGGER_CONFIG)) {
        let m: TriggerMapping = p.read_json(TRIGGER_CONFIG)?;
        let trig_name = p
            .manifest()
            .artifacts
            .get(TRIGGER_CONFIG)
            .and_then(|r| r.inputs.keys().find(|k| k.ends_with(".blif") && k.as_str() != NETLIST).cloned())
            .ok_or_else(|| anyhow!(Error::validation("trigger_config.json does not record its trigger netlist")))?;
        let (text, name) = read_trigger_text(p, Path::new(&trig_name))?;
        let trig = TriggerNetlist::new(parse_netlist(&text, &name)?, &d.netlist)?;
        let mask = mask_with(&d.rrg, &d.routing, forest.as_ref(), Some(fab));
        let sources = signal_sources(&d.netlist, &d.placement, &d.rrg)?;
        let ctx = MapContext { rrg: &d.rrg, mask: &mask, sources: &sources, fabric: fab };
        rep.trigger_config = if m.feasible { strings(verify_mapping(&ctx, &trig, &m)) } else {
            vec!["mapping is infeasible".into()]
        };
        rep.checked.push(TRIGGER_CONFIG.into());
    }
    rep.total = rep.routing.len() + rep.forest.len() + rep.fabric.len() + rep.debug_config.len() + rep.trigger_config.len();
    p.write_json(VERIFY_REPORT, &rep)?;
    let status = if rep.total == 0 { Status::Success } else { Status::AlgorithmicFailure };
    Ok((status, json!({ "checked": rep.checked, "violations": rep.total, "order": order })))
}
