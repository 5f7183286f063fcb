// SPDX-License-Identifier: Apache-2.0
//! Whole-flow benchmark over the bundled suite, checked against thresholds
//! read from a JSON file.
//!
//! Wall-clock measurements live under keys named `timing`; everything else
//! in a report is a pure function of the inputs and seeds (see
//! [`strip_timing`]).

use std::time::Instant;

use anyhow::Result;
use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use debugfabric_core::circuits::{gen_trigger, Netlist};
use debugfabric_core::debug::{emit_mux_config, fold_to_bipartite, select_signals};
use debugfabric_core::fabric::spare_mask;
use debugfabric_core::pnr::check_routing;
use debugfabric_core::suite::{suite, BenchCircuit};
use debugfabric_core::trace::{build_trace_overlay, signal_sources, verify_forest, OverlayParams};
use debugfabric_core::trigger::{
    baseline_recompile_trigger, build_trigger_fabric, map_trigger, verify_fabric, verify_mapping, MapContext,
    SaParams,
};
use debugfabric_core::{Error, Exec};

use crate::commands::{find_suite, Done};
use crate::flow::{compile, config_problems, mask_with, request_sets, Width};
use crate::project::{sha256_hex, to_json, Project, STATS, TRIGGER_SPEEDUP};
use crate::{BenchArgs, SpeedupArgs, Status};

/// Trigger sizes, one per suite circuit in order.
pub const TRIGGER_LES: [usize; 10] = [4, 6, 8, 10, 12, 16, 20, 24, 28, 32];
/// Extra tracks over w_min the user circuit is routed at.
pub const WIDTH_MARGIN: f64 = 0.3;
pub const W_HI: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub min_mean_fraction_connected: f64,
    pub min_circuit_fraction_connected: f64,
    pub max_mean_overlay_ratio: f64,
    pub min_median_trigger_speedup: f64,
    /// Fraction of random request sets whose configuration must check out.
    pub min_config_pass_rate: f64,
    pub max_circuit_seconds: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            min_mean_fraction_connected: 0.95,
            min_circuit_fraction_connected: 0.90,
            max_mean_overlay_ratio: 1.0,
            min_median_trigger_speedup: 10.0,
            min_config_pass_rate: 1.0,
            max_circuit_seconds: 60.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchOptions {
    pub seed: u64,
    /// Random request sets per circuit; 0 skips the configuration check.
    pub requests: usize,
    pub link_budget: usize,
    pub fanout_target: usize,
    /// Map a trigger and time the recompile baseline.
    pub trigger: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions { seed: 1, requests: 50, link_budget: 8, fanout_target: 1, trigger: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigStats {
    pub sets: usize,
    pub passed: usize,
    pub unmatched: usize,
    /// First few problems found, if any.
    pub problems: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FabricStats {
    pub cells: usize,
    pub slots: usize,
    pub links: usize,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerTiming {
    pub map_s: f64,
    pub baseline_s: Option<f64>,
    pub speedup: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerStats {
    pub les: usize,
    pub seed: u64,
    pub feasible: bool,
    pub cost: i64,
    pub blocked_terms: usize,
    pub failed_inputs: usize,
    pub output_feed: bool,
    pub violations: usize,
    pub baseline_error: Option<String>,
    pub timing: TriggerTiming,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitTiming {
    pub place_s: f64,
    pub route_s: f64,
    pub overlay_s: f64,
    /// overlay_s / (place_s + route_s).
    pub overlay_ratio: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitStats {
    pub name: String,
    pub luts: usize,
    pub grid: [usize; 2],
    pub w_min: usize,
    pub channel_width: usize,
    pub routing_violations: usize,
    pub signals: usize,
    pub connected: usize,
    pub fraction_connected: f64,
    pub trees: usize,
    pub forest_violations: usize,
    pub config: Option<ConfigStats>,
    pub fabric: FabricStats,
    pub trigger: Option<TriggerStats>,
    pub timing: CircuitTiming,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

fn at_least(name: &str, value: f64, threshold: f64) -> Check {
    Check { name: name.into(), value, threshold, pass: value >= threshold }
}

fn at_most(name: &str, value: f64, threshold: f64) -> Check {
    Check { name: name.into(), value, threshold, pass: value <= threshold }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub circuits: usize,
    pub mean_fraction_connected: f64,
    pub min_fraction_connected: f64,
    pub config_sets: usize,
    pub config_passed: usize,
    pub mappings: usize,
    pub feasible_mappings: usize,
    pub mapping_violations: usize,
    pub routing_violations: usize,
    pub forest_violations: usize,
    pub fabric_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTiming {
    pub mean_overlay_ratio: f64,
    pub median_trigger_speedup: Option<f64>,
    pub trigger_speedups: Vec<f64>,
    pub max_circuit_s: f64,
    pub checks: Vec<Check>,
    /// Every check, timed or not, passed.
    pub all_passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub options: BenchOptions,
    pub thresholds: Thresholds,
    pub circuits: Vec<CircuitStats>,
    pub summary: Summary,
    /// Checks on deterministic quantities.
    pub checks: Vec<Check>,
    pub timing: ReportTiming,
}

/// Removes every `timing` member, recursively.
pub fn strip_timing(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.remove("timing");
            m.values_mut().for_each(strip_timing);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn config_check(
    rrg: &debugfabric_core::fabric::RoutingResourceGraph,
    routing: &debugfabric_core::pnr::Routing,
    forest: &debugfabric_core::trace::OverlayForest,
    opts: &BenchOptions,
) -> Result<ConfigStats> {
    let user = spare_mask(rrg, routing);
    let routing_hash = sha256_hex(to_json(routing)?.as_bytes());
    let bip = fold_to_bipartite(forest);
    // Sets up to twice the trace-input count, so some requests oversubscribe.
    let max = (2 * bip.trace_inputs.len()).max(1);
    let mut st = ConfigStats { sets: 0, passed: 0, unmatched: 0, problems: vec![] };
    for (k, req) in request_sets(&forest.signals, opts.requests, max, opts.seed).iter().enumerate() {
        let m = select_signals(&bip, req)?;
        let cfg = emit_mux_config(forest, &m)?;
        let mut problems = config_problems(rrg, &user, &forest.signals, &cfg);
        if sha256_hex(to_json(routing)?.as_bytes()) != routing_hash {
            problems.push("user routing changed".into());
        }
        st.sets += 1;
        st.unmatched += cfg.unmatched.len();
        if problems.is_empty() {
            st.passed += 1;
        } else if st.problems.len() < 5 {
            st.problems.push(format!("set {k}: {}", problems.join("; ")));
        }
    }
    Ok(st)
}

/// Runs the whole flow on one circuit. Stages run sequentially.
pub fn run_circuit(c: &BenchCircuit, index: usize, opts: &BenchOptions) -> Result<CircuitStats> {
    let start = Instant::now();
    let exec = Exec::Sequential;
    let netlist: Netlist = c.netlist()?;
    let arch = c.arch()?;
    let comp = compile(&netlist, &arch, Width::Margin(WIDTH_MARGIN), W_HI, opts.seed, exec)?;
    let rrg = &comp.rrg;
    let routing_violations = check_routing(&netlist, &comp.placement, rrg, &comp.routing).len();

    let user_mask = mask_with(rrg, &comp.routing, None, None);
    let sigs = signal_sources(&netlist, &comp.placement, rrg)?;
    let params = OverlayParams { fanout_target: opts.fanout_target, ..Default::default() };
    let t = Instant::now();
    let (forest, report) = build_trace_overlay(rrg, &user_mask, &sigs, &rrg.trace_inputs(), &params, opts.seed)?;
    let overlay_s = t.elapsed().as_secs_f64();
    let forest_violations = verify_forest(rrg, &user_mask, &forest).len();

    let config = if opts.requests > 0 { Some(config_check(rrg, &comp.routing, &forest, opts)?) } else { None };

    let trace_mask = mask_with(rrg, &comp.routing, Some(&forest), None);
    let fabric = build_trigger_fabric(rrg, &trace_mask, &comp.placement, opts.link_budget, opts.seed);
    let fabric_stats = FabricStats {
        cells: fabric.cells.len(),
        slots: fabric.total_slots(),
        links: fabric.links.len(),
        violations: verify_fabric(rrg, &trace_mask, &comp.placement, &fabric).len(),
    };

    let trigger = if opts.trigger {
        let les = TRIGGER_LES[index % TRIGGER_LES.len()];
        let tseed = 100 * opts.seed + index as u64;
        let trig = gen_trigger(tseed, les, &netlist)?;
        let mask = mask_with(rrg, &comp.routing, Some(&forest), Some(&fabric));
        let ctx = MapContext { rrg, mask: &mask, sources: &sigs, fabric: &fabric };
        let t = Instant::now();
        let m = map_trigger(&ctx, &trig, &SaParams::with_seed(opts.seed), exec)?;
        let map_s = t.elapsed().as_secs_f64();
        let violations = if m.feasible { verify_mapping(&ctx, &trig, &m).len() } else { 0 };
        let w_arch = arch.with_channel_width(comp.routing.channel_width);
        let (baseline_s, baseline_error) = match baseline_recompile_trigger(&netlist, &trig, &w_arch, opts.seed) {
            Ok(b) => (Some(b.elapsed_s), None),
            Err(e) => {
                warn!("{}: baseline recompile failed: {e}", c.name);
                (None, Some(e.to_string()))
            }
        };
        Some(TriggerStats {
            les,
            seed: tseed,
            feasible: m.feasible,
            cost: m.cost,
            blocked_terms: m.blocked_terms,
            failed_inputs: m.failed_inputs.len(),
            output_feed: m.output_feed.is_some(),
            violations,
            baseline_error,
            timing: TriggerTiming { map_s, baseline_s, speedup: baseline_s.map(|b| b / map_s.max(1e-9)) },
        })
    } else {
        None
    };

    let compile_s = comp.place_s + comp.route_s;
    let stats = CircuitStats {
        name: c.name.clone(),
        luts: c.n_luts,
        grid: [arch.grid_width, arch.grid_height],
        w_min: comp.minw.as_ref().map_or(comp.routing.channel_width, |m| m.w_min),
        channel_width: comp.routing.channel_width,
        routing_violations,
        signals: report.signals,
        connected: report.connected,
        fraction_connected: report.fraction_connected,
        trees: report.trees,
        forest_violations,
        config,
        fabric: fabric_stats,
        trigger,
        timing: CircuitTiming {
            place_s: comp.place_s,
            route_s: comp.route_s,
            overlay_s,
            overlay_ratio: overlay_s / compile_s.max(1e-9),
            total_s: start.elapsed().as_secs_f64(),
        },
    };
    info!(
        "{}: W={} connected {:.3} trigger {:?}",
        stats.name,
        stats.channel_width,
        stats.fraction_connected,
        stats.trigger.as_ref().map(|t| (t.feasible, t.timing.speedup))
    );
    Ok(stats)
}

/// Runs `circuits` concurrently under `exec` and checks the thresholds.
pub fn bench(circuits: &[(usize, BenchCircuit)], opts: &BenchOptions, th: &Thresholds, exec: Exec) -> Result<BenchReport> {
    let stats: Vec<CircuitStats> =
        exec.map(circuits, |(i, c)| run_circuit(c, *i, opts)).into_iter().collect::<Result<_>>()?;
    Ok(assemble(stats, opts, th))
}

pub fn assemble(circuits: Vec<CircuitStats>, opts: &BenchOptions, th: &Thresholds) -> BenchReport {
    let fc: Vec<f64> = circuits.iter().map(|c| c.fraction_connected).collect();
    let trig: Vec<&TriggerStats> = circuits.iter().filter_map(|c| c.trigger.as_ref()).collect();
    let cfg: Vec<&ConfigStats> = circuits.iter().filter_map(|c| c.config.as_ref()).collect();
    let summary = Summary {
        circuits: circuits.len(),
        mean_fraction_connected: mean(fc.iter().copied()),
        min_fraction_connected: fc.iter().copied().fold(f64::INFINITY, f64::min).min(1.0),
        config_sets: cfg.iter().map(|c| c.sets).sum(),
        config_passed: cfg.iter().map(|c| c.passed).sum(),
        mappings: trig.len(),
        feasible_mappings: trig.iter().filter(|t| t.feasible).count(),
        mapping_violations: trig.iter().map(|t| t.violations).sum(),
        routing_violations: circuits.iter().map(|c| c.routing_violations).sum(),
        forest_violations: circuits.iter().map(|c| c.forest_violations).sum(),
        fabric_violations: circuits.iter().map(|c| c.fabric.violations).sum(),
    };
    let mut checks = vec![
        at_least("mean_fraction_connected", summary.mean_fraction_connected, th.min_mean_fraction_connected),
        at_least("min_fraction_connected", summary.min_fraction_connected, th.min_circuit_fraction_connected),
        at_most(
            "checker_violations",
            (summary.routing_violations + summary.forest_violations + summary.fabric_violations) as f64,
            0.0,
        ),
    ];
    if !cfg.is_empty() {
        let rate = summary.config_passed as f64 / summary.config_sets.max(1) as f64;
        checks.push(at_least("config_pass_rate", rate, th.min_config_pass_rate));
    }
    if !trig.is_empty() {
        checks.push(at_most("feasible_mapping_violations", summary.mapping_violations as f64, 0.0));
    }

    let speedups: Vec<f64> = trig.iter().filter_map(|t| t.timing.speedup).collect();
    let mean_overlay_ratio = mean(circuits.iter().map(|c| c.timing.overlay_ratio));
    let max_circuit_s = circuits.iter().map(|c| c.timing.total_s).fold(0.0, f64::max);
    let med = median(&speedups);
    let mut timed = vec![
        at_most("mean_overlay_ratio", mean_overlay_ratio, th.max_mean_overlay_ratio),
        at_most("max_circuit_seconds", max_circuit_s, th.max_circuit_seconds),
    ];
    if !trig.is_empty() {
        // A failed baseline leaves a pair without a ratio; that fails the check.
        let value = if speedups.len() == trig.len() { med.unwrap_or(0.0) } else { 0.0 };
        timed.push(at_least("median_trigger_speedup", value, th.min_median_trigger_speedup));
    }
    let all_passed = checks.iter().chain(&timed).all(|c| c.pass);
    BenchReport {
        options: opts.clone(),
        thresholds: th.clone(),
        circuits,
        summary,
        checks,
        timing: ReportTiming {
            mean_overlay_ratio,
            median_trigger_speedup: med,
            trigger_speedups: speedups,
            max_circuit_s,
            checks: timed,
            all_passed,
        },
    }
}

/// Suite circuits by name (all of them when `names` is empty), with their
/// suite index.
pub fn select_circuits(names: &[String]) -> Result<Vec<(usize, BenchCircuit)>> {
    let all = suite();
    if names.is_empty() {
        return Ok(all.into_iter().enumerate().collect());
    }
    names
        .iter()
        .map(|n| {
            let c = find_suite(n)?;
            let i = all.iter().position(|x| x.name == c.name).expect("suite circuit");
            Ok((i, c))
        })
        .collect()
}

fn failed_checks(checks: &[Check]) -> Vec<&str> {
    checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect()
}

pub(crate) fn run_bench(p: &mut Project, a: &BenchArgs, exec: Exec) -> Result<Done> {
    let th: Thresholds = match &a.thresholds {
        Some(path) => {
            let text = p.read_external(path)?;
            serde_json::from_str(&text)
                .map_err(|e| Error::validation(format!("thresholds {}: {e}", path.display())))?
        }
        None => Thresholds::default(),
    };
    let opts = BenchOptions { seed: a.seed, requests: a.requests, link_budget: a.link_budget, ..Default::default() };
    let circuits = select_circuits(&a.circuits)?;
    let report = bench(&circuits, &opts, &th, exec)?;
    p.write_json(STATS, &report)?;
    let mut failed = failed_checks(&report.checks);
    failed.extend(failed_checks(&report.timing.checks));
    let status = if failed.is_empty() { Status::Success } else { Status::Partial };
    Ok((
        status,
        json!({
            "summary": report.summary,
            "mean_overlay_ratio": report.timing.mean_overlay_ratio,
            "median_trigger_speedup": report.timing.median_trigger_speedup,
            "failed_checks": failed,
        }),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupPair {
    pub circuit: String,
    pub trigger: TriggerStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupTiming {
    pub median_speedup: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupReport {
    pub seed: u64,
    pub link_budget: usize,
    pub pairs: Vec<SpeedupPair>,
    pub feasible: usize,
    pub mapping_violations: usize,
    pub timing: SpeedupTiming,
}

pub(crate) fn run_speedup(p: &mut Project, a: &SpeedupArgs, exec: Exec) -> Result<Done> {
    let opts = BenchOptions { seed: a.seed, requests: 0, link_budget: a.link_budget, ..Default::default() };
    let circuits = select_circuits(&a.circuits)?;
    let stats: Vec<CircuitStats> =
        exec.map(&circuits, |(i, c)| run_circuit(c, *i, &opts)).into_iter().collect::<Result<_>>()?;
    let pairs: Vec<SpeedupPair> = stats
        .into_iter()
        .filter_map(|c| c.trigger.map(|t| SpeedupPair { circuit: c.name, trigger: t }))
        .collect();
    let speedups: Vec<f64> = pairs.iter().filter_map(|p| p.trigger.timing.speedup).collect();
    let rep = SpeedupReport {
        seed: a.seed,
        link_budget: a.link_budget,
        feasible: pairs.iter().filter(|p| p.trigger.feasible).count(),
        mapping_violations: pairs.iter().map(|p| p.trigger.violations).sum(),
        timing: SpeedupTiming { median_speedup: median(&speedups) },
        pairs,
    };
    p.write_json(TRIGGER_SPEEDUP, &rep)?;
    let status = if rep.mapping_violations > 0 {
        Status::AlgorithmicFailure
    } else if rep.feasible < rep.pairs.len() {
        Status::Partial
    } else {
        Status::Success
    };
    Ok((
        status,
        json!({
            "pairs": rep.pairs.len(),
            "feasible": rep.feasible,
            "mapping_violations": rep.mapping_violations,
            "median_speedup": rep.timing.median_speedup,
            "speedups": speedups,
        }),
    ))
}
