// SPDX-License-Identifier: Apache-2.0
//! In-memory flow stages shared by the subcommands and the benchmark
//! harness.

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use anyhow::Result;
use clap::ValueEnum;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use debugfabric_core::circuits::Netlist;
use debugfabric_core::debug::{simulate_config, DebugConfig};
use debugfabric_core::fabric::{
    build_rrg, margin_width, spare_mask, ArchSpec, NodeId, Occupancy, ResourceMask, RoutingResourceGraph,
};
use debugfabric_core::pnr::{
    find_min_channel_width, place, route, MinWidthParams, MinWidthResult, PlaceParams, Placement, RouterParams,
    Routing,
};
use debugfabric_core::trace::{OverlayForest, SignalSource};
use debugfabric_core::trigger::OverlayFabric;
use debugfabric_core::{Error, Exec};

/// Which overlay claims leftover resources first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Order {
    #[default]
    TraceFirst,
    TriggerFirst,
}

/// Channel width the user circuit is routed at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Width {
    Fixed(usize),
    /// Nearest even width ≥ (1 + margin) · w_min.
    Margin(f64),
}

pub struct Compiled {
    pub placement: Placement,
    pub minw: Option<MinWidthResult>,
    pub routing: Routing,
    pub rrg: RoutingResourceGraph,
    pub place_s: f64,
    /// Routing at the final width only; the width search is not included.
    pub route_s: f64,
}

pub fn compile(netlist: &Netlist, arch: &ArchSpec, width: Width, w_hi: usize, seed: u64, exec: Exec) -> Result<Compiled> {
    let t = Instant::now();
    let placement = place(netlist, arch, &PlaceParams::with_seed(seed))?;
    let place_s = t.elapsed().as_secs_f64();
    let router = RouterParams::with_seed(seed);
    let (w, minw) = match width {
        Width::Fixed(w) => (w, None),
        Width::Margin(m) => {
            let params = MinWidthParams { w_hi, router: router.clone(), exec };
            let r = find_min_channel_width(netlist, &placement, arch, &params)?;
            (margin_width(r.w_min, m), Some(r))
        }
    };
    let rrg = build_rrg(&arch.with_channel_width(w))?;
    let t = Instant::now();
    let routing = route(netlist, &placement, &rrg, &router)?.map_err(|f| {
        Error::Unroutable(format!(
            "`{}` does not route at W = {w} after {} iterations ({} congested nodes)",
            netlist.name,
            f.iterations,
            f.congested.len()
        ))
    })?;
    let route_s = t.elapsed().as_secs_f64();
    Ok(Compiled { placement, minw, routing, rrg, place_s, route_s })
}

/// The routing graph a stored routing was produced on.
pub fn rrg_for(arch: &ArchSpec, routing: &Routing) -> Result<RoutingResourceGraph> {
    Ok(build_rrg(&arch.with_channel_width(routing.channel_width))?)
}

/// Occupancy after user routing plus whichever overlays are given.
pub fn mask_with(
    rrg: &RoutingResourceGraph,
    routing: &Routing,
    forest: Option<&OverlayForest>,
    fabric: Option<&OverlayFabric>,
) -> ResourceMask {
    let mut mask = spare_mask(rrg, routing);
    if let Some(f) = forest {
        f.claim(&mut mask);
    }
    if let Some(f) = fabric {
        f.claim(&mut mask);
    }
    mask
}

/// `k` distinct signal names drawn from `sources`, sorted.
pub fn random_request(sources: &[SignalSource], k: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut names: Vec<String> = sources.choose_multiple(rng, k.min(sources.len())).map(|s| s.name.clone()).collect();
    names.sort();
    names
}

/// `n` seeded request sets of random sizes in `1..=max`.
pub fn request_sets(sources: &[SignalSource], n: usize, max: usize, seed: u64) -> Vec<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let k = rng.gen_range(1..=max.max(1));
            random_request(sources, k, &mut rng)
        })
        .collect()
}

/// Checks a debug configuration against the routing graph and the user
/// routing: every matched signal must arrive at its trace input, and no
/// select may touch a node the user circuit owns.
pub fn config_problems(
    rrg: &RoutingResourceGraph,
    user: &ResourceMask,
    sources: &[SignalSource],
    cfg: &DebugConfig,
) -> Vec<String> {
    let mut out = Vec::new();
    let opin: HashMap<&str, NodeId> = sources.iter().map(|s| (s.name.as_str(), s.opin)).collect();
    let arrived: BTreeMap<NodeId, NodeId> = match simulate_config(rrg, cfg) {
        Ok(m) => m,
        Err(e) => return vec![e.to_string()],
    };
    for m in &cfg.matching {
        match (opin.get(m.signal.as_str()), arrived.get(&m.trace_input)) {
            (Some(want), Some(got)) if want == got => {}
            (Some(_), got) => out.push(format!("`{}` does not arrive at {} (got {got:?})", m.signal, m.trace_input)),
            (None, _) => out.push(format!("unknown signal `{}` in configuration", m.signal)),
        }
    }
    for s in &cfg.mux_selects {
        if user.get(s.node) == Occupancy::User {
            out.push(format!("select on {} reconfigures user routing", s.node));
        }
    }
    out
}
