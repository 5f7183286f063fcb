// SPDX-License-Identifier: Apache-2.0
//! The slow path a trigger overlay avoids: merge the trigger into the user
//! circuit and place and route everything again.

use std::time::Instant;

use crate::circuits::{merge_trigger, Netlist, TriggerNetlist};
use crate::error::Result;
use crate::fabric::{build_rrg, ArchSpec};
use crate::pnr::{place, route, PlaceParams, Placement, RouterParams, Routing};

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRun {
    pub elapsed_s: f64,
    pub placement: Placement,
    pub routing: Routing,
}

/// Full recompile of `netlist` with `trig` merged in, at `arch`'s channel
/// width. Capacity and routing failures propagate.
pub fn baseline_recompile_trigger(
    netlist: &Netlist,
    trig: &TriggerNetlist,
    arch: &ArchSpec,
    seed: u64,
) -> Result<BaselineRun> {
    let start = Instant::now();
    let merged = merge_trigger(netlist, trig)?;
    let rrg = build_rrg(arch)?;
    let placement = place(&merged, arch, &PlaceParams::with_seed(seed))?;
    let routing = route(&merged, &placement, &rrg, &RouterParams::with_seed(seed))??;
    Ok(BaselineRun {
        elapsed_s: start.elapsed().as_secs_f64(),
        placement,
        routing,
    })
}
