// SPDX-License-Identifier: Apache-2.0
//! Minimum channel width search.
//!
//! A k-ary search over even widths: each round routes three fixed probe
//! widths between the largest known failure and the smallest known success.
//! The probe set depends only on the bracket, so results are identical
//! whether the probes run sequentially or in parallel.

use serde::{Deserialize, Serialize};

use super::route::{route, RouterParams};
use super::types::Placement;
use crate::circuits::Netlist;
use crate::error::{Error, Result};
use crate::fabric::{build_rrg, ArchSpec};
use crate::par::Exec;

#[derive(Debug, Clone, PartialEq)]
pub struct MinWidthParams {
    pub w_hi: usize,
    pub router: RouterParams,
    pub exec: Exec,
}

impl Default for MinWidthParams {
    fn default() -> Self {
        MinWidthParams {
            w_hi: 64,
            router: RouterParams::default(),
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WidthTrial {
    pub w: usize,
    pub success: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinWidthResult {
    pub w_min: usize,
    /// Every width tried, sorted by width.
    pub trials: Vec<WidthTrial>,
}

fn trial(
    netlist: &Netlist,
    placement: &Placement,
    arch: &ArchSpec,
    w: usize,
    router: &RouterParams,
) -> Result<WidthTrial> {
    let rrg = build_rrg(&arch.with_channel_width(w))?;
    Ok(match route(netlist, placement, &rrg, router)? {
        Ok(_) => WidthTrial {
            w,
            success: true,
            iterations: 0,
        },
        Err(f) => WidthTrial {
            w,
            success: false,
            iterations: f.iterations,
        },
    })
}

/// Up to three even widths strictly inside `(lo, hi)`, evenly spread.
fn probes(lo: usize, hi: usize) -> Vec<usize> {
    let inner = (hi - lo) / 2 - 1;
    let mut out: Vec<usize> = if inner <= 3 {
        (1..=inner).map(|k| lo + 2 * k).collect()
    } else {
        (1..=3)
            .map(|k| lo + 2 * ((k * (inner + 1) + 2) / 4))
            .collect()
    };
    out.dedup();
    out
}

pub fn find_min_channel_width(
    netlist: &Netlist,
    placement: &Placement,
    arch: &ArchSpec,
    params: &MinWidthParams,
) -> Result<MinWidthResult> {
    if params.w_hi < 2 || params.w_hi % 2 != 0 {
        return Err(Error::validation(format!(
            "w_hi must be even and >= 2, got {}",
            params.w_hi
        )));
    }
    let mut trials = Vec::new();
    let top = trial(netlist, placement, arch, params.w_hi, &params.router)?;
    trials.push(top);
    if !top.success {
        return Err(Error::Unroutable(format!(
            "circuit `{}` does not route even at W_hi = {}; raise the upper bound",
            netlist.name, params.w_hi
        )));
    }
    let (mut lo, mut hi) = (0usize, params.w_hi);
    while hi - lo > 2 {
        let ws = probes(lo, hi);
        let results = params
            .exec
            .map(&ws, |&w| trial(netlist, placement, arch, w, &params.router));
        let results: Vec<WidthTrial> = results.into_iter().collect::<Result<_>>()?;
        if let Some(s) = results.iter().filter(|t| t.success).map(|t| t.w).min() {
            hi = s;
        }
        if let Some(f) = results
            .iter()
            .filter(|t| !t.success && t.w < hi)
            .map(|t| t.w)
            .max()
        {
            lo = lo.max(f);
        }
        trials.extend(results);
        log::debug!("width bracket ({lo}, {hi}]");
    }
    trials.sort_by_key(|t| t.w);
    Ok(MinWidthResult { w_min: hi, trials })
}
