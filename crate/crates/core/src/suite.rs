// SPDX-License-Identifier: Apache-2.0
//! The bundled synthetic benchmark suite and its grid sizing rule.

use serde::{Deserialize, Serialize};

use crate::circuits::{gen_synthetic, Netlist, FF_RATIO};
use crate::error::{Error, Result};
use crate::fabric::ArchSpec;

pub const SUITE_SIZES: [usize; 10] = [50, 80, 110, 140, 180, 220, 260, 300, 350, 400];
pub const SUITE_RENT: f64 = 0.65;

/// Logic utilization window the grid sizing aims for.
pub const UTIL_MIN: f64 = 0.7;
pub const UTIL_MAX: f64 = 0.9;
const UTIL_TARGET: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCircuit {
    pub name: String,
    pub seed: u64,
    pub n_luts: usize,
    pub rent_p: f64,
}

impl BenchCircuit {
    pub fn netlist(&self) -> Result<Netlist> {
        gen_synthetic(self.seed, self.n_luts, self.rent_p)
    }

    /// Default architecture with a grid sized for this circuit.
    pub fn arch(&self) -> Result<ArchSpec> {
        let logic = self.n_luts + (self.n_luts as f64 * FF_RATIO).round() as usize;
        let base = ArchSpec::default();
        let (w, h) = size_grid(logic, base.bles_per_clb)?;
        Ok(ArchSpec {
            grid_width: w,
            grid_height: h,
            ..base
        })
    }
}

pub fn suite() -> Vec<BenchCircuit> {
    SUITE_SIZES
        .iter()
        .enumerate()
        .map(|(i, &n)| BenchCircuit {
            name: format!("syn{n}"),
            seed: 1000 + i as u64,
            n_luts: n,
            rent_p: SUITE_RENT,
        })
        .collect()
}

/// Near-square grid whose utilization is closest to 80% within the window.
pub fn size_grid(logic_blocks: usize, bles_per_clb: usize) -> Result<(usize, usize)> {
    let mut best: Option<(f64, usize, (usize, usize))> = None;
    for w in 1..=64usize {
        for h in w.saturating_sub(1).max(1)..=w + 1 {
            let util = logic_blocks as f64 / (w * h * bles_per_clb) as f64;
            if !(UTIL_MIN..=UTIL_MAX).contains(&util) {
                continue;
            }
            let key = ((util - UTIL_TARGET).abs(), w * h, (w, h));
            if best
                .is_none_or(|b| key.0 < b.0 - 1e-12 || (key.0 - b.0).abs() <= 1e-12 && key.1 < b.1)
            {
                best = Some(key);
            }
        }
    }
    best.map(|b| b.2).ok_or_else(|| {
        Error::validation(format!(
            "no near-square grid puts {logic_blocks} blocks in the utilization window"
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_grids_hit_utilization_window() {
        for c in suite() {
            let arch = c.arch().unwrap();
            let n = c.netlist().unwrap();
            let logic = n.blocks.iter().filter(|b| b.kind.is_logic()).count();
            let util = logic as f64 / arch.clb_slot_count() as f64;
            assert!(
                (UTIL_MIN..=UTIL_MAX).contains(&util),
                "{} at {util}",
                c.name
            );
        }
    }
}
