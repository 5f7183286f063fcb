// SPDX-License-Identifier: Apache-2.0
//! User and trigger netlists: BLIF-subset I/O, validation, and generators.

mod blif;
mod netlist;
mod synth;
mod trigger;

pub use blif::{emit_blif, parse_netlist};
pub use netlist::{
    find_combinational_loop, Block, BlockId, BlockKind, Net, NetId, Netlist, NetlistBuilder, Pin,
    OUTPUT_PREFIX,
};
pub use synth::{gen_synthetic, FF_RATIO, SYNTH_LUT_K};
pub use trigger::{gen_trigger, merge_trigger, TriggerNetlist, TRIGGER_PREFIX};
