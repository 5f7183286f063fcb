// SPDX-License-Identifier: Apache-2.0
//! Island-style FPGA modelling, place and route, and debug-overlay
//! construction.
//!
//! The flow mirrors a "compile once, debug many times" methodology: the user
//! circuit is placed and routed and then locked; a trace overlay (trees of
//! spare routing multiplexers rooted at trace-buffer inputs) and a trigger
//! overlay (spare logic elements with pre-routed links) are built from what
//! is left over. At debug time the overlays are reconfigured without touching
//! the user circuit.

pub mod circuits;
pub mod debug;
pub mod error;
pub mod fabric;
pub mod par;
pub mod pnr;
pub mod suite;
pub mod trace;
pub mod trigger;

pub use error::{Error, Result};
pub use par::Exec;
