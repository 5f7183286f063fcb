// SPDX-License-Identifier: Apache-2.0
//! Trace overlay: a forest of spare-multiplexer trees, each rooted at a
//! trace-buffer input, whose leaves are user-signal output pins.

mod build;
mod types;
mod verify;

pub use build::{build_trace_overlay, OverlayParams};
pub use types::{
    signal_sources, ConnectivityReport, Leaf, OverlayForest, OverlayTree, SignalSource,
};
pub use verify::{verify_forest, verify_forest_with, ForestViolation};
