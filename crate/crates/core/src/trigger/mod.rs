// SPDX-License-Identifier: Apache-2.0
//! Trigger overlay: spare logic elements with pre-routed links, mapped to at
//! debug time by simulated annealing.

mod anneal;
mod baseline;
mod fabric;
mod mapping;
mod verify;

pub use anneal::{Anneal, SaParams, TriggerProblem};
pub use baseline::{baseline_recompile_trigger, BaselineRun};
pub use fabric::{
    build_trigger_fabric, verify_fabric, FabricViolation, OverlayCell, OverlayFabric, OverlayLink,
    SpareSlot,
};
pub use mapping::{
    map_trigger, InputFeed, LeSite, MapContext, MappedConnection, OutputFeed, Realization,
    RouteThrough, SlotRef, TriggerMapping,
};
pub use verify::{verify_mapping, MappingViolation};
