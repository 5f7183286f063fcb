// SPDX-License-Identifier: Apache-2.0
//! Architecture description, routing resource graph, and resource masks.

mod arch;
mod mask;
mod rrg;

pub use arch::{margin_width, ArchSpec, ColumnKind, TileKind, IO_PADS_PER_TILE, MAX_LUT_INPUTS};
pub use mask::{spare_mask, Occupancy, ResourceMask};
pub use rrg::{build_rrg, NodeId, NodeKind, RoutingResourceGraph, RrNode, RrgJson, RrgJsonNode};
