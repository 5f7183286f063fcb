// SPDX-License-Identifier: Apache-2.0
//! Baseline placement and routing of the user circuit.

mod check;
mod minw;
mod place;
mod route;
mod types;

pub use check::{check_routing, RoutingViolation};
pub use minw::{find_min_channel_width, MinWidthParams, MinWidthResult, WidthTrial};
pub use place::{place, placement_cost, random_placement, PlaceParams};
pub use route::{
    net_requests, route, route_requests, RouteFailure, RouteOutcome, RouteRequest, RouterParams,
};
pub use types::{PlacedBlock, Placement, RouteNode, RouteTree, Routing};
