//! Placement and routing of a clustered problem onto the island fabric.

pub mod netlist;
pub mod place;
pub mod route;

use thiserror::Error;

use crate::fabric::FabricError;

pub use netlist::{build_netlist, Net, Netlist};
pub use place::{default_grid, hpwl, place, Placement};
pub use route::{
    audit, critical_path_delay, min_channel_width, route, route_at_width, AuditViolation,
    CongestionReport, DelayParams, RouteNode, RouteTree, RoutedDesign, RouterConfig,
    DEFAULT_WIDTH_CAP,
};

#[derive(Debug, Error)]
pub enum PlaceRouteError {
    #[error("{blocks} blocks do not fit on {tiles} tiles")]
    GridTooSmall { blocks: usize, tiles: usize },
    #[error("placement grid {placement} differs from routing graph grid {graph}")]
    GridMismatch { placement: usize, graph: usize },
    #[error("routing failed at W={} after {} iterations ({} overused nodes)", .0.channel_width, .0.iterations, .0.overused.len())]
    Unroutable(Box<CongestionReport>),
    #[error("no routable channel width up to {cap}")]
    WidthCapExceeded { cap: usize },
    #[error(transparent)]
    Fabric(#[from] FabricError),
}
