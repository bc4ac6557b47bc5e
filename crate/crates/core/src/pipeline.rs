//! Pack, place and route a problem onto a fabric, then cost it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::{ffd_pack, ClusterError, ClusterParams, Clustering, InputAccounting};
use crate::cost::{CostError, CostReport, TechParams};
use crate::fabric::FabricParams;
use crate::place_route::{
    build_netlist, critical_path_delay, default_grid, min_channel_width, place, DelayParams,
    Netlist, PlaceRouteError, Placement, RoutedDesign, RouterConfig, DEFAULT_WIDTH_CAP,
};
use crate::qubo::Qubo;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    PlaceRoute(#[from] PlaceRouteError),
    #[error(transparent)]
    Cost(#[from] CostError),
}

impl EmbedError {
    /// Whether the failure means the architecture cannot host the problem
    /// (as opposed to bad input).
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self,
            EmbedError::Cluster(ClusterError::FanInExceeded { .. })
                | EmbedError::PlaceRoute(
                    PlaceRouteError::WidthCapExceeded { .. } | PlaceRouteError::Unroutable(_)
                )
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbedConfig {
    pub router: RouterConfig,
    pub width_cap: usize,
    /// Grid side override; defaults to about 90% tile occupancy.
    pub grid: Option<usize>,
    pub accounting: InputAccounting,
    pub delay: DelayParams,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self {
            router: RouterConfig::default(),
            width_cap: DEFAULT_WIDTH_CAP,
            grid: None,
            accounting: InputAccounting::AllNeighbors,
            delay: DelayParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub clustering: Clustering,
    pub netlist: Netlist,
    pub placement: Placement,
    pub design: RoutedDesign,
    /// `arch` with the achieved grid and minimum channel width filled in.
    pub fabric: FabricParams,
    pub critical_path: f64,
}

impl Embedding {
    pub fn cost(&self, t: &TechParams, n: usize) -> Result<CostReport, CostError> {
        CostReport::new(t, &self.fabric, n, self.critical_path)
    }
}

/// Runs packing, placement and minimum-width routing. `arch.grid` and
/// `arch.channel_width` are ignored.
pub fn embed(
    q: &Qubo<i64>,
    arch: &FabricParams,
    occupancy: f64,
    seed: u64,
    cfg: &EmbedConfig,
) -> Result<Embedding, EmbedError> {
    let mut cp = ClusterParams::new(arch.inputs, arch.outputs).with_occupancy(occupancy);
    cp.accounting = cfg.accounting;
    let clustering = ffd_pack(q, &cp)?;
    let netlist = build_netlist(&clustering);
    let grid = cfg.grid.unwrap_or_else(|| default_grid(clustering.len()));
    let placement = place(&netlist, grid, seed)?;
    let (w, design) = min_channel_width(
        &netlist,
        &placement,
        &arch.with_grid(grid),
        &cfg.router,
        cfg.width_cap,
    )?;
    let critical_path = critical_path_delay(&design, &cfg.delay);
    Ok(Embedding {
        clustering,
        netlist,
        placement,
        design,
        fabric: arch.with_grid(grid).with_channel_width(w),
        critical_path,
    })
}
