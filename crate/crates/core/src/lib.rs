//! Toolchain for mapping sparse QUBO problems onto a field-programmable
//! in-memory-computing Ising machine fabric.
//!
//! The flow mirrors an island-FPGA CAD flow: problems are packed into
//! crossbar-sized clusters ([`cluster`]), placed and routed on a modeled
//! fabric ([`fabric`], [`place_route`]), costed against a monolithic tiled
//! baseline ([`cost`]), and checked for functional equivalence by simulation
//! ([`sim`]). [`search`] explores architecture parameters.

pub mod cluster;
pub mod cost;
pub mod fabric;
pub mod pipeline;
pub mod place_route;
pub mod qubo;
pub mod sat;
pub mod search;
pub mod sim;

pub use cluster::{ffd_pack, utilization, validate, ClusterParams, Clustering};
pub use qubo::{Qubo, QuboBuilder, QuboStats, SpinState};
