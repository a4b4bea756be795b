//! Planning and evaluation library for multi-radio, multi-channel wireless
//! mesh networks using partially overlapped channels.
//!
//! The pipeline runs in three stages over an immutable [`topology::Topology`]:
//! interference-aware edge coloring ([`assignment::assign_channels`]), route
//! selection to the gateways over SINR-derived link costs
//! ([`routing::route_all`]), and a deterministic flow-level performance
//! evaluation ([`simulation::run_scenario`]).

pub mod assignment;
pub mod metrics;
pub mod phy;
pub mod routing;
pub mod simulation;
pub mod topology;

pub use phy::{Channel, PhyParams};
pub use topology::{LinkId, NodeId, Topology};
