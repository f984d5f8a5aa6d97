//! Deterministic discrete-event engine, campus topology, and link models.

pub mod engine;
pub mod network;
pub mod topology;
pub mod wan;

pub use engine::{Engine, EngineError, Fired};
pub use network::{Delivery, DropRecord, HopArrive, NetError, NetStats, Network};
pub use topology::{
    build_campus_topology, CampusConfig, CampusLayout, Link, Node, NodeKind, Topology,
    TopologyError,
};
pub use wan::WanProfile;
