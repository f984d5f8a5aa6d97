//! Deterministic discrete-event simulator and trace-analysis toolkit for
//! metaverse streaming: calibrated traffic generators for three measured
//! VR platforms, a campus-network model, a remote-rendering protocol with
//! paced stereo frame bursts, and the analysis suite that turns traces
//! into throughput, burst, pacing, and latency measurements.

pub mod desim;
pub mod metrics;
pub mod rrproto;
pub mod time;
pub mod trace;
pub mod workloads;

pub use time::SimTime;
pub use trace::{Direction, FlowId, NodeId, PacketRecord, Trace, TraceMeta, Transport};
