//! Report schema and the per-trace analysis shared by `run` and `analyze`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use mvsim::metrics::{
    burst_excluded_mean_bps, detect_bursts, group_bursts_by_gap, pacing, throughput, BurstEvent,
    LatencySummary, ModeComparison, PacingStats, ThroughputSeries,
};
use mvsim::rrproto::ResourceRecord;
use mvsim::trace::{Direction, Trace, Transport};
use mvsim::SimTime;

use crate::config::MetricsSection;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub scenario: String,
    pub seed: u64,
    /// one analysis per trace file, keyed by file stem
    pub traces: BTreeMap<String, TraceAnalysis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario_results: Option<ScenarioResults>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceAnalysis {
    pub n_packets: usize,
    pub total_bytes: u64,
    pub duration_us: u64,
    pub mean_bps: f64,
    pub throughput: Vec<ThroughputSeries>,
    pub bursts: Vec<BurstEvent>,
    pub burst_excluded_mean_bps: f64,
    /// start-to-start intervals of large-packet bursts (frame pacing)
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pacing: Option<PacingStats>,
}

/// Results that only exist in the context of a full run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScenarioResults {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub wan_rtt_ms: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency: Option<LatencySummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_local_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_remote_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fps_local: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fps_remote: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resources_local: Option<ResourceRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resources_remote: Option<ResourceRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ModeComparison>,
    pub packets_injected: u64,
    pub packets_delivered: u64,
    pub packets_dropped: u64,
}

pub fn analyze_trace(trace: &Trace, m: &MetricsSection) -> TraceAnalysis {
    let window = SimTime::from_secs_f64(m.window_s);
    let mut series = vec![throughput(trace, window, None, None).expect("window > 0")];
    for dir in [Direction::UL, Direction::DL] {
        for transport in [Transport::TCP, Transport::UDP] {
            if trace
                .records()
                .iter()
                .any(|r| r.dir == dir && r.transport == transport)
            {
                series.push(
                    throughput(trace, window, Some(dir), Some(transport)).expect("window > 0"),
                );
            }
        }
    }
    let bursts = detect_bursts(
        trace,
        m.burst_threshold_bps,
        SimTime::from_secs_f64(m.burst_min_gap_ms / 1e3),
    );
    let excluded = burst_excluded_mean_bps(trace, &bursts);
    let duration_us = trace.meta.duration.as_micros();
    let mean_bps = if duration_us == 0 {
        0.0
    } else {
        trace.total_bytes() as f64 * 8.0 / (duration_us as f64 / 1e6)
    };

    let large: Vec<_> = trace
        .records()
        .iter()
        .filter(|r| r.size > m.pacing_min_size)
        .copied()
        .collect();
    let pacing_stats = if large.len() < 2 {
        None
    } else {
        let sub = Trace::from_unsorted(trace.meta.clone(), large).expect("subset of a valid trace");
        let groups = group_bursts_by_gap(&sub, SimTime::from_secs_f64(m.pacing_gap_ms / 1e3));
        pacing(&groups).ok()
    };

    TraceAnalysis {
        n_packets: trace.len(),
        total_bytes: trace.total_bytes(),
        duration_us,
        mean_bps,
        throughput: series,
        bursts,
        burst_excluded_mean_bps: excluded,
        pacing: pacing_stats,
    }
}
