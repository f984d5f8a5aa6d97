//! Trace analysis: windowed throughput, burst detection, pacing,
//! periodicity, latency summaries, and local/remote mode comparison.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rrproto::{RenderMode, ResourceRecord};
use crate::time::SimTime;
use crate::trace::{Direction, FlowId, Trace, Transport};

/// Fine window for burst detection: resolves 16.67 ms pacing without
/// single packets registering as bursts at the measured rates.
pub const FINE_WINDOW: SimTime = SimTime::from_millis(10);

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("flow {0} not present in trace")]
    FlowAbsent(FlowId),
    #[error("missing field in report: {0}")]
    MissingField(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThroughputPoint {
    pub start_us: u64,
    pub bps: f64,
    /// last window may be shorter than the nominal width; it is reported
    /// with its own divisor and flagged
    pub partial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputSeries {
    pub window_us: u64,
    pub dir: Option<Direction>,
    pub transport: Option<Transport>,
    pub points: Vec<ThroughputPoint>,
}

impl ThroughputSeries {
    pub fn mean_bps(&self) -> f64 {
        if self.points.is_empty() {
            return 0.0;
        }
        self.points.iter().map(|p| p.bps).sum::<f64>() / self.points.len() as f64
    }
}

/// Tumbling windows aligned to t = 0. Point value is exactly
/// 8 * bytes-in-window / window-width.
pub fn throughput(
    trace: &Trace,
    window: SimTime,
    dir: Option<Direction>,
    transport: Option<Transport>,
) -> Result<ThroughputSeries, MetricsError> {
    if window == SimTime::ZERO {
        return Err(MetricsError::Argument("window must be > 0".into()));
    }
    let w = window.as_micros();
    let duration = trace.meta.duration.as_micros();
    let n_windows = if duration == 0 { 0 } else { duration.div_ceil(w) } as usize;
    let mut bytes = vec![0u64; n_windows];
    for r in trace.records() {
        if dir.is_some_and(|d| d != r.dir) || transport.is_some_and(|t| t != r.transport) {
            continue;
        }
        let idx = (r.t.as_micros() / w) as usize;
        if idx < n_windows {
            bytes[idx] += r.size as u64;
        }
    }
    let points = bytes
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            let start = i as u64 * w;
            let width = w.min(duration - start);
            ThroughputPoint {
                start_us: start,
                bps: b as f64 * 8.0 / (width as f64 / 1e6),
                partial: width < w,
            }
        })
        .collect();
    Ok(ThroughputSeries { window_us: w, dir, transport, points })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BurstEvent {
    pub t_start: SimTime,
    pub t_end: SimTime,
    pub peak_bps: f64,
    pub bytes: u64,
}

/// A burst is a maximal run of fine windows above `threshold_bps`,
/// merging runs separated by gaps shorter than `min_gap`.
pub fn detect_bursts(trace: &Trace, threshold_bps: f64, min_gap: SimTime) -> Vec<BurstEvent> {
    assert!(threshold_bps > 0.0, "threshold must be > 0");
    let w = FINE_WINDOW.as_micros();
    let duration = trace.meta.duration.as_micros();
    if duration == 0 {
        return Vec::new();
    }
    let n = duration.div_ceil(w) as usize;
    let mut bytes = vec![0u64; n];
    for r in trace.records() {
        let idx = (r.t.as_micros() / w) as usize;
        if idx < n {
            bytes[idx] += r.size as u64;
        }
    }
    let rate = |i: usize| bytes[i] as f64 * 8.0 / (w as f64 / 1e6);

    // above-threshold runs, merged when the gap is below min_gap; a merged
    // event spans the gap, so bytes/peak cover the whole span
    let mut spans: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < n {
        if rate(i) < threshold_bps {
            i += 1;
            continue;
        }
        let start = i;
        while i < n && rate(i) >= threshold_bps {
            i += 1;
        }
        match spans.last_mut() {
            Some(last) if ((start - last.1) as u64 * w) < min_gap.as_micros() => last.1 = i,
            _ => spans.push((start, i)),
        }
    }
    spans
        .into_iter()
        .map(|(a, b)| BurstEvent {
            t_start: SimTime::from_micros(a as u64 * w),
            t_end: SimTime::from_micros(b as u64 * w),
            peak_bps: (a..b).map(rate).fold(0.0, f64::max),
            bytes: bytes[a..b].iter().sum(),
        })
        .collect()
}

/// Groups consecutive packets whose spacing is at most `max_intra_gap`
/// into one burst; used for frame-level pacing where fine windows are too
/// coarse.
pub fn group_bursts_by_gap(trace: &Trace, max_intra_gap: SimTime) -> Vec<BurstEvent> {
    let mut events: Vec<BurstEvent> = Vec::new();
    for r in trace.records() {
        match events.last_mut() {
            Some(last) if r.t.saturating_sub(last.t_end) <= max_intra_gap => {
                last.t_end = r.t;
                last.bytes += r.size as u64;
            }
            _ => events.push(BurstEvent {
                t_start: r.t,
                t_end: r.t,
                peak_bps: 0.0,
                bytes: r.size as u64,
            }),
        }
    }
    events
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacingStats {
    pub n_intervals: usize,
    pub mean_us: f64,
    pub stddev_us: f64,
    pub min_us: u64,
    pub max_us: u64,
}

/// Start-to-start intervals between successive bursts.
pub fn pacing(bursts: &[BurstEvent]) -> Result<PacingStats, MetricsError> {
    if bursts.len() < 2 {
        return Err(MetricsError::InsufficientData(format!(
            "pacing needs >= 2 bursts, got {}",
            bursts.len()
        )));
    }
    let intervals: Vec<u64> = bursts
        .windows(2)
        .map(|w| w[1].t_start.as_micros() - w[0].t_start.as_micros())
        .collect();
    let n = intervals.len() as f64;
    let mean = intervals.iter().sum::<u64>() as f64 / n;
    let var = intervals.iter().map(|&d| (d as f64 - mean).powi(2)).sum::<f64>() / n;
    Ok(PacingStats {
        n_intervals: intervals.len(),
        mean_us: mean,
        stddev_us: var.sqrt(),
        min_us: *intervals.iter().min().unwrap(),
        max_us: *intervals.iter().max().unwrap(),
    })
}

/// Autocorrelation of the per-millisecond packet-count signal for one
/// flow. Returns the lag of the highest non-zero-lag peak when its
/// normalized correlation reaches 0.5.
pub fn periodicity(trace: &Trace, flow: FlowId) -> Result<Option<SimTime>, MetricsError> {
    const BIN: u64 = 1_000; // 1 ms
    const CUTOFF: f64 = 0.5;
    let times: Vec<u64> = trace
        .records()
        .iter()
        .filter(|r| r.flow == flow)
        .map(|r| r.t.as_micros())
        .collect();
    if times.is_empty() {
        return Err(MetricsError::FlowAbsent(flow));
    }
    let n_bins = (trace.meta.duration.as_micros() / BIN + 1) as usize;
    let mut counts = vec![0.0f64; n_bins];
    for t in times {
        counts[(t / BIN) as usize] += 1.0;
    }
    let n = counts.len();
    let mean = counts.iter().sum::<f64>() / n as f64;
    let denom: f64 = counts.iter().map(|c| (c - mean).powi(2)).sum();
    if denom == 0.0 {
        return Ok(None);
    }
    let max_lag = (n / 2).min(2_000);
    let mut best: Option<(usize, f64)> = None;
    for lag in 1..max_lag {
        let num: f64 = (0..n - lag).map(|i| (counts[i] - mean) * (counts[i + lag] - mean)).sum();
        let r = num / denom;
        if r >= CUTOFF && best.is_none_or(|(_, b)| r > b) {
            best = Some((lag, r));
        }
    }
    Ok(best.map(|(lag, _)| SimTime::from_micros(lag as u64 * BIN)))
}

/// Mean throughput with detected-burst windows excised.
pub fn burst_excluded_mean_bps(trace: &Trace, bursts: &[BurstEvent]) -> f64 {
    let duration = trace.meta.duration;
    if duration == SimTime::ZERO {
        return 0.0;
    }
    let in_burst = |t: SimTime| bursts.iter().any(|b| t >= b.t_start && t < b.t_end);
    let bytes: u64 = trace
        .records()
        .iter()
        .filter(|r| !in_burst(r.t))
        .map(|r| r.size as u64)
        .sum();
    let burst_time: u64 = bursts
        .iter()
        .map(|b| b.t_end.as_micros().min(duration.as_micros()) - b.t_start.as_micros())
        .sum();
    let span = duration.as_micros().saturating_sub(burst_time);
    if span == 0 {
        return 0.0;
    }
    bytes as f64 * 8.0 / (span as f64 / 1e6)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencySample {
    pub interaction_ms: f64,
    pub uplink_transit_ms: f64,
    pub render_ms: f64,
    pub encode_ms: f64,
    pub downlink_transit_ms: f64,
    pub decode_ms: f64,
    pub display_ms: f64,
}

impl LatencySample {
    pub fn total_ms(&self) -> f64 {
        self.interaction_ms
            + self.uplink_transit_ms
            + self.render_ms
            + self.encode_ms
            + self.downlink_transit_ms
            + self.decode_ms
            + self.display_ms
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub n: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

pub fn summarize_latency(samples: &[LatencySample]) -> Result<LatencySummary, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::InsufficientData("no latency samples".into()));
    }
    let mut totals: Vec<f64> = samples.iter().map(|s| s.total_ms()).collect();
    totals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pct = |p: f64| {
        let idx = ((totals.len() as f64 - 1.0) * p).round() as usize;
        totals[idx]
    };
    Ok(LatencySummary {
        n: totals.len(),
        mean_ms: totals.iter().sum::<f64>() / totals.len() as f64,
        p50_ms: pct(0.50),
        p95_ms: pct(0.95),
        max_ms: *totals.last().unwrap(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: RowMetric,
    pub local: f64,
    pub remote: f64,
    pub delta: f64,
    pub remote_better: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowMetric {
    Fps,
    LatencyMs,
    CpuPct,
    MemPct,
    PowerPct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeComparison {
    pub rows: Vec<ComparisonRow>,
}

/// Side-by-side fps/latency/cpu/mem/power with deltas (remote - local).
/// Higher fps is better; everything else lower-is-better.
pub fn compare_modes(
    local: &ResourceRecord,
    remote: &ResourceRecord,
) -> Result<ModeComparison, MetricsError> {
    for (mode, rec) in [(RenderMode::Local, local), (RenderMode::Remote, remote)] {
        for (name, v) in [
            ("fps", rec.fps),
            ("latency_ms", rec.latency_ms),
            ("cpu_pct", rec.cpu_pct),
            ("mem_pct", rec.mem_pct),
            ("power_pct", rec.power_pct),
        ] {
            if !v.is_finite() {
                return Err(MetricsError::MissingField(format!("{mode:?}.{name}")));
            }
        }
    }
    let row = |metric, l: f64, r: f64, higher_better: bool| ComparisonRow {
        metric,
        local: l,
        remote: r,
        delta: r - l,
        remote_better: if higher_better { r > l } else { r < l },
    };
    Ok(ModeComparison {
        rows: vec![
            row(RowMetric::Fps, local.fps, remote.fps, true),
            row(RowMetric::LatencyMs, local.latency_ms, remote.latency_ms, false),
            row(RowMetric::CpuPct, local.cpu_pct, remote.cpu_pct, false),
            row(RowMetric::MemPct, local.mem_pct, remote.mem_pct, false),
            row(RowMetric::PowerPct, local.power_pct, remote.power_pct, false),
        ],
    })
}
