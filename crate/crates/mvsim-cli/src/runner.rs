//! Scenario execution: build the campus network, generate the workload,
//! push every packet through the simulator, write traces/report/manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use mvsim::desim::{build_campus_topology, CampusConfig, CampusLayout, Engine, Network, WanProfile};
use mvsim::metrics::{summarize_latency, LatencySample};
use mvsim::rrproto::{
    self, end_to_end_latency, generate_session, local_render_model, pipeline_preset,
    render_capacity_preset, resource_report, RenderMode, RrConfig,
};
use mvsim::trace::{Direction, FlowId, PacketRecord, Trace, TraceError, TraceMeta, Transport};
use mvsim::workloads::{gen_hubs, gen_vircadia, gen_vrchat, UserSpec, UserTrace};
use mvsim::{NodeId, SimTime};

use crate::config::{MetricsSection, Platform, ScenarioConfig};
use crate::report::{analyze_trace, MetricsReport, ScenarioResults, REPORT_SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error("invariant breach: {0}")]
    Invariant(String),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Invariant(_) => 3,
            RunError::Io(_) => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub scenario: String,
    pub seed: u64,
    pub tool_version: String,
    pub config_sha256: String,
    pub outputs: Vec<String>,
    /// parameters the reference measurements do not pin down
    pub assumptions: Vec<String>,
}

pub struct RunArtifacts {
    pub report: MetricsReport,
    pub manifest: RunManifest,
}

pub fn run_scenario(
    cfg: &ScenarioConfig,
    config_text: &str,
    out_dir: &Path,
) -> Result<RunArtifacts, RunError> {
    cfg.validate().map_err(|e| RunError::Config(e.0))?;
    let duration = cfg.duration();
    let n_clients = cfg.workload.users.len().max(1);
    let campus = cfg.topology.campus(n_clients);
    let (topo, layout) =
        build_campus_topology(&campus).map_err(|e| RunError::Config(e.to_string()))?;

    // WAN delays per client city (calibrated one-way halves)
    let wan = WanProfile::measured();
    let mut wan_delays: BTreeMap<NodeId, SimTime> = BTreeMap::new();
    let mut wan_rtt_ms = BTreeMap::new();
    for (i, u) in cfg.workload.users.iter().enumerate() {
        if let Some(city) = &u.city {
            let one_way = wan
                .one_way_delay(city)
                .map_err(|e| RunError::Config(e.to_string()))?;
            wan_delays.insert(layout.clients[i], one_way);
            wan_rtt_ms.insert(city.clone(), wan.rtt(city).unwrap().as_millis_f64());
        }
    }

    let mut net = Network::new(topo);
    for (&node, &d) in &wan_delays {
        net.set_wan_delay(node, d);
    }
    if let Some(frac) = cfg.topology.jitter_frac {
        net.enable_jitter(frac, cfg.seed ^ 0x6a77);
    }

    let mut results = ScenarioResults {
        wan_rtt_ms,
        ..ScenarioResults::default()
    };
    let mut traces: BTreeMap<String, Trace> = BTreeMap::new();

    match cfg.workload.platform {
        Platform::Vircadia | Platform::Hubs | Platform::Vrchat => {
            let users = build_users(cfg, &layout)?;
            let generated = match cfg.workload.platform {
                Platform::Vircadia => gen_vircadia(
                    &cfg.workload.vircadia.clone().unwrap_or_default(),
                    &users,
                    duration,
                    cfg.seed,
                ),
                Platform::Hubs => gen_hubs(
                    &cfg.workload.hubs.clone().unwrap_or_default(),
                    &users,
                    duration,
                    cfg.seed,
                ),
                _ => gen_vrchat(
                    &cfg.workload.vrchat.clone().unwrap_or_default(),
                    &users,
                    duration,
                    cfg.seed,
                ),
            }
            .map_err(|e| RunError::Config(e.to_string()))?;
            transmit_all(&mut net, generated.iter().map(|u| &u.trace))?;
            collect_endpoint_traces(cfg, &net, &layout, &generated, duration, &mut traces);
            results.packets_injected = net.stats.injected;
            results.packets_delivered = net.stats.delivered;
            results.packets_dropped = net.stats.dropped;
        }
        Platform::RemoteRender => {
            run_remote_render(cfg, &campus, &wan_delays, &layout, &mut net, duration, &mut traces, &mut results)?;
        }
        Platform::LocalVsRemote => {
            run_mode_comparison(&campus, &mut results)?;
        }
    }

    check_conservation(&net)?;

    let mut report = MetricsReport {
        schema_version: REPORT_SCHEMA_VERSION,
        scenario: cfg.scenario.clone(),
        seed: cfg.seed,
        traces: BTreeMap::new(),
        scenario_results: Some(results),
    };
    for (name, trace) in &traces {
        report.traces.insert(name.clone(), analyze_trace(trace, &cfg.metrics));
    }

    let outputs = write_outputs(out_dir, &traces, &report)?;
    let manifest = RunManifest {
        schema_version: REPORT_SCHEMA_VERSION,
        scenario: cfg.scenario.clone(),
        seed: cfg.seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_sha256: hex(&Sha256::digest(config_text.as_bytes())),
        outputs,
        assumptions: assumptions(cfg),
    };
    let manifest_path = out_dir.join("manifest.json");
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest).expect("serializable"))?;

    Ok(RunArtifacts { report, manifest })
}

fn build_users(cfg: &ScenarioConfig, layout: &CampusLayout) -> Result<Vec<UserSpec>, RunError> {
    cfg.workload
        .users
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let schedule = u
                .schedule
                .iter()
                .map(|s| s.to_entry().map_err(|e| RunError::Config(format!("user {i}: {}", e.0))))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(UserSpec {
                node: layout.clients[i],
                server: layout.servers[0],
                device: u.device,
                join: SimTime::from_secs_f64(u.join_s),
                leave: u.leave_s.map(SimTime::from_secs_f64),
                schedule,
            })
        })
        .collect()
}

fn transmit_all<'a>(
    net: &mut Network,
    traces: impl Iterator<Item = &'a Trace>,
) -> Result<(), RunError> {
    let mut engine = Engine::new();
    for t in traces {
        for r in t.records() {
            net.transmit(&mut engine, *r)
                .map_err(|e| RunError::Invariant(e.to_string()))?;
        }
    }
    net.run_to_completion(&mut engine);
    Ok(())
}

/// Client-side capture per user (UL at emission, DL at delivery) plus the
/// server-side capture (UL at delivery, DL at emission).
fn collect_endpoint_traces(
    cfg: &ScenarioConfig,
    net: &Network,
    layout: &CampusLayout,
    generated: &[UserTrace],
    duration: SimTime,
    traces: &mut BTreeMap<String, Trace>,
) {
    let meta = |which: String| TraceMeta {
        scenario: format!("{}/{which}", cfg.scenario),
        seed: cfg.seed,
        duration,
    };
    let mut server_records: Vec<PacketRecord> = Vec::new();
    for ut in generated {
        let node = layout.clients[ut.user];
        let ul: Vec<PacketRecord> = ut
            .trace
            .records()
            .iter()
            .filter(|r| r.dir == Direction::UL)
            .copied()
            .collect();
        let dl: Vec<PacketRecord> = net
            .deliveries
            .iter()
            .filter(|d| d.pkt.dir == Direction::DL && d.pkt.dst == node)
            .map(|d| PacketRecord { t: d.delivered, ..d.pkt })
            .collect();
        server_records.extend(
            ut.trace
                .records()
                .iter()
                .filter(|r| r.dir == Direction::DL)
                .copied(),
        );
        let name = format!("user{}", ut.user + 1);
        traces.insert(
            format!("{name}_ul"),
            Trace::from_unsorted(meta(format!("{name}_ul")), ul).expect("valid records"),
        );
        traces.insert(
            format!("{name}_dl"),
            Trace::from_unsorted(meta(format!("{name}_dl")), dl).expect("valid records"),
        );
    }
    server_records.extend(
        net.deliveries
            .iter()
            .filter(|d| d.pkt.dir == Direction::UL && d.pkt.dst == layout.servers[0])
            .map(|d| PacketRecord { t: d.delivered, ..d.pkt }),
    );
    traces.insert(
        "server".to_string(),
        Trace::from_unsorted(meta("server".into()), server_records).expect("valid records"),
    );
}

#[allow(clippy::too_many_arguments)]
fn run_remote_render(
    cfg: &ScenarioConfig,
    campus: &CampusConfig,
    wan_delays: &BTreeMap<NodeId, SimTime>,
    layout: &CampusLayout,
    net: &mut Network,
    duration: SimTime,
    traces: &mut BTreeMap<String, Trace>,
    results: &mut ScenarioResults,
) -> Result<(), RunError> {
    let section = cfg.workload.remote_render.clone().unwrap_or_default();
    let mut rr_cfg = section.config.clone();
    rr_cfg.client = layout.clients[0];
    rr_cfg.server = layout.servers[0];

    // measure the handshake round trip and frame transit on a clean network
    let probe = |size: u32, dir: Direction, transport: Transport| {
        probe_transit(campus, wan_delays, size, dir, transport, layout)
    };
    let hs_ul = probe(rr_cfg.handshake_pkt_size, Direction::UL, Transport::TCP)?;
    let hs_dl = probe(rr_cfg.handshake_pkt_size, Direction::DL, Transport::TCP)?;
    let handshake_rtt = hs_ul + hs_dl;
    let feedback_lag = probe(rr_cfg.mtu_payload, Direction::DL, Transport::UDP)?;

    let n_frames = section.n_frames.unwrap_or_else(|| {
        (duration.saturating_sub(handshake_rtt).as_secs_f64() * rr_cfg.fps as f64).floor() as u64
    });
    if n_frames == 0 {
        return Err(RunError::Config("duration leaves no room for frames".into()));
    }
    let fps = rr_cfg.fps;
    let session = generate_session(&rr_cfg, n_frames, handshake_rtt, feedback_lag, cfg.seed)
        .map_err(|e| RunError::Config(e.to_string()))?;

    transmit_all(net, [&session.dl, &session.ul].into_iter())?;

    let meta = |which: &str| TraceMeta {
        scenario: format!("{}/{which}", cfg.scenario),
        seed: cfg.seed,
        duration,
    };
    let dl: Vec<PacketRecord> = net
        .deliveries
        .iter()
        .filter(|d| d.pkt.dst == rr_cfg.client)
        .map(|d| PacketRecord { t: d.delivered, ..d.pkt })
        .collect();
    let mut server_records: Vec<PacketRecord> = session.dl.records().to_vec();
    server_records.extend(
        net.deliveries
            .iter()
            .filter(|d| d.pkt.dst == rr_cfg.server)
            .map(|d| PacketRecord { t: d.delivered, ..d.pkt }),
    );
    traces.insert("user1_ul".into(), session.ul.clone());
    traces.insert(
        "user1_dl".into(),
        Trace::from_unsorted(meta("user1_dl"), dl).expect("valid records"),
    );
    traces.insert(
        "server".into(),
        Trace::from_unsorted(meta("server"), server_records).expect("valid records"),
    );

    // per-frame latency: pipeline presets plus measured transits
    let stream_start = session.stream_start;
    let frame_of = |sent: SimTime| {
        ((sent - stream_start).as_micros() as u128 * fps as u128 / 1_000_000) as usize
    };
    let mut dl_ms = vec![(0.0f64, 0u32); n_frames as usize];
    let mut ul_sum = 0.0f64;
    let mut ul_n = 0u32;
    for d in &net.deliveries {
        let transit = (d.delivered - d.sent).as_millis_f64();
        if d.pkt.flow == FlowId(rrproto::FLOW_FRAME) {
            let k = frame_of(d.sent);
            if k < dl_ms.len() {
                dl_ms[k].0 += transit;
                dl_ms[k].1 += 1;
            }
        } else if d.pkt.flow == FlowId(rrproto::FLOW_SENSORY) {
            ul_sum += transit;
            ul_n += 1;
        }
    }
    let ul_mean = if ul_n == 0 { 0.0 } else { ul_sum / ul_n as f64 };
    let p = pipeline_preset(RenderMode::Remote);
    let samples: Vec<LatencySample> = dl_ms
        .iter()
        .filter(|(_, n)| *n > 0)
        .map(|(sum, n)| LatencySample {
            interaction_ms: p.interaction_capture_ms,
            uplink_transit_ms: ul_mean,
            render_ms: p.render_ms,
            encode_ms: p.encode_ms,
            downlink_transit_ms: sum / *n as f64,
            decode_ms: p.decode_ms,
            display_ms: p.display_ms,
        })
        .collect();
    results.latency = summarize_latency(&samples).ok();
    results.packets_injected = net.stats.injected;
    results.packets_delivered = net.stats.delivered;
    results.packets_dropped = net.stats.dropped;
    Ok(())
}

fn run_mode_comparison(campus: &CampusConfig, results: &mut ScenarioResults) -> Result<(), RunError> {
    let rr = RrConfig::default();
    let layout = build_campus_topology(campus)
        .map_err(|e| RunError::Config(e.to_string()))?
        .1;
    let empty = BTreeMap::new();
    let sensory_size = rr.sensory.first().map_or(60, |s| s.pkt_size);
    let ul_ms = probe_transit(campus, &empty, sensory_size, Direction::UL, Transport::UDP, &layout)?
        .as_millis_f64();
    let dl_ms = probe_transit(campus, &empty, rr.mtu_payload, Direction::DL, Transport::UDP, &layout)?
        .as_millis_f64();

    let local = end_to_end_latency(RenderMode::Local, &pipeline_preset(RenderMode::Local), 0.0, 0.0)
        .map_err(|e| RunError::Config(e.to_string()))?;
    let remote = end_to_end_latency(
        RenderMode::Remote,
        &pipeline_preset(RenderMode::Remote),
        ul_ms,
        dl_ms,
    )
    .map_err(|e| RunError::Config(e.to_string()))?;
    let fps = |mode| {
        let (cap, cost) = render_capacity_preset(mode);
        local_render_model(cap, cost, 60.0).expect("preset valid")
    };
    let res_local = resource_report(RenderMode::Local);
    let res_remote = resource_report(RenderMode::Remote);
    results.latency_local_ms = Some(local);
    results.latency_remote_ms = Some(remote);
    results.fps_local = Some(fps(RenderMode::Local));
    results.fps_remote = Some(fps(RenderMode::Remote));
    results.resources_local = Some(res_local);
    results.resources_remote = Some(res_remote);
    results.comparison = Some(
        mvsim::metrics::compare_modes(&res_local, &res_remote)
            .map_err(|e| RunError::Invariant(e.to_string()))?,
    );
    // the two probe packets are the only network traffic here
    results.packets_injected = 2;
    results.packets_delivered = 2;
    Ok(())
}

/// One packet client<->server on a fresh copy of the topology; returns its
/// transit time.
fn probe_transit(
    campus: &CampusConfig,
    wan_delays: &BTreeMap<NodeId, SimTime>,
    size: u32,
    dir: Direction,
    transport: Transport,
    layout: &CampusLayout,
) -> Result<SimTime, RunError> {
    let (topo, _) = build_campus_topology(campus).map_err(|e| RunError::Config(e.to_string()))?;
    let mut net = Network::new(topo);
    for (&node, &d) in wan_delays {
        net.set_wan_delay(node, d);
    }
    let (src, dst) = match dir {
        Direction::UL => (layout.clients[0], layout.servers[0]),
        Direction::DL => (layout.servers[0], layout.clients[0]),
    };
    let pkt = PacketRecord {
        t: SimTime::ZERO,
        size,
        dir,
        transport,
        flow: FlowId(0),
        src,
        dst,
    };
    let mut engine = Engine::new();
    net.transmit(&mut engine, pkt)
        .map_err(|e| RunError::Invariant(e.to_string()))?;
    net.run_to_completion(&mut engine);
    let d = net
        .deliveries
        .first()
        .ok_or_else(|| RunError::Invariant("probe packet was not delivered".into()))?;
    Ok(d.delivered - d.sent)
}

fn check_conservation(net: &Network) -> Result<(), RunError> {
    let s = net.stats;
    if s.injected != s.delivered + s.dropped {
        return Err(RunError::Invariant(format!(
            "packet conservation broken: {} injected, {} delivered, {} dropped",
            s.injected, s.delivered, s.dropped
        )));
    }
    Ok(())
}

fn write_outputs(
    out_dir: &Path,
    traces: &BTreeMap<String, Trace>,
    report: &MetricsReport,
) -> Result<Vec<String>, RunError> {
    fs::create_dir_all(out_dir)?;
    let mut outputs = Vec::new();
    for (name, trace) in traces {
        let rel = format!("{name}.csv");
        let file = fs::File::create(out_dir.join(&rel))?;
        trace.save_csv(file).map_err(trace_io)?;
        outputs.push(rel);
    }
    if !traces.is_empty() {
        fs::create_dir_all(out_dir.join("plots"))?;
        for (name, analysis) in &report.traces {
            let rel = format!("plots/{name}_throughput.csv");
            let mut text = String::from("start_us,bps,partial\n");
            for p in &analysis.throughput[0].points {
                text.push_str(&format!("{},{},{}\n", p.start_us, p.bps, p.partial));
            }
            fs::write(out_dir.join(&rel), text)?;
            outputs.push(rel);
        }
    }
    fs::write(
        out_dir.join("report.json"),
        serde_json::to_string_pretty(report).expect("serializable"),
    )?;
    outputs.push("report.json".to_string());
    outputs.push("manifest.json".to_string());
    outputs.sort();
    Ok(outputs)
}

fn trace_io(e: TraceError) -> RunError {
    match e {
        TraceError::Io(io) => RunError::Io(io),
        other => RunError::Invariant(other.to_string()),
    }
}

/// Standalone analysis of trace CSVs; the shared per-trace analysis keeps
/// this byte-identical to the `traces` section a run embeds.
pub fn analyze_files(paths: &[PathBuf], metrics: &MetricsSection) -> Result<MetricsReport, RunError> {
    let mut traces = BTreeMap::new();
    for path in paths {
        let file = fs::File::open(path)?;
        let trace = Trace::load_csv(file).map_err(|e| match e {
            TraceError::Io(io) => RunError::Io(io),
            other => RunError::Config(format!("{}: {other}", path.display())),
        })?;
        let name = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("trace")
            .to_string();
        if traces.insert(name.clone(), analyze_trace(&trace, metrics)).is_some() {
            return Err(RunError::Config(format!("duplicate trace name {name:?}")));
        }
    }
    Ok(MetricsReport {
        schema_version: REPORT_SCHEMA_VERSION,
        scenario: "analyze".to_string(),
        seed: 0,
        traces,
        scenario_results: None,
    })
}

fn assumptions(cfg: &ScenarioConfig) -> Vec<String> {
    let t = &cfg.topology;
    let mut a = vec![
        format!("access_bw_bps={}", t.access_bw_bps),
        format!("dist_bw_bps={}", t.dist_bw_bps),
        format!("core_bw_bps={}", t.core_bw_bps),
        format!("prop_delay_us={}", t.prop_delay_us),
        format!("queue_cap={}", t.queue_cap),
    ];
    match cfg.workload.platform {
        Platform::Vircadia => {
            let p = cfg.workload.vircadia.clone().unwrap_or_default();
            a.push(format!("join_burst_bytes={}", p.join_burst_bytes));
            a.push(format!("burst_drain_bps={}", p.burst_drain_bps));
            a.push(format!("burst_pkt_size={}", p.burst_pkt_size));
        }
        Platform::Hubs => {
            let p = cfg.workload.hubs.clone().unwrap_or_default();
            a.push(format!("model_load_bytes={}", p.model_load_bytes));
            a.push(format!("model_drain_bps={}", p.model_drain_bps));
            a.push(format!("upload_drain_us={}", p.upload_drain.as_micros()));
            a.push(format!("burst_pkt_size={}", p.burst_pkt_size));
        }
        Platform::Vrchat => {
            let p = cfg.workload.vrchat.clone().unwrap_or_default();
            a.push(format!("avatar_burst_bytes={}", p.avatar_burst_bytes));
            a.push(format!("avatar_drain_bps={}", p.avatar_drain_bps));
            a.push(format!("burst_pkt_size={}", p.burst_pkt_size));
        }
        Platform::RemoteRender => {
            let p = cfg.workload.remote_render.clone().unwrap_or_default().config;
            a.push(format!("frame_bytes_per_eye={}", p.frame_bytes_per_eye));
            a.push(format!("mtu_payload={}", p.mtu_payload));
            a.push(format!("inter_eye_gap_us={}", p.inter_eye_gap.as_micros()));
            a.push(format!("line_rate_bps={}", p.line_rate_bps));
            for (i, s) in p.sensory.iter().enumerate() {
                a.push(format!("sensory{i}_rate_bps={}", s.rate_bps));
            }
        }
        Platform::LocalVsRemote => {
            for mode in [RenderMode::Local, RenderMode::Remote] {
                let p = pipeline_preset(mode);
                let (cap, cost) = render_capacity_preset(mode);
                a.push(format!(
                    "{mode:?}: interaction={} render={} encode={} decode={} display={} capacity={cap} frame_cost={cost}",
                    p.interaction_capture_ms, p.render_ms, p.encode_ms, p.decode_ms, p.display_ms
                ));
            }
        }
    }
    a
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
