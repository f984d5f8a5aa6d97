//! Acceptance gate: one test per criterion, each printing a single
//! pass/fail line (visible with --nocapture).

use std::fs::File;
use std::path::Path;
use std::time::Instant;

use sha2::{Digest, Sha256};

use mvsim::metrics::group_bursts_by_gap;
use mvsim::rrproto::{resource_report, RenderMode};
use mvsim::trace::{Direction, FlowId, NodeId, Trace, TraceMeta, Transport};
use mvsim::workloads::{
    gen_hubs, gen_vircadia, gen_vrchat, server_aggregate, Activity, DeviceClass, HubsParams,
    ScheduleEntry, UserSpec, VRChatParams, VircadiaParams,
};
use mvsim::SimTime;

use mvsim_cli::config::{
    parse_config, ActivityKind, Platform, ScenarioConfig, ScheduleSection, UserSection,
    WorkloadSection,
};
use mvsim_cli::runner::{run_scenario, RunArtifacts};
use mvsim_cli::scenarios;

fn verdict(n: u32, desc: &str, checks: &[(&str, bool)]) {
    let ok = checks.iter().all(|&(_, b)| b);
    println!("criterion {n} ({desc}): {}", if ok { "pass" } else { "fail" });
    for &(what, b) in checks {
        assert!(b, "criterion {n}: {what}");
    }
}

fn run_bundled(name: &str) -> (RunArtifacts, tempfile::TempDir) {
    let text = scenarios::bundled(name).expect("bundled scenario");
    let cfg = parse_config(text).expect("scenario validates");
    let dir = tempfile::tempdir().expect("tempdir");
    let art = run_scenario(&cfg, text, dir.path()).expect("scenario runs");
    (art, dir)
}

fn load(dir: &Path, name: &str) -> Trace {
    Trace::load_csv(File::open(dir.join(name)).expect("trace file")).expect("trace parses")
}

fn window_mbps(
    t: &Trace,
    dir: Option<Direction>,
    transport: Option<Transport>,
    from_s: u64,
    to_s: u64,
) -> f64 {
    t.filter(dir, transport)
        .slice(SimTime::from_secs(from_s), SimTime::from_secs(to_s))
        .unwrap()
        .total_bytes() as f64
        * 8.0
        / (to_s - from_s) as f64
        / 1e6
}

fn within(x: f64, target: f64, frac: f64) -> bool {
    (x - target).abs() / target <= frac
}

fn idle_user(node: u32, device: DeviceClass) -> UserSpec {
    UserSpec {
        node: NodeId(node),
        server: NodeId(5),
        device,
        join: SimTime::ZERO,
        leave: None,
        schedule: vec![],
    }
}

fn entry(s: u64, e: u64, activity: Activity) -> ScheduleEntry {
    ScheduleEntry { start: SimTime::from_secs(s), end: SimTime::from_secs(e), activity }
}

#[test]
fn criterion_1_vircadia_reproduction() {
    let t0 = Instant::now();
    let (_, dir) = run_bundled("vircadia_2user");
    let elapsed = t0.elapsed();
    let dl = load(dir.path(), "user1_dl.csv");
    let ul = load(dir.path(), "user1_ul.csv");
    let dl_mbps = window_mbps(&dl, None, None, 10, 70);
    let ul_mbps = window_mbps(&ul, None, None, 10, 70);
    let total = dl_mbps + ul_mbps;
    let oversized = |t: &Trace| {
        t.slice(SimTime::from_secs(10), SimTime::from_secs(70))
            .unwrap()
            .records()
            .iter()
            .filter(|r| r.size > 700)
            .count()
    };
    verdict(1, "vircadia 2-user steady rates", &[
        ("DL in [0.24, 0.36] Mb/s", (0.24..=0.36).contains(&dl_mbps)),
        ("UL in [0.25, 0.37] Mb/s", (0.25..=0.37).contains(&ul_mbps)),
        ("per-user total 0.6 Mb/s +-20%", within(total, 0.6, 0.20)),
        ("no steady packet over 700 B", oversized(&dl) + oversized(&ul) == 0),
        ("runtime under 10 s", elapsed.as_secs_f64() < 10.0),
    ]);
}

#[test]
fn criterion_2_linearity() {
    // flat per-user DL rate so aggregate growth is purely the user count
    let params = VircadiaParams {
        desktop_dl_solo_bps: 300_000.0,
        ..VircadiaParams::default()
    };
    let mean = |n: usize| {
        let users: Vec<UserSpec> =
            (0..n).map(|i| idle_user(100 + i as u32, DeviceClass::Desktop)).collect();
        let traces = gen_vircadia(&params, &users, SimTime::from_secs(60), 5).unwrap();
        let all: Vec<&Trace> = traces.iter().map(|u| &u.trace).collect();
        server_aggregate(&all, TraceMeta::default()).total_bytes() as f64 * 8.0 / 60.0
    };
    let single = mean(1);
    let checks: Vec<(String, bool)> = [2usize, 4, 8]
        .iter()
        .map(|&n| {
            let m = mean(n);
            (
                format!("{n} users within 10% of {n} x single ({m:.0} vs {:.0})", n as f64 * single),
                within(m, n as f64 * single, 0.10),
            )
        })
        .collect();
    let borrowed: Vec<(&str, bool)> = checks.iter().map(|(s, b)| (s.as_str(), *b)).collect();
    verdict(2, "aggregate linear in user count", &borrowed);
}

#[test]
fn criterion_3_hubs_rates() {
    let mut users = vec![
        idle_user(6, DeviceClass::Desktop),
        idle_user(7, DeviceClass::Desktop),
    ];
    for u in &mut users {
        u.schedule = vec![
            entry(15, 75, Activity::Talk),
            entry(80, 140, Activity::Webcam),
        ];
    }
    users[0].schedule.push(entry(150, 152, Activity::UploadFile { bytes: 1_250_000 }));
    let traces =
        gen_hubs(&HubsParams::default(), &users, SimTime::from_secs(160), 21).unwrap();
    let u1 = &traces[0].trace;
    let u2 = &traces[1].trace;

    let voice = window_mbps(u1, None, Some(Transport::UDP), 20, 70) * 1e3; // Kb/s
    let cam_ul = window_mbps(u1, Some(Direction::UL), Some(Transport::UDP), 85, 135);
    let cam_dl = window_mbps(u1, Some(Direction::DL), Some(Transport::UDP), 85, 135);
    // upload drains over 1 s UL, then the server re-broadcasts for 1 s
    let up_ul = window_mbps(u1, Some(Direction::UL), Some(Transport::TCP), 150, 151);
    let up_dl = window_mbps(u2, Some(Direction::DL), Some(Transport::TCP), 151, 152);
    verdict(3, "hubs voice/webcam/upload rates", &[
        ("conversation UDP ~45 Kb/s +-20%", within(voice, 45.0, 0.20)),
        ("webcam UL ~1.3 Mb/s +-20%", within(cam_ul, 1.3, 0.20)),
        ("webcam DL ~1.3 Mb/s +-20%", within(cam_dl, 1.3, 0.20)),
        ("upload UL burst ~10 Mb/s +-20%", within(up_ul, 10.0, 0.20)),
        ("paired DL burst ~10 Mb/s +-20%", within(up_dl, 10.0, 0.20)),
    ]);
}

#[test]
fn criterion_4_hubs_seminar_aggregate() {
    let t0 = Instant::now();
    let (art, _dir) = run_bundled("hubs_seminar_8user");
    let elapsed = t0.elapsed();
    let server = &art.report.traces["server"];
    let mean = server.mean_bps / 1e6;
    let excluded = server.burst_excluded_mean_bps / 1e6;
    let bursts = server.bursts.len();
    verdict(4, "hubs seminar server aggregate", &[
        ("server mean ~8 Mb/s +-25%", within(mean, 8.0, 0.25)),
        ("burst-excluded mean ~1.7 Mb/s +-25%", within(excluded, 1.7, 0.25)),
        (">=50 Mb/s burst count 24 +-30%", within(bursts as f64, 24.0, 0.30)),
        ("runtime under 60 s", elapsed.as_secs_f64() < 60.0),
    ]);
}

#[test]
fn criterion_5_vrchat_stages() {
    let solo = gen_vrchat(
        &VRChatParams::default(),
        &[idle_user(6, DeviceClass::Desktop)],
        SimTime::from_secs(135),
        2,
    )
    .unwrap();
    let t = &solo[0].trace;
    let conn_dl = window_mbps(t, Some(Direction::DL), Some(Transport::TCP), 0, 15);
    let peak_1s = (0..15)
        .map(|s| window_mbps(t, Some(Direction::DL), Some(Transport::TCP), s, s + 1))
        .fold(0.0, f64::max);
    let trans_ul = window_mbps(t, Some(Direction::UL), Some(Transport::UDP), 20, 130);

    let mut users: Vec<UserSpec> = [0u64, 40, 60, 80]
        .iter()
        .enumerate()
        .map(|(i, &j)| {
            let mut u = idle_user(6 + i as u32, DeviceClass::Desktop);
            u.join = SimTime::from_secs(j);
            u
        })
        .collect();
    users[1].schedule = vec![entry(150, 200, Activity::Talk)];
    let four = gen_vrchat(&VRChatParams::default(), &users, SimTime::from_secs(200), 2).unwrap();
    let t4 = &four[0].trace;
    let dl_four = window_mbps(t4, Some(Direction::DL), Some(Transport::UDP), 100, 150);
    let dl_speech = window_mbps(t4, Some(Direction::DL), Some(Transport::UDP), 150, 200);
    verdict(5, "vrchat stage rates", &[
        ("connection TCP_DL ~8.9 Mb/s +-20%", within(conn_dl, 8.9, 0.20)),
        ("connection peak >= 50 Mb/s", peak_1s >= 50.0),
        ("solo transmission UDP_UL ~0.03 Mb/s +-25%", within(trans_ul, 0.03, 0.25)),
        ("4-user UDP_DL ~0.04 Mb/s +-25%", within(dl_four, 0.04, 0.25)),
        ("+speech UDP_DL ~0.07 Mb/s +-25%", within(dl_speech, 0.07, 0.25)),
    ]);
}

#[test]
fn criterion_6_remote_render_pacing() {
    let (art, dir) = run_bundled("rr_campus");
    let dl = load(dir.path(), "user1_dl.csv");
    let ul = load(dir.path(), "user1_ul.csv");

    let frame_pkts: Vec<_> = dl
        .records()
        .iter()
        .filter(|r| r.flow == FlowId(2))
        .copied()
        .collect();
    let all_large = frame_pkts.iter().all(|r| r.size > 1000);
    let n_frame_pkts = frame_pkts.len();
    let large = Trace::from_unsorted(
        dl.meta.clone(),
        dl.records().iter().filter(|r| r.size > 1000).copied().collect(),
    )
    .unwrap();
    // eye bursts: packets within 1 ms group; the 2 ms inter-eye gap splits them
    let eye_bursts = group_bursts_by_gap(&large, SimTime::from_millis(1)).len();
    let pacing = art.report.traces["user1_dl"].pacing.expect("frame pacing");

    let tcp_dl: Vec<_> = dl.records().iter().filter(|r| r.transport == Transport::TCP).collect();
    let tcp_ul: Vec<_> = ul.records().iter().filter(|r| r.transport == Transport::TCP).collect();
    let first_udp = dl
        .records()
        .iter()
        .chain(ul.records())
        .filter(|r| r.transport == Transport::UDP)
        .map(|r| r.t)
        .min()
        .unwrap();
    verdict(6, "remote-render frame pacing", &[
        ("600 frames x 2 eyes x 7 packets", n_frame_pkts == 600 * 2 * 7),
        ("all frame packets > 1000 B", all_large),
        ("exactly 2 bursts per frame", eye_bursts == 1200),
        (
            "mean inter-frame interval 16.667 ms +-0.05 ms",
            (pacing.mean_us - 16_666.67).abs() <= 50.0,
        ),
        (
            "zero TCP after handshake",
            tcp_dl.len() == 1 && tcp_ul.len() == 1 && tcp_dl[0].t <= first_udp,
        ),
    ]);
}

#[test]
fn criterion_7_mode_comparison() {
    let (art, _dir) = run_bundled("local_vs_remote");
    let r = art.report.scenario_results.expect("scenario results");
    let local = r.latency_local_ms.unwrap();
    let remote = r.latency_remote_ms.unwrap();
    verdict(7, "local vs remote presets", &[
        ("fps 60 vs 12", r.fps_remote == Some(60.0) && r.fps_local == Some(12.0)),
        ("remote latency 67 +-2 ms", (remote - 67.0).abs() <= 2.0),
        ("local latency 85 +-2 ms", (local - 85.0).abs() <= 2.0),
        (
            "resource table equals the measured figures",
            r.resources_local == Some(resource_report(RenderMode::Local))
                && r.resources_remote == Some(resource_report(RenderMode::Remote)),
        ),
        ("comparison table present", r.comparison.is_some()),
    ]);
}

fn wan_cfg(city: Option<&str>) -> ScenarioConfig {
    let talk = ScheduleSection {
        start_s: 15.0,
        end_s: 75.0,
        activity: ActivityKind::Talk,
        file_bytes: None,
    };
    let user = UserSection {
        device: DeviceClass::Desktop,
        city: city.map(str::to_string),
        join_s: 0.0,
        leave_s: None,
        schedule: vec![talk.clone()],
    };
    ScenarioConfig {
        schema_version: 1,
        scenario: "wan_probe".into(),
        seed: 5,
        duration_s: 75.0,
        topology: Default::default(),
        workload: WorkloadSection {
            platform: Platform::Hubs,
            users: vec![user.clone(), user],
            vircadia: None,
            hubs: None,
            vrchat: None,
            remote_render: None,
        },
        metrics: Default::default(),
    }
}

#[test]
fn criterion_8_distance_latency() {
    let mut rates = Vec::new();
    let mut rtts = Vec::new();
    for city in [None, Some("Ottawa"), Some("Montreal"), Some("Beijing")] {
        let cfg = wan_cfg(city);
        let dir = tempfile::tempdir().unwrap();
        let art = run_scenario(&cfg, "", dir.path()).unwrap();
        let dl = load(dir.path(), "user1_dl.csv");
        rates.push(window_mbps(&dl, None, None, 20, 70));
        if let Some(c) = city {
            let r = art.report.scenario_results.unwrap();
            rtts.push((c, r.wan_rtt_ms[c]));
        }
    }
    let spread = (rates.iter().fold(0.0f64, |a, &b| a.max(b))
        - rates.iter().fold(f64::MAX, |a, &b| a.min(b)))
        / rates.iter().fold(f64::MAX, |a, &b| a.min(b));
    let expected = [("Ottawa", 17.5), ("Montreal", 18.4), ("Beijing", 146.8)];
    verdict(8, "wan distance vs throughput", &[
        (
            "reported RTTs exactly 17.5 / 18.4 / 146.8 ms",
            rtts == expected,
        ),
        ("steady throughput changes < 5% across cities", spread < 0.05),
    ]);
}

#[test]
fn criterion_9_property_suites() {
    // determinism: identical bytes across 2 runs x 2 platforms
    let hash_all = |dir: &Path| {
        let mut hashes = Vec::new();
        let mut names: Vec<_> = std::fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .filter(|n| n.ends_with(".csv"))
            .collect();
        names.sort();
        for n in &names {
            let bytes = std::fs::read(dir.join(n)).unwrap();
            hashes.push((n.clone(), format!("{:x}", Sha256::digest(&bytes))));
        }
        hashes
    };
    let mut deterministic = true;
    for name in ["vircadia_2user", "rr_campus"] {
        let (_, d1) = run_bundled(name);
        let (_, d2) = run_bundled(name);
        deterministic &= hash_all(d1.path()) == hash_all(d2.path());
    }

    // packet conservation on every bundled scenario
    let mut conserved = true;
    for name in scenarios::NAMES {
        let (art, _dir) = run_bundled(name);
        let r = art.report.scenario_results.expect("scenario results");
        conserved &= r.packets_injected == r.packets_delivered + r.packets_dropped;
    }
    verdict(9, "determinism and conservation", &[
        ("2 runs x 2 platforms byte-identical", deterministic),
        ("injected = delivered + dropped on all scenarios", conserved),
    ]);
}
