//! Mozilla Hubs traffic: TCP-only model load before entry, then UDP voice
//! and webcam streams plus TCP baseline and paired upload bursts.

use serde::{Deserialize, Serialize};

use crate::time::SimTime;
use crate::trace::{Direction, FlowId, PacketRecord, Transport};
use crate::workloads::{
    finish_user_trace, gen_burst, gen_periodic, segment_points, substream, validate, Activity,
    DeviceClass, PacketProto, SizeDist, UserSpec, UserTrace, WorkloadError,
};

pub const FLOW_BASELINE: u16 = 1;
pub const FLOW_VOICE: u16 = 2;
pub const FLOW_WEBCAM: u16 = 3;
pub const FLOW_UPLOAD: u16 = 4;
pub const FLOW_MODEL_LOAD: u16 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HubsParams {
    /// stage I length: TCP-only model load; UDP starts at join + entry
    pub entry_delay: SimTime,
    pub model_load_bytes: u64,
    pub model_drain_bps: f64,
    /// measured ~45 Kb/s for a two-party conversation; each voice stream
    /// carries half
    pub voice_conversation_bps: f64,
    /// measured ~1.3 Mb/s per webcam stream, each direction
    pub webcam_stream_bps: f64,
    /// measured per-device baselines (UL, DL) in b/s
    pub baseline_quest_bps: (f64, f64),
    pub baseline_desktop_bps: (f64, f64),
    pub baseline_phone_bps: (f64, f64),
    /// calibration override used by aggregate scenarios
    pub baseline_override_bps: Option<(f64, f64)>,
    /// uploads drain over this long, so peak rate is proportional to
    /// file size; the measured file peaks at ~10 Mb/s for 1.25 MB
    pub upload_drain: SimTime,
    pub burst_pkt_size: u32,
    pub voice_size: SizeDist,
    pub webcam_size: SizeDist,
    pub baseline_size: SizeDist,
    pub jitter_frac: f64,
    /// optional reverse-direction 40 B ack per 2 data packets
    pub ack_echo: bool,
    pub ack_every: u32,
    pub ack_size: u32,
}

impl Default for HubsParams {
    fn default() -> Self {
        HubsParams {
            entry_delay: SimTime::from_secs(10),
            model_load_bytes: 4_000_000,
            model_drain_bps: 20e6,
            voice_conversation_bps: 45_000.0,
            webcam_stream_bps: 1_300_000.0,
            baseline_quest_bps: (140_000.0, 1_000_000.0),
            baseline_desktop_bps: (350_000.0, 1_160_000.0),
            baseline_phone_bps: (170_000.0, 1_080_000.0),
            baseline_override_bps: None,
            upload_drain: SimTime::from_secs(1),
            burst_pkt_size: 1250,
            voice_size: SizeDist::steady(160, 300),
            webcam_size: SizeDist::steady(1100, 1400),
            baseline_size: SizeDist::steady(400, 1400),
            jitter_frac: 0.01,
            ack_echo: false,
            ack_every: 2,
            ack_size: 40,
        }
    }
}

impl HubsParams {
    fn baseline(&self, device: DeviceClass) -> (f64, f64) {
        if let Some(b) = self.baseline_override_bps {
            return b;
        }
        match device {
            DeviceClass::Quest => self.baseline_quest_bps,
            DeviceClass::Desktop => self.baseline_desktop_bps,
            DeviceClass::Phone => self.baseline_phone_bps,
        }
    }

    fn check(&self) -> Result<(), WorkloadError> {
        if self.voice_conversation_bps <= 0.0 || self.webcam_stream_bps <= 0.0 {
            return Err(WorkloadError::Config("rates must be > 0".into()));
        }
        let load_time = self.model_load_bytes as f64 * 8.0 / self.model_drain_bps;
        if load_time > self.entry_delay.as_secs_f64() {
            return Err(WorkloadError::Config(
                "model load does not fit in the connection stage".into(),
            ));
        }
        Ok(())
    }
}

fn entry_of(u: &UserSpec, params: &HubsParams) -> SimTime {
    u.join + params.entry_delay
}

pub fn gen_hubs(
    params: &HubsParams,
    users: &[UserSpec],
    duration: SimTime,
    seed: u64,
) -> Result<Vec<UserTrace>, WorkloadError> {
    params.check()?;
    validate(users, duration)?;

    // UDP activities may not start before entry
    for (i, u) in users.iter().enumerate() {
        let entry = entry_of(u, params);
        for e in &u.schedule {
            if matches!(e.activity, Activity::Talk | Activity::Webcam) && e.start < entry {
                return Err(WorkloadError::Config(format!(
                    "user {i}: UDP activity before entry time"
                )));
            }
        }
    }

    let mut points = segment_points(users, duration);
    for u in users {
        let entry = entry_of(u, params);
        if entry <= duration {
            points.push(entry);
        }
    }
    points.sort();
    points.dedup();
    let mut traces = Vec::with_capacity(users.len());

    for (ui, u) in users.iter().enumerate() {
        let mut records: Vec<PacketRecord> = Vec::new();
        let proto = |dir: Direction, transport: Transport, flow: u16| {
            let (src, dst) = match dir {
                Direction::UL => (u.node, u.server),
                Direction::DL => (u.server, u.node),
            };
            PacketProto { dir, transport, flow: FlowId(flow), src, dst }
        };
        let entry = entry_of(u, params);

        // stage I: TCP-only model load
        gen_burst(
            &mut records,
            proto(Direction::DL, Transport::TCP, FLOW_MODEL_LOAD),
            u.join,
            params.model_load_bytes,
            params.model_drain_bps,
            params.burst_pkt_size,
        );

        // stage II: TCP baseline
        let (ul_base, dl_base) = params.baseline(u.device);
        let leave = u.leave.unwrap_or(duration).min(duration);
        if entry < leave {
            let mut rng = substream(seed, ui as u32, Direction::UL, FLOW_BASELINE);
            gen_periodic(
                &mut records,
                proto(Direction::UL, Transport::TCP, FLOW_BASELINE),
                ul_base,
                params.baseline_size,
                params.jitter_frac,
                entry,
                leave,
                &mut rng,
            );
            let mut rng = substream(seed, ui as u32, Direction::DL, FLOW_BASELINE);
            gen_periodic(
                &mut records,
                proto(Direction::DL, Transport::TCP, FLOW_BASELINE),
                dl_base,
                params.baseline_size,
                params.jitter_frac,
                entry,
                leave,
                &mut rng,
            );
        }

        // voice and webcam over UDP, piecewise by segment
        let mut voice_ul = substream(seed, ui as u32, Direction::UL, FLOW_VOICE);
        let mut voice_dl = substream(seed, ui as u32, Direction::DL, FLOW_VOICE);
        let mut cam_ul = substream(seed, ui as u32, Direction::UL, FLOW_WEBCAM);
        let mut cam_dl = substream(seed, ui as u32, Direction::DL, FLOW_WEBCAM);
        for w in points.windows(2) {
            let (a, b) = (w[0], w[1]);
            if a < entry || !u.present_at(a, duration) {
                continue;
            }
            let per_stream = params.voice_conversation_bps / 2.0;
            if u.active(a, |act| matches!(act, Activity::Talk)) {
                gen_periodic(
                    &mut records,
                    proto(Direction::UL, Transport::UDP, FLOW_VOICE),
                    per_stream,
                    params.voice_size,
                    params.jitter_frac,
                    a,
                    b,
                    &mut voice_ul,
                );
            }
            let talking_peers = users
                .iter()
                .enumerate()
                .filter(|&(vi, v)| {
                    vi != ui
                        && v.present_at(a, duration)
                        && a >= entry_of(v, params)
                        && v.active(a, |act| matches!(act, Activity::Talk))
                })
                .count();
            gen_periodic(
                &mut records,
                proto(Direction::DL, Transport::UDP, FLOW_VOICE),
                talking_peers as f64 * per_stream,
                params.voice_size,
                params.jitter_frac,
                a,
                b,
                &mut voice_dl,
            );
            if u.active(a, |act| matches!(act, Activity::Webcam)) {
                gen_periodic(
                    &mut records,
                    proto(Direction::UL, Transport::UDP, FLOW_WEBCAM),
                    params.webcam_stream_bps,
                    params.webcam_size,
                    params.jitter_frac,
                    a,
                    b,
                    &mut cam_ul,
                );
            }
            let cams_on = users
                .iter()
                .enumerate()
                .filter(|&(vi, v)| {
                    vi != ui
                        && v.present_at(a, duration)
                        && a >= entry_of(v, params)
                        && v.active(a, |act| matches!(act, Activity::Webcam))
                })
                .count();
            gen_periodic(
                &mut records,
                proto(Direction::DL, Transport::UDP, FLOW_WEBCAM),
                cams_on as f64 * params.webcam_stream_bps,
                params.webcam_size,
                params.jitter_frac,
                a,
                b,
                &mut cam_dl,
            );
        }

        // uploads: UL burst from the uploader, then a DL copy to every
        // present user once the upload completes
        for (vi, v) in users.iter().enumerate() {
            for e in &v.schedule {
                let Activity::UploadFile { bytes } = e.activity else { continue };
                let rate = bytes as f64 * 8.0 / params.upload_drain.as_secs_f64();
                let mut ul_end = e.start;
                if vi == ui {
                    ul_end = gen_burst(
                        &mut records,
                        proto(Direction::UL, Transport::TCP, FLOW_UPLOAD),
                        e.start,
                        bytes,
                        rate,
                        params.burst_pkt_size,
                    );
                } else {
                    ul_end = ul_end + params.upload_drain;
                }
                if u.present_at(e.start, duration) && e.start >= entry {
                    gen_burst(
                        &mut records,
                        proto(Direction::DL, Transport::TCP, FLOW_UPLOAD),
                        ul_end,
                        bytes,
                        rate,
                        params.burst_pkt_size,
                    );
                }
            }
        }

        if params.ack_echo {
            let mut acks = Vec::new();
            let mut counts = [0u32, 0u32];
            for r in &records {
                if r.transport != Transport::TCP {
                    continue;
                }
                let idx = if r.dir == Direction::UL { 0 } else { 1 };
                counts[idx] += 1;
                if counts[idx] % params.ack_every == 0 {
                    let rev = match r.dir {
                        Direction::UL => proto(Direction::DL, Transport::TCP, r.flow.0),
                        Direction::DL => proto(Direction::UL, Transport::TCP, r.flow.0),
                    };
                    acks.push(rev.at(r.t, params.ack_size));
                }
            }
            records.extend(acks);
        }

        records.retain(|r| r.t < duration);
        traces.push(finish_user_trace(ui, "hubs", seed, duration, records));
    }
    Ok(traces)
}
