//! VRChat traffic: a 15 s TCP connection stage with a high peak, then a
//! very low-rate UDP transmission stage that grows linearly with peers.

use serde::{Deserialize, Serialize};

use crate::time::SimTime;
use crate::trace::{Direction, FlowId, PacketRecord, Transport};
use crate::workloads::{
    finish_user_trace, gen_burst, gen_periodic, segment_points, substream, validate, Activity,
    PacketProto, SizeDist, UserSpec, UserTrace, WorkloadError,
};

pub const FLOW_CONNECTION: u16 = 1;
pub const FLOW_STREAM: u16 = 2;
pub const FLOW_AVATAR: u16 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VRChatParams {
    pub conn_duration: SimTime,
    /// measured: mean 8.9 Mb/s with a 74.5 Mb/s peak over the stage
    pub conn_dl_mean_bps: f64,
    pub conn_dl_peak_bps: f64,
    pub conn_peak_duration: SimTime,
    pub conn_ul_bps: f64,
    /// measured transmission-stage rates: solo 0.002 Mb/s DL, 0.03 Mb/s UL
    pub trans_dl_solo_bps: f64,
    pub trans_ul_bps: f64,
    /// linear growth to 0.04 Mb/s at 4 users
    pub per_peer_dl_bps: f64,
    /// one speaker raises DL to 0.07 Mb/s
    pub speech_dl_bps: f64,
    pub avatar_burst_bytes: u64,
    pub avatar_drain_bps: f64,
    pub burst_pkt_size: u32,
    pub conn_size: SizeDist,
    pub stream_size: SizeDist,
    pub jitter_frac: f64,
}

impl Default for VRChatParams {
    fn default() -> Self {
        VRChatParams {
            conn_duration: SimTime::from_secs(15),
            conn_dl_mean_bps: 8_900_000.0,
            conn_dl_peak_bps: 74_500_000.0,
            conn_peak_duration: SimTime::from_secs(1),
            conn_ul_bps: 100_000.0,
            trans_dl_solo_bps: 2_000.0,
            trans_ul_bps: 30_000.0,
            per_peer_dl_bps: (40_000.0 - 2_000.0) / 3.0,
            speech_dl_bps: 30_000.0,
            avatar_burst_bytes: 500_000,
            avatar_drain_bps: 10e6,
            burst_pkt_size: 1250,
            conn_size: SizeDist::steady(600, 1400),
            stream_size: SizeDist::steady(120, 400),
            jitter_frac: 0.01,
        }
    }
}

impl VRChatParams {
    fn check(&self) -> Result<(), WorkloadError> {
        for (name, r) in [
            ("conn_dl_mean", self.conn_dl_mean_bps),
            ("conn_ul", self.conn_ul_bps),
            ("trans_dl_solo", self.trans_dl_solo_bps),
            ("trans_ul", self.trans_ul_bps),
        ] {
            if r <= 0.0 {
                return Err(WorkloadError::Config(format!("{name} rate must be > 0")));
            }
        }
        let total = self.conn_dl_mean_bps * self.conn_duration.as_secs_f64();
        let peak = self.conn_dl_peak_bps * self.conn_peak_duration.as_secs_f64();
        if peak >= total {
            return Err(WorkloadError::Config(
                "connection peak exceeds the stage byte budget".into(),
            ));
        }
        Ok(())
    }
}

fn entry_of(u: &UserSpec, params: &VRChatParams) -> SimTime {
    u.join + params.conn_duration
}

pub fn gen_vrchat(
    params: &VRChatParams,
    users: &[UserSpec],
    duration: SimTime,
    seed: u64,
) -> Result<Vec<UserTrace>, WorkloadError> {
    params.check()?;
    validate(users, duration)?;
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

        // connection stage: peak burst up front, remainder spread evenly
        let stage_s = params.conn_duration.as_secs_f64();
        let total_bytes = (params.conn_dl_mean_bps * stage_s / 8.0) as u64;
        let peak_bytes =
            (params.conn_dl_peak_bps * params.conn_peak_duration.as_secs_f64() / 8.0) as u64;
        gen_burst(
            &mut records,
            proto(Direction::DL, Transport::TCP, FLOW_CONNECTION),
            u.join,
            peak_bytes,
            params.conn_dl_peak_bps,
            params.burst_pkt_size,
        );
        let tail_start = u.join + params.conn_peak_duration;
        let tail_s = stage_s - params.conn_peak_duration.as_secs_f64();
        let tail_rate = (total_bytes - peak_bytes) as f64 * 8.0 / tail_s;
        let mut rng = substream(seed, ui as u32, Direction::DL, FLOW_CONNECTION);
        gen_periodic(
            &mut records,
            proto(Direction::DL, Transport::TCP, FLOW_CONNECTION),
            tail_rate,
            params.conn_size,
            params.jitter_frac,
            tail_start,
            entry,
            &mut rng,
        );
        let mut rng = substream(seed, ui as u32, Direction::UL, FLOW_CONNECTION);
        gen_periodic(
            &mut records,
            proto(Direction::UL, Transport::TCP, FLOW_CONNECTION),
            params.conn_ul_bps,
            params.conn_size,
            params.jitter_frac,
            u.join,
            entry,
            &mut rng,
        );

        // transmission stage: low-rate UDP, DL grows with peers and speech
        let mut ul_rng = substream(seed, ui as u32, Direction::UL, FLOW_STREAM);
        let mut dl_rng = substream(seed, ui as u32, Direction::DL, FLOW_STREAM);
        let leave = u.leave.unwrap_or(duration).min(duration);
        for w in points.windows(2) {
            let (a, b) = (w[0], w[1]);
            if a < entry || a >= leave {
                continue;
            }
            gen_periodic(
                &mut records,
                proto(Direction::UL, Transport::UDP, FLOW_STREAM),
                params.trans_ul_bps,
                params.stream_size,
                params.jitter_frac,
                a,
                b,
                &mut ul_rng,
            );
            let peers: Vec<&UserSpec> = users
                .iter()
                .enumerate()
                .filter(|&(vi, v)| vi != ui && v.present_at(a, duration))
                .map(|(_, v)| v)
                .collect();
            let talking = peers
                .iter()
                .filter(|v| v.active(a, |act| matches!(act, Activity::Talk)))
                .count();
            let dl_rate = params.trans_dl_solo_bps
                + peers.len() as f64 * params.per_peer_dl_bps
                + talking as f64 * params.speech_dl_bps;
            gen_periodic(
                &mut records,
                proto(Direction::DL, Transport::UDP, FLOW_STREAM),
                dl_rate,
                params.stream_size,
                params.jitter_frac,
                a,
                b,
                &mut dl_rng,
            );
        }

        // avatar burst on each later join (UDP: it happens mid-stream)
        for (vi, v) in users.iter().enumerate() {
            if vi != ui && v.join > u.join && u.present_at(v.join, duration) {
                gen_burst(
                    &mut records,
                    proto(Direction::DL, Transport::UDP, FLOW_AVATAR),
                    v.join,
                    params.avatar_burst_bytes,
                    params.avatar_drain_bps,
                    params.burst_pkt_size,
                );
            }
        }

        records.retain(|r| r.t < duration);
        traces.push(finish_user_trace(ui, "vrchat", seed, duration, records));
    }
    Ok(traces)
}
