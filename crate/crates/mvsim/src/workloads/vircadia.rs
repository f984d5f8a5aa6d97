//! Vircadia traffic: seven periodic flows per user and direction, steady
//! packets bounded at 700 B, join bursts, voice on flow 6.

use serde::{Deserialize, Serialize};

use crate::time::SimTime;
use crate::trace::{Direction, FlowId, PacketRecord, Transport};
use crate::workloads::{
    finish_user_trace, gen_burst, gen_periodic, segment_points, substream, validate, Activity,
    DeviceClass, PacketProto, SizeDist, UserSpec, UserTrace, WorkloadError,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VircadiaParams {
    pub n_flows: u16,
    pub steady_size: SizeDist,
    pub jitter_frac: f64,
    /// desktop rates: measured 0.21 Mb/s DL solo, 0.30 Mb/s DL with a
    /// peer present, 0.31 Mb/s UL
    pub desktop_dl_solo_bps: f64,
    pub desktop_dl_peer_bps: f64,
    pub desktop_ul_bps: f64,
    /// headset rates: measured 0.37 Mb/s DL, 0.32 Mb/s UL
    pub quest_dl_bps: f64,
    pub quest_ul_bps: f64,
    pub voice_flow: u16,
    pub voice_delta_bps: f64,
    /// content/avatar load on join; budget is an assumption, drained at
    /// line rate in large packets (the only packets allowed past 700 B)
    pub join_burst_bytes: u64,
    pub burst_drain_bps: f64,
    pub burst_pkt_size: u32,
}

impl Default for VircadiaParams {
    fn default() -> Self {
        VircadiaParams {
            n_flows: 7,
            steady_size: SizeDist::steady(200, 700),
            jitter_frac: 0.01,
            desktop_dl_solo_bps: 210_000.0,
            desktop_dl_peer_bps: 300_000.0,
            desktop_ul_bps: 310_000.0,
            quest_dl_bps: 370_000.0,
            quest_ul_bps: 320_000.0,
            voice_flow: 6,
            voice_delta_bps: 50_000.0,
            join_burst_bytes: 1_000_000,
            burst_drain_bps: 20e6,
            burst_pkt_size: 1250,
        }
    }
}

impl VircadiaParams {
    fn dl_rate(&self, device: DeviceClass, peers_present: bool) -> f64 {
        match device {
            DeviceClass::Quest => self.quest_dl_bps,
            _ => {
                if peers_present {
                    self.desktop_dl_peer_bps
                } else {
                    self.desktop_dl_solo_bps
                }
            }
        }
    }

    fn ul_rate(&self, device: DeviceClass) -> f64 {
        match device {
            DeviceClass::Quest => self.quest_ul_bps,
            _ => self.desktop_ul_bps,
        }
    }

    fn check(&self) -> Result<(), WorkloadError> {
        if self.n_flows == 0 {
            return Err(WorkloadError::Config("need at least one flow".into()));
        }
        for (name, r) in [
            ("desktop_dl_solo", self.desktop_dl_solo_bps),
            ("desktop_dl_peer", self.desktop_dl_peer_bps),
            ("desktop_ul", self.desktop_ul_bps),
            ("quest_dl", self.quest_dl_bps),
            ("quest_ul", self.quest_ul_bps),
        ] {
            if r <= 0.0 {
                return Err(WorkloadError::Config(format!("{name} rate must be > 0")));
            }
        }
        if self.voice_flow == 0 || self.voice_flow > self.n_flows {
            return Err(WorkloadError::Config("voice flow index out of range".into()));
        }
        Ok(())
    }
}

pub fn gen_vircadia(
    params: &VircadiaParams,
    users: &[UserSpec],
    duration: SimTime,
    seed: u64,
) -> Result<Vec<UserTrace>, WorkloadError> {
    params.check()?;
    validate(users, duration)?;
    let points = segment_points(users, duration);
    let mut traces = Vec::with_capacity(users.len());

    for (ui, u) in users.iter().enumerate() {
        let mut records: Vec<PacketRecord> = Vec::new();
        let proto = |dir: Direction, flow: u16| {
            let (src, dst) = match dir {
                Direction::UL => (u.node, u.server),
                Direction::DL => (u.server, u.node),
            };
            PacketProto { dir, transport: Transport::UDP, flow: FlowId(flow), src, dst }
        };

        let mut ul_rngs: Vec<_> = (1..=params.n_flows)
            .map(|f| substream(seed, ui as u32, Direction::UL, f))
            .collect();
        let mut dl_rngs: Vec<_> = (1..=params.n_flows)
            .map(|f| substream(seed, ui as u32, Direction::DL, f))
            .collect();

        for w in points.windows(2) {
            let (a, b) = (w[0], w[1]);
            if !u.present_at(a, duration) {
                continue;
            }
            let peers: Vec<&UserSpec> = users
                .iter()
                .enumerate()
                .filter(|&(vi, v)| vi != ui && v.present_at(a, duration))
                .map(|(_, v)| v)
                .collect();
            let dl_base = params.dl_rate(u.device, !peers.is_empty());
            let ul_base = params.ul_rate(u.device);
            let i_talk = u.active(a, |act| matches!(act, Activity::Talk));
            let talking_peers = peers
                .iter()
                .filter(|v| v.active(a, |act| matches!(act, Activity::Talk)))
                .count();

            for f in 1..=params.n_flows {
                let per_flow_dl = dl_base / params.n_flows as f64;
                let per_flow_ul = ul_base / params.n_flows as f64;
                let (dl, ul) = if f == params.voice_flow {
                    (
                        per_flow_dl + talking_peers as f64 * params.voice_delta_bps,
                        per_flow_ul + if i_talk { params.voice_delta_bps } else { 0.0 },
                    )
                } else {
                    (per_flow_dl, per_flow_ul)
                };
                gen_periodic(
                    &mut records,
                    proto(Direction::UL, f),
                    ul,
                    params.steady_size,
                    params.jitter_frac,
                    a,
                    b,
                    &mut ul_rngs[(f - 1) as usize],
                );
                gen_periodic(
                    &mut records,
                    proto(Direction::DL, f),
                    dl,
                    params.steady_size,
                    params.jitter_frac,
                    a,
                    b,
                    &mut dl_rngs[(f - 1) as usize],
                );
            }
        }

        // content load at own join, avatar load when someone else joins
        gen_burst(
            &mut records,
            proto(Direction::DL, 1),
            u.join,
            params.join_burst_bytes,
            params.burst_drain_bps,
            params.burst_pkt_size,
        );
        for (vi, v) in users.iter().enumerate() {
            if vi != ui && v.join > u.join && u.present_at(v.join, duration) {
                gen_burst(
                    &mut records,
                    proto(Direction::DL, 1),
                    v.join,
                    params.join_burst_bytes,
                    params.burst_drain_bps,
                    params.burst_pkt_size,
                );
            }
        }

        records.retain(|r| r.t < duration);
        traces.push(finish_user_trace(ui, "vircadia", seed, duration, records));
    }
    Ok(traces)
}
