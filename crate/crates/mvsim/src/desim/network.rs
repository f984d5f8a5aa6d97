//! Packet transport over the topology: per hop, a packet pays
//! serialization (size*8/bandwidth), propagation, and FIFO queueing wait.
//! Links serialize one packet at a time; full queues drop the tail.

use std::collections::{BTreeMap, VecDeque};
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::desim::engine::{Engine, Fired};
use crate::desim::topology::{Topology, TopologyError};
use crate::time::{serialization_time, SimTime};
use crate::trace::{NodeId, PacketRecord, Trace, TraceMeta};

#[derive(Debug, Error)]
pub enum NetError {
    #[error(transparent)]
    Routing(#[from] TopologyError),
    #[error("engine error: {0}")]
    Engine(#[from] crate::desim::engine::EngineError),
}

type Path = Rc<Vec<(NodeId, Option<usize>)>>;

#[derive(Debug, Clone)]
pub struct HopArrive {
    pub pkt: PacketRecord,
    pub sent: SimTime,
    path: Path,
    hop: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delivery {
    pub pkt: PacketRecord,
    pub sent: SimTime,
    pub delivered: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DropRecord {
    pub pkt: PacketRecord,
    pub at_node: NodeId,
    pub link: usize,
    pub t: SimTime,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct NetStats {
    pub injected: u64,
    pub delivered: u64,
    pub dropped: u64,
}

#[derive(Debug, Default)]
struct DirState {
    /// completion times of packets in service or queued, oldest first
    in_system: VecDeque<SimTime>,
    /// (enqueue order stamp, completion time), kept for FIFO auditing
    log: Vec<(u64, SimTime)>,
}

pub struct Network {
    topo: Topology,
    link_state: Vec<[DirState; 2]>,
    wan_extra: BTreeMap<NodeId, SimTime>,
    jitter: Option<(f64, ChaCha8Rng)>,
    route_cache: BTreeMap<(NodeId, NodeId), Path>,
    enqueue_stamp: u64,
    pub stats: NetStats,
    pub deliveries: Vec<Delivery>,
    pub drops: Vec<DropRecord>,
}

impl Network {
    pub fn new(topo: Topology) -> Self {
        let n_links = topo.links.len();
        Network {
            topo,
            link_state: (0..n_links).map(|_| [DirState::default(), DirState::default()]).collect(),
            wan_extra: BTreeMap::new(),
            jitter: None,
            route_cache: BTreeMap::new(),
            enqueue_stamp: 0,
            stats: NetStats::default(),
            deliveries: Vec::new(),
            drops: Vec::new(),
        }
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    /// Fixed one-way WAN delay charged on every hop into or out of this
    /// host. Calibration, not emergent.
    pub fn set_wan_delay(&mut self, host: NodeId, one_way: SimTime) {
        self.wan_extra.insert(host, one_way);
    }

    /// Optional uniform propagation jitter of +-frac. Off by default.
    pub fn enable_jitter(&mut self, frac: f64, seed: u64) {
        self.jitter = Some((frac, ChaCha8Rng::seed_from_u64(seed)));
    }

    fn path(&mut self, src: NodeId, dst: NodeId) -> Result<Path, NetError> {
        if let Some(p) = self.route_cache.get(&(src, dst)) {
            return Ok(Rc::clone(p));
        }
        let p: Path = Rc::new(self.topo.route(src, dst)?);
        self.route_cache.insert((src, dst), Rc::clone(&p));
        Ok(p)
    }

    /// Injects one packet at its source host at time pkt.t.
    pub fn transmit(&mut self, engine: &mut Engine<HopArrive>, pkt: PacketRecord) -> Result<(), NetError> {
        let path = self.path(pkt.src, pkt.dst)?;
        engine.schedule(pkt.t, HopArrive { pkt, sent: pkt.t, path, hop: 0 })?;
        self.stats.injected += 1;
        Ok(())
    }

    /// Runs the engine until every in-flight packet is delivered or dropped.
    pub fn run_to_completion(&mut self, engine: &mut Engine<HopArrive>) {
        while let Some(fired) = engine.pop_next() {
            self.on_event(engine, fired);
        }
    }

    fn on_event(&mut self, engine: &mut Engine<HopArrive>, fired: Fired<HopArrive>) {
        let HopArrive { pkt, sent, path, hop } = fired.payload;
        let now = fired.time;
        let (node, outgoing) = path[hop];
        match outgoing {
            None => {
                debug_assert_eq!(node, pkt.dst);
                self.stats.delivered += 1;
                self.deliveries.push(Delivery { pkt, sent, delivered: now });
            }
            Some(link_idx) => {
                let link = self.topo.links[link_idx];
                let dir = if link.a == node { 0 } else { 1 };
                let state = &mut self.link_state[link_idx][dir];
                while state.in_system.front().is_some_and(|&done| done <= now) {
                    state.in_system.pop_front();
                }
                if state.in_system.len() >= link.queue_cap {
                    self.stats.dropped += 1;
                    self.drops.push(DropRecord { pkt, at_node: node, link: link_idx, t: now });
                    return;
                }
                let ser = serialization_time(pkt.size, link.bandwidth_bps);
                let start = state.in_system.back().copied().unwrap_or(now).max(now);
                let done = start + ser;
                state.in_system.push_back(done);
                state.log.push((self.enqueue_stamp, done));
                self.enqueue_stamp += 1;

                // WAN delay rides the client host's own access link
                let mut prop = link.prop_delay;
                for end in [link.a, link.b] {
                    if let Some(&extra) = self.wan_extra.get(&end) {
                        prop = prop + extra;
                    }
                }
                if let Some((frac, rng)) = &mut self.jitter {
                    let f = 1.0 + *frac * rng.gen_range(-1.0..=1.0);
                    prop = SimTime::from_secs_f64(prop.as_secs_f64() * f);
                }
                engine
                    .schedule(done + prop, HopArrive { pkt, sent, path: Rc::clone(&path), hop: hop + 1 })
                    .expect("hop arrival scheduled in the past");
            }
        }
    }

    /// Per link and direction, completion times in enqueue order.
    pub fn fifo_logs(&self) -> Vec<Vec<(u64, SimTime)>> {
        self.link_state
            .iter()
            .flat_map(|dirs| dirs.iter().map(|d| d.log.clone()))
            .collect()
    }

    /// Delivered packets as a trace timestamped at arrival.
    pub fn delivered_trace(&self, meta: TraceMeta) -> Trace {
        let records = self
            .deliveries
            .iter()
            .map(|d| PacketRecord { t: d.delivered, ..d.pkt })
            .collect();
        Trace::from_unsorted(meta, records).expect("delivered packets are valid")
    }
}
