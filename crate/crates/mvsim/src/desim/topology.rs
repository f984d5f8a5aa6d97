//! Campus network graph: three-layer hierarchy (core, distribution,
//! access) with static shortest-path routing by hop count.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::SimTime;
use crate::trace::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Host,
    Switch,
    Router,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub a: NodeId,
    pub b: NodeId,
    pub bandwidth_bps: u64,
    pub prop_delay: SimTime,
    pub queue_cap: usize,
}

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("config error: {0}")]
    Config(String),
    #[error("no route between {0} and {1}")]
    NoRoute(NodeId, NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
}

#[derive(Debug, Clone, Default)]
pub struct Topology {
    pub nodes: Vec<Node>,
    pub links: Vec<Link>,
    adjacency: BTreeMap<NodeId, Vec<(NodeId, usize)>>,
}

impl Topology {
    pub fn new(nodes: Vec<Node>, links: Vec<Link>) -> Result<Self, TopologyError> {
        let mut ids: Vec<NodeId> = nodes.iter().map(|n| n.id).collect();
        ids.sort();
        ids.dedup();
        if ids.len() != nodes.len() {
            return Err(TopologyError::Config("duplicate node ids".into()));
        }
        let mut adjacency: BTreeMap<NodeId, Vec<(NodeId, usize)>> =
            nodes.iter().map(|n| (n.id, Vec::new())).collect();
        for (i, l) in links.iter().enumerate() {
            if l.a == l.b {
                return Err(TopologyError::Config(format!("self-loop at {}", l.a)));
            }
            if l.bandwidth_bps == 0 {
                return Err(TopologyError::Config(format!(
                    "nonpositive bandwidth on link {}-{}",
                    l.a, l.b
                )));
            }
            if l.queue_cap < 1 {
                return Err(TopologyError::Config(format!(
                    "queue capacity must be >= 1 on link {}-{}",
                    l.a, l.b
                )));
            }
            for end in [l.a, l.b] {
                adjacency
                    .get_mut(&end)
                    .ok_or(TopologyError::UnknownNode(end))?;
            }
            adjacency.get_mut(&l.a).unwrap().push((l.b, i));
            adjacency.get_mut(&l.b).unwrap().push((l.a, i));
        }
        // neighbor order fixed by id so BFS routing is deterministic
        for neighbors in adjacency.values_mut() {
            neighbors.sort();
        }
        let topo = Topology { nodes, links, adjacency };
        topo.check_connected()?;
        Ok(topo)
    }

    fn check_connected(&self) -> Result<(), TopologyError> {
        let Some(start) = self.nodes.first() else { return Ok(()) };
        let mut seen = vec![start.id];
        let mut queue = VecDeque::from([start.id]);
        while let Some(n) = queue.pop_front() {
            for &(next, _) in &self.adjacency[&n] {
                if !seen.contains(&next) {
                    seen.push(next);
                    queue.push_back(next);
                }
            }
        }
        if seen.len() != self.nodes.len() {
            return Err(TopologyError::Config("topology not connected".into()));
        }
        Ok(())
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn hosts(&self) -> impl Iterator<Item = &Node> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Host)
    }

    /// Shortest path by hop count (BFS with id-ordered neighbors, so the
    /// result is unique and deterministic). Returns node sequence
    /// src..=dst and the link index used at each hop.
    pub fn route(&self, src: NodeId, dst: NodeId) -> Result<Vec<(NodeId, Option<usize>)>, TopologyError> {
        if !self.adjacency.contains_key(&src) {
            return Err(TopologyError::UnknownNode(src));
        }
        if !self.adjacency.contains_key(&dst) {
            return Err(TopologyError::UnknownNode(dst));
        }
        if src == dst {
            return Ok(vec![(src, None)]);
        }
        let mut prev: BTreeMap<NodeId, (NodeId, usize)> = BTreeMap::new();
        let mut queue = VecDeque::from([src]);
        'bfs: while let Some(n) = queue.pop_front() {
            for &(next, link_idx) in &self.adjacency[&n] {
                if next != src && !prev.contains_key(&next) {
                    prev.insert(next, (n, link_idx));
                    if next == dst {
                        break 'bfs;
                    }
                    queue.push_back(next);
                }
            }
        }
        if !prev.contains_key(&dst) {
            return Err(TopologyError::NoRoute(src, dst));
        }
        let mut path = vec![(dst, None)];
        let mut cur = dst;
        while cur != src {
            let (p, link_idx) = prev[&cur];
            path.last_mut().unwrap().1 = Some(link_idx);
            path.push((p, None));
            cur = p;
        }
        path.reverse();
        // path[i].1 = link from path[i-1] to path[i]; shift to "link leaving node i"
        let mut out = Vec::with_capacity(path.len());
        for i in 0..path.len() {
            let outgoing = if i + 1 < path.len() { path[i + 1].1 } else { None };
            out.push((path[i].0, outgoing));
        }
        Ok(out)
    }
}

/// Parameters for the three-layer campus network. Defaults are explicit
/// stand-ins (reported as assumptions): the reference measurements do not
/// pin link speeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampusConfig {
    pub access_bw_bps: u64,
    pub dist_bw_bps: u64,
    pub core_bw_bps: u64,
    pub prop_delay: SimTime,
    pub queue_cap: usize,
    pub n_servers: usize,
    /// Clients alternate between the two access switches.
    pub n_clients: usize,
}

impl Default for CampusConfig {
    fn default() -> Self {
        CampusConfig {
            access_bw_bps: 1_000_000_000,
            dist_bw_bps: 10_000_000_000,
            core_bw_bps: 40_000_000_000,
            prop_delay: SimTime::from_micros(50),
            queue_cap: 256,
            n_servers: 1,
            n_clients: 2,
        }
    }
}

/// Node numbering of the built campus topology.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CampusLayout {
    pub core: NodeId,
    pub dist: [NodeId; 2],
    pub access: [NodeId; 2],
    pub servers: Vec<NodeId>,
    pub clients: Vec<NodeId>,
    /// clients[i] hangs off access[client_switch[i]]
    pub client_switch: Vec<usize>,
}

/// One core router, two distribution routers, two access switches,
/// servers behind the core, clients behind the access switches. The two
/// distribution routers are cross-linked; all shortest paths are unique.
pub fn build_campus_topology(cfg: &CampusConfig) -> Result<(Topology, CampusLayout), TopologyError> {
    if cfg.n_clients == 0 {
        return Err(TopologyError::Config("campus needs at least one client".into()));
    }
    if cfg.n_servers == 0 {
        return Err(TopologyError::Config("campus needs at least one server".into()));
    }
    if cfg.access_bw_bps == 0 || cfg.dist_bw_bps == 0 || cfg.core_bw_bps == 0 {
        return Err(TopologyError::Config("link bandwidth must be positive".into()));
    }

    let core = NodeId(0);
    let dist = [NodeId(1), NodeId(2)];
    let access = [NodeId(3), NodeId(4)];
    let mut nodes = vec![
        Node { id: core, kind: NodeKind::Router },
        Node { id: dist[0], kind: NodeKind::Router },
        Node { id: dist[1], kind: NodeKind::Router },
        Node { id: access[0], kind: NodeKind::Switch },
        Node { id: access[1], kind: NodeKind::Switch },
    ];
    let mut next_id = 5u32;
    let mut servers = Vec::new();
    for _ in 0..cfg.n_servers {
        servers.push(NodeId(next_id));
        nodes.push(Node { id: NodeId(next_id), kind: NodeKind::Host });
        next_id += 1;
    }
    let mut clients = Vec::new();
    let mut client_switch = Vec::new();
    for i in 0..cfg.n_clients {
        clients.push(NodeId(next_id));
        client_switch.push(i % 2);
        nodes.push(Node { id: NodeId(next_id), kind: NodeKind::Host });
        next_id += 1;
    }

    let link = |a, b, bw| Link {
        a,
        b,
        bandwidth_bps: bw,
        prop_delay: cfg.prop_delay,
        queue_cap: cfg.queue_cap,
    };
    let mut links = vec![
        link(core, dist[0], cfg.core_bw_bps),
        link(core, dist[1], cfg.core_bw_bps),
        link(dist[0], dist[1], cfg.dist_bw_bps),
        link(dist[0], access[0], cfg.dist_bw_bps),
        link(dist[1], access[1], cfg.dist_bw_bps),
    ];
    for &s in &servers {
        links.push(link(core, s, cfg.core_bw_bps));
    }
    for (i, &c) in clients.iter().enumerate() {
        links.push(link(access[client_switch[i]], c, cfg.access_bw_bps));
    }

    let topo = Topology::new(nodes, links)?;
    Ok((topo, CampusLayout { core, dist, access, servers, clients, client_switch }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_campus_shape() {
        let (topo, layout) = build_campus_topology(&CampusConfig::default()).unwrap();
        // 5 infrastructure nodes + 1 server + 2 clients, 8 links
        assert_eq!(topo.nodes.len(), 8);
        assert_eq!(topo.links.len(), 8);
        assert_eq!(layout.servers.len(), 1);
        assert_eq!(layout.clients.len(), 2);
    }

    #[test]
    fn zero_clients_is_config_error() {
        let cfg = CampusConfig { n_clients: 0, ..CampusConfig::default() };
        assert!(build_campus_topology(&cfg).is_err());
    }

    #[test]
    fn every_host_pair_has_a_route() {
        for n_clients in [1usize, 2, 5, 8] {
            let cfg = CampusConfig { n_clients, ..CampusConfig::default() };
            let (topo, _) = build_campus_topology(&cfg).unwrap();
            let hosts: Vec<NodeId> = topo.hosts().map(|n| n.id).collect();
            for &a in &hosts {
                for &b in &hosts {
                    if a != b {
                        let path = topo.route(a, b).unwrap();
                        assert_eq!(path.first().unwrap().0, a);
                        assert_eq!(path.last().unwrap().0, b);
                    }
                }
            }
        }
    }

    #[test]
    fn zero_bandwidth_is_config_error() {
        let cfg = CampusConfig { access_bw_bps: 0, ..CampusConfig::default() };
        assert!(build_campus_topology(&cfg).is_err());
    }

    #[test]
    fn routing_is_deterministic() {
        let (topo, layout) = build_campus_topology(&CampusConfig::default()).unwrap();
        let r1 = topo.route(layout.clients[0], layout.servers[0]).unwrap();
        let r2 = topo.route(layout.clients[0], layout.servers[0]).unwrap();
        assert_eq!(r1, r2);
    }
}
