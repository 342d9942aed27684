//! Time-varying ISL graph, feeder edges and shortest-delay routing.
//!
//! The canonical ISL pattern is the +grid: every satellite links to its two
//! in-plane neighbours (slot ± 1) and to the same slot in the adjacent planes.
//! Inter-plane links are dropped when either end is above a latitude limit.
//! Ground sites are graph endpoints only and never carry transit traffic.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, VecDeque};
use std::fmt;
use std::io::{self, Write};
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orbital::{self, ConstellationConfig, GroundSite, SatId, SatelliteState, SiteRole};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("no route from {src} to {dst}")]
    NoRoute { src: NodeId, dst: NodeId },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("route {src} -> {dst} uses a link that no longer exists ({from} - {to})")]
    StaleRoute { src: NodeId, dst: NodeId, from: NodeId, to: NodeId },
}

/// A satellite or a ground site. Satellites order before sites.
/// Serialized as `sat-<plane>-<slot>` or `site:<id>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum NodeId {
    Sat(SatId),
    Site(String),
}

impl NodeId {
    pub fn site(id: impl Into<String>) -> Self {
        NodeId::Site(id.into())
    }

    pub fn as_sat(&self) -> Option<SatId> {
        match self {
            NodeId::Sat(s) => Some(*s),
            NodeId::Site(_) => None,
        }
    }

    pub fn is_sat(&self) -> bool {
        matches!(self, NodeId::Sat(_))
    }
}

impl From<SatId> for NodeId {
    fn from(s: SatId) -> Self {
        NodeId::Sat(s)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Sat(s) => write!(f, "{s}"),
            NodeId::Site(id) => write!(f, "site:{id}"),
        }
    }
}

impl std::str::FromStr for NodeId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.strip_prefix("site:") {
            Some("") => Err("empty site id".to_string()),
            Some(id) => Ok(NodeId::Site(id.to_string())),
            None => s.parse().map(NodeId::Sat),
        }
    }
}

impl TryFrom<String> for NodeId {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<NodeId> for String {
    fn from(n: NodeId) -> String {
        n.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IslKind {
    IntraPlane,
    InterPlane,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IslEdge {
    pub a: SatId,
    pub b: SatId,
    pub delay_s: f64,
    pub kind: IslKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederEdge {
    pub sat: SatId,
    pub site: String,
    pub delay_s: f64,
    pub elevation_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyPolicy {
    /// Inter-plane links are cut when either end is above this |latitude|.
    #[serde(default = "default_lat_limit")]
    pub inter_plane_max_latitude_deg: f64,
    #[serde(default)]
    pub max_isl_range_km: Option<f64>,
    /// Satellites allowed to terminate feeder links; `None` means all.
    #[serde(default)]
    pub feeder_capable: Option<BTreeSet<SatId>>,
}

fn default_lat_limit() -> f64 {
    70.0
}

impl Default for TopologyPolicy {
    fn default() -> Self {
        Self {
            inter_plane_max_latitude_deg: default_lat_limit(),
            max_isl_range_km: None,
            feeder_capable: None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Adj {
    to: usize,
    delay_s: f64,
    isl: bool,
}

/// Immutable adjacency snapshot shared by a topology and the routing tables built from it.
#[derive(Debug)]
struct Graph {
    nodes: Vec<NodeId>,
    n_sats: usize,
    adj: Vec<Vec<Adj>>,
}

impl Graph {
    fn is_ground(&self, i: usize) -> bool {
        i >= self.n_sats
    }

    /// Dijkstra from `root`. Ground nodes other than the root are reached but
    /// not expanded. Among equal-delay predecessors the lowest index wins.
    fn shortest_tree(&self, root: usize) -> Tree {
        let n = self.nodes.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut parent = vec![NONE; n];
        let mut done = vec![false; n];
        let mut heap = BinaryHeap::new();
        dist[root] = 0.0;
        heap.push(HeapItem { dist: 0.0, node: root });
        while let Some(HeapItem { dist: d, node: u }) = heap.pop() {
            if done[u] {
                continue;
            }
            done[u] = true;
            if u != root && self.is_ground(u) {
                continue;
            }
            for e in &self.adj[u] {
                let nd = d + e.delay_s;
                let v = e.to;
                if nd < dist[v] || (nd == dist[v] && (u as u32) < parent[v]) {
                    if nd < dist[v] {
                        dist[v] = nd;
                        heap.push(HeapItem { dist: nd, node: v });
                    }
                    parent[v] = u as u32;
                }
            }
        }
        Tree { dist, parent }
    }
}

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Tree {
    dist: Vec<f64>,
    parent: Vec<u32>,
}

#[derive(PartialEq)]
struct HeapItem {
    dist: f64,
    node: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Snapshot of the ISL and feeder graph at one instant.
#[derive(Debug, Clone)]
pub struct IslTopology {
    pub time: f64,
    /// Earth-rotation reference for ground site positions.
    pub epoch_s: f64,
    pub edges: Vec<IslEdge>,
    pub feeder_edges: Vec<FeederEdge>,
    positions: BTreeMap<SatId, orbital::Position>,
    sites: Vec<GroundSite>,
    index: HashMap<NodeId, usize>,
    graph: Arc<Graph>,
}

impl IslTopology {
    /// Builds a topology from explicit parts. Edge delays are taken as given.
    pub fn from_parts(
        time: f64,
        states: &[SatelliteState],
        sites: &[GroundSite],
        edges: Vec<IslEdge>,
        feeder_edges: Vec<FeederEdge>,
    ) -> Self {
        let mut sat_ids: Vec<SatId> = states.iter().map(|s| s.sat_id).collect();
        sat_ids.sort();
        sat_ids.dedup();
        let positions = states.iter().map(|s| (s.sat_id, s.position)).collect();
        let mut nodes: Vec<NodeId> = sat_ids.into_iter().map(NodeId::Sat).collect();
        let n_sats = nodes.len();
        nodes.extend(sites.iter().map(|s| NodeId::Site(s.site_id.clone())));
        let index: HashMap<NodeId, usize> = nodes.iter().cloned().enumerate().map(|(i, n)| (n, i)).collect();
        let mut adj = vec![Vec::new(); nodes.len()];
        for e in &edges {
            let (a, b) = (index[&NodeId::Sat(e.a)], index[&NodeId::Sat(e.b)]);
            adj[a].push(Adj { to: b, delay_s: e.delay_s, isl: true });
            adj[b].push(Adj { to: a, delay_s: e.delay_s, isl: true });
        }
        for f in &feeder_edges {
            let (a, b) = (index[&NodeId::Sat(f.sat)], index[&NodeId::Site(f.site.clone())]);
            adj[a].push(Adj { to: b, delay_s: f.delay_s, isl: false });
            adj[b].push(Adj { to: a, delay_s: f.delay_s, isl: false });
        }
        for list in &mut adj {
            list.sort_by_key(|e| e.to);
        }
        Self {
            time,
            epoch_s: 0.0,
            edges,
            feeder_edges,
            positions,
            sites: sites.to_vec(),
            index,
            graph: Arc::new(Graph { nodes, n_sats, adj }),
        }
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.graph.nodes
    }

    pub fn sat_ids(&self) -> impl Iterator<Item = SatId> + '_ {
        self.graph.nodes[..self.graph.n_sats].iter().filter_map(NodeId::as_sat)
    }

    pub fn sites(&self) -> &[GroundSite] {
        &self.sites
    }

    pub fn site(&self, id: &str) -> Option<&GroundSite> {
        self.sites.iter().find(|s| s.site_id == id)
    }

    pub fn position(&self, sat: SatId) -> Option<&orbital::Position> {
        self.positions.get(&sat)
    }

    pub fn site_position(&self, site: &GroundSite) -> orbital::Position {
        site.eci(self.time, self.epoch_s)
    }

    pub fn contains(&self, node: &NodeId) -> bool {
        self.index.contains_key(node)
    }

    fn idx(&self, node: &NodeId) -> Result<usize, TopologyError> {
        self.index.get(node).copied().ok_or_else(|| TopologyError::UnknownNode(node.clone()))
    }

    /// Delay of the direct edge between two nodes, if one exists.
    pub fn edge_delay(&self, a: &NodeId, b: &NodeId) -> Option<f64> {
        let (ia, ib) = (*self.index.get(a)?, *self.index.get(b)?);
        self.graph.adj[ia].iter().find(|e| e.to == ib).map(|e| e.delay_s)
    }

    pub fn isl_neighbors(&self, sat: SatId) -> Vec<SatId> {
        let Some(&i) = self.index.get(&NodeId::Sat(sat)) else {
            return Vec::new();
        };
        self.graph.adj[i]
            .iter()
            .filter(|e| e.isl)
            .filter_map(|e| self.graph.nodes[e.to].as_sat())
            .collect()
    }

    pub fn isl_degree(&self, sat: SatId) -> usize {
        self.isl_neighbors(sat).len()
    }

    /// Feeder edges terminating on this satellite, highest elevation first.
    pub fn feeders_of(&self, sat: SatId) -> Vec<&FeederEdge> {
        let mut v: Vec<_> = self.feeder_edges.iter().filter(|f| f.sat == sat).collect();
        v.sort_by(|a, b| b.elevation_deg.total_cmp(&a.elevation_deg).then_with(|| a.site.cmp(&b.site)));
        v
    }

    pub fn feeder(&self, sat: SatId, site: &str) -> Option<&FeederEdge> {
        self.feeder_edges.iter().find(|f| f.sat == sat && f.site == site)
    }

    /// ISL hop distance from `sat` to every satellite (BFS over ISL edges only).
    pub fn hop_distances(&self, sat: SatId) -> BTreeMap<SatId, u32> {
        let mut out = BTreeMap::new();
        let Some(&start) = self.index.get(&NodeId::Sat(sat)) else {
            return out;
        };
        let mut seen = vec![false; self.graph.nodes.len()];
        let mut queue = VecDeque::from([(start, 0u32)]);
        seen[start] = true;
        while let Some((u, d)) = queue.pop_front() {
            if let Some(s) = self.graph.nodes[u].as_sat() {
                out.insert(s, d);
            }
            for e in self.graph.adj[u].iter().filter(|e| e.isl) {
                if !seen[e.to] {
                    seen[e.to] = true;
                    queue.push_back((e.to, d + 1));
                }
            }
        }
        out
    }

    /// Delay-optimal paths from one source to every node.
    pub fn shortest_paths_from(&self, src: &NodeId) -> Result<ShortestPaths, TopologyError> {
        let root = self.idx(src)?;
        Ok(ShortestPaths {
            root,
            tree: self.graph.shortest_tree(root),
            graph: Arc::clone(&self.graph),
            index: self.index.clone(),
        })
    }

    /// One edge per line: `a b kind delay_us`. Feeder edges use kind `feeder`.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> io::Result<()> {
        for e in &self.edges {
            let kind = match e.kind {
                IslKind::IntraPlane => "intra_plane",
                IslKind::InterPlane => "inter_plane",
            };
            writeln!(w, "{} {} {} {}", e.a, e.b, kind, e.delay_s * 1e6)?;
        }
        for f in &self.feeder_edges {
            writeln!(w, "{} site:{} feeder {}", f.sat, f.site, f.delay_s * 1e6)?;
        }
        Ok(())
    }
}

/// Result of a single-source shortest-path computation.
#[derive(Debug, Clone)]
pub struct ShortestPaths {
    root: usize,
    tree: Tree,
    graph: Arc<Graph>,
    index: HashMap<NodeId, usize>,
}

impl ShortestPaths {
    pub fn delay_to(&self, dst: &NodeId) -> Option<f64> {
        let i = *self.index.get(dst)?;
        let d = self.tree.dist[i];
        d.is_finite().then_some(d)
    }

    pub fn route_to(&self, dst: &NodeId) -> Result<Route, TopologyError> {
        let src = self.graph.nodes[self.root].clone();
        let i = *self.index.get(dst).ok_or_else(|| TopologyError::UnknownNode(dst.clone()))?;
        if !self.tree.dist[i].is_finite() {
            return Err(TopologyError::NoRoute { src, dst: dst.clone() });
        }
        let mut rev = vec![i];
        let mut cur = i;
        while cur != self.root {
            cur = self.tree.parent[cur] as usize;
            rev.push(cur);
        }
        rev.reverse();
        let hops: Vec<NodeId> = rev.iter().map(|&k| self.graph.nodes[k].clone()).collect();
        Ok(Route {
            hop_count: hops.len().saturating_sub(1),
            total_delay_s: self.tree.dist[i],
            hops,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub hops: Vec<NodeId>,
    pub total_delay_s: f64,
    pub hop_count: usize,
}

impl Route {
    pub fn empty(at: NodeId) -> Self {
        Route {
            hops: vec![at],
            total_delay_s: 0.0,
            hop_count: 0,
        }
    }

    /// Number of hops that touch a ground site.
    pub fn feeder_hops(&self) -> usize {
        self.hops
            .windows(2)
            .filter(|w| !w[0].is_sat() || !w[1].is_sat())
            .count()
    }

    pub fn isl_hops(&self) -> usize {
        self.hop_count - self.feeder_hops()
    }
}

/// Builds the +grid topology and feeder edges for one propagated snapshot.
pub fn build_topology(
    config: &ConstellationConfig,
    states: &[SatelliteState],
    sites: &[GroundSite],
    policy: &TopologyPolicy,
) -> IslTopology {
    let time = states.first().map_or(config.epoch_s, |s| s.time);
    let by_id: BTreeMap<SatId, &SatelliteState> = states.iter().map(|s| (s.sat_id, s)).collect();
    let planes = config.num_planes;
    let per_plane = config.sats_per_plane;
    let mut pairs: BTreeSet<(SatId, SatId, bool)> = BTreeSet::new();
    let mut add = |a: SatId, b: SatId, inter: bool| {
        if a != b {
            pairs.insert((a.min(b), a.max(b), inter));
        }
    };
    let wraps = (config.raan_spread_deg - 360.0).abs() < 1e-9;
    for s in by_id.keys() {
        if per_plane > 1 {
            add(*s, SatId::new(s.plane, (s.slot + 1) % per_plane), false);
        }
        if planes > 1 && (wraps || s.plane + 1 < planes) {
            add(*s, SatId::new((s.plane + 1) % planes, s.slot), true);
        }
    }
    let mut edges = Vec::with_capacity(pairs.len());
    for (a, b, inter) in pairs {
        let (Some(sa), Some(sb)) = (by_id.get(&a), by_id.get(&b)) else {
            continue;
        };
        let range = (sa.position - sb.position).norm();
        if inter {
            let limit = policy.inter_plane_max_latitude_deg;
            if sa.latitude_deg().abs() > limit || sb.latitude_deg().abs() > limit {
                continue;
            }
            if policy.max_isl_range_km.is_some_and(|max| range > max) {
                continue;
            }
        }
        edges.push(IslEdge {
            a,
            b,
            delay_s: orbital::propagation_delay(&sa.position, &sb.position),
            kind: if inter { IslKind::InterPlane } else { IslKind::IntraPlane },
        });
    }
    let mut feeder_edges = Vec::new();
    for s in states {
        if policy.feeder_capable.as_ref().is_some_and(|set| !set.contains(&s.sat_id)) {
            continue;
        }
        for site in sites.iter().filter(|g| g.role == SiteRole::Gateway) {
            let el = orbital::elevation_deg(&s.position, site, s.time, config.epoch_s);
            if el >= site.min_elevation_deg {
                feeder_edges.push(FeederEdge {
                    sat: s.sat_id,
                    site: site.site_id.clone(),
                    delay_s: orbital::propagation_delay(&s.position, &site.eci(s.time, config.epoch_s)),
                    elevation_deg: el,
                });
            }
        }
    }
    let mut topo = IslTopology::from_parts(time, states, sites, edges, feeder_edges);
    topo.epoch_s = config.epoch_s;
    topo
}

/// Next-hop tables computed against one topology snapshot and reused until
/// `valid_until`. Per-destination trees are materialised on first use.
#[derive(Debug)]
pub struct RoutingTable {
    pub valid_from: f64,
    pub valid_until: f64,
    graph: Arc<Graph>,
    index: HashMap<NodeId, usize>,
    trees: Vec<OnceLock<Tree>>,
}

impl RoutingTable {
    fn tree(&self, dst: usize) -> &Tree {
        self.trees[dst].get_or_init(|| self.graph.shortest_tree(dst))
    }

    /// Forces every destination tree to be computed.
    pub fn materialize(&self) {
        (0..self.trees.len()).into_par_iter().for_each(|d| {
            self.tree(d);
        });
    }

    pub fn next_hop(&self, node: &NodeId, dst: &NodeId) -> Result<Option<NodeId>, TopologyError> {
        let n = *self.index.get(node).ok_or_else(|| TopologyError::UnknownNode(node.clone()))?;
        let d = *self.index.get(dst).ok_or_else(|| TopologyError::UnknownNode(dst.clone()))?;
        if n == d {
            return Ok(None);
        }
        let p = self.tree(d).parent[n];
        if p == NONE {
            return Err(TopologyError::NoRoute { src: node.clone(), dst: dst.clone() });
        }
        Ok(Some(self.graph.nodes[p as usize].clone()))
    }

    /// Path delay recorded in the snapshot the table was computed on.
    pub fn snapshot_delay(&self, src: &NodeId, dst: &NodeId) -> Option<f64> {
        let s = *self.index.get(src)?;
        let d = *self.index.get(dst)?;
        let v = self.tree(d).dist[s];
        v.is_finite().then_some(v)
    }
}

pub fn build_routing_tables(topology: &IslTopology, valid_until: f64) -> RoutingTable {
    RoutingTable {
        valid_from: topology.time,
        valid_until,
        graph: Arc::clone(&topology.graph),
        index: topology.index.clone(),
        trees: (0..topology.graph.nodes.len()).map(|_| OnceLock::new()).collect(),
    }
}

/// Follows the table's next hops from `src` to `dst`, summing the delays of
/// the current `topology`.
pub fn route(table: &RoutingTable, topology: &IslTopology, src: &NodeId, dst: &NodeId) -> Result<Route, TopologyError> {
    if src == dst {
        return Ok(Route::empty(src.clone()));
    }
    let mut hops = vec![src.clone()];
    let mut total = 0.0;
    let mut cur = src.clone();
    let limit = table.trees.len();
    while &cur != dst {
        let next = table
            .next_hop(&cur, dst)?
            .ok_or_else(|| TopologyError::NoRoute { src: src.clone(), dst: dst.clone() })?;
        let delay = topology.edge_delay(&cur, &next).ok_or_else(|| TopologyError::StaleRoute {
            src: src.clone(),
            dst: dst.clone(),
            from: cur.clone(),
            to: next.clone(),
        })?;
        total += delay;
        hops.push(next.clone());
        cur = next;
        if hops.len() > limit + 1 {
            return Err(TopologyError::NoRoute { src: src.clone(), dst: dst.clone() });
        }
    }
    Ok(Route {
        hop_count: hops.len() - 1,
        total_delay_s: total,
        hops,
    })
}

/// Satellites reachable from `node` in at most `k` ISL hops, including `node`.
pub fn k_hop_neighborhood(topology: &IslTopology, node: SatId, k: u32) -> BTreeSet<SatId> {
    topology
        .hop_distances(node)
        .into_iter()
        .filter(|&(_, d)| d <= k)
        .map(|(s, _)| s)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbital::{propagate, Position};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn snapshot(cfg: &ConstellationConfig, t: f64, sites: &[GroundSite]) -> IslTopology {
        let states = propagate(cfg, t).unwrap();
        build_topology(cfg, &states, sites, &TopologyPolicy::default())
    }

    fn starlink() -> ConstellationConfig {
        ConstellationConfig::new(550.0, 53.0, 72, 22, 1)
    }

    #[test]
    fn single_plane_is_a_ring() {
        let cfg = ConstellationConfig::new(550.0, 53.0, 1, 4, 0);
        let topo = snapshot(&cfg, 0.0, &[]);
        assert_eq!(topo.edges.len(), 4);
        assert!(topo.edges.iter().all(|e| e.kind == IslKind::IntraPlane));
        for s in topo.sat_ids() {
            assert_eq!(topo.isl_degree(s), 2);
        }
    }

    #[test]
    fn starlink_shell_has_four_isls_everywhere() {
        let topo = snapshot(&starlink(), 0.0, &[]);
        for s in topo.sat_ids() {
            let n = topo.isl_neighbors(s);
            assert_eq!(n.len(), 4, "{s}");
        }
        for e in &topo.edges {
            let pa = topo.position(e.a).unwrap();
            let pb = topo.position(e.b).unwrap();
            assert_relative_eq!(e.delay_s, orbital::propagation_delay(pa, pb), max_relative = 1e-15);
        }
    }

    #[test]
    fn polar_links_are_cut_above_latitude_limit() {
        let cfg = ConstellationConfig::new(550.0, 87.0, 6, 10, 0);
        let topo = snapshot(&cfg, 0.0, &[]);
        let degrees: Vec<usize> = topo.sat_ids().map(|s| topo.isl_degree(s)).collect();
        assert!(degrees.iter().any(|&d| d < 4));
        assert!(degrees.iter().all(|d| (2..=4).contains(d)));
    }

    #[test]
    fn invisible_satellite_gets_no_feeder() {
        let cfg = ConstellationConfig::new(550.0, 0.0, 1, 2, 0);
        let gw = GroundSite::new("gw", 0.0, 0.0, SiteRole::Gateway);
        let topo = snapshot(&cfg, 0.0, &[gw]);
        // slot 0 is overhead, slot 1 on the far side
        assert_eq!(topo.feeder_edges.len(), 1);
        assert_eq!(topo.feeder_edges[0].sat, SatId::new(0, 0));
    }

    #[test]
    fn feeder_policy_restricts_capable_satellites() {
        let cfg = ConstellationConfig::new(550.0, 0.0, 1, 2, 0);
        let gw = GroundSite::new("gw", 0.0, 0.0, SiteRole::Gateway);
        let states = propagate(&cfg, 0.0).unwrap();
        let policy = TopologyPolicy {
            feeder_capable: Some(BTreeSet::from([SatId::new(0, 1)])),
            ..Default::default()
        };
        let topo = build_topology(&cfg, &states, &[gw], &policy);
        assert!(topo.feeder_edges.is_empty());
    }

    fn tiny_state(sat: SatId) -> SatelliteState {
        SatelliteState {
            sat_id: sat,
            position: Position::zeros(),
            time: 0.0,
        }
    }

    fn edge(a: SatId, b: SatId, d: f64) -> IslEdge {
        IslEdge { a: a.min(b), b: a.max(b), delay_s: d, kind: IslKind::IntraPlane }
    }

    #[test]
    fn two_node_table() {
        let (a, b) = (SatId::new(0, 0), SatId::new(0, 1));
        let topo = IslTopology::from_parts(0.0, &[tiny_state(a), tiny_state(b)], &[], vec![edge(a, b, 1e-3)], vec![]);
        let table = build_routing_tables(&topo, 15.0);
        assert_eq!(table.next_hop(&a.into(), &b.into()).unwrap(), Some(b.into()));
        let r = route(&table, &topo, &a.into(), &b.into()).unwrap();
        assert_eq!(r.hop_count, 1);
        assert_eq!(r.total_delay_s, 1e-3);
        let same = route(&table, &topo, &a.into(), &a.into()).unwrap();
        assert_eq!((same.hop_count, same.total_delay_s), (0, 0.0));
    }

    #[test]
    fn partitioned_graph_has_no_route() {
        let ids: Vec<SatId> = (0..4).map(|i| SatId::new(0, i)).collect();
        let states: Vec<_> = ids.iter().map(|&s| tiny_state(s)).collect();
        let topo = IslTopology::from_parts(0.0, &states, &[], vec![edge(ids[0], ids[1], 1.0), edge(ids[2], ids[3], 1.0)], vec![]);
        let table = build_routing_tables(&topo, 1.0);
        assert!(matches!(route(&table, &topo, &ids[0].into(), &ids[3].into()), Err(TopologyError::NoRoute { .. })));
        assert!(route(&table, &topo, &ids[2].into(), &ids[3].into()).is_ok());
    }

    #[test]
    fn ties_break_toward_lowest_id() {
        // diamond 0-1-3 and 0-2-3 with equal delays: path goes through 1
        let ids: Vec<SatId> = (0..4).map(|i| SatId::new(0, i)).collect();
        let states: Vec<_> = ids.iter().map(|&s| tiny_state(s)).collect();
        let topo = IslTopology::from_parts(
            0.0,
            &states,
            &[],
            vec![edge(ids[0], ids[1], 1.0), edge(ids[0], ids[2], 1.0), edge(ids[1], ids[3], 1.0), edge(ids[2], ids[3], 1.0)],
            vec![],
        );
        let table = build_routing_tables(&topo, 1.0);
        assert_eq!(table.next_hop(&ids[3].into(), &ids[0].into()).unwrap(), Some(ids[1].into()));
        assert_eq!(table.next_hop(&ids[0].into(), &ids[3].into()).unwrap(), Some(ids[1].into()));
    }

    #[test]
    fn ground_sites_do_not_carry_transit() {
        let (a, b) = (SatId::new(0, 0), SatId::new(1, 0));
        let gw = GroundSite::new("gw", 0.0, 0.0, SiteRole::Gateway);
        let feeders = vec![
            FeederEdge { sat: a, site: "gw".into(), delay_s: 1e-3, elevation_deg: 50.0 },
            FeederEdge { sat: b, site: "gw".into(), delay_s: 1e-3, elevation_deg: 50.0 },
        ];
        let topo = IslTopology::from_parts(0.0, &[tiny_state(a), tiny_state(b)], &[gw], vec![edge(a, b, 10e-3)], feeders);
        let table = build_routing_tables(&topo, 1.0);
        let r = route(&table, &topo, &a.into(), &b.into()).unwrap();
        assert_eq!(r.hop_count, 1);
        assert_eq!(r.total_delay_s, 10e-3);
        let g = route(&table, &topo, &NodeId::site("gw"), &b.into()).unwrap();
        assert_eq!(g.hop_count, 1);
        assert_eq!(g.feeder_hops(), 1);
    }

    #[test]
    fn adjacent_planes_near_equator_are_about_two_ms_apart() {
        let topo = snapshot(&starlink(), 0.0, &[]);
        // slot 0 of plane 0 starts on the ascending node
        let a = SatId::new(0, 0);
        let b = SatId::new(1, 0);
        let d = topo.edge_delay(&a.into(), &b.into()).unwrap();
        assert!(d > 1.8e-3 && d < 3.6e-3, "{d}");
        let table = build_routing_tables(&topo, 15.0);
        let r = route(&table, &topo, &a.into(), &b.into()).unwrap();
        assert_eq!(r.hop_count, 1);
    }

    #[test]
    fn k_hop_examples() {
        let topo = snapshot(&starlink(), 0.0, &[]);
        let s = SatId::new(10, 5);
        assert_eq!(k_hop_neighborhood(&topo, s, 0), BTreeSet::from([s]));
        let one = k_hop_neighborhood(&topo, s, 1);
        assert_eq!(one.len(), 5);
        let two = k_hop_neighborhood(&topo, s, 2);
        assert!(two.len() - 1 <= 12);
        // brute force: all nodes whose BFS-free manhattan distance on the torus is <= 2
        let torus = |a: u32, b: u32, m: u32| {
            let d = a.abs_diff(b);
            d.min(m - d)
        };
        let expected: BTreeSet<SatId> = topo
            .sat_ids()
            .filter(|t| torus(t.plane, s.plane, 72) + torus(t.slot, s.slot, 22) <= 2)
            .collect();
        assert_eq!(two, expected);
    }

    #[test]
    fn node_ids_round_trip_as_strings() {
        for n in [NodeId::Sat(SatId::new(3, 17)), NodeId::site("gw-madrid")] {
            let j = serde_json::to_string(&n).unwrap();
            assert_eq!(serde_json::from_str::<NodeId>(&j).unwrap(), n);
        }
        assert_eq!(serde_json::to_string(&NodeId::Sat(SatId::new(1, 2))).unwrap(), "\"sat-1-2\"");
        assert!("sat-1".parse::<NodeId>().is_err());
        assert!("site:".parse::<NodeId>().is_err());
    }

    #[test]
    fn edge_list_dump() {
        let cfg = ConstellationConfig::new(550.0, 53.0, 1, 3, 0);
        let topo = snapshot(&cfg, 0.0, &[]);
        let mut buf = Vec::new();
        topo.write_edge_list(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().all(|l| l.split(' ').count() == 4 && l.contains("intra_plane")));
    }

    /// Floyd-Warshall over satellites only.
    fn all_pairs_oracle(n: usize, edges: &[(usize, usize, f64)]) -> Vec<Vec<f64>> {
        let mut d = vec![vec![f64::INFINITY; n]; n];
        for (i, row) in d.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        for &(a, b, w) in edges {
            d[a][b] = d[a][b].min(w);
            d[b][a] = d[b][a].min(w);
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if d[i][k] + d[k][j] < d[i][j] {
                        d[i][j] = d[i][k] + d[k][j];
                    }
                }
            }
        }
        d
    }

    fn random_graph(seed: u64, n: usize, extra: usize, connected: bool) -> (IslTopology, Vec<(usize, usize, f64)>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ids: Vec<SatId> = (0..n as u32).map(|i| SatId::new(i / 5, i % 5)).collect();
        let mut es = Vec::new();
        if connected {
            for i in 1..n {
                es.push((rng.gen_range(0..i), i, rng.gen_range(1..100) as f64 * 1e-4));
            }
        }
        for _ in 0..extra {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            if a != b && !es.iter().any(|&(x, y, _)| (x, y) == (a, b) || (x, y) == (b, a)) {
                es.push((a, b, rng.gen_range(1..100) as f64 * 1e-4));
            }
        }
        let states: Vec<_> = ids.iter().map(|&s| tiny_state(s)).collect();
        let edges = es.iter().map(|&(a, b, w)| edge(ids[a], ids[b], w)).collect();
        (IslTopology::from_parts(0.0, &states, &[], edges, vec![]), es)
    }

    #[test]
    fn twenty_node_graph_matches_oracle() {
        let (topo, es) = random_graph(7, 20, 25, true);
        let oracle = all_pairs_oracle(20, &es);
        let table = build_routing_tables(&topo, 1.0);
        let ids: Vec<NodeId> = topo.nodes().to_vec();
        for i in 0..20 {
            for j in 0..20 {
                let r = route(&table, &topo, &ids[i], &ids[j]).unwrap();
                assert!((r.total_delay_s - oracle[i][j]).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn routes_are_optimal_and_loop_free(seed in any::<u64>(), n in 2usize..25, extra in 0usize..30, connected in any::<bool>()) {
            let (topo, es) = random_graph(seed, n, extra, connected);
            let oracle = all_pairs_oracle(n, &es);
            let table = build_routing_tables(&topo, 1.0);
            let ids: Vec<NodeId> = topo.nodes().to_vec();
            for i in 0..n {
                for j in 0..n {
                    match route(&table, &topo, &ids[i], &ids[j]) {
                        Ok(r) => {
                            prop_assert!((r.total_delay_s - oracle[i][j]).abs() < 1e-12);
                            let uniq: BTreeSet<_> = r.hops.iter().collect();
                            prop_assert_eq!(uniq.len(), r.hops.len());
                            prop_assert_eq!(r.hop_count, r.hops.len() - 1);
                        }
                        Err(_) => prop_assert!(oracle[i][j].is_infinite()),
                    }
                }
            }
        }

        #[test]
        fn built_topologies_respect_degree_bound(planes in 1u32..10, per in 1u32..10, inc in 0.0..100.0f64, t in 0.0..6000.0f64) {
            let cfg = ConstellationConfig::new(600.0, inc, planes, per, 0);
            let topo = snapshot(&cfg, t, &[]);
            for s in topo.sat_ids() {
                let n = topo.isl_neighbors(s);
                let intra = n.iter().filter(|x| x.plane == s.plane).count();
                prop_assert!(n.len() <= 4);
                prop_assert!(intra <= 2);
                prop_assert!(n.len() - intra <= 2);
            }
        }
    }
}
