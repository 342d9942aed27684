//! Static feasibility evaluation of a placement on a topology snapshot or a
//! time window: link rates and delays against budgets, node power and compute.

use std::cell::RefCell;
use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dimensioning::{
    fronthaul_bit_rate, midhaul_control_rate, midhaul_peak_rate, AirInterfaceConfig, BudgetOverrides, DataRate,
    DimensioningError, InterfaceClass, NEAR_RT_LOOP_WINDOW_S,
};
use crate::orbital::{self, ConstellationConfig, GroundSite, OrbitalError, SatId, SPEED_OF_LIGHT_KM_S};
use crate::placement::{derive_logical_links, FunctionKind, LogicalLink, LoopCheck, NetworkFunction, PlacementError, PlacementSpec, Segment};
use crate::topology::{build_topology, route, IslTopology, NodeId, Route, RoutingTable, ShortestPaths, TopologyError, TopologyPolicy};

/// Signal speed in terrestrial fibre, km/s.
pub const TERRESTRIAL_SPEED_KM_S: f64 = SPEED_OF_LIGHT_KM_S * 2.0 / 3.0;
/// Valid range of the full-gNB compute overhead factor.
pub const FULL_GNB_OVERHEAD_RANGE: (f64, f64) = (1.55, 1.70);
/// Loop bound for cluster followers.
pub const FOLLOWER_LOOP_S: f64 = 0.1;

#[derive(Debug, Error)]
pub enum FeasibilityError {
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error(transparent)]
    Dimensioning(#[from] DimensioningError),
    #[error(transparent)]
    Orbital(#[from] OrbitalError),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NearRtMode {
    /// Loop must close within the lower edge of the near-RT window.
    Strict,
    /// Loop must close within the upper edge.
    #[default]
    Relaxed,
}

impl NearRtMode {
    pub fn loop_bound_s(self) -> f64 {
        match self {
            NearRtMode::Strict => NEAR_RT_LOOP_WINDOW_S.0,
            NearRtMode::Relaxed => NEAR_RT_LOOP_WINDOW_S.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficConfig {
    #[serde(default)]
    pub air: AirInterfaceConfig,
    #[serde(default = "default_feeder_capacity")]
    pub feeder_capacity: DataRate,
    #[serde(default = "default_isl_capacity")]
    pub isl_capacity: DataRate,
    /// `None` leaves terrestrial links uncapped.
    #[serde(default)]
    pub terrestrial_capacity: Option<DataRate>,
    /// Required rate per class, replacing the derived or placeholder value.
    #[serde(default)]
    pub rate_overrides: BTreeMap<InterfaceClass, DataRate>,
    /// One-way budgets per class; for loop-checked links the loop bound.
    #[serde(default)]
    pub budget_overrides: BudgetOverrides,
    #[serde(default = "default_processing")]
    pub e2_processing_s: f64,
    #[serde(default)]
    pub near_rt_mode: NearRtMode,
    #[serde(default = "default_ground_loop")]
    pub ground_part_loop_s: f64,
    #[serde(default = "default_follower_loop")]
    pub follower_loop_s: f64,
    /// Let a satellite reach the ground through another satellite's feeder.
    #[serde(default = "default_true")]
    pub isl_relay_to_ground: bool,
}

fn default_feeder_capacity() -> DataRate {
    DataRate::gbps(10.0)
}

fn default_isl_capacity() -> DataRate {
    DataRate::gbps(20.0)
}

fn default_processing() -> f64 {
    1e-3
}

fn default_ground_loop() -> f64 {
    1.0
}

fn default_follower_loop() -> f64 {
    FOLLOWER_LOOP_S
}

fn default_true() -> bool {
    true
}

/// Placeholder rate for control and management interfaces.
pub const PLACEHOLDER_RATE_MBPS: f64 = 1.0;

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            air: AirInterfaceConfig::default(),
            feeder_capacity: default_feeder_capacity(),
            isl_capacity: default_isl_capacity(),
            terrestrial_capacity: None,
            rate_overrides: BTreeMap::new(),
            budget_overrides: BudgetOverrides::default(),
            e2_processing_s: default_processing(),
            near_rt_mode: NearRtMode::default(),
            ground_part_loop_s: default_ground_loop(),
            follower_loop_s: default_follower_loop(),
            isl_relay_to_ground: true,
        }
    }
}

impl TrafficConfig {
    pub fn validate(&self) -> Result<(), FeasibilityError> {
        self.air.validate()?;
        let caps = [self.feeder_capacity, self.isl_capacity].into_iter().chain(self.terrestrial_capacity);
        for c in caps {
            if !(c.as_bps() > 0.0) {
                return Err(FeasibilityError::InvalidConfig(format!("capacities must be positive, got {c}")));
            }
        }
        if !(self.e2_processing_s >= 0.0) {
            return Err(FeasibilityError::InvalidConfig("e2_processing_s must be non-negative".into()));
        }
        for (name, v) in [("ground_part_loop_s", self.ground_part_loop_s), ("follower_loop_s", self.follower_loop_s)] {
            if !(v > 0.0) {
                return Err(FeasibilityError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// Loop bound for near-RT links: an explicit E2 budget, else the mode edge.
    pub fn near_rt_loop_bound_s(&self) -> f64 {
        self.budget_overrides
            .0
            .get(&InterfaceClass::E2)
            .copied()
            .unwrap_or(self.near_rt_mode.loop_bound_s())
    }

    pub fn required_rate(&self, class: InterfaceClass) -> Result<DataRate, DimensioningError> {
        if let Some(r) = self.rate_overrides.get(&class) {
            return Ok(*r);
        }
        use InterfaceClass as C;
        Ok(match class {
            C::Ofh => fronthaul_bit_rate(&self.air)?,
            C::F1U | C::N3 | C::N6 | C::N9 => midhaul_peak_rate(&self.air),
            C::F1C => midhaul_control_rate(&self.air),
            _ => DataRate::mbps(PLACEHOLDER_RATE_MBPS),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceModel {
    #[serde(default = "default_power_budget")]
    pub power_budget_w: f64,
    #[serde(default = "default_compute_budget")]
    pub compute_budget: f64,
    /// Per-function power overrides, W. Unlisted kinds use the defaults.
    #[serde(default)]
    pub power_cost_w: BTreeMap<FunctionKind, f64>,
    /// Per-function compute overrides. Unlisted kinds use the defaults.
    #[serde(default)]
    pub compute_cost: BTreeMap<FunctionKind, f64>,
    /// Baseband power of a complete gNB on one satellite, W.
    #[serde(default = "default_full_gnb_power")]
    pub full_gnb_power_w: f64,
    #[serde(default = "default_feeder_modem_power")]
    pub feeder_modem_power_w: f64,
    /// Compute of the split 7.2x baseline that the overhead factor multiplies.
    #[serde(default = "default_baseline_compute")]
    pub full_gnb_baseline_compute: f64,
    #[serde(default = "default_overhead")]
    pub full_gnb_overhead_factor: f64,
}

fn default_power_budget() -> f64 {
    200.0
}

fn default_compute_budget() -> f64 {
    300.0
}

fn default_full_gnb_power() -> f64 {
    78.6
}

fn default_feeder_modem_power() -> f64 {
    55.9
}

fn default_baseline_compute() -> f64 {
    100.0
}

fn default_overhead() -> f64 {
    FULL_GNB_OVERHEAD_RANGE.0
}

pub fn default_power_cost(kind: FunctionKind) -> f64 {
    use FunctionKind as K;
    match kind {
        K::Ru => 20.0,
        K::Du => 30.0,
        K::CuCp => 10.0,
        K::CuUp => 5.0,
        K::Upf => 25.0,
        K::Sec => 10.0,
        K::NearRtRic | K::NonRtRicClusterLeader => 10.0,
        K::NearRtRicDuPart | K::NearRtRicCuPart => 5.0,
        K::NonRtRic | K::Smo | K::CoreCp | K::DataNetwork => 0.0,
    }
}

pub fn default_compute_cost(kind: FunctionKind) -> f64 {
    use FunctionKind as K;
    match kind {
        K::Ru => 25.0,
        K::Du => 50.0,
        K::CuCp => 15.0,
        K::CuUp => 10.0,
        K::Upf => 30.0,
        K::Sec => 20.0,
        K::NearRtRic => 20.0,
        K::NearRtRicDuPart | K::NearRtRicCuPart => 10.0,
        K::NonRtRicClusterLeader => 30.0,
        K::NonRtRic | K::Smo | K::CoreCp | K::DataNetwork => 0.0,
    }
}

impl Default for ResourceModel {
    fn default() -> Self {
        Self {
            power_budget_w: default_power_budget(),
            compute_budget: default_compute_budget(),
            power_cost_w: BTreeMap::new(),
            compute_cost: BTreeMap::new(),
            full_gnb_power_w: default_full_gnb_power(),
            feeder_modem_power_w: default_feeder_modem_power(),
            full_gnb_baseline_compute: default_baseline_compute(),
            full_gnb_overhead_factor: default_overhead(),
        }
    }
}

impl ResourceModel {
    pub fn validate(&self) -> Result<(), FeasibilityError> {
        let (lo, hi) = FULL_GNB_OVERHEAD_RANGE;
        if !(lo..=hi).contains(&self.full_gnb_overhead_factor) {
            return Err(FeasibilityError::InvalidConfig(format!(
                "full_gnb_overhead_factor {} outside [{lo}, {hi}]",
                self.full_gnb_overhead_factor
            )));
        }
        let scalars = [
            self.power_budget_w,
            self.compute_budget,
            self.full_gnb_power_w,
            self.feeder_modem_power_w,
            self.full_gnb_baseline_compute,
        ];
        if scalars.iter().chain(self.power_cost_w.values()).chain(self.compute_cost.values()).any(|v| !(*v >= 0.0)) {
            return Err(FeasibilityError::InvalidConfig("costs and budgets must be non-negative".into()));
        }
        Ok(())
    }

    pub fn power_of(&self, kind: FunctionKind) -> f64 {
        self.power_cost_w.get(&kind).copied().unwrap_or_else(|| default_power_cost(kind))
    }

    pub fn compute_of(&self, kind: FunctionKind) -> f64 {
        self.compute_cost.get(&kind).copied().unwrap_or_else(|| default_compute_cost(kind))
    }
}

const GNB_KINDS: [FunctionKind; 4] = [FunctionKind::Ru, FunctionKind::Du, FunctionKind::CuCp, FunctionKind::CuUp];

/// Power (W) and compute used by a node hosting `functions`. One complete
/// RU+DU+CU set is charged at the full-gNB composite instead of per function.
pub fn node_usage(functions: &[NetworkFunction], feeder_modem: bool, resources: &ResourceModel) -> (f64, f64) {
    let mut kinds: Vec<FunctionKind> = functions.iter().map(|f| f.kind).collect();
    let full = GNB_KINDS.iter().all(|k| kinds.contains(k));
    let (mut power, mut compute) = (0.0, 0.0);
    if full {
        for k in GNB_KINDS {
            let pos = kinds.iter().position(|x| *x == k).expect("present");
            kinds.swap_remove(pos);
        }
        power += resources.full_gnb_power_w;
        compute += resources.full_gnb_baseline_compute * resources.full_gnb_overhead_factor;
    }
    for k in kinds {
        power += resources.power_of(k);
        compute += resources.compute_of(k);
    }
    if feeder_modem {
        power += resources.feeder_modem_power_w;
    }
    (power, compute)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Ok,
    Violation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Overall {
    Feasible,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub time_s: f64,
    pub rule: String,
    pub subject: String,
    pub detail: String,
}

/// Physical path of a logical link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathInfo {
    pub hops: Vec<NodeId>,
    pub one_way_s: f64,
    pub isl_hops: u32,
    pub feeder_hops: u32,
    pub terrestrial_km: f64,
}

impl PathInfo {
    fn local(at: &NodeId) -> Self {
        PathInfo {
            hops: vec![at.clone()],
            one_way_s: 0.0,
            isl_hops: 0,
            feeder_hops: 0,
            terrestrial_km: 0.0,
        }
    }

    fn from_route(r: &Route) -> Self {
        PathInfo {
            hops: r.hops.clone(),
            one_way_s: r.total_delay_s,
            isl_hops: r.hop_count as u32,
            feeder_hops: 0,
            terrestrial_km: 0.0,
        }
    }

    fn reversed(mut self) -> Self {
        self.hops.reverse();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopLatency {
    pub loop_s: f64,
    pub strict_capable: bool,
    pub relaxed_capable: bool,
}

/// Control-loop latency of an E2 (or RIC-to-RIC) link: two traversals plus processing.
pub fn e2_loop_latency(one_way_s: f64, processing_s: f64) -> LoopLatency {
    let loop_s = 2.0 * one_way_s + processing_s;
    LoopLatency {
        loop_s,
        strict_capable: loop_s <= NEAR_RT_LOOP_WINDOW_S.0,
        relaxed_capable: loop_s <= NEAR_RT_LOOP_WINDOW_S.1,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkEvaluation {
    pub link: LogicalLink,
    pub path: Option<PathInfo>,
    pub required_bps: f64,
    /// Bottleneck capacity along the path; `None` when uncapped.
    pub capacity_bps: Option<f64>,
    pub one_way_s: Option<f64>,
    /// Quantity compared with the budget: loop latency for loop-checked links,
    /// otherwise the one-way delay.
    pub checked_delay_s: Option<f64>,
    pub budget_s: Option<f64>,
    pub loop_checked: bool,
    pub strict_capable: Option<bool>,
    pub latency_margin_s: Option<f64>,
    pub rate_margin_bps: Option<f64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeEvaluation {
    pub node: NodeId,
    pub functions: Vec<NetworkFunction>,
    pub feeder_modem: bool,
    pub power_w: f64,
    pub power_budget_w: f64,
    pub compute_used: f64,
    pub compute_budget: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub time_s: f64,
    pub overall: Overall,
    pub links: Vec<LinkEvaluation>,
    pub nodes: Vec<NodeEvaluation>,
    /// Largest aggregate load on any single feeder link, bps.
    pub peak_feeder_bps: f64,
    pub violations: Vec<Violation>,
}

impl FeasibilityReport {
    pub fn is_feasible(&self) -> bool {
        self.overall == Overall::Feasible
    }
}

/// Satellite-to-satellite path source: either fresh shortest paths on the
/// snapshot or a precomputed routing table.
pub trait SatRouter {
    fn sat_route(&self, topology: &IslTopology, a: SatId, b: SatId) -> Result<Route, TopologyError>;
}

/// Shortest paths on the snapshot itself, cached per source.
#[derive(Default)]
pub struct SnapshotRouter {
    cache: RefCell<HashMap<SatId, ShortestPaths>>,
}

impl SatRouter for SnapshotRouter {
    fn sat_route(&self, topology: &IslTopology, a: SatId, b: SatId) -> Result<Route, TopologyError> {
        let mut cache = self.cache.borrow_mut();
        let paths = match cache.entry(a) {
            Entry::Occupied(e) => e.into_mut(),
            Entry::Vacant(e) => e.insert(topology.shortest_paths_from(&NodeId::Sat(a))?),
        };
        paths.route_to(&NodeId::Sat(b))
    }
}

impl SatRouter for RoutingTable {
    fn sat_route(&self, topology: &IslTopology, a: SatId, b: SatId) -> Result<Route, TopologyError> {
        route(self, topology, &NodeId::Sat(a), &NodeId::Sat(b))
    }
}

fn terrestrial_delay_s(km: f64) -> f64 {
    km / TERRESTRIAL_SPEED_KM_S
}

/// Why a path could not be found.
#[derive(Debug, Clone, PartialEq)]
pub enum PathFailure {
    NoRoute(String),
    /// A routing-table path uses an ISL that no longer exists.
    Stale(String),
    UnknownNode(NodeId),
}

/// Path between two nodes. Satellite-to-ground paths end in a feeder hop to
/// some gateway, optionally preceded by ISL hops (when relaying is allowed)
/// and followed by a terrestrial hop to a non-gateway site.
pub fn node_path(
    topology: &IslTopology,
    router: &dyn SatRouter,
    a: &NodeId,
    b: &NodeId,
    relay: bool,
) -> Result<PathInfo, PathFailure> {
    for n in [a, b] {
        if !topology.contains(n) {
            return Err(PathFailure::UnknownNode(n.clone()));
        }
    }
    if a == b {
        return Ok(PathInfo::local(a));
    }
    match (a, b) {
        (NodeId::Sat(x), NodeId::Sat(y)) => router
            .sat_route(topology, *x, *y)
            .map(|r| PathInfo::from_route(&r))
            .map_err(|e| match e {
                TopologyError::StaleRoute { .. } => PathFailure::Stale(e.to_string()),
                _ => PathFailure::NoRoute(e.to_string()),
            }),
        (NodeId::Site(x), NodeId::Site(y)) => {
            let (sx, sy) = (topology.site(x).expect("known"), topology.site(y).expect("known"));
            let km = orbital::ground_distance_km(sx, sy);
            Ok(PathInfo {
                hops: vec![a.clone(), b.clone()],
                one_way_s: terrestrial_delay_s(km),
                isl_hops: 0,
                feeder_hops: 0,
                terrestrial_km: km,
            })
        }
        (NodeId::Sat(s), NodeId::Site(g)) => sat_to_ground(topology, router, *s, g, relay),
        (NodeId::Site(g), NodeId::Sat(s)) => sat_to_ground(topology, router, *s, g, relay).map(PathInfo::reversed),
    }
}

fn sat_to_ground(topology: &IslTopology, router: &dyn SatRouter, sat: SatId, site_id: &str, relay: bool) -> Result<PathInfo, PathFailure> {
    let target = topology.site(site_id).expect("known");
    let mut best: Option<(f64, &str, SatId, PathInfo)> = None;
    for f in &topology.feeder_edges {
        if !relay && f.sat != sat {
            continue;
        }
        let gw = topology.site(&f.site).expect("feeder to known site");
        let mut path = if f.sat == sat {
            PathInfo::local(&NodeId::Sat(sat))
        } else {
            match router.sat_route(topology, sat, f.sat) {
                Ok(r) => PathInfo::from_route(&r),
                Err(_) => continue,
            }
        };
        path.hops.push(NodeId::Site(f.site.clone()));
        path.one_way_s += f.delay_s;
        path.feeder_hops = 1;
        if f.site != site_id {
            let km = orbital::ground_distance_km(gw, target);
            path.hops.push(NodeId::Site(site_id.to_string()));
            path.one_way_s += terrestrial_delay_s(km);
            path.terrestrial_km = km;
        }
        let better = match &best {
            None => true,
            Some((d, s, x, _)) => (path.one_way_s, f.site.as_str(), f.sat) < (*d, *s, *x),
        };
        if better {
            best = Some((path.one_way_s, f.site.as_str(), f.sat, path));
        }
    }
    best.map(|b| b.3)
        .ok_or_else(|| PathFailure::NoRoute(format!("{} has no feeder path to site {site_id}", sat)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum HopKind {
    Isl,
    Feeder,
    Terrestrial,
}

fn hop_kind(a: &NodeId, b: &NodeId) -> HopKind {
    match (a, b) {
        (NodeId::Sat(_), NodeId::Sat(_)) => HopKind::Isl,
        (NodeId::Site(_), NodeId::Site(_)) => HopKind::Terrestrial,
        _ => HopKind::Feeder,
    }
}

fn edge_key(a: &NodeId, b: &NodeId) -> (NodeId, NodeId) {
    if a <= b {
        (a.clone(), b.clone())
    } else {
        (b.clone(), a.clone())
    }
}

/// Inputs that do not change across the snapshots of a window.
pub struct Evaluator<'a> {
    spec: PlacementSpec,
    links: Vec<LogicalLink>,
    pub traffic: &'a TrafficConfig,
    pub resources: &'a ResourceModel,
    rates: BTreeMap<InterfaceClass, f64>,
}

impl<'a> Evaluator<'a> {
    pub fn new(spec: &PlacementSpec, traffic: &'a TrafficConfig, resources: &'a ResourceModel) -> Result<Self, FeasibilityError> {
        traffic.validate()?;
        resources.validate()?;
        let links = derive_logical_links(spec)?;
        let mut rates = BTreeMap::new();
        for c in InterfaceClass::ALL {
            rates.insert(c, traffic.required_rate(c)?.as_bps());
        }
        Ok(Self {
            spec: spec.clone(),
            links,
            traffic,
            resources,
            rates,
        })
    }

    pub fn spec(&self) -> &PlacementSpec {
        &self.spec
    }

    pub fn links(&self) -> &[LogicalLink] {
        &self.links
    }

    /// Replaces the placement (after a rebinding or leader change).
    pub fn set_spec(&mut self, spec: PlacementSpec) -> Result<(), FeasibilityError> {
        self.links = derive_logical_links(&spec)?;
        self.spec = spec;
        Ok(())
    }

    fn bound(&self, link: &LogicalLink) -> (bool, Option<f64>) {
        let t = self.traffic;
        match link.loop_check {
            LoopCheck::NearRt => (true, Some(t.near_rt_loop_bound_s())),
            LoopCheck::GroundPart => (true, Some(t.ground_part_loop_s)),
            LoopCheck::Follower => (true, Some(t.follower_loop_s)),
            LoopCheck::None => (false, t.budget_overrides.budget(link.interface_class).max_one_way_s),
        }
    }

    fn capacity(&self, kind: HopKind) -> Option<f64> {
        match kind {
            HopKind::Isl => Some(self.traffic.isl_capacity.as_bps()),
            HopKind::Feeder => Some(self.traffic.feeder_capacity.as_bps()),
            HopKind::Terrestrial => self.traffic.terrestrial_capacity.map(DataRate::as_bps),
        }
    }

    /// Evaluates every link and node on one snapshot. `feeder_demand` adds
    /// extra load (bps) on specific feeder hops, keyed by (satellite, gateway).
    pub fn evaluate(
        &self,
        topology: &IslTopology,
        router: &dyn SatRouter,
        feeder_demand: &BTreeMap<(SatId, String), f64>,
    ) -> FeasibilityReport {
        let t = topology.time;
        let mut violations = Vec::new();
        let mut links = Vec::with_capacity(self.links.len());
        let mut load: BTreeMap<(NodeId, NodeId), (HopKind, f64)> = BTreeMap::new();
        let mut modem_sats: BTreeSet<SatId> = BTreeSet::new();
        for ((sat, gw), bps) in feeder_demand {
            let k = edge_key(&NodeId::Sat(*sat), &NodeId::site(gw.clone()));
            load.entry(k).or_insert((HopKind::Feeder, 0.0)).1 += bps;
        }
        for link in &self.links {
            let required = self.rates[&link.interface_class];
            let (loop_checked, budget) = self.bound(link);
            let path = node_path(topology, router, &link.from_node, &link.to_node, self.traffic.isl_relay_to_ground);
            let mut eval = LinkEvaluation {
                link: link.clone(),
                path: None,
                required_bps: required,
                capacity_bps: None,
                one_way_s: None,
                checked_delay_s: None,
                budget_s: budget,
                loop_checked,
                strict_capable: None,
                latency_margin_s: None,
                rate_margin_bps: None,
                verdict: Verdict::Ok,
            };
            match path {
                Err(e) => {
                    let (rule, detail) = match e {
                        PathFailure::NoRoute(m) => ("unreachable", m),
                        PathFailure::Stale(m) => ("stale-route", m),
                        PathFailure::UnknownNode(n) => ("unreachable", format!("node {n} is not in the topology")),
                    };
                    violations.push(Violation {
                        time_s: t,
                        rule: rule.into(),
                        subject: link.id.clone(),
                        detail,
                    });
                    eval.verdict = Verdict::Violation;
                }
                Ok(p) => {
                    let mut cap: Option<f64> = None;
                    for w in p.hops.windows(2) {
                        let kind = hop_kind(&w[0], &w[1]);
                        if kind == HopKind::Feeder {
                            modem_sats.extend(w[0].as_sat().or(w[1].as_sat()));
                        }
                        if let Some(c) = self.capacity(kind) {
                            cap = Some(cap.map_or(c, |x: f64| x.min(c)));
                        }
                        load.entry(edge_key(&w[0], &w[1])).or_insert((kind, 0.0)).1 += required;
                    }
                    let ow = p.one_way_s;
                    let checked = if loop_checked { e2_loop_latency(ow, self.traffic.e2_processing_s).loop_s } else { ow };
                    if link.interface_class == InterfaceClass::E2 {
                        eval.strict_capable = Some(e2_loop_latency(ow, self.traffic.e2_processing_s).strict_capable);
                    }
                    eval.one_way_s = Some(ow);
                    eval.checked_delay_s = Some(checked);
                    eval.capacity_bps = cap;
                    eval.latency_margin_s = budget.map(|b| b - checked);
                    eval.rate_margin_bps = cap.map(|c| c - required);
                    if budget.is_some_and(|b| checked > b) {
                        violations.push(Violation {
                            time_s: t,
                            rule: "latency".into(),
                            subject: link.id.clone(),
                            detail: format!(
                                "{} {:.1} us exceeds budget {:.1} us",
                                if loop_checked { "loop" } else { "one-way delay" },
                                checked * 1e6,
                                budget.unwrap_or(f64::INFINITY) * 1e6
                            ),
                        });
                        eval.verdict = Verdict::Violation;
                    }
                    if cap.is_some_and(|c| required > c) {
                        violations.push(Violation {
                            time_s: t,
                            rule: "rate".into(),
                            subject: link.id.clone(),
                            detail: format!("needs {} over a {} path", DataRate::bps(required), DataRate::bps(cap.unwrap_or(0.0))),
                        });
                        eval.verdict = Verdict::Violation;
                    }
                    eval.path = Some(p);
                }
            }
            links.push(eval);
        }

        let peak_feeder_bps = load.values().filter(|(k, _)| *k == HopKind::Feeder).map(|(_, b)| *b).fold(0.0, f64::max);
        for ((a, b), (kind, bps)) in &load {
            let (rule, cap) = match kind {
                HopKind::Feeder => ("feeder-overload", self.traffic.feeder_capacity.as_bps()),
                HopKind::Isl => ("isl-overload", self.traffic.isl_capacity.as_bps()),
                HopKind::Terrestrial => continue,
            };
            if *bps > cap {
                violations.push(Violation {
                    time_s: t,
                    rule: rule.into(),
                    subject: format!("{a}|{b}"),
                    detail: format!("aggregate {} exceeds capacity {}", DataRate::bps(*bps), DataRate::bps(cap)),
                });
            }
        }

        let mut hosted: BTreeMap<SatId, Vec<NetworkFunction>> = BTreeMap::new();
        for (f, n) in &self.spec.assignments {
            if let NodeId::Sat(s) = n {
                hosted.entry(*s).or_default().push(*f);
            }
        }
        for s in &modem_sats {
            hosted.entry(*s).or_default();
        }
        let mut nodes = Vec::with_capacity(hosted.len());
        for (s, functions) in hosted {
            let modem = modem_sats.contains(&s);
            let (power, compute) = node_usage(&functions, modem, self.resources);
            let mut verdict = Verdict::Ok;
            let subject = NodeId::Sat(s).to_string();
            if power > self.resources.power_budget_w {
                verdict = Verdict::Violation;
                violations.push(Violation {
                    time_s: t,
                    rule: "power".into(),
                    subject: subject.clone(),
                    detail: format!("{power:.1} W exceeds {:.1} W", self.resources.power_budget_w),
                });
            }
            if compute > self.resources.compute_budget {
                verdict = Verdict::Violation;
                violations.push(Violation {
                    time_s: t,
                    rule: "compute".into(),
                    subject,
                    detail: format!("{compute:.1} units exceeds {:.1}", self.resources.compute_budget),
                });
            }
            nodes.push(NodeEvaluation {
                node: NodeId::Sat(s),
                functions,
                feeder_modem: modem,
                power_w: power,
                power_budget_w: self.resources.power_budget_w,
                compute_used: compute,
                compute_budget: self.resources.compute_budget,
                verdict,
            });
        }
        FeasibilityReport {
            time_s: t,
            overall: if violations.is_empty() { Overall::Feasible } else { Overall::Infeasible },
            links,
            nodes,
            peak_feeder_bps,
            violations,
        }
    }
}

/// Evaluates a placement on one snapshot using shortest paths on that snapshot.
pub fn evaluate_snapshot(
    spec: &PlacementSpec,
    topology: &IslTopology,
    traffic: &TrafficConfig,
    resources: &ResourceModel,
) -> Result<FeasibilityReport, FeasibilityError> {
    let ev = Evaluator::new(spec, traffic, resources)?;
    Ok(ev.evaluate(topology, &SnapshotRouter::default(), &BTreeMap::new()))
}

/// Per-node verdict for a standalone set of functions.
pub fn node_resource_check(node: NodeId, functions: &[NetworkFunction], feeder_modem: bool, resources: &ResourceModel) -> NodeEvaluation {
    let (power, compute) = node_usage(functions, feeder_modem, resources);
    let ok = power <= resources.power_budget_w && compute <= resources.compute_budget;
    NodeEvaluation {
        node,
        functions: functions.to_vec(),
        feeder_modem,
        power_w: power,
        power_budget_w: resources.power_budget_w,
        compute_used: compute,
        compute_budget: resources.compute_budget,
        verdict: if ok { Verdict::Ok } else { Verdict::Violation },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    pub reports: Vec<FeasibilityReport>,
    /// Fraction of steps whose report is feasible.
    pub availability: f64,
    /// Smallest latency margin seen per class over the window, s.
    pub worst_latency_margin_s: BTreeMap<InterfaceClass, f64>,
    /// Smallest rate margin seen per class over the window, bps.
    pub worst_rate_margin_bps: BTreeMap<InterfaceClass, f64>,
}

impl WindowReport {
    pub fn from_reports(reports: Vec<FeasibilityReport>) -> Self {
        let ok = reports.iter().filter(|r| r.is_feasible()).count();
        let availability = if reports.is_empty() { 1.0 } else { ok as f64 / reports.len() as f64 };
        let mut lat: BTreeMap<InterfaceClass, f64> = BTreeMap::new();
        let mut rate: BTreeMap<InterfaceClass, f64> = BTreeMap::new();
        for l in reports.iter().flat_map(|r| &r.links) {
            let c = l.link.interface_class;
            if let Some(m) = l.latency_margin_s {
                let e = lat.entry(c).or_insert(f64::INFINITY);
                *e = e.min(m);
            }
            if let Some(m) = l.rate_margin_bps {
                let e = rate.entry(c).or_insert(f64::INFINITY);
                *e = e.min(m);
            }
        }
        Self {
            reports,
            availability,
            worst_latency_margin_s: lat,
            worst_rate_margin_bps: rate,
        }
    }
}

/// Evaluates the placement at `t0, t0 + step, ..` up to `t1`. Steps run in
/// parallel; reports come back in time order.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_window(
    spec: &PlacementSpec,
    config: &ConstellationConfig,
    sites: &[GroundSite],
    policy: &TopologyPolicy,
    traffic: &TrafficConfig,
    resources: &ResourceModel,
    t0: f64,
    t1: f64,
    step: f64,
) -> Result<WindowReport, FeasibilityError> {
    if !(t1 > t0) {
        return Err(FeasibilityError::InvalidConfig(format!("window end {t1} must follow start {t0}")));
    }
    let times = orbital::sample_grid(t0, t1 - t0, step)?;
    let ev = Evaluator::new(spec, traffic, resources)?;
    let reports = times
        .par_iter()
        .map(|&t| {
            let states = orbital::propagate(config, t)?;
            let topo = build_topology(config, &states, sites, policy);
            Ok(ev.evaluate(&topo, &SnapshotRouter::default(), &BTreeMap::new()))
        })
        .collect::<Result<Vec<_>, OrbitalError>>()?;
    Ok(WindowReport::from_reports(reports))
}

/// One CSV row per link per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkRecord {
    pub time_s: f64,
    pub link_id: String,
    pub class: InterfaceClass,
    pub segment: Segment,
    pub delay_us: Option<f64>,
    pub budget_us: Option<f64>,
    pub req_bps: f64,
    pub cap_bps: Option<f64>,
    pub verdict: Verdict,
}

pub const LINK_CSV_HEADER: [&str; 9] = [
    "time_s", "link_id", "class", "segment", "delay_us", "budget_us", "req_bps", "cap_bps", "verdict",
];

impl LinkRecord {
    pub fn from_evaluation(time_s: f64, e: &LinkEvaluation) -> Self {
        Self {
            time_s,
            link_id: e.link.id.clone(),
            class: e.link.interface_class,
            segment: e.link.segment,
            delay_us: e.checked_delay_s.map(|d| d * 1e6),
            budget_us: e.budget_s.map(|b| b * 1e6),
            req_bps: e.required_bps,
            cap_bps: e.capacity_bps,
            verdict: e.verdict,
        }
    }
}

pub fn link_records(reports: &[FeasibilityReport]) -> Vec<LinkRecord> {
    reports
        .iter()
        .flat_map(|r| r.links.iter().map(move |l| LinkRecord::from_evaluation(r.time_s, l)))
        .collect()
}

pub fn write_link_csv<W: io::Write>(records: &[LinkRecord], w: W) -> Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    if records.is_empty() {
        wr.write_record(LINK_CSV_HEADER)?;
    }
    for r in records {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_link_csv<R: io::Read>(r: R) -> Result<Vec<LinkRecord>, csv::Error> {
    csv::Reader::from_reader(r).deserialize().collect()
}

pub const VIOLATION_CSV_HEADER: [&str; 4] = ["time_s", "rule", "subject", "detail"];

/// Writes the header even when there are no rows.
pub fn write_violation_csv<W: io::Write>(violations: &[Violation], w: W) -> Result<(), csv::Error> {
    let mut wr = csv::Writer::from_writer(w);
    if violations.is_empty() {
        wr.write_record(VIOLATION_CSV_HEADER)?;
    }
    for v in violations {
        wr.serialize(v)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_violation_csv<R: io::Read>(r: R) -> Result<Vec<Violation>, csv::Error> {
    csv::Reader::from_reader(r).deserialize().collect()
}
