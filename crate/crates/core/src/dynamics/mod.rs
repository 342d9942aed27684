//! Time-stepped behaviour: feeder handover, E2 reassignment and cluster upkeep.
//!
//! [`run`] walks the scenario grid. Each step rebuilds the topology, refreshes
//! routing tables at epoch boundaries, advances the feeder, RIC and cluster
//! state machines, and evaluates feasibility with any extra feeder demand.

pub mod cluster;
pub mod events;
pub mod feeder;
pub mod ric;

use std::collections::{BTreeMap, BTreeSet};

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::dimensioning::InterfaceClass;
use crate::feasibility::{node_path, Evaluator, FeasibilityError, FeasibilityReport, Overall, SnapshotRouter, Violation};
use crate::orbital::{self, sample_grid, OrbitalError, SatId};
use crate::placement::{option_profile, residual_compute, FunctionKind, NetworkFunction, PlacementError, PlacementSpec, RicExtension, Segment, SplitOption};
use crate::scenario::{Scenario, ScenarioError};
use crate::topology::{build_routing_tables, build_topology, IslTopology, NodeId, RoutingTable};

use cluster::{evaluate_hierarchy, form_clusters, hierarchy_links, select_leader, ClusterDynamicsConfig, ClusterPlan};
use events::{EventKind, EventLog, SimEvent};
use feeder::{burst_fits, burst_rate_bps, feeder_assignment, group_ue_handover_cost, FeederConfig, FeederState, FeederTransition, GroupUeConfig};
use ric::{E2Timeline, LinkQualityModel, RicAction, RicAssignmentState, RicConfig};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Feasibility(#[from] FeasibilityError),
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error(transparent)]
    Orbital(#[from] OrbitalError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    #[serde(default)]
    pub feeder: FeederConfig,
    #[serde(default)]
    pub group_ue: GroupUeConfig,
    #[serde(default)]
    pub ric: RicConfig,
    #[serde(default)]
    pub link_quality: LinkQualityModel,
    /// Routing tables are rebuilt this often, s.
    #[serde(default = "default_epoch")]
    pub routing_epoch_s: f64,
    #[serde(default)]
    pub cluster: ClusterDynamicsConfig,
}

fn default_epoch() -> f64 {
    15.0
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            feeder: FeederConfig::default(),
            group_ue: GroupUeConfig::default(),
            ric: RicConfig::default(),
            link_quality: LinkQualityModel::default(),
            routing_epoch_s: default_epoch(),
            cluster: ClusterDynamicsConfig::default(),
        }
    }
}

impl DynamicsConfig {
    pub fn validate(&self) -> Result<(), String> {
        let f = &self.feeder;
        if !(f.dual_interval_s >= 0.0 && f.hysteresis_deg >= 0.0) {
            return Err("feeder dual interval and hysteresis must be non-negative".into());
        }
        self.ric.validate()?;
        if !(self.routing_epoch_s > 0.0) {
            return Err("routing_epoch_s must be positive".into());
        }
        let c = &self.cluster;
        if !(c.reform_interval_s > 0.0) {
            return Err("reform_interval_s must be positive".into());
        }
        if !(0.0..=1.0).contains(&c.failure_probability) {
            return Err("failure_probability must lie in [0, 1]".into());
        }
        let q = &self.link_quality;
        if !(q.reference_range_km > 0.0 && q.seam_latitude_deg > 0.0) {
            return Err("link quality reference range and seam latitude must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub seed: u64,
    pub split: SplitOption,
    pub extension: RicExtension,
    pub steps: usize,
    pub feasible: bool,
    /// Fraction of steps without any violation.
    pub availability: f64,
    pub event_counts: BTreeMap<EventKind, u64>,
    /// Switches between two gateways.
    pub feeder_handovers: u64,
    /// Attachments after an outage.
    pub feeder_acquisitions: u64,
    pub e2_reassignments: u64,
    pub reassignments_by_reason: BTreeMap<String, u64>,
    /// Summed over E2 nodes, s.
    pub e2_unassigned_time_s: f64,
    /// Per rule, fraction of steps with at least one violation.
    pub violation_time_fraction: BTreeMap<String, f64>,
    pub e2_loop_mean_s: Option<f64>,
    pub e2_loop_p95_s: Option<f64>,
    pub peak_feeder_bps: f64,
    pub max_sat_power_w: f64,
    pub max_sat_compute: f64,
    pub group_ue_signalling_bytes: u64,
    pub ric_context_transfer_bytes: f64,
    pub link_classes: BTreeSet<InterfaceClass>,
    /// Classes of links with at least one satellite endpoint.
    pub space_link_classes: BTreeSet<InterfaceClass>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Placement at the start of the window.
    pub spec: PlacementSpec,
    pub reports: Vec<FeasibilityReport>,
    pub events: EventLog,
    pub summary: RunSummary,
}

impl RunOutput {
    /// Every violation of the run, in time order.
    pub fn violations(&self) -> Vec<Violation> {
        self.reports.iter().flat_map(|r| r.violations.iter().cloned()).collect()
    }
}

/// Nearest-rank percentile of an ascending slice.
pub fn percentile(sorted: &[f64], p: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    Some(sorted[rank.min(sorted.len()) - 1])
}

fn opt_str(s: Option<&String>) -> Value {
    s.map_or(Value::Null, |x| Value::from(x.as_str()))
}

fn violation(t: f64, rule: &str, subject: impl Into<String>, detail: impl Into<String>) -> Violation {
    Violation {
        time_s: t,
        rule: rule.into(),
        subject: subject.into(),
        detail: detail.into(),
    }
}

const CHUNK: usize = 32;

struct FeederTracker {
    state: BTreeMap<SatId, FeederState>,
    group_ue: bool,
    burst_bytes: u64,
    requires_dual: bool,
}

struct ClusterTracker {
    failed: BTreeSet<SatId>,
    applied: BTreeSet<usize>,
    last_reform_s: f64,
    nonrt: NodeId,
}

/// Runs a scenario over its window. The event log depends only on the
/// scenario (seed included).
pub fn run(scenario: &Scenario) -> Result<RunOutput, DynamicsError> {
    let resolved = scenario.resolve()?;
    let initial = resolved.spec.clone();
    let mut spec = resolved.spec;
    let traffic = &scenario.traffic;
    let dc = &scenario.dynamics;
    let mut ev = Evaluator::new(&spec, traffic, &scenario.resources)?;
    let times = scenario.window.times();
    let step = scenario.window.step;
    let relay = traffic.isl_relay_to_ground;
    let profile = option_profile(spec.split, spec.extension)?;
    info!("running {} over {} steps ({} / {})", scenario.name, times.len(), spec.split, spec.extension);

    let mut log = EventLog::default();
    let mut reports = Vec::with_capacity(times.len());

    // satellites whose own feeder carries the split interface
    let mut feeders = FeederTracker {
        state: BTreeMap::new(),
        group_ue: matches!(spec.split, SplitOption::O1a | SplitOption::O1b),
        burst_bytes: group_ue_handover_cost(dc.group_ue.n_ues, dc.group_ue.msgs_per_ue, dc.group_ue.msg_size_bytes),
        requires_dual: profile.requires_dual_feeder,
    };
    if profile.requires_dual_feeder {
        let first = &resolved.topology;
        for l in ev.links() {
            if l.segment == Segment::Feeder && profile.feeder_carries.contains(&l.interface_class) {
                if let Some(s) = l.from_node.as_sat().or(l.to_node.as_sat()) {
                    let init = match first.feeders_of(s).first() {
                        Some(f) => FeederState::Attached { gateway: f.site.clone() },
                        None => FeederState::Detached,
                    };
                    feeders.state.entry(s).or_insert(init);
                }
            }
        }
    }

    let (timeline, mut rics) = if spec.extension == RicExtension::Ext2 {
        let (tl, st) = ric_setup(scenario, &spec, &times)?;
        (Some(tl), Some(st))
    } else {
        (None, None)
    };

    let mut clusters = (spec.extension == RicExtension::Ext3).then(|| ClusterTracker {
        failed: BTreeSet::new(),
        applied: BTreeSet::new(),
        last_reform_s: scenario.window.t0,
        nonrt: spec.assignments[&NetworkFunction::new(FunctionKind::NonRtRic, 0)].clone(),
    });
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);

    let mut table: Option<RoutingTable> = None;
    let mut next_epoch = f64::NEG_INFINITY;
    let mut e2_loops = Vec::new();
    let mut unassigned_s = 0.0;
    let mut transfer_bytes = 0.0;
    let mut group_bytes = 0u64;

    for (c, chunk) in times.chunks(CHUNK).enumerate() {
        let topos = chunk
            .par_iter()
            .map(|&t| Ok(build_topology(&scenario.constellation, &orbital::propagate(&scenario.constellation, t)?, &scenario.sites, &scenario.topology)))
            .collect::<Result<Vec<IslTopology>, OrbitalError>>()?;
        for (j, topo) in topos.into_iter().enumerate() {
            let k = c * CHUNK + j;
            let t = topo.time;
            let mut step_v: Vec<Violation> = Vec::new();
            if t >= next_epoch - 1e-9 {
                debug!("routing epoch at t = {t}");
                table = Some(build_routing_tables(&topo, t + dc.routing_epoch_s));
                next_epoch = t + dc.routing_epoch_s;
            }

            let demand = feeder_step(&mut feeders, &topo, t, dc, traffic.feeder_capacity.as_bps(), relay, &mut log, &mut step_v, &mut group_bytes);

            if let (Some(tl), Some(st)) = (timeline.as_ref(), rics.as_mut()) {
                let mut changed = false;
                for a in st.step(tl, k, t) {
                    match a {
                        RicAction::Reassigned { node, from, to, reason, score } => {
                            let e2 = st.e2_nodes[node];
                            let target = st.rics[to];
                            let mut e = SimEvent::new(t, EventKind::E2Reassignment, e2.to_string())
                                .with("from", from.map_or(Value::Null, |f| Value::from(st.rics[f].to_string())))
                                .with("to", target.to_string())
                                .with("reason", reason.as_str())
                                .with("score", score);
                            if let Some(f) = from {
                                let (a, b) = (&spec.assignments[&st.rics[f]], &spec.assignments[&target]);
                                let path = node_path(&topo, &SnapshotRouter::default(), a, b, relay).ok();
                                let secs = dc.ric.context_bytes * 8.0 / traffic.isl_capacity.as_bps() + path.map_or(0.0, |p| p.one_way_s);
                                e = e.with("transfer_bytes", dc.ric.context_bytes).with("transfer_s", secs);
                                transfer_bytes += dc.ric.context_bytes;
                            }
                            log.push(e);
                            spec.e2_bindings.insert(e2, target);
                            changed = true;
                        }
                        RicAction::Scheduled { node, plan } => {
                            debug!("{} reassignment planned at step {} ahead of exit at {}", st.e2_nodes[node], plan.at_step, plan.exit_step);
                        }
                        RicAction::Unassigned { node } => {
                            unassigned_s += step;
                            step_v.push(violation(t, "e2-unassigned", st.e2_nodes[node].to_string(), "no near-RT RIC within the loop bound"));
                        }
                    }
                }
                if changed {
                    ev.set_spec(spec.clone())?;
                }
            }

            if let Some(ct) = clusters.as_mut() {
                if cluster_step(ct, &mut spec, &topo, t, k, scenario, &mut rng, &mut log, &mut step_v) {
                    ev.set_spec(spec.clone())?;
                }
                let plan = spec.cluster_plan.as_ref().expect("ext3 plan");
                let links = hierarchy_links(plan, &ct.nonrt);
                step_v.extend(evaluate_hierarchy(&topo, &links, traffic.e2_processing_s, traffic.follower_loop_s, relay));
            }

            let mut report = ev.evaluate(&topo, table.as_ref().expect("table built"), &demand);
            for l in &report.links {
                if let (InterfaceClass::E2, Some(ow)) = (l.link.interface_class, l.one_way_s) {
                    e2_loops.push(2.0 * ow + traffic.e2_processing_s);
                }
            }
            report.violations.extend(step_v);
            report.violations.sort_by(|a, b| a.rule.cmp(&b.rule).then_with(|| a.subject.cmp(&b.subject)));
            if !report.violations.is_empty() {
                report.overall = Overall::Infeasible;
            }
            for v in &report.violations {
                log.push(
                    SimEvent::new(t, EventKind::BudgetViolation, v.subject.clone())
                        .with("rule", v.rule.as_str())
                        .with("detail", v.detail.as_str()),
                );
            }
            reports.push(report);
        }
    }
    log.finalize();

    let summary = summarize(scenario, &spec, &reports, &log, e2_loops, unassigned_s, transfer_bytes, group_bytes, ev.links());
    Ok(RunOutput {
        spec: initial,
        reports,
        events: log,
        summary,
    })
}

fn ric_setup(scenario: &Scenario, spec: &PlacementSpec, times: &[f64]) -> Result<(E2Timeline, RicAssignmentState), DynamicsError> {
    let dc = &scenario.dynamics;
    let e2_nodes = spec.e2_nodes();
    let mut rics: Vec<NetworkFunction> = spec.instances(FunctionKind::NearRtRic).into_iter().map(|i| NetworkFunction::new(FunctionKind::NearRtRic, i)).collect();
    rics.sort();
    let w = &scenario.window;
    let tl_times = sample_grid(w.t0, (w.t1 - w.t0) + dc.ric.horizon_s, w.step)?;
    debug_assert!(tl_times.iter().zip(times).all(|(a, b)| a == b));
    let timeline = E2Timeline::build(
        &scenario.constellation,
        &scenario.sites,
        &scenario.topology,
        e2_nodes.iter().map(|n| spec.assignments[n].clone()).collect(),
        rics.iter().map(|r| spec.assignments[r].clone()).collect(),
        tl_times,
        &dc.link_quality,
        scenario.traffic.isl_relay_to_ground,
    )?;
    let serving = e2_nodes
        .iter()
        .map(|n| spec.e2_binding(*n).and_then(|r| rics.binary_search(&r).ok()))
        .collect();
    let st = RicAssignmentState::new(
        e2_nodes,
        rics,
        serving,
        dc.ric.clone(),
        scenario.traffic.e2_processing_s,
        scenario.traffic.near_rt_loop_bound_s(),
    );
    Ok((timeline, st))
}

#[allow(clippy::too_many_arguments)]
fn feeder_step(
    fs: &mut FeederTracker,
    topo: &IslTopology,
    t: f64,
    dc: &DynamicsConfig,
    feeder_capacity_bps: f64,
    relay: bool,
    log: &mut EventLog,
    step_v: &mut Vec<Violation>,
    group_bytes: &mut u64,
) -> BTreeMap<(SatId, String), f64> {
    let mut demand = BTreeMap::new();
    let interval = dc.feeder.dual_interval_s;
    for (sat, st) in fs.state.iter_mut() {
        let subject = sat.to_string();
        let visible: Vec<(String, f64)> = topo.feeders_of(*sat).iter().map(|f| (f.site.clone(), f.elevation_deg)).collect();
        let (next, transitions) = feeder_assignment(st, &visible, t, &dc.feeder);
        for tr in transitions {
            match tr {
                FeederTransition::Start { from, to, dual } => {
                    log.push(
                        SimEvent::new(t, EventKind::FeederHandoverStart, subject.clone())
                            .with("from", opt_str(from.as_ref()))
                            .with("to", to.as_str())
                            .with("dual", dual),
                    );
                    if from.is_some() {
                        if fs.group_ue {
                            *group_bytes += fs.burst_bytes;
                            log.push(
                                SimEvent::new(t, EventKind::GroupUeHandover, subject.clone())
                                    .with("ues", dc.group_ue.n_ues)
                                    .with("messages", dc.group_ue.n_ues * dc.group_ue.msgs_per_ue)
                                    .with("bytes", fs.burst_bytes)
                                    .with("gateway", to.as_str()),
                            );
                            if !burst_fits(fs.burst_bytes, feeder_capacity_bps, interval) {
                                step_v.push(violation(t, "group-ue-burst", subject.clone(), format!("{} B burst exceeds feeder capacity over {interval} s", fs.burst_bytes)));
                            }
                        }
                        if !dual && fs.requires_dual {
                            step_v.push(violation(t, "dual-feeder-unsupported", subject.clone(), format!("switch to {to} without a dual-link interval")));
                        }
                    }
                }
                FeederTransition::Complete { from, to, interrupted } => log.push(
                    SimEvent::new(t, EventKind::FeederHandoverComplete, subject.clone())
                        .with("from", opt_str(from.as_ref()))
                        .with("to", to.as_str())
                        .with("interrupted", interrupted),
                ),
                FeederTransition::Interrupted { from, to } => {
                    step_v.push(violation(t, "dual-feeder-interrupted", subject.clone(), format!("{from} lost before the switch to {to} completed")));
                }
                FeederTransition::Cancelled { from, to } => debug!("{subject}: switch {from} -> {to} cancelled at {t}"),
                FeederTransition::Outage { lost } => debug!("{subject}: feeder outage at {t} (lost {lost:?})"),
            }
        }
        if next == FeederState::Detached && !relay {
            step_v.push(violation(t, "feeder-outage", subject.clone(), "no gateway visible"));
        }
        if let (true, FeederState::Switching { to, .. }) = (fs.group_ue, &next) {
            demand.insert((*sat, to.clone()), burst_rate_bps(fs.burst_bytes, interval));
        }
        *st = next;
    }
    demand
}

/// Applies failures and periodic re-formation. Returns whether the placement changed.
#[allow(clippy::too_many_arguments)]
fn cluster_step(
    ct: &mut ClusterTracker,
    spec: &mut PlacementSpec,
    topo: &IslTopology,
    t: f64,
    k: usize,
    scenario: &Scenario,
    rng: &mut ChaCha8Rng,
    log: &mut EventLog,
    step_v: &mut Vec<Violation>,
) -> bool {
    let cfg = &scenario.dynamics.cluster;
    let mut plan: ClusterPlan = spec.cluster_plan.clone().expect("ext3 plan");
    let before = plan.clone();
    let mut residual = residual_compute(spec, topo, &scenario.resources);

    let mut newly_failed = Vec::new();
    for (i, f) in cfg.failures.iter().enumerate() {
        if f.time_s <= t + 1e-9 && ct.applied.insert(i) {
            newly_failed.push(f.sat);
        }
    }
    for c in &plan.clusters {
        // one draw per cluster per step keeps the stream aligned across runs
        let fail = rng.gen_bool(cfg.failure_probability);
        if fail && !ct.failed.contains(&c.leader) {
            newly_failed.push(c.leader);
        }
    }
    for s in &newly_failed {
        ct.failed.insert(*s);
        residual.remove(s);
    }

    if k > 0 && t - ct.last_reform_s >= cfg.reform_interval_s - 1e-9 {
        ct.last_reform_s = t;
        let tpl = &scenario.placement.cluster;
        plan = form_clusters(topo, tpl.rule, tpl.target_size, &residual);
        for c in plan.clusters.iter_mut() {
            if ct.failed.contains(&c.leader) {
                if let Some(n) = select_leader(&c.members, &residual, &ct.failed) {
                    c.leader = n;
                }
            }
        }
        debug_assert!(plan.is_partition_of(&topo.sat_ids().collect()));
        log.push(
            SimEvent::new(t, EventKind::ClusterReformed, "constellation")
                .with("clusters", plan.clusters.len() as u64)
                .with("rule", serde_json::to_value(plan.rule).expect("rule serializes")),
        );
    }

    for s in newly_failed {
        for c in plan.clusters.iter_mut().filter(|c| c.leader == s) {
            if let Some(n) = select_leader(&c.members, &residual, &ct.failed) {
                log.push(
                    SimEvent::new(t, EventKind::LeaderChanged, format!("cluster-{}", c.id))
                        .with("from", s.to_string())
                        .with("to", n.to_string())
                        .with("reason", "failure"),
                );
                c.leader = n;
            }
        }
    }
    for c in &plan.clusters {
        if ct.failed.contains(&c.leader) {
            step_v.push(violation(t, "cluster-leaderless", format!("cluster-{}", c.id), "every member has failed"));
        }
    }

    if plan == before {
        return false;
    }
    spec.assignments.retain(|f, _| f.kind != FunctionKind::NonRtRicClusterLeader);
    for c in &plan.clusters {
        spec.assignments.insert(NetworkFunction::new(FunctionKind::NonRtRicClusterLeader, c.id), NodeId::Sat(c.leader));
    }
    spec.cluster_plan = Some(plan);
    true
}

#[allow(clippy::too_many_arguments)]
fn summarize(
    scenario: &Scenario,
    spec: &PlacementSpec,
    reports: &[FeasibilityReport],
    log: &EventLog,
    mut e2_loops: Vec<f64>,
    unassigned_s: f64,
    transfer_bytes: f64,
    group_bytes: u64,
    links: &[crate::placement::LogicalLink],
) -> RunSummary {
    let steps = reports.len();
    let ok = reports.iter().filter(|r| r.violations.is_empty()).count();
    let mut rule_steps: BTreeMap<String, usize> = BTreeMap::new();
    for r in reports {
        let rules: BTreeSet<&str> = r.violations.iter().map(|v| v.rule.as_str()).collect();
        for rule in rules {
            *rule_steps.entry(rule.to_string()).or_default() += 1;
        }
    }
    let mut by_reason: BTreeMap<String, u64> = BTreeMap::new();
    for e in log.of_kind(EventKind::E2Reassignment) {
        *by_reason.entry(e.str_field("reason").unwrap_or("").to_string()).or_default() += 1;
    }
    let starts: Vec<&SimEvent> = log.of_kind(EventKind::FeederHandoverStart).collect();
    e2_loops.sort_by(f64::total_cmp);
    let mean = (!e2_loops.is_empty()).then(|| e2_loops.iter().sum::<f64>() / e2_loops.len() as f64);
    let nodes = reports.iter().flat_map(|r| &r.nodes);
    RunSummary {
        scenario: scenario.name.clone(),
        seed: scenario.seed,
        split: spec.split,
        extension: spec.extension,
        steps,
        feasible: ok == steps,
        availability: if steps == 0 { 1.0 } else { ok as f64 / steps as f64 },
        event_counts: log.counts(),
        feeder_handovers: starts.iter().filter(|e| e.payload.get("from").is_some_and(|v| !v.is_null())).count() as u64,
        feeder_acquisitions: starts.iter().filter(|e| e.payload.get("from").is_none_or(Value::is_null)).count() as u64,
        e2_reassignments: by_reason.values().sum(),
        reassignments_by_reason: by_reason,
        e2_unassigned_time_s: unassigned_s,
        violation_time_fraction: rule_steps.into_iter().map(|(r, n)| (r, n as f64 / steps.max(1) as f64)).collect(),
        e2_loop_mean_s: mean,
        e2_loop_p95_s: percentile(&e2_loops, 95.0),
        peak_feeder_bps: reports.iter().map(|r| r.peak_feeder_bps).fold(0.0, f64::max),
        max_sat_power_w: nodes.clone().map(|n| n.power_w).fold(0.0, f64::max),
        max_sat_compute: nodes.map(|n| n.compute_used).fold(0.0, f64::max),
        group_ue_signalling_bytes: group_bytes,
        ric_context_transfer_bytes: transfer_bytes,
        link_classes: links.iter().map(|l| l.interface_class).collect(),
        space_link_classes: links
            .iter()
            .filter(|l| l.from_node.as_sat().is_some() || l.to_node.as_sat().is_some())
            .map(|l| l.interface_class)
            .collect(),
    }
}
