//! Dynamic E2 attachment of DUs and CUs to space near-RT RICs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::orbital::{self, ConstellationConfig, GroundSite, OrbitalError, SPEED_OF_LIGHT_KM_S};
use crate::feasibility::{node_path, SnapshotRouter};
use crate::placement::NetworkFunction;
use crate::topology::{build_topology, IslTopology, NodeId, TopologyPolicy};

/// Delay normaliser in the score, s.
pub const SCORE_DELAY_REF_S: f64 = 10e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreWeights {
    pub delay: f64,
    pub load: f64,
    pub quality: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self {
            delay: 0.5,
            load: 0.3,
            quality: 0.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReassignmentPolicy {
    /// Acts on the previous step's measurements.
    Reactive,
    /// Acts on the ephemeris: current geometry plus a lookahead.
    #[default]
    Predictive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RicConfig {
    #[serde(default)]
    pub policy: ReassignmentPolicy,
    #[serde(default)]
    pub weights: ScoreWeights,
    /// Score advantage a challenger needs over the incumbent.
    #[serde(default = "default_delta")]
    pub hysteresis: f64,
    /// Minimum time between two score-driven moves of one E2 node, s.
    #[serde(default = "default_dwell")]
    pub dwell_s: f64,
    #[serde(default = "default_horizon")]
    pub horizon_s: f64,
    #[serde(default = "default_guard")]
    pub guard_s: f64,
    /// RIC context moved per reassignment, bytes.
    #[serde(default = "default_context")]
    pub context_bytes: f64,
    /// Assigned weight a RIC can carry at full load.
    #[serde(default = "default_capacity")]
    pub capacity: f64,
    #[serde(default = "default_node_weight")]
    pub node_weight: f64,
}

fn default_delta() -> f64 {
    0.1
}

fn default_dwell() -> f64 {
    30.0
}

fn default_horizon() -> f64 {
    120.0
}

fn default_guard() -> f64 {
    5.0
}

fn default_context() -> f64 {
    1e6
}

fn default_capacity() -> f64 {
    4.0
}

fn default_node_weight() -> f64 {
    1.0
}

impl Default for RicConfig {
    fn default() -> Self {
        Self {
            policy: ReassignmentPolicy::default(),
            weights: ScoreWeights::default(),
            hysteresis: default_delta(),
            dwell_s: default_dwell(),
            horizon_s: default_horizon(),
            guard_s: default_guard(),
            context_bytes: default_context(),
            capacity: default_capacity(),
            node_weight: default_node_weight(),
        }
    }
}

impl RicConfig {
    pub fn validate(&self) -> Result<(), String> {
        let w = self.weights;
        if [w.delay, w.load, w.quality, self.hysteresis, self.dwell_s, self.context_bytes].iter().any(|v| !(*v >= 0.0)) {
            return Err("RIC weights, hysteresis, dwell and context size must be non-negative".into());
        }
        if !(self.horizon_s > self.guard_s && self.guard_s >= 0.0) {
            return Err(format!("prediction horizon {} must exceed guard {} >= 0", self.horizon_s, self.guard_s));
        }
        if !(self.capacity > 0.0 && self.node_weight >= 0.0) {
            return Err("RIC capacity must be positive".into());
        }
        Ok(())
    }
}

/// Link quality in [0, 1] from hop range and, for inter-plane hops, latitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkQualityModel {
    #[serde(default = "default_ref_range")]
    pub reference_range_km: f64,
    #[serde(default = "default_range_weight")]
    pub range_weight: f64,
    #[serde(default = "default_seam_weight")]
    pub seam_weight: f64,
    #[serde(default = "default_seam_lat")]
    pub seam_latitude_deg: f64,
}

fn default_ref_range() -> f64 {
    5000.0
}

fn default_range_weight() -> f64 {
    0.3
}

fn default_seam_weight() -> f64 {
    0.3
}

fn default_seam_lat() -> f64 {
    70.0
}

impl Default for LinkQualityModel {
    fn default() -> Self {
        Self {
            reference_range_km: default_ref_range(),
            range_weight: default_range_weight(),
            seam_weight: default_seam_weight(),
            seam_latitude_deg: default_seam_lat(),
        }
    }
}

impl LinkQualityModel {
    pub fn hop_quality(&self, range_km: f64, inter_plane_latitude_deg: Option<f64>) -> f64 {
        let mut q = 1.0 - self.range_weight * (range_km / self.reference_range_km).clamp(0.0, 1.0);
        if let Some(lat) = inter_plane_latitude_deg {
            q *= 1.0 - self.seam_weight * (lat.abs() / self.seam_latitude_deg).clamp(0.0, 1.0);
        }
        q.clamp(0.0, 1.0)
    }

    /// Quality of the weakest hop; a local path has quality 1.
    pub fn path_quality(&self, topology: &IslTopology, hops: &[NodeId]) -> f64 {
        hops.windows(2)
            .map(|w| match (&w[0], &w[1]) {
                (NodeId::Sat(a), NodeId::Sat(b)) => {
                    let (pa, pb) = (topology.position(*a), topology.position(*b));
                    match (pa, pb) {
                        (Some(pa), Some(pb)) => {
                            let range = (pa - pb).norm();
                            let mid = (pa + pb) / 2.0;
                            let lat = (mid.z / mid.norm()).asin().to_degrees();
                            self.hop_quality(range, (a.plane != b.plane).then_some(lat))
                        }
                        _ => 0.0,
                    }
                }
                (NodeId::Sat(s), NodeId::Site(g)) | (NodeId::Site(g), NodeId::Sat(s)) => topology
                    .feeder(*s, g)
                    .map_or(0.0, |f| self.hop_quality(f.delay_s * SPEED_OF_LIGHT_KM_S, None)),
                _ => 1.0,
            })
            .fold(1.0, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub ric: NetworkFunction,
    pub delay_s: f64,
    pub load: f64,
    pub quality: f64,
}

pub fn score(c: &Candidate, w: &ScoreWeights) -> f64 {
    w.delay * (c.delay_s / SCORE_DELAY_REF_S) + w.load * c.load + w.quality * (1.0 - c.quality)
}

/// Lowest score wins, ties to the lowest RIC id.
pub fn select_near_rt_ric(candidates: &[Candidate], weights: &ScoreWeights) -> Option<NetworkFunction> {
    candidates
        .iter()
        .map(|c| (score(c, weights), c.ric))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, r)| r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct E2Sample {
    pub one_way_s: f64,
    pub quality: f64,
}

/// E2 path samples for every (step, E2 node, RIC) on the scenario grid,
/// extended past the window end by the prediction horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct E2Timeline {
    pub times: Vec<f64>,
    pub nodes: Vec<NodeId>,
    pub rics: Vec<NodeId>,
    samples: Vec<Option<E2Sample>>,
}

impl E2Timeline {
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        config: &ConstellationConfig,
        sites: &[GroundSite],
        policy: &TopologyPolicy,
        nodes: Vec<NodeId>,
        rics: Vec<NodeId>,
        times: Vec<f64>,
        quality: &LinkQualityModel,
        relay: bool,
    ) -> Result<Self, OrbitalError> {
        let rows = times
            .par_iter()
            .map(|&t| {
                let topo = build_topology(config, &orbital::propagate(config, t)?, sites, policy);
                let router = SnapshotRouter::default();
                let mut row = Vec::with_capacity(nodes.len() * rics.len());
                for n in &nodes {
                    for r in &rics {
                        row.push(node_path(&topo, &router, n, r, relay).ok().map(|p| E2Sample {
                            one_way_s: p.one_way_s,
                            quality: quality.path_quality(&topo, &p.hops),
                        }));
                    }
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>, OrbitalError>>()?;
        Ok(Self::from_rows(times, nodes, rics, rows))
    }

    pub fn from_rows(times: Vec<f64>, nodes: Vec<NodeId>, rics: Vec<NodeId>, rows: Vec<Vec<Option<E2Sample>>>) -> Self {
        assert_eq!(rows.len(), times.len());
        assert!(rows.iter().all(|r| r.len() == nodes.len() * rics.len()));
        Self {
            times,
            nodes,
            rics,
            samples: rows.concat(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn sample(&self, step: usize, node: usize, ric: usize) -> Option<&E2Sample> {
        let k = step.min(self.times.len() - 1);
        self.samples[(k * self.nodes.len() + node) * self.rics.len() + ric].as_ref()
    }

    fn step_s(&self) -> f64 {
        if self.times.len() > 1 {
            self.times[1] - self.times[0]
        } else {
            1.0
        }
    }
}

/// A migration planned ahead of a predicted exit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduledReassignment {
    pub at_step: usize,
    pub exit_step: usize,
    pub target: usize,
}

/// First step after `from_step` within the horizon where `serving` stops
/// being usable for `node`, and the step `guard_s` before it (never earlier
/// than `from_step`). `None` if the serving RIC stays usable.
pub fn predict_exit(
    timeline: &E2Timeline,
    node: usize,
    serving: usize,
    from_step: usize,
    horizon_s: f64,
    guard_s: f64,
    usable: impl Fn(Option<&E2Sample>) -> bool,
) -> Option<(usize, usize)> {
    let dt = timeline.step_s();
    let h = (horizon_s / dt + 1e-9).floor() as usize;
    let g = (guard_s / dt - 1e-9).ceil().max(0.0) as usize;
    let last = (from_step + h).min(timeline.len() - 1);
    (from_step + 1..=last)
        .find(|&j| !usable(timeline.sample(j, node, serving)))
        .map(|j| (j, j.saturating_sub(g).max(from_step)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveReason {
    /// Serving RIC unusable.
    Forced,
    /// Challenger better by more than the hysteresis.
    Score,
    /// Planned ahead of a predicted exit.
    Predicted,
}

impl MoveReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            MoveReason::Forced => "forced",
            MoveReason::Score => "score",
            MoveReason::Predicted => "predicted",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RicAction {
    Reassigned {
        node: usize,
        from: Option<usize>,
        to: usize,
        reason: MoveReason,
        score: f64,
    },
    Scheduled {
        node: usize,
        plan: ScheduledReassignment,
    },
    /// No usable RIC serves the node at this step.
    Unassigned { node: usize },
}

/// Serving map, loads and timers for every E2 node.
#[derive(Debug, Clone)]
pub struct RicAssignmentState {
    pub e2_nodes: Vec<NetworkFunction>,
    pub rics: Vec<NetworkFunction>,
    pub serving: Vec<Option<usize>>,
    last_move_s: Vec<Option<f64>>,
    pending: Vec<Option<ScheduledReassignment>>,
    cfg: RicConfig,
    processing_s: f64,
    loop_bound_s: f64,
}

impl RicAssignmentState {
    /// `rics` must be sorted; `serving` gives initial indices into it.
    pub fn new(
        e2_nodes: Vec<NetworkFunction>,
        rics: Vec<NetworkFunction>,
        serving: Vec<Option<usize>>,
        cfg: RicConfig,
        processing_s: f64,
        loop_bound_s: f64,
    ) -> Self {
        debug_assert!(rics.windows(2).all(|w| w[0] < w[1]));
        let n = e2_nodes.len();
        Self {
            e2_nodes,
            rics,
            serving,
            last_move_s: vec![None; n],
            pending: vec![None; n],
            cfg,
            processing_s,
            loop_bound_s,
        }
    }

    pub fn usable(&self, s: Option<&E2Sample>) -> bool {
        s.is_some_and(|s| 2.0 * s.one_way_s + self.processing_s <= self.loop_bound_s)
    }

    fn assigned_weight(&self, ric: usize) -> f64 {
        self.serving.iter().filter(|s| **s == Some(ric)).count() as f64 * self.cfg.node_weight
    }

    /// Current load of a RIC, in [0, 1].
    pub fn load(&self, ric: usize) -> f64 {
        (self.assigned_weight(ric) / self.cfg.capacity).min(1.0)
    }

    /// Usable candidates for `node` at `step`, each with the load it would
    /// have with `node` attached.
    pub fn candidates(&self, timeline: &E2Timeline, node: usize, step: usize) -> Vec<Candidate> {
        (0..self.rics.len())
            .filter_map(|r| {
                let s = timeline.sample(step, node, r).filter(|s| self.usable(Some(s)))?;
                let extra = if self.serving[node] == Some(r) { 0.0 } else { self.cfg.node_weight };
                Some(Candidate {
                    ric: self.rics[r],
                    delay_s: s.one_way_s,
                    load: ((self.assigned_weight(r) + extra) / self.cfg.capacity).min(1.0),
                    quality: s.quality,
                })
            })
            .collect()
    }

    fn index_of(&self, ric: NetworkFunction) -> usize {
        self.rics.binary_search(&ric).expect("candidate RIC")
    }

    fn best(&self, timeline: &E2Timeline, node: usize, step: usize) -> Option<(usize, f64)> {
        let c = self.candidates(timeline, node, step);
        let pick = select_near_rt_ric(&c, &self.cfg.weights)?;
        let sc = c.iter().find(|x| x.ric == pick).map(|x| score(x, &self.cfg.weights)).unwrap_or(0.0);
        Some((self.index_of(pick), sc))
    }

    fn apply(&mut self, node: usize, to: usize, reason: MoveReason, score: f64, t: f64, out: &mut Vec<RicAction>) {
        let from = self.serving[node];
        if from == Some(to) {
            return;
        }
        self.serving[node] = Some(to);
        self.last_move_s[node] = Some(t);
        self.pending[node] = None;
        out.push(RicAction::Reassigned { node, from, to, reason, score });
    }

    fn score_move(&mut self, timeline: &E2Timeline, node: usize, view: usize, t: f64, out: &mut Vec<RicAction>) {
        let Some(cur) = self.serving[node] else { return };
        if self.last_move_s[node].is_some_and(|m| t - m < self.cfg.dwell_s) {
            return;
        }
        let c = self.candidates(timeline, node, view);
        let Some(inc) = c.iter().find(|x| x.ric == self.rics[cur]) else { return };
        let inc_score = score(inc, &self.cfg.weights);
        if let Some((b, bs)) = self.best(timeline, node, view) {
            if b != cur && inc_score - bs > self.cfg.hysteresis {
                self.apply(node, b, MoveReason::Score, bs, t, out);
            }
        }
    }

    /// Decisions for step `k` at time `t`, then the assignment check against
    /// the actual geometry at `k`.
    pub fn step(&mut self, timeline: &E2Timeline, k: usize, t: f64) -> Vec<RicAction> {
        let mut out = Vec::new();
        for n in 0..self.e2_nodes.len() {
            match self.cfg.policy {
                ReassignmentPolicy::Reactive => {
                    let view = k.saturating_sub(1);
                    let ok = self.serving[n].is_some_and(|r| self.usable(timeline.sample(view, n, r)));
                    if !ok {
                        if let Some((b, s)) = self.best(timeline, n, view) {
                            self.apply(n, b, MoveReason::Forced, s, t, &mut out);
                        }
                    } else {
                        self.score_move(timeline, n, view, t, &mut out);
                    }
                }
                ReassignmentPolicy::Predictive => {
                    if let Some(p) = self.pending[n] {
                        if p.at_step <= k {
                            self.pending[n] = None;
                            if self.usable(timeline.sample(k, n, p.target)) {
                                let s = self
                                    .candidates(timeline, n, k)
                                    .iter()
                                    .find(|c| c.ric == self.rics[p.target])
                                    .map_or(0.0, |c| score(c, &self.cfg.weights));
                                self.apply(n, p.target, MoveReason::Predicted, s, t, &mut out);
                            }
                        }
                    }
                    let ok = self.serving[n].is_some_and(|r| self.usable(timeline.sample(k, n, r)));
                    if !ok {
                        if let Some((b, s)) = self.best(timeline, n, k) {
                            self.apply(n, b, MoveReason::Forced, s, t, &mut out);
                        }
                    } else {
                        self.score_move(timeline, n, k, t, &mut out);
                    }
                    if let (None, Some(cur)) = (self.pending[n], self.serving[n]) {
                        let usable = |s: Option<&E2Sample>| self.usable(s);
                        let exit = predict_exit(timeline, n, cur, k, self.cfg.horizon_s, self.cfg.guard_s, usable);
                        if let Some((j, at)) = exit {
                            if let Some((target, s)) = self.best(timeline, n, j) {
                                let plan = ScheduledReassignment { at_step: at, exit_step: j, target };
                                if at <= k {
                                    if target != cur && self.usable(timeline.sample(k, n, target)) {
                                        self.apply(n, target, MoveReason::Predicted, s, t, &mut out);
                                    }
                                } else {
                                    self.pending[n] = Some(plan);
                                    out.push(RicAction::Scheduled { node: n, plan });
                                }
                            }
                        }
                    }
                }
            }
            if !self.serving[n].is_some_and(|r| self.usable(timeline.sample(k, n, r))) {
                out.push(RicAction::Unassigned { node: n });
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::placement::FunctionKind;
    use proptest::prelude::*;

    fn ric(i: u32) -> NetworkFunction {
        NetworkFunction::new(FunctionKind::NearRtRic, i)
    }

    fn cand(i: u32, delay_s: f64, load: f64, quality: f64) -> Candidate {
        Candidate { ric: ric(i), delay_s, load, quality }
    }

    #[test]
    fn single_candidate_is_chosen() {
        assert_eq!(select_near_rt_ric(&[cand(4, 0.5, 1.0, 0.0)], &ScoreWeights::default()), Some(ric(4)));
        assert_eq!(select_near_rt_ric(&[], &ScoreWeights::default()), None);
    }

    #[test]
    fn lower_load_wins_at_equal_delay() {
        let c = [cand(0, 3e-3, 0.9, 0.8), cand(1, 3e-3, 0.1, 0.8)];
        assert_eq!(select_near_rt_ric(&c, &ScoreWeights::default()), Some(ric(1)));
        let tie = [cand(1, 3e-3, 0.5, 0.8), cand(0, 3e-3, 0.5, 0.8)];
        assert_eq!(select_near_rt_ric(&tie, &ScoreWeights::default()), Some(ric(0)));
    }

    #[test]
    fn quality_model_bounds() {
        let m = LinkQualityModel::default();
        assert_eq!(m.hop_quality(0.0, None), 1.0);
        assert!((m.hop_quality(5000.0, None) - 0.7).abs() < 1e-12);
        assert!((m.hop_quality(0.0, Some(70.0)) - 0.7).abs() < 1e-12);
        assert!(m.hop_quality(1000.0, Some(60.0)) < m.hop_quality(1000.0, Some(10.0)));
    }

    /// One node, two RICs; delays per step given directly.
    fn timeline(rows: &[(Option<f64>, Option<f64>)]) -> E2Timeline {
        let times = (0..rows.len()).map(|k| k as f64).collect();
        let s = |d: Option<f64>| d.map(|one_way_s| E2Sample { one_way_s, quality: 1.0 });
        let rows = rows.iter().map(|(a, b)| vec![s(*a), s(*b)]).collect();
        E2Timeline::from_rows(times, vec![NodeId::site("n")], vec![NodeId::site("r0"), NodeId::site("r1")], rows)
    }

    fn state(policy: ReassignmentPolicy) -> RicAssignmentState {
        let cfg = RicConfig { policy, horizon_s: 10.0, guard_s: 2.0, ..Default::default() };
        RicAssignmentState::new(vec![NetworkFunction::new(FunctionKind::Du, 0)], vec![ric(0), ric(1)], vec![Some(0)], cfg, 1e-3, 10e-3)
    }

    #[test]
    fn static_geometry_predicts_nothing() {
        let tl = timeline(&[(Some(1e-3), Some(2e-3)); 20]);
        let st = state(ReassignmentPolicy::Predictive);
        assert_eq!(predict_exit(&tl, 0, 0, 0, 10.0, 2.0, |s| st.usable(s)), None);
    }

    #[test]
    fn exit_is_scheduled_guard_ahead() {
        // r0 unusable (loop 11 ms) from step 8
        let mut rows = vec![(Some(1e-3), Some(3e-3)); 20];
        for r in rows.iter_mut().skip(8) {
            r.0 = Some(5e-3);
        }
        let tl = timeline(&rows);
        let st = state(ReassignmentPolicy::Predictive);
        assert_eq!(predict_exit(&tl, 0, 0, 0, 10.0, 2.0, |s| st.usable(s)), Some((8, 6)));
        assert_eq!(predict_exit(&tl, 0, 0, 0, 7.0, 2.0, |s| st.usable(s)), None);

        let mut pred = state(ReassignmentPolicy::Predictive);
        let mut moved_at = None;
        for k in 0..20 {
            for a in pred.step(&tl, k, k as f64) {
                match a {
                    RicAction::Reassigned { reason, to, .. } => {
                        assert_eq!(reason, MoveReason::Predicted);
                        assert_eq!(to, 1);
                        moved_at = Some(k);
                    }
                    RicAction::Unassigned { .. } => panic!("predictive run left the node unassigned"),
                    RicAction::Scheduled { plan, .. } => assert_eq!((plan.at_step, plan.exit_step), (6, 8)),
                }
            }
        }
        assert_eq!(moved_at, Some(6));

        let mut reac = state(ReassignmentPolicy::Reactive);
        let actions: Vec<_> = (0..20).flat_map(|k| reac.step(&tl, k, k as f64)).collect();
        assert_eq!(actions.iter().filter(|a| matches!(a, RicAction::Unassigned { .. })).count(), 1);
        assert!(actions.iter().any(|a| matches!(a, RicAction::Reassigned { reason: MoveReason::Forced, .. })));
    }

    fn arb_timeline(nodes: usize, rics: usize) -> impl Strategy<Value = E2Timeline> {
        let cell = prop_oneof![1 => Just(None), 4 => (0.0..8e-3f64, 0.3..1.0f64).prop_map(|(d, q)| Some(E2Sample { one_way_s: d, quality: q }))];
        proptest::collection::vec(proptest::collection::vec(cell, nodes * rics), 2..60).prop_map(move |rows| {
            let times = (0..rows.len()).map(|k| k as f64).collect();
            let n = (0..nodes).map(|i| NodeId::site(format!("n{i}"))).collect();
            let r = (0..rics).map(|i| NodeId::site(format!("r{i}"))).collect();
            E2Timeline::from_rows(times, n, r, rows)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn selection_matches_exhaustive_argmin(c in proptest::collection::vec((0.0..20e-3f64, 0.0..1.0f64, 0.0..1.0f64), 1..10)) {
            let cands: Vec<Candidate> = c.iter().enumerate().map(|(i, (d, l, q))| cand(i as u32, *d, *l, *q)).collect();
            let w = ScoreWeights::default();
            let mut best = 0;
            for i in 1..cands.len() {
                if score(&cands[i], &w) < score(&cands[best], &w) {
                    best = i;
                }
            }
            prop_assert_eq!(select_near_rt_ric(&cands, &w), Some(cands[best].ric));
        }

        #[test]
        fn assignment_totality_hysteresis_and_dominance(tl in arb_timeline(3, 4), init in proptest::collection::vec(proptest::option::of(0usize..4), 3)) {
            let rics: Vec<_> = (0..4).map(ric).collect();
            let nodes: Vec<_> = (0..3).map(|i| NetworkFunction::new(FunctionKind::Du, i)).collect();
            let mk = |policy| {
                let cfg = RicConfig { policy, horizon_s: 15.0, guard_s: 3.0, dwell_s: 5.0, ..Default::default() };
                RicAssignmentState::new(nodes.clone(), rics.clone(), init.clone(), cfg, 1e-3, 10e-3)
            };
            let mut totals = Vec::new();
            for policy in [ReassignmentPolicy::Reactive, ReassignmentPolicy::Predictive] {
                let mut st = mk(policy);
                let mut unassigned = 0;
                let mut last: Vec<Option<f64>> = vec![None; 3];
                for k in 0..tl.len() {
                    let actions = st.step(&tl, k, k as f64);
                    for a in &actions {
                        match a {
                            RicAction::Unassigned { .. } => unassigned += 1,
                            RicAction::Reassigned { node, reason, .. } => {
                                if *reason == MoveReason::Score {
                                    prop_assert!(last[*node].is_none_or(|m| k as f64 - m >= 5.0));
                                }
                                last[*node] = Some(k as f64);
                            }
                            _ => {}
                        }
                    }
                    for n in 0..3 {
                        let ok = st.serving[n].is_some_and(|r| st.usable(tl.sample(k, n, r)));
                        let reported = actions.contains(&RicAction::Unassigned { node: n });
                        prop_assert!(ok != reported);
                    }
                    for r in 0..4 {
                        prop_assert!((0.0..=1.0).contains(&st.load(r)));
                    }
                }
                totals.push(unassigned);
            }
            prop_assert!(totals[1] <= totals[0], "predictive {} > reactive {}", totals[1], totals[0]);
        }
    }
}
