//! Scenario documents: everything a run needs, parsed from JSON.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dimensioning::InterfaceClass;
use crate::dynamics::DynamicsConfig;
use crate::feasibility::{ResourceModel, TrafficConfig};
use crate::orbital::{propagate, sample_grid, ConstellationConfig, GroundSite};
use crate::placement::{assign_functions, compatible, validate_placement, PlacementSpec, PlacementTemplate, RicExtension};
use crate::topology::{build_topology, IslTopology, TopologyPolicy};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("[{rule}] {message}")]
    Validation { rule: String, message: String },
}

impl ScenarioError {
    pub fn validation(rule: &str, message: impl Into<String>) -> Self {
        ScenarioError::Validation {
            rule: rule.to_string(),
            message: message.into(),
        }
    }

    pub fn rule(&self) -> Option<&str> {
        match self {
            ScenarioError::Validation { rule, .. } => Some(rule),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Window {
    #[serde(default)]
    pub t0: f64,
    #[serde(default = "default_t1")]
    pub t1: f64,
    #[serde(default = "default_step")]
    pub step: f64,
}

fn default_t1() -> f64 {
    600.0
}

fn default_step() -> f64 {
    1.0
}

impl Default for Window {
    fn default() -> Self {
        Self {
            t0: 0.0,
            t1: default_t1(),
            step: default_step(),
        }
    }
}

impl Window {
    /// `t0, t0 + step, ..` up to `t1`.
    pub fn times(&self) -> Vec<f64> {
        sample_grid(self.t0, self.t1 - self.t0, self.step).expect("validated window")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub constellation: ConstellationConfig,
    pub sites: Vec<GroundSite>,
    #[serde(default)]
    pub topology: TopologyPolicy,
    pub placement: PlacementTemplate,
    #[serde(default)]
    pub traffic: TrafficConfig,
    #[serde(default)]
    pub resources: ResourceModel,
    #[serde(default)]
    pub window: Window,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
    /// Flat `key: number` settings applied on top of the sections above.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<String, f64>,
}

/// Override keys other than `budget.<CLASS>`.
pub const OVERRIDE_KEYS: [&str; 18] = [
    "weight.delay",
    "weight.load",
    "weight.quality",
    "e2_processing_s",
    "ground_part_loop_s",
    "follower_loop_s",
    "dual_feeder_interval_s",
    "feeder_hysteresis_deg",
    "ric_hysteresis",
    "dwell_s",
    "horizon_s",
    "guard_s",
    "context_bytes",
    "routing_epoch_s",
    "reform_interval_s",
    "failure_probability",
    "power_budget_w",
    "compute_budget",
];

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut sc: Scenario = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    sc.apply_overrides()?;
    sc.validate()?;
    Ok(sc)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario(&text)
}

/// A scenario with its placement made concrete on the first snapshot.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub topology: IslTopology,
    pub spec: PlacementSpec,
}

impl Scenario {
    /// Minimal scenario with every optional section at its default.
    pub fn new(name: &str, constellation: ConstellationConfig, sites: Vec<GroundSite>, placement: PlacementTemplate) -> Self {
        Self {
            name: name.to_string(),
            constellation,
            sites,
            topology: TopologyPolicy::default(),
            placement,
            traffic: TrafficConfig::default(),
            resources: ResourceModel::default(),
            window: Window::default(),
            seed: 0,
            dynamics: DynamicsConfig::default(),
            overrides: BTreeMap::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Writes each override into its section. Idempotent.
    pub fn apply_overrides(&mut self) -> Result<(), ScenarioError> {
        for (key, &v) in &self.overrides {
            let d = &mut self.dynamics;
            if let Some(class) = key.strip_prefix("budget.") {
                let c: InterfaceClass = class
                    .parse()
                    .map_err(|_| ScenarioError::validation("unknown-override", format!("unknown interface class in {key:?}")))?;
                self.traffic.budget_overrides.0.insert(c, v);
                continue;
            }
            match key.as_str() {
                "weight.delay" => d.ric.weights.delay = v,
                "weight.load" => d.ric.weights.load = v,
                "weight.quality" => d.ric.weights.quality = v,
                "e2_processing_s" => self.traffic.e2_processing_s = v,
                "ground_part_loop_s" => self.traffic.ground_part_loop_s = v,
                "follower_loop_s" => self.traffic.follower_loop_s = v,
                "dual_feeder_interval_s" => d.feeder.dual_interval_s = v,
                "feeder_hysteresis_deg" => d.feeder.hysteresis_deg = v,
                "ric_hysteresis" => d.ric.hysteresis = v,
                "dwell_s" => d.ric.dwell_s = v,
                "horizon_s" => d.ric.horizon_s = v,
                "guard_s" => d.ric.guard_s = v,
                "context_bytes" => d.ric.context_bytes = v,
                "routing_epoch_s" => d.routing_epoch_s = v,
                "reform_interval_s" => d.cluster.reform_interval_s = v,
                "failure_probability" => d.cluster.failure_probability = v,
                "power_budget_w" => self.resources.power_budget_w = v,
                "compute_budget" => self.resources.compute_budget = v,
                _ => {
                    return Err(ScenarioError::validation(
                        "unknown-override",
                        format!("unknown override {key:?}; expected budget.<CLASS> or one of {}", OVERRIDE_KEYS.join(", ")),
                    ))
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let v = |r: &str, m: String| ScenarioError::validation(r, m);
        if self.name.trim().is_empty() {
            return Err(v("scenario-name", "name must not be empty".into()));
        }
        self.constellation.validate().map_err(|e| v("constellation", e.to_string()))?;
        let mut ids = BTreeSet::new();
        for s in &self.sites {
            s.validate().map_err(|e| v("site", e.to_string()))?;
            if !ids.insert(&s.site_id) {
                return Err(v("duplicate-site", format!("site id {:?} appears twice", s.site_id)));
            }
        }
        let w = &self.window;
        if !(w.t0.is_finite() && w.t1.is_finite() && w.t1 > w.t0) {
            return Err(v("window-order", format!("window end {} must follow start {}", w.t1, w.t0)));
        }
        if !(w.step > 0.0 && w.step <= w.t1 - w.t0) {
            return Err(v("window-step", format!("step {} must be positive and no longer than the window", w.step)));
        }
        self.traffic.validate().map_err(|e| v("traffic", e.to_string()))?;
        self.resources.validate().map_err(|e| v("resources", e.to_string()))?;
        let (split, ext) = (self.placement.split, self.placement.extension);
        if !compatible(split, ext) {
            let rule = if ext == RicExtension::Ext1 { "ext1-requires-ground-cu" } else { "ext-requires-space-cu" };
            return Err(v(rule, format!("{ext} cannot be combined with option {split}")));
        }
        self.dynamics.validate().map_err(|e| v("dynamics", e))?;
        Ok(())
    }

    pub fn topology_at(&self, t: f64) -> IslTopology {
        let states = propagate(&self.constellation, t).expect("validated constellation");
        build_topology(&self.constellation, &states, &self.sites, &self.topology)
    }

    /// Places functions on the first snapshot and checks every referenced
    /// node exists and every placement rule holds.
    pub fn resolve(&self) -> Result<Resolved, ScenarioError> {
        self.validate()?;
        let topology = self.topology_at(self.window.t0);
        let spec = assign_functions(&self.placement, &topology, &self.sites, &self.resources).map_err(|e| match e {
            crate::placement::PlacementError::Invalid(vs) => placement_error(&vs),
            other => ScenarioError::validation("placement", other.to_string()),
        })?;
        for (f, n) in &spec.assignments {
            if !topology.contains(n) {
                return Err(ScenarioError::validation("unresolved-node", format!("{f} is placed on unknown node {n}")));
            }
        }
        let vs = validate_placement(&spec);
        if !vs.is_empty() {
            return Err(placement_error(&vs));
        }
        Ok(Resolved { topology, spec })
    }
}

fn placement_error(vs: &[crate::placement::RuleViolation]) -> ScenarioError {
    let message = vs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ");
    ScenarioError::validation(vs.first().map_or("placement", |v| v.rule.as_str()), message)
}
