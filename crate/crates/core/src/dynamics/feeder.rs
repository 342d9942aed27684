//! Feeder-link selection with hysteresis and make-before-break switchover.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeederConfig {
    /// Both links are held this long during a switchover, s.
    #[serde(default = "default_dual")]
    pub dual_interval_s: f64,
    /// Elevation advantage a new gateway needs before a switch starts, deg.
    #[serde(default = "default_hysteresis")]
    pub hysteresis_deg: f64,
    /// Payload can hold two feeder links at once.
    #[serde(default = "yes")]
    pub dual_feeder_capable: bool,
}

fn default_dual() -> f64 {
    5.0
}

fn default_hysteresis() -> f64 {
    2.0
}

fn yes() -> bool {
    true
}

impl Default for FeederConfig {
    fn default() -> Self {
        Self {
            dual_interval_s: default_dual(),
            hysteresis_deg: default_hysteresis(),
            dual_feeder_capable: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum FeederState {
    Detached,
    Attached { gateway: String },
    Switching { from: String, to: String, started_s: f64, until_s: f64 },
}

impl FeederState {
    /// Gateways whose links are up in this state.
    pub fn links(&self) -> Vec<&str> {
        match self {
            FeederState::Detached => vec![],
            FeederState::Attached { gateway } => vec![gateway],
            FeederState::Switching { from, to, .. } => vec![from, to],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FeederTransition {
    /// `from` is `None` when acquiring after an outage or at start-up.
    Start { from: Option<String>, to: String, dual: bool },
    Complete { from: Option<String>, to: String, interrupted: bool },
    /// The source link dropped before the dual interval ended.
    Interrupted { from: String, to: String },
    /// The target set before the switch completed; the source is kept.
    Cancelled { from: String, to: String },
    Outage { lost: Option<String> },
}

/// Highest-elevation gateway, ties to the lowest site id.
pub fn best_gateway(visible: &[(String, f64)]) -> Option<&(String, f64)> {
    visible
        .iter()
        .min_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)))
}

fn elevation(visible: &[(String, f64)], gw: &str) -> Option<f64> {
    visible.iter().find(|(g, _)| g == gw).map(|(_, e)| *e)
}

fn acquire(visible: &[(String, f64)], lost: Option<String>, out: &mut Vec<FeederTransition>) -> FeederState {
    match best_gateway(visible) {
        Some((g, _)) => {
            out.push(FeederTransition::Start { from: None, to: g.clone(), dual: false });
            out.push(FeederTransition::Complete { from: None, to: g.clone(), interrupted: false });
            FeederState::Attached { gateway: g.clone() }
        }
        None => {
            out.push(FeederTransition::Outage { lost });
            FeederState::Detached
        }
    }
}

/// Advances one satellite's feeder state to time `t` given the gateways
/// visible from it (with elevations). Returns the new state and what happened.
pub fn feeder_assignment(
    current: &FeederState,
    visible: &[(String, f64)],
    t: f64,
    cfg: &FeederConfig,
) -> (FeederState, Vec<FeederTransition>) {
    let mut out = Vec::new();
    let next = match current {
        FeederState::Detached => match best_gateway(visible) {
            Some(_) => acquire(visible, None, &mut out),
            None => FeederState::Detached,
        },
        FeederState::Attached { gateway } => match elevation(visible, gateway) {
            None => acquire(visible, Some(gateway.clone()), &mut out),
            Some(own) => {
                let (best, best_el) = best_gateway(visible).expect("own gateway is visible");
                if best != gateway && *best_el >= own + cfg.hysteresis_deg {
                    if cfg.dual_feeder_capable && cfg.dual_interval_s > 0.0 {
                        out.push(FeederTransition::Start { from: Some(gateway.clone()), to: best.clone(), dual: true });
                        FeederState::Switching {
                            from: gateway.clone(),
                            to: best.clone(),
                            started_s: t,
                            until_s: t + cfg.dual_interval_s,
                        }
                    } else {
                        out.push(FeederTransition::Start { from: Some(gateway.clone()), to: best.clone(), dual: false });
                        out.push(FeederTransition::Complete { from: Some(gateway.clone()), to: best.clone(), interrupted: false });
                        FeederState::Attached { gateway: best.clone() }
                    }
                } else {
                    current.clone()
                }
            }
        },
        FeederState::Switching { from, to, until_s, .. } => {
            let from_up = elevation(visible, from).is_some();
            let to_up = elevation(visible, to).is_some();
            match (from_up, to_up) {
                (_, true) if t >= *until_s => {
                    out.push(FeederTransition::Complete { from: Some(from.clone()), to: to.clone(), interrupted: false });
                    FeederState::Attached { gateway: to.clone() }
                }
                (true, true) => current.clone(),
                (false, true) => {
                    out.push(FeederTransition::Interrupted { from: from.clone(), to: to.clone() });
                    out.push(FeederTransition::Complete { from: Some(from.clone()), to: to.clone(), interrupted: true });
                    FeederState::Attached { gateway: to.clone() }
                }
                (true, false) => {
                    out.push(FeederTransition::Cancelled { from: from.clone(), to: to.clone() });
                    FeederState::Attached { gateway: from.clone() }
                }
                (false, false) => {
                    out.push(FeederTransition::Cancelled { from: from.clone(), to: to.clone() });
                    acquire(visible, Some(from.clone()), &mut out)
                }
            }
        }
    };
    (next, out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupUeConfig {
    /// UEs served by one satellite's cell.
    #[serde(default = "default_ues")]
    pub n_ues: u64,
    #[serde(default = "default_msgs")]
    pub msgs_per_ue: u64,
    #[serde(default = "default_msg_size")]
    pub msg_size_bytes: u64,
}

fn default_ues() -> u64 {
    1000
}

fn default_msgs() -> u64 {
    8
}

fn default_msg_size() -> u64 {
    200
}

impl Default for GroupUeConfig {
    fn default() -> Self {
        Self {
            n_ues: default_ues(),
            msgs_per_ue: default_msgs(),
            msg_size_bytes: default_msg_size(),
        }
    }
}

/// Signalling volume of handing over every UE under a satellite, bytes.
pub fn group_ue_handover_cost(n_ues: u64, msgs_per_ue: u64, msg_size_bytes: u64) -> u64 {
    n_ues * msgs_per_ue * msg_size_bytes
}

fn burst_window_s(interval_s: f64) -> f64 {
    if interval_s > 0.0 {
        interval_s
    } else {
        1.0
    }
}

/// Average rate of a burst spread over the dual interval, bps. Without a
/// dual interval the burst is spread over one second.
pub fn burst_rate_bps(volume_bytes: u64, interval_s: f64) -> f64 {
    volume_bytes as f64 * 8.0 / burst_window_s(interval_s)
}

/// Whether the burst fits in `capacity_bps × interval_s`.
pub fn burst_fits(volume_bytes: u64, capacity_bps: f64, interval_s: f64) -> bool {
    volume_bytes as f64 * 8.0 <= capacity_bps * burst_window_s(interval_s)
}
