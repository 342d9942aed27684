//! Interface bit-rate requirements and latency budgets.
//!
//! Fronthaul (split 7.2x) rate is the IQ stream `M·N·L·BTW·2 / T_s` plus a
//! control/signalling rate CR that scales linearly from a reference point.
//! Midhaul (F1, split 2) rate is a peak user rate PR scaled from a directional
//! reference point plus a constant control rate.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DimensioningError {
    #[error("unsupported subcarrier spacing {0} kHz (expected 15, 30, 60 or 120)")]
    UnsupportedScs(u32),
    #[error("invalid air interface: {0}")]
    InvalidConfig(String),
    #[error("unknown interface class `{0}`")]
    UnknownInterfaceClass(String),
    #[error("no standard PRB count for {bandwidth_mhz} MHz at {scs_khz} kHz; pass it explicitly")]
    NoStandardPrb { bandwidth_mhz: f64, scs_khz: u32 },
}

/// Bits per second.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DataRate(f64);

impl DataRate {
    pub const ZERO: DataRate = DataRate(0.0);

    pub fn bps(value: f64) -> Self {
        debug_assert!(value >= 0.0, "negative data rate {value}");
        DataRate(value)
    }

    pub fn mbps(value: f64) -> Self {
        Self::bps(value * 1e6)
    }

    pub fn gbps(value: f64) -> Self {
        Self::bps(value * 1e9)
    }

    pub fn as_bps(self) -> f64 {
        self.0
    }

    pub fn as_mbps(self) -> f64 {
        self.0 / 1e6
    }

    pub fn as_gbps(self) -> f64 {
        self.0 / 1e9
    }
}

impl std::ops::Add for DataRate {
    type Output = DataRate;
    fn add(self, rhs: Self) -> Self {
        DataRate(self.0 + rhs.0)
    }
}

impl std::iter::Sum for DataRate {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(DataRate::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for DataRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0 >= 1e9 {
            write!(f, "{:.3} Gbps", self.as_gbps())
        } else {
            write!(f, "{:.3} Mbps", self.as_mbps())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[serde(alias = "dl")]
    Downlink,
    #[serde(alias = "ul")]
    Uplink,
}

impl FromStr for Direction {
    type Err = DimensioningError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dl" | "downlink" => Ok(Direction::Downlink),
            "ul" | "uplink" => Ok(Direction::Uplink),
            other => Err(DimensioningError::InvalidConfig(format!("unknown direction `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AirInterfaceConfig {
    pub bandwidth_mhz: f64,
    pub scs_khz: u32,
    pub n_prb: u32,
    #[serde(default = "default_symbols")]
    pub n_symbols: u32,
    #[serde(default = "default_layers")]
    pub n_layers: u32,
    /// Bits per I or Q sample.
    #[serde(default = "default_bitwidth")]
    pub bitwidth: u32,
    /// Bits per modulation symbol (2, 4, 6 or 8).
    #[serde(default = "default_modulation")]
    pub modulation_order: u32,
    #[serde(default = "default_direction")]
    pub direction: Direction,
}

fn default_symbols() -> u32 {
    14
}
fn default_layers() -> u32 {
    1
}
fn default_bitwidth() -> u32 {
    14
}
fn default_modulation() -> u32 {
    6
}
fn default_direction() -> Direction {
    Direction::Downlink
}

impl Default for AirInterfaceConfig {
    /// Fully loaded 100 MHz downlink cell at 60 kHz, one layer, 14-bit IQ, 64-QAM.
    fn default() -> Self {
        Self::new(100.0, 60, 132)
    }
}

impl AirInterfaceConfig {
    pub fn new(bandwidth_mhz: f64, scs_khz: u32, n_prb: u32) -> Self {
        Self {
            bandwidth_mhz,
            scs_khz,
            n_prb,
            n_symbols: default_symbols(),
            n_layers: default_layers(),
            bitwidth: default_bitwidth(),
            modulation_order: default_modulation(),
            direction: default_direction(),
        }
    }

    pub fn with_layers(mut self, n_layers: u32) -> Self {
        self.n_layers = n_layers;
        self
    }

    pub fn with_modulation(mut self, modulation_order: u32) -> Self {
        self.modulation_order = modulation_order;
        self
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    /// Slot duration in seconds: 1 ms at 15 kHz, halving with each SCS doubling.
    pub fn slot_duration_s(&self) -> Result<f64, DimensioningError> {
        match self.scs_khz {
            15 | 30 | 60 | 120 => Ok(1e-3 * 15.0 / self.scs_khz as f64),
            other => Err(DimensioningError::UnsupportedScs(other)),
        }
    }

    pub fn subcarriers(&self) -> u64 {
        12 * self.n_prb as u64
    }

    pub fn validate(&self) -> Result<(), DimensioningError> {
        self.slot_duration_s()?;
        let bad = |m: &str| Err(DimensioningError::InvalidConfig(m.to_string()));
        if !(self.bandwidth_mhz > 0.0) || !self.bandwidth_mhz.is_finite() {
            return bad("bandwidth must be positive");
        }
        if self.n_prb == 0 {
            return bad("n_prb must be positive");
        }
        if self.n_symbols == 0 || self.n_layers == 0 || self.bitwidth == 0 {
            return bad("symbols, layers and bitwidth must be positive");
        }
        if !matches!(self.modulation_order, 2 | 4 | 6 | 8) {
            return bad("modulation order must be 2, 4, 6 or 8 bits per symbol");
        }
        Ok(())
    }
}

/// Maximum transmission bandwidth configuration (PRB count) for the common
/// channel bandwidths. 15/30 kHz use the FR1 table; 60 kHz uses the FR2 values
/// where FR2 defines the bandwidth and FR1 otherwise; 120 kHz is FR2.
pub fn standard_prb_count(bandwidth_mhz: f64, scs_khz: u32) -> Option<u32> {
    const SCS15: &[(u32, u32)] = &[
        (5, 25), (10, 52), (15, 79), (20, 106), (25, 133), (30, 160), (35, 188), (40, 216), (45, 242), (50, 270),
    ];
    const SCS30: &[(u32, u32)] = &[
        (5, 11), (10, 24), (15, 38), (20, 51), (25, 65), (30, 78), (35, 92), (40, 106), (45, 119), (50, 133),
        (60, 162), (70, 189), (80, 217), (90, 245), (100, 273),
    ];
    const SCS60: &[(u32, u32)] = &[
        (10, 11), (15, 18), (20, 24), (25, 31), (30, 38), (35, 44), (40, 51), (45, 58), (50, 66), (60, 79),
        (70, 93), (80, 107), (90, 121), (100, 132), (200, 264),
    ];
    const SCS120: &[(u32, u32)] = &[(50, 32), (100, 66), (200, 132), (400, 264)];
    if bandwidth_mhz.fract() != 0.0 {
        return None;
    }
    let table = match scs_khz {
        15 => SCS15,
        30 => SCS30,
        60 => SCS60,
        120 => SCS120,
        _ => return None,
    };
    table.iter().find(|(bw, _)| *bw as f64 == bandwidth_mhz).map(|&(_, prb)| prb)
}

/// Smallest subcarrier spacing whose standard table lists this bandwidth.
pub fn default_scs_for(bandwidth_mhz: f64) -> Option<u32> {
    [15, 30, 60, 120].into_iter().find(|&scs| standard_prb_count(bandwidth_mhz, scs).is_some())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateInterface {
    FronthaulControl,
    MidhaulPeakDl,
    MidhaulPeakUl,
    MidhaulControlDl,
    MidhaulControlUl,
}

/// Anchor point from which a rate is scaled linearly in bandwidth,
/// modulation order and layer count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateReference {
    pub interface: RateInterface,
    pub reference_rate: DataRate,
    pub reference_bandwidth_mhz: f64,
    pub reference_modulation: u32,
    pub reference_layers: u32,
}

impl RateReference {
    pub const fn anchor(interface: RateInterface) -> RateReference {
        let (rate, bw, modulation, layers) = match interface {
            RateInterface::FronthaulControl => (1.856e6, 20.0, 6, 2),
            RateInterface::MidhaulPeakDl => (150e6, 20.0, 6, 2),
            RateInterface::MidhaulPeakUl => (50e6, 20.0, 4, 1),
            RateInterface::MidhaulControlDl => (24e6, 20.0, 6, 2),
            RateInterface::MidhaulControlUl => (16e6, 20.0, 4, 1),
        };
        RateReference {
            interface,
            reference_rate: DataRate(rate),
            reference_bandwidth_mhz: bw,
            reference_modulation: modulation,
            reference_layers: layers,
        }
    }

    pub fn scaled(&self, cfg: &AirInterfaceConfig) -> DataRate {
        DataRate::bps(
            self.reference_rate.as_bps()
                * (cfg.bandwidth_mhz / self.reference_bandwidth_mhz)
                * (cfg.modulation_order as f64 / self.reference_modulation as f64)
                * (cfg.n_layers as f64 / self.reference_layers as f64),
        )
    }
}

/// IQ payload part of the fronthaul rate.
pub fn fronthaul_data_rate(cfg: &AirInterfaceConfig) -> Result<DataRate, DimensioningError> {
    let ts = cfg.slot_duration_s()?;
    let bits_per_slot =
        cfg.subcarriers() as f64 * cfg.n_symbols as f64 * cfg.n_layers as f64 * cfg.bitwidth as f64 * 2.0;
    Ok(DataRate::bps(bits_per_slot / ts))
}

pub fn fronthaul_control_rate(cfg: &AirInterfaceConfig) -> DataRate {
    RateReference::anchor(RateInterface::FronthaulControl).scaled(cfg)
}

pub fn fronthaul_bit_rate(cfg: &AirInterfaceConfig) -> Result<DataRate, DimensioningError> {
    Ok(fronthaul_data_rate(cfg)? + fronthaul_control_rate(cfg))
}

pub fn midhaul_peak_rate(cfg: &AirInterfaceConfig) -> DataRate {
    let anchor = match cfg.direction {
        Direction::Downlink => RateInterface::MidhaulPeakDl,
        Direction::Uplink => RateInterface::MidhaulPeakUl,
    };
    RateReference::anchor(anchor).scaled(cfg)
}

/// Midhaul control rate; constant per direction.
pub fn midhaul_control_rate(cfg: &AirInterfaceConfig) -> DataRate {
    let anchor = match cfg.direction {
        Direction::Downlink => RateInterface::MidhaulControlDl,
        Direction::Uplink => RateInterface::MidhaulControlUl,
    };
    RateReference::anchor(anchor).reference_rate
}

pub fn midhaul_bit_rate(cfg: &AirInterfaceConfig) -> DataRate {
    midhaul_peak_rate(cfg) + midhaul_control_rate(cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InterfaceClass {
    #[serde(rename = "OFH")]
    Ofh,
    #[serde(rename = "F1_U")]
    F1U,
    #[serde(rename = "F1_C")]
    F1C,
    #[serde(rename = "E1")]
    E1,
    #[serde(rename = "E2")]
    E2,
    #[serde(rename = "A1")]
    A1,
    #[serde(rename = "O1")]
    O1,
    #[serde(rename = "N2")]
    N2,
    #[serde(rename = "N3")]
    N3,
    #[serde(rename = "N4")]
    N4,
    #[serde(rename = "N6")]
    N6,
    #[serde(rename = "N9")]
    N9,
    #[serde(rename = "inter_RIC")]
    InterRic,
}

impl InterfaceClass {
    pub const ALL: [InterfaceClass; 13] = [
        InterfaceClass::Ofh,
        InterfaceClass::F1U,
        InterfaceClass::F1C,
        InterfaceClass::E1,
        InterfaceClass::E2,
        InterfaceClass::A1,
        InterfaceClass::O1,
        InterfaceClass::N2,
        InterfaceClass::N3,
        InterfaceClass::N4,
        InterfaceClass::N6,
        InterfaceClass::N9,
        InterfaceClass::InterRic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InterfaceClass::Ofh => "OFH",
            InterfaceClass::F1U => "F1_U",
            InterfaceClass::F1C => "F1_C",
            InterfaceClass::E1 => "E1",
            InterfaceClass::E2 => "E2",
            InterfaceClass::A1 => "A1",
            InterfaceClass::O1 => "O1",
            InterfaceClass::N2 => "N2",
            InterfaceClass::N3 => "N3",
            InterfaceClass::N4 => "N4",
            InterfaceClass::N6 => "N6",
            InterfaceClass::N9 => "N9",
            InterfaceClass::InterRic => "inter_RIC",
        }
    }

    /// Classes whose budget applies to the closed control loop
    /// (2 x one-way + processing) rather than the one-way delay.
    pub fn is_loop(self) -> bool {
        matches!(self, InterfaceClass::E2 | InterfaceClass::A1 | InterfaceClass::InterRic)
    }
}

impl fmt::Display for InterfaceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InterfaceClass {
    type Err = DimensioningError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim();
        let alias = match norm {
            "E2_nearRT_loop" => "E2",
            "A1_nonRT_loop" => "A1",
            other => other,
        };
        InterfaceClass::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(alias))
            .ok_or_else(|| DimensioningError::UnknownInterfaceClass(s.to_string()))
    }
}

pub const FRONTHAUL_MAX_ONE_WAY_S: f64 = 500e-6;
pub const MIDHAUL_WINDOW_S: (f64, f64) = (1.5e-3, 10e-3);
pub const F1C_WINDOW_S: (f64, f64) = (2e-3, 10e-3);
pub const NEAR_RT_LOOP_WINDOW_S: (f64, f64) = (10e-3, 1.0);
/// Non-RT loops are longer than one second with no upper bound.
pub const NON_RT_LOOP_MIN_S: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyBudget {
    pub interface_class: InterfaceClass,
    /// `None` means unbounded.
    pub max_one_way_s: Option<f64>,
    /// Range of one-way delays the interface is known to tolerate, lower edge informative.
    pub tolerance_window_s: Option<(f64, f64)>,
    /// Control-loop window (min, max); `max` may be infinite.
    pub loop_window_s: Option<(f64, f64)>,
}

impl LatencyBudget {
    fn unbounded(interface_class: InterfaceClass) -> Self {
        Self {
            interface_class,
            max_one_way_s: None,
            tolerance_window_s: None,
            loop_window_s: None,
        }
    }
}

pub fn latency_budget(class: InterfaceClass) -> LatencyBudget {
    let mut b = LatencyBudget::unbounded(class);
    match class {
        InterfaceClass::Ofh => b.max_one_way_s = Some(FRONTHAUL_MAX_ONE_WAY_S),
        InterfaceClass::F1U => {
            b.max_one_way_s = Some(MIDHAUL_WINDOW_S.1);
            b.tolerance_window_s = Some(MIDHAUL_WINDOW_S);
        }
        InterfaceClass::F1C => {
            b.max_one_way_s = Some(F1C_WINDOW_S.1);
            b.tolerance_window_s = Some(F1C_WINDOW_S);
        }
        InterfaceClass::E2 => b.loop_window_s = Some(NEAR_RT_LOOP_WINDOW_S),
        InterfaceClass::A1 => b.loop_window_s = Some((NON_RT_LOOP_MIN_S, f64::INFINITY)),
        _ => {}
    }
    b
}

/// Budget table with per-class one-way overrides from a scenario.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BudgetOverrides(pub BTreeMap<InterfaceClass, f64>);

impl BudgetOverrides {
    pub fn budget(&self, class: InterfaceClass) -> LatencyBudget {
        let mut b = latency_budget(class);
        if let Some(&v) = self.0.get(&class) {
            b.max_one_way_s = Some(v);
        }
        b
    }
}

/// Largest hop count `n` with `n * per_hop <= budget`.
pub fn max_hops_within_budget(budget_s: f64, per_hop_s: f64) -> u32 {
    assert!(per_hop_s > 0.0, "per-hop delay must be positive");
    // Relative slack absorbs representation error in exact multiples.
    let n = (budget_s / per_hop_s * (1.0 + 1e-12)).floor();
    n.max(0.0) as u32
}
