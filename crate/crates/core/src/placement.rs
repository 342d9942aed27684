//! Split options, RIC extensions, function placement and the logical links a
//! placement implies.
//!
//! Functions are grouped per gNB by instance number: gNB `i` owns `DU#i`,
//! `CU_CP#i`, `CU_UP#i` and either `RU#i` or, under option 1b, the four radio
//! units `RU#4i` .. `RU#4i+3`. Under options 3a/3b it also owns `UPF#i` and
//! `SEC#i`; otherwise all gNBs share the ground `UPF#0`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dimensioning::InterfaceClass;
use crate::dynamics::cluster::{form_clusters, ClusterPlan, ClusterRule};
use crate::feasibility::{node_usage, ResourceModel};
use crate::orbital::{GroundSite, SatId, SiteRole};
use crate::topology::{IslTopology, NodeId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlacementError {
    #[error("invalid placement: {}", format_violations(.0))]
    Invalid(Vec<RuleViolation>),
    #[error("insufficient nodes: {0}")]
    Insufficient(String),
    #[error("extension {ext} is not compatible with option {split}")]
    Incompatible { split: SplitOption, ext: RicExtension },
}

fn format_violations(v: &[RuleViolation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RuleViolation {
    pub rule: String,
    pub message: String,
}

impl RuleViolation {
    fn new(rule: &str, message: impl Into<String>) -> Self {
        Self {
            rule: rule.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for RuleViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.rule, self.message)
    }
}

macro_rules! string_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $s:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $s)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $s),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                $name::ALL
                    .iter()
                    .copied()
                    .find(|v| v.as_str().eq_ignore_ascii_case(s))
                    .ok_or_else(|| format!("unknown {} {s:?}", stringify!($name)))
            }
        }
    };
}

string_enum! {
    FunctionKind {
        Ru => "RU",
        Du => "DU",
        CuCp => "CU_CP",
        CuUp => "CU_UP",
        Upf => "UPF",
        Sec => "SEC",
        NearRtRic => "NearRT_RIC",
        NearRtRicDuPart => "NearRT_RIC_DU_part",
        NearRtRicCuPart => "NearRT_RIC_CU_part",
        NonRtRic => "NonRT_RIC",
        NonRtRicClusterLeader => "NonRT_RIC_cluster_leader",
        Smo => "SMO",
        CoreCp => "Core_CP",
        DataNetwork => "DataNetwork",
    }
}

impl FunctionKind {
    /// Functions that only ever run on the ground.
    pub fn ground_only(self) -> bool {
        matches!(
            self,
            FunctionKind::Smo | FunctionKind::NonRtRic | FunctionKind::CoreCp | FunctionKind::DataNetwork
        )
    }

    pub fn is_near_rt_ric(self) -> bool {
        matches!(
            self,
            FunctionKind::NearRtRic | FunctionKind::NearRtRicDuPart | FunctionKind::NearRtRicCuPart
        )
    }
}

string_enum! {
    SplitOption {
        O1a => "1a",
        O1b => "1b",
        O2a => "2a",
        O2bRuSeparate => "2b_ru_separate",
        O2bCuSeparate => "2b_cu_separate",
        O3a => "3a",
        O3b => "3b",
    }
}

impl SplitOption {
    /// CU on the ground (options 1a/1b).
    pub fn ground_cu(self) -> bool {
        matches!(self, SplitOption::O1a | SplitOption::O1b)
    }

    /// UPF on board (options 3a/3b).
    pub fn space_upf(self) -> bool {
        matches!(self, SplitOption::O3a | SplitOption::O3b)
    }
}

string_enum! {
    RicExtension {
        None => "none",
        Ext1 => "ext1",
        Ext2 => "ext2",
        Ext3 => "ext3",
    }
}

#[allow(clippy::derivable_impls)]
impl Default for RicExtension {
    fn default() -> Self {
        RicExtension::None
    }
}

/// Extension I needs a ground CU; Extensions II and III need a space CU.
pub fn compatible(split: SplitOption, ext: RicExtension) -> bool {
    match ext {
        RicExtension::None => true,
        RicExtension::Ext1 => split.ground_cu(),
        RicExtension::Ext2 | RicExtension::Ext3 => !split.ground_cu(),
    }
}

/// A function instance, written `KIND#n` (a bare `KIND` means instance 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct NetworkFunction {
    pub kind: FunctionKind,
    pub instance: u32,
}

impl NetworkFunction {
    pub const fn new(kind: FunctionKind, instance: u32) -> Self {
        Self { kind, instance }
    }
}

impl fmt::Display for NetworkFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.kind, self.instance)
    }
}

impl FromStr for NetworkFunction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, inst) = match s.split_once('#') {
            Some((k, i)) => (k, i.parse().map_err(|_| format!("bad instance number in {s:?}"))?),
            None => (s, 0),
        };
        Ok(Self::new(kind.parse()?, inst))
    }
}

impl TryFrom<String> for NetworkFunction {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<NetworkFunction> for String {
    fn from(f: NetworkFunction) -> String {
        f.to_string()
    }
}

use FunctionKind as K;

fn nf(kind: FunctionKind, instance: u32) -> NetworkFunction {
    NetworkFunction::new(kind, instance)
}

/// Concrete placement: every function pinned to a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementSpec {
    pub split: SplitOption,
    #[serde(default)]
    pub extension: RicExtension,
    pub assignments: BTreeMap<NetworkFunction, NodeId>,
    /// E2 node -> serving near-RT RIC. Implied for every extension except II.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub e2_bindings: BTreeMap<NetworkFunction, NetworkFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_plan: Option<ClusterPlan>,
    #[serde(default)]
    pub split_cu_planes: bool,
}

impl PlacementSpec {
    pub fn node_of(&self, f: NetworkFunction) -> Option<&NodeId> {
        self.assignments.get(&f)
    }

    pub fn instances(&self, kind: FunctionKind) -> Vec<u32> {
        self.assignments.keys().filter(|f| f.kind == kind).map(|f| f.instance).collect()
    }

    pub fn gnb_count(&self) -> u32 {
        self.instances(K::Du).len() as u32
    }

    /// Radio units belonging to `DU#du`.
    pub fn rus_of(&self, du: u32) -> Vec<NetworkFunction> {
        let range = if self.split == SplitOption::O1b { 4 * du..4 * du + 4 } else { du..du + 1 };
        range.map(|i| nf(K::Ru, i)).filter(|f| self.assignments.contains_key(f)).collect()
    }

    pub fn upf_of(&self, gnb: u32) -> NetworkFunction {
        nf(K::Upf, if self.split.space_upf() { gnb } else { 0 })
    }

    /// E2 terminating function (DU and CU-CP) -> serving RIC function.
    pub fn e2_binding(&self, e2_node: NetworkFunction) -> Option<NetworkFunction> {
        if let Some(r) = self.e2_bindings.get(&e2_node) {
            return Some(*r);
        }
        let i = e2_node.instance;
        match (self.extension, e2_node.kind) {
            (RicExtension::None, _) => Some(nf(K::NearRtRic, 0)),
            (RicExtension::Ext1, K::Du) => Some(nf(K::NearRtRicDuPart, i)),
            (RicExtension::Ext1, _) => Some(nf(K::NearRtRicCuPart, i)),
            (RicExtension::Ext3, _) => Some(nf(K::NearRtRic, i)),
            (RicExtension::Ext2, _) => None,
        }
    }

    pub fn e2_nodes(&self) -> Vec<NetworkFunction> {
        let mut v: Vec<_> = self
            .assignments
            .keys()
            .filter(|f| matches!(f.kind, K::Du | K::CuCp))
            .copied()
            .collect();
        v.sort_by_key(|f| (f.instance, f.kind));
        v
    }

    /// Functions hosted on each node.
    pub fn functions_by_node(&self) -> BTreeMap<NodeId, Vec<NetworkFunction>> {
        let mut out: BTreeMap<NodeId, Vec<NetworkFunction>> = BTreeMap::new();
        for (f, n) in &self.assignments {
            out.entry(n.clone()).or_default().push(*f);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    Local,
    Feeder,
    IslPath,
    Terrestrial,
}

impl Segment {
    pub fn between(a: &NodeId, b: &NodeId) -> Segment {
        match (a, b) {
            _ if a == b => Segment::Local,
            (NodeId::Sat(_), NodeId::Sat(_)) => Segment::IslPath,
            (NodeId::Site(_), NodeId::Site(_)) => Segment::Terrestrial,
            _ => Segment::Feeder,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Segment::Local => "local",
            Segment::Feeder => "feeder",
            Segment::IslPath => "isl_path",
            Segment::Terrestrial => "terrestrial",
        }
    }
}

impl fmt::Display for Segment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Segment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Segment::Local, Segment::Feeder, Segment::IslPath, Segment::Terrestrial]
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| format!("unknown segment {s:?}"))
    }
}

/// Which loop bound, if any, a link is checked against instead of a one-way budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LoopCheck {
    #[default]
    None,
    /// Near-RT control loop (strict or relaxed edge of the window).
    NearRt,
    /// Ground-side RIC coordination loop.
    GroundPart,
    /// Cluster leader to follower loop.
    Follower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogicalLink {
    pub id: String,
    pub from: NetworkFunction,
    pub to: NetworkFunction,
    pub from_node: NodeId,
    pub to_node: NodeId,
    pub interface_class: InterfaceClass,
    pub segment: Segment,
    #[serde(default)]
    pub loop_check: LoopCheck,
}

/// Every logical link the placement requires, in a deterministic order.
pub fn derive_logical_links(spec: &PlacementSpec) -> Result<Vec<LogicalLink>, PlacementError> {
    let violations = validate_placement(spec);
    if !violations.is_empty() {
        return Err(PlacementError::Invalid(violations));
    }
    let mut links = Vec::new();
    let mut push = |from: NetworkFunction, to: NetworkFunction, class: InterfaceClass, loop_check: LoopCheck| {
        let (a, b) = (spec.assignments[&from].clone(), spec.assignments[&to].clone());
        links.push(LogicalLink {
            id: format!("{class}:{from}->{to}"),
            segment: Segment::between(&a, &b),
            from,
            to,
            from_node: a,
            to_node: b,
            interface_class: class,
            loop_check,
        });
    };
    use InterfaceClass as C;
    let gnbs = spec.instances(K::Du);
    let core = nf(K::CoreCp, 0);
    for &i in &gnbs {
        let du = nf(K::Du, i);
        for ru in spec.rus_of(i) {
            push(ru, du, C::Ofh, LoopCheck::None);
        }
        push(du, nf(K::CuCp, i), C::F1C, LoopCheck::None);
        push(du, nf(K::CuUp, i), C::F1U, LoopCheck::None);
        if spec.split_cu_planes {
            push(nf(K::CuCp, i), nf(K::CuUp, i), C::E1, LoopCheck::None);
        }
        push(nf(K::CuCp, i), core, C::N2, LoopCheck::None);
        push(nf(K::CuUp, i), spec.upf_of(i), C::N3, LoopCheck::None);
    }
    let upfs = spec.instances(K::Upf);
    for &u in &upfs {
        push(core, nf(K::Upf, u), C::N4, LoopCheck::None);
        push(nf(K::Upf, u), nf(K::DataNetwork, 0), C::N6, LoopCheck::None);
        if spec.assignments.contains_key(&nf(K::Sec, u)) {
            push(nf(K::Upf, u), nf(K::Sec, u), C::N6, LoopCheck::None);
        }
    }
    for (k, &a) in upfs.iter().enumerate() {
        for &b in &upfs[k + 1..] {
            push(nf(K::Upf, a), nf(K::Upf, b), C::N9, LoopCheck::None);
        }
    }
    for e2 in spec.e2_nodes() {
        let ric = spec.e2_binding(e2).expect("validated binding");
        let check = if ric.kind == K::NearRtRicCuPart { LoopCheck::GroundPart } else { LoopCheck::NearRt };
        push(e2, ric, C::E2, check);
    }
    let nonrt = nf(K::NonRtRic, 0);
    let smo = nf(K::Smo, 0);
    let mut managed: Vec<NetworkFunction> = Vec::new();
    match spec.extension {
        RicExtension::None => {
            push(nonrt, nf(K::NearRtRic, 0), C::A1, LoopCheck::None);
            managed.push(nf(K::NearRtRic, 0));
        }
        RicExtension::Ext1 => {
            for &i in &gnbs {
                let (d, c) = (nf(K::NearRtRicDuPart, i), nf(K::NearRtRicCuPart, i));
                push(d, c, C::InterRic, LoopCheck::GroundPart);
                push(nonrt, c, C::A1, LoopCheck::None);
                managed.extend([d, c]);
            }
        }
        RicExtension::Ext2 => {
            let rics = spec.instances(K::NearRtRic);
            for (k, &a) in rics.iter().enumerate() {
                for &b in &rics[k + 1..] {
                    push(nf(K::NearRtRic, a), nf(K::NearRtRic, b), C::InterRic, LoopCheck::None);
                }
            }
            for &r in &rics {
                push(nonrt, nf(K::NearRtRic, r), C::A1, LoopCheck::None);
                managed.push(nf(K::NearRtRic, r));
            }
        }
        RicExtension::Ext3 => {
            let plan = spec.cluster_plan.as_ref().expect("validated plan");
            for c in &plan.clusters {
                push(nonrt, nf(K::NonRtRicClusterLeader, c.id), C::A1, LoopCheck::None);
                managed.push(nf(K::NonRtRicClusterLeader, c.id));
            }
            for r in spec.instances(K::NearRtRic) {
                let ric = nf(K::NearRtRic, r);
                if let NodeId::Sat(s) = &spec.assignments[&ric] {
                    if let Some(c) = plan.cluster_of(*s) {
                        push(nf(K::NonRtRicClusterLeader, c.id), ric, C::A1, LoopCheck::Follower);
                    }
                }
                managed.push(ric);
            }
        }
    }
    for &i in &gnbs {
        push(smo, nf(K::Du, i), C::O1, LoopCheck::None);
        push(smo, nf(K::CuCp, i), C::O1, LoopCheck::None);
        if spec.split_cu_planes {
            push(smo, nf(K::CuUp, i), C::O1, LoopCheck::None);
        }
    }
    for f in managed {
        push(smo, f, C::O1, LoopCheck::None);
    }
    Ok(links)
}

/// Structural rule check. Returns every violated rule; empty means valid.
pub fn validate_placement(spec: &PlacementSpec) -> Vec<RuleViolation> {
    let mut v = Vec::new();
    let split = spec.split;
    let node = |f: NetworkFunction| spec.assignments.get(&f);
    let on_sat = |f: NetworkFunction| node(f).is_some_and(NodeId::is_sat);
    let same = |a: NetworkFunction, b: NetworkFunction| node(a).is_some() && node(a) == node(b);

    if !compatible(split, spec.extension) {
        let rule = if spec.extension == RicExtension::Ext1 { "ext1-requires-ground-cu" } else { "ext-requires-space-cu" };
        v.push(RuleViolation::new(rule, format!("{} cannot be combined with option {split}", spec.extension)));
    }
    for (f, n) in &spec.assignments {
        if f.kind.ground_only() && n.is_sat() {
            v.push(RuleViolation::new("ground-only-function", format!("{f} must run on a ground site, not {n}")));
        }
        if matches!(f.kind, K::NearRtRicDuPart | K::NearRtRicCuPart) && spec.extension != RicExtension::Ext1 {
            v.push(RuleViolation::new("ext1-parts-only", format!("{f} exists only under ext1")));
        }
        if f.kind == K::NearRtRic && spec.extension == RicExtension::Ext1 {
            v.push(RuleViolation::new("ext1-parts-only", format!("{f}: ext1 uses split RIC parts")));
        }
        if f.kind == K::NonRtRicClusterLeader && spec.extension != RicExtension::Ext3 {
            v.push(RuleViolation::new("ext3-leader-only", format!("{f} exists only under ext3")));
        }
    }

    let gnbs = spec.instances(K::Du);
    let mut required: Vec<NetworkFunction> = vec![nf(K::CoreCp, 0), nf(K::Smo, 0), nf(K::NonRtRic, 0), nf(K::DataNetwork, 0)];
    if gnbs.is_empty() {
        required.push(nf(K::Du, 0));
    }
    for &i in &gnbs {
        required.extend([nf(K::CuCp, i), nf(K::CuUp, i), spec.upf_of(i)]);
        if split != SplitOption::O1b {
            required.push(nf(K::Ru, i));
        }
        if split.space_upf() {
            required.push(nf(K::Sec, i));
        }
        match spec.extension {
            RicExtension::None => required.push(nf(K::NearRtRic, 0)),
            RicExtension::Ext1 => required.extend([nf(K::NearRtRicDuPart, i), nf(K::NearRtRicCuPart, i)]),
            RicExtension::Ext2 => {}
            RicExtension::Ext3 => required.push(nf(K::NearRtRic, i)),
        }
    }
    required.sort();
    required.dedup();
    for f in &required {
        if !spec.assignments.contains_key(f) {
            v.push(RuleViolation::new("missing-function", format!("{f} is not assigned")));
        }
    }

    for &i in &gnbs {
        let (du, cp, up) = (nf(K::Du, i), nf(K::CuCp, i), nf(K::CuUp, i));
        let rus = spec.rus_of(i);
        if !on_sat(du) {
            v.push(RuleViolation::new("du-in-space", format!("{du} must be on a satellite")));
        }
        if !spec.split_cu_planes && node(cp).is_some() && node(up).is_some() && !same(cp, up) {
            v.push(RuleViolation::new("cu-planes-colocated", format!("{cp} and {up} differ but CU planes are not split")));
        }
        match split {
            SplitOption::O1a | SplitOption::O1b => {
                for cu in [cp, up] {
                    if node(cu).is_some_and(NodeId::is_sat) {
                        v.push(RuleViolation::new(&format!("{}-cu-ground", split.as_str()), format!("{cu} must be on the ground")));
                    }
                }
                if split == SplitOption::O1a && rus.first().is_some_and(|ru| !same(*ru, du)) {
                    v.push(RuleViolation::new("1a-ru-du-colocated", format!("RU#{i} and {du} must share a satellite")));
                }
                if split == SplitOption::O1b {
                    if rus.len() != 4 {
                        v.push(RuleViolation::new("1b-ru-count", format!("{du} serves {} RUs, expected 4", rus.len())));
                    }
                    let mut hosts: BTreeSet<&NodeId> = BTreeSet::new();
                    for ru in &rus {
                        let n = &spec.assignments[ru];
                        if !n.is_sat() || Some(n) == node(du) || !hosts.insert(n) {
                            v.push(RuleViolation::new("1b-ru-distinct-sats", format!("{ru} must be on its own satellite, apart from {du}")));
                        }
                    }
                }
            }
            SplitOption::O2a | SplitOption::O3a => {
                let rule = if split == SplitOption::O2a { "2a-colocated" } else { "3a-colocated" };
                let mut group: Vec<NetworkFunction> = rus.clone();
                group.extend([cp, up]);
                if split == SplitOption::O3a {
                    group.extend([nf(K::Upf, i), nf(K::Sec, i)]);
                }
                for f in group {
                    if node(f).is_some() && !same(f, du) {
                        v.push(RuleViolation::new(rule, format!("{f} must share {du}'s satellite")));
                    }
                }
            }
            SplitOption::O2bRuSeparate => {
                for ru in &rus {
                    if !on_sat(*ru) || same(*ru, du) {
                        v.push(RuleViolation::new("2b-ru-separate", format!("{ru} must be on a different satellite than {du}")));
                    }
                }
                if node(cp).is_some() && !same(cp, du) {
                    v.push(RuleViolation::new("2b-ru-separate", format!("{cp} must share {du}'s satellite")));
                }
            }
            SplitOption::O2bCuSeparate => {
                if !on_sat(cp) || same(cp, du) {
                    v.push(RuleViolation::new("2b-cu-separate", format!("{cp} must be on a different satellite than {du}")));
                }
                for ru in &rus {
                    if !same(*ru, du) {
                        v.push(RuleViolation::new("2b-cu-separate", format!("{ru} must share {du}'s satellite")));
                    }
                }
            }
            SplitOption::O3b => {
                let upf = nf(K::Upf, i);
                if !on_sat(upf) || same(upf, du) || same(upf, cp) || same(upf, up) {
                    v.push(RuleViolation::new("3b-distinct-sats", format!("{upf} must be on a different satellite than the gNB")));
                }
                for ru in &rus {
                    if !same(*ru, du) {
                        v.push(RuleViolation::new("3b-gnb-colocated", format!("{ru} must share {du}'s satellite")));
                    }
                }
            }
        }
        if !split.ground_cu() && node(cp).is_some() && !on_sat(cp) {
            v.push(RuleViolation::new("cu-in-space", format!("{cp} must be on a satellite under option {split}")));
        }
        if split.space_upf() && node(nf(K::Sec, i)).is_some() && !same(nf(K::Sec, i), nf(K::Upf, i)) {
            v.push(RuleViolation::new("sec-with-upf", format!("SEC#{i} must share UPF#{i}'s satellite")));
        }
        match spec.extension {
            RicExtension::Ext1 => {
                let (d, c) = (nf(K::NearRtRicDuPart, i), nf(K::NearRtRicCuPart, i));
                if node(d).is_some() && !same(d, du) {
                    v.push(RuleViolation::new("ext1-du-part", format!("{d} must share {du}'s satellite")));
                }
                if node(c).is_some() && !same(c, cp) {
                    v.push(RuleViolation::new("ext1-cu-part", format!("{c} must share {cp}'s site")));
                }
            }
            RicExtension::Ext3 => {
                let r = nf(K::NearRtRic, i);
                if node(r).is_some() && !same(r, du) {
                    v.push(RuleViolation::new("ext3-ric-colocated", format!("{r} must share {du}'s satellite")));
                }
            }
            RicExtension::Ext2 => {
                for f in spec.e2_nodes().into_iter().filter(|f| f.instance == i) {
                    match spec.e2_bindings.get(&f) {
                        Some(r) if r.kind == K::NearRtRic && spec.assignments.contains_key(r) => {
                            if !on_sat(*r) {
                                v.push(RuleViolation::new("ext2-ric-in-space", format!("{r} must be on a satellite")));
                            }
                        }
                        Some(r) => v.push(RuleViolation::new("e2-binding", format!("{f} is bound to unknown RIC {r}"))),
                        None => v.push(RuleViolation::new("e2-binding", format!("{f} has no serving near-RT RIC"))),
                    }
                }
            }
            RicExtension::None => {}
        }
    }
    if spec.extension == RicExtension::Ext2 && spec.instances(K::NearRtRic).is_empty() {
        v.push(RuleViolation::new("missing-function", "ext2 needs at least one NearRT_RIC"));
    }
    if spec.extension == RicExtension::Ext3 {
        match &spec.cluster_plan {
            None => v.push(RuleViolation::new("ext3-cluster-plan", "ext3 needs a cluster plan")),
            Some(plan) => {
                for c in &plan.clusters {
                    let f = nf(K::NonRtRicClusterLeader, c.id);
                    if node(f) != Some(&NodeId::Sat(c.leader)) {
                        v.push(RuleViolation::new("ext3-cluster-plan", format!("{f} must run on leader {}", c.leader)));
                    }
                }
            }
        }
    }
    v.sort();
    v.dedup();
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComputeClass {
    Light,
    Gnb,
    GnbUpf,
}

/// Qualitative per-option properties.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptionProfile {
    pub split: SplitOption,
    pub extension: RicExtension,
    pub feeder_carries: BTreeSet<InterfaceClass>,
    pub requires_dual_feeder: bool,
    pub new_fronthaul_needed: bool,
    pub onboard_compute_class: ComputeClass,
    pub local_breakout: bool,
    pub near_rt_ric_in_space: bool,
    pub mesh_n9: bool,
}

pub fn option_profile(split: SplitOption, ext: RicExtension) -> Result<OptionProfile, PlacementError> {
    if !compatible(split, ext) {
        return Err(PlacementError::Incompatible { split, ext });
    }
    use InterfaceClass as C;
    let feeder_carries = match split {
        SplitOption::O1a | SplitOption::O1b => BTreeSet::from([C::F1U, C::F1C]),
        SplitOption::O2a | SplitOption::O2bRuSeparate | SplitOption::O2bCuSeparate => BTreeSet::from([C::N2, C::N3]),
        SplitOption::O3a | SplitOption::O3b => BTreeSet::from([C::N2, C::N4]),
    };
    Ok(OptionProfile {
        split,
        extension: ext,
        feeder_carries,
        requires_dual_feeder: split.ground_cu(),
        new_fronthaul_needed: matches!(split, SplitOption::O1b | SplitOption::O2bRuSeparate),
        onboard_compute_class: if split.ground_cu() {
            ComputeClass::Light
        } else if split.space_upf() {
            ComputeClass::GnbUpf
        } else {
            ComputeClass::Gnb
        },
        local_breakout: split.space_upf(),
        near_rt_ric_in_space: matches!(ext, RicExtension::Ext1 | RicExtension::Ext2 | RicExtension::Ext3),
        mesh_n9: split.space_upf(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    /// First gNB goes on this satellite.
    Sat(SatId),
    /// Candidates are ranked by distance to this site.
    NearestToSite(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterTemplate {
    #[serde(default = "default_cluster_rule")]
    pub rule: ClusterRule,
    #[serde(default = "default_cluster_size")]
    pub target_size: u32,
}

fn default_cluster_rule() -> ClusterRule {
    ClusterRule::ByPlaneGroups
}

fn default_cluster_size() -> u32 {
    3
}

impl Default for ClusterTemplate {
    fn default() -> Self {
        Self {
            rule: default_cluster_rule(),
            target_size: default_cluster_size(),
        }
    }
}

/// Placement as written in a scenario: an option/extension pair plus shape
/// parameters, or explicit assignments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementTemplate {
    pub split: SplitOption,
    #[serde(default)]
    pub extension: RicExtension,
    #[serde(default = "one")]
    pub gnb_count: u32,
    #[serde(default)]
    pub split_cu_planes: bool,
    /// ISL hop distance of the CU under 2b_cu_separate.
    #[serde(default = "two")]
    pub cu_hops: u32,
    /// ISL hop distance of the RU under 2b_ru_separate.
    #[serde(default = "one")]
    pub ru_hops: u32,
    /// ISL hop distance of the UPF under 3b.
    #[serde(default = "one")]
    pub upf_hops: u32,
    /// Space near-RT RICs deployed under ext2.
    #[serde(default = "three")]
    pub near_rt_ric_count: u32,
    #[serde(default)]
    pub cluster: ClusterTemplate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<Anchor>,
    /// Explicit assignments; when present no automatic placement is done.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignments: Option<BTreeMap<NetworkFunction, NodeId>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub e2_bindings: BTreeMap<NetworkFunction, NetworkFunction>,
}

fn one() -> u32 {
    1
}

fn two() -> u32 {
    2
}

fn three() -> u32 {
    3
}

impl PlacementTemplate {
    pub fn new(split: SplitOption, extension: RicExtension) -> Self {
        Self {
            split,
            extension,
            gnb_count: 1,
            split_cu_planes: false,
            cu_hops: 2,
            ru_hops: 1,
            upf_hops: 1,
            near_rt_ric_count: 3,
            cluster: ClusterTemplate::default(),
            anchor: None,
            assignments: None,
            e2_bindings: BTreeMap::new(),
        }
    }
}

/// Concretises a template on a topology snapshot. Satellites are taken
/// lowest id first (or nearest first when anchored to a site).
pub fn assign_functions(
    template: &PlacementTemplate,
    topology: &IslTopology,
    sites: &[GroundSite],
    resources: &ResourceModel,
) -> Result<PlacementSpec, PlacementError> {
    let split = template.split;
    let ext = template.extension;
    if !compatible(split, ext) {
        return Err(PlacementError::Invalid(vec![RuleViolation::new(
            if ext == RicExtension::Ext1 { "ext1-requires-ground-cu" } else { "ext-requires-space-cu" },
            format!("{ext} cannot be combined with option {split}"),
        )]));
    }
    let mut spec = PlacementSpec {
        split,
        extension: ext,
        assignments: BTreeMap::new(),
        e2_bindings: template.e2_bindings.clone(),
        cluster_plan: None,
        split_cu_planes: template.split_cu_planes,
    };
    if let Some(explicit) = &template.assignments {
        spec.assignments = explicit.clone();
        if ext == RicExtension::Ext3 {
            attach_clusters(&mut spec, template, topology, resources);
        }
        return Ok(spec);
    }

    let mut sorted_sites: Vec<&GroundSite> = sites.iter().collect();
    sorted_sites.sort_by(|a, b| a.site_id.cmp(&b.site_id));
    let first_with = |role: SiteRole| sorted_sites.iter().find(|s| s.role == role).map(|s| s.site_id.clone());
    let gateway = match &template.anchor {
        Some(Anchor::NearestToSite(id)) if sites.iter().any(|s| &s.site_id == id && s.role == SiteRole::Gateway) => Some(id.clone()),
        _ => first_with(SiteRole::Gateway),
    }
    .ok_or_else(|| PlacementError::Insufficient("no gateway site".into()))?;
    let core = first_with(SiteRole::Core).unwrap_or_else(|| gateway.clone());
    let smo = first_with(SiteRole::Smo).unwrap_or_else(|| core.clone());
    let dn = first_with(SiteRole::DataNetwork).unwrap_or_else(|| core.clone());

    let mut candidates: Vec<SatId> = topology.sat_ids().collect();
    match &template.anchor {
        Some(Anchor::Sat(s)) => {
            if !candidates.contains(s) {
                return Err(PlacementError::Insufficient(format!("anchor {s} is not in the constellation")));
            }
            candidates.retain(|c| c != s);
            candidates.insert(0, *s);
        }
        Some(Anchor::NearestToSite(id)) => {
            let site = topology
                .site(id)
                .ok_or_else(|| PlacementError::Insufficient(format!("anchor site {id} is unknown")))?;
            let pos = topology.site_position(site);
            candidates.sort_by(|a, b| {
                let da = (topology.position(*a).expect("known sat") - pos).norm();
                let db = (topology.position(*b).expect("known sat") - pos).norm();
                da.total_cmp(&db).then_with(|| a.cmp(b))
            });
        }
        None => {}
    }

    let site = |id: &str| NodeId::site(id);
    let mut used: BTreeSet<SatId> = BTreeSet::new();
    for i in 0..template.gnb_count {
        let mut chosen = None;
        for &c in &candidates {
            if used.contains(&c) {
                continue;
            }
            if let Some(layout) = gnb_layout(template, topology, c, &used) {
                chosen = Some(layout);
                break;
            }
        }
        let layout = chosen.ok_or_else(|| {
            PlacementError::Insufficient(format!("no satellite can host gNB {i} under option {split}"))
        })?;
        used.extend(layout.sats());
        let host = NodeId::Sat(layout.host);
        let a = &mut spec.assignments;
        a.insert(nf(K::Du, i), host.clone());
        match split {
            SplitOption::O1b => {
                for (k, ru) in layout.rus.iter().enumerate() {
                    a.insert(nf(K::Ru, 4 * i + k as u32), NodeId::Sat(*ru));
                }
            }
            _ => {
                a.insert(nf(K::Ru, i), NodeId::Sat(layout.rus[0]));
            }
        }
        let cu = if split.ground_cu() { site(&gateway) } else { NodeId::Sat(layout.cu) };
        a.insert(nf(K::CuCp, i), cu.clone());
        a.insert(nf(K::CuUp, i), cu.clone());
        if split.space_upf() {
            a.insert(nf(K::Upf, i), NodeId::Sat(layout.upf));
            a.insert(nf(K::Sec, i), NodeId::Sat(layout.upf));
        }
        match ext {
            RicExtension::Ext1 => {
                a.insert(nf(K::NearRtRicDuPart, i), host.clone());
                a.insert(nf(K::NearRtRicCuPart, i), cu);
            }
            RicExtension::Ext3 => {
                a.insert(nf(K::NearRtRic, i), host.clone());
            }
            _ => {}
        }
    }
    let a = &mut spec.assignments;
    if !split.space_upf() {
        a.insert(nf(K::Upf, 0), site(&core));
    }
    a.insert(nf(K::CoreCp, 0), site(&core));
    a.insert(nf(K::Smo, 0), site(&smo));
    a.insert(nf(K::NonRtRic, 0), site(&smo));
    a.insert(nf(K::DataNetwork, 0), site(&dn));
    match ext {
        RicExtension::None => {
            a.insert(nf(K::NearRtRic, 0), site(&gateway));
        }
        RicExtension::Ext2 => place_space_rics(&mut spec, template, topology, &used)?,
        RicExtension::Ext3 => attach_clusters(&mut spec, template, topology, resources),
        RicExtension::Ext1 => {}
    }
    Ok(spec)
}

struct GnbLayout {
    host: SatId,
    rus: Vec<SatId>,
    cu: SatId,
    upf: SatId,
}

impl GnbLayout {
    fn sats(&self) -> BTreeSet<SatId> {
        let mut s: BTreeSet<SatId> = self.rus.iter().copied().collect();
        s.extend([self.host, self.cu, self.upf]);
        s
    }
}

fn at_hops(topology: &IslTopology, from: SatId, hops: u32, used: &BTreeSet<SatId>) -> Option<SatId> {
    topology
        .hop_distances(from)
        .into_iter()
        .find(|(s, d)| *d == hops && !used.contains(s))
        .map(|(s, _)| s)
}

fn gnb_layout(t: &PlacementTemplate, topology: &IslTopology, c: SatId, used: &BTreeSet<SatId>) -> Option<GnbLayout> {
    let mut l = GnbLayout {
        host: c,
        rus: vec![c],
        cu: c,
        upf: c,
    };
    match t.split {
        SplitOption::O1b => {
            let mut n: Vec<SatId> = topology.isl_neighbors(c).into_iter().filter(|s| !used.contains(s)).collect();
            n.sort();
            n.dedup();
            if n.len() < 4 {
                return None;
            }
            l.rus = n[..4].to_vec();
        }
        SplitOption::O2bRuSeparate => l.rus = vec![at_hops(topology, c, t.ru_hops.max(1), used)?],
        SplitOption::O2bCuSeparate => l.cu = at_hops(topology, c, t.cu_hops.max(1), used)?,
        SplitOption::O3b => l.upf = at_hops(topology, c, t.upf_hops.max(1), used)?,
        _ => {}
    }
    Some(l)
}

/// Ext II: RICs go on the nearest satellites (BFS order from the first DU)
/// that host no E2 node; each E2 node binds to its lowest-delay RIC.
fn place_space_rics(
    spec: &mut PlacementSpec,
    template: &PlacementTemplate,
    topology: &IslTopology,
    used: &BTreeSet<SatId>,
) -> Result<(), PlacementError> {
    let Some(NodeId::Sat(origin)) = spec.assignments.get(&nf(K::Du, 0)).cloned() else {
        return Err(PlacementError::Insufficient("ext2 needs a space DU".into()));
    };
    let mut order: Vec<(u32, SatId)> = topology.hop_distances(origin).into_iter().map(|(s, d)| (d, s)).collect();
    order.sort();
    let hosts: Vec<SatId> = order
        .into_iter()
        .map(|(_, s)| s)
        .filter(|s| !used.contains(s))
        .take(template.near_rt_ric_count as usize)
        .collect();
    if hosts.is_empty() || template.near_rt_ric_count == 0 {
        return Err(PlacementError::Insufficient("no satellite available for a near-RT RIC".into()));
    }
    for (k, s) in hosts.iter().enumerate() {
        spec.assignments.insert(nf(K::NearRtRic, k as u32), NodeId::Sat(*s));
    }
    for e2 in spec.e2_nodes() {
        if spec.e2_bindings.contains_key(&e2) {
            continue;
        }
        let from = spec.assignments[&e2].clone();
        let sp = topology.shortest_paths_from(&from).ok();
        let best = hosts
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let d = sp.as_ref().and_then(|p| p.delay_to(&NodeId::Sat(*s))).unwrap_or(f64::INFINITY);
                (d, k as u32)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, k)| k)
            .unwrap_or(0);
        spec.e2_bindings.insert(e2, nf(K::NearRtRic, best));
    }
    Ok(())
}

/// Ext III: cluster the whole constellation and pin one leader function per cluster.
fn attach_clusters(spec: &mut PlacementSpec, template: &PlacementTemplate, topology: &IslTopology, resources: &ResourceModel) {
    let residual = residual_compute(spec, topology, resources);
    let plan = form_clusters(topology, template.cluster.rule, template.cluster.target_size, &residual);
    spec.assignments.retain(|f, _| f.kind != K::NonRtRicClusterLeader);
    for c in &plan.clusters {
        spec.assignments.insert(nf(K::NonRtRicClusterLeader, c.id), NodeId::Sat(c.leader));
    }
    spec.cluster_plan = Some(plan);
}

/// Compute budget left on each satellite after the functions already placed.
pub fn residual_compute(spec: &PlacementSpec, topology: &IslTopology, resources: &ResourceModel) -> BTreeMap<SatId, f64> {
    let by_node = spec.functions_by_node();
    topology
        .sat_ids()
        .map(|s| {
            let used = by_node
                .get(&NodeId::Sat(s))
                .map_or(0.0, |fs| node_usage(fs, false, resources).1);
            (s, resources.compute_budget - used)
        })
        .collect()
}
