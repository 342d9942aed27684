//! Constellation clustering and leader selection for the hierarchical RIC.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dimensioning::InterfaceClass;
use crate::feasibility::{e2_loop_latency, node_path, SnapshotRouter, Violation};
use crate::orbital::SatId;
use crate::placement::{LoopCheck, Segment};
use crate::topology::{IslTopology, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterRule {
    /// Consecutive orbital planes, `target_size` planes per cluster.
    ByPlaneGroups,
    /// Greedy ISL neighbourhoods of `target_size` satellites.
    ByKHop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: u32,
    pub members: Vec<SatId>,
    pub leader: SatId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterPlan {
    pub rule: ClusterRule,
    pub target_size: u32,
    pub clusters: Vec<Cluster>,
}

impl ClusterPlan {
    pub fn cluster_of(&self, sat: SatId) -> Option<&Cluster> {
        self.clusters.iter().find(|c| c.members.binary_search(&sat).is_ok())
    }

    /// Every satellite of `sats` is in exactly one cluster, nothing else is, and
    /// each leader is a member of its own cluster.
    pub fn is_partition_of(&self, sats: &BTreeSet<SatId>) -> bool {
        let mut seen = BTreeSet::new();
        for c in &self.clusters {
            if !c.members.contains(&c.leader) || c.members.is_empty() {
                return false;
            }
            for m in &c.members {
                if !seen.insert(*m) {
                    return false;
                }
            }
        }
        &seen == sats
    }
}

/// Member with the largest residual compute, ties to the lowest id.
/// Satellites in `excluded` are skipped; missing residuals count as zero.
pub fn select_leader(members: &[SatId], residual: &BTreeMap<SatId, f64>, excluded: &BTreeSet<SatId>) -> Option<SatId> {
    members
        .iter()
        .filter(|m| !excluded.contains(m))
        .map(|m| (residual.get(m).copied().unwrap_or(0.0), *m))
        .min_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)))
        .map(|(_, m)| m)
}

pub fn form_clusters(
    topology: &IslTopology,
    rule: ClusterRule,
    target_size: u32,
    residual: &BTreeMap<SatId, f64>,
) -> ClusterPlan {
    let size = target_size.max(1);
    let sats: Vec<SatId> = topology.sat_ids().collect();
    let groups: Vec<Vec<SatId>> = match rule {
        ClusterRule::ByPlaneGroups => {
            let mut by: BTreeMap<u32, Vec<SatId>> = BTreeMap::new();
            for s in &sats {
                by.entry(s.plane / size).or_default().push(*s);
            }
            by.into_values().collect()
        }
        ClusterRule::ByKHop => {
            let mut left: BTreeSet<SatId> = sats.iter().copied().collect();
            let mut out = Vec::new();
            while let Some(&seed) = left.iter().next() {
                let mut near: Vec<(u32, SatId)> = topology
                    .hop_distances(seed)
                    .into_iter()
                    .filter(|(s, _)| left.contains(s))
                    .map(|(s, d)| (d, s))
                    .collect();
                near.sort();
                let mut members: Vec<SatId> = near.into_iter().take(size as usize).map(|(_, s)| s).collect();
                members.sort();
                for m in &members {
                    left.remove(m);
                }
                out.push(members);
            }
            out
        }
    };
    let none = BTreeSet::new();
    let clusters = groups
        .into_iter()
        .enumerate()
        .map(|(i, mut members)| {
            members.sort();
            let leader = select_leader(&members, residual, &none).expect("clusters are non-empty");
            Cluster {
                id: i as u32,
                members,
                leader,
            }
        })
        .collect();
    ClusterPlan {
        rule,
        target_size,
        clusters,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeaderFailure {
    pub time_s: f64,
    pub sat: SatId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterDynamicsConfig {
    /// Clusters are re-formed this often, s.
    #[serde(default = "default_reform")]
    pub reform_interval_s: f64,
    /// Scheduled satellite failures.
    #[serde(default)]
    pub failures: Vec<LeaderFailure>,
    /// Per-step probability that a serving leader fails.
    #[serde(default)]
    pub failure_probability: f64,
}

fn default_reform() -> f64 {
    600.0
}

impl Default for ClusterDynamicsConfig {
    fn default() -> Self {
        Self {
            reform_interval_s: default_reform(),
            failures: Vec::new(),
            failure_probability: 0.0,
        }
    }
}

/// Management link of the three-level hierarchy. Followers are satellites,
/// not placed functions, so endpoints are nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyLink {
    pub id: String,
    pub cluster: u32,
    pub from_node: NodeId,
    pub to_node: NodeId,
    pub interface_class: InterfaceClass,
    pub segment: Segment,
    pub loop_check: LoopCheck,
}

/// Ground non-RT RIC to every leader, then each leader to its followers.
pub fn hierarchy_links(plan: &ClusterPlan, ground_nonrt: &NodeId) -> Vec<HierarchyLink> {
    let mut out = Vec::new();
    for c in &plan.clusters {
        let leader = NodeId::Sat(c.leader);
        out.push(HierarchyLink {
            id: format!("A1:{ground_nonrt}->{leader}"),
            cluster: c.id,
            segment: Segment::between(ground_nonrt, &leader),
            from_node: ground_nonrt.clone(),
            to_node: leader.clone(),
            interface_class: InterfaceClass::A1,
            loop_check: LoopCheck::None,
        });
    }
    for c in &plan.clusters {
        let leader = NodeId::Sat(c.leader);
        for m in c.members.iter().filter(|m| **m != c.leader) {
            let f = NodeId::Sat(*m);
            out.push(HierarchyLink {
                id: format!("A1:{leader}->{f}"),
                cluster: c.id,
                segment: Segment::between(&leader, &f),
                from_node: leader.clone(),
                to_node: f,
                interface_class: InterfaceClass::A1,
                loop_check: LoopCheck::Follower,
            });
        }
    }
    out
}

/// Checks hierarchy links on a snapshot: every endpoint reachable and
/// follower loops within `follower_loop_s`.
pub fn evaluate_hierarchy(
    topology: &IslTopology,
    links: &[HierarchyLink],
    processing_s: f64,
    follower_loop_s: f64,
    relay: bool,
) -> Vec<Violation> {
    let t = topology.time;
    let mut by_source: BTreeMap<&NodeId, Vec<&HierarchyLink>> = BTreeMap::new();
    for l in links {
        // route from the satellite end so one tree serves a whole cluster
        let src = if l.from_node.is_sat() { &l.from_node } else { &l.to_node };
        by_source.entry(src).or_default().push(l);
    }
    let groups: Vec<_> = by_source.into_iter().collect();
    groups
        .par_iter()
        .map(|(src, ls)| {
            let router = SnapshotRouter::default();
            let mut v = Vec::new();
            for l in ls {
                let other = if *src == &l.from_node { &l.to_node } else { &l.from_node };
                match node_path(topology, &router, src, other, relay) {
                    Err(_) => v.push(Violation {
                        time_s: t,
                        rule: "leader-unreachable".into(),
                        subject: l.id.clone(),
                        detail: format!("no path between {} and {}", l.from_node, l.to_node),
                    }),
                    Ok(p) if l.loop_check == LoopCheck::Follower => {
                        let lp = e2_loop_latency(p.one_way_s, processing_s).loop_s;
                        if lp > follower_loop_s {
                            v.push(Violation {
                                time_s: t,
                                rule: "follower-loop".into(),
                                subject: l.id.clone(),
                                detail: format!("loop {:.1} ms exceeds {:.1} ms", lp * 1e3, follower_loop_s * 1e3),
                            });
                        }
                    }
                    Ok(_) => {}
                }
            }
            v
        })
        .collect::<Vec<_>>()
        .concat()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbital::{propagate, ConstellationConfig, GroundSite, Position, SatelliteState, SiteRole};
    use crate::topology::{build_topology, FeederEdge, IslEdge, IslKind, TopologyPolicy};
    use proptest::prelude::*;

    fn topo(planes: u32, per: u32) -> IslTopology {
        let cfg = ConstellationConfig::new(550.0, 53.0, planes, per, 0);
        build_topology(&cfg, &propagate(&cfg, 0.0).unwrap(), &[], &TopologyPolicy::default())
    }

    #[test]
    fn twelve_planes_in_groups_of_three() {
        let t = topo(12, 4);
        let plan = form_clusters(&t, ClusterRule::ByPlaneGroups, 3, &BTreeMap::new());
        assert_eq!(plan.clusters.len(), 4);
        assert!(plan.is_partition_of(&t.sat_ids().collect()));
        // equal compute: lowest id leads
        for c in &plan.clusters {
            assert_eq!(c.leader, c.members[0]);
        }
    }

    #[test]
    fn oversized_group_is_one_cluster() {
        let t = topo(4, 3);
        let plan = form_clusters(&t, ClusterRule::ByPlaneGroups, 10, &BTreeMap::new());
        assert_eq!(plan.clusters.len(), 1);
        assert_eq!(plan.clusters[0].members.len(), 12);
    }

    #[test]
    fn leader_failure_promotes_next_argmax() {
        let members: Vec<SatId> = (0..5).map(|i| SatId::new(0, i)).collect();
        let residual: BTreeMap<SatId, f64> = members.iter().zip([5.0, 9.0, 7.0, 9.0, 1.0]).map(|(s, r)| (*s, r)).collect();
        let lead = select_leader(&members, &residual, &BTreeSet::new()).unwrap();
        assert_eq!(lead, SatId::new(0, 1));
        let next = select_leader(&members, &residual, &BTreeSet::from([lead])).unwrap();
        // oracle: argmax over the survivors, lowest id on ties
        let oracle = members
            .iter()
            .filter(|m| **m != lead)
            .fold(None::<SatId>, |best, m| match best {
                Some(b) if residual[&b] >= residual[m] => Some(b),
                _ => Some(*m),
            })
            .unwrap();
        assert_eq!(next, oracle);
        assert_eq!(next, SatId::new(0, 3));
        assert_eq!(select_leader(&members, &residual, &members.iter().copied().collect()), None);
    }

    #[test]
    fn single_cluster_link_count() {
        let t = topo(3, 4);
        let plan = form_clusters(&t, ClusterRule::ByPlaneGroups, 5, &BTreeMap::new());
        let links = hierarchy_links(&plan, &NodeId::site("smo"));
        assert_eq!(links.len(), 1 + 12 - 1);
        assert_eq!(links.iter().filter(|l| l.loop_check == LoopCheck::Follower).count(), 11);
    }

    /// Leader and a follower three 2 ms hops away; optionally cut the middle hop.
    fn line(cut: bool) -> (IslTopology, ClusterPlan) {
        let ids: Vec<SatId> = (0..4).map(|i| SatId::new(0, i)).collect();
        let states: Vec<SatelliteState> = ids.iter().map(|&s| SatelliteState { sat_id: s, position: Position::zeros(), time: 0.0 }).collect();
        let edges = ids
            .windows(2)
            .enumerate()
            .filter(|(i, _)| !(cut && *i == 1))
            .map(|(_, w)| IslEdge { a: w[0], b: w[1], delay_s: 2e-3, kind: IslKind::IntraPlane })
            .collect();
        let sites = [GroundSite::new("gw", 0.0, 0.0, SiteRole::Gateway)];
        let feeders = vec![FeederEdge { sat: ids[0], site: "gw".into(), delay_s: 3e-3, elevation_deg: 50.0 }];
        let topo = IslTopology::from_parts(0.0, &states, &sites, edges, feeders);
        let plan = ClusterPlan {
            rule: ClusterRule::ByKHop,
            target_size: 4,
            clusters: vec![Cluster { id: 0, members: ids.clone(), leader: ids[0] }],
        };
        (topo, plan)
    }

    #[test]
    fn follower_three_hops_is_within_bound() {
        let (topo, plan) = line(false);
        let links = hierarchy_links(&plan, &NodeId::site("gw"));
        assert!(evaluate_hierarchy(&topo, &links, 1e-3, 0.1, true).is_empty());
        // 6 ms one way, 13 ms loop
        assert!((e2_loop_latency(6e-3, 1e-3).loop_s - 13e-3).abs() < 1e-12);
        let v = evaluate_hierarchy(&topo, &links, 1e-3, 12e-3, true);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, "follower-loop");
    }

    #[test]
    fn cut_cluster_reports_unreachable_leader() {
        let (topo, plan) = line(true);
        let links = hierarchy_links(&plan, &NodeId::site("gw"));
        let v = evaluate_hierarchy(&topo, &links, 1e-3, 0.1, true);
        assert_eq!(v.len(), 2);
        assert!(v.iter().all(|x| x.rule == "leader-unreachable"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn plans_partition_the_constellation(planes in 1u32..14, per in 1u32..9, size in 1u32..16, khop in any::<bool>(), seed in any::<u64>()) {
            let t = topo(planes, per);
            let residual: BTreeMap<SatId, f64> = t.sat_ids().map(|s| (s, ((seed ^ (s.plane as u64 * 31 + s.slot as u64)) % 7) as f64)).collect();
            let rule = if khop { ClusterRule::ByKHop } else { ClusterRule::ByPlaneGroups };
            let plan = form_clusters(&t, rule, size, &residual);
            prop_assert!(plan.is_partition_of(&t.sat_ids().collect()));
            for c in &plan.clusters {
                let best = c.members.iter().map(|m| residual[m]).fold(f64::MIN, f64::max);
                prop_assert_eq!(residual[&c.leader], best);
                if khop {
                    prop_assert!(c.members.len() <= size as usize);
                }
            }
        }
    }
}
