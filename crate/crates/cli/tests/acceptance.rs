//! Acceptance criteria, one test per criterion. Each prints a PASS/FAIL line
//! straight to stderr so it shows up even when output is captured.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::panic::{catch_unwind, resume_unwind, UnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rayon::prelude::*;

use ntnsim_cli::simulate;
use ntnsim_core::dimensioning::*;
use ntnsim_core::dynamics::cluster::{form_clusters, ClusterRule};
use ntnsim_core::dynamics::feeder::{feeder_assignment, FeederConfig, FeederState, FeederTransition};
use ntnsim_core::dynamics::ric::{
    score, E2Sample, E2Timeline, MoveReason, ReassignmentPolicy, RicAction, RicAssignmentState, RicConfig,
    Candidate,
};
use ntnsim_core::dynamics::run;
use ntnsim_core::feasibility::{
    e2_loop_latency, evaluate_snapshot, link_records, node_resource_check, node_usage, Overall, ResourceModel,
    TrafficConfig, NearRtMode, Verdict, FeasibilityReport, FULL_GNB_OVERHEAD_RANGE,
};
use ntnsim_core::orbital::{propagate, ConstellationConfig, GroundSite, Position, SatId, SatelliteState, SiteRole};
use ntnsim_core::placement::{FunctionKind, NetworkFunction, PlacementSpec, RicExtension, SplitOption};
use ntnsim_core::scenario::{load_scenario, parse_scenario};
use ntnsim_core::topology::{
    build_routing_tables, build_topology, route, FeederEdge, IslEdge, IslKind, IslTopology, NodeId, TopologyPolicy,
};

fn criterion(n: u32, name: &str, limit: Option<Duration>, body: impl FnOnce() + UnwindSafe) {
    let start = Instant::now();
    let mut result = catch_unwind(body);
    let took = start.elapsed();
    if result.is_ok() {
        if let Some(l) = limit {
            if took >= l {
                result = Err(Box::new(format!("took {took:.2?}, limit {l:.2?}")));
            }
        }
    }
    let verdict = if result.is_ok() { "PASS" } else { "FAIL" };
    let line = format!("criterion {n:>2} {verdict}: {name} ({took:.2?})\n");
    let _ = std::io::stderr().write_all(line.as_bytes());
    if let Err(e) = result {
        resume_unwind(e);
    }
}

fn scenario_path(file: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(file)
}

fn reference_configs() -> [AirInterfaceConfig; 3] {
    [
        AirInterfaceConfig::new(100.0, 60, 132),
        AirInterfaceConfig::new(200.0, 60, 264),
        AirInterfaceConfig::new(400.0, 120, 264),
    ]
}

#[test]
fn criterion_01_fronthaul_rates() {
    criterion(1, "fronthaul 2.48 / 4.97 / 9.96 Gbps within 1 %", Some(Duration::from_secs(1)), || {
        for (cfg, gbps) in reference_configs().iter().zip([2.48, 4.97, 9.96]) {
            let got = fronthaul_bit_rate(cfg).unwrap().as_gbps();
            assert!(((got - gbps) / gbps).abs() <= 0.01, "{} MHz: {got} Gbps vs {gbps}", cfg.bandwidth_mhz);
        }
    });
}

#[test]
fn criterion_02_midhaul_rates() {
    criterion(2, "midhaul 399 / 774 / 1524 Mbps", None, || {
        for (cfg, mbps) in reference_configs().iter().zip([399.0, 774.0, 1524.0]) {
            let got = midhaul_bit_rate(cfg).as_mbps();
            assert!((got - mbps).abs() < 1e-9, "{} MHz: {got} Mbps vs {mbps}", cfg.bandwidth_mhz);
        }
    });
}

#[test]
fn criterion_03_anchor_constants() {
    criterion(3, "control-plane anchor and latency budgets", None, || {
        let anchor = AirInterfaceConfig::new(20.0, 15, 106).with_layers(2);
        assert!((fronthaul_control_rate(&anchor).as_bps() - 1.856e6).abs() < 1e-6);
        assert!((midhaul_bit_rate(&anchor).as_mbps() - 174.0).abs() < 1e-9);
        assert_eq!(latency_budget(InterfaceClass::Ofh).max_one_way_s, Some(500e-6));
        assert_eq!(latency_budget(InterfaceClass::F1U).tolerance_window_s, Some((1.5e-3, 10e-3)));
        assert_eq!(latency_budget(InterfaceClass::F1C).tolerance_window_s, Some((2e-3, 10e-3)));
        assert_eq!(latency_budget(InterfaceClass::E2).loop_window_s, Some((10e-3, 1.0)));
        assert_eq!(FRONTHAUL_MAX_ONE_WAY_S, 500e-6);
        assert_eq!(MIDHAUL_WINDOW_S, (1.5e-3, 10e-3));
        assert_eq!(F1C_WINDOW_S, (2e-3, 10e-3));
        assert_eq!(NEAR_RT_LOOP_WINDOW_S, (10e-3, 1.0));
    });
}

fn starlink() -> ConstellationConfig {
    ConstellationConfig::new(550.0, 53.0, 72, 22, 1)
}

#[test]
fn criterion_04_constellation_delays_and_hops() {
    criterion(4, "equator inter-plane hop 1.8..3.6 ms, Madrid-Washington in 6..10 hops", Some(Duration::from_secs(10)), || {
        let cfg = starlink();
        let sites = vec![
            GroundSite::new("madrid", 40.4, -3.7, SiteRole::Gateway),
            GroundSite::new("washington", 38.9, -77.0, SiteRole::Gateway),
        ];
        let policy = TopologyPolicy::default();
        let states = propagate(&cfg, 0.0).unwrap();
        let lat: BTreeMap<SatId, f64> = states.iter().map(|s| (s.sat_id, s.latitude_deg())).collect();
        let topo = build_topology(&cfg, &states, &sites, &policy);
        let equator: Vec<f64> = topo
            .edges
            .iter()
            .filter(|e| e.kind == IslKind::InterPlane && lat[&e.a].abs() < 2.0 && lat[&e.b].abs() < 2.0)
            .map(|e| e.delay_s)
            .collect();
        assert!(!equator.is_empty());
        for d in &equator {
            assert!((1.8e-3..=3.6e-3).contains(d), "equator inter-plane hop {d} s");
        }

        let (src, dst) = (NodeId::site("madrid"), NodeId::site("washington"));
        let hops: Vec<(u32, usize)> = (0..=600u32)
            .into_par_iter()
            .map(|t| {
                let topo = build_topology(&cfg, &propagate(&cfg, t as f64).unwrap(), &sites, &policy);
                let r = topo.shortest_paths_from(&src).unwrap().route_to(&dst).unwrap();
                (t, r.isl_hops() + r.feeder_hops())
            })
            .collect();
        for (t, h) in hops {
            assert!((6..=10).contains(&h), "t = {t}: {h} hops");
        }
    });
}

#[test]
fn criterion_05_option_1b_fronthaul() {
    criterion(5, "option 1b fronthaul violates at every step", None, || {
        let out = run(&load_scenario(scenario_path("leo_1b.json")).unwrap()).unwrap();
        assert!(!out.reports.is_empty());
        for r in &out.reports {
            let ofh: Vec<_> = r.links.iter().filter(|l| l.link.interface_class == InterfaceClass::Ofh).collect();
            assert!(!ofh.is_empty());
            for l in ofh {
                assert_eq!(l.verdict, Verdict::Violation, "t = {} {}", r.time_s, l.link.id);
            }
            assert_eq!(r.overall, Overall::Infeasible);
        }
        assert!(!out.summary.feasible);
        assert_eq!(out.summary.availability, 0.0);
    });
}

fn nf(kind: FunctionKind) -> NetworkFunction {
    NetworkFunction::new(kind, 0)
}

/// Five satellites in a line with a fixed hop delay. Sat 0 hosts RU and DU
/// and has feeders to the gateway and the core site; the CU sits `cu_hops` away.
fn chain(per_hop: f64, cu_hops: usize, feeder_s: f64) -> (PlacementSpec, IslTopology) {
    let ids: Vec<SatId> = (0..5).map(|i| SatId::new(0, i)).collect();
    let states: Vec<SatelliteState> =
        ids.iter().map(|&s| SatelliteState { sat_id: s, position: Position::zeros(), time: 0.0 }).collect();
    let edges = ids.windows(2).map(|w| IslEdge { a: w[0], b: w[1], delay_s: per_hop, kind: IslKind::IntraPlane }).collect();
    let feeders = vec![
        FeederEdge { sat: ids[0], site: "gw".into(), delay_s: feeder_s, elevation_deg: 60.0 },
        FeederEdge { sat: ids[0], site: "core".into(), delay_s: feeder_s, elevation_deg: 60.0 },
    ];
    let sites = [GroundSite::new("gw", 0.0, 0.0, SiteRole::Gateway), GroundSite::new("core", 0.0, 0.0, SiteRole::Core)];
    let topo = IslTopology::from_parts(0.0, &states, &sites, edges, feeders);
    let du = NodeId::Sat(ids[0]);
    let cu = NodeId::Sat(ids[cu_hops]);
    let mut a = BTreeMap::new();
    for (k, n) in [(FunctionKind::Ru, &du), (FunctionKind::Du, &du), (FunctionKind::CuCp, &cu), (FunctionKind::CuUp, &cu)] {
        a.insert(nf(k), n.clone());
    }
    for k in [FunctionKind::Upf, FunctionKind::CoreCp, FunctionKind::Smo, FunctionKind::NonRtRic, FunctionKind::DataNetwork] {
        a.insert(nf(k), NodeId::site("core"));
    }
    a.insert(nf(FunctionKind::NearRtRic), NodeId::site("gw"));
    let spec = PlacementSpec {
        split: SplitOption::O2bCuSeparate,
        extension: RicExtension::None,
        assignments: a,
        e2_bindings: BTreeMap::new(),
        cluster_plan: None,
        split_cu_planes: false,
    };
    (spec, topo)
}

fn class_verdicts(r: &FeasibilityReport, class: InterfaceClass) -> Vec<Verdict> {
    r.links.iter().filter(|l| l.link.interface_class == class).map(|l| l.verdict).collect()
}

#[test]
fn criterion_06_f1c_hop_budget() {
    criterion(6, "F1-C over 3.3 ms hops: 3 hops fit, 2 feasible, 4 infeasible", None, || {
        assert_eq!(max_hops_within_budget(10e-3, 3.3e-3), 3);
        for (hops, feasible) in [(2, true), (4, false)] {
            let (spec, topo) = chain(3.3e-3, hops, 2e-3);
            let r = evaluate_snapshot(&spec, &topo, &TrafficConfig::default(), &ResourceModel::default()).unwrap();
            let expected = if feasible { Overall::Feasible } else { Overall::Infeasible };
            assert_eq!(r.overall, expected, "{hops} hops: {:?}", r.violations);
            let want = if feasible { Verdict::Ok } else { Verdict::Violation };
            assert!(class_verdicts(&r, InterfaceClass::F1C).iter().all(|v| *v == want));
        }
    });
}

#[test]
fn criterion_07_strict_near_rt_loop() {
    criterion(7, "strict E2 loop needs the RIC beside a space DU", None, || {
        let strict = TrafficConfig { near_rt_mode: NearRtMode::Strict, ..Default::default() };
        let du_e2 = |r: &FeasibilityReport| {
            r.links
                .iter()
                .find(|l| l.link.interface_class == InterfaceClass::E2 && l.link.from.kind == FunctionKind::Du)
                .map(|l| (l.verdict, l.strict_capable))
                .unwrap()
        };
        for feeder_s in [5e-3, 6e-3, 12e-3] {
            assert!(!e2_loop_latency(feeder_s, 1e-3).strict_capable);
            let (mut spec, topo) = chain(1e-3, 0, feeder_s);
            spec.split = SplitOption::O2a;
            let r = evaluate_snapshot(&spec, &topo, &strict, &ResourceModel::default()).unwrap();
            assert_eq!(du_e2(&r), (Verdict::Violation, Some(false)), "feeder {feeder_s}");
            assert_eq!(r.overall, Overall::Infeasible);

            spec.assignments.insert(nf(FunctionKind::NearRtRic), NodeId::Sat(SatId::new(0, 0)));
            let r = evaluate_snapshot(&spec, &topo, &strict, &ResourceModel::default()).unwrap();
            assert_eq!(du_e2(&r), (Verdict::Ok, Some(true)), "feeder {feeder_s}");
            assert!(class_verdicts(&r, InterfaceClass::E2).iter().all(|v| *v == Verdict::Ok));
        }
    });
}

#[test]
fn criterion_08_power_and_compute() {
    criterion(8, "full gNB with feeder draws 134.5 W; overhead factor in range", None, || {
        let fs = [nf(FunctionKind::Ru), nf(FunctionKind::Du), nf(FunctionKind::CuCp), nf(FunctionKind::CuUp)];
        let r = ResourceModel::default();
        let (p, c) = node_usage(&fs, true, &r);
        assert!((p - 134.5).abs() < 1e-9, "{p} W");
        assert!((p - (78.6 + 55.9)).abs() < 1e-9);
        assert!((node_usage(&fs, false, &r).0 - 78.6).abs() < 1e-9);
        let sat = NodeId::Sat(SatId::new(0, 0));
        for (budget, flagged) in [(100.0, true), (134.4, true), (134.5, false), (135.0, false)] {
            let m = ResourceModel { power_budget_w: budget, ..r.clone() };
            let v = node_resource_check(sat.clone(), &fs, true, &m).verdict;
            assert_eq!(v == Verdict::Violation, flagged, "budget {budget} W");
        }
        let f = r.full_gnb_overhead_factor;
        assert!((FULL_GNB_OVERHEAD_RANGE.0..=FULL_GNB_OVERHEAD_RANGE.1).contains(&f));
        assert_eq!(FULL_GNB_OVERHEAD_RANGE, (1.55, 1.70));
        assert!((c - f * r.full_gnb_baseline_compute).abs() < 1e-9);
        for (factor, ok) in [(1.5, false), (1.55, true), (1.62, true), (1.70, true), (1.75, false)] {
            let m = ResourceModel { full_gnb_overhead_factor: factor, ..r.clone() };
            assert_eq!(m.validate().is_ok(), ok, "factor {factor}");
        }
    });
}

// ---- criterion 9 properties ----

fn routing_matches_oracle(runner: &mut TestRunner) {
    let strat = (2u32..6, 2u32..6, 0.0..6000.0f64, proptest::collection::vec((-60.0..60.0f64, -180.0..180.0f64), 1..4));
    runner
        .run(&strat, |(planes, per, t, sites)| {
            let cfg = ConstellationConfig::new(1200.0, 53.0, planes, per, 0);
            let sites: Vec<GroundSite> = sites
                .iter()
                .enumerate()
                .map(|(i, (lat, lon))| GroundSite::new(format!("g{i}"), *lat, *lon, SiteRole::Gateway))
                .collect();
            let topo = build_topology(&cfg, &propagate(&cfg, t).unwrap(), &sites, &TopologyPolicy::default());
            let nodes = topo.nodes().to_vec();
            let n = nodes.len();
            let idx: BTreeMap<&NodeId, usize> = nodes.iter().enumerate().map(|(i, x)| (x, i)).collect();
            let mut d = vec![vec![f64::INFINITY; n]; n];
            for (i, row) in d.iter_mut().enumerate() {
                row[i] = 0.0;
            }
            let pairs = topo
                .edges
                .iter()
                .map(|e| (NodeId::Sat(e.a), NodeId::Sat(e.b), e.delay_s))
                .chain(topo.feeder_edges.iter().map(|f| (NodeId::Sat(f.sat), NodeId::site(f.site.clone()), f.delay_s)));
            for (a, b, w) in pairs {
                let (i, j) = (idx[&a], idx[&b]);
                d[i][j] = d[i][j].min(w);
                d[j][i] = d[j][i].min(w);
            }
            // only satellites relay
            for k in (0..n).filter(|&k| nodes[k].is_sat()) {
                for i in 0..n {
                    for j in 0..n {
                        if d[i][k] + d[k][j] < d[i][j] {
                            d[i][j] = d[i][k] + d[k][j];
                        }
                    }
                }
            }
            let table = build_routing_tables(&topo, t + 15.0);
            for (i, src) in nodes.iter().enumerate() {
                for (j, dst) in nodes.iter().enumerate() {
                    match route(&table, &topo, src, dst) {
                        Ok(r) => {
                            prop_assert!(d[i][j].is_finite());
                            prop_assert!((r.total_delay_s - d[i][j]).abs() <= 1e-12 * d[i][j].max(1.0));
                            prop_assert_eq!(r.hops.first(), Some(src));
                            prop_assert_eq!(r.hops.last(), Some(dst));
                            prop_assert_eq!(r.hop_count, r.hops.len() - 1);
                            let mut sum = 0.0;
                            for w in r.hops.windows(2) {
                                sum += topo.edge_delay(&w[0], &w[1]).expect("hop is an edge");
                            }
                            prop_assert!((sum - r.total_delay_s).abs() < 1e-12);
                            if r.hops.len() > 2 {
                                prop_assert!(r.hops[1..r.hops.len() - 1].iter().all(NodeId::is_sat));
                            }
                        }
                        Err(_) => prop_assert!(d[i][j].is_infinite(), "{src} -> {dst} reachable in oracle"),
                    }
                }
            }
            Ok(())
        })
        .unwrap();
}

fn clusters_partition(runner: &mut TestRunner) {
    let strat = (1u32..9, 1u32..7, 1u32..10, any::<bool>(), proptest::collection::vec(0.0..100.0f64, 64));
    runner
        .run(&strat, |(planes, per, size, by_planes, res)| {
            let cfg = ConstellationConfig::new(550.0, 53.0, planes, per, 0);
            let topo = build_topology(&cfg, &propagate(&cfg, 0.0).unwrap(), &[], &TopologyPolicy::default());
            let sats: Vec<SatId> = topo.sat_ids().collect();
            let residual: BTreeMap<SatId, f64> = sats.iter().zip(res.iter().cycle()).map(|(s, r)| (*s, *r)).collect();
            let rule = if by_planes { ClusterRule::ByPlaneGroups } else { ClusterRule::ByKHop };
            let plan = form_clusters(&topo, rule, size, &residual);
            let mut all: Vec<SatId> = plan.clusters.iter().flat_map(|c| c.members.iter().copied()).collect();
            all.sort();
            prop_assert_eq!(&all, &sats);
            for c in &plan.clusters {
                prop_assert!(!c.members.is_empty());
                prop_assert!(c.members.contains(&c.leader));
                let best = c.members.iter().map(|m| residual[m]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert_eq!(residual[&c.leader], best);
                let cap = if by_planes { (size * per) as usize } else { size as usize };
                prop_assert!(c.members.len() <= cap);
                if by_planes {
                    let planes: BTreeSet<u32> = c.members.iter().map(|m| m.plane).collect();
                    prop_assert!(planes.len() <= size as usize);
                }
            }
            Ok(())
        })
        .unwrap();
}

fn arb_timeline(nodes: usize, rics: usize) -> impl Strategy<Value = E2Timeline> {
    let cell = prop_oneof![
        1 => Just(None),
        4 => (0.0..8e-3f64, 0.3..1.0f64).prop_map(|(d, q)| Some(E2Sample { one_way_s: d, quality: q })),
    ];
    proptest::collection::vec(proptest::collection::vec(cell, nodes * rics), 2..60).prop_map(move |rows| {
        let times = (0..rows.len()).map(|k| k as f64).collect();
        let n = (0..nodes).map(|i| NodeId::site(format!("n{i}"))).collect();
        let r = (0..rics).map(|i| NodeId::site(format!("r{i}"))).collect();
        E2Timeline::from_rows(times, n, r, rows)
    })
}

fn rics(n: u32) -> Vec<NetworkFunction> {
    (0..n).map(|i| NetworkFunction::new(FunctionKind::NearRtRic, i)).collect()
}

fn du_nodes(n: u32) -> Vec<NetworkFunction> {
    (0..n).map(|i| NetworkFunction::new(FunctionKind::Du, i)).collect()
}

/// Every step, each node is either served by a usable RIC or reported unassigned.
fn e2_totality(runner: &mut TestRunner) {
    let strat = (arb_timeline(3, 4), proptest::collection::vec(proptest::option::of(0usize..4), 3), any::<bool>());
    runner
        .run(&strat, |(tl, init, predictive)| {
            let policy = if predictive { ReassignmentPolicy::Predictive } else { ReassignmentPolicy::Reactive };
            let cfg = RicConfig { policy, horizon_s: 15.0, guard_s: 3.0, dwell_s: 5.0, ..Default::default() };
            let mut st = RicAssignmentState::new(du_nodes(3), rics(4), init, cfg, 1e-3, 10e-3);
            for k in 0..tl.len() {
                let actions = st.step(&tl, k, k as f64);
                for n in 0..3 {
                    let served = st.serving[n].and_then(|r| tl.sample(k, n, r)).is_some_and(|s| 2.0 * s.one_way_s + 1e-3 <= 10e-3);
                    let reported = actions.contains(&RicAction::Unassigned { node: n });
                    prop_assert!(served != reported, "step {k} node {n}");
                }
            }
            Ok(())
        })
        .unwrap();
}

/// One node, two RICs: a score move needs more than the hysteresis margin
/// and respects the dwell time.
fn e2_hysteresis(runner: &mut TestRunner) {
    let strat = (arb_timeline(1, 2), proptest::option::of(0usize..2), 0.0..0.3f64, 0.0..8.0f64);
    runner
        .run(&strat, |(tl, init, delta, dwell)| {
            let cfg = RicConfig { policy: ReassignmentPolicy::Reactive, hysteresis: delta, dwell_s: dwell, ..Default::default() };
            let w = cfg.weights;
            let load = (cfg.node_weight / cfg.capacity).min(1.0);
            let rs = rics(2);
            let mut st = RicAssignmentState::new(du_nodes(1), rs.clone(), vec![init], cfg, 1e-3, 10e-3);
            let mut last_move: Option<usize> = None;
            for k in 0..tl.len() {
                for a in st.step(&tl, k, k as f64) {
                    if let RicAction::Reassigned { from, to, reason, .. } = a {
                        if reason == MoveReason::Score {
                            let view = k.saturating_sub(1);
                            let sc = |r: usize| {
                                let s = tl.sample(view, 0, r).unwrap();
                                score(&Candidate { ric: rs[r], delay_s: s.one_way_s, load, quality: s.quality }, &w)
                            };
                            prop_assert!(sc(from.unwrap()) - sc(to) > delta, "step {k}");
                            prop_assert!(last_move.is_none_or(|m| (k - m) as f64 >= dwell));
                        }
                        last_move = Some(k);
                    }
                }
            }
            Ok(())
        })
        .unwrap();
}

fn predictive_dominance(runner: &mut TestRunner) {
    let strat = (arb_timeline(3, 4), proptest::collection::vec(proptest::option::of(0usize..4), 3));
    runner
        .run(&strat, |(tl, init)| {
            let mut totals = Vec::new();
            for policy in [ReassignmentPolicy::Reactive, ReassignmentPolicy::Predictive] {
                let cfg = RicConfig { policy, horizon_s: 15.0, guard_s: 3.0, dwell_s: 5.0, ..Default::default() };
                let mut st = RicAssignmentState::new(du_nodes(3), rics(4), init.clone(), cfg, 1e-3, 10e-3);
                let stranded: usize = (0..tl.len())
                    .map(|k| st.step(&tl, k, k as f64).iter().filter(|a| matches!(a, RicAction::Unassigned { .. })).count())
                    .sum();
                totals.push(stranded);
            }
            prop_assert!(totals[1] <= totals[0], "predictive {} > reactive {}", totals[1], totals[0]);
            Ok(())
        })
        .unwrap();
}

fn make_before_break(runner: &mut TestRunner) {
    let row = proptest::collection::vec(prop_oneof![Just(-1.0), 10.0..90.0f64], 3);
    let strat = proptest::collection::vec(row, 1..120);
    runner
        .run(&strat, |elevs| {
            let cfg = FeederConfig::default();
            let names = ["a", "b", "c"];
            let mut s = FeederState::Detached;
            let mut open: Option<(f64, String)> = None;
            for (k, row) in elevs.iter().enumerate() {
                let t = k as f64;
                let visible: Vec<(String, f64)> =
                    row.iter().zip(names).filter(|(e, _)| **e >= 0.0).map(|(e, n)| (n.to_string(), *e)).collect();
                let (next, tr) = feeder_assignment(&s, &visible, t, &cfg);
                let mut interrupted = false;
                for x in &tr {
                    match x {
                        FeederTransition::Start { from: Some(from), dual, .. } => {
                            prop_assert!(*dual);
                            prop_assert!(open.is_none());
                            prop_assert!(s.links().contains(&from.as_str()));
                            open = Some((t, from.clone()));
                        }
                        FeederTransition::Interrupted { .. } => interrupted = true,
                        FeederTransition::Cancelled { .. } => open = None,
                        FeederTransition::Complete { from: Some(_), interrupted: i, .. } => {
                            let (started, _) = open.take().expect("completion without a start");
                            prop_assert_eq!(*i, interrupted);
                            if !interrupted {
                                prop_assert!(t - started >= cfg.dual_interval_s);
                            }
                        }
                        _ => {}
                    }
                }
                if let FeederState::Switching { from, to, .. } = &next {
                    // both links held while the switch is open
                    prop_assert_eq!(next.links(), vec![from.as_str(), to.as_str()]);
                    prop_assert!(open.as_ref().is_some_and(|(_, f)| f == from));
                }
                for g in next.links() {
                    prop_assert!(visible.iter().any(|(n, _)| n == g));
                }
                s = next;
            }
            Ok(())
        })
        .unwrap();
}

fn ext3_scenario(seed: u64, p: f64, reform: f64) -> String {
    format!(
        r#"{{
  "name": "prop-ext3",
  "constellation": {{"altitude_km": 550, "inclination_deg": 53, "num_planes": 4, "sats_per_plane": 4, "phasing_factor": 1}},
  "sites": [
    {{"site_id": "gw", "latitude_deg": 10.0, "longitude_deg": 10.0, "role": "gateway"}},
    {{"site_id": "smo", "latitude_deg": 10.0, "longitude_deg": 10.0, "role": "smo"}}
  ],
  "placement": {{"split": "3a", "extension": "ext3", "cluster": {{"rule": "by_plane_groups", "target_size": 2}}}},
  "window": {{"t0": 0, "t1": 120, "step": 10}},
  "seed": {seed},
  "dynamics": {{"cluster": {{"reform_interval_s": {reform}, "failure_probability": {p}}}}}
}}"#
    )
}

fn event_log_determinism(runner: &mut TestRunner) {
    let strat = (any::<u64>(), 0.0..0.3f64, prop::sample::select(vec![20.0, 60.0, 600.0]));
    runner
        .run(&strat, |(seed, p, reform)| {
            let sc = parse_scenario(&ext3_scenario(seed, p, reform)).unwrap();
            let a = run(&sc).unwrap();
            let b = run(&sc).unwrap();
            prop_assert!(a.events.is_ordered());
            prop_assert_eq!(&a.events, &b.events);
            prop_assert_eq!(&a.reports, &b.reports);
            prop_assert_eq!(a.summary.seed, seed);
            Ok(())
        })
        .unwrap();
}

type Suite = (&'static str, fn(&mut TestRunner));

#[test]
fn criterion_09_properties() {
    criterion(9, "property suites, 200 cases each", Some(Duration::from_secs(60)), || {
        let suites: [Suite; 7] = [
            ("routing", routing_matches_oracle),
            ("clusters", clusters_partition),
            ("e2 totality", e2_totality),
            ("e2 hysteresis", e2_hysteresis),
            ("make-before-break", make_before_break),
            ("event log determinism", event_log_determinism),
            ("predictive dominance", predictive_dominance),
        ];
        suites.par_iter().for_each(|(name, suite)| {
            let start = Instant::now();
            suite(&mut TestRunner::new(Config::with_cases(200)));
            let line = format!("    {name}: 200 cases ({:.2?})\n", start.elapsed());
            let _ = std::io::stderr().write_all(line.as_bytes());
        });
    });
}

// ---- criterion 10: command line ----

fn ntnsim(args: &[&str], cwd: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ntnsim")).args(args).current_dir(cwd).output().expect("spawn ntnsim")
}

fn files_under(dir: &Path) -> BTreeSet<PathBuf> {
    let mut out = BTreeSet::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(files_under(&p));
        }
        out.insert(p);
    }
    out
}

#[test]
fn criterion_10_cli_contract() {
    criterion(10, "exit codes, artifact round trips, output confinement", None, || {
        let cases = [
            ("geo_2a.json", 0),
            ("leo_2a_base.json", 0),
            ("leo_1b.json", 2),
            ("leo_1a_gateways.json", 2),
            ("leo_3b_ext2.json", 2),
            ("leo_3a_ext3.json", 2),
            ("invalid_ext1_2a.json", 1),
            ("does_not_exist.json", 1),
        ];
        cases.par_iter().for_each(|(file, code)| {
            let cwd = tempfile::tempdir().unwrap();
            let path = scenario_path(file);
            for format in ["csv", "json"] {
                let out_dir = cwd.path().join(format!("out-{format}"));
                let o = ntnsim(
                    &["simulate", "--scenario", path.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--format", format],
                    cwd.path(),
                );
                assert_eq!(o.status.code(), Some(*code), "{file} {format}: {}", String::from_utf8_lossy(&o.stderr));
                if *code == 1 {
                    assert!(!out_dir.exists());
                    continue;
                }
                let expected = run(&load_scenario(&path).unwrap()).unwrap();
                if format == "csv" {
                    assert_eq!(simulate::read_report_csv(&out_dir).unwrap(), link_records(&expected.reports));
                } else {
                    assert_eq!(simulate::read_report_json(&out_dir).unwrap(), expected.reports);
                }
                assert_eq!(simulate::read_violations(&out_dir).unwrap(), expected.violations());
                assert_eq!(simulate::read_events(&out_dir).unwrap(), expected.events);
                assert_eq!(simulate::read_placement(&out_dir).unwrap(), expected.spec);
                let summary = simulate::read_summary(&out_dir).unwrap();
                assert_eq!(
                    serde_json::to_value(&summary).unwrap(),
                    serde_json::to_value(&expected.summary).unwrap(),
                    "{file}"
                );
            }
            // nothing but the two output directories appears in the working directory
            let top: BTreeSet<PathBuf> =
                std::fs::read_dir(cwd.path()).unwrap().map(|e| e.unwrap().path()).collect();
            let allowed: BTreeSet<PathBuf> =
                ["out-csv", "out-json"].iter().map(|d| cwd.path().join(d)).filter(|p| p.exists()).collect();
            assert_eq!(top, allowed, "{file}");
        });

        let cwd = tempfile::tempdir().unwrap();
        let o = ntnsim(&["dimension", "--bandwidth-mhz", "100", "--scs-khz", "60", "--format", "json"], cwd.path());
        assert_eq!(o.status.code(), Some(0));
        let table: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        let rate = |q: &str| {
            table["rates"].as_array().unwrap().iter().find(|r| r["quantity"] == q).unwrap()["bps"].as_f64().unwrap()
        };
        assert!((rate("fronthaul") / 2.48e9 - 1.0).abs() <= 0.01);
        assert!((rate("midhaul") - 399e6).abs() < 1e-3);
        let text = ntnsim(&["dimension", "--bandwidth-mhz", "20"], cwd.path());
        assert_eq!(text.status.code(), Some(0));
        assert!(String::from_utf8_lossy(&text.stdout).contains("500 us"));
        for bad in [&["dimension", "--bandwidth-mhz", "0"][..], &["dimension"], &["frobnicate"]] {
            assert_eq!(ntnsim(bad, cwd.path()).status.code(), Some(1), "{bad:?}");
        }
        assert!(files_under(cwd.path()).is_empty());
    });
}
