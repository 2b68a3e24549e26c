//! Route-derivation properties checked against an interval oracle.
//!
//! On a path-shaped topology every simple walk is an interval of nodes
//! traversed in one direction, so nesting has a closed form: contained
//! interval, same direction. The library works on edge sequences instead;
//! both views must agree.

use proptest::prelude::*;

use iun_core::builder::{
    build_graph, derive_path_dependencies, DeliveryProcess, ScenarioConfig, UtilityTopology,
};
use iun_core::{NodeId, Sector};

#[derive(Debug, Clone, Copy)]
struct Interval {
    lo: u32,
    hi: u32,
    ascending: bool,
}

impl Interval {
    fn walk(&self) -> Vec<u32> {
        let fwd: Vec<u32> = (self.lo..=self.hi).collect();
        if self.ascending {
            fwd
        } else {
            fwd.into_iter().rev().collect()
        }
    }
}

fn path_topology(n: u32) -> UtilityTopology {
    let nodes: Vec<u32> = (1..=n).collect();
    let edges: Vec<(u32, u32)> = (1..n).map(|i| (i, i + 1)).collect();
    UtilityTopology::new(Sector::Power, &nodes, &edges).unwrap()
}

fn arb_intervals(n: u32, count: usize) -> impl Strategy<Value = Vec<Interval>> {
    prop::collection::vec(
        (1..=n.saturating_sub(1), 1..n, any::<bool>()).prop_map(move |(lo, span, asc)| {
            let lo = lo.min(n - 1);
            let hi = (lo + 1 + span % (n - lo)).min(n);
            Interval {
                lo,
                hi,
                ascending: asc,
            }
        }),
        1..=count,
    )
}

fn deliveries(topology: &UtilityTopology, intervals: &[Interval]) -> Vec<DeliveryProcess> {
    intervals
        .iter()
        .enumerate()
        .map(|(i, iv)| {
            DeliveryProcess::from_walk(NodeId(i as u32 + 1), topology, &iv.walk()).unwrap()
        })
        .collect()
}

fn oracle_pairs(intervals: &[Interval]) -> Vec<(NodeId, NodeId)> {
    let mut out = std::collections::BTreeSet::new();
    for (bi, b) in intervals.iter().enumerate() {
        for (ai, a) in intervals.iter().enumerate() {
            if ai == bi {
                continue;
            }
            let contained = a.lo <= b.lo && b.hi <= a.hi;
            if contained && a.ascending == b.ascending {
                out.insert((NodeId(bi as u32 + 1), NodeId(ai as u32 + 1)));
            }
        }
    }
    out.into_iter().collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn derivation_matches_the_interval_oracle(
        n in 3u32..10,
        ivs in arb_intervals(9, 6),
    ) {
        let n = n.max(ivs.iter().map(|iv| iv.hi).max().unwrap_or(2));
        let topo = path_topology(n);
        let procs = deliveries(&topo, &ivs);
        let got = derive_path_dependencies(&topo, &procs);
        prop_assert_eq!(got, oracle_pairs(&ivs));
    }

    #[test]
    fn derivation_ignores_input_order(
        ivs in arb_intervals(9, 6),
        seed in any::<u64>(),
    ) {
        let n = ivs.iter().map(|iv| iv.hi).max().unwrap_or(2).max(2);
        let topo = path_topology(n);
        let procs = deliveries(&topo, &ivs);
        let baseline = derive_path_dependencies(&topo, &procs);

        let mut shuffled = procs;
        let mut state = seed | 1;
        for i in (1..shuffled.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (state >> 33) as usize % (i + 1));
        }
        prop_assert_eq!(derive_path_dependencies(&topo, &shuffled), baseline);
    }

    #[test]
    fn derivation_is_transitive(ivs in arb_intervals(9, 6)) {
        let n = ivs.iter().map(|iv| iv.hi).max().unwrap_or(2).max(2);
        let topo = path_topology(n);
        let pairs = derive_path_dependencies(&topo, &deliveries(&topo, &ivs));
        let set: std::collections::BTreeSet<_> = pairs.iter().copied().collect();
        for &(a, b) in &pairs {
            for &(c, d) in &pairs {
                if b == c && a != d {
                    prop_assert!(
                        set.contains(&(a, d)),
                        "{a} -> {b} and {c} -> {d} without {a} -> {d}"
                    );
                }
            }
        }
    }

    #[test]
    fn build_output_ignores_declaration_order(
        ivs in arb_intervals(6, 4),
        seed in any::<u64>(),
    ) {
        let n = ivs.iter().map(|iv| iv.hi).max().unwrap_or(2).max(2);
        let mut config = ScenarioConfig {
            name: "props".into(),
            ..Default::default()
        };
        config.topologies.insert(
            Sector::Power,
            iun_core::builder::TopologySpec {
                nodes: (1..=n).collect(),
                edges: (1..n).map(|i| (i, i + 1)).collect(),
            },
        );
        for (i, iv) in ivs.iter().enumerate() {
            config.processes.push(iun_core::builder::ProcessSpec {
                id: i as u32 + 1,
                label: format!("d{}", i + 1),
                sector: Sector::Power,
                kind: iun_core::builder::ProcessKind::Delivery,
                qof_fraction: None,
                from: None,
                to: None,
                path: Some(iv.walk()),
            });
        }
        let (g1, _) = build_graph(&config).unwrap();

        let mut state = seed | 1;
        for i in (1..config.processes.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            config.processes.swap(i, (state >> 33) as usize % (i + 1));
        }
        let (g2, _) = build_graph(&config).unwrap();
        let e1: Vec<_> = g1.edges().map(|e| (e.source, e.target, e.weight.to_bits())).collect();
        let e2: Vec<_> = g2.edges().map(|e| (e.source, e.target, e.weight.to_bits())).collect();
        prop_assert_eq!(e1, e2);
        prop_assert_eq!(g1.node_count(), g2.node_count());
    }
}
