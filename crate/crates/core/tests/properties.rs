mod common;

use common::oracles::{coloring_defect, line_distances};
use edgecolor_core::distsim::{congest_pipeline, Mode, PipelineConfig};
use edgecolor_core::graph::{generate, greedy_edge_coloring, EdgeColoring, Graph, InstanceKind};
use edgecolor_core::online::{run_online, Params, SeededSampler};
use edgecolor_core::schedule::{build_conflict_graph, check_classes, distance_schedule, Relation};
use edgecolor_core::slocal::{run_slocal, Algorithm, ArrivalOrder, OrderKind};
use proptest::prelude::*;

fn random_graph(n: usize, delta: usize, seed: u64) -> Graph {
    generate(&InstanceKind::RandomMaxDeg { n: n.max(delta + 1), delta }, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn lazy_slocal_matches_eager_online(n in 4usize..60, delta in 2usize..7, seed in 0u64..500, eps in 0.1f64..0.9) {
        let g = random_graph(n, delta, seed);
        let params = Params::new(g.max_degree(), eps).unwrap();
        let order = ArrivalOrder::new(&g, &OrderKind::Random { seed }).unwrap();
        let lazy = run_slocal(&g, params.clone(), &order, &Algorithm::Randomized { seed }, 1, false).unwrap();
        let eager = run_online(&g, params, order.as_slice(), &mut SeededSampler { seed }).unwrap();
        prop_assert_eq!(lazy.state.records(), eager.records());
        prop_assert!(coloring_defect(&g, &eager.coloring().colors).is_none());
    }

    #[test]
    fn conflict_graph_is_symmetric_and_covers_distance_three(n in 4usize..25, delta in 2usize..5, seed in 0u64..500) {
        let g = random_graph(n, delta, seed);
        let cg = build_conflict_graph(&g, &greedy_edge_coloring(&g)).unwrap();
        let d = line_distances(&g);
        for e in 0..g.m() {
            for f in 0..g.m() {
                if e != f && d[e][f] <= 3 {
                    prop_assert!(cg.conflicts(e, f));
                }
                prop_assert_eq!(cg.conflicts(e, f), cg.conflicts(f, e));
            }
            prop_assert!(!cg.conflicts(e, e));
        }
        let dl = g.max_degree();
        prop_assert!(cg.max_degree() <= 2 * dl.pow(4) + 8 * dl.pow(3));
    }

    #[test]
    fn distance_schedule_classes_are_far_apart(n in 4usize..40, delta in 2usize..6, seed in 0u64..500, ell in 1usize..6) {
        let g = random_graph(n, delta, seed);
        let s = distance_schedule(&g, ell).unwrap();
        prop_assert!(check_classes(&g, &s, &Relation::Distance(ell)).is_ok());
        let mut seen: Vec<usize> = s.classes.iter().flatten().copied().collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..g.m()).collect::<Vec<_>>());
    }

    #[test]
    fn local_pipeline_costs_one_physical_round_per_round(n in 20usize..60, delta in 6usize..10, seed in 0u64..200) {
        let g = random_graph(n, delta, seed);
        let cfg = PipelineConfig {
            algorithm: Algorithm::Randomized { seed },
            delta_prime: Some(4),
            mode: Some(Mode::Local),
            ..PipelineConfig::default()
        };
        let run = congest_pipeline(&g, 0.3, &cfg).unwrap();
        prop_assert!(coloring_defect(&g, &run.coloring.colors).is_none());
        for p in &run.parts {
            prop_assert_eq!(p.trace.physical_rounds, p.trace.rounds);
        }
    }

    #[test]
    fn graph_json_round_trips(n in 2usize..40, delta in 1usize..6, seed in 0u64..500) {
        let g = random_graph(n, delta.max(2), seed);
        let back = Graph::from_json(&g.to_json().unwrap()).unwrap();
        prop_assert_eq!(back.edges(), g.edges());
        prop_assert_eq!(back.n(), g.n());
    }
}

#[test]
fn greedy_base_is_within_two_delta() {
    for inst in common::suite::suite().iter().filter(|i| i.g.m() <= 2000) {
        let col: EdgeColoring = greedy_edge_coloring(&inst.g);
        assert!(coloring_defect(&inst.g, &col.colors).is_none(), "{}", inst.label);
        assert!(col.max_color() as usize <= 2 * inst.delta() - 1, "{}", inst.label);
    }
}
