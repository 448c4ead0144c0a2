//! The reference implementations must be able to tell right from wrong.

mod common;

use common::oracles::{brute_conflicts, coloring_defect, discrepancy, line_distances, lower_bound_check, split_bound_unrolled};
use common::phi_oracle::{rat_f, PhiReplay, Exp};
use common::suite::{exact_derand, suite, EPS};
use edgecolor_core::distsim::split_bound;
use edgecolor_core::graph::{generate, greedy_edge_coloring, line_distance, Graph, InstanceKind, LineDistance};
use edgecolor_core::online::Params;
use edgecolor_core::slocal::{Algorithm, ArrivalOrder, Engine, OrderKind};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

#[test]
fn suite_has_two_hundred_instances_within_bounds() {
    let s = suite();
    assert!(s.len() >= 200);
    assert!(s.iter().all(|i| i.g.n() <= 5000 && i.g.m() > 0));
    let random: Vec<usize> = s.iter().filter(|i| matches!(i.kind, InstanceKind::RandomMaxDeg { .. })).map(|i| i.delta()).collect();
    for d in 3..=16 {
        assert!(random.contains(&d), "no random instance reaches delta {d}");
    }
}

#[test]
fn fixed_point_exp_matches_known_constants() {
    let exp = Exp::new();
    let scale = BigRational::from_integer(BigInt::one() << 320usize);
    let e = BigRational::from_integer(exp.fixed(&BigRational::one())) / &scale;
    assert!((e.to_f64().unwrap() - std::f64::consts::E).abs() < 1e-15);
    let half = BigRational::from_integer(exp.fixed(&-rat_f(std::f64::consts::LN_2))) / &scale;
    assert!((half.to_f64().unwrap() - 0.5).abs() < 1e-15);
    let tiny = BigRational::from_integer(exp.fixed(&rat_f(-50.0))) / &scale;
    assert!((tiny.to_f64().unwrap() / (-50f64).exp() - 1.0).abs() < 1e-14);
}

#[test]
fn line_distance_matrix_agrees_with_library_bfs() {
    let g = generate(&InstanceKind::RandomMaxDeg { n: 12, delta: 3 }, 4).unwrap();
    let d = line_distances(&g);
    for e in 0..g.m() {
        for f in 0..g.m() {
            let want = match line_distance(&g, e, f).unwrap() {
                LineDistance::Finite(x) => x,
                LineDistance::Unreachable => usize::MAX / 4,
            };
            assert_eq!(d[e][f], want, "d({e},{f})");
        }
    }
}

#[test]
fn matching_walks_add_conflicts_beyond_distance_three() {
    // Alternating base colors on a path link edges 0 and 4 through edges 1 and 3.
    let g = generate(&InstanceKind::Path { n: 12 }, 0).unwrap();
    let base = greedy_edge_coloring(&g);
    let brute = brute_conflicts(&g, &base);
    let d = line_distances(&g);
    let far: usize = (0..g.m()).map(|e| brute[e].iter().filter(|&&f| d[e][f] > 3).count()).sum();
    assert!(far > 0);
    assert!(brute[0].contains(&4) && !brute[0].contains(&6));
    assert!((0..g.m()).all(|e| brute[e].iter().all(|&f| brute[f].contains(&e))), "conflicts are symmetric");
}

#[test]
fn defect_and_discrepancy_oracles_reject_bad_input() {
    let g = Graph::new(3, vec![[0, 1], [1, 2]]).unwrap();
    assert!(coloring_defect(&g, &[Some(1), Some(2)]).is_none());
    assert!(coloring_defect(&g, &[Some(1), Some(1)]).unwrap().contains("share color 1"));
    assert!(coloring_defect(&g, &[Some(1), None]).is_some());
    assert_eq!(discrepancy(&g, &[1, 1]).unwrap(), vec![1, 2, 1]);
    assert!(discrepancy(&g, &[1, 0]).is_err());
}

#[test]
fn split_recurrence_matches_closed_form() {
    for (delta, eta, gamma, i) in [(16, 0.1, 2.0, 2), (40, 0.25, 4.0, 3), (9, 0.5, 0.0, 1), (7, 0.3, 1.5, 0)] {
        let a = split_bound_unrolled(delta, eta, gamma, i);
        let b = split_bound(delta, eta, gamma, i);
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }
}

#[test]
fn lower_bound_needs_the_adversarial_order() {
    let g = generate(&InstanceKind::StarLb { delta: 4, reps: 1 }, 0).unwrap();
    let adv = ArrivalOrder::new(&g, &OrderKind::Adversarial).unwrap();
    assert_eq!(lower_bound_check(&g, adv.as_slice()).colors_used, 7);
    let mut rev: Vec<usize> = adv.as_slice().to_vec();
    rev.reverse();
    let r = lower_bound_check(&g, &rev);
    assert!(r.colors_used < 7, "connectors first leave room: {r:?}");
}

#[test]
fn phi_replay_detects_a_skipped_transition() {
    let g = generate(&InstanceKind::RandomMaxDeg { n: 14, delta: 4 }, 2).unwrap();
    let params = Params::new(g.max_degree(), EPS).unwrap();
    let alg = Algorithm::Deterministic { derand: exact_derand() };
    let mut eng = Engine::new(&g, params.clone(), &alg, 5, false).unwrap();
    let p0 = (0..g.m()).map(|f| eng.state.p(f).to_vec()).collect();
    let mut replay = PhiReplay::new(&g, &params, eng.potentials().unwrap(), p0).unwrap();
    let c = replay.compare(&g, eng.potentials().unwrap());
    assert_eq!(c.step_mismatches, 0);
    assert!(c.total_rel < 1e-25, "{c:?}");
    let order = ArrivalOrder::new(&g, &OrderKind::Id).unwrap();
    for (i, &e) in order.as_slice().iter().enumerate() {
        let step = eng.decide(e).unwrap();
        let tr = eng.state.plan(&g, &step.decision).unwrap();
        eng.commit(step).unwrap();
        if i != 3 {
            // A missing transition leaves the replay's P vectors stale.
            if replay.apply(&g, &tr).is_err() {
                return;
            }
        }
    }
    let c = replay.compare(&g, eng.potentials().unwrap());
    assert!(c.step_mismatches > 0 || c.total_rel > 1e-12, "{c:?}");
}
