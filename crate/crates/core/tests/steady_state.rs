mod common;

use common::{detect_period, sp};
use pla_core::reference::table_grid;
use pla_core::steady_state::{period_r, propagate_cycle, CycleWalker};
use pla_core::{solve_steady_state, SolverConfig, TimelineMode};
use proptest::prelude::*;

#[test]
fn period_matches_detected_repetition() {
    let cfg = SolverConfig::default();
    for r in [50.0, 100.0, 200.0] {
        for h in [50.0, 100.0, 200.0] {
            let s = sp(1.0, r, h, 0.8);
            let mut walker = CycleWalker::new(&s, TimelineMode::Nominal, cfg.kmax_floor);
            walker.take_publishes(400);
            let snaps: Vec<Vec<f64>> = walker
                .take_publishes(16)
                .into_iter()
                .map(|d| d.probs().to_vec())
                .collect();
            assert_eq!(
                detect_period(&snaps, 1e-12),
                Some(period_r(r, h).unwrap()),
                "r={r} h={h}"
            );
        }
    }
}

#[test]
fn table_grid_converges_quickly() {
    let cfg = SolverConfig::default();
    for s in table_grid() {
        let q = solve_steady_state(&s, &cfg).unwrap();
        assert!(q.converged, "{s}");
        assert!(q.cycles_used <= 50, "{s}: {} cycles", q.cycles_used);
        assert!(q.final_distance < cfg.epsilon);
        assert_eq!(q.dists.len(), q.period_r);
        for d in &q.dists {
            assert!((d.total() - 1.0).abs() < 1e-9, "{s}");
        }
    }
}

#[test]
fn drifted_mode_runs_but_is_not_periodic() {
    let cfg = SolverConfig {
        timeline_mode: TimelineMode::Drifted,
        max_cycles: 300,
        ..SolverConfig::default()
    };
    let q = solve_steady_state(&sp(1.0, 50.0, 200.0, 0.9), &cfg).unwrap();
    assert_eq!(q.period_r, 4);
    assert!(q.cycles_used <= 300);
    for d in &q.dists {
        assert!((d.total() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn low_kmax_floor_grows_until_tail_is_small() {
    let cfg = SolverConfig {
        kmax_floor: 4,
        ..SolverConfig::default()
    };
    let q = solve_steady_state(&sp(10.0, 50.0, 200.0, 0.75), &cfg).unwrap();
    assert!(q.k_max > 100);
    assert!(q.tail_mass <= cfg.tail_tol);
}

fn arb_scenario() -> impl Strategy<Value = pla_core::ScenarioParams> {
    (
        prop::sample::select(vec![0.008, 0.5, 1.0, 2.0, 3.0, 5.0]),
        prop::sample::select(vec![50.0, 100.0, 200.0]),
        prop::sample::select(vec![50.0, 100.0, 200.0]),
        0.6f64..=1.0,
    )
        .prop_map(|(m, r, h, p)| sp(m, r, h, p))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn converged_cycle_is_a_fixed_point(s in arb_scenario()) {
        let cfg = SolverConfig::default();
        let q = solve_steady_state(&s, &cfg).unwrap();
        prop_assert!(q.converged);
        let next = propagate_cycle(&s, &cfg, &q);
        let d = next
            .iter()
            .zip(&q.dists)
            .map(|(a, b)| a.linf_distance(b))
            .fold(0.0, f64::max);
        prop_assert!(d <= 2.0 * cfg.epsilon, "distance {}", d);
    }

    #[test]
    fn lossless_channel_stays_empty(
        m in 0.01f64..20.0,
        r in prop::sample::select(vec![10.0, 50.0, 75.0, 200.0]),
        h in prop::sample::select(vec![20.0, 50.0, 150.0, 200.0]),
    ) {
        let q = solve_steady_state(&sp(m, r, h, 1.0), &SolverConfig::default()).unwrap();
        prop_assert!(q.converged);
        prop_assert_eq!(q.cycles_used, 1);
        prop_assert!(q.dists.iter().all(|d| d.is_point_zero()));
    }
}
