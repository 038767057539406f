mod common;

use nash_sir_core::multishoot::{continue_in_harm, solve, ContinuationConfig, MultiShootConfig, NodeSeed};
use nash_sir_core::*;

use common::*;

#[test]
fn unfolded_branch_crosses_once() {
    let p = mild();
    let cfg = IntegratorConfig::default();
    let branch = continue_in_harm(&p, &cfg, 12, &ContinuationConfig::default(), &MultiShootConfig::default()).unwrap();
    assert!(branch.completed);
    assert_eq!(branch.folds, 0);
    assert_eq!(branch.crossings.len(), 1);
    assert_eq!(branch.points[0].lambda, 0.0);
}

#[test]
fn folded_branch_crosses_three_times() {
    let p = multiplicity();
    let cfg = IntegratorConfig::default();
    let branch = continue_in_harm(&p, &cfg, 12, &ContinuationConfig::default(), &MultiShootConfig::default()).unwrap();
    assert!(branch.folds >= 2, "{} folds", branch.folds);
    assert!(branch.crossings.len() >= 3);
    // Distinct crossings sit at distinct final states.
    let s: Vec<f64> = branch.crossings.iter().map(|c| c.final_condition.s).collect();
    for (k, a) in s.iter().enumerate() {
        for b in &s[k + 1..] {
            assert!((a - b).abs() > 1e-3);
        }
    }
}

#[test]
fn schedule_seed_converges_to_the_equilibrium() {
    let p = mild();
    let cfg = IntegratorConfig::default();
    let seed = NodeSeed::from_schedule(&p, &Schedule::Constant(0.2), &cfg, 12).unwrap();
    assert_eq!(seed.nodes.len() + 1, 12);
    let out = solve(&p, &cfg, &seed, &MultiShootConfig::default()).unwrap();
    assert!(out.converged);
    let set = enumerate(&p, &SearchConfig::default(), &cfg);
    assert!(out.final_condition.distance(&set.equilibria[0].final_condition) < 1e-7);
}

#[test]
fn enumeration_reports_the_continuation() {
    let p = multiplicity();
    let set = enumerate(&p, &SearchConfig::default(), &IntegratorConfig::default());
    assert_eq!(set.len(), 3);
    assert!(set.diagnostics.continuation_folds >= 2);
    assert!(set.diagnostics.continuation_completed);
    assert!(set.equilibria.iter().any(|e| matches!(e.origin, SeedOrigin::Continuation(_))));
    for e in &set.equilibria {
        assert!(e.fixed_point.passes());
        assert!(e.summary.residual < 1e-8);
    }
    // Without the continuation the middle equilibrium is missed.
    let search = SearchConfig { continuation_steps: 0, ..SearchConfig::default() };
    let without = enumerate(&p, &search, &IntegratorConfig::default());
    assert!(without.len() < set.len());
    assert_eq!(without.diagnostics.continuation_points, 0);
}
