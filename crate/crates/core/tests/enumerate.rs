mod common;

use nash_sir_core::*;

use common::*;

#[test]
fn enumeration_is_deterministic_and_self_consistent() {
    let p = distancing_cheap();
    let cfg = IntegratorConfig::default();
    let a = enumerate(&p, &SearchConfig::default(), &cfg);
    let b = enumerate(&p, &SearchConfig::default(), &cfg);
    assert_eq!(a, b);
    assert!(!a.is_empty());
    for e in &a.equilibria {
        assert!((attack_rate(&e.trajectory.last().epi) - e.summary.attack_rate).abs() < 1e-9);
        assert!(e.fixed_point.passes());
        assert!(e.trajectory.is_physical(1e-12));
        assert_eq!(e.trajectory.first().t, 0.0);
        assert!((e.trajectory.last().t - p.vaccine_time).abs() < 1e-12);
    }
    assert_eq!(summarize(&a).len(), a.len());
}

#[test]
fn invalid_grid_points_are_never_reported() {
    let p = severe();
    let set = enumerate(&p, &SearchConfig::default(), &IntegratorConfig::default());
    assert!(set.diagnostics.invalid_boundary > 0);
    for e in &set.equilibria {
        let r = residual(&e.final_condition, &p, &e.integrator);
        assert_ne!(r.classification, Classification::InvalidBoundary);
    }
}

#[test]
fn bad_search_settings_are_rejected() {
    let bad = [
        SearchConfig { grid_points_per_dim: 1, ..SearchConfig::default() },
        SearchConfig { refine_damping: 0.0, ..SearchConfig::default() },
        SearchConfig { dedup_tol: 0.1, screen_tol: 0.01, ..SearchConfig::default() },
        SearchConfig { seed_levels: vec![1.5], ..SearchConfig::default() },
        SearchConfig { seed_onsets: vec![1.0], ..SearchConfig::default() },
    ];
    for s in bad {
        assert!(s.validate().is_err(), "{s:?}");
    }
}
