use std::sync::Arc;

use ruinfree::dual::*;
use ruinfree::fbp::*;
use ruinfree::model::*;
use ruinfree::par::Execution;
use ruinfree::simulate::*;

fn surface(a: f64, n_y: usize, n_t: usize) -> RuinSurface {
    let p = ModelParams::example();
    let a = AnnuityState::new(a, &p).unwrap();
    let spec = GridSpec {
        n_y,
        n_t,
        ..GridSpec::default()
    };
    let grid = DualGrid::for_annuity(a, &p, &spec).unwrap();
    let sol = solve_obstacle(a, &grid, &p, &PsorSettings::default()).unwrap();
    RuinSurface::build(Arc::new(sol), 201).unwrap()
}

#[test]
fn surface_is_a_probability_decreasing_in_wealth() {
    let s = surface(1.0, 1000, 100);
    let rep = check_verification_conditions(&s, None);
    assert!(rep.passed(), "{:?}", rep.failures());
    for row in &s.values {
        assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}

#[test]
fn psi_lies_between_the_no_annuity_probabilities() {
    let s = surface(1.0, 1000, 100);
    let p = s.params;
    // never buying is admissible, so Ψ <= φ(·; c)
    for j in 1..s.n_w() {
        let w = s.w_nodes[0][j];
        assert!(s.values[0][j] <= phi(w, p.c, &p).unwrap() + 1e-6, "w = {w}");
    }
    // income only starts at T, so at low wealth Ψ exceeds φ(·; c - A)
    for w in [0.5, 2.0, 5.0] {
        assert!(s.value(w, 0) > phi(w, 0.5, &p).unwrap());
    }
}

#[test]
fn sweep_interpolates_between_levels() {
    let p = ModelParams::example();
    let levels: Vec<AnnuityState> = [0.9, 1.0, 1.1]
        .iter()
        .map(|a| AnnuityState::new(*a, &p).unwrap())
        .collect();
    let spec = GridSpec {
        n_y: 800,
        n_t: 50,
        ..GridSpec::default()
    };
    let sols = solve_sweep(&levels, &p, &spec, &PsorSettings::default(), Execution::Parallel).unwrap();
    let sweep = validate_ineq(sols, &p, 101, Execution::Parallel).unwrap();
    assert!(sweep.ineq_passed(), "margin {}", sweep.ineq_margin);
    let lo = ruin_probability(8.0, 0.9, 0.0, &sweep).unwrap();
    let mid = ruin_probability(8.0, 0.95, 0.0, &sweep).unwrap();
    let hi = ruin_probability(8.0, 1.0, 0.0, &sweep).unwrap();
    assert!(lo > mid && mid > hi);
    assert_eq!(ruin_probability(0.0, 1.0, 1.0, &sweep).unwrap(), 1.0);
    assert_eq!(ruin_probability(30.0, 1.0, 1.0, &sweep).unwrap(), 0.0);
    assert_eq!(
        ruin_probability(10.0, 1.0, 5.0, &sweep).unwrap(),
        phi(10.0, 0.5, &p).unwrap()
    );
    assert!(matches!(
        ruin_probability(8.0, 0.5, 0.0, &sweep),
        Err(ruinfree::RuinError::OutOfCoverage(_))
    ));
}

#[test]
fn sweep_is_identical_sequential_and_parallel() {
    let p = ModelParams::example();
    let levels = uniform_a_nodes(4, &p);
    let spec = GridSpec {
        n_y: 300,
        n_t: 20,
        ..GridSpec::default()
    };
    let a = solve_sweep(&levels, &p, &spec, &PsorSettings::default(), Execution::Parallel).unwrap();
    let b = solve_sweep(&levels, &p, &spec, &PsorSettings::default(), Execution::Sequential).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.values, y.values);
    }
}

#[test]
fn standard_error_scales_with_path_count() {
    let s = surface(1.0, 800, 100);
    let p = s.params;
    let mk = |n| {
        let cfg = SimConfig::new(n, 0.01, 3, 8.0, s.a);
        simulate_ruin(&cfg, &s, &p).unwrap()
    };
    let (small, large) = (mk(4000), mk(8000));
    let ratio = small.std_error / large.std_error;
    assert!((ratio - 2f64.sqrt()).abs() < 0.1, "ratio {ratio}");
    for r in [&small, &large] {
        assert!((0.0..=1.0).contains(&r.ruin_estimate));
    }
}

#[test]
fn antithetic_variance_is_reported() {
    // a sanity report, not a theorem
    let s = surface(1.0, 800, 100);
    let p = s.params;
    let mut cfg = SimConfig::new(8000, 0.01, 5, 8.0, s.a);
    let plain = simulate_ruin(&cfg, &s, &p).unwrap();
    cfg.antithetic = true;
    let anti = simulate_ruin(&cfg, &s, &p).unwrap();
    println!(
        "plain se {:.3e}, antithetic se {:.3e}",
        plain.std_error, anti.std_error
    );
    assert!(anti.std_error.is_finite() && anti.std_error > 0.0);
}

#[test]
fn diagnostics_are_deterministic_and_purchase_at_the_barrier() {
    let s = surface(1.0, 800, 100);
    let p = s.params;
    let cfg = SimConfig::new(200, 0.01, 9, 14.0, s.a);
    let a = path_diagnostics(&cfg, &s, &p, 50).unwrap();
    let b = path_diagnostics(&cfg, &s, &p, 50).unwrap();
    assert_eq!(a, b);
    let mut purchases = 0;
    for (i, e) in a.iter().enumerate() {
        match e.kind {
            EventKind::Annuitize => {
                let wbar = safe_level(s.a, e.t, &p).unwrap();
                assert!(e.w >= wbar, "bought at {} below w̄ = {wbar}", e.w);
                let post = a[i + 1];
                assert_eq!(post.kind, EventKind::Purchased);
                assert_eq!(post.a, p.c);
                let glide = a[i + 2];
                assert_eq!(glide.kind, EventKind::Horizon);
                assert!(glide.w >= -1e-9);
                // purchase at exactly the barrier lands on zero
                let exact = wbar - s.a.shortfall(&p) * deferred_price(e.t, &p).unwrap();
                assert!(glide_to_horizon(exact, e.t, &p).abs() < 1e-9);
                purchases += 1;
            }
            EventKind::Step => assert!(e.w < safe_level(s.a, e.t.min(p.big_t), &p).unwrap() || e.t >= p.big_t),
            _ => {}
        }
    }
    assert!(purchases > 0);
    // at most one purchase per path
    let mut seen = std::collections::HashSet::new();
    for e in a.iter().filter(|e| e.kind == EventKind::Annuitize) {
        assert!(seen.insert(e.path));
    }
}

#[test]
fn solver_strategy_beats_the_closed_form_feedback() {
    let s = surface(1.0, 1000, 100);
    let p = s.params;
    let mut cfg = SimConfig::new(20_000, 0.01, 1, 8.0, s.a);
    let solver = simulate_ruin(&cfg, &s, &p).unwrap();
    cfg.strategy = StrategySource::ClosedFormAtT;
    let naive = simulate_ruin(&cfg, &s, &p).unwrap();
    let se = solver.std_error.hypot(naive.std_error);
    assert!(
        naive.ruin_estimate > solver.ruin_estimate - 3.0 * se,
        "closed form {} vs solver {}",
        naive.ruin_estimate,
        solver.ruin_estimate
    );
}
