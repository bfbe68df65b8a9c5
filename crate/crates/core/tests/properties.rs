use proptest::prelude::*;

use ruinfree::dual::ConjugateSlice;
use ruinfree::model::*;

prop_compose! {
    fn params()(
        r in 0.005..0.08f64,
        premium in 0.005..0.10f64,
        sigma in 0.05..0.5f64,
        lambda_s in 0.005..0.10f64,
        lambda_o in 0.005..0.10f64,
        c in 0.5..3.0f64,
        big_t in 0.5..20.0f64,
    ) -> ModelParams {
        ModelParams::new(r, r + premium, sigma, lambda_s, lambda_o, c, big_t).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn exponent_exceeds_one(p in params()) {
        prop_assert!(exponent_d(&p) > 1.0);
        // root of r d^2 - (r + λ + m) d + λ = 0
        let d = exponent_d(&p);
        let q = p.r * d * d - (p.r + p.lambda_s + p.m()) * d + p.lambda_s;
        prop_assert!(q.abs() < 1e-10 * d * d);
    }

    #[test]
    fn phi_is_decreasing_and_convex(p in params(), f in 0.0..1.0f64, g in 0.0..1.0f64, share in 0.05..1.0f64) {
        let c_net = p.c * share;
        let top = c_net / p.r;
        let (a, b) = if f < g { (f * top, g * top) } else { (g * top, f * top) };
        let (pa, pb) = (phi(a, c_net, &p).unwrap(), phi(b, c_net, &p).unwrap());
        let mid = phi(0.5 * (a + b), c_net, &p).unwrap();
        prop_assert!(pb <= pa);
        prop_assert!(mid <= 0.5 * (pa + pb) + 1e-14);
        prop_assert!((0.0..=1.0).contains(&pa));
        prop_assert_eq!(phi(0.0, c_net, &p).unwrap(), 1.0);
        prop_assert_eq!(phi(top * 1.5, c_net, &p).unwrap(), 0.0);
    }

    #[test]
    fn safe_levels_are_ordered(p in params(), f in 0.0..1.0f64, g in 0.0..1.0f64, s in 0.0..1.0f64, u in 0.0..1.0f64) {
        let (lo, hi) = if f < g { (f, g) } else { (g, f) };
        let a_lo = AnnuityState::new(lo * p.c, &p).unwrap();
        let a_hi = AnnuityState::new(hi * p.c, &p).unwrap();
        let (t0, t1) = if s < u { (s * p.big_t, u * p.big_t) } else { (u * p.big_t, s * p.big_t) };
        // more income, less wealth needed
        prop_assert!(safe_level(a_hi, t0, &p).unwrap() <= safe_level(a_lo, t0, &p).unwrap() + 1e-12);
        // closer to T, less wealth needed
        prop_assert!(safe_level(a_lo, t1, &p).unwrap() <= safe_level(a_lo, t0, &p).unwrap() + 1e-12);
        // immediate annuities never raise the safe level
        prop_assert!(safe_level_immediate(a_lo, t0, &p).unwrap() <= safe_level(a_lo, t0, &p).unwrap() + 1e-12);
    }

    #[test]
    fn one_shot_purchase_raises_ruin(p in params(), f in 0.01..0.99f64, x in 0.0..1.0f64, y in 0.0..1.0f64) {
        let rho = p.rho();
        let w = f * p.c / rho;
        let (lo, hi) = if x < y { (x, y) } else { (y, x) };
        prop_assume!(hi - lo > 1e-6);
        let max_dc = w * rho;
        let r_lo = one_shot_annuity_ruin(w, lo * max_dc, &p).unwrap();
        let r_hi = one_shot_annuity_ruin(w, hi * max_dc, &p).unwrap();
        prop_assert!(r_hi > r_lo, "{} !> {}", r_hi, r_lo);
    }

    #[test]
    fn obstacle_stays_in_unit_interval(p in params(), f in 0.0..1.0f64, s in 0.0..1.0f64, y in 0.0..100.0f64) {
        let a = AnnuityState::new(f * p.c, &p).unwrap();
        let u = obstacle_u(y, a, s * p.big_t, &p).unwrap();
        prop_assert!((0.0..=1.0).contains(&u));
        let g = terminal_dual_capped(y, a, &p).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&g), "g = {}", g);
    }

    #[test]
    fn terminal_penalty_is_concave(p in params(), f in 0.0..0.95f64, y0 in 0.0..1.0f64, y1 in 0.0..1.0f64) {
        let a = AnnuityState::new(f * p.c, &p).unwrap();
        let peak = terminal_peak(a, &p).unwrap();
        let (a_, b_) = (y0 * 3.0 * peak, y1 * 3.0 * peak);
        let g = |y: f64| terminal_dual_capped(y, a, &p).unwrap();
        prop_assert!(g(0.5 * (a_ + b_)) >= 0.5 * (g(a_) + g(b_)) - 1e-12);
        prop_assert!((g(peak) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn legendre_round_trip(p in params(), f in 0.0..0.95f64, n in 50usize..400) {
        // conjugate of the sampled terminal penalty reproduces phi, and the
        // biconjugate reproduces the samples
        let a = AnnuityState::new(f * p.c, &p).unwrap();
        let peak = terminal_peak(a, &p).unwrap();
        let y: Vec<f64> = (0..n).map(|i| 2.0 * peak * i as f64 / (n - 1) as f64).collect();
        let v: Vec<f64> = y.iter().map(|y| terminal_dual_capped(*y, a, &p).unwrap()).collect();
        let cj = ConjugateSlice::from_concave(&y, &v, 1e-10).unwrap();
        for (yi, vi) in y.iter().zip(&v) {
            prop_assert!((cj.biconjugate(*yi) - vi).abs() < 1e-10);
        }
        let short = a.shortfall(&p);
        let top = short / p.r;
        let mut prev = f64::INFINITY;
        for j in 0..=20 {
            let w = top * j as f64 / 20.0;
            let val = cj.value(w);
            // discrete conjugate: exact at sample slopes, O(h²) between; 50 nodes
            // is coarse
            prop_assert!((val - phi(w, short, &p).unwrap()).abs() < 0.02, "w = {}", w);
            prop_assert!(val <= prev + 1e-14);
            prev = val;
        }
    }
}
