use std::f64::consts::{E, LN_2};

use proptest::prelude::*;
use saarb_core::bounds::{
    compactification_interval, default_t_grid, eta_threshold, DivergenceContext, Remainder, RiskNeutralContext,
    SemidevContext,
};
use saarb_core::entropy::{
    entropy_integral_lhs, entropy_integral_upper, j_divergence_transform, j_hoelder, j_numeric, j_pl,
    j_semidev_transform, vc_covering_bound, vc_log_covering, vc_majorant,
};
use saarb_core::{
    BoundContext, BoundInputs, BoundStatus, EntropySource, EnvelopeSpec, PhiFamily, RemainderMode, RiskFunctional,
    SemideviationParams, SourceDistribution,
};

// Midpoint rule on the substituted integrand, fine enough to serve as an oracle.
fn midpoint(f: impl Fn(f64) -> f64, a: f64, b: f64, k: usize) -> f64 {
    let h = (b - a) / k as f64;
    (0..k).map(|i| f(a + h * (i as f64 + 0.5))).sum::<f64>() * h
}

#[test]
fn majorant_holds_on_a_grid() {
    for v in [1.0, 1.5, 2.0, 4.0, 10.0, 50.0] {
        for k in [E, 3.0, 10.0, 100.0, 1e4, 1e8] {
            let lhs = entropy_integral_lhs(v, k, 1e-10).unwrap();
            let rhs = entropy_integral_upper(v, k).unwrap();
            assert!(lhs <= rhs * (1.0 + 1e-12), "v={v} K={k}: {lhs} > {rhs}");
            let oracle = midpoint(|u| 2.0 * u * (v * (k / (u * u)).ln()).sqrt(), 0.0, 1.0, 200_000);
            assert!((lhs - oracle).abs() < 1e-6 * oracle, "v={v} K={k}: quad {lhs} vs midpoint {oracle}");
        }
    }
}

#[test]
fn vc_majorant_dominates_numeric_integral() {
    for v in [2, 3, 5, 10] {
        for delta in [0.01, 0.1, 0.25, 0.5, 1.0] {
            let num = j_numeric(vc_log_covering(v), delta).unwrap().value;
            let maj = vc_majorant(v, delta).unwrap();
            assert!(num <= maj, "V={v} δ={delta}: {num} > {maj}");
        }
    }
}

#[test]
fn vc_log_covering_matches_bound() {
    for v in [2, 4, 7] {
        for eps in [1e-4, 0.01, 0.3, 0.9] {
            let direct = (2.0 * vc_covering_bound(v, eps).unwrap()).ln();
            assert!((vc_log_covering(v)(eps) - direct).abs() < 1e-10 * direct.abs().max(1.0));
        }
    }
}

#[test]
fn hoelder_is_the_integral_of_its_own_majorant() {
    // 2δ√(a + b ln(2/δ)) ≥ ∫₀^δ √(a + b ln(2/ε)) dε for the Hölder covering exponent.
    let (m, beta) = (2usize, 0.5);
    let a = (3.0 * m as f64 + 1.0) * LN_2;
    let b = m as f64 / beta;
    for delta in [0.01, 0.1, 0.5] {
        let integral = j_numeric(|e| a + b * (2.0 / e).ln(), delta).unwrap().value;
        assert!(integral <= j_hoelder(m, beta, delta).unwrap().value);
    }
}

#[test]
fn divergence_chain_closed_form() {
    // AVaR(α) with ξ ≡ c: Φ*(y) = y⁺/(1−α), so ξ' = (2−α)/(1−α)·√(c² + x_u²).
    for (alpha, c, delta, x0) in [(0.5, 1.0, 1.0, 1.5), (0.2, 2.0, 0.5, 1.1), (0.8, 0.5, 0.1, 1.9)] {
        let phi = PhiFamily::avar(alpha, x0).unwrap();
        let src = SourceDistribution::uniform(0.0, 1.0).unwrap();
        let ctx = DivergenceContext::build(
            &phi,
            delta,
            &EnvelopeSpec::constant(c),
            &src,
            &EntropySource::Hoelder { m: 1, beta: 1.0 },
            RemainderMode::Auto,
        )
        .unwrap();
        let mps = c / (1.0 - alpha);
        let x_l = -delta - mps;
        let x_u = ((1.0 + x0) * delta + mps + x0 * c) / (x0 - 1.0);
        assert!((ctx.interval.x_l - x_l).abs() < 1e-12 && (ctx.interval.x_u - x_u).abs() < 1e-10 * x_u);
        let norm = (2.0 - alpha) / (1.0 - alpha) * (c * c + x_u * x_u).sqrt();
        assert!((ctx.norm_xi_prime - norm).abs() < 1e-10 * norm, "{} vs {norm}", ctx.norm_xi_prime);
        assert!((ctx.min_n() - 2.0 * norm * norm).abs() < 1e-9 * norm * norm);
        assert_eq!(ctx.remainder_a.coefficient, 0.0);
        assert_eq!(ctx.remainder_b.coefficient, 0.0);
    }
    let i = compactification_interval(&PhiFamily::avar(0.5, 1.5).unwrap(), 1.5, 1.0, 2.0, 1.0).unwrap();
    assert_eq!((i.x_l, i.x_u), (-3.0, 12.0));
}

#[test]
fn bounded_semideviation_requirement() {
    // ξ ≡ 1, p = 1: ξ_p = (1 + 1)² = 4 and min_n = max(8, (1 + 32√2 J(1/4))²).
    let ctx = SemidevContext::build(
        SemideviationParams::new(1.0, 1.0).unwrap(),
        &EnvelopeSpec::constant(1.0),
        &SourceDistribution::uniform(-1.0, 1.0).unwrap(),
        &EntropySource::Hoelder { m: 1, beta: 1.0 },
        RemainderMode::Auto,
    )
    .unwrap();
    assert!((ctx.norm_xi_p - 4.0).abs() < 1e-14);
    let j = 2.0 * 0.25 * (4.0 * LN_2 + (8.0f64).ln()).sqrt();
    assert!((ctx.min_n() - (1.0 + 32.0 * 2f64.sqrt() * j).powi(2)).abs() < 1e-9);
    assert!(ctx.min_n() < 3000.0);
}

fn contexts() -> Vec<BoundContext> {
    let src = SourceDistribution::uniform(-1.0, 1.0).unwrap();
    let ent = EntropySource::Hoelder { m: 1, beta: 1.0 };
    let xi = EnvelopeSpec::user(|z| 1.0 + z[0].abs());
    let risks = [
        RiskFunctional::Expectation,
        RiskFunctional::Semideviation(SemideviationParams::new(1.5, 0.5).unwrap()),
        RiskFunctional::Divergence(PhiFamily::avar(0.5, 1.5).unwrap()),
    ];
    let mut out = Vec::new();
    for r in &risks {
        out.push(BoundContext::build(r, &EnvelopeSpec::constant(1.0), &src, &ent, RemainderMode::Auto, 1.0).unwrap());
        out.push(BoundContext::build(r, &xi, &src, &ent, RemainderMode::Chebyshev, 0.5).unwrap());
    }
    out
}

proptest! {
    #[test]
    fn j_is_monotone_in_delta(d1 in 1e-6f64..0.5, d2 in 1e-6f64..0.5, m in 1usize..4, beta in 0.1f64..1.0) {
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(j_hoelder(m, beta, lo).unwrap().value <= j_hoelder(m, beta, hi).unwrap().value + 1e-15);
        prop_assert!(j_pl(2, &[1, 3], lo).unwrap().value <= j_pl(2, &[1, 3], hi).unwrap().value + 1e-15);
        prop_assert!(
            j_numeric(vc_log_covering(3), lo).unwrap().value
                <= j_numeric(vc_log_covering(3), hi).unwrap().value * (1.0 + 1e-9)
        );
    }

    #[test]
    fn transforms_are_monotone_in_base(j1 in 0.0f64..5.0, j2 in 0.0f64..5.0, delta in 0.01f64..0.36, p in 1.0f64..3.0) {
        let (lo, hi) = if j1 <= j2 { (j1, j2) } else { (j2, j1) };
        prop_assert!(j_divergence_transform(lo, delta).unwrap().value <= j_divergence_transform(hi, delta).unwrap().value);
        let a = j_semidev_transform(|_| Ok(lo), p, delta).unwrap().value;
        let b = j_semidev_transform(|_| Ok(hi), p, delta).unwrap().value;
        prop_assert!(a <= b);
    }

    #[test]
    fn bounds_decrease_in_eps_and_n(k in 0usize..6, n in 1usize..100_000, dn in 0usize..100_000,
                                    t in 0.1f64..100.0, e1 in 0.01f64..1e3, e2 in 0.01f64..1e3) {
        let ctx = &contexts()[k];
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let at = |n, eps| ctx.evaluate(BoundInputs { n, t, eps }).unwrap();
        let (a, b) = (at(n, lo), at(n, hi));
        prop_assert!(b.bound_value <= a.bound_value + 1e-15);
        let c = at(n + dn, lo);
        prop_assert!(c.bound_value <= a.bound_value + 1e-15);
        prop_assert!(c.threshold_eps <= a.threshold_eps * (1.0 + 1e-12));
        prop_assert!(a.bound_value >= 0.0 && a.bound_value <= 1.0);
    }

    #[test]
    fn status_matches_threshold_and_min_n(k in 0usize..6, n in 1usize..100_000, t in 0.1f64..100.0, eps in 0.01f64..1e4) {
        let r = contexts()[k].evaluate(BoundInputs { n, t, eps }).unwrap();
        let expected = if (n as u64) < r.min_n_count() {
            BoundStatus::NTooSmall
        } else if eps <= r.threshold_eps {
            BoundStatus::BelowThreshold
        } else {
            BoundStatus::Applicable
        };
        prop_assert_eq!(r.status, expected);
    }

    #[test]
    fn best_over_t_is_no_worse_than_any_grid_point(k in 0usize..6, n in 3000usize..200_000, eps in 1.0f64..1e4) {
        let ctx = &contexts()[k];
        let grid = default_t_grid();
        let (_, best) = ctx.best_over_t(n, eps, &grid).unwrap();
        for &t in &grid {
            let r = ctx.evaluate(BoundInputs { n, t, eps }).unwrap();
            if r.is_applicable() {
                prop_assert!(best.is_applicable() && best.bound_value <= r.bound_value);
            }
        }
    }

    #[test]
    fn eta_matches_context_threshold(t in 0.1f64..50.0, n in 1usize..10_000, norm in 0.1f64..10.0) {
        let jq = j_hoelder(1, 1.0, 0.25).unwrap().value;
        let ctx = RiskNeutralContext::new(norm, jq, 1.0, Remainder::ZERO).unwrap();
        let r = saarb_core::bounds::risk_neutral_tail_bound(&ctx, BoundInputs { n, t, eps: 1.0 }).unwrap();
        prop_assert_eq!(r.threshold_eps, eta_threshold(t, n, norm, jq));
    }
}
