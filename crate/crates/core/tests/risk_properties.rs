use proptest::prelude::*;
use saarb_core::risk::{
    apply, avar_closed_form, mean_upper_semideviation, oce_objective, oce_value, PhiFamily, RiskFunctional,
    SemideviationParams,
};
use saarb_core::EmpiricalDistribution;

fn ed(v: &[f64]) -> EmpiricalDistribution {
    EmpiricalDistribution::new(v.to_vec()).unwrap()
}

fn sample_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 1..60)
}

// AVaR via VaR_α + E[(X − VaR_α)⁺]/(1−α), with VaR_α = F^←(α) from a direct scan.
fn avar_oracle(values: &[f64], alpha: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let var = *v.iter().enumerate().find(|(k, _)| (*k as f64 + 1.0) / n >= alpha).unwrap().1;
    var + v.iter().map(|x| (x - var).max(0.0)).sum::<f64>() / n / (1.0 - alpha)
}

fn semidev_oracle(values: &[f64], p: f64, a: f64) -> f64 {
    let n = values.len() as f64;
    let mut m = 0.0;
    for v in values {
        m += v / n;
    }
    let mut s = 0.0;
    for v in values {
        if *v > m {
            s += (v - m).powf(p) / n;
        }
    }
    m + a * s.powf(1.0 / p)
}

fn ln_mean_exp(values: &[f64]) -> f64 {
    let mx = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    mx + (values.iter().map(|v| (v - mx).exp()).sum::<f64>() / values.len() as f64).ln()
}

#[test]
fn closed_form_matches_var_oracle_on_small_cases() {
    for alpha in [0.1, 0.25, 0.5, 0.75, 0.9] {
        let v = [4.0, -1.0, 2.5, 2.5, 0.0, 7.0, -3.0];
        let c = avar_closed_form(&ed(&v), alpha).unwrap();
        assert!((c - avar_oracle(&v, alpha)).abs() < 1e-12, "alpha={alpha}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn oce_equals_avar(values in sample_strategy(), k in 0usize..3) {
        let alpha = [0.1, 0.5, 0.9][k];
        let phi = PhiFamily::avar(alpha, 1.0 + 0.5 * alpha / (1.0 - alpha)).unwrap();
        let e = ed(&values);
        let via_oce = apply(&RiskFunctional::Divergence(phi), &e).unwrap();
        let closed = avar_closed_form(&e, alpha).unwrap();
        prop_assert!((via_oce - closed).abs() <= 1e-8, "oce={via_oce} closed={closed}");
        prop_assert!((closed - avar_oracle(&values, alpha)).abs() <= 1e-9);
    }

    #[test]
    fn entropic_oce_is_ln_mean_exp(values in prop::collection::vec(-3.0f64..3.0, 1..60)) {
        let phi = PhiFamily::entropic(1.5).unwrap();
        let v = apply(&RiskFunctional::Divergence(phi), &ed(&values)).unwrap();
        prop_assert!((v - ln_mean_exp(&values)).abs() <= 1e-9, "oce={v} oracle={}", ln_mean_exp(&values));
    }

    #[test]
    fn semideviation_matches_definition(values in sample_strategy(), p in 1.0f64..4.0, a in 0.01f64..1.0) {
        let params = SemideviationParams::new(p, a).unwrap();
        let v = mean_upper_semideviation(&ed(&values), params);
        prop_assert!((v - semidev_oracle(&values, p, a)).abs() <= 1e-10);
    }

    #[test]
    fn translation_equivariance(values in sample_strategy(), c in -5.0f64..5.0) {
        let shifted: Vec<f64> = values.iter().map(|v| v + c).collect();
        let risks = [
            RiskFunctional::Expectation,
            RiskFunctional::Semideviation(SemideviationParams::new(2.0, 0.7).unwrap()),
            RiskFunctional::Divergence(PhiFamily::avar(0.3, 1.2).unwrap()),
            RiskFunctional::Divergence(PhiFamily::entropic(1.5).unwrap()),
        ];
        for r in &risks {
            let a = apply(r, &ed(&values)).unwrap();
            let b = apply(r, &ed(&shifted)).unwrap();
            prop_assert!((b - a - c).abs() <= 1e-8 * (1.0 + a.abs() + c.abs()), "{}: {a} + {c} vs {b}", r.name());
        }
    }

    #[test]
    fn monotone_under_domination(values in sample_strategy(), bumps in prop::collection::vec(0.0f64..2.0, 60)) {
        let higher: Vec<f64> = values.iter().zip(&bumps).map(|(v, b)| v + b).collect();
        let risks = [
            RiskFunctional::Expectation,
            RiskFunctional::Semideviation(SemideviationParams::new(1.0, 1.0).unwrap()),
            RiskFunctional::Divergence(PhiFamily::avar(0.6, 1.5).unwrap()),
        ];
        for r in &risks {
            let a = apply(r, &ed(&values)).unwrap();
            let b = apply(r, &ed(&higher)).unwrap();
            prop_assert!(b >= a - 1e-9 * (1.0 + a.abs()), "{}: {a} > {b}", r.name());
        }
    }

    #[test]
    fn oce_objective_is_convex(values in sample_strategy(), x in -20.0f64..20.0, y in -20.0f64..20.0) {
        for phi in [PhiFamily::avar(0.4, 1.5).unwrap(), PhiFamily::entropic(1.5).unwrap()] {
            let hx = oce_objective(&values, &phi, x).unwrap();
            let hy = oce_objective(&values, &phi, y).unwrap();
            let hm = oce_objective(&values, &phi, 0.5 * (x + y)).unwrap();
            if hx.is_finite() && hy.is_finite() {
                prop_assert!(hm <= 0.5 * (hx + hy) + 1e-9 * (1.0 + hx.abs() + hy.abs()));
            }
        }
    }

    #[test]
    fn reported_minimizer_attains_value(values in sample_strategy()) {
        let phi = PhiFamily::avar(0.5, 1.5).unwrap();
        let (v, x) = oce_value(&ed(&values), &phi, (-20.0, 20.0)).unwrap();
        let hx = oce_objective(&values, &phi, x).unwrap();
        prop_assert!((hx - v).abs() <= 1e-10 * (1.0 + v.abs()));
        // nothing to the left of x attains the minimum
        let left = oce_objective(&values, &phi, x - 1e-6).unwrap();
        prop_assert!(left > v);
    }
}
