use divreins_core::model::{derive_params, from_cramer_lundberg};
use divreins_core::{ClosedForm, CramerLundbergInputs, ModelParams, RawModelInputs};
use proptest::prelude::*;

/// Valid parameter sets, drawn in normal form and filtered by validation.
fn valid_params() -> impl Strategy<Value = ModelParams> {
    (
        1.0f64..5.0,
        0.02f64..0.45,
        0.0f64..0.2,
        5.0f64..120.0,
        0.2f64..1.0,
        0.01f64..0.2,
    )
        .prop_filter_map("invariants", |(mu, a_frac, delta_frac, s2, l, c)| {
            let a = a_frac * mu;
            let delta = delta_frac * l * mu / 2.0;
            ModelParams::with_sigma2(mu, a, delta, s2, l, c).ok()
        })
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn vieta_identities(p in valid_params()) {
        let c = *ClosedForm::new(p).unwrap().coeffs();
        if p.delta() > 0.0 {
            prop_assert!(rel(c.g * c.h, p.delta() / p.a()) < 1e-12);
        } else {
            prop_assert_eq!(c.h, 0.0);
        }
        let s = 2.0 * p.c() * p.sigma2() + p.mu() * p.mu() + 4.0 * p.a() * p.delta();
        prop_assert!(rel(2.0 * p.a() * p.mu() * (c.g + c.h), s) < 1e-12);
    }

    #[test]
    fn characteristic_roots_solve_their_quadratics(p in valid_params()) {
        let c = *ClosedForm::new(p).unwrap().coeffs();
        let l = p.l();
        let q1 = |t: f64| 0.5 * p.sigma2() * l * l * t * t + p.drift(l) * t - p.c();
        let q2 = |t: f64| 0.5 * p.sigma2() * t * t + p.drift(1.0) * t - p.c();
        for (t, q) in [(c.alpha1, q1(c.alpha1)), (c.beta1, q1(c.beta1))] {
            prop_assert!(q.abs() <= 1e-12 * p.c().max(p.sigma2() * l * l * t * t), "{t} {q}");
        }
        for (t, q) in [(c.alpha2, q2(c.alpha2)), (c.beta2, q2(c.beta2))] {
            prop_assert!(q.abs() <= 1e-12 * p.c().max(p.sigma2() * t * t), "{t} {q}");
        }
        prop_assert!(c.beta1 < 0.0 && c.alpha1 > 0.0 && c.beta2 < 0.0 && c.alpha2 > 0.0);
    }

    #[test]
    fn retention_is_continuous_and_ordered(p in valid_params()) {
        let cf = ClosedForm::new(p).unwrap();
        let c = *cf.coeffs();
        prop_assert!(c.h < p.l() && c.g > 1.0);
        prop_assert!(0.0 <= c.x1 && c.x1 <= c.x2);
        prop_assert!((cf.retention(c.x1) - p.l()).abs() < 1e-10);
        prop_assert!((cf.retention(c.x2) - 1.0).abs() < 1e-10);
        let b0 = cf.unconstrained_barrier().unwrap();
        prop_assert!(c.x2 < b0);
        let mut prev = 0.0;
        for i in 0..=64 {
            let u = cf.retention(b0 * i as f64 / 64.0);
            prop_assert!(u >= prev - 1e-14 && (p.l()..=1.0).contains(&u));
            prev = u;
        }
    }

    #[test]
    fn value_is_nonincreasing_in_barrier(p in valid_params(), k1 in 1.0f64..3.0, dk in 0.01f64..3.0) {
        let cf = ClosedForm::new(p).unwrap();
        let b0 = cf.unconstrained_barrier().unwrap();
        let (b1, b2) = (k1 * b0, (k1 + dk) * b0);
        let v1 = cf.value_coeffs(b1).unwrap();
        let v2 = cf.value_coeffs(b2).unwrap();
        for i in 1..=20 {
            let x = b2 * 1.2 * i as f64 / 20.0;
            prop_assert!(v2.value(x) <= v1.value(x) * (1.0 + 1e-10), "x={} {} > {}", x, v2.value(x), v1.value(x));
        }
    }

    #[test]
    fn hjb_residual_vanishes_below_optimal_barrier(p in valid_params()) {
        let cf = ClosedForm::new(p).unwrap();
        let b0 = cf.unconstrained_barrier().unwrap();
        let vc = cf.value_coeffs(b0).unwrap();
        for i in 1..50 {
            let x = b0 * i as f64 / 50.0;
            let r = vc.hjb_residual(x);
            let scale = p.c() * vc.value(x);
            prop_assert!(r.residual.abs() <= 1e-8 * scale.max(1.0), "x={} {:?}", x, r);
            prop_assert!((r.maximizer - r.retention).abs() < 1e-7, "x={} {:?}", x, r);
        }
    }

    #[test]
    fn derived_params_expand_the_preferred_level(
        mu1 in 0.5f64..4.0, p in 0.05f64..1.0, a in 0.01f64..0.5, s2 in 5.0f64..100.0, l in 0.3f64..1.0,
    ) {
        match derive_params(RawModelInputs { mu1, p, a }, s2.sqrt(), l, 0.05) {
            Ok(m) => {
                prop_assert!(rel(m.mu(), mu1 + 2.0 * a * p) < 1e-15);
                prop_assert!(rel(m.delta(), a * p * p) < 1e-15);
                prop_assert!(m.check().is_empty());
            }
            Err(_) => {
                let m = ModelParams::with_sigma2(mu1 + 2.0 * a * p, a, a * p * p, s2, l, 0.05);
                prop_assert!(m.is_err());
            }
        }
    }

    #[test]
    fn cramer_lundberg_scales_with_intensity(
        lambda in 0.1f64..10.0, loading in 0.01f64..1.0, m1 in 0.1f64..5.0, extra in 0.0f64..5.0, k in 0.1f64..10.0,
    ) {
        let base = CramerLundbergInputs { lambda, loading, m1, m2: m1 * m1 + extra };
        let scaled = CramerLundbergInputs { lambda: k * lambda, ..base };
        let (mu_a, s_a) = from_cramer_lundberg(base).unwrap();
        let (mu_b, s_b) = from_cramer_lundberg(scaled).unwrap();
        prop_assert!(rel(mu_b, k * mu_a) < 1e-13);
        prop_assert!(rel(s_b * s_b, k * s_a * s_a) < 1e-13);
    }
}
