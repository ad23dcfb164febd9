//! Closed-form quantities checked against values computed independently:
//! 40-digit reference values (see `data/oracle_values.py`) and a direct
//! numerical integration of the HJB equation that never touches the
//! closed-form branches.

use divreins_core::{ruin_lower_bound, ClosedForm, ModelParams};

mod reference {
    pub const ALPHA1: f64 = 0.040951766808626268634;
    pub const BETA1: f64 = -0.19535176680862626863;
    pub const ALPHA2: f64 = 0.020756297697173444164;
    pub const BETA2: f64 = -0.096356297697173444164;
    pub const G: f64 = 22.505556652895002422;
    pub const H: f64 = 0.0044433471049975784256;
    pub const X1: f64 = 6.697828181593054327;
    pub const X2: f64 = 12.479314488937018813;
    pub const K: f64 = 22.0220468675637249;
    pub const MIDDLE_AT_X1: f64 = 0.40617290133741257993;
    pub const B0: f64 = 25.062968486306127413;
    pub const EPS0_T500: f64 = 1.7302429964238013067e-16;
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn p0() -> ClosedForm {
    ClosedForm::new(ModelParams::baseline()).unwrap()
}

#[test]
fn coefficients_match_high_precision_reference() {
    let c = *p0().coeffs();
    for (name, got, want) in [
        ("alpha1", c.alpha1, reference::ALPHA1),
        ("beta1", c.beta1, reference::BETA1),
        ("alpha2", c.alpha2, reference::ALPHA2),
        ("beta2", c.beta2, reference::BETA2),
        ("G", c.g, reference::G),
        ("H", c.h, reference::H),
        ("K", c.k, reference::K),
    ] {
        assert!(rel(got, want) < 1e-12, "{name}: {got} vs {want}");
    }
    assert!(rel(c.x1, reference::X1) < 1e-11, "x1 {}", c.x1);
    assert!(rel(c.x2, reference::X2) < 1e-11, "x2 {}", c.x2);
}

#[test]
fn middle_integral_and_barrier_match_reference() {
    let cf = p0();
    let m = cf.middle_integral(cf.coeffs().x1).unwrap();
    assert!(rel(m, reference::MIDDLE_AT_X1) < 1e-10, "{m}");
    let b0 = cf.unconstrained_barrier().unwrap();
    assert!(rel(b0, reference::B0) < 1e-11, "{b0}");
    let eps0 = ruin_lower_bound(b0, 500.0, cf.params()).unwrap();
    assert!(rel(eps0, reference::EPS0_T500) < 1e-9, "{eps0}");
}

#[test]
fn unconstrained_barrier_is_zero_of_second_derivative() {
    let cf = p0();
    let x2 = cf.coeffs().x2;
    let g2 = |b: f64| cf.value_coeffs(b).unwrap().derivatives(b).1;
    let root = divreins_core::numeric::bisect(g2, x2 + 1e-6, 4.0 * x2, 1e-13, 200).unwrap();
    assert!(rel(root.x, reference::B0) < 1e-10, "{}", root.x);
}

/// Largest value of the HJB generator over `U` in `[l, 1]`.
fn max_generator(p: &ModelParams, g: f64, g1: f64, g2: f64) -> f64 {
    let gen = |u: f64| 0.5 * p.sigma2() * u * u * g2 + (p.mu() * u - p.a() * u * u - p.delta()) * g1 - p.c() * g;
    let quad = 0.5 * p.sigma2() * g2 - p.a() * g1;
    let mut best = gen(p.l()).max(gen(1.0));
    if quad < 0.0 {
        let u = -p.mu() * g1 / (2.0 * quad);
        if u > p.l() && u < 1.0 {
            best = best.max(gen(u));
        }
    }
    best
}

/// Solves `max_U L g = 0` for `g''`; the generator is increasing in `g''`.
fn implicit_g2(p: &ModelParams, g: f64, g1: f64) -> f64 {
    let f = |g2: f64| max_generator(p, g, g1, g2);
    let (mut lo, mut hi) = (-1.0, 1.0);
    while f(lo) > 0.0 {
        lo *= 2.0;
    }
    while f(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// RK4 shooting from `g(0) = 0, g'(0) = 1`; returns `(x, g, g')` samples.
fn shoot(p: &ModelParams, b: f64, n: usize) -> Vec<(f64, f64, f64)> {
    let h = b / n as f64;
    let rhs = |s: [f64; 2]| [s[1], implicit_g2(p, s[0], s[1])];
    let mut s = [0.0, 1.0];
    let mut out = vec![(0.0, s[0], s[1])];
    for i in 0..n {
        let k1 = rhs(s);
        let k2 = rhs([s[0] + 0.5 * h * k1[0], s[1] + 0.5 * h * k1[1]]);
        let k3 = rhs([s[0] + 0.5 * h * k2[0], s[1] + 0.5 * h * k2[1]]);
        let k4 = rhs([s[0] + h * k3[0], s[1] + h * k3[1]]);
        for j in 0..2 {
            s[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
        out.push(((i + 1) as f64 * h, s[0], s[1]));
    }
    out
}

#[test]
fn value_function_matches_hjb_shooting() {
    let cf = p0();
    let p = *cf.params();
    for b in [25.062968486306127, 100.0] {
        let n = 20_000;
        let path = shoot(&p, b, n);
        // the HJB is linear in g, so normalise to g'(b) = 1
        let scale = path.last().unwrap().2;
        let vc = cf.value_coeffs(b).unwrap();
        for &(x, g, _) in path.iter().step_by(n / 50).skip(1) {
            let want = g / scale;
            let got = vc.value(x);
            assert!(rel(got, want) < 1e-7, "b={b} x={x}: {got} vs {want}");
        }
    }
}

#[test]
fn eta_is_the_pointwise_maximiser_of_the_value_function() {
    let cf = p0();
    let c = *cf.coeffs();
    let p = *cf.params();
    let vc = cf.value_coeffs(60.0).unwrap();
    for i in 1..100 {
        let x = c.x1 + (c.x2 - c.x1) * i as f64 / 100.0;
        let (_, g1, g2) = vc.evaluate(x);
        let stationary = p.mu() * g1 / (2.0 * p.a() * g1 - p.sigma2() * g2);
        let eta = cf.eta(x).unwrap();
        assert!((stationary - eta).abs() < 1e-8, "x={x}: {stationary} vs {eta}");
    }
}

#[test]
fn analytic_derivatives_match_finite_differences() {
    let cf = p0();
    let vc = cf.value_coeffs(40.0).unwrap();
    // the middle branch carries ~1e-12 relative noise from the eta root
    let (h1, h2) = (1e-4, 1e-2);
    for x in [1.0, 4.0, 6.0, 8.0, 10.0, 12.0, 15.0, 30.0, 39.0] {
        let (g, g1, g2) = vc.evaluate(x);
        let fd1 = (vc.value(x + h1) - vc.value(x - h1)) / (2.0 * h1);
        let fd2 = (vc.value(x + h2) - 2.0 * g + vc.value(x - h2)) / (h2 * h2);
        assert!(rel(fd1, g1) < 1e-7, "g' at {x}: {fd1} vs {g1}");
        assert!((fd2 - g2).abs() < 1e-4 * g2.abs().max(1e-3), "g'' at {x}: {fd2} vs {g2}");
    }
}

#[test]
fn eta_slope_matches_finite_differences() {
    let cf = p0();
    let c = *cf.coeffs();
    let h = 1e-5;
    for i in 1..20 {
        let x = c.x1 + (c.x2 - c.x1) * i as f64 / 20.0;
        let fd = (cf.eta(x + h).unwrap() - cf.eta(x - h).unwrap()) / (2.0 * h);
        let analytic = cf.eta_slope(cf.eta(x).unwrap());
        assert!(rel(fd, analytic) < 1e-5, "x={x}: {fd} vs {analytic}");
    }
}
