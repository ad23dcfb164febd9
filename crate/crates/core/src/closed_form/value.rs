use super::{ClosedForm, Coefficients};
use crate::error::{Error, Result};

/// Barrier-dependent constants of the value function `g(., b)`.
///
/// On `[x2, b]` the value function is stored in the shifted form
/// `P e^{alpha2 (x - x2)} + Q e^{beta2 (x - x2)}`, which keeps the exponentials
/// bounded for large barriers. [`ValueCoeffs::b_coef`] and
/// [`ValueCoeffs::c_coef`] return the unshifted constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueCoeffs {
    model: ClosedForm,
    b: f64,
    a: f64,
    p: f64,
    q: f64,
}

/// Maximised generator at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HjbResidual {
    /// `max_U [0.5 sigma^2 U^2 g'' + (mu U - a U^2 - delta) g' - c g]`
    pub residual: f64,
    /// Argmax over `U` in `[l, 1]`.
    pub maximizer: f64,
    /// `U*(x)` for comparison.
    pub retention: f64,
}

impl ValueCoeffs {
    pub(super) fn new(model: ClosedForm, b: f64) -> Result<Self> {
        let Coefficients {
            alpha1,
            beta1,
            alpha2,
            beta2,
            x1,
            x2,
            ..
        } = *model.coeffs();
        if !(b >= x2) || !b.is_finite() {
            return Err(Error::OutOfRange {
                what: "barrier",
                x: b,
                lo: x2,
                hi: f64::INFINITY,
            });
        }
        let span = b - x2;
        // smooth fit at x2:  v(alpha2) P + v(beta2) Q = 0
        // barrier:           alpha2 e^{alpha2 span} P + beta2 e^{beta2 span} Q = 1
        let (va, vb) = (model.v(alpha2), model.v(beta2));
        let ea = (alpha2 * span).exp();
        let eb = (beta2 * span).exp();
        let det = va * beta2 * eb - vb * alpha2 * ea;
        if !(det.abs() > 0.0) || !det.is_finite() {
            return Err(Error::Singular {
                what: "barrier smooth-fit",
                det,
            });
        }
        let p = -vb / det;
        let q = va / det;
        let g_x2 = p + q;
        let a = if x1 > 0.0 {
            g_x2 * (-model.middle_total()).exp() / ((alpha1 * x1).exp() - (beta1 * x1).exp())
        } else {
            0.0
        };
        Ok(ValueCoeffs { model, b, a, p, q })
    }

    pub fn barrier(&self) -> f64 {
        self.b
    }

    pub fn model(&self) -> &ClosedForm {
        &self.model
    }

    /// Constant of the `[0, x1]` branch `A (e^{alpha1 x} - e^{beta1 x})`.
    pub fn a_coef(&self) -> f64 {
        self.a
    }

    /// `B` of `B e^{alpha2 x} + C e^{beta2 x}` on `[x2, b]`.
    pub fn b_coef(&self) -> f64 {
        let c = self.model.coeffs();
        self.p * (-c.alpha2 * c.x2).exp()
    }

    pub fn c_coef(&self) -> f64 {
        let c = self.model.coeffs();
        self.q * (-c.beta2 * c.x2).exp()
    }

    fn upper(&self, x: f64) -> (f64, f64, f64) {
        let c = self.model.coeffs();
        let s = x - c.x2;
        let ea = self.p * (c.alpha2 * s).exp();
        let eb = self.q * (c.beta2 * s).exp();
        (
            ea + eb,
            c.alpha2 * ea + c.beta2 * eb,
            c.alpha2 * c.alpha2 * ea + c.beta2 * c.beta2 * eb,
        )
    }

    fn lower(&self, x: f64) -> (f64, f64, f64) {
        let c = self.model.coeffs();
        let ea = (c.alpha1 * x).exp();
        let eb = (c.beta1 * x).exp();
        (
            self.a * (ea - eb),
            self.a * (c.alpha1 * ea - c.beta1 * eb),
            self.a * (c.alpha1 * c.alpha1 * ea - c.beta1 * c.beta1 * eb),
        )
    }

    fn middle(&self, x: f64) -> (f64, f64, f64) {
        let p = self.model.params();
        let u = self.model.eta_unchecked(x);
        let g = (self.p + self.q) * (-self.model.middle_exponent_from(u)).exp();
        let g1 = 2.0 * p.c() * g / (p.mu() * u - 2.0 * p.delta());
        let g2 = g1 * (2.0 * p.a() - p.mu() / u) / p.sigma2();
        (g, g1, g2)
    }

    /// `(g, g', g'')` with the branch assignment used throughout: boundary
    /// points belong to the outer branches and `g''(b)` is the left limit.
    pub fn evaluate(&self, x: f64) -> (f64, f64, f64) {
        let c = self.model.coeffs();
        if x <= 0.0 {
            let (_, g1, g2) = self.lower(0.0);
            (0.0, g1, g2)
        } else if x <= c.x1 {
            self.lower(x)
        } else if x < c.x2 {
            self.middle(x)
        } else if x <= self.b {
            self.upper(x)
        } else {
            self.tail(x)
        }
    }

    fn tail(&self, x: f64) -> (f64, f64, f64) {
        (x - self.b + self.upper(self.b).0, 1.0, 0.0)
    }

    /// One-sided limits `(left, right)` of `(g, g', g'')` at `x`, each taken
    /// from the branch formula on that side.
    pub fn limits(&self, x: f64) -> [(f64, f64, f64); 2] {
        let c = self.model.coeffs();
        let left = if x <= c.x1 {
            self.lower(x)
        } else if x <= c.x2 {
            self.middle(x)
        } else if x <= self.b {
            self.upper(x)
        } else {
            self.tail(x)
        };
        let right = if x < c.x1 {
            self.lower(x)
        } else if x < c.x2 {
            self.middle(x)
        } else if x < self.b {
            self.upper(x)
        } else {
            self.tail(x)
        };
        [left, right]
    }

    /// `g(x, b)`.
    pub fn value(&self, x: f64) -> f64 {
        self.evaluate(x).0
    }

    /// `(g', g'')`; at `x = b` the second derivative is the left limit.
    pub fn derivatives(&self, x: f64) -> (f64, f64) {
        let (_, g1, g2) = self.evaluate(x);
        (g1, g2)
    }

    /// Maximises the HJB generator over `U` in `[l, 1]` at `x`.
    pub fn hjb_residual(&self, x: f64) -> HjbResidual {
        let p = self.model.params();
        let (g, g1, g2) = self.evaluate(x);
        let l = p.l();
        let gen = |u: f64| 0.5 * p.sigma2() * u * u * g2 + p.drift(u) * g1 - p.c() * g;
        let quad = 0.5 * p.sigma2() * g2 - p.a() * g1;
        let maximizer = if quad < 0.0 {
            (p.mu() * g1 / (2.0 * p.a() * g1 - p.sigma2() * g2)).clamp(l, 1.0)
        } else if gen(1.0) >= gen(l) {
            1.0
        } else {
            l
        };
        HjbResidual {
            residual: gen(maximizer),
            maximizer,
            retention: self.model.retention(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    fn p0() -> ClosedForm {
        ClosedForm::new(ModelParams::baseline()).unwrap()
    }

    #[test]
    fn boundary_conditions() {
        let cf = p0();
        for b in [cf.coeffs().x2, 25.0, 100.0] {
            let vc = cf.value_coeffs(b).unwrap();
            assert_eq!(vc.value(0.0), 0.0);
            assert!((vc.derivatives(b).0 - 1.0).abs() < 1e-10);
            let x2 = cf.coeffs().x2;
            let (g, g1, _) = vc.evaluate(x2);
            let p = cf.params();
            assert!((p.c() * g - (0.5 * p.mu() - p.delta()) * g1).abs() < 1e-10);
            assert_eq!(vc.value(b + 5.0) - vc.value(b), 5.0);
        }
    }

    #[test]
    fn unshifted_constants_match_shifted_form() {
        let cf = p0();
        let vc = cf.value_coeffs(40.0).unwrap();
        let c = cf.coeffs();
        for x in [c.x2, 20.0, 40.0] {
            let direct = vc.b_coef() * (c.alpha2 * x).exp() + vc.c_coef() * (c.beta2 * x).exp();
            assert!((direct - vc.value(x)).abs() < 1e-12 * vc.value(x));
        }
        assert!(vc.a_coef() > 0.0);
    }

    #[test]
    fn barrier_below_x2_rejected() {
        let cf = p0();
        assert!(cf.value_coeffs(cf.coeffs().x2 - 0.1).is_err());
    }

    #[test]
    fn second_derivative_vanishes_at_unconstrained_barrier() {
        let cf = p0();
        let b0 = cf.unconstrained_barrier().unwrap();
        assert!((b0 - 25.1).abs() < 0.1, "b0 = {b0}");
        let vc = cf.value_coeffs(b0).unwrap();
        assert!(vc.derivatives(b0).1.abs() < 1e-9);
    }

    #[test]
    fn maximizer_is_retention() {
        let cf = p0();
        let b0 = cf.unconstrained_barrier().unwrap();
        let vc = cf.value_coeffs(b0).unwrap();
        for i in 1..200 {
            let x = b0 * i as f64 / 200.0;
            let r = vc.hjb_residual(x);
            assert!(r.residual.abs() < 1e-8, "residual {} at {x}", r.residual);
            assert!((r.maximizer - r.retention).abs() < 1e-8, "{r:?} at {x}");
        }
    }
}
