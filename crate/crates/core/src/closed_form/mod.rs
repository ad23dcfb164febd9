//! Closed-form solution of the barrier-constrained HJB problem.
//!
//! The value function splits `[0, inf)` into four pieces. On `[0, x1]` the
//! retention sits at the floor `l`, on `[x2, b]` it is full (`U = 1`), and in
//! between it follows the implicit curve `eta(x)`:
//!
//! ```text
//! (G - eta)^{G/(G-H)} (eta - H)^{-H/(G-H)} = K exp(-2a (x - x1) / sigma^2)
//! ```
//!
//! Above the barrier `b` everything is paid out, so `g` is affine with slope one.

mod value;

pub use value::{HjbResidual, ValueCoeffs};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numeric::{bisect, integrate, normal_sf};

/// Absolute tolerance of the `eta` root solve.
pub const ETA_TOL: f64 = 1e-12;
const ETA_MAX_ITER: usize = 200;
/// Relative tolerance of the middle-region quadrature.
pub const MIDDLE_REL_TOL: f64 = 1e-10;

/// Barrier-independent constants of the closed-form value function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    /// Roots of `0.5 sigma^2 l^2 t^2 + (mu l - a l^2 - delta) t - c`.
    pub alpha1: f64,
    pub beta1: f64,
    /// Roots of `0.5 sigma^2 t^2 + (mu - a - delta) t - c`.
    pub alpha2: f64,
    pub beta2: f64,
    /// Roots of `2 a mu u^2 - (2 c sigma^2 + mu^2 + 4 a delta) u + 2 mu delta`.
    pub g: f64,
    pub h: f64,
    pub k: f64,
    /// Where retention leaves the floor `l`.
    pub x1: f64,
    /// Where retention reaches one.
    pub x2: f64,
}

impl Coefficients {
    pub fn compute(params: &ModelParams) -> Result<Self> {
        let ModelParamsView {
            mu,
            a,
            delta,
            s2,
            l,
            c,
        } = ModelParamsView::of(params);

        let (alpha1, beta1) = char_roots(0.5 * s2 * l * l, mu * l - a * l * l - delta, c);
        let (alpha2, beta2) = char_roots(0.5 * s2, mu - a - delta, c);

        let sum = 2.0 * c * s2 + mu * mu + 4.0 * a * delta;
        let disc = sum * sum - 16.0 * a * mu * mu * delta;
        if !(disc >= 0.0) {
            return Err(Error::Domain {
                what: "discriminant of the eta quadratic",
                value: disc,
            });
        }
        let g = (sum + disc.sqrt()) / (4.0 * a * mu);
        // product form avoids cancellation when delta is small
        let h = delta / (a * g);
        if !(h < l && g > 1.0) {
            return Err(Error::Domain {
                what: "ordering H < l <= 1 < G",
                value: (l - h).min(g - 1.0),
            });
        }
        let ln_k = (g * (g - l).ln() - h * (l - h).ln()) / (g - h);

        let kappa = 0.5 * mu * l - delta;
        let den = c - alpha1 * kappa;
        if !(den > 0.0) {
            return Err(Error::Domain {
                what: "x1 log denominator c - alpha1 (mu l / 2 - delta)",
                value: den,
            });
        }
        let num = c - beta1 * kappa;
        let ratio = num / den;
        if !(ratio > 0.0) {
            return Err(Error::Domain {
                what: "x1 log argument",
                value: ratio,
            });
        }
        let x1 = ratio.ln() / (alpha1 - beta1);
        let spread = (g * ((g - l) / (g - 1.0)).ln() - h * ((l - h) / (1.0 - h)).ln()) / (g - h);
        let x2 = x1 + s2 / (2.0 * a) * spread;

        Ok(Coefficients {
            alpha1,
            beta1,
            alpha2,
            beta2,
            g,
            h,
            k: ln_k.exp(),
            x1,
            x2,
        })
    }
}

/// Roots `(positive, negative)` of `p t^2 + q t - c` for `p, c > 0`.
fn char_roots(p: f64, q: f64, c: f64) -> (f64, f64) {
    let root = (q * q + 4.0 * p * c).sqrt();
    if q >= 0.0 {
        let neg = (-q - root) / (2.0 * p);
        (-c / (p * neg), neg)
    } else {
        let pos = (-q + root) / (2.0 * p);
        (pos, -c / (p * pos))
    }
}

#[derive(Clone, Copy)]
struct ModelParamsView {
    mu: f64,
    a: f64,
    delta: f64,
    s2: f64,
    l: f64,
    c: f64,
}

impl ModelParamsView {
    fn of(p: &ModelParams) -> Self {
        ModelParamsView {
            mu: p.mu(),
            a: p.a(),
            delta: p.delta(),
            s2: p.sigma2(),
            l: p.l(),
            c: p.c(),
        }
    }
}

/// Parameters together with their closed-form constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedForm {
    params: ModelParams,
    coeffs: Coefficients,
    ln_k: f64,
    /// Middle-region exponent over the whole of `[x1, x2]`.
    middle_total: f64,
}

impl ClosedForm {
    pub fn new(params: ModelParams) -> Result<Self> {
        let params = params.validate()?;
        let coeffs = Coefficients::compute(&params)?;
        let mut cf = ClosedForm {
            params,
            coeffs,
            ln_k: coeffs.k.ln(),
            middle_total: 0.0,
        };
        cf.middle_total = cf.middle_exponent_from(cf.params.l());
        Ok(cf)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn coeffs(&self) -> &Coefficients {
        &self.coeffs
    }

    /// Log of the left side of the implicit `eta` relation, as a function of `u`.
    /// Strictly decreasing on `(H, G)`.
    fn eta_lhs_ln(&self, u: f64) -> f64 {
        let Coefficients { g, h, .. } = self.coeffs;
        (g * (g - u).ln() - h * (u - h).ln()) / (g - h)
    }

    /// Interior retention on `[x1, x2]`.
    pub fn eta(&self, x: f64) -> Result<f64> {
        let Coefficients { x1, x2, .. } = self.coeffs;
        if !(x >= x1 && x <= x2) {
            return Err(Error::OutOfRange {
                what: "eta",
                x,
                lo: x1,
                hi: x2,
            });
        }
        Ok(self.eta_unchecked(x))
    }

    pub(crate) fn eta_unchecked(&self, x: f64) -> f64 {
        let l = self.params.l();
        let target = self.ln_k - 2.0 * self.params.a() / self.params.sigma2() * (x - self.coeffs.x1);
        let f = |u: f64| self.eta_lhs_ln(u) - target;
        if f(l) <= 0.0 {
            return l;
        }
        if f(1.0) >= 0.0 {
            return 1.0;
        }
        bisect(f, l, 1.0, ETA_TOL, ETA_MAX_ITER)
            .map(|r| r.x)
            .expect("eta bracket holds by monotonicity")
    }

    /// Slope of `eta` from the ODE it satisfies:
    /// `eta' = 2a (G - eta)(eta - H) / (sigma^2 eta)`.
    pub fn eta_slope(&self, u: f64) -> f64 {
        let Coefficients { g, h, .. } = self.coeffs;
        2.0 * self.params.a() * (g - u) * (u - h) / (self.params.sigma2() * u)
    }

    /// Optimal retention `U*(x)`.
    pub fn retention(&self, x: f64) -> f64 {
        let Coefficients { x1, x2, .. } = self.coeffs;
        if x <= x1 {
            self.params.l()
        } else if x >= x2 {
            1.0
        } else {
            self.eta_unchecked(x)
        }
    }

    /// `dy/du` along the middle region when parameterised by `u = eta(y)`.
    fn dy_du(&self, u: f64) -> f64 {
        let Coefficients { g, h, .. } = self.coeffs;
        self.params.sigma2() / (2.0 * self.params.a()) * u / ((g - u) * (u - h))
    }

    fn middle_exponent_from(&self, u_lo: f64) -> f64 {
        if u_lo >= 1.0 {
            return 0.0;
        }
        let mu = self.params.mu();
        let delta = self.params.delta();
        let c = self.params.c();
        integrate(
            |u| c / (0.5 * mu * u - delta) * self.dy_du(u),
            u_lo,
            1.0,
            MIDDLE_REL_TOL * 1e-2,
            0.0,
        )
        .0
    }

    /// `int_x^{x2} c / (mu eta(y) / 2 - delta) dy` for `x` in `[x1, x2]`.
    pub fn middle_integral(&self, x: f64) -> Result<f64> {
        let u = self.eta(x)?;
        Ok(self.middle_exponent_from(u))
    }

    pub(crate) fn middle_total(&self) -> f64 {
        self.middle_total
    }

    /// `v(t) = -c + (mu/2 - delta) t`.
    pub(crate) fn v(&self, t: f64) -> f64 {
        -self.params.c() + (0.5 * self.params.mu() - self.params.delta()) * t
    }

    /// The barrier at which `g''(b-)` vanishes, i.e. the optimal barrier
    /// without a ruin constraint.
    pub fn unconstrained_barrier(&self) -> Result<f64> {
        let Coefficients {
            alpha2, beta2, x2, ..
        } = self.coeffs;
        let arg = beta2 * beta2 * self.v(alpha2) / (alpha2 * alpha2 * self.v(beta2));
        if !(arg > 0.0) {
            return Err(Error::Domain {
                what: "unconstrained barrier log argument",
                value: arg,
            });
        }
        let b0 = x2 + arg.ln() / (alpha2 - beta2);
        if !(b0 > x2) {
            return Err(Error::Domain {
                what: "unconstrained barrier offset b0 - x2",
                value: b0 - x2,
            });
        }
        Ok(b0)
    }

    pub fn value_coeffs(&self, b: f64) -> Result<ValueCoeffs> {
        ValueCoeffs::new(*self, b)
    }
}

/// Lower bound on the ruin probability by horizon `horizon` when dividends are
/// paid at barrier `b0`:
/// `4 [1 - Phi(b0 / (l sigma sqrt(T)))]^2 exp(-(mu - a - delta)^2 T / sigma^2)`.
pub fn ruin_lower_bound(b0: f64, horizon: f64, params: &ModelParams) -> Result<f64> {
    if !(b0 >= 0.0) {
        return Err(Error::InvalidInput {
            name: "b0",
            value: b0,
            reason: "must be nonnegative",
        });
    }
    if !(horizon > 0.0) {
        return Err(Error::InvalidInput {
            name: "T",
            value: horizon,
            reason: "must be positive",
        });
    }
    let tail = normal_sf(b0 / (params.l() * params.sigma() * horizon.sqrt()));
    let drift = params.mu() - params.a() - params.delta();
    Ok(4.0 * tail * tail * (-drift * drift * horizon / params.sigma2()).exp())
}
