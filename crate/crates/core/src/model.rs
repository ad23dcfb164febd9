//! Model constants of the controlled reserve process
//!
//! ```text
//! dR = (mu U - a U^2 - delta) dt + sigma U dW - dL,   U in [l, 1]
//! ```
//!
//! discounted at rate `c`. Parameters are always held in this normal form;
//! the preferred-level and Cramér–Lundberg parameterisations are converted on
//! the way in.

use std::fmt;

use crate::error::{Error, Result};

/// How a [`ModelParams`] value was produced. Informational only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Provenance {
    Direct,
    PreferredLevel(RawModelInputs),
    CramerLundberg {
        inputs: CramerLundbergInputs,
        p: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    mu: f64,
    a: f64,
    delta: f64,
    sigma: f64,
    /// Kept separately so a variance given by the caller round-trips exactly.
    sigma2: f64,
    l: f64,
    c: f64,
    provenance: Provenance,
}

/// Pre-penalty drift `mu1`, preferred reinsurance level `p` and penalty rate `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawModelInputs {
    pub mu1: f64,
    pub p: f64,
    pub a: f64,
}

/// Compound-Poisson inputs for the diffusion approximation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CramerLundbergInputs {
    /// Claim arrival intensity.
    pub lambda: f64,
    /// Safety loading of the expected-value premium principle.
    pub loading: f64,
    /// Mean claim size.
    pub m1: f64,
    /// Second moment of the claim size.
    pub m2: f64,
}

/// A single violated constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub constraint: &'static str,
    pub detail: String,
}

/// Every constraint a parameter set failed, in check order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    fn push(&mut self, constraint: &'static str, detail: String) {
        self.violations.push(Violation { constraint, detail });
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn first(&self) -> Option<&Violation> {
        self.violations.first()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{} ({})", v.constraint, v.detail)?;
        }
        Ok(())
    }
}

impl ModelParams {
    /// Builds and validates a parameter set in normal form.
    pub fn new(mu: f64, a: f64, delta: f64, sigma: f64, l: f64, c: f64) -> Result<Self> {
        ModelParams {
            mu,
            a,
            delta,
            sigma,
            sigma2: sigma * sigma,
            l,
            c,
            provenance: Provenance::Direct,
        }
        .validate()
    }

    /// Same as [`ModelParams::new`] but takes the variance `sigma2`.
    pub fn with_sigma2(mu: f64, a: f64, delta: f64, sigma2: f64, l: f64, c: f64) -> Result<Self> {
        if !(sigma2 > 0.0) {
            return Err(Error::InvalidInput {
                name: "sigma2",
                value: sigma2,
                reason: "must be positive",
            });
        }
        let mut params = Self::new(mu, a, delta, sigma2.sqrt(), l, c)?;
        params.sigma2 = sigma2;
        Ok(params)
    }

    /// The baseline set used throughout the tests and the figure sweeps:
    /// mu = 2, sigma^2 = 50, l = 0.5, a = 0.1, delta = 0.01, c = 0.05.
    pub fn baseline() -> Self {
        Self::with_sigma2(2.0, 0.1, 0.01, 50.0, 0.5, 0.05).expect("baseline parameters are valid")
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }
    pub fn l(&self) -> f64 {
        self.l
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Drift of the reserve under retention `u`.
    #[inline]
    pub fn drift(&self, u: f64) -> f64 {
        self.mu * u - self.a * u * u - self.delta
    }

    /// Lists every violated standing assumption.
    pub fn check(&self) -> ValidationReport {
        let mut r = ValidationReport::default();
        let ModelParams {
            mu,
            a,
            delta,
            sigma,
            l,
            c,
            ..
        } = *self;
        for (name, v) in [
            ("mu", mu),
            ("a", a),
            ("delta", delta),
            ("sigma", sigma),
            ("l", l),
            ("c", c),
        ] {
            if !v.is_finite() {
                r.push("finite", format!("{name} = {v}"));
            }
        }
        if !r.is_empty() {
            return r;
        }
        if !(sigma > 0.0) {
            r.push("sigma > 0", format!("sigma = {sigma}"));
        }
        if !(a > 0.0) {
            r.push("a > 0", format!("a = {a}"));
        }
        if !(c > 0.0) {
            r.push("c > 0", format!("c = {c}"));
        }
        if !(delta >= 0.0) {
            r.push("delta >= 0", format!("delta = {delta}"));
        }
        if !(l > 0.0 && l <= 1.0) {
            r.push("0 < l <= 1", format!("l = {l}"));
        }
        if a > 0.0 && !(mu / (2.0 * a) > 1.0) {
            r.push("mu / 2a > 1", format!("mu / 2a = {}", mu / (2.0 * a)));
        }
        if mu > 0.0 {
            if !(2.0 * delta / mu < l) {
                r.push("2 delta / mu < l", format!("2 delta / mu = {}, l = {l}", 2.0 * delta / mu));
            }
        } else {
            r.push("mu > 0", format!("mu = {mu}"));
        }
        let drift_l = mu * l - a * l * l - delta;
        if !(drift_l > 0.0) {
            r.push("mu l - a l^2 - delta > 0", format!("value = {drift_l}"));
        }
        r
    }

    /// Returns the parameters unchanged if every invariant holds.
    pub fn validate(self) -> Result<Self> {
        let report = self.check();
        if report.is_empty() {
            Ok(self)
        } else {
            Err(Error::InvalidParams(report))
        }
    }
}

impl fmt::Display for ModelParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "mu={} a={} delta={} sigma2={} l={} c={}",
            self.mu,
            self.a,
            self.delta,
            self.sigma2(),
            self.l,
            self.c
        )
    }
}

impl RawModelInputs {
    fn check(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::InvalidInput {
                name: "p",
                value: self.p,
                reason: "preferred level must lie in (0, 1]",
            });
        }
        if !(self.a > 0.0) {
            return Err(Error::InvalidInput {
                name: "a",
                value: self.a,
                reason: "penalty rate must be positive",
            });
        }
        if !self.mu1.is_finite() {
            return Err(Error::InvalidInput {
                name: "mu1",
                value: self.mu1,
                reason: "must be finite",
            });
        }
        Ok(())
    }
}

/// Expands `mu1 U - a (U - p)^2` into normal form: `mu = mu1 + 2 a p`, `delta = a p^2`.
pub fn derive_params(raw: RawModelInputs, sigma: f64, l: f64, c: f64) -> Result<ModelParams> {
    raw.check()?;
    ModelParams {
        mu: raw.mu1 + 2.0 * raw.a * raw.p,
        a: raw.a,
        delta: raw.a * raw.p * raw.p,
        sigma,
        sigma2: sigma * sigma,
        l,
        c,
        provenance: Provenance::PreferredLevel(raw),
    }
    .validate()
}

/// Diffusion approximation of the compound-Poisson reserve: returns
/// `(mu1, sigma)` with `mu1 = loading * lambda * m1` and `sigma = sqrt(lambda * m2)`.
pub fn from_cramer_lundberg(cl: CramerLundbergInputs) -> Result<(f64, f64)> {
    let CramerLundbergInputs {
        lambda,
        loading,
        m1,
        m2,
    } = cl;
    let checks: [(&'static str, f64, bool, &'static str); 4] = [
        ("lambda", lambda, lambda > 0.0, "must be positive"),
        ("loading", loading, loading > 0.0, "must be positive"),
        ("m1", m1, m1 > 0.0, "must be positive"),
        ("m2", m2, m2 >= m1 * m1, "second moment must be at least m1^2"),
    ];
    for (name, value, ok, reason) in checks {
        if !ok || !value.is_finite() {
            return Err(Error::InvalidInput {
                name,
                value,
                reason,
            });
        }
    }
    Ok((loading * lambda * m1, (lambda * m2).sqrt()))
}

/// Cramér–Lundberg inputs plus a preferred level `p`, penalty `a`, minimum
/// retention `l` and discount `c`, all the way to normal form.
pub fn params_from_cramer_lundberg(
    cl: CramerLundbergInputs,
    p: f64,
    a: f64,
    l: f64,
    c: f64,
) -> Result<ModelParams> {
    let (mu1, sigma) = from_cramer_lundberg(cl)?;
    let mut params = derive_params(RawModelInputs { mu1, p, a }, sigma, l, c)?;
    params.provenance = Provenance::CramerLundberg { inputs: cl, p };
    Ok(params)
}
