//! Optimal policy under a ruin-probability constraint.
//!
//! [`solve_policy`] chains the closed-form solution, the unconstrained
//! barrier, the constrained barrier search and the risk-capital inversion into
//! a single immutable [`PolicySolution`].

use crate::closed_form::{ClosedForm, ValueCoeffs};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::ruin_pde::{constrained_barrier, risk_capital, PdeSettings, Regime};

/// Output of the full pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicySolution {
    pub regime: Regime,
    /// Unconstrained optimal barrier.
    pub b0: f64,
    /// Operative barrier, equal to `b0` in the unconstrained regime.
    pub b_star: f64,
    pub epsilon: f64,
    pub horizon: f64,
    /// Smallest initial reserve with ruin probability at most `epsilon`
    /// under the barrier `b_star`.
    pub risk_capital: f64,
    /// `1 - psi(T, b_star)`.
    pub solvency: f64,
    /// Ruin probability by `T` started from `b0`.
    pub psi_b0: f64,
    /// PDE solves spent on the barrier search.
    pub solves: usize,
    pub monotone_fallback: bool,
    value: ValueCoeffs,
    unconstrained: ValueCoeffs,
}

impl PolicySolution {
    pub fn model(&self) -> &ClosedForm {
        self.value.model()
    }

    pub fn params(&self) -> &ModelParams {
        self.value.model().params()
    }

    /// Value function `V(x) = g(x, b_star)`; beyond the barrier it is the
    /// affine tail `x - b_star + g(b_star, b_star)`.
    pub fn value_at(&self, x: f64) -> f64 {
        self.value.value(x)
    }

    /// Optimal retention `U*(x)`.
    pub fn retention_at(&self, x: f64) -> f64 {
        self.model().retention(x)
    }

    /// Barrier-dependent value function constants at `b_star`.
    pub fn value_coeffs(&self) -> &ValueCoeffs {
        &self.value
    }

    /// Value function constants at `b0`.
    pub fn unconstrained_value_coeffs(&self) -> &ValueCoeffs {
        &self.unconstrained
    }
}

/// Solves for the optimal barrier, value function and risk capital.
///
/// Errors from each stage are wrapped in [`Error::Stage`] naming the stage.
pub fn solve_policy(
    params: ModelParams,
    epsilon: f64,
    horizon: f64,
    settings: &PdeSettings,
) -> Result<PolicySolution> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidInput {
            name: "epsilon",
            value: epsilon,
            reason: "risk level must lie in (0, 1)",
        });
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidInput {
            name: "horizon",
            value: horizon,
            reason: "must be positive and finite",
        });
    }
    let model = ClosedForm::new(params).map_err(|e| e.at("coefficients"))?;
    let b0 = model
        .unconstrained_barrier()
        .map_err(|e| e.at("unconstrained barrier"))?;
    let cb = constrained_barrier(epsilon, horizon, &model, settings)
        .map_err(|e| e.at("constrained barrier"))?;
    let x2 = model.coeffs().x2;
    if !(cb.b_star >= b0) {
        return Err(Error::OutOfRange {
            what: "b_star below b0",
            x: cb.b_star,
            lo: b0,
            hi: f64::INFINITY,
        }
        .at("constrained barrier"));
    }
    if !(cb.b_star > x2) {
        return Err(Error::OutOfRange {
            what: "b_star not above x2",
            x: cb.b_star,
            lo: x2,
            hi: f64::INFINITY,
        }
        .at("constrained barrier"));
    }
    let value = model
        .value_coeffs(cb.b_star)
        .map_err(|e| e.at("value function"))?;
    let unconstrained = model
        .value_coeffs(b0)
        .map_err(|e| e.at("value function"))?;
    let rc = risk_capital(epsilon, cb.b_star, horizon, &model, settings)
        .map_err(|e| e.at("risk capital"))?;
    Ok(PolicySolution {
        regime: cb.regime,
        b0,
        b_star: cb.b_star,
        epsilon,
        horizon,
        risk_capital: rc.x,
        solvency: 1.0 - cb.psi_b_star,
        psi_b0: cb.psi_b0,
        solves: cb.solves,
        monotone_fallback: cb.monotone_fallback,
        value,
        unconstrained,
    })
}

/// Cost of solvency `g(x, b_star) / g(x, b0)`.
pub fn value_ratio(x: f64, sol: &PolicySolution) -> Result<f64> {
    if x == 0.0 {
        return Err(Error::UndefinedAtZero);
    }
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::InvalidInput {
            name: "x",
            value: x,
            reason: "must be positive and finite",
        });
    }
    if sol.regime == Regime::Unconstrained {
        return Ok(1.0);
    }
    Ok(sol.value.value(x) / sol.unconstrained.value(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_epsilon_and_horizon() {
        let p = ModelParams::baseline();
        let s = PdeSettings::default();
        assert!(solve_policy(p, 1.5, 10.0, &s).is_err());
        assert!(solve_policy(p, 0.0, 10.0, &s).is_err());
        assert!(solve_policy(p, 0.1, -1.0, &s).is_err());
    }

    #[test]
    fn unconstrained_when_epsilon_is_large() {
        let s = PdeSettings {
            ny: 200,
            ..PdeSettings::default()
        };
        let sol = solve_policy(ModelParams::baseline(), 0.9, 1.0, &s).unwrap();
        assert_eq!(sol.regime, Regime::Unconstrained);
        assert_eq!(sol.b_star, sol.b0);
        assert_eq!(value_ratio(5.0, &sol).unwrap(), 1.0);
        assert!(matches!(value_ratio(0.0, &sol), Err(Error::UndefinedAtZero)));
        assert!(sol.risk_capital > 0.0 && sol.risk_capital <= sol.b_star);
    }

    #[test]
    fn numeric_failures_carry_stage_label() {
        let s = PdeSettings {
            ny: 10,
            ..PdeSettings::default()
        };
        let err = solve_policy(ModelParams::baseline(), 0.1, 1.0, &s).unwrap_err();
        match err {
            Error::Stage { stage, .. } => assert_eq!(stage, "constrained barrier"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
