//! Effective dimension, the two-regime minimax lower-bound envelopes, and
//! switching-budget solvers.
//!
//! All unnamed scale constants default to 1: the bound's use here is shape
//! comparison (log-log slopes and crossing points), not absolute levels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `D = d (1/alpha - 1/beta)`.
pub fn effective_dimension(d: usize, alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha > 0.0) || !(beta >= alpha) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "need 0 < alpha <= beta, got alpha={alpha}, beta={beta}"
        )));
    }
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be >= 1".into()));
    }
    Ok(d as f64 * (1.0 / alpha - 1.0 / beta))
}

/// Which of the two lower-bound regimes applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `alpha < beta`: polynomial variance-independent term `n^{-1/D}`.
    AlphaLtBeta,
    /// `alpha = beta`: exponential variance-independent term.
    AlphaEqBeta,
}

/// Lower-bound shape: regime, effective dimension, and free constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSpec {
    pub regime: Regime,
    /// Effective dimension; zero exactly in the alpha = beta regime.
    pub d_eff: f64,
    /// Overall scale on the bound.
    pub b_poly: f64,
    /// Scale of the exponential term (alpha = beta regime).
    pub b_exp_scale: f64,
    /// Rate of the exponential term (alpha = beta regime). The paper's
    /// rate constant decays like `3^{-d}` up to unknown factors, so it is
    /// left user-supplied.
    pub b_exp_rate: f64,
}

impl BoundSpec {
    pub fn new(regime: Regime, d_eff: f64) -> Result<Self> {
        BoundSpec::with_constants(regime, d_eff, 1.0, 1.0, 1.0)
    }

    pub fn with_constants(
        regime: Regime,
        d_eff: f64,
        b_poly: f64,
        b_exp_scale: f64,
        b_exp_rate: f64,
    ) -> Result<Self> {
        match regime {
            Regime::AlphaLtBeta if !(d_eff > 0.0) => {
                return Err(Error::InvalidParameter(
                    "alpha < beta regime requires effective dimension D > 0".into(),
                ))
            }
            Regime::AlphaEqBeta if d_eff != 0.0 => {
                return Err(Error::InvalidParameter(
                    "alpha = beta regime requires effective dimension D = 0".into(),
                ))
            }
            _ => {}
        }
        if !(b_poly > 0.0) || !(b_exp_scale > 0.0) || !(b_exp_rate > 0.0) {
            return Err(Error::InvalidParameter("bound constants must be > 0".into()));
        }
        Ok(BoundSpec { regime, d_eff, b_poly, b_exp_scale, b_exp_rate })
    }

    /// Builds the spec from shape parameters, deriving the regime.
    pub fn from_shape(d: usize, alpha: f64, beta: f64) -> Result<Self> {
        let d_eff = effective_dimension(d, alpha, beta)?;
        if alpha == beta {
            BoundSpec::new(Regime::AlphaEqBeta, 0.0)
        } else {
            BoundSpec::new(Regime::AlphaLtBeta, d_eff)
        }
    }

    /// Variance-dependent term: `(sigma^2/n)^{1/(D+2)}`.
    pub fn variance_term(&self, n: f64, sigma2: f64) -> f64 {
        (sigma2 / n).powf(1.0 / (self.d_eff + 2.0))
    }

    /// Variance-independent term: `n^{-1/D}` or the exponential decay.
    pub fn deterministic_term(&self, n: f64) -> f64 {
        match self.regime {
            Regime::AlphaLtBeta => n.powf(-1.0 / self.d_eff),
            Regime::AlphaEqBeta => self.b_exp_scale * (-self.b_exp_rate * n).exp(),
        }
    }
}

/// `b_poly * max(variance term, variance-independent term)`. With
/// `sigma^2 = 0` the bound collapses to the variance-independent term.
pub fn lower_bound(spec: &BoundSpec, n: usize, sigma2: f64) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    if !(sigma2 >= 0.0) {
        return Err(Error::InvalidParameter("sigma^2 must be >= 0".into()));
    }
    let nf = n as f64;
    let det = spec.deterministic_term(nf);
    let var = if sigma2 == 0.0 { 0.0 } else { spec.variance_term(nf, sigma2) };
    Ok(spec.b_poly * det.max(var))
}

/// Budget at which the two terms cross. Closed form `sigma^{-D}` in the
/// `alpha < beta` regime; bisection to relative tolerance 1e-9 in the
/// `alpha = beta` regime. Requires `sigma^2 > 0`.
pub fn switching_budget(spec: &BoundSpec, sigma2: f64) -> Result<f64> {
    if !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter(
            "switching budget requires sigma^2 > 0; with sigma^2 = 0 there is no crossing".into(),
        ));
    }
    match spec.regime {
        Regime::AlphaLtBeta => Ok(sigma2.powf(-spec.d_eff / 2.0)),
        Regime::AlphaEqBeta => {
            // root of sqrt(sigma^2/n) = scale * exp(-rate n) in n,
            // compared in log space
            let f = |n: f64| {
                (spec.b_exp_scale.ln() - spec.b_exp_rate * n) - 0.5 * (sigma2 / n).ln()
            };
            let mut lo = 1.0f64;
            if f(lo) <= 0.0 {
                // the polynomial term already dominates at n = 1
                return Ok(1.0);
            }
            let mut hi = 2.0f64;
            while f(hi) > 0.0 {
                hi *= 2.0;
                if hi > 1e18 {
                    return Err(Error::AssertionFailed(
                        "no crossing found below n = 1e18".into(),
                    ));
                }
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if f(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if (hi - lo) / hi < 1e-12 {
                    break;
                }
            }
            Ok(0.5 * (lo + hi))
        }
    }
}
