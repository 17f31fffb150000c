//! Weight functions applied to increments before counting: bounded C^1
//! functions vanishing at zero with polynomially controlled derivatives.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhoKind {
    /// `exp(-1/|x|)` extended by 0 at the origin; suits any growth order.
    ExpBump,
    /// `|x|^p / (1 + |x|^p)`.
    Poly,
    Custom,
}

/// Serializable description of a catalogue weight function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RhoSpec {
    Poly { p: f64 },
    ExpBump { p: f64 },
}

impl RhoSpec {
    pub fn build(&self) -> Result<RhoFunction, RhoError> {
        match *self {
            RhoSpec::Poly { p } => RhoFunction::poly(p),
            RhoSpec::ExpBump { p } => RhoFunction::exp_bump(p),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RhoError {
    #[error("invalid weight function parameter: {0}")]
    InvalidParameter(String),
    #[error("weight function bound violated at x = {x:.6e}: {what} = {value:.6e} exceeds {limit:.6e}")]
    BoundViolated { what: &'static str, x: f64, value: f64, limit: f64 },
    #[error("weight function must vanish at zero, got rho(0) = {0:.6e}")]
    NotVanishingAtZero(f64),
    #[error("weight function must be positive away from zero, got rho({x:.6e}) = {value:.6e}")]
    NotPositive { x: f64, value: f64 },
}

/// A weight function together with its derivative and growth metadata.
#[derive(Clone)]
pub struct RhoFunction {
    name: String,
    rho: RealFn,
    drho: RealFn,
    p: f64,
    k: f64,
    kind: RhoKind,
    spec: Option<RhoSpec>,
}

impl fmt::Debug for RhoFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RhoFunction")
            .field("name", &self.name)
            .field("p", &self.p)
            .field("k", &self.k)
            .field("kind", &self.kind)
            .finish()
    }
}

/// Log-spaced magnitudes used for the construction-time spot checks.
pub(crate) fn check_grid() -> impl Iterator<Item = f64> {
    // 1e-8 .. 1e3, 12 points per decade.
    (0..=132).map(|i| 10f64.powf(-8.0 + i as f64 / 12.0))
}

impl RhoFunction {
    /// `rho(x) = |x|^p / (1 + |x|^p)` with growth order `p >= 1`.
    pub fn poly(p: f64) -> Result<Self, RhoError> {
        if !p.is_finite() || p < 1.0 {
            return Err(RhoError::InvalidParameter(format!(
                "poly weight needs finite p >= 1, got {p}"
            )));
        }
        let rho = move |x: f64| {
            let a = x.abs().powf(p);
            if a.is_infinite() {
                1.0
            } else {
                a / (1.0 + a)
            }
        };
        let drho = move |x: f64| {
            if x == 0.0 {
                return 0.0;
            }
            let a = x.abs().powf(p);
            if a.is_infinite() {
                return 0.0;
            }
            let d = p * x.abs().powf(p - 1.0) / ((1.0 + a) * (1.0 + a));
            d * x.signum()
        };
        Self::validated(
            format!("poly_{p}"),
            Arc::new(rho),
            Arc::new(drho),
            p,
            p.max(1.0),
            RhoKind::Poly,
            Some(RhoSpec::Poly { p }),
        )
    }

    /// `rho(x) = exp(-1/|x|)`, `rho(0) = 0`. Valid for any declared growth
    /// order `p`; the derivative bound constant is adjusted to `p`.
    pub fn exp_bump(p: f64) -> Result<Self, RhoError> {
        if !p.is_finite() || p <= 0.0 {
            return Err(RhoError::InvalidParameter(format!(
                "exp_bump weight needs finite p > 0, got {p}"
            )));
        }
        let rho = |x: f64| {
            if x == 0.0 {
                0.0
            } else {
                (-1.0 / x.abs()).exp()
            }
        };
        let drho = |x: f64| {
            if x == 0.0 {
                return 0.0;
            }
            let a = x.abs();
            (-1.0 / a).exp() / (a * a) * x.signum()
        };
        // sup_x exp(-1/x) x^-(p+1) is attained at x = 1/(p+1).
        let k = (((p + 1.0) * (p + 1.0).ln() - (p + 1.0)).exp()).max(1.0) * (1.0 + 1e-9);
        Self::validated(
            "exp_bump".to_string(),
            Arc::new(rho),
            Arc::new(drho),
            p,
            k,
            RhoKind::ExpBump,
            Some(RhoSpec::ExpBump { p }),
        )
    }

    /// Arbitrary weight function. The caller supplies the derivative, growth
    /// order and bound constant; the constructor spot-checks the claims.
    pub fn custom(
        name: impl Into<String>,
        rho: impl Fn(f64) -> f64 + Send + Sync + 'static,
        drho: impl Fn(f64) -> f64 + Send + Sync + 'static,
        p: f64,
        k: f64,
    ) -> Result<Self, RhoError> {
        if !p.is_finite() || p <= 0.0 || !k.is_finite() || k <= 0.0 {
            return Err(RhoError::InvalidParameter(format!(
                "custom weight needs finite p > 0 and K > 0, got p={p}, K={k}"
            )));
        }
        Self::validated(name.into(), Arc::new(rho), Arc::new(drho), p, k, RhoKind::Custom, None)
    }

    fn validated(
        name: String,
        rho: RealFn,
        drho: RealFn,
        p: f64,
        k: f64,
        kind: RhoKind,
        spec: Option<RhoSpec>,
    ) -> Result<Self, RhoError> {
        let out = Self { name, rho, drho, p, k, kind, spec };
        out.spot_check()?;
        Ok(out)
    }

    fn spot_check(&self) -> Result<(), RhoError> {
        let r0 = (self.rho)(0.0);
        if r0 != 0.0 {
            return Err(RhoError::NotVanishingAtZero(r0));
        }
        let slack = 1.0 + 1e-9;
        for m in check_grid() {
            for x in [m, -m] {
                let v = (self.rho)(x);
                if !v.is_finite() || v < 0.0 || v > self.k * slack {
                    return Err(RhoError::BoundViolated {
                        what: "rho(x)",
                        x,
                        value: v,
                        limit: self.k,
                    });
                }
                // Positivity is only decidable where the value cannot have
                // underflowed (exp(-1/|x|) is subnormal below ~1/700).
                if v == 0.0 && m >= 1e-2 {
                    return Err(RhoError::NotPositive { x, value: v });
                }
                let d = (self.drho)(x).abs();
                let limit = self.k * m.powf(self.p - 1.0);
                if !d.is_finite() || d > limit * slack + 1e-300 {
                    return Err(RhoError::BoundViolated {
                        what: "|rho'(x)|",
                        x,
                        value: d,
                        limit,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.rho)(x)
    }

    pub fn deriv(&self, x: f64) -> f64 {
        (self.drho)(x)
    }

    pub fn squared(&self, x: f64) -> f64 {
        let v = (self.rho)(x);
        v * v
    }

    pub fn growth_order(&self) -> f64 {
        self.p
    }

    pub fn bound(&self) -> f64 {
        self.k
    }

    pub fn kind(&self) -> RhoKind {
        self.kind
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn spec(&self) -> Option<&RhoSpec> {
        self.spec.as_ref()
    }

    /// Checks `|f(x)| <= K (1 and x^2)` on the spot-check grid, the growth
    /// envelope required of integrands in the bias analysis.
    pub fn is_quadratically_bounded(&self) -> bool {
        let slack = 1.0 + 1e-9;
        check_grid().all(|m| {
            [m, -m].into_iter().all(|x| {
                let v = self.eval(x).abs();
                v <= self.k * (x * x).min(1.0) * slack
            })
        })
    }
}
