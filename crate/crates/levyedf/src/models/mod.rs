//! Levy measures with Lebesgue densities and the integral functionals built
//! from them: tail masses, weighted distribution functions `N_rho`, the
//! covariance kernel `H_rho` and its semimetric `d_rho`.

mod rho;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quad::{self, QuadError, QuadratureConfig};

pub use rho::{RhoError, RhoFunction, RhoKind, RhoSpec};

pub(crate) use rho::check_grid;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Error)]
pub enum ModelError {
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
    #[error("density is negative or non-finite at x = {x:.6e}: {value:.6e}")]
    DensityInvalid { x: f64, value: f64 },
    #[error("density exceeds the declared near-zero envelope at x = {x:.6e}: {value:.6e} > {limit:.6e}")]
    NearZeroBoundViolated { x: f64, value: f64, limit: f64 },
    #[error("density does not integrate 1 and x^2: {0}")]
    NotIntegrable(String),
    #[error("closed-form tail disagrees with quadrature at v = {v}: closed {closed:.9e}, quadrature {quadrature:.9e}")]
    ClosedFormMismatch { v: f64, closed: f64, quadrature: f64 },
    #[error("total mass of the Levy measure is infinite; a positive truncation level is required")]
    InfiniteMass,
    #[error("internal consistency failure: {0}")]
    Internal(String),
    #[error(transparent)]
    Quad(#[from] QuadError),
}

/// Where the density lives. Segments never straddle the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Support {
    PositiveHalfLine,
    NegativeHalfLine,
    BothHalfLines,
    Interval { lo: f64, hi: f64 },
}

impl Support {
    /// Disjoint open segments, each lying entirely in `(-inf, 0]` or `[0, inf)`.
    pub fn segments(&self) -> Vec<(f64, f64)> {
        match *self {
            Support::PositiveHalfLine => vec![(0.0, f64::INFINITY)],
            Support::NegativeHalfLine => vec![(f64::NEG_INFINITY, 0.0)],
            Support::BothHalfLines => {
                vec![(f64::NEG_INFINITY, 0.0), (0.0, f64::INFINITY)]
            }
            Support::Interval { lo, hi } => {
                if lo < 0.0 && hi > 0.0 {
                    vec![(lo, 0.0), (0.0, hi)]
                } else {
                    vec![(lo, hi)]
                }
            }
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        if x == 0.0 {
            return false;
        }
        match *self {
            Support::PositiveHalfLine => x > 0.0,
            Support::NegativeHalfLine => x < 0.0,
            Support::BothHalfLines => true,
            Support::Interval { lo, hi } => x > lo && x < hi,
        }
    }

    pub fn infimum(&self) -> f64 {
        match *self {
            Support::PositiveHalfLine => 0.0,
            Support::NegativeHalfLine | Support::BothHalfLines => f64::NEG_INFINITY,
            Support::Interval { lo, .. } => lo,
        }
    }
}

/// Intersection of the constraints `x > gt`, `x <= le`, `|x| > abs_gt` and
/// `|x| <= abs_le`. Every integration region the estimator theory needs is of
/// this form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub gt: f64,
    pub le: f64,
    pub abs_gt: f64,
    pub abs_le: f64,
}

impl Region {
    pub fn full() -> Self {
        Self { gt: f64::NEG_INFINITY, le: f64::INFINITY, abs_gt: 0.0, abs_le: f64::INFINITY }
    }

    /// `{ x <= t }`.
    pub fn half_line(t: f64) -> Self {
        Self { le: t, ..Self::full() }
    }

    /// `{ |x| > v }`.
    pub fn abs_above(v: f64) -> Self {
        Self { abs_gt: v, ..Self::full() }
    }

    /// `{ lo < |x| <= hi }`.
    pub fn abs_annulus(lo: f64, hi: f64) -> Self {
        Self { abs_gt: lo, abs_le: hi, ..Self::full() }
    }

    /// `{ |x| <= u }`.
    pub fn abs_below(u: f64) -> Self {
        Self { abs_le: u, ..Self::full() }
    }

    /// `{ a < x <= b }`.
    pub fn between(a: f64, b: f64) -> Self {
        Self { gt: a, le: b, ..Self::full() }
    }

    pub fn and_le(self, t: f64) -> Self {
        Self { le: self.le.min(t), ..self }
    }

    /// Clip against one support segment; the segment must not straddle 0.
    pub fn clip(&self, seg: (f64, f64)) -> Option<(f64, f64)> {
        let (s_lo, s_hi) = seg;
        let (lo, hi) = if s_lo >= 0.0 {
            (
                s_lo.max(self.abs_gt).max(self.gt),
                s_hi.min(self.abs_le).min(self.le),
            )
        } else {
            (
                s_lo.max(-self.abs_le).max(self.gt),
                s_hi.min(-self.abs_gt).min(self.le),
            )
        };
        (hi > lo).then_some((lo, hi))
    }
}

/// How jump sizes are drawn from restricted versions of the measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    InverseCdf,
    Rejection,
    ExactFamily,
}

/// Internal sampling recipe attached to each model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum SampleStrategy {
    /// One-sided exponential density `e^-x` on `(0, inf)`: exact inversion.
    ExpTail,
    /// `c |x|^-(1+s) e^(-lambda |x|)` per side; mixture-envelope rejection.
    TemperedPowerLaw { c: f64, s: f64, lambda: f64 },
    /// Numerical inversion of the mass function; slow, for custom fixtures.
    NumericInverse,
}

/// Serializable description of a catalogue model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    /// Finite activity, `h(x) = e^-x` on `(0, inf)`.
    ExpJump,
    /// Infinite activity, `h(x) = c |x|^-(1+beta) e^(-lambda |x|)`.
    StableTempered { c: f64, beta: f64, lambda: f64 },
    /// Infinite activity, `h(x) = c e^(-lambda |x|) / |x|`.
    VarianceGamma { c: f64, lambda: f64 },
}

impl ModelSpec {
    pub fn build(&self) -> Result<LevyModel, ModelError> {
        match *self {
            ModelSpec::ExpJump => LevyModel::exp_jump(),
            ModelSpec::StableTempered { c, beta, lambda } => {
                LevyModel::stable_tempered(c, beta, lambda)
            }
            ModelSpec::VarianceGamma { c, lambda } => LevyModel::variance_gamma(c, lambda),
        }
    }
}

/// Everything needed to build a non-catalogue model (test fixtures mostly).
pub struct CustomModel {
    pub name: String,
    pub density: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub support: Support,
    pub beta: f64,
    pub tail_exponent: f64,
    /// Declared envelope `h(x) <= K |x|^-(1+beta)` for `|x| <= radius`.
    pub near_zero_bound: f64,
    pub near_zero_radius: f64,
    pub finite_activity: bool,
    pub closed_form_tail: Option<Box<dyn Fn(f64) -> f64 + Send + Sync>>,
}

/// A Levy measure with a Lebesgue density and the metadata the estimator
/// theory refers to. Immutable after construction; all operations are pure.
#[derive(Clone)]
pub struct LevyModel {
    name: String,
    density: RealFn,
    support: Support,
    beta: f64,
    tail_exponent: f64,
    closed_form_tail: Option<RealFn>,
    sampler_kind: SamplerKind,
    strategy: SampleStrategy,
    finite_activity: bool,
    near_zero_bound: f64,
    near_zero_radius: f64,
    quad: QuadratureConfig,
    spec: Option<ModelSpec>,
}

impl fmt::Debug for LevyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LevyModel")
            .field("name", &self.name)
            .field("support", &self.support)
            .field("beta", &self.beta)
            .field("sampler_kind", &self.sampler_kind)
            .field("finite_activity", &self.finite_activity)
            .finish()
    }
}

impl LevyModel {
    /// `h(x) = e^-x` on `(0, inf)`; total mass 1, exact tail `e^-v`.
    pub fn exp_jump() -> Result<Self, ModelError> {
        let model = Self {
            name: "exp_jump".into(),
            density: Arc::new(|x: f64| if x > 0.0 { (-x).exp() } else { 0.0 }),
            support: Support::PositiveHalfLine,
            beta: 0.5,
            tail_exponent: f64::INFINITY,
            closed_form_tail: Some(Arc::new(|v: f64| if v <= 0.0 { 1.0 } else { (-v).exp() })),
            sampler_kind: SamplerKind::ExactFamily,
            strategy: SampleStrategy::ExpTail,
            finite_activity: true,
            near_zero_bound: 1.0,
            near_zero_radius: 1.0,
            quad: QuadratureConfig::default(),
            spec: Some(ModelSpec::ExpJump),
        };
        model.validate()?;
        Ok(model)
    }

    /// Symmetric tempered stable density `c |x|^-(1+beta) e^(-lambda |x|)`.
    pub fn stable_tempered(c: f64, beta: f64, lambda: f64) -> Result<Self, ModelError> {
        if !c.is_finite() || c < 0.0 {
            return Err(ModelError::InvalidParameter(format!("c must be >= 0, got {c}")));
        }
        if !(beta > 0.0 && beta < 2.0) {
            return Err(ModelError::InvalidParameter(format!(
                "beta must lie in (0, 2), got {beta}"
            )));
        }
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(ModelError::InvalidParameter(format!("lambda must be > 0, got {lambda}")));
        }
        let density = move |x: f64| {
            if x == 0.0 {
                return 0.0;
            }
            let a = x.abs();
            c * a.powf(-(1.0 + beta)) * (-lambda * a).exp()
        };
        let model = Self {
            name: format!("stable_tempered(c={c},beta={beta},lambda={lambda})"),
            density: Arc::new(density),
            support: Support::BothHalfLines,
            beta,
            tail_exponent: f64::INFINITY,
            closed_form_tail: None,
            sampler_kind: SamplerKind::Rejection,
            strategy: SampleStrategy::TemperedPowerLaw { c, s: beta, lambda },
            finite_activity: c == 0.0,
            near_zero_bound: c.max(f64::MIN_POSITIVE),
            near_zero_radius: 1.0,
            quad: QuadratureConfig::default(),
            spec: Some(ModelSpec::StableTempered { c, beta, lambda }),
        };
        model.validate()?;
        Ok(model)
    }

    /// Symmetric variance-gamma density `c e^(-lambda |x|) / |x|`.
    pub fn variance_gamma(c: f64, lambda: f64) -> Result<Self, ModelError> {
        if !c.is_finite() || c < 0.0 {
            return Err(ModelError::InvalidParameter(format!("c must be >= 0, got {c}")));
        }
        if !lambda.is_finite() || lambda <= 0.0 {
            return Err(ModelError::InvalidParameter(format!("lambda must be > 0, got {lambda}")));
        }
        let density = move |x: f64| {
            if x == 0.0 {
                return 0.0;
            }
            let a = x.abs();
            c * (-lambda * a).exp() / a
        };
        // Any beta in (0, 2) bounds e^(-lambda a) / a by a^-(1+beta) near 0.
        let beta = 0.25;
        let model = Self {
            name: format!("variance_gamma(c={c},lambda={lambda})"),
            density: Arc::new(density),
            support: Support::BothHalfLines,
            beta,
            tail_exponent: f64::INFINITY,
            closed_form_tail: None,
            sampler_kind: SamplerKind::Rejection,
            strategy: SampleStrategy::TemperedPowerLaw { c, s: 0.0, lambda },
            finite_activity: c == 0.0,
            near_zero_bound: c.max(f64::MIN_POSITIVE),
            near_zero_radius: 1.0,
            quad: QuadratureConfig::default(),
            spec: Some(ModelSpec::VarianceGamma { c, lambda }),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn custom(cm: CustomModel) -> Result<Self, ModelError> {
        if !(cm.beta > 0.0 && cm.beta < 2.0) {
            return Err(ModelError::InvalidParameter(format!(
                "beta must lie in (0, 2), got {}",
                cm.beta
            )));
        }
        if !(cm.near_zero_bound > 0.0) || !(cm.near_zero_radius > 0.0) {
            return Err(ModelError::InvalidParameter(
                "near-zero envelope constants must be positive".into(),
            ));
        }
        let density: RealFn = Arc::from(cm.density);
        let model = Self {
            name: cm.name,
            density,
            support: cm.support,
            beta: cm.beta,
            tail_exponent: cm.tail_exponent,
            closed_form_tail: cm.closed_form_tail.map(|f| -> RealFn { Arc::from(f) }),
            sampler_kind: SamplerKind::InverseCdf,
            strategy: SampleStrategy::NumericInverse,
            finite_activity: cm.finite_activity,
            near_zero_bound: cm.near_zero_bound,
            near_zero_radius: cm.near_zero_radius,
            quad: QuadratureConfig::default(),
            spec: None,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_quadrature(mut self, quad: QuadratureConfig) -> Result<Self, ModelError> {
        quad.validate()?;
        self.quad = quad;
        Ok(self)
    }

    fn validate(&self) -> Result<(), ModelError> {
        self.quad.validate()?;
        // Density sane and within the declared near-zero envelope, spot
        // checked on a log grid over each side of the support.
        for m in rho::check_grid() {
            for x in [m, -m] {
                if !self.support.contains(x) {
                    continue;
                }
                let h = (self.density)(x);
                if !h.is_finite() || h < 0.0 {
                    return Err(ModelError::DensityInvalid { x, value: h });
                }
                if m <= self.near_zero_radius {
                    let limit = self.near_zero_bound * m.powf(-(1.0 + self.beta));
                    if h > limit * (1.0 + 1e-9) {
                        return Err(ModelError::NearZeroBoundViolated { x, value: h, limit });
                    }
                }
            }
        }
        // 1 and x^2 must be integrable (relative tolerance 1e-6).
        let cfg = QuadratureConfig { rel_tol: 1e-6, ..self.quad };
        let g = |x: f64| (x * x).min(1.0);
        let mut total = 0.0;
        for (a, b) in self.intervals(Region::full(), &[]) {
            let f = |x: f64| g(x) * self.density_at(x);
            match quad::integrate_interval(&f, a, b, &cfg) {
                Ok(r) => total += r.value,
                Err(e) => return Err(ModelError::NotIntegrable(e.to_string())),
            }
        }
        if !total.is_finite() {
            return Err(ModelError::NotIntegrable(format!("integral evaluated to {total}")));
        }
        // Declared closed-form tails must agree with quadrature.
        if let Some(tail) = &self.closed_form_tail {
            for v in [0.25, 0.5, 1.0, 2.0] {
                let closed = tail(v);
                let by_quad = self.integrate_weighted(|_| 1.0, Region::abs_above(v))?;
                let scale = closed.abs().max(1e-12);
                if (closed - by_quad).abs() / scale > 1e-6 {
                    return Err(ModelError::ClosedFormMismatch { v, closed, quadrature: by_quad });
                }
            }
        }
        Ok(())
    }

    /// Density against Lebesgue measure, zero outside the support.
    pub fn density_at(&self, x: f64) -> f64 {
        if self.support.contains(x) {
            (self.density)(x)
        } else {
            0.0
        }
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn tail_exponent(&self) -> f64 {
        self.tail_exponent
    }

    pub fn sampler_kind(&self) -> SamplerKind {
        self.sampler_kind
    }

    pub fn is_finite_activity(&self) -> bool {
        self.finite_activity
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn spec(&self) -> Option<&ModelSpec> {
        self.spec.as_ref()
    }

    pub fn quad_config(&self) -> &QuadratureConfig {
        &self.quad
    }

    pub(crate) fn strategy(&self) -> SampleStrategy {
        self.strategy
    }

    pub(crate) fn closed_form_tail_fn(&self) -> Option<&RealFn> {
        self.closed_form_tail.as_ref()
    }

    /// Integration intervals covering `support` intersected with `region`,
    /// split at the supplied interior breakpoints.
    fn intervals(&self, region: Region, breakpoints: &[f64]) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for seg in self.support.segments() {
            if let Some((lo, hi)) = region.clip(seg) {
                let mut cuts: Vec<f64> =
                    breakpoints.iter().copied().filter(|&c| c > lo && c < hi).collect();
                cuts.sort_by(f64::total_cmp);
                cuts.dedup();
                let mut a = lo;
                for c in cuts {
                    out.push((a, c));
                    a = c;
                }
                out.push((a, hi));
            }
        }
        out
    }

    /// `integral of g(x) nu(dx)` over `region`.
    pub fn integrate_weighted(
        &self,
        g: impl Fn(f64) -> f64,
        region: Region,
    ) -> Result<f64, ModelError> {
        self.integrate_weighted_with_breaks(g, region, &[])
    }

    /// Same as [`integrate_weighted`](Self::integrate_weighted) but force
    /// panel boundaries at the given points (useful when `g` has localized
    /// transitions, e.g. smooth cutoffs).
    pub fn integrate_weighted_with_breaks(
        &self,
        g: impl Fn(f64) -> f64,
        region: Region,
        breakpoints: &[f64],
    ) -> Result<f64, ModelError> {
        // Evaluate the weight first: an underflowed weight must not turn an
        // exploding density into 0 * inf = NaN.
        let f = |x: f64| {
            let gv = g(x);
            if gv == 0.0 {
                0.0
            } else {
                gv * self.density_at(x)
            }
        };
        let mut total = 0.0;
        for (a, b) in self.intervals(region, breakpoints) {
            total += quad::integrate_interval(&f, a, b, &self.quad)?.value;
        }
        Ok(total)
    }

    /// `nu({ |x| > v })`, by closed form when available.
    pub fn nu_tail_mass(&self, v: f64) -> Result<f64, ModelError> {
        if v.is_nan() || v < 0.0 {
            return Err(ModelError::InvalidParameter(format!(
                "tail threshold must be >= 0, got {v}"
            )));
        }
        if v == 0.0 && !self.finite_activity {
            return Err(ModelError::InfiniteMass);
        }
        if v == f64::INFINITY {
            return Ok(0.0);
        }
        if let Some(tail) = &self.closed_form_tail {
            return Ok(tail(v));
        }
        self.integrate_weighted(|_| 1.0, Region::abs_above(v))
    }

    /// `N_rho(t) = integral of rho(x) 1{x <= t} nu(dx)`; `t` may be infinite.
    pub fn n_rho(&self, rho: &RhoFunction, t: f64) -> Result<f64, ModelError> {
        if t.is_nan() {
            return Err(ModelError::InvalidParameter("t must not be NaN".into()));
        }
        self.integrate_weighted(|x| rho.eval(x), Region::half_line(t))
    }

    /// Time change `c(t) = integral of rho^2(x) 1{x <= t} nu(dx)`.
    pub fn time_change(&self, rho: &RhoFunction, t: f64) -> Result<f64, ModelError> {
        if t.is_nan() {
            return Err(ModelError::InvalidParameter("t must not be NaN".into()));
        }
        self.integrate_weighted(|x| rho.squared(x), Region::half_line(t))
    }

    /// Covariance kernel `H_rho(u, v) = c(u and v)`.
    pub fn h_cov(&self, rho: &RhoFunction, u: f64, v: f64) -> Result<f64, ModelError> {
        self.time_change(rho, u.min(v))
    }

    /// Total mass `c_rho = integral of rho^2 d nu`.
    pub fn c_rho(&self, rho: &RhoFunction) -> Result<f64, ModelError> {
        self.time_change(rho, f64::INFINITY)
    }

    /// Semimetric `d_rho(u, v) = sqrt(c(u or v) - c(u and v))`, computed as a
    /// single integral over `(u and v, u or v]` so the radicand is
    /// nonnegative up to rounding.
    pub fn d_rho(&self, rho: &RhoFunction, u: f64, v: f64) -> Result<f64, ModelError> {
        if u.is_nan() || v.is_nan() {
            return Err(ModelError::InvalidParameter("arguments must not be NaN".into()));
        }
        if u == v {
            return Ok(0.0);
        }
        let (lo, hi) = if u < v { (u, v) } else { (v, u) };
        let d2 = self.integrate_weighted(|x| rho.squared(x), Region::between(lo, hi))?;
        if d2 >= 0.0 {
            Ok(d2.sqrt())
        } else if d2 >= -self.quad.abs_tol {
            Ok(0.0)
        } else {
            Err(ModelError::Internal(format!(
                "negative squared semimetric {d2:.3e} for ({u}, {v})"
            )))
        }
    }

    /// `integral of x^2 1{|x| <= u} nu(dx)`, the small-jump variance rate.
    pub fn second_moment_below(&self, u: f64) -> Result<f64, ModelError> {
        if !(u >= 0.0) {
            return Err(ModelError::InvalidParameter(format!(
                "cutoff must be >= 0, got {u}"
            )));
        }
        self.integrate_weighted(|x| x * x, Region::abs_below(u))
    }

    /// `integral of x^2 nu(dx)`.
    pub fn second_moment_total(&self) -> Result<f64, ModelError> {
        self.integrate_weighted(|x| x * x, Region::full())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn exp_jump() -> LevyModel {
        LevyModel::exp_jump().unwrap()
    }

    fn poly2() -> RhoFunction {
        RhoFunction::poly(2.0).unwrap()
    }

    #[test]
    fn region_clipping() {
        let r = Region::abs_above(1.0).and_le(3.0);
        assert_eq!(r.clip((0.0, f64::INFINITY)), Some((1.0, 3.0)));
        assert_eq!(r.clip((f64::NEG_INFINITY, 0.0)), Some((f64::NEG_INFINITY, -1.0)));
        let empty = Region::abs_above(5.0).and_le(3.0);
        assert_eq!(empty.clip((0.0, f64::INFINITY)), None);
    }

    #[test]
    fn exp_jump_tail_mass_closed_form() {
        let m = exp_jump();
        assert_relative_eq!(m.nu_tail_mass(1.0).unwrap(), (-1.0f64).exp(), epsilon = 1e-15);
        assert_eq!(m.nu_tail_mass(f64::INFINITY).unwrap(), 0.0);
        // finite activity: v = 0 is allowed and gives the total mass
        assert_relative_eq!(m.nu_tail_mass(0.0).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn infinite_activity_rejects_zero_threshold() {
        let m = LevyModel::stable_tempered(1.0, 0.5, 1.0).unwrap();
        assert!(matches!(m.nu_tail_mass(0.0), Err(ModelError::InfiniteMass)));
    }

    #[test]
    fn negative_threshold_rejected() {
        assert!(matches!(
            exp_jump().nu_tail_mass(-0.5),
            Err(ModelError::InvalidParameter(_))
        ));
    }

    #[test]
    fn n_rho_golden_values() {
        let m = exp_jump();
        let rho = poly2();
        // integral of x^2/(1+x^2) e^-x over (0, inf)
        let total = m.n_rho(&rho, f64::INFINITY).unwrap();
        assert!((total - 0.3786).abs() < 5e-4, "got {total}");
        assert_eq!(m.n_rho(&rho, 0.0).unwrap(), 0.0);
        assert_eq!(m.n_rho(&rho, f64::NEG_INFINITY).unwrap(), 0.0);
    }

    #[test]
    fn n_rho_monotone_in_t() {
        let m = exp_jump();
        let rho = poly2();
        let slack = 2.0 * m.quad_config().abs_tol;
        let mut prev = 0.0;
        for t in [0.1, 0.5, 1.0, 2.0, 5.0, f64::INFINITY] {
            let v = m.n_rho(&rho, t).unwrap();
            assert!(v >= prev - slack, "n_rho not monotone at t = {t}");
            prev = v;
        }
    }

    #[test]
    fn h_cov_golden_and_identities() {
        let m = exp_jump();
        let rho = poly2();
        // integral of x^4/(1+x^2)^2 e^-x over (0, 1]
        let v = m.h_cov(&rho, 1.0, 2.0).unwrap();
        assert!((v - 0.0330).abs() < 5e-4, "got {v}");
        // symmetric, and equal to the diagonal at the minimum
        assert_eq!(v, m.h_cov(&rho, 2.0, 1.0).unwrap());
        assert_eq!(v, m.time_change(&rho, 1.0).unwrap());
        // below the support infimum
        assert_eq!(m.h_cov(&rho, -1.0, 5.0).unwrap(), 0.0);
        // u = v = inf equals the total mass
        let c = m.c_rho(&rho).unwrap();
        assert_eq!(m.h_cov(&rho, f64::INFINITY, f64::INFINITY).unwrap(), c);
    }

    #[test]
    fn d_rho_identities() {
        let m = exp_jump();
        let rho = poly2();
        assert_eq!(m.d_rho(&rho, 0.7, 0.7).unwrap(), 0.0);
        let c = m.c_rho(&rho).unwrap();
        let d = m.d_rho(&rho, f64::NEG_INFINITY, f64::INFINITY).unwrap();
        assert_relative_eq!(d, c.sqrt(), epsilon = 1e-8);
        // d(1,2)^2 = h_cov(2,2) - h_cov(1,1)
        let d12 = m.d_rho(&rho, 1.0, 2.0).unwrap();
        let diff = m.time_change(&rho, 2.0).unwrap() - m.time_change(&rho, 1.0).unwrap();
        assert_relative_eq!(d12 * d12, diff, epsilon = 1e-9);
    }

    #[test]
    fn h_cov_diagonal_monotone() {
        let m = LevyModel::stable_tempered(0.5, 0.5, 1.0).unwrap();
        let rho = poly2();
        let slack = 2.0 * m.quad_config().abs_tol;
        let mut prev = 0.0;
        for u in [-2.0, -0.5, 0.0, 0.5, 1.0, 3.0, f64::INFINITY] {
            let v = m.h_cov(&rho, u, u).unwrap();
            assert!(v >= prev - slack, "H(u,u) not monotone at u = {u}");
            prev = v;
        }
    }

    #[test]
    fn quadrature_override() {
        let loose = QuadratureConfig { abs_tol: 1e-6, rel_tol: 1e-4, singularity_split: 1e-4 };
        let m = exp_jump().with_quadrature(loose).unwrap();
        assert_eq!(m.quad_config().abs_tol, 1e-6);
        let v = m.n_rho(&poly2(), f64::INFINITY).unwrap();
        assert!((v - 0.37855).abs() < 1e-4);
        assert!(exp_jump()
            .with_quadrature(QuadratureConfig { abs_tol: -1.0, ..loose })
            .is_err());
    }

    #[test]
    fn n_rho_of_rho_squared_matches_h_cov() {
        let m = exp_jump();
        let rho = poly2();
        let rho2 = RhoFunction::custom(
            "poly2_squared",
            |x| {
                let a = x * x / (1.0 + x * x);
                a * a
            },
            |x| {
                let a = x * x / (1.0 + x * x);
                2.0 * a * 2.0 * x / ((1.0 + x * x) * (1.0 + x * x))
            },
            4.0,
            4.0,
        )
        .unwrap();
        for t in [0.3, 1.0, 2.5, f64::INFINITY] {
            let lhs = m.n_rho(&rho2, t).unwrap();
            let rhs = m.time_change(&rho, t).unwrap();
            assert!((lhs - rhs).abs() <= 2.0 * m.quad_config().abs_tol + 1e-12);
        }
    }

    #[test]
    fn stable_tempered_second_moment_analytic() {
        // integral of x^2 nu(dx) = 2 c Gamma(2 - beta) / lambda^(2 - beta)
        let m = LevyModel::stable_tempered(1.0, 0.5, 1.0).unwrap();
        let got = m.second_moment_total().unwrap();
        let gamma_3_2 = core::f64::consts::PI.sqrt() / 2.0;
        assert_relative_eq!(got, 2.0 * gamma_3_2, epsilon = 1e-8);
    }

    #[test]
    fn variance_gamma_second_moment_analytic() {
        // integral of x^2 e^(-lambda |x|)/|x| dx = 2 c / lambda^2
        let m = LevyModel::variance_gamma(0.7, 2.0).unwrap();
        let got = m.second_moment_total().unwrap();
        assert_relative_eq!(got, 2.0 * 0.7 / 4.0, epsilon = 1e-8);
    }

    #[test]
    fn small_jump_moment_split() {
        let m = LevyModel::stable_tempered(0.5, 0.5, 1.0).unwrap();
        let below = m.second_moment_below(0.1).unwrap();
        let total = m.second_moment_total().unwrap();
        assert!(below > 0.0 && below < total);
    }

    #[test]
    fn zero_measure_is_valid_and_degenerate() {
        let m = LevyModel::stable_tempered(0.0, 0.5, 1.0).unwrap();
        assert!(m.is_finite_activity());
        assert_eq!(m.nu_tail_mass(0.5).unwrap(), 0.0);
        assert_eq!(m.n_rho(&poly2(), f64::INFINITY).unwrap(), 0.0);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(LevyModel::stable_tempered(-1.0, 0.5, 1.0).is_err());
        assert!(LevyModel::stable_tempered(1.0, 2.5, 1.0).is_err());
        assert!(LevyModel::stable_tempered(1.0, 0.5, 0.0).is_err());
        assert!(LevyModel::variance_gamma(1.0, -2.0).is_err());
    }

    #[test]
    fn density_blow_up_beyond_declared_envelope_rejected() {
        let err = LevyModel::custom(CustomModel {
            name: "too_singular".into(),
            density: Box::new(|x: f64| x.abs().powf(-2.9) * (-x.abs()).exp()),
            support: Support::BothHalfLines,
            beta: 0.5,
            tail_exponent: f64::INFINITY,
            near_zero_bound: 1.0,
            near_zero_radius: 0.5,
            finite_activity: false,
            closed_form_tail: None,
        });
        assert!(matches!(err, Err(ModelError::NearZeroBoundViolated { .. })));
    }

    #[test]
    fn negative_density_rejected() {
        let err = LevyModel::custom(CustomModel {
            name: "negative".into(),
            density: Box::new(|x: f64| 1.0 - x.abs()),
            support: Support::Interval { lo: 0.0, hi: 3.0 },
            beta: 0.5,
            tail_exponent: f64::INFINITY,
            near_zero_bound: 10.0,
            near_zero_radius: 0.5,
            finite_activity: true,
            closed_form_tail: None,
        });
        assert!(matches!(err, Err(ModelError::DensityInvalid { .. })));
    }

    #[test]
    fn closed_form_mismatch_rejected() {
        let err = LevyModel::custom(CustomModel {
            name: "lying_tail".into(),
            density: Box::new(|x: f64| if x > 0.0 { (-x).exp() } else { 0.0 }),
            support: Support::PositiveHalfLine,
            beta: 0.5,
            tail_exponent: f64::INFINITY,
            near_zero_bound: 1.0,
            near_zero_radius: 1.0,
            finite_activity: true,
            closed_form_tail: Some(Box::new(|v: f64| 0.5 * (-v).exp())),
        });
        assert!(matches!(err, Err(ModelError::ClosedFormMismatch { .. })));
    }

    #[test]
    fn extreme_growth_order_weight_integrates() {
        // p = 105 is a realistic derived growth order (beta = 0.5 constants);
        // the weight is then nearly an indicator of {|x| > 1}.
        let rho = RhoFunction::poly(105.0).unwrap();
        let m = exp_jump();
        let total = m.n_rho(&rho, f64::INFINITY).unwrap();
        let e1 = (-1.0f64).exp();
        assert!(total.is_finite() && total > 0.0);
        assert!((total - e1).abs() < 0.05, "total {total} far from e^-1");
        let mut prev = 0.0;
        for t in [0.5, 1.0, 2.0, f64::INFINITY] {
            let v = m.n_rho(&rho, t).unwrap();
            assert!(v >= prev - 1e-10);
            prev = v;
        }
    }

    #[test]
    fn model_spec_round_trip() {
        let spec = ModelSpec::StableTempered { c: 0.25, beta: 0.5, lambda: 1.0 };
        let json = serde_json::to_string(&spec).unwrap();
        let back: ModelSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);
        let model = back.build().unwrap();
        assert_eq!(model.beta(), 0.5);
    }
}
