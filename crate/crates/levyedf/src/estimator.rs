//! The truncated empirical distribution function of the jump measure, its
//! normalized empirical process, the smooth-cutoff decomposition into large
//! and small jump contributions, and pointwise plug-in confidence bands.

use thiserror::Error;

use crate::models::{LevyModel, ModelError, Region, RhoFunction};
use crate::pathsim::IncrementPath;

#[derive(Debug, Clone, Error)]
pub enum EstimatorError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// `N_bar(t) = (n Delta_n)^-1 sum of rho(dX_i) 1{dX_i <= t} 1{|dX_i| > v_n}`:
/// a right-continuous nondecreasing step function supported on the kept
/// increments. Evaluation is exact (sorted values with prefix sums, no
/// binning).
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedLdf {
    /// Kept increments, ascending.
    xs: Vec<f64>,
    /// Prefix sums of `rho(x) / (n Delta_n)` along `xs`.
    cum: Vec<f64>,
    n: usize,
    delta_n: f64,
    v_n: f64,
}

impl TruncatedLdf {
    pub fn evaluate(&self, t: f64) -> f64 {
        let idx = self.xs.partition_point(|&x| x <= t);
        if idx == 0 {
            0.0
        } else {
            self.cum[idx - 1]
        }
    }

    /// Total kept weight; the value at `t = +infinity`.
    pub fn total(&self) -> f64 {
        self.cum.last().copied().unwrap_or(0.0)
    }

    /// Kept increments (those with `|x| > v_n`), ascending.
    pub fn kept(&self) -> &[f64] {
        &self.xs
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn delta_n(&self) -> f64 {
        self.delta_n
    }

    pub fn v_n(&self) -> f64 {
        self.v_n
    }

    pub fn n_delta(&self) -> f64 {
        self.n as f64 * self.delta_n
    }
}

/// Increments that survive the truncation `|x| > v_n` (strict: a value with
/// `|x|` exactly `v_n` is excluded).
fn kept_increments(path: &IncrementPath) -> impl Iterator<Item = f64> + '_ {
    let v_n = path.scheme().v_n();
    path.increments().iter().copied().filter(move |x| x.abs() > v_n)
}

/// Build the truncated empirical distribution function of a path.
pub fn estimate(path: &IncrementPath, rho: &RhoFunction) -> TruncatedLdf {
    let scheme = path.scheme();
    let n_delta = scheme.n_delta();
    let mut xs: Vec<f64> = kept_increments(path).collect();
    xs.sort_by(f64::total_cmp);
    let mut cum = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    for &x in &xs {
        acc += rho.eval(x) / n_delta;
        cum.push(acc);
    }
    TruncatedLdf { xs, cum, n: scheme.n(), delta_n: scheme.delta_n(), v_n: scheme.v_n() }
}

/// `G(t) = sqrt(n Delta_n) (N_bar(t) - N_rho(t))`.
pub fn empirical_process(
    ldf: &TruncatedLdf,
    model: &LevyModel,
    rho: &RhoFunction,
    t: f64,
) -> Result<f64, ModelError> {
    let centered = ldf.evaluate(t) - model.n_rho(rho, t)?;
    Ok(ldf.n_delta().sqrt() * centered)
}

/// Smooth cutoff `psi` with `1{x >= 1} <= psi(x) <= 1{x >= 1/2}`, built from
/// the standard partition `phi(x - 1/2) / (phi(x - 1/2) + phi(1 - x))` with
/// `phi(s) = e^(-1/s) 1{s > 0}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffPsi {
    alpha: f64,
}

fn bump(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

/// The base cutoff on the half-line.
pub fn psi(x: f64) -> f64 {
    if x <= 0.5 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = bump(x - 0.5);
        let b = bump(1.0 - x);
        a / (a + b)
    }
}

impl CutoffPsi {
    pub fn new(alpha: f64) -> Result<Self, EstimatorError> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(EstimatorError::InvalidParameter(format!(
                "cutoff scale alpha must be > 0, got {alpha}"
            )));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `psi_alpha(x) = psi(|x| / alpha)`: 1 on `{|x| >= alpha}`, 0 on
    /// `{|x| <= alpha/2}`.
    pub fn large(&self, x: f64) -> f64 {
        psi(x.abs() / self.alpha)
    }

    /// `1 - psi_alpha(x)`.
    pub fn small(&self, x: f64) -> f64 {
        1.0 - self.large(x)
    }

    /// Transition points of `psi_alpha`, used as quadrature breakpoints.
    pub fn breakpoints(&self) -> [f64; 4] {
        [-self.alpha, -0.5 * self.alpha, 0.5 * self.alpha, self.alpha]
    }
}

/// `N` functional with the cutoff applied: `integral of rho psi_alpha 1{<=t}`.
pub fn n_rho_large(
    model: &LevyModel,
    rho: &RhoFunction,
    cutoff: &CutoffPsi,
    t: f64,
) -> Result<f64, ModelError> {
    model.integrate_weighted_with_breaks(
        |x| rho.eval(x) * cutoff.large(x),
        Region::half_line(t),
        &cutoff.breakpoints(),
    )
}

/// `integral of rho (1 - psi_alpha) 1{<=t}`.
pub fn n_rho_small(
    model: &LevyModel,
    rho: &RhoFunction,
    cutoff: &CutoffPsi,
    t: f64,
) -> Result<f64, ModelError> {
    model.integrate_weighted_with_breaks(
        |x| rho.eval(x) * cutoff.small(x),
        Region::half_line(t),
        &cutoff.breakpoints(),
    )
}

/// Split the empirical process at scale `alpha`:
/// `G(t) = G_large(t) + G_small(t)` with `rho` decomposed by the smooth
/// cutoff and each piece centered at its own integral functional.
pub fn decompose(
    path: &IncrementPath,
    rho: &RhoFunction,
    cutoff: &CutoffPsi,
    model: &LevyModel,
    t: f64,
) -> Result<(f64, f64), ModelError> {
    let scheme = path.scheme();
    let n_delta = scheme.n_delta();
    let mut sum_large = 0.0;
    let mut sum_small = 0.0;
    for x in kept_increments(path) {
        if x <= t {
            let w = rho.eval(x);
            let psi_a = cutoff.large(x);
            sum_large += w * psi_a;
            sum_small += w * (1.0 - psi_a);
        }
    }
    let root = n_delta.sqrt();
    let g_large = root * (sum_large / n_delta - n_rho_large(model, rho, cutoff, t)?);
    let g_small = root * (sum_small / n_delta - n_rho_small(model, rho, cutoff, t)?);
    Ok((g_large, g_small))
}

/// Plug-in variance `H_hat(t, t) = (n Delta_n)^-1 sum of rho^2(dX_i)
/// 1{dX_i <= t} 1{|dX_i| > v_n}` over the kept increments of the fitted
/// function.
pub fn plug_in_variance(ldf: &TruncatedLdf, rho: &RhoFunction, t: f64) -> f64 {
    let n_delta = ldf.n_delta();
    ldf.kept()
        .iter()
        .take_while(|&&x| x <= t)
        .map(|&x| rho.squared(x) / n_delta)
        .sum()
}

/// Pointwise confidence band `N_bar(t) +/- z (H_hat(t,t) / (n Delta_n))^(1/2)`
/// from the marginal normal limit with plug-in variance.
pub fn confidence_band(
    ldf: &TruncatedLdf,
    rho: &RhoFunction,
    t: f64,
    level: f64,
) -> Result<(f64, f64), EstimatorError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(EstimatorError::InvalidParameter(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    use statrs::distribution::{ContinuousCDF, Normal};
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let z = normal.inverse_cdf(0.5 * (1.0 + level));
    let center = ldf.evaluate(t);
    let h_hat = plug_in_variance(ldf, rho, t);
    let half_width = z * (h_hat / ldf.n_delta()).sqrt();
    Ok((center - half_width, center + half_width))
}
