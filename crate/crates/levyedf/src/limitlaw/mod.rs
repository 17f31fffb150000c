//! The Gaussian limit of the normalized empirical process, sampled as a
//! time-changed Brownian motion, and Monte Carlo batteries verifying the
//! limit behaviour of the estimator: marginal laws, covariance structure,
//! sup-statistics and the smooth-cutoff small-jump control.

pub mod stats;

use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conditions::{self, ConditionsError, SchemeCheckReport};
use crate::estimator::{self, CutoffPsi};
use crate::exec;
use crate::models::{
    LevyModel, ModelError, ModelSpec, Region, RhoError, RhoFunction, RhoSpec,
};
use crate::pathsim::{
    truncated_levy_simulator, CoefficientSpec, ObservationScheme, RngStream, SimError,
    SimOptions, Simulator,
};

pub use stats::{ks_two_sample, KsResult, StatsError};

/// Stream domain tags so the experiment's sub-tasks never share a stream.
mod domain {
    pub const PATHS: u64 = 0x5041_5448;
    pub const LIMIT: u64 = 0x4c49_4d54;
    pub const MC: u64 = 0x4d43_4d43;
}

#[derive(Debug, Clone, Error)]
pub enum LimitLawError {
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    #[error("Monte Carlo budget exhausted: achieved SE {achieved_se:.3e} above target {target_se:.3e}")]
    McBudgetExhausted { achieved_se: f64, target_se: f64 },
    #[error("internal consistency failure: {0}")]
    Internal(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Rho(#[from] RhoError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Conditions(#[from] ConditionsError),
}

/// Samples the limit process `B(c(t))` on a fixed grid, where `c` is the
/// time change `integral of rho^2 1{x <= t} d nu`.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitSampler {
    grid: Vec<f64>,
    c: Vec<f64>,
    c_rho: f64,
    abs_tol: f64,
}

impl LimitSampler {
    /// Compute the time change on `grid` by incremental integration, so the
    /// variance increments are nonnegative by construction.
    pub fn new(model: &LevyModel, rho: &RhoFunction, grid: &[f64]) -> Result<Self, LimitLawError> {
        let grid = checked_grid(grid)?;
        let c = cumulative_time_change(model, rho, &grid)?;
        let tail = model
            .integrate_weighted(|x| rho.squared(x), Region::between(*grid.last().unwrap(), f64::INFINITY))?;
        let c_rho = c.last().unwrap() + tail;
        Self::from_time_change(grid, c, c_rho, model.quad_config().abs_tol)
    }

    /// Wrap precomputed time-change values.
    pub fn from_time_change(
        grid: Vec<f64>,
        c: Vec<f64>,
        c_rho: f64,
        abs_tol: f64,
    ) -> Result<Self, LimitLawError> {
        if grid.len() != c.len() || grid.is_empty() {
            return Err(LimitLawError::InvalidConfig(
                "time-change table must be nonempty and match the grid".into(),
            ));
        }
        for w in c.windows(2) {
            if w[1] < w[0] - abs_tol {
                return Err(LimitLawError::Internal(format!(
                    "time change decreases: {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        if *c.last().unwrap() > c_rho + abs_tol {
            return Err(LimitLawError::Internal(format!(
                "time change {} exceeds total mass {}",
                c.last().unwrap(),
                c_rho
            )));
        }
        Ok(Self { grid, c, c_rho, abs_tol })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn time_change(&self) -> &[f64] {
        &self.c
    }

    pub fn c_rho(&self) -> f64 {
        self.c_rho
    }

    /// One path of `B(c(t))` over the grid: cumulative sums of independent
    /// centered Gaussians with variances `c[j] - c[j-1]`.
    pub fn sample_path(&self, rng: &mut ChaCha8Rng) -> Result<Vec<f64>, LimitLawError> {
        let mut out = Vec::with_capacity(self.c.len());
        let mut level = 0.0;
        let mut prev = 0.0;
        for &cj in &self.c {
            let var = cj - prev;
            if var < -self.abs_tol {
                return Err(LimitLawError::Internal(format!(
                    "negative variance increment {var}"
                )));
            }
            if var > 0.0 {
                let z: f64 = rand_distr::StandardNormal.sample(rng);
                level += var.sqrt() * z;
            }
            prev = cj;
            out.push(level);
        }
        Ok(out)
    }
}

fn checked_grid(grid: &[f64]) -> Result<Vec<f64>, LimitLawError> {
    if grid.is_empty() {
        return Err(LimitLawError::InvalidConfig("empty t-grid".into()));
    }
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(LimitLawError::InvalidConfig("t-grid must be finite".into()));
    }
    let mut g = grid.to_vec();
    g.sort_by(f64::total_cmp);
    g.dedup();
    Ok(g)
}

/// `c(t_j)` for a sorted grid, accumulated over consecutive slabs.
fn cumulative_time_change(
    model: &LevyModel,
    rho: &RhoFunction,
    grid: &[f64],
) -> Result<Vec<f64>, LimitLawError> {
    let mut c = Vec::with_capacity(grid.len());
    let mut acc = model.time_change(rho, grid[0])?;
    c.push(acc);
    for w in grid.windows(2) {
        acc += model.integrate_weighted(|x| rho.squared(x), Region::between(w[0], w[1]))?;
        c.push(acc);
    }
    Ok(c)
}

/// Where to evaluate the empirical process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridSpec {
    Points { ts: Vec<f64> },
    Linspace { lo: f64, hi: f64, count: usize },
    /// `count` points at equally spaced quantiles (0.01 .. 0.99) of the
    /// measure `rho^2 d nu`, placing resolution where the limit moves.
    Quantiles { count: usize },
}

impl GridSpec {
    pub fn resolve(&self, model: &LevyModel, rho: &RhoFunction) -> Result<Vec<f64>, LimitLawError> {
        match self {
            GridSpec::Points { ts } => checked_grid(ts),
            GridSpec::Linspace { lo, hi, count } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi && *count >= 2) {
                    return Err(LimitLawError::InvalidConfig(format!(
                        "bad linspace grid [{lo}, {hi}] x {count}"
                    )));
                }
                Ok((0..*count)
                    .map(|i| lo + (hi - lo) * i as f64 / (*count as f64 - 1.0))
                    .collect())
            }
            GridSpec::Quantiles { count } => quantile_grid(model, rho, *count),
        }
    }
}

/// Quantiles of `rho^2 d nu` via a monotone cumulative table.
fn quantile_grid(
    model: &LevyModel,
    rho: &RhoFunction,
    count: usize,
) -> Result<Vec<f64>, LimitLawError> {
    if count < 2 {
        return Err(LimitLawError::InvalidConfig("quantile grid needs count >= 2".into()));
    }
    let c_rho = model.c_rho(rho)?;
    if !(c_rho > 0.0) {
        return Err(LimitLawError::InvalidConfig(
            "quantile grid undefined: rho^2 d nu has zero mass".into(),
        ));
    }
    // Expand brackets until at most 0.5% of mass lies outside.
    let mut hi = 1.0f64;
    while model.integrate_weighted(|x| rho.squared(x), Region::between(hi, f64::INFINITY))?
        > 0.005 * c_rho
    {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(LimitLawError::Internal("quantile bracket expansion diverged".into()));
        }
    }
    let two_sided = model.support().infimum() < 0.0;
    let mut lo = -1.0f64;
    if two_sided {
        while model.time_change(rho, lo)? > 0.005 * c_rho {
            lo *= 2.0;
            if lo < -1e12 {
                return Err(LimitLawError::Internal("quantile bracket expansion diverged".into()));
            }
        }
    } else {
        lo = model.support().infimum().max(-1.0);
    }

    // Candidate abscissae: geometric ladders on each side plus linear fill.
    let mut ts: Vec<f64> = Vec::new();
    let points_per_side = 160;
    let push_side = |ts: &mut Vec<f64>, bound: f64, sign: f64| {
        let max_mag = bound.abs().max(1e-4);
        let min_mag = 1e-4f64.min(max_mag / 2.0);
        let ratio = (max_mag / min_mag).ln();
        for i in 0..=points_per_side {
            let mag = min_mag * (ratio * i as f64 / points_per_side as f64).exp();
            ts.push(sign * mag);
        }
    };
    push_side(&mut ts, hi, 1.0);
    if two_sided {
        push_side(&mut ts, lo, -1.0);
    }
    ts.push(0.0);
    let ts = checked_grid(&ts)?;
    let c = cumulative_time_change(model, rho, &ts)?;
    let total = *c.last().unwrap();

    // Interpolate the target quantiles from the table.
    let mut grid = Vec::with_capacity(count);
    for i in 0..count {
        let q = 0.01 + (0.99 - 0.01) * i as f64 / (count as f64 - 1.0);
        let target = q * total;
        let idx = c.partition_point(|&v| v < target).min(c.len() - 1);
        let t = if idx == 0 {
            ts[0]
        } else {
            let (c0, c1) = (c[idx - 1], c[idx]);
            let (t0, t1) = (ts[idx - 1], ts[idx]);
            if c1 > c0 {
                t0 + (t1 - t0) * (target - c0) / (c1 - c0)
            } else {
                t1
            }
        };
        grid.push(t);
    }
    checked_grid(&grid)
}

/// Scheme description inside an experiment config; `delta_n` or `y` (with
/// `Delta_n = n^-y`) must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeSpec {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_n: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<f64>,
    pub gamma: f64,
}

impl SchemeSpec {
    pub fn resolve(&self) -> Result<ObservationScheme, LimitLawError> {
        match (self.delta_n, self.y) {
            (Some(delta), maybe_y) => {
                let mut scheme = ObservationScheme::new(self.n, delta, self.gamma)?;
                let derived = -(delta.ln()) / (self.n as f64).ln();
                if let Some(y) = maybe_y {
                    if (y - derived).abs() > 1e-9 * derived.abs().max(1.0) {
                        return Err(LimitLawError::InvalidConfig(format!(
                            "inconsistent scheme: delta_n = {delta} but n^-y = {}",
                            (self.n as f64).powf(-y)
                        )));
                    }
                }
                if derived.is_finite() && derived > 0.0 {
                    scheme = scheme.with_rate_exponent(derived);
                }
                Ok(scheme)
            }
            (None, Some(y)) => Ok(ObservationScheme::from_rate(self.n, y, self.gamma)?),
            (None, None) => Err(LimitLawError::InvalidConfig(
                "scheme needs delta_n or y".into(),
            )),
        }
    }
}

/// Constants to check the scheme against, when supplied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionsSpec {
    pub beta: f64,
    pub zeta: f64,
    pub tau: f64,
}

fn default_alphas() -> Vec<f64> {
    vec![1.0, 0.5, 0.25]
}

fn default_limit_paths() -> usize {
    10_000
}

/// Everything needed to reproduce one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub rho: RhoSpec,
    pub coeffs: CoefficientSpec,
    pub scheme: SchemeSpec,
    pub replications: usize,
    pub grid: GridSpec,
    /// Always included in the evaluation grid (marginal probe points).
    #[serde(default)]
    pub probe_ts: Vec<f64>,
    /// Cutoff scales for the small-jump battery.
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_limit_paths")]
    pub limit_paths: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditions: Option<ConditionsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_cut: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalStat {
    pub t: f64,
    pub n_rho: f64,
    /// Limit variance `H(t, t)`.
    pub h: f64,
    pub mean: f64,
    pub variance: f64,
    /// One-sample KS p-value of `G(t)` against `N(0, H(t,t))`; absent where
    /// the limit variance vanishes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normality_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceBlock {
    pub ts: Vec<f64>,
    pub empirical: Vec<Vec<f64>>,
    pub theoretical: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaStat {
    pub alpha: f64,
    /// 95th percentile of `sup_t |G_small(t)|` across replications.
    pub p95_sup_small: f64,
    /// Order-statistic standard error of that percentile.
    pub se: f64,
}

/// Full output of [`run_clt_experiment`]; reproducible from `(config, seed)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltReport {
    pub config: ExperimentConfig,
    pub v_n: f64,
    pub n_delta: f64,
    pub grid: Vec<f64>,
    pub marginals: Vec<MarginalStat>,
    pub covariance: CovarianceBlock,
    pub sup_finite: Vec<f64>,
    pub sup_limit: Vec<f64>,
    pub sup_ks: KsResult,
    pub alpha_battery: Vec<AlphaStat>,
    pub mean_kept: f64,
    pub degenerate: bool,
    pub conforming: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme_check: Option<SchemeCheckReport>,
}

struct ReplicationRow {
    g: Vec<f64>,
    sup_g: f64,
    sup_small: Vec<f64>,
    kept: usize,
}

/// Simulate `M` paths, compute the empirical process on the grid per
/// replication and compare marginals, covariances and sup-statistics against
/// the sampled limit law.
pub fn run_clt_experiment(cfg: &ExperimentConfig) -> Result<CltReport, LimitLawError> {
    if cfg.replications < 2 {
        return Err(LimitLawError::InvalidConfig("need at least 2 replications".into()));
    }
    if cfg.limit_paths < 2 {
        return Err(LimitLawError::InvalidConfig("need at least 2 limit paths".into()));
    }
    let model = cfg.model.build()?;
    let rho = cfg.rho.build()?;
    let scheme = cfg.scheme.resolve()?;

    let (scheme_check, conforming) = match &cfg.conditions {
        Some(cs) => {
            let pc = conditions::derive_primary(cs.beta, cs.zeta, cs.tau)?;
            match scheme.y() {
                Some(y) => {
                    let report = conditions::check_scheme(&pc, y)?;
                    let ok = report.passed;
                    (Some(report), Some(ok))
                }
                // Delta_n >= 1 has no admissible rate exponent at all.
                None => (None, Some(false)),
            }
        }
        None => (None, None),
    };

    let mut grid = cfg.grid.resolve(&model, &rho)?;
    grid.extend(cfg.probe_ts.iter().copied());
    let grid = checked_grid(&grid)?;
    let t_count = grid.len();

    let n_rho_grid: Vec<f64> =
        grid.iter().map(|&t| model.n_rho(&rho, t)).collect::<Result<_, _>>()?;
    let c = cumulative_time_change(&model, &rho, &grid)?;
    let tail = model.integrate_weighted(
        |x| rho.squared(x),
        Region::between(*grid.last().unwrap(), f64::INFINITY),
    )?;
    let c_rho = c.last().unwrap() + tail;

    let cutoffs: Vec<CutoffPsi> = cfg
        .alphas
        .iter()
        .map(|&a| CutoffPsi::new(a).map_err(|e| LimitLawError::InvalidConfig(e.to_string())))
        .collect::<Result<_, _>>()?;
    // Centering of the small-jump processes, one quadrature per (alpha, t).
    let mut n_small = Vec::with_capacity(cutoffs.len());
    for cutoff in &cutoffs {
        let row: Vec<f64> = grid
            .iter()
            .map(|&t| estimator::n_rho_small(&model, &rho, cutoff, t))
            .collect::<Result<_, _>>()?;
        n_small.push(row);
    }

    let sim = Simulator::new(
        &model,
        cfg.coeffs,
        scheme,
        SimOptions { u_cut: cfg.u_cut, gaussian_small_jumps: true },
    )?;
    let root = RngStream::root(cfg.seed);
    let path_stream = root.child(domain::PATHS);
    let n_delta = scheme.n_delta();
    let sqrt_nd = n_delta.sqrt();

    let rows: Vec<Result<ReplicationRow, SimError>> =
        exec::map_indexed(cfg.replications as u64, |r| {
            let path = sim.simulate(path_stream.replication(r))?;
            let ldf = estimator::estimate(&path, &rho);
            let kept = ldf.kept();
            let g: Vec<f64> = grid
                .iter()
                .zip(&n_rho_grid)
                .map(|(&t, &nr)| sqrt_nd * (ldf.evaluate(t) - nr))
                .collect();
            let sup_g = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let mut sup_small = Vec::with_capacity(cutoffs.len());
            for (ai, cutoff) in cutoffs.iter().enumerate() {
                let mut prefix = Vec::with_capacity(kept.len());
                let mut acc = 0.0;
                for &x in kept {
                    acc += rho.eval(x) * cutoff.small(x);
                    prefix.push(acc);
                }
                let mut worst = 0.0f64;
                for (j, &t) in grid.iter().enumerate() {
                    let idx = kept.partition_point(|&x| x <= t);
                    let emp = if idx == 0 { 0.0 } else { prefix[idx - 1] } / n_delta;
                    worst = worst.max((sqrt_nd * (emp - n_small[ai][j])).abs());
                }
                sup_small.push(worst);
            }
            Ok(ReplicationRow { g, sup_g, sup_small, kept: kept.len() })
        });
    let mut collected = Vec::with_capacity(rows.len());
    for row in rows {
        collected.push(row?);
    }

    // Marginal statistics.
    let m = collected.len() as f64;
    let mut marginals = Vec::with_capacity(t_count);
    for j in 0..t_count {
        let xs: Vec<f64> = collected.iter().map(|r| r.g[j]).collect();
        let mean = stats::sample_mean(&xs);
        let variance = stats::sample_variance(&xs);
        let normality_p = if c[j] > 0.0 {
            Some(stats::ks_normality(&xs, 0.0, c[j].sqrt())?.p_value)
        } else {
            None
        };
        marginals.push(MarginalStat { t: grid[j], n_rho: n_rho_grid[j], h: c[j], mean, variance, normality_p });
    }

    // Empirical covariance against H(u, v) = c(min(u, v)).
    let means: Vec<f64> = marginals.iter().map(|s| s.mean).collect();
    let mut empirical = vec![vec![0.0f64; t_count]; t_count];
    for row in &collected {
        for i in 0..t_count {
            let di = row.g[i] - means[i];
            #[allow(clippy::needless_range_loop)]
            for j in i..t_count {
                empirical[i][j] += di * (row.g[j] - means[j]);
            }
        }
    }
    #[allow(clippy::needless_range_loop)]
    for i in 0..t_count {
        for j in i..t_count {
            let v = empirical[i][j] / (m - 1.0);
            empirical[i][j] = v;
            empirical[j][i] = v;
        }
    }
    let theoretical: Vec<Vec<f64>> =
        (0..t_count).map(|i| (0..t_count).map(|j| c[i.min(j)]).collect()).collect();

    // Sup statistics of the sampled limit process.
    let limit_sampler =
        LimitSampler::from_time_change(grid.clone(), c.clone(), c_rho, model.quad_config().abs_tol)?;
    let limit_stream = root.child(domain::LIMIT);
    let sup_limit_results: Vec<Result<f64, LimitLawError>> =
        exec::map_indexed(cfg.limit_paths as u64, |k| {
            let mut rng = limit_stream.replication(k).rng();
            let path = limit_sampler.sample_path(&mut rng)?;
            Ok(path.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
        });
    let mut sup_limit = Vec::with_capacity(sup_limit_results.len());
    for s in sup_limit_results {
        sup_limit.push(s?);
    }
    let sup_finite: Vec<f64> = collected.iter().map(|r| r.sup_g).collect();

    let degenerate = c_rho == 0.0 && sup_finite.iter().all(|&s| s == 0.0);
    let sup_ks = if degenerate {
        KsResult { statistic: 0.0, p_value: 1.0 }
    } else {
        stats::ks_two_sample(&sup_finite, &sup_limit)?
    };

    // Small-jump battery: p95 of sup |G_small| per cutoff scale.
    let mut alpha_battery = Vec::with_capacity(cutoffs.len());
    for (ai, cutoff) in cutoffs.iter().enumerate() {
        let mut sups: Vec<f64> = collected.iter().map(|r| r.sup_small[ai]).collect();
        sups.sort_by(f64::total_cmp);
        let p95 = stats::quantile_sorted(&sups, 0.95);
        let spread = stats::quantile_sorted(&sups, 0.97) - stats::quantile_sorted(&sups, 0.93);
        let se = if spread > 0.0 {
            (0.95 * 0.05 / m).sqrt() * spread / 0.04
        } else {
            0.0
        };
        alpha_battery.push(AlphaStat { alpha: cutoff.alpha(), p95_sup_small: p95, se });
    }

    let mean_kept = collected.iter().map(|r| r.kept as f64).sum::<f64>() / m;

    Ok(CltReport {
        config: cfg.clone(),
        v_n: scheme.v_n(),
        n_delta,
        grid: grid.clone(),
        marginals,
        covariance: CovarianceBlock { ts: grid, empirical, theoretical },
        sup_finite,
        sup_limit,
        sup_ks,
        alpha_battery,
        mean_kept,
        degenerate,
        conforming,
        scheme_check,
    })
}

/// How the inner expectation of the bias study is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BiasMethod {
    /// `e^(-Delta nu(F)) integral of f 1{<=t} over F` with `F = {|x| > v_n}`;
    /// exact up to the (higher-order) multi-jump remainder.
    ExactOneJump,
    MonteCarlo {
        samples: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target_se: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasStudyConfig {
    pub gamma: f64,
    pub deltas: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub method: BiasMethod,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasRow {
    pub delta_n: f64,
    pub v_n: f64,
    /// `sup_t | Delta^-1 E[f(L_Delta) 1{L <= t}] - N_f(t) |` over the grid
    /// (incl. +inf).
    pub sup_error: f64,
    /// `sup_error / Delta^(1/8)`.
    pub ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_se: Option<f64>,
}

/// Sweep the sampling mesh and measure how fast the truncated one-step bias
/// vanishes relative to the `Delta^(1/8)` envelope.
///
/// `f` needs only to be measurable with `|f(x)| <= k (1 and x^2)` (spot
/// checked); it does not have to be a valid weight function.
pub fn bias_study(
    model: &LevyModel,
    f: impl Fn(f64) -> f64,
    k: f64,
    cfg: &BiasStudyConfig,
) -> Result<Vec<BiasRow>, LimitLawError> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(LimitLawError::InvalidConfig(format!("bound K must be > 0, got {k}")));
    }
    for m in crate::models::check_grid() {
        for x in [m, -m] {
            let v = f(x);
            if !v.is_finite() || v.abs() > k * (x * x).min(1.0) * (1.0 + 1e-9) {
                return Err(LimitLawError::InvalidConfig(format!(
                    "bias functional violates |f(x)| <= K (1 and x^2) at x = {x}: f = {v}"
                )));
            }
        }
    }
    if !(cfg.gamma > 0.0) {
        return Err(LimitLawError::InvalidConfig(format!("gamma must be > 0, got {}", cfg.gamma)));
    }
    if cfg.deltas.is_empty() || cfg.deltas.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
        return Err(LimitLawError::InvalidConfig("deltas must be positive and finite".into()));
    }
    let mut t_grid = checked_grid(&cfg.t_grid)?;
    t_grid.push(f64::INFINITY); // the sup runs over the extended line

    let n_f: Vec<f64> = t_grid
        .iter()
        .map(|&t| model.integrate_weighted(&f, Region::half_line(t)))
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::with_capacity(cfg.deltas.len());
    for (di, &delta) in cfg.deltas.iter().enumerate() {
        let v_n = cfg.gamma * delta.powf(conditions::VARPI);
        let row = match cfg.method {
            BiasMethod::ExactOneJump => {
                let lambda = model.nu_tail_mass(v_n)?;
                let damp = (-delta * lambda).exp();
                let mut sup = 0.0f64;
                for (j, &t) in t_grid.iter().enumerate() {
                    let restricted =
                        model.integrate_weighted(&f, Region::abs_above(v_n).and_le(t))?;
                    sup = sup.max((damp * restricted - n_f[j]).abs());
                }
                BiasRow { delta_n: delta, v_n, sup_error: sup, ratio: sup / delta.powf(0.125), max_se: None }
            }
            BiasMethod::MonteCarlo { samples, target_se } => {
                mc_bias_row(model, &f, delta, cfg.gamma, v_n, samples, target_se, &t_grid, &n_f, cfg.seed, di as u64)?
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

#[allow(clippy::too_many_arguments)]
fn mc_bias_row(
    model: &LevyModel,
    f: &dyn Fn(f64) -> f64,
    delta: f64,
    gamma: f64,
    v_n: f64,
    samples: u64,
    target_se: Option<f64>,
    t_grid: &[f64],
    n_f: &[f64],
    seed: u64,
    ladder_index: u64,
) -> Result<BiasRow, LimitLawError> {
    // Increments of the truncated Levy process over one mesh interval are
    // i.i.d. copies of L_Delta; simulate them in chunks.
    const CHUNK: u64 = 1 << 15;
    let chunks = samples.div_ceil(CHUNK);
    let stream = RngStream::root(seed).child(domain::MC).child(ladder_index);
    let draws: Vec<Result<Vec<f64>, SimError>> = exec::map_indexed(chunks, |k| {
        let count = CHUNK.min(samples - k * CHUNK) as usize;
        let scheme = ObservationScheme::new(count, delta, gamma)?;
        let sim = truncated_levy_simulator(model, scheme)?;
        Ok(sim.simulate(stream.replication(k))?.increments().to_vec())
    });
    let mut ls: Vec<f64> = Vec::with_capacity(samples as usize);
    for d in draws {
        ls.extend(d?);
    }
    ls.sort_by(f64::total_cmp);
    let fs: Vec<f64> = ls.iter().map(|&l| f(l)).collect();
    let mut prefix = Vec::with_capacity(fs.len());
    let mut prefix_sq = Vec::with_capacity(fs.len());
    let (mut acc, mut acc2) = (0.0, 0.0);
    for &v in &fs {
        acc += v;
        acc2 += v * v;
        prefix.push(acc);
        prefix_sq.push(acc2);
    }
    let s = ls.len() as f64;
    let mut sup = 0.0f64;
    let mut max_se = 0.0f64;
    for (j, &t) in t_grid.iter().enumerate() {
        let idx = ls.partition_point(|&l| l <= t);
        let (sum, sum_sq) = if idx == 0 { (0.0, 0.0) } else { (prefix[idx - 1], prefix_sq[idx - 1]) };
        let mean = sum / s;
        let var = (sum_sq / s - mean * mean).max(0.0);
        let est = mean / delta;
        sup = sup.max((est - n_f[j]).abs());
        max_se = max_se.max((var / s).sqrt() / delta);
    }
    if let Some(target) = target_se {
        if max_se > target {
            return Err(LimitLawError::McBudgetExhausted { achieved_se: max_se, target_se: target });
        }
    }
    Ok(BiasRow { delta_n: delta, v_n, sup_error: sup, ratio: sup / delta.powf(0.125), max_se: Some(max_se) })
}
