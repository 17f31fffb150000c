//! Simulation of increment arrays for jump diffusions observed on a regular
//! grid, and of the truncated compound-Poisson processes that approximate
//! them above the truncation threshold.
//!
//! Jumps with magnitude above a cutoff `u_cut` are sampled exactly as a
//! compound Poisson process (with per-interval bookkeeping of times and
//! sizes); the compensated remainder below the cutoff is moment-matched by a
//! centered Gaussian with variance `Delta_n * integral of x^2 over
//! {|x| <= u_cut}`. Drift and volatility are deterministic functions of time
//! evaluated at interval midpoints.

mod rng;
mod sampler;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conditions::VARPI;
use crate::models::{LevyModel, ModelError, Region};

pub use rng::RngStream;
pub use sampler::{JumpSampler, SamplerError};

pub(crate) use rng::component;

#[derive(Debug, Clone, Error)]
pub enum SimError {
    #[error("invalid truncation cutoff: {0}")]
    InvalidUCut(String),
    #[error("invalid observation scheme: {0}")]
    InvalidScheme(String),
    #[error("coefficient bound violated: {0}")]
    InvalidCoefficients(String),
    #[error("invalid observation data: {0}")]
    InvalidData(String),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Deterministic drift/volatility profiles. Boundedness is required by the
/// limit theory; both shapes here are bounded by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoeffFn {
    Constant { value: f64 },
    /// `base + amplitude * sin(2 pi t / period)`.
    Sinusoid { base: f64, amplitude: f64, period: f64 },
}

impl CoeffFn {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            CoeffFn::Constant { value } => value,
            CoeffFn::Sinusoid { base, amplitude, period } => {
                base + amplitude * (2.0 * core::f64::consts::PI * t / period).sin()
            }
        }
    }

    pub fn sup_bound(&self) -> f64 {
        match *self {
            CoeffFn::Constant { value } => value.abs(),
            CoeffFn::Sinusoid { base, amplitude, .. } => base.abs() + amplitude.abs(),
        }
    }

    fn validate(&self) -> Result<(), SimError> {
        let ok = match *self {
            CoeffFn::Constant { value } => value.is_finite(),
            CoeffFn::Sinusoid { base, amplitude, period } => {
                base.is_finite() && amplitude.is_finite() && period.is_finite() && period > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidCoefficients(format!("non-finite coefficient spec {self:?}")))
        }
    }
}

/// Drift and diffusion coefficient with their common sup bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSpec {
    pub drift: CoeffFn,
    pub vol: CoeffFn,
    /// Declared sup bound for |b| and |sigma|; checked on the simulation grid.
    pub bound: f64,
}

impl CoefficientSpec {
    pub fn new(drift: CoeffFn, vol: CoeffFn) -> Result<Self, SimError> {
        drift.validate()?;
        vol.validate()?;
        Ok(Self { drift, vol, bound: drift.sup_bound().max(vol.sup_bound()) })
    }

    pub fn constant(b: f64, sigma: f64) -> Result<Self, SimError> {
        Self::new(CoeffFn::Constant { value: b }, CoeffFn::Constant { value: sigma })
    }

    pub fn zero() -> Self {
        Self::constant(0.0, 0.0).expect("zero coefficients are valid")
    }
}

/// The sampling grid: `n` observations at spacing `delta_n`, truncation level
/// `v_n = gamma * delta_n^(1/8)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObservationScheme {
    n: usize,
    delta_n: f64,
    gamma: f64,
    v_n: f64,
    y: Option<f64>,
}

#[derive(Deserialize)]
struct SchemeRaw {
    n: usize,
    delta_n: f64,
    gamma: f64,
    v_n: f64,
    y: Option<f64>,
}

impl TryFrom<SchemeRaw> for ObservationScheme {
    type Error = String;

    fn try_from(raw: SchemeRaw) -> Result<Self, String> {
        let scheme = ObservationScheme::new(raw.n, raw.delta_n, raw.gamma)
            .map_err(|e| e.to_string())?;
        let scheme = ObservationScheme { y: raw.y, ..scheme };
        if raw.v_n.to_bits() != scheme.v_n.to_bits() {
            return Err(format!(
                "stored v_n = {} does not equal gamma * delta_n^(1/8) = {}",
                raw.v_n, scheme.v_n
            ));
        }
        Ok(scheme)
    }
}

impl<'de> Deserialize<'de> for ObservationScheme {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = SchemeRaw::deserialize(deserializer)?;
        Self::try_from(raw).map_err(serde::de::Error::custom)
    }
}

impl ObservationScheme {
    pub fn new(n: usize, delta_n: f64, gamma: f64) -> Result<Self, SimError> {
        if n == 0 {
            return Err(SimError::InvalidScheme("n must be >= 1".into()));
        }
        if !(delta_n.is_finite() && delta_n > 0.0) {
            return Err(SimError::InvalidScheme(format!("delta_n must be > 0, got {delta_n}")));
        }
        if !(gamma > 0.0) {
            return Err(SimError::InvalidScheme(format!("gamma must be > 0, got {gamma}")));
        }
        let v_n = gamma * delta_n.powf(VARPI);
        Ok(Self { n, delta_n, gamma, v_n, y: None })
    }

    /// Scheme with `delta_n = n^-y`.
    pub fn from_rate(n: usize, y: f64, gamma: f64) -> Result<Self, SimError> {
        if !(y.is_finite() && y > 0.0) {
            return Err(SimError::InvalidScheme(format!("y must be > 0, got {y}")));
        }
        let delta_n = (n as f64).powf(-y);
        let mut scheme = Self::new(n, delta_n, gamma)?;
        scheme.y = Some(y);
        Ok(scheme)
    }

    pub fn with_rate_exponent(mut self, y: f64) -> Self {
        self.y = Some(y);
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn delta_n(&self) -> f64 {
        self.delta_n
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn v_n(&self) -> f64 {
        self.v_n
    }

    pub fn y(&self) -> Option<f64> {
        self.y
    }

    /// Observation horizon `T = n * delta_n`.
    pub fn horizon(&self) -> f64 {
        self.n as f64 * self.delta_n
    }

    /// `n * delta_n`, the normalization of the empirical process.
    pub fn n_delta(&self) -> f64 {
        self.n as f64 * self.delta_n
    }
}

/// One exactly-sampled jump, attributed to its observation interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub interval: usize,
    pub time: f64,
    pub size: f64,
}

/// Simulation metadata carried alongside the increments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathMeta {
    pub u_cut: f64,
    /// `integral of x^2 over {|x| <= u_cut}`; the Gaussian proxy has variance
    /// `delta_n` times this.
    pub small_jump_variance_rate: f64,
    /// Fraction of the total second moment carried by the moment-matched
    /// small jumps, when defined.
    pub discarded_moment_ratio: Option<f64>,
}

/// An array of `n` increments with exact bookkeeping of the jumps above the
/// cutoff. Immutable once returned.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementPath {
    increments: Vec<f64>,
    jumps: Vec<JumpEvent>,
    stream: RngStream,
    scheme: ObservationScheme,
    meta: PathMeta,
}

impl IncrementPath {
    /// Wrap externally observed increments (e.g. ingested from a CSV file).
    /// No jump bookkeeping is available for such paths.
    pub fn from_observations(
        increments: Vec<f64>,
        scheme: ObservationScheme,
    ) -> Result<Self, SimError> {
        if increments.len() != scheme.n() {
            return Err(SimError::InvalidData(format!(
                "{} increments do not match scheme n = {}",
                increments.len(),
                scheme.n()
            )));
        }
        if let Some(bad) = increments.iter().find(|x| !x.is_finite()) {
            return Err(SimError::InvalidData(format!("non-finite increment {bad}")));
        }
        Ok(Self {
            increments,
            jumps: Vec::new(),
            stream: RngStream::root(0),
            scheme,
            meta: PathMeta {
                u_cut: 0.0,
                small_jump_variance_rate: 0.0,
                discarded_moment_ratio: None,
            },
        })
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    pub fn jumps(&self) -> &[JumpEvent] {
        &self.jumps
    }

    pub fn scheme(&self) -> &ObservationScheme {
        &self.scheme
    }

    pub fn stream(&self) -> RngStream {
        self.stream
    }

    pub fn meta(&self) -> &PathMeta {
        &self.meta
    }

    pub fn n(&self) -> usize {
        self.increments.len()
    }

    /// Number of logged (large) jumps per interval.
    pub fn large_jump_counts(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.increments.len()];
        for j in &self.jumps {
            counts[j.interval] += 1;
        }
        counts
    }

    /// Sum of logged jump sizes per interval, accumulated in storage order.
    pub fn jump_sum_by_interval(&self) -> Vec<f64> {
        let mut sums = vec![0.0f64; self.increments.len()];
        for j in &self.jumps {
            sums[j.interval] += j.size;
        }
        sums
    }
}

/// Knobs for the simulation method (not the model).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Jump-size cutoff separating exact compound-Poisson sampling from the
    /// Gaussian proxy. Defaults to `min(v_n / 10, 1e-3)`; may be 0 only for
    /// finite-activity measures.
    pub u_cut: Option<f64>,
    /// Include the moment-matched Gaussian for jumps below the cutoff.
    pub gaussian_small_jumps: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { u_cut: None, gaussian_small_jumps: true }
    }
}

/// Precomputed simulation state reusable across replications.
pub struct Simulator<'m> {
    model: &'m LevyModel,
    coeffs: CoefficientSpec,
    scheme: ObservationScheme,
    jump_rate: f64,
    sampler: Option<JumpSampler<'m>>,
    poisson: Option<Poisson<f64>>,
    small_std_step: f64,
    has_diffusion: bool,
    meta: PathMeta,
}

impl<'m> Simulator<'m> {
    pub fn new(
        model: &'m LevyModel,
        coeffs: CoefficientSpec,
        scheme: ObservationScheme,
        opts: SimOptions,
    ) -> Result<Self, SimError> {
        coeffs.drift.validate()?;
        coeffs.vol.validate()?;
        // Sup bound holds on the observation grid.
        let probes = scheme.n.min(1024);
        for k in 0..=probes {
            let t = scheme.horizon() * k as f64 / probes.max(1) as f64;
            let (b, s) = (coeffs.drift.at(t), coeffs.vol.at(t));
            if b.abs() > coeffs.bound * (1.0 + 1e-12) || s.abs() > coeffs.bound * (1.0 + 1e-12) {
                return Err(SimError::InvalidCoefficients(format!(
                    "|b({t})| = {} or |sigma({t})| = {} exceeds declared bound {}",
                    b.abs(),
                    s.abs(),
                    coeffs.bound
                )));
            }
        }

        let u_cut = opts.u_cut.unwrap_or_else(|| (scheme.v_n / 10.0).min(1e-3));
        if u_cut.is_nan() || u_cut < 0.0 {
            return Err(SimError::InvalidUCut(format!("u_cut must be >= 0, got {u_cut}")));
        }
        if u_cut == 0.0 && !model.is_finite_activity() {
            return Err(SimError::InvalidUCut(
                "u_cut = 0 requires a finite-activity measure".into(),
            ));
        }

        let jump_rate = model.nu_tail_mass(u_cut)?;
        let sampler = if jump_rate > 0.0 {
            Some(JumpSampler::new(model, Region::abs_above(u_cut))?)
        } else {
            None
        };
        let lambda_interval = scheme.delta_n * jump_rate;
        let poisson = if lambda_interval > 0.0 {
            Some(Poisson::new(lambda_interval).map_err(|e| {
                SimError::InvalidScheme(format!("invalid jump intensity {lambda_interval}: {e}"))
            })?)
        } else {
            None
        };

        let small_rate = if opts.gaussian_small_jumps && u_cut > 0.0 {
            model.second_moment_below(u_cut)?
        } else {
            0.0
        };
        let discarded_moment_ratio = if u_cut > 0.0 {
            let total = model.second_moment_total()?;
            (total > 0.0).then(|| model.second_moment_below(u_cut).map(|s| s / total)).transpose()?
        } else {
            None
        };

        Ok(Self {
            model,
            coeffs,
            scheme,
            jump_rate,
            sampler,
            poisson,
            small_std_step: (scheme.delta_n * small_rate).sqrt(),
            has_diffusion: coeffs.vol.sup_bound() > 0.0,
            meta: PathMeta {
                u_cut,
                small_jump_variance_rate: small_rate,
                discarded_moment_ratio,
            },
        })
    }

    pub fn scheme(&self) -> &ObservationScheme {
        &self.scheme
    }

    pub fn model(&self) -> &LevyModel {
        self.model
    }

    /// `nu({|x| > u_cut})`, the intensity of exactly sampled jumps.
    pub fn jump_rate(&self) -> f64 {
        self.jump_rate
    }

    /// Simulate one increment path on the given stream. Deterministic in
    /// `(model, coeffs, scheme, stream)`.
    pub fn simulate(&self, stream: RngStream) -> Result<IncrementPath, SimError> {
        let mut jump_rng = stream.child(component::JUMPS).rng();
        let mut brown_rng = stream.child(component::BROWNIAN).rng();
        let mut small_rng = stream.child(component::SMALL).rng();

        let n = self.scheme.n;
        let dt = self.scheme.delta_n;
        let sqrt_dt = dt.sqrt();
        let mut increments = Vec::with_capacity(n);
        let mut jumps: Vec<JumpEvent> = Vec::new();
        let mut interval_jumps: Vec<(f64, f64)> = Vec::new();

        for i in 0..n {
            let mut jump_sum = 0.0;
            if let (Some(poisson), Some(sampler)) = (&self.poisson, &self.sampler) {
                let count = poisson.sample(&mut jump_rng) as u64;
                if count > 0 {
                    interval_jumps.clear();
                    for _ in 0..count {
                        // uniform over the half-open interval (i dt, (i+1) dt]
                        let u = 1.0 - jump_rng.random::<f64>();
                        let time = (i as f64 + u) * dt;
                        let size = sampler.sample(&mut jump_rng)?;
                        interval_jumps.push((time, size));
                    }
                    interval_jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
                    for &(time, size) in interval_jumps.iter() {
                        jump_sum += size;
                        jumps.push(JumpEvent { interval: i, time, size });
                    }
                }
            }

            let t_mid = (i as f64 + 0.5) * dt;
            let mut increment = self.coeffs.drift.at(t_mid) * dt + jump_sum;
            if self.has_diffusion {
                let z: f64 = standard_normal(&mut brown_rng);
                increment += self.coeffs.vol.at(t_mid) * sqrt_dt * z;
            }
            if self.small_std_step > 0.0 {
                let z: f64 = standard_normal(&mut small_rng);
                increment += self.small_std_step * z;
            }
            increments.push(increment);
        }

        Ok(IncrementPath { increments, jumps, stream, scheme: self.scheme, meta: self.meta })
    }
}

fn standard_normal(rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
    use rand_distr::StandardNormal;
    StandardNormal.sample(rng)
}

/// Simulate increments of the jump diffusion with default method options;
/// the path is reproducible from `(model, coeffs, scheme, seed)`.
pub fn simulate_increments(
    model: &LevyModel,
    coeffs: CoefficientSpec,
    scheme: ObservationScheme,
    seed: u64,
) -> Result<IncrementPath, SimError> {
    Simulator::new(model, coeffs, scheme, SimOptions::default())?
        .simulate(RngStream::root(seed))
}

/// Increments of the truncated Levy process `(x 1{|x| > v_n}) * mu`: pure
/// compound Poisson above the truncation threshold, no continuous part, no
/// Gaussian proxy.
pub fn simulate_truncated_levy(
    model: &LevyModel,
    scheme: ObservationScheme,
    seed: u64,
) -> Result<IncrementPath, SimError> {
    truncated_levy_simulator(model, scheme)?.simulate(RngStream::root(seed))
}

/// The simulator behind [`simulate_truncated_levy`], reusable across
/// replications.
pub fn truncated_levy_simulator(
    model: &LevyModel,
    scheme: ObservationScheme,
) -> Result<Simulator<'_>, SimError> {
    Simulator::new(
        model,
        CoefficientSpec::zero(),
        scheme,
        SimOptions { u_cut: Some(scheme.v_n), gaussian_small_jumps: false },
    )
}

/// Draw one jump size from `nu` restricted to `region` and normalized.
pub fn sample_jump_size(
    model: &LevyModel,
    region: Region,
    stream: RngStream,
) -> Result<f64, SimError> {
    let sampler = JumpSampler::new(model, region)?;
    Ok(sampler.sample(&mut stream.rng())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec;
    use crate::models::{CustomModel, Support};

    fn exp_jump() -> LevyModel {
        LevyModel::exp_jump().unwrap()
    }

    fn scheme(n: usize, dt: f64, gamma: f64) -> ObservationScheme {
        ObservationScheme::new(n, dt, gamma).unwrap()
    }

    #[test]
    fn v_n_formula_exact() {
        let s = scheme(100, 1e-3, 0.5);
        assert_eq!(s.v_n().to_bits(), (0.5 * 1e-3f64.powf(0.125)).to_bits());
        assert_eq!(s.horizon(), 0.1);
    }

    #[test]
    fn scheme_round_trip_checks_invariant() {
        let s = scheme(100, 1e-3, 0.5);
        let json = serde_json::to_string(&s).unwrap();
        let back: ObservationScheme = serde_json::from_str(&json).unwrap();
        assert_eq!(s, back);
        let tampered = json.replace(&format!("{}", s.v_n()), "0.123");
        assert!(serde_json::from_str::<ObservationScheme>(&tampered).is_err());
    }

    #[test]
    fn telescoping_pure_jump_path() {
        // Finite activity, no drift, no diffusion, u_cut = 0: every increment
        // is exactly the sum of its logged jumps.
        let model = exp_jump();
        let sim = Simulator::new(
            &model,
            CoefficientSpec::zero(),
            scheme(1000, 0.1, 0.5),
            SimOptions { u_cut: Some(0.0), gaussian_small_jumps: true },
        )
        .unwrap();
        let path = sim.simulate(RngStream::root(7)).unwrap();
        assert!(!path.jumps().is_empty());
        let sums = path.jump_sum_by_interval();
        for (inc, sum) in path.increments().iter().zip(&sums) {
            assert_eq!(inc.to_bits(), sum.to_bits());
        }
        assert_eq!(path.meta().small_jump_variance_rate, 0.0);
    }

    #[test]
    fn jump_count_matches_poisson_mean() {
        // total jumps over M paths ~ Poisson(M n dt nu(R)), nu(R) = 1
        let model = exp_jump();
        let s = scheme(100, 0.1, 0.5);
        let sim = Simulator::new(
            &model,
            CoefficientSpec::zero(),
            s,
            SimOptions { u_cut: Some(0.0), gaussian_small_jumps: false },
        )
        .unwrap();
        let m = 10_000u64;
        let counts = exec::map_indexed(m, |r| {
            let path = sim.simulate(RngStream::root(123).replication(r)).unwrap();
            path.jumps().len() as f64
        });
        let mean = counts.iter().sum::<f64>() / m as f64;
        let expected = 100.0 * 0.1 * 1.0;
        let se = (expected / m as f64).sqrt();
        assert!(
            (mean - expected).abs() < 3.0 * se,
            "mean {mean} vs expected {expected} (3 SE = {})",
            3.0 * se
        );
    }

    #[test]
    fn diffusion_only_variance() {
        // nu = 0, sigma = 0.3: increment variance = sigma^2 dt
        let model = LevyModel::stable_tempered(0.0, 0.5, 1.0).unwrap();
        let coeffs = CoefficientSpec::constant(0.0, 0.3).unwrap();
        let s = scheme(10_000, 0.05, 0.5);
        let path = simulate_increments(&model, coeffs, s, 99).unwrap();
        let xs = path.increments();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() - 1) as f64;
        let expected = 0.3 * 0.3 * 0.05;
        let se = expected * (2.0 / xs.len() as f64).sqrt();
        assert!((var - expected).abs() < 3.0 * se, "var {var} vs {expected}");
        assert!(path.jumps().is_empty());
    }

    #[test]
    fn truncated_levy_with_infinite_threshold_is_zero() {
        let model = exp_jump();
        let s = scheme(500, 0.25, f64::INFINITY);
        assert_eq!(s.v_n(), f64::INFINITY);
        let path = simulate_truncated_levy(&model, s, 5).unwrap();
        assert!(path.increments().iter().all(|&x| x == 0.0));
        assert!(path.jumps().is_empty());
    }

    #[test]
    fn truncated_levy_interval_count_mean() {
        // v_n = 1 via gamma = 1, dt = 1: counts ~ Poisson(dt e^-1)
        let model = exp_jump();
        let s = scheme(100_000, 1.0, 1.0);
        let path = simulate_truncated_levy(&model, s, 11).unwrap();
        let mean = path.jumps().len() as f64 / s.n() as f64;
        let expected = (-1.0f64).exp();
        let se = (expected / s.n() as f64).sqrt();
        assert!((mean - expected).abs() < 3.0 * se, "mean {mean} vs {expected}");
    }

    #[test]
    fn coupling_with_truncated_levy_is_bit_exact() {
        // Same seed, u_cut = v_n, no continuous part, no Gaussian proxy: the
        // jump component of the full simulator IS the truncated Levy path.
        let model = LevyModel::stable_tempered(0.5, 0.5, 1.0).unwrap();
        let s = scheme(2000, 0.05, 0.8);
        let full = Simulator::new(
            &model,
            CoefficientSpec::zero(),
            s,
            SimOptions { u_cut: Some(s.v_n()), gaussian_small_jumps: false },
        )
        .unwrap();
        let a = full.simulate(RngStream::root(31)).unwrap();
        let b = simulate_truncated_levy(&model, s, 31).unwrap();
        assert_eq!(a.increments(), b.increments());
        assert_eq!(a.jumps().len(), b.jumps().len());
    }

    #[test]
    fn determinism_bit_identical() {
        let model = LevyModel::stable_tempered(0.5, 0.5, 1.0).unwrap();
        let coeffs = CoefficientSpec::constant(0.1, 0.3).unwrap();
        let s = scheme(512, 0.01, 0.5);
        let a = simulate_increments(&model, coeffs, s, 2024).unwrap();
        let b = simulate_increments(&model, coeffs, s, 2024).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn replication_streams_are_uncorrelated() {
        let model = exp_jump();
        let coeffs = CoefficientSpec::constant(0.0, 0.2).unwrap();
        let s = scheme(10_000, 0.01, 0.5);
        let sim = Simulator::new(&model, coeffs, s, SimOptions::default()).unwrap();
        let root = RngStream::root(55);
        let a = sim.simulate(root.replication(0)).unwrap();
        let b = sim.simulate(root.replication(1)).unwrap();
        let n = s.n() as f64;
        let mean = |xs: &[f64]| xs.iter().sum::<f64>() / n;
        let (ma, mb) = (mean(a.increments()), mean(b.increments()));
        let mut cov = 0.0;
        let mut va = 0.0;
        let mut vb = 0.0;
        for (x, y) in a.increments().iter().zip(b.increments()) {
            cov += (x - ma) * (y - mb);
            va += (x - ma) * (x - ma);
            vb += (y - mb) * (y - mb);
        }
        let corr = cov / (va.sqrt() * vb.sqrt());
        assert!(corr.abs() < 4.0 / n.sqrt(), "corr = {corr}");
    }

    #[test]
    fn shifted_exponential_jump_mean() {
        // Conditional mean of Exp(1) beyond 1 is 2.
        let model = exp_jump();
        let sampler = JumpSampler::new(&model, Region::abs_above(1.0)).unwrap();
        let mut rng = RngStream::root(77).rng();
        let m = 100_000;
        let mut sum = 0.0;
        for _ in 0..m {
            sum += sampler.sample(&mut rng).unwrap();
        }
        let mean = sum / m as f64;
        let se = 1.0 / (m as f64).sqrt();
        assert!((mean - 2.0).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn empty_region_is_an_error() {
        let model = exp_jump();
        let err = sample_jump_size(&model, Region::abs_annulus(2.0, 2.0), RngStream::root(1));
        assert!(matches!(err, Err(SimError::Sampler(SamplerError::EmptyRegion))));
    }

    #[test]
    fn symmetric_model_sign_balance() {
        let model = LevyModel::stable_tempered(1.0, 0.5, 1.0).unwrap();
        let sampler = JumpSampler::new(&model, Region::abs_above(0.5)).unwrap();
        let mut rng = RngStream::root(3).rng();
        let m = 100_000;
        let mut positive = 0u32;
        for _ in 0..m {
            if sampler.sample(&mut rng).unwrap() > 0.0 {
                positive += 1;
            }
        }
        let frac = positive as f64 / m as f64;
        let se = 0.5 / (m as f64).sqrt();
        assert!((frac - 0.5).abs() < 3.0 * se, "fraction {frac}");
    }

    #[test]
    fn variance_gamma_conditional_absolute_mean() {
        // E|X| over {|x| > 0.3} against quadrature.
        let model = LevyModel::variance_gamma(0.8, 1.5).unwrap();
        let region = Region::abs_above(0.3);
        let sampler = JumpSampler::new(&model, region).unwrap();
        let mass = sampler.region_mass();
        let mean_abs =
            model.integrate_weighted(|x| x.abs(), region).unwrap() / mass;
        let second = model.integrate_weighted(|x| x * x, region).unwrap() / mass;
        let mut rng = RngStream::root(8).rng();
        let m = 50_000;
        let mut sum = 0.0;
        for _ in 0..m {
            sum += sampler.sample(&mut rng).unwrap().abs();
        }
        let got = sum / m as f64;
        let se = ((second - mean_abs * mean_abs).max(0.0) / m as f64).sqrt();
        assert!((got - mean_abs).abs() < 3.0 * se, "got {got}, expected {mean_abs}");
    }

    #[test]
    fn custom_model_numeric_inversion() {
        // Uniform density on (1, 2): conditional mean 1.5.
        let model = LevyModel::custom(CustomModel {
            name: "uniform_1_2".into(),
            density: Box::new(|x: f64| if x > 1.0 && x < 2.0 { 1.0 } else { 0.0 }),
            support: Support::Interval { lo: 1.0, hi: 2.0 },
            beta: 0.5,
            tail_exponent: f64::INFINITY,
            near_zero_bound: 1.0,
            near_zero_radius: 0.5,
            finite_activity: true,
            closed_form_tail: Some(Box::new(|v: f64| (2.0 - v.max(1.0)).clamp(0.0, 1.0))),
        })
        .unwrap();
        let sampler = JumpSampler::new(&model, Region::abs_above(1.0)).unwrap();
        let mut rng = RngStream::root(44).rng();
        let m = 2000;
        let mut sum = 0.0;
        for _ in 0..m {
            let x = sampler.sample(&mut rng).unwrap();
            assert!((1.0..=2.0).contains(&x));
            sum += x;
        }
        let mean = sum / m as f64;
        let se = (1.0f64 / 12.0 / m as f64).sqrt();
        assert!((mean - 1.5).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn discarded_moment_ratio_reported() {
        let model = LevyModel::stable_tempered(1.0, 0.5, 1.0).unwrap();
        let s = scheme(10, 1e-3, 0.5);
        let sim = Simulator::new(&model, CoefficientSpec::zero(), s, SimOptions::default())
            .unwrap();
        let ratio = sim.meta.discarded_moment_ratio.unwrap();
        assert!(ratio > 0.0 && ratio < 1.0, "ratio {ratio}");
    }

    #[test]
    fn sinusoidal_coefficients() {
        let drift = CoeffFn::Sinusoid { base: 0.1, amplitude: 0.2, period: 4.0 };
        assert!((drift.at(1.0) - 0.3).abs() < 1e-12);
        assert!((drift.at(3.0) + 0.1).abs() < 1e-12);
        assert!((drift.sup_bound() - 0.3).abs() < 1e-15);
        let coeffs = CoefficientSpec::new(drift, CoeffFn::Constant { value: 0.0 }).unwrap();
        let model = LevyModel::stable_tempered(0.0, 0.5, 1.0).unwrap();
        let s = scheme(8, 1.0, 0.5);
        // pure drift: increment i = b(midpoint) * dt exactly
        let path = simulate_increments(&model, coeffs, s, 1).unwrap();
        for (i, inc) in path.increments().iter().enumerate() {
            let expected = drift.at(i as f64 + 0.5);
            assert!((inc - expected).abs() < 1e-15, "interval {i}");
        }
    }

    #[test]
    fn declared_coefficient_bound_is_checked() {
        let lying = CoefficientSpec {
            drift: CoeffFn::Constant { value: 1.0 },
            vol: CoeffFn::Constant { value: 0.0 },
            bound: 0.1,
        };
        let model = exp_jump();
        let err = Simulator::new(&model, lying, scheme(16, 0.5, 0.5), SimOptions::default());
        assert!(matches!(err, Err(SimError::InvalidCoefficients(_))));
    }

    #[test]
    fn zero_cutoff_rejected_for_infinite_activity() {
        let model = LevyModel::stable_tempered(1.0, 0.5, 1.0).unwrap();
        let err = Simulator::new(
            &model,
            CoefficientSpec::zero(),
            scheme(10, 0.1, 0.5),
            SimOptions { u_cut: Some(0.0), gaussian_small_jumps: true },
        );
        assert!(matches!(err, Err(SimError::InvalidUCut(_))));
    }
}
