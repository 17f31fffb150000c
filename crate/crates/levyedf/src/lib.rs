//! Truncated empirical distribution functions of the Levy measure of a
//! discretely observed Ito semimartingale, together with the simulation and
//! Monte Carlo machinery needed to verify their Gaussian limit behaviour.
//!
//! The crate is organized around the statistical pipeline:
//!
//! * [`models`] - Levy densities, weight functions and the integral
//!   functionals `N_rho`, `H_rho`, `d_rho` they induce;
//! * [`conditions`] - the constant algebra tying activity indices, weight
//!   growth and sampling rates together, plus an observation-scheme checker;
//! * [`pathsim`] - increment simulation for jump diffusions and their
//!   truncated compound-Poisson approximations;
//! * [`estimator`] - the truncated empirical distribution function, its
//!   normalized empirical process and the smooth-cutoff decomposition;
//! * [`limitlaw`] - sampling of the limiting time-changed Brownian motion and
//!   batteries of Monte Carlo experiments against it.
//!
//! Replication-level parallelism runs on rayon when the default `parallel`
//! feature is enabled and falls back to sequential iteration otherwise; the
//! results are bit-identical either way.

// `!(x > 0.0)` is used deliberately in domain checks: unlike `x <= 0.0` it
// also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod conditions;
pub mod estimator;
pub mod exec;
pub mod limitlaw;
pub mod models;
pub mod pathsim;
pub mod quad;

pub use conditions::{AlternateConstants, PrimaryConstants, SchemeCheckReport};
pub use estimator::{estimate, CutoffPsi, TruncatedLdf};
pub use models::{LevyModel, ModelError, ModelSpec, Region, RhoFunction, RhoSpec};
pub use pathsim::{
    simulate_increments, simulate_truncated_levy, CoefficientSpec, IncrementPath,
    ObservationScheme, RngStream,
};
pub use quad::{QuadError, QuadratureConfig};
