//! CLI error taxonomy mapped to process exit codes.

use thiserror::Error;

use levyedf::limitlaw::LimitLawError;
use levyedf::models::ModelError;
use levyedf::pathsim::SimError;
use levyedf::quad::QuadError;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, malformed specs, invalid constants. Exit code 2.
    #[error("config error: {0}")]
    Config(String),
    /// Missing or malformed input data. Exit code 3.
    #[error("data error: {0}")]
    Data(String),
    /// Numerical or internal consistency failures. Exit code 4.
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<levyedf::conditions::ConditionsError> for CliError {
    fn from(e: levyedf::conditions::ConditionsError) -> Self {
        use levyedf::conditions::ConditionsError::*;
        match e {
            Domain(_) => CliError::Config(e.to_string()),
            Internal(_) => CliError::Internal(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InvalidParameter(_) | ModelError::InfiniteMass => {
                CliError::Config(e.to_string())
            }
            ModelError::DensityInvalid { .. }
            | ModelError::NearZeroBoundViolated { .. }
            | ModelError::NotIntegrable(_)
            | ModelError::ClosedFormMismatch { .. } => CliError::Config(e.to_string()),
            ModelError::Internal(_) | ModelError::Quad(_) => CliError::Internal(e.to_string()),
        }
    }
}

impl From<levyedf::models::RhoError> for CliError {
    fn from(e: levyedf::models::RhoError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<QuadError> for CliError {
    fn from(e: QuadError) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidUCut(_)
            | SimError::InvalidScheme(_)
            | SimError::InvalidCoefficients(_) => CliError::Config(e.to_string()),
            SimError::InvalidData(_) => CliError::Data(e.to_string()),
            SimError::Sampler(_) => CliError::Internal(e.to_string()),
            SimError::Model(m) => m.into(),
        }
    }
}

impl From<LimitLawError> for CliError {
    fn from(e: LimitLawError) -> Self {
        match e {
            LimitLawError::InvalidConfig(_) => CliError::Config(e.to_string()),
            LimitLawError::Model(m) => m.into(),
            LimitLawError::Rho(r) => r.into(),
            LimitLawError::Sim(s) => s.into(),
            LimitLawError::Conditions(c) => c.into(),
            LimitLawError::Stats(_)
            | LimitLawError::McBudgetExhausted { .. }
            | LimitLawError::Internal(_) => CliError::Internal(e.to_string()),
        }
    }
}

impl From<levyedf::estimator::EstimatorError> for CliError {
    fn from(e: levyedf::estimator::EstimatorError) -> Self {
        use levyedf::estimator::EstimatorError::*;
        match e {
            InvalidParameter(_) => CliError::Config(e.to_string()),
            Model(m) => m.into(),
        }
    }
}
