//! Error classes and the exit codes they map to.

use std::fmt;

use scenverify::checker::CheckError;
use scenverify::costsyn::CostSynError;
use scenverify::model::SpecError;
use scenverify::modelio::uav::ConfigError;
use scenverify::modelio::LoadError;
use scenverify::sampling::SamplingError;
use scenverify::scenario::ScenarioError;
use scenverify::ModelError;

pub const EXIT_FAILED: i32 = 1;
pub const EXIT_MODEL: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_IO: i32 = 74;

#[derive(Debug)]
pub enum Failure {
    /// Bad flags or inconsistent settings.
    Usage(String),
    /// The model cannot be read, parsed or instantiated.
    Model(String),
    /// A solver or iteration failed.
    Numeric(String),
    /// An output file cannot be written.
    Io(String),
    /// A self-test check did not hold.
    Failed(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Model(_) => EXIT_MODEL,
            Failure::Numeric(_) => EXIT_NUMERIC,
            Failure::Io(_) => EXIT_IO,
            Failure::Failed(_) => EXIT_FAILED,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Model(m) => write!(f, "model error: {m}"),
            Failure::Numeric(m) => write!(f, "numeric failure: {m}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
            Failure::Failed(m) => write!(f, "check failed: {m}"),
        }
    }
}

pub fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        Failure::Model(e.to_string())
    }
}

impl From<SpecError> for Failure {
    fn from(e: SpecError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::MissingParameter(p) => Failure::Usage(format!(
                "parameter `{p}` has no value; pass --set {p}=VALUE"
            )),
            e => Failure::Model(e.to_string()),
        }
    }
}

impl From<SamplingError> for Failure {
    fn from(e: SamplingError) -> Self {
        match e {
            SamplingError::ZeroSamples => Failure::Usage(e.to_string()),
            e => Failure::Model(e.to_string()),
        }
    }
}

impl From<CheckError> for Failure {
    fn from(e: CheckError) -> Self {
        match e {
            CheckError::Model(m) => m.into(),
            CheckError::NotConverged(_) | CheckError::Singular(_) | CheckError::Lp(_) => {
                Failure::Numeric(e.to_string())
            }
            CheckError::UnsupportedLp => Failure::Usage(e.to_string()),
            CheckError::EmptyTarget
            | CheckError::ExpectedCostIllDefined(_)
            | CheckError::MissingCosts => Failure::Model(e.to_string()),
        }
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Domain(m) => Failure::Usage(m),
            ScenarioError::NoSolution(_) => Failure::Numeric(e.to_string()),
            ScenarioError::Sampling(s) => s.into(),
            ScenarioError::Check(c) => c.into(),
        }
    }
}

impl From<CostSynError> for Failure {
    fn from(e: CostSynError) -> Self {
        match e {
            CostSynError::NonAffineCost { .. } | CostSynError::NegativeCost { .. } => {
                Failure::Model(e.to_string())
            }
            CostSynError::WrongSpecification
            | CostSynError::BadBounds(_)
            | CostSynError::TooFewSamples { .. }
            | CostSynError::UnsupportedMode => Failure::Usage(e.to_string()),
            CostSynError::Lp(_) | CostSynError::Microlp(_) => Failure::Numeric(e.to_string()),
            CostSynError::Check(c) => c.into(),
            CostSynError::Sampling(s) => s.into(),
            CostSynError::Scenario(s) => s.into(),
        }
    }
}
