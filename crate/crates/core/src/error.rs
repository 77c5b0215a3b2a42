use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("table shape does not match scenario: {0}")]
    ShapeMismatch(String),
    #[error("negative probability {value} at (x={x}, y={y}, a={a}, b={b})")]
    NegativeEntry {
        x: usize,
        y: usize,
        a: usize,
        b: usize,
        value: f64,
    },
    #[error("setting (x={x}, y={y}) sums to {sum}, not 1")]
    NotNormalized { x: usize, y: usize, sum: f64 },
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("mixing weights must be nonnegative and sum to 1 (got sum {0})")]
    WeightSumInvalid(f64),
    #[error("scenarios differ: {0}")]
    ScenarioMismatch(String),
    #[error("no samples for setting (x={x}, y={y})")]
    MissingSetting { x: usize, y: usize },
    #[error("enumeration needs {needed} strategies, cap is {cap}")]
    CapExceeded { needed: u128, cap: u128 },
    #[error("correlation is signaling (max marginal deviation {0})")]
    NotNoSignaling(f64),
    #[error("linear program unexpectedly infeasible: {0}")]
    Infeasible(String),
    #[error("operation requires the binary scenario (2,2,2,2)")]
    UnsupportedScenario,
    #[error("target CHSH mark {0} exceeds the algebraic maximum 4")]
    InfeasibleTarget(String),
    #[error("not a unit vector (norm {0})")]
    NotUnitVector(f64),
    #[error("search budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("unknown model {0:?}")]
    UnknownModel(String),
    #[error("unknown setting family {0:?}")]
    UnknownFamily(String),
    #[error("model {model} cannot play setting: {reason}")]
    IncompatibleSetting { model: String, reason: String },
    #[error("parse error: {0}")]
    Parse(String),
}
