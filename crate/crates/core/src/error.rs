use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BgkError {
    #[error("gamma = {gamma} is outside (1, {upper}] for n = {n}")]
    GammaOutOfRange { gamma: f64, upper: f64, n: usize },
    #[error("{name} must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },
    #[error("{name} must be finite and nonnegative, got {value}")]
    NegativeParameter { name: &'static str, value: f64 },
    #[error("dimension n = {0} is not supported (expected 1 or 2)")]
    UnsupportedDimension(usize),
    #[error("operation is undefined at the endpoint exponent gamma = (n+2)/n")]
    EndpointUnsupported,
    #[error("epsilon must be positive, got {0}")]
    EpsilonNonPositive(f64),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("operation requires the {expected} domain mode")]
    ModeMismatch { expected: &'static str },
    #[error("regularized moments are missing from the macroscopic field")]
    MissingRegularizedMoments,
    #[error("amplitude a = {a} must exceed c2 = {c2}")]
    NotAboveC2 { a: f64, c2: f64 },
    #[error("theta = {0} is outside [0, 1]")]
    ThetaOutOfRange(f64),
    #[error("{what} = {value} exceeds the cap C0 = {cap}")]
    BoundExceeded { what: &'static str, value: f64, cap: f64 },
    #[error("Maxwellian support reaches {reach} but the velocity box ends at {limit}")]
    SupportExceedsGrid { reach: f64, limit: f64 },
    #[error("cell {cell} carries infinite entropy")]
    InfiniteEntropy { cell: usize },
    #[error("support check failed at t = {time}: velocity reach {reach} exceeds {limit}")]
    CflViolation { time: f64, reach: f64, limit: f64 },
    #[error("Picard distances increased three times in a row (last {last})")]
    PicardDivergence { last: f64 },
    #[error("initial data exceeds c2 = {c2} (found {value})")]
    EndpointBoundViolated { value: f64, c2: f64 },
    #[error("initial data has a negative value {value} at index {index}")]
    NegativeInitialData { index: usize, value: f64 },
    #[error("ledger time {time} does not follow {last}")]
    NonMonotoneTime { time: f64, last: f64 },
    #[error("trajectory ends at {available} before the requested time {requested}")]
    InsufficientTrajectory { requested: f64, available: f64 },
    #[error("test function {id} does not vanish at the domain boundary")]
    TestFunctionSupportViolation { id: String },
    #[error("initial density profile touches vacuum (min rho = {0})")]
    VacuumInProfile(f64),
    #[error("Riemann-invariant gradients grew by {factor:.1}x by t = {time}")]
    BlowupSuspected { time: f64, factor: f64 },
    #[error("value {0} is not positive; cannot take logarithms")]
    NonPositiveValue(f64),
    #[error("order fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("time step {dt} exceeds the relaxation time {tau}")]
    StepTooLarge { dt: f64, tau: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, BgkError>;
