use thiserror::Error;

/// Errors raised anywhere in the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("register must contain at least one qubit")]
    EmptyRegister,
    #[error("register of {0} qubits exceeds the dense limit of 12")]
    TooManyQubits(usize),
    #[error("duplicate qubit label `{0}`")]
    DuplicateLabel(String),
    #[error("unknown qubit label `{0}`")]
    UnknownLabel(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("label order differs between operands: {left:?} vs {right:?}")]
    LabelMismatch { left: Vec<String>, right: Vec<String> },
    #[error("state is not normalized (norm^2 = {0})")]
    NotNormalized(f64),
    #[error("matrix is not unitary (max |M^dag M - I| = {0:e})")]
    NotUnitary(f64),
    #[error("matrix dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),
    #[error("angle {name} = {value} is not finite")]
    NonFiniteAngle { name: &'static str, value: f64 },
    #[error("angles must sum to 0 mod 2pi, got sum = {sum} (residue {residue:e})")]
    AngleSumNonZero { sum: f64, residue: f64 },
    #[error("angle {name} = {value} lies within 1e-6 of a degenerate point (0 or pi); H(-t) and H(t)^T coincide there")]
    DegenerateAngle { name: &'static str, value: f64 },
    #[error("qubits {labels:?} are entangled with the rest of the register (purity {purity})")]
    EntangledWithEnvironment { labels: Vec<String>, purity: f64 },
    #[error("message qubits are not reset to |00>")]
    MessageNotReset,
    #[error("operation `{op}` is not allowed in the current session phase ({phase})")]
    WrongPhase { op: &'static str, phase: String },
    #[error("split synthesis infeasible: constraint for q2 = {constraint} has residual {residual:e}")]
    InfeasibleSplit { constraint: u8, residual: f64 },
    #[error("the split must be executed on round 2, session is at round {0}")]
    WrongSplitRound(u32),
    #[error("no record for round {0}")]
    NoRecord(u32),
    #[error("announce fraction {0} must lie in (0, 1]")]
    BadFraction(f64),
    #[error("cannot select rounds from an empty transcript")]
    EmptyTranscript,
    #[error("secret bit sequence has length {found}, expected {expected}")]
    SecretLength { expected: usize, found: usize },
    #[error("bit value {0} is not 0 or 1")]
    BadBit(u8),
    #[error("trial count must be at least 1")]
    NoTrials,
}

pub type Result<T> = std::result::Result<T, Error>;
