use thiserror::Error;

/// A single violated model invariant, reported by name.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// `g2 = 0`: at least one block-free green slot is required.
    G2Zero,
    /// `m > 1` with some `p[i]` strictly between 0 and 1 and no explicit
    /// blocked-arrival law supplied.
    MixedBatchUnsupported { slot: usize, p: f64 },
    /// An explicit pmf has negative weights or does not sum to 1.
    MalformedPmf { context: String, detail: String },
    /// A probability parameter lies outside `[0, 1]`.
    BadProbability {
        name: String,
        slot: usize,
        value: f64,
    },
    /// A per-slot vector has the wrong length.
    LengthMismatch {
        name: String,
        expected: usize,
        got: usize,
    },
    /// An arrival mean is negative or non-finite.
    BadArrivalMean { slot: usize, value: f64 },
    /// `m = 0`: at least one lane is required.
    ZeroLanes,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::G2Zero => write!(f, "G2Zero: the second green part must satisfy g2 >= 1"),
            Violation::MixedBatchUnsupported { slot, p } => write!(
                f,
                "MixedBatchUnsupported: m > 1 with p[{slot}] = {p} in (0,1) requires an explicit blocked_arrivals entry"
            ),
            Violation::MalformedPmf { context, detail } => {
                write!(f, "MalformedPmf ({context}): {detail}")
            }
            Violation::BadProbability { name, slot, value } => {
                write!(f, "BadProbability: {name}[{slot}] = {value} outside [0,1]")
            }
            Violation::LengthMismatch {
                name,
                expected,
                got,
            } => write!(f, "LengthMismatch: {name} has length {got}, expected {expected}"),
            Violation::BadArrivalMean { slot, value } => {
                write!(f, "BadArrivalMean: slot {slot} mean {value}")
            }
            Violation::ZeroLanes => write!(f, "ZeroLanes: m must be at least 1"),
        }
    }
}

/// Rejection of a model configuration; lists every violated invariant.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model configuration: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("config parse error: {0}")]
    Parse(String),
}

impl ModelError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            ModelError::Invalid(v) => v,
            ModelError::Parse(_) => &[],
        }
    }
}

/// Errors from the analytic (PGF) solution path.
#[derive(Debug, Error)]
pub enum SolveError {
    #[error("model is unstable: arrival load {load} >= capacity r0 = {r0} per cycle")]
    Unstable { r0: f64, load: f64 },
    #[error("load ratio {rho} exceeds the near-critical guard 0.999; roots collide near z=1")]
    NearCritical { rho: f64 },
    #[error("root count mismatch: winding number {winding} but expected {expected} roots in the closed unit disk")]
    RootCountMismatch { expected: usize, winding: i64 },
    #[error("boundary linear system is numerically singular (condition estimate {cond:.3e})")]
    SingularSystem { cond: f64 },
    #[error("solved unknown {label} = {value} outside [-1e-6, 1+1e-6]")]
    UnknownOutOfRange { label: String, value: f64 },
    #[error("lattice inversion aliasing bound {bound:.3e} exceeds 1e-8")]
    InversionUnstable { bound: f64 },
    #[error("PGF recursion cannot be evaluated at z = 0")]
    EvalDomain,
    #[error("root refinement failed to converge")]
    RootRefinement,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Errors from the truncated-chain oracle.
#[derive(Debug, Error)]
pub enum OracleError {
    #[error("power iteration did not converge within {cap} cycles (last TV change {last_tv:.3e})")]
    NoConvergence { cap: usize, last_tv: f64 },
    #[error("truncation level L = {l} too small: need L >= max(10 * arrival load, m) = {need}")]
    TruncationTooSmall { l: usize, need: usize },
    #[error("model is unstable: arrival load {load} >= capacity r0 = {r0} per cycle")]
    Unstable { r0: f64, load: f64 },
}

/// Errors from capacity helpers.
#[derive(Debug, Error)]
pub enum CapacityError {
    #[error("DivisionDomain: f_Rpb must be positive, got {0}")]
    DivisionDomain(f64),
    #[error("PreconditionUnmet: {0}")]
    PreconditionUnmet(String),
}
