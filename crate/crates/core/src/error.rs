use thiserror::Error;

/// Errors raised by the simulator, the attacks and the analyzers.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("expected {expected} inputs, got {actual}")]
    InputCount { expected: usize, actual: usize },

    #[error(
        "party {party} is still running after round {round} of a strict {bound}-round protocol"
    )]
    StrictBoundExceeded {
        party: usize,
        round: u32,
        bound: u32,
    },

    #[error("message from {from} to {to} uses an edge outside the topology")]
    TopologyViolation { from: usize, to: usize },

    #[error("message from {from} to {to} in round {round} has {len} bytes, cap is {cap}")]
    MessageTooLarge {
        from: usize,
        to: usize,
        round: u32,
        len: usize,
        cap: usize,
    },

    #[error("party {0} has not produced an outcome")]
    StillRunning(usize),

    #[error("ring needs at least 2 copies, got {0}")]
    RingTooSmall(usize),

    #[error("ring composition needs a 3-party protocol, got {0} parties")]
    NotThreeParty(usize),

    #[error("designated slot did not halt within {0} rounds")]
    DesignatedSlotRunning(u32),

    #[error("attack phase 1 aborted; no value to announce")]
    PhaseOneAborted,

    #[error("corrupted set has {actual} parties, the attack needs {expected}")]
    CorruptionSize { expected: usize, actual: usize },

    #[error("input value {value} for party {party} is outside its domain of size {domain}")]
    OutOfDomain {
        party: usize,
        value: u64,
        domain: u32,
    },

    #[error("table exceeds the budget of {budget} entries ({size})")]
    BudgetExceeded { size: u128, budget: u128 },

    #[error("malformed function table: {0}")]
    MalformedTable(String),

    #[error("abort requested with {corrupted} corruptions, only allowed above t1 = {t1}")]
    IllegalAbort { corrupted: usize, t1: usize },

    #[error(
        "threshold parameters violate t1 <= t2 and t1 + 2*t2 < n (t1 = {t1}, t2 = {t2}, n = {n})"
    )]
    ThresholdParameters { t1: usize, t2: usize, n: usize },

    #[error("functionality is not {0}-dominated")]
    NotDominated(usize),

    #[error("unsupported subcase: {0}")]
    UnsupportedSubcase(String),

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
