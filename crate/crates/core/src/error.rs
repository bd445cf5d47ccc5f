use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid support: {0}")]
    Support(String),
    #[error("unknown {kind} label `{label}`")]
    UnknownLabel { kind: &'static str, label: String },
    #[error("duplicate cell (z={z}, x={x}, bin={bin})")]
    DuplicateCell { z: String, x: String, bin: String },
    #[error("probability mass for instrument `{z}` is {mass}, expected 1/1")]
    InstrumentMass { z: String, mass: String },
    #[error("invalid probability `{0}`")]
    Probability(String),
    #[error("instrument `{0}` has no records")]
    EmptyStratum(String),
    #[error("outcome `{0}` lies outside every bin")]
    OutsideBins(String),
    #[error("no treatment order declared")]
    NoOrder,
    #[error("instrument subset must contain at least two values")]
    SubsetTooSmall,
    #[error("{what} cap exceeded: {size} > {cap}")]
    CapExceeded { what: &'static str, size: usize, cap: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("requires a binary instrument, found K={0}")]
    NeedsBinaryInstrument(usize),
    #[error("frequency rows cannot be expressed as edge capacities; use the feasibility check instead")]
    ExtraRowsInFlow,
    #[error("flow value {0} is below one; no type distribution corresponds to it")]
    FlowDeficit(String),
    #[error("missing entry: {0}")]
    Missing(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
