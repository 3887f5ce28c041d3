use thiserror::Error;

/// Every failure the resizer can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ResizeError {
    #[error("invalid gate: {0}")]
    InvalidGate(String),

    #[error("wire {wire} out of range for width {width}")]
    WireOutOfRange { wire: usize, width: usize },

    #[error("wire collision: wires {a} and {b} both map to {target}")]
    WireCollision { a: usize, b: usize, target: usize },

    #[error("wire {0} has no mapping")]
    UnmappedWire(usize),

    #[error("non-unitary circuit: {0} gate present")]
    NonUnitary(&'static str),

    #[error("missing value for variable block {0}")]
    MissingBlockValue(usize),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("pair not resizable: ({host}, {guest})")]
    PairNotResizable { host: usize, guest: usize },

    #[error("input not instantiated: distance {0:e}")]
    NotInstantiated(f64),

    #[error("synthesis failed at budget of {0} CNOTs")]
    SynthesisFailed(usize),

    #[error("not resizable at unitary level")]
    NotResizable,

    #[error("unsupported gate: {name} (line {line})")]
    UnsupportedGate { name: String, line: usize },

    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("invalid coupling graph: {0}")]
    InvalidCoupling(String),

    #[error("unsupported benchmark family: {0}")]
    UnsupportedFamily(String),

    #[error("{0}")]
    InvalidArgument(String),

    #[error("io error: {0}")]
    Io(String),
}

impl ResizeError {
    /// Stable machine-readable tag, used in error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::InvalidGate(_) => "invalid_gate",
            Self::WireOutOfRange { .. } => "wire_out_of_range",
            Self::WireCollision { .. } => "wire_collision",
            Self::UnmappedWire(_) => "unmapped_wire",
            Self::NonUnitary(_) => "non_unitary",
            Self::MissingBlockValue(_) => "missing_block_value",
            Self::DimensionMismatch { .. } => "dimension_mismatch",
            Self::PairNotResizable { .. } => "pair_not_resizable",
            Self::NotInstantiated(_) => "not_instantiated",
            Self::SynthesisFailed(_) => "synthesis_failed",
            Self::NotResizable => "not_resizable",
            Self::UnsupportedGate { .. } => "unsupported_gate",
            Self::Parse { .. } => "parse_error",
            Self::InvalidCoupling(_) => "invalid_coupling",
            Self::UnsupportedFamily(_) => "unsupported_family",
            Self::InvalidArgument(_) => "invalid_argument",
            Self::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for ResizeError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

pub type Result<T, E = ResizeError> = std::result::Result<T, E>;
