use thiserror::Error;

pub type Result<T, E = HpsError> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HpsError {
    #[error("invalid {what} count {value} (need at least {min})")]
    InvalidCount {
        what: &'static str,
        value: usize,
        min: usize,
    },

    #[error("degenerate interval [{a}, {b}]")]
    DegenerateInterval { a: f64, b: f64 },

    #[error("node set contains duplicate points")]
    DuplicateNodes,

    #[error("leaf count {value} along {axis} is not a power of two")]
    NonPowerOfTwo { axis: char, value: usize },

    #[error("box {node} is a leaf and has no children")]
    LeafNodeArgument { node: usize },

    #[error("index {index} out of range (valid: {min}..={max})")]
    OutOfRange {
        index: usize,
        min: usize,
        max: usize,
    },

    #[error("unknown case `{0}`")]
    UnknownCase(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("operator is not elliptic at ({x}, {y}): c11={c11}, c12={c12}, c22={c22}")]
    NotElliptic {
        x: f64,
        y: f64,
        c11: f64,
        c12: f64,
        c22: f64,
    },

    #[error("interior collocation block of leaf {node} is singular (rcond {rcond:.3e})")]
    SingularInteriorBlock { node: usize, rcond: f64 },

    #[error(
        "interface operator of box {node} is singular (rcond {rcond:.3e}); \
         probable resonance of the local Dirichlet problem"
    )]
    SingularInterfaceOperator { node: usize, rcond: f64 },

    #[error("body load is nonzero but operators were built without body-load support")]
    CacheMissingBodyOperators,

    #[error("point ({x}, {y}) lies outside the domain")]
    PointOutsideDomain { x: f64, y: f64 },
}

impl HpsError {
    /// Stable, machine-parsable identifier.
    pub fn code(&self) -> &'static str {
        match self {
            HpsError::InvalidCount { .. } => "invalid-count",
            HpsError::DegenerateInterval { .. } => "degenerate-interval",
            HpsError::DuplicateNodes => "duplicate-nodes",
            HpsError::NonPowerOfTwo { .. } => "non-power-of-two",
            HpsError::LeafNodeArgument { .. } => "leaf-node-argument",
            HpsError::OutOfRange { .. } => "out-of-range",
            HpsError::UnknownCase(_) => "unknown-name",
            HpsError::InvalidParams(_) => "invalid-params",
            HpsError::ShapeMismatch { .. } => "shape-mismatch",
            HpsError::NotElliptic { .. } => "not-elliptic",
            HpsError::SingularInteriorBlock { .. } => "singular-interior-block",
            HpsError::SingularInterfaceOperator { .. } => "singular-interface-operator",
            HpsError::CacheMissingBodyOperators => "cache-missing-body-operators",
            HpsError::PointOutsideDomain { .. } => "point-outside-domain",
        }
    }

    /// Box number the failure is attached to, if any.
    pub fn node(&self) -> Option<usize> {
        match *self {
            HpsError::SingularInteriorBlock { node, .. }
            | HpsError::SingularInterfaceOperator { node, .. }
            | HpsError::LeafNodeArgument { node } => Some(node),
            _ => None,
        }
    }
}
