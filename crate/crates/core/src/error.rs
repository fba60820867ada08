use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("factor {factor}: node index {node} out of range for dimension {dimension}")]
    ScopeOutOfRange {
        factor: usize,
        node: usize,
        dimension: usize,
    },
    #[error("factor {factor}: node {node} appears more than once in scope")]
    DuplicateScopeNode { factor: usize, node: usize },
    #[error("node index {node} out of range for dimension {dimension}")]
    NodeOutOfRange { node: usize, dimension: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("non-finite input")]
    NonFiniteInput,
    #[error("non-finite gradient at particle {particle}")]
    NonFiniteGradient { particle: usize },
    #[error("bandwidth must be positive, got {0}")]
    InvalidBandwidth(f64),
    #[error("expected {expected} bandwidths, got {actual}")]
    BandwidthCount { expected: usize, actual: usize },
    #[error("need at least {required} particles, got {actual}")]
    TooFewParticles { required: usize, actual: usize },
    #[error("kernel locality {0} is not valid for this engine")]
    InvalidLocality(&'static str),
    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,
    #[error("every particle coincides with the query point")]
    AllParticlesCoincide,
    #[error("image is {width}x{height}, smaller than the {window}x{window} window")]
    ImageTooSmall {
        width: usize,
        height: usize,
        window: usize,
    },
    #[error("empty matrix")]
    Empty,
    #[error("invalid model parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
    #[error("iteration {iteration}, node {node}: {source}")]
    AtNode {
        iteration: usize,
        node: usize,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::AtIteration {
            iteration,
            source: alloc::boxed::Box::new(self),
        }
    }

    pub(crate) fn at_node(self, iteration: usize, node: usize) -> Self {
        Error::AtNode {
            iteration,
            node,
            source: alloc::boxed::Box::new(self),
        }
    }
}
