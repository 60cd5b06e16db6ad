use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("infeasible configuration: |q|^2 = {r2} with b = {b}")]
    FeasibilityViolation { r2: f64, b: f64 },

    #[error("degenerate ensemble: median pairwise distance is zero")]
    DegenerateEnsemble,

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("optimizer diverged after {iters} iterations (residual {residual:e})")]
    OptimizerDivergence { iters: usize, residual: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolveFailure(String),

    #[error("SDE rejection sampling exceeded {0} resamples")]
    RejectionOverflow(usize),

    #[error("degenerate hysteresis loop: {0}")]
    DegenerateLoop(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("step {step}, node {node}: {source}")]
    AtNode {
        step: usize,
        node: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_node(self, step: usize, node: usize) -> Self {
        Error::AtNode {
            step,
            node,
            source: Box::new(self),
        }
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            e @ (Error::AtNode { .. } | Error::AtStep { .. }) => e,
            e => Error::AtStep {
                step,
                source: Box::new(e),
            },
        }
    }

    /// Step and node where a numerical failure happened, when known.
    pub fn location(&self) -> (Option<usize>, Option<usize>) {
        match self {
            Error::AtNode { step, node, .. } => (Some(*step), Some(*node)),
            Error::AtStep { step, .. } => (Some(*step), None),
            _ => (None, None),
        }
    }

    /// True for failures of the numerics, as opposed to bad input or I/O.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::AtNode { source, .. } | Error::AtStep { source, .. } => source.is_numerical(),
            Error::Config(_) | Error::Io(_) | Error::Checkpoint(_) | Error::SizeMismatch { .. } => {
                false
            }
            _ => true,
        }
    }
}
