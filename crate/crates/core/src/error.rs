use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("state {state} out of range (num_states = {num_states})")]
    InvalidState { state: usize, num_states: usize },

    #[error("action {action} not available at state {state} ({available} actions)")]
    InvalidAction {
        state: usize,
        action: usize,
        available: usize,
    },

    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("value iteration did not converge after {iterations} sweeps (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("index {index} out of range for a sequence of length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("sequence length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid disturbance {value} (must be < {size})")]
    InvalidDisturbance { value: usize, size: usize },

    #[error("grid format: {0}")]
    Grid(String),

    #[error("spec file: {0}")]
    SpecFormat(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{arch} run {run} failed at step {step}: {source}")]
    Run {
        arch: String,
        run: usize,
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
