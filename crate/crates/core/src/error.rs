use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Shapes of two operands disagree.
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    /// A requested allocation exceeds the configured budget or cannot be represented.
    Capacity { requested_bytes: u128, budget_bytes: u128 },
    /// Size arithmetic overflowed.
    Overflow(&'static str),
    /// Input data is inconsistent with the graph or model.
    InvalidInput(alloc::string::String),
    /// Training diverged (non-finite loss).
    Diverged { iteration: usize, loss: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { what, expected, found } => {
                write!(f, "dimension mismatch for {what}: expected {expected}, found {found}")
            }
            Error::Capacity { requested_bytes, budget_bytes } => write!(
                f,
                "capacity exceeded: {requested_bytes} bytes requested, budget is {budget_bytes} bytes"
            ),
            Error::Overflow(what) => write!(f, "arithmetic overflow while computing {what}"),
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::Diverged { iteration, loss } => {
                write!(f, "training diverged at iteration {iteration} (loss = {loss})")
            }
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn invalid(msg: impl Into<alloc::string::String>) -> Error {
    Error::InvalidInput(msg.into())
}
