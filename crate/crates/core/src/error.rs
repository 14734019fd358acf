use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes are incompatible.
    Dimension {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    /// A row whose norm is below the cosine floor.
    Degenerate { op: &'static str, row: usize },
    /// Invalid structural configuration (counts, divisibility).
    Config(String),
    /// A caller violated an operation's precondition.
    Contract(String),
    /// A loss or value became NaN or infinite.
    NumericHealth { component: String, value: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension { op, left, right } => write!(
                f,
                "{op}: incompatible shapes {}x{} and {}x{}",
                left.0, left.1, right.0, right.1
            ),
            Error::Degenerate { op, row } => {
                write!(f, "{op}: row {row} has (near) zero norm")
            }
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Contract(msg) => write!(f, "contract violated: {msg}"),
            Error::NumericHealth { component, value } => {
                write!(f, "non-finite value {value} in {component}")
            }
        }
    }
}

impl core::error::Error for Error {}
