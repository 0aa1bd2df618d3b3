//! Signal temporal logic over uniformly sampled traces: formula trees, a
//! textual syntax, Boolean and quantitative semantics, and a smooth
//! differentiable robustness for gradient-based optimization.

mod eval;
mod formula;
mod parser;
mod smooth;
mod trace;

pub use eval::{robustness, robustness_signal, satisfies, Robustness};
pub use formula::{Formula, Interval, Predicate};
pub use parser::{parse, parse_formula};
pub use smooth::{smooth_robustness, softmax, softmin, SmoothRobustness};
pub use trace::{Channel, Trace};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StlError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("unknown channel `{0}`")]
    UnknownChannel(String),
    #[error("malformed interval [{lo},{hi}]")]
    MalformedInterval { lo: f64, hi: f64 },
    #[error("invalid formula: {0}")]
    InvalidFormula(String),
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("formula evaluated at sample {index} needs {needed} samples, trace has {available}")]
    HorizonOverflow {
        index: usize,
        needed: usize,
        available: usize,
    },
    #[error("smoothing parameter must be positive and finite, got {0}")]
    InvalidBeta(f64),
}
