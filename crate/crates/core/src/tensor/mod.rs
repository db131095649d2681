//! Dense and sparse numerics with reverse-mode automatic differentiation.

mod dense;
mod gradcheck;
mod optim;
mod sparse;
mod tape;

pub use dense::Tensor;
pub use gradcheck::{grad_check, GradCheckError, GradCheckOptions, GradCheckReport};
pub use optim::{Adam, AdamConfig, Parameter};
pub use sparse::CsrMatrix;
pub use tape::{Gradients, Tape, Var};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TensorError {
    #[error("dimension error ({op}, got {got:?}, expected {expected:?})")]
    Dimension { op: &'static str, got: (usize, usize), expected: (usize, usize) },
    #[error("{0} needs at least one operand")]
    EmptyOperandList(&'static str),
    #[error("loss mask is empty")]
    EmptyMask,
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("backward needs a 1x1 output, got {0:?}")]
    NonScalarLoss((usize, usize)),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
