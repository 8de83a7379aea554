//! Minimal reverse-mode differentiation: dense tensors, a gradient tape and
//! a finite-difference checker.

mod check;
mod tape;
mod tensor;

pub use check::{finite_diff_check, FdEntry, FdReport};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DiffError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape { op: &'static str, lhs: (usize, usize), rhs: (usize, usize) },
    #[error("non-finite result from {op}")]
    NonFinite { op: &'static str },
    #[error("backward needs a 1x1 output, got {shape:?}")]
    NotScalar { shape: (usize, usize) },
    #[error("variable is not recorded on this tape")]
    ForeignVar,
}
