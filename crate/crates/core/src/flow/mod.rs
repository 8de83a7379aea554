//! Graphical residual flows.
//!
//! A [`Grf`] composes `T` masked [`ResidualBlock`]s. Every block's weights
//! are kept spectrally normalized so `Lip(g) ≤ c² < 1`, which makes each
//! block invertible. Because the masks follow a DAG, each block's Jacobian
//! is triangular under a topological permutation, so the log-determinant is
//! the sum of the logs of its diagonal entries.

mod block;
mod spectral;

use alloc::vec::Vec;

pub use block::{BlockVars, Inversion, ResidualBlock};
pub use spectral::spectral_normalize;

use rand::Rng;

use crate::diff::{DiffError, Tape, Tensor, Var};
use crate::masking::MaskSet;

pub const DEFAULT_LIP: f64 = 0.97;
pub const DEFAULT_BLOCKS: usize = 4;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FlowError {
    #[error("expected width {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("non-finite value in flow (block {block:?})")]
    NonFinite { block: Option<usize> },
    #[error("non-positive Jacobian diagonal in block {block}")]
    NonPositiveJacobian { block: usize },
    #[error("inversion did not converge (block {block:?}): residual {residual:e} after {iterations} iterations")]
    NoConvergence { block: Option<usize>, residual: f64, iterations: usize },
    #[error("a flow needs at least one block")]
    Empty,
    #[error("blocks disagree on dimensions")]
    Mismatch,
    #[error(transparent)]
    Diff(#[from] DiffError),
}

impl FlowError {
    fn in_block(self, index: usize) -> Self {
        match self {
            FlowError::NonFinite { block: None } => FlowError::NonFinite { block: Some(index) },
            FlowError::NoConvergence { block: None, residual, iterations } => {
                FlowError::NoConvergence { block: Some(index), residual, iterations }
            }
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Maps data-like samples to the base distribution (the prior flow).
    Normalizing,
    /// Maps base samples to the target, conditioned on observations (the
    /// encoder flow).
    Generative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grf {
    blocks: Vec<ResidualBlock>,
    direction: Direction,
}

impl Grf {
    pub fn new(blocks: Vec<ResidualBlock>, direction: Direction) -> Result<Self, FlowError> {
        let first = blocks.first().ok_or(FlowError::Empty)?;
        let (dim, cond) = (first.dim(), first.cond_dim());
        if blocks.iter().any(|b| b.dim() != dim || b.cond_dim() != cond) {
            return Err(FlowError::Mismatch);
        }
        Ok(Self { blocks, direction })
    }

    /// `t` randomly initialized blocks sharing one mask set.
    pub fn random<R: Rng + ?Sized>(masks: &MaskSet, cond_dim: usize, t: usize, lip: f64, direction: Direction, rng: &mut R) -> Result<Self, FlowError> {
        let blocks = (0..t).map(|_| ResidualBlock::random(masks.clone(), cond_dim, lip, rng)).collect();
        Self::new(blocks, direction)
    }

    /// `t` all-zero blocks: the identity flow.
    pub fn identity(masks: &MaskSet, cond_dim: usize, t: usize, lip: f64, direction: Direction) -> Result<Self, FlowError> {
        let blocks = (0..t).map(|_| ResidualBlock::zeros(masks.clone(), cond_dim, lip)).collect();
        Self::new(blocks, direction)
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn dim(&self) -> usize {
        self.blocks[0].dim()
    }

    pub fn cond_dim(&self) -> usize {
        self.blocks[0].cond_dim()
    }

    pub fn blocks(&self) -> &[ResidualBlock] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [ResidualBlock] {
        &mut self.blocks
    }

    /// Applies the blocks in order; returns the output and the exact
    /// per-row log-determinant.
    pub fn forward_logdet(&self, z0: &Tensor, cond: Option<&Tensor>) -> Result<(Tensor, Vec<f64>), FlowError> {
        let mut z = z0.clone();
        let mut logdet = alloc::vec![0.0; z0.rows()];
        for (t, block) in self.blocks.iter().enumerate() {
            let (next, diag) = block.forward_with_diag(&z, cond).map_err(|e| e.in_block(t))?;
            if !next.is_finite() || !diag.is_finite() {
                return Err(FlowError::NonFinite { block: Some(t) });
            }
            if diag.data().iter().any(|&d| d <= 0.0) {
                return Err(FlowError::NonPositiveJacobian { block: t });
            }
            for (r, ld) in logdet.iter_mut().enumerate() {
                *ld += diag.row_slice(r).iter().map(|&d| crate::math::ln(d)).sum::<f64>();
            }
            z = next;
        }
        Ok((z, logdet))
    }

    pub fn forward(&self, z0: &Tensor, cond: Option<&Tensor>) -> Result<Tensor, FlowError> {
        self.forward_logdet(z0, cond).map(|(z, _)| z)
    }

    /// Inverts the blocks in reverse order.
    pub fn invert(&self, zt: &Tensor, cond: Option<&Tensor>, tol: f64, max_iter: usize) -> Result<Tensor, FlowError> {
        let mut z = zt.clone();
        for (t, block) in self.blocks.iter().enumerate().rev() {
            z = block.invert(&z, cond, tol, max_iter).map_err(|e| e.in_block(t))?.z;
        }
        Ok(z)
    }

    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Vec<BlockVars> {
        self.blocks.iter().map(|b| b.bind(tape, trainable)).collect()
    }

    /// Differentiable forward pass; the log-determinant is `rows x 1`.
    pub fn forward_tape(&self, tape: &mut Tape, vars: &[BlockVars], z: Var, cond: Option<Var>) -> Result<(Var, Var), DiffError> {
        let mut z = z;
        let mut total: Option<Var> = None;
        for (block, v) in self.blocks.iter().zip(vars) {
            let (next, ld) = block.forward_tape(tape, v, z, cond)?;
            total = Some(match total {
                Some(acc) => tape.add(acc, ld)?,
                None => ld,
            });
            z = next;
        }
        Ok((z, total.expect("flow has at least one block")))
    }

    pub fn normalize(&mut self) {
        for b in &mut self.blocks {
            b.normalize();
        }
    }
}
