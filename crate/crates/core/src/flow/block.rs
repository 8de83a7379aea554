use rand::Rng;

use super::spectral::spectral_normalize;
use super::FlowError;
use crate::diff::{DiffError, Tape, Tensor, Var};
use crate::masking::MaskSet;
use crate::math;

const INIT_SCALE: f64 = 0.1;

/// Masked residual block `z ↦ z + W2 h(W1 y + b1) + b2` with `h = tanh`,
/// where `y = z ⊕ cond` when the block is conditioned.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBlock {
    pub w1: Tensor,
    pub b1: Tensor,
    pub w2: Tensor,
    pub b2: Tensor,
    masks: MaskSet,
    lip: f64,
    cond_dim: usize,
}

/// Tape handles for one block's parameters, in [`ResidualBlock::params`] order.
#[derive(Debug, Clone, Copy)]
pub struct BlockVars {
    pub w1: Var,
    pub b1: Var,
    pub w2: Var,
    pub b2: Var,
    m1: Var,
    m2: Var,
}

impl ResidualBlock {
    /// All-zero block (the identity map).
    pub fn zeros(masks: MaskSet, cond_dim: usize, lip: f64) -> Self {
        let (h, inputs, k) = (masks.hidden_dim(), masks.input_dim(), masks.output_dim());
        assert_eq!(inputs, k + cond_dim, "mask input width must be K + conditioning");
        assert!(lip > 0.0 && lip < 1.0, "Lipschitz coefficient must lie in (0, 1)");
        Self {
            w1: Tensor::zeros(h, inputs),
            b1: Tensor::zeros(1, h),
            w2: Tensor::zeros(k, h),
            b2: Tensor::zeros(1, k),
            masks,
            lip,
            cond_dim,
        }
    }

    /// Random masked weights, scaled by fan-in and then normalized.
    pub fn random<R: Rng + ?Sized>(masks: MaskSet, cond_dim: usize, lip: f64, rng: &mut R) -> Self {
        let mut block = Self::zeros(masks, cond_dim, lip);
        let s1 = INIT_SCALE / math::sqrt(block.w1.cols() as f64);
        let s2 = INIT_SCALE / math::sqrt(block.w2.cols() as f64);
        block.w1 = Tensor::from_fn(block.w1.rows(), block.w1.cols(), |_, _| s1 * crate::rng::normal(rng)).hadamard(&block.masks.m1);
        block.w2 = Tensor::from_fn(block.w2.rows(), block.w2.cols(), |_, _| s2 * crate::rng::normal(rng)).hadamard(&block.masks.m2);
        block.normalize();
        block
    }

    pub fn dim(&self) -> usize {
        self.w2.rows()
    }

    pub fn cond_dim(&self) -> usize {
        self.cond_dim
    }

    pub fn masks(&self) -> &MaskSet {
        &self.masks
    }

    pub fn lip(&self) -> f64 {
        self.lip
    }

    pub fn params(&self) -> [&Tensor; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn params_mut(&mut self) -> [&mut Tensor; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    /// Re-projects both weight matrices onto `σ(W ⊙ M) ≤ c`.
    pub fn normalize(&mut self) {
        self.w1 = spectral_normalize(&self.w1, &self.masks.m1, self.lip);
        self.w2 = spectral_normalize(&self.w2, &self.masks.m2, self.lip);
    }

    /// `σ(W1 ⊙ M1)` and `σ(W2 ⊙ M2)`.
    pub fn spectral_norms(&self) -> (f64, f64) {
        (
            crate::linalg::spectral_norm(&self.w1.hadamard(&self.masks.m1)),
            crate::linalg::spectral_norm(&self.w2.hadamard(&self.masks.m2)),
        )
    }

    fn block_input(&self, z: &Tensor, cond: Option<&Tensor>) -> Result<Tensor, FlowError> {
        if z.cols() != self.dim() {
            return Err(FlowError::Shape { expected: self.dim(), got: z.cols() });
        }
        match (cond, self.cond_dim) {
            (None, 0) => Ok(z.clone()),
            (Some(c), d) if d > 0 => {
                if c.cols() != d || c.rows() != z.rows() {
                    return Err(FlowError::Shape { expected: d, got: c.cols() });
                }
                Ok(z.concat_cols(c))
            }
            (None, d) => Err(FlowError::Shape { expected: d, got: 0 }),
            (Some(c), _) => Err(FlowError::Shape { expected: 0, got: c.cols() }),
        }
    }

    /// Forward map and the diagonal of its Jacobian with respect to `z`.
    pub fn forward_with_diag(&self, z: &Tensor, cond: Option<&Tensor>) -> Result<(Tensor, Tensor), FlowError> {
        let y = self.block_input(z, cond)?;
        let w1m = self.w1.hadamard(&self.masks.m1);
        let w2m = self.w2.hadamard(&self.masks.m2);
        let act = y.matmul_t(&w1m).add_row(&self.b1).map(math::tanh);
        let out = z.add(&act.matmul_t(&w2m).add_row(&self.b2));
        let k = self.dim();
        // coupling[h, j] = W2m[j, h] * W1m[h, j]
        let coupling = Tensor::from_fn(w1m.rows(), k, |h, j| w2m.get(j, h) * w1m.get(h, j));
        let diag = act.map(|a| 1.0 - a * a).matmul(&coupling).map(|v| v + 1.0);
        Ok((out, diag))
    }

    pub fn forward(&self, z: &Tensor, cond: Option<&Tensor>) -> Result<Tensor, FlowError> {
        self.forward_with_diag(z, cond).map(|(out, _)| out)
    }

    pub fn diag_jacobian(&self, z: &Tensor, cond: Option<&Tensor>) -> Result<Tensor, FlowError> {
        self.forward_with_diag(z, cond).map(|(_, d)| d)
    }

    /// Registers this block's parameters on `tape`; `trainable = false`
    /// records them as constants.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> BlockVars {
        let leaf = |tape: &mut Tape, t: &Tensor| if trainable { tape.param(t.clone()) } else { tape.constant(t.clone()) };
        BlockVars {
            w1: leaf(tape, &self.w1),
            b1: leaf(tape, &self.b1),
            w2: leaf(tape, &self.w2),
            b2: leaf(tape, &self.b2),
            m1: tape.constant(self.masks.m1.clone()),
            m2: tape.constant(self.masks.m2.clone()),
        }
    }

    /// Differentiable forward pass: returns the block output and the
    /// per-row log-determinant (`rows x 1`).
    pub fn forward_tape(&self, tape: &mut Tape, v: &BlockVars, z: Var, cond: Option<Var>) -> Result<(Var, Var), DiffError> {
        let y = match cond {
            Some(c) => tape.concat_cols(z, c)?,
            None => z,
        };
        let w1m = tape.mul(v.w1, v.m1)?;
        let w2m = tape.mul(v.w2, v.m2)?;
        let pre = tape.matmul_t(y, w1m)?;
        let pre = tape.add_row(pre, v.b1)?;
        let act = tape.tanh(pre)?;
        let g = tape.matmul_t(act, w2m)?;
        let g = tape.add_row(g, v.b2)?;
        let out = tape.add(z, g)?;

        let w1z = tape.slice_cols(w1m, 0, self.dim())?;
        let w2t = tape.transpose(w2m)?;
        let coupling = tape.mul(w1z, w2t)?;
        let sq = tape.mul(act, act)?;
        let neg = tape.neg(sq)?;
        let deriv = tape.add_scalar(neg, 1.0)?;
        let diag = tape.matmul(deriv, coupling)?;
        let diag = tape.add_scalar(diag, 1.0)?;
        let logs = tape.log(diag)?;
        let logdet = tape.row_sum(logs)?;
        Ok((out, logdet))
    }

    /// Solves `forward(z, cond) = y` row by row.
    ///
    /// Newton-like updates `z ← z − (f(z) − y) / diag J(z)` start from
    /// `z = y`; a row whose residual fails to decrease for five consecutive
    /// steps switches to the contraction `z ← y − g(z)`.
    pub fn invert(&self, y: &Tensor, cond: Option<&Tensor>, tol: f64, max_iter: usize) -> Result<Inversion, FlowError> {
        if y.cols() != self.dim() {
            return Err(FlowError::Shape { expected: self.dim(), got: y.cols() });
        }
        let mut out = Tensor::zeros(y.rows(), y.cols());
        let mut iterations = 0;
        let mut max_residual: f64 = 0.0;
        for r in 0..y.rows() {
            let target = Tensor::row(y.row_slice(r));
            let c = cond.map(|c| Tensor::row(c.row_slice(r)));
            let (z, its, residual) = self.invert_row(&target, c.as_ref(), tol, max_iter)?;
            out.row_slice_mut(r).copy_from_slice(z.data());
            iterations = iterations.max(its);
            max_residual = max_residual.max(residual);
        }
        Ok(Inversion { z: out, iterations, residual: max_residual })
    }

    fn invert_row(&self, y: &Tensor, cond: Option<&Tensor>, tol: f64, max_iter: usize) -> Result<(Tensor, usize, f64), FlowError> {
        if max_iter == 0 {
            let residual = self.forward(y, cond)?.sub(y).max_abs();
            return Err(FlowError::NoConvergence { block: None, residual, iterations: 0 });
        }
        let mut z = y.clone();
        let mut previous = f64::INFINITY;
        let mut stalled = 0;
        let mut contraction = false;
        for it in 1..=max_iter {
            let (fz, diag) = self.forward_with_diag(&z, cond)?;
            let r = fz.sub(y);
            let residual = r.max_abs();
            if !residual.is_finite() {
                return Err(FlowError::NonFinite { block: None });
            }
            if residual <= tol {
                return Ok((z, it, residual));
            }
            if residual < previous {
                stalled = 0;
            } else {
                stalled += 1;
                if stalled >= 5 {
                    contraction = true;
                }
            }
            previous = residual;
            z = if contraction { z.sub(&r) } else { z.zip_map(&r.zip_map(&diag, |a, d| a / d), |a, b| a - b) };
        }
        let residual = self.forward(&z, cond)?.sub(y).max_abs();
        if residual <= tol {
            Ok((z, max_iter, residual))
        } else {
            Err(FlowError::NoConvergence { block: None, residual, iterations: max_iter })
        }
    }
}

/// Result of a successful inversion.
#[derive(Debug, Clone, PartialEq)]
pub struct Inversion {
    pub z: Tensor,
    /// Largest per-row iteration count.
    pub iterations: usize,
    /// Largest per-row residual `‖f(z) − y‖∞`.
    pub residual: f64,
}
