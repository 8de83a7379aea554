use rand::Rng;

use crate::diff::{DiffError, Tape, Tensor, Var};
use crate::masking::MaskSet;
use crate::math;

/// Bound applied to every predicted log standard deviation.
pub const LOG_SIGMA_BOUND: f64 = 7.0;

/// One masked tanh hidden layer followed by two masked linear heads that
/// share the output mask: `μ` and `log σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNet {
    pub w_h: Tensor,
    pub b_h: Tensor,
    pub w_mu: Tensor,
    pub b_mu: Tensor,
    pub w_ls: Tensor,
    pub b_ls: Tensor,
    masks: MaskSet,
}

#[derive(Debug, Clone, Copy)]
pub struct NetVars {
    pub w_h: Var,
    pub b_h: Var,
    pub w_mu: Var,
    pub b_mu: Var,
    pub w_ls: Var,
    pub b_ls: Var,
    m1: Var,
    m2: Var,
}

impl NetVars {
    pub fn params(&self) -> [Var; 6] {
        [self.w_h, self.b_h, self.w_mu, self.b_mu, self.w_ls, self.b_ls]
    }
}

pub const NET_PARAM_NAMES: [&str; 6] = ["w_h", "b_h", "w_mu", "b_mu", "w_ls", "b_ls"];

impl GaussianNet {
    pub fn zeros(masks: MaskSet) -> Self {
        let (h, i, o) = (masks.hidden_dim(), masks.input_dim(), masks.output_dim());
        Self {
            w_h: Tensor::zeros(h, i),
            b_h: Tensor::zeros(1, h),
            w_mu: Tensor::zeros(o, h),
            b_mu: Tensor::zeros(1, o),
            w_ls: Tensor::zeros(o, h),
            b_ls: Tensor::zeros(1, o),
            masks,
        }
    }

    /// Fan-in scaled normal weights; the log-scale head starts small.
    pub fn random<R: Rng + ?Sized>(masks: MaskSet, rng: &mut R) -> Self {
        let mut net = Self::zeros(masks);
        let s1 = 1.0 / math::sqrt(net.w_h.cols() as f64);
        let s2 = 1.0 / math::sqrt(net.w_mu.cols() as f64);
        net.w_h = crate::rng::normal_tensor(rng, net.w_h.rows(), net.w_h.cols()).scale(s1).hadamard(&net.masks.m1);
        net.w_mu = crate::rng::normal_tensor(rng, net.w_mu.rows(), net.w_mu.cols()).scale(s2).hadamard(&net.masks.m2);
        net.w_ls = crate::rng::normal_tensor(rng, net.w_ls.rows(), net.w_ls.cols()).scale(0.1 * s2).hadamard(&net.masks.m2);
        net
    }

    pub fn masks(&self) -> &MaskSet {
        &self.masks
    }

    pub fn input_dim(&self) -> usize {
        self.masks.input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.masks.output_dim()
    }

    pub fn params(&self) -> [&Tensor; 6] {
        [&self.w_h, &self.b_h, &self.w_mu, &self.b_mu, &self.w_ls, &self.b_ls]
    }

    pub fn params_mut(&mut self) -> [&mut Tensor; 6] {
        [&mut self.w_h, &mut self.b_h, &mut self.w_mu, &mut self.b_mu, &mut self.w_ls, &mut self.b_ls]
    }

    /// `(μ, log σ)` for a batch of input rows; `log σ` is clamped.
    pub fn forward(&self, input: &Tensor) -> (Tensor, Tensor) {
        let act = input.matmul_t(&self.w_h.hadamard(&self.masks.m1)).add_row(&self.b_h).map(math::tanh);
        let mu = act.matmul_t(&self.w_mu.hadamard(&self.masks.m2)).add_row(&self.b_mu);
        let ls = act.matmul_t(&self.w_ls.hadamard(&self.masks.m2)).add_row(&self.b_ls);
        (mu, ls.map(|v| v.clamp(-LOG_SIGMA_BOUND, LOG_SIGMA_BOUND)))
    }

    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> NetVars {
        let leaf = |tape: &mut Tape, t: &Tensor| if trainable { tape.param(t.clone()) } else { tape.constant(t.clone()) };
        NetVars {
            w_h: leaf(tape, &self.w_h),
            b_h: leaf(tape, &self.b_h),
            w_mu: leaf(tape, &self.w_mu),
            b_mu: leaf(tape, &self.b_mu),
            w_ls: leaf(tape, &self.w_ls),
            b_ls: leaf(tape, &self.b_ls),
            m1: tape.constant(self.masks.m1.clone()),
            m2: tape.constant(self.masks.m2.clone()),
        }
    }

    pub fn forward_tape(&self, tape: &mut Tape, v: &NetVars, input: Var) -> Result<(Var, Var), DiffError> {
        let pre = tape.masked_matmul(v.w_h, v.m1, input)?;
        let pre = tape.add_row(pre, v.b_h)?;
        let act = tape.tanh(pre)?;
        let mu = tape.masked_matmul(v.w_mu, v.m2, act)?;
        let mu = tape.add_row(mu, v.b_mu)?;
        let ls = tape.masked_matmul(v.w_ls, v.m2, act)?;
        let ls = tape.add_row(ls, v.b_ls)?;
        let ls = tape.clamp(ls, -LOG_SIGMA_BOUND, LOG_SIGMA_BOUND)?;
        Ok((mu, ls))
    }
}

/// `Σ_i log N(x_i; μ_i, σ_i)` for each row.
pub fn likelihood_logp(x: &Tensor, mu: &Tensor, log_sigma: &Tensor) -> alloc::vec::Vec<f64> {
    assert_eq!(x.shape(), mu.shape(), "x and μ must have matching shapes");
    assert_eq!(x.shape(), log_sigma.shape(), "x and log σ must have matching shapes");
    (0..x.rows())
        .map(|r| {
            let (xr, mr, sr) = (x.row_slice(r), mu.row_slice(r), log_sigma.row_slice(r));
            (0..xr.len()).map(|i| math::gaussian_logpdf(xr[i], mr[i], sr[i])).sum()
        })
        .collect()
}

/// Row-wise standard-normal log-density.
pub fn standard_normal_logp(x: &Tensor) -> alloc::vec::Vec<f64> {
    (0..x.rows()).map(|r| x.row_slice(r).iter().map(|&v| math::gaussian_logpdf(v, 0.0, 0.0)).sum()).collect()
}

/// Row sums of `log N(x; μ, σ)` on the tape (`rows x 1`).
pub fn likelihood_tape(tape: &mut Tape, x: Var, mu: Var, log_sigma: Var) -> Result<Var, DiffError> {
    let lp = tape.gaussian_logpdf(x, mu, log_sigma)?;
    tape.row_sum(lp)
}

/// Row sums of the standard-normal log-density on the tape.
pub fn standard_normal_tape(tape: &mut Tape, x: Var) -> Result<Var, DiffError> {
    let (r, c) = tape.value(x).shape();
    let zero = tape.constant(Tensor::zeros(r, c));
    likelihood_tape(tape, x, zero, zero)
}
