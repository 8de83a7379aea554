use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use super::net::{likelihood_logp, likelihood_tape, standard_normal_logp, standard_normal_tape, GaussianNet, NetVars, NET_PARAM_NAMES};
use super::{ModelConfig, ModelError};
use crate::diff::{DiffError, Tape, Tensor, Var};
use crate::masking::MaskSet;
use crate::math;

/// Gaussian VAE with a fully factorized `N(0, I)` prior and a diagonal
/// Gaussian posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct VanillaVae {
    pub encoder: GaussianNet,
    pub decoder: GaussianNet,
}

#[derive(Debug, Clone, Copy)]
pub struct VanillaVars {
    pub encoder: NetVars,
    pub decoder: NetVars,
}

/// `KL(N(μ, σ²) ‖ N(0, 1))` summed over each row.
pub fn gaussian_kl(mu: &Tensor, log_sigma: &Tensor) -> Vec<f64> {
    (0..mu.rows())
        .map(|r| {
            mu.row_slice(r)
                .iter()
                .zip(log_sigma.row_slice(r))
                .map(|(&m, &s)| 0.5 * (m * m + math::exp(2.0 * s) - 1.0) - s)
                .sum()
        })
        .collect()
}

impl VanillaVae {
    pub fn new<R: Rng + ?Sized>(latent_dim: usize, data_dim: usize, cfg: &ModelConfig, rng: &mut R) -> Self {
        let encoder = GaussianNet::random(MaskSet::dense(data_dim, latent_dim, cfg.hidden_multiplier), rng);
        let decoder = GaussianNet::random(MaskSet::dense(latent_dim, data_dim, cfg.hidden_multiplier), rng);
        Self { encoder, decoder }
    }

    pub fn zeros(latent_dim: usize, data_dim: usize, cfg: &ModelConfig) -> Self {
        Self {
            encoder: GaussianNet::zeros(MaskSet::dense(data_dim, latent_dim, cfg.hidden_multiplier)),
            decoder: GaussianNet::zeros(MaskSet::dense(latent_dim, data_dim, cfg.hidden_multiplier)),
        }
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn data_dim(&self) -> usize {
        self.decoder.output_dim()
    }

    pub fn param_names(&self) -> Vec<String> {
        ["encoder", "decoder"].iter().flat_map(|n| NET_PARAM_NAMES.iter().map(move |p| format!("{n}.{p}"))).collect()
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.encoder.params().into_iter().chain(self.decoder.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.encoder.params_mut().into_iter().chain(self.decoder.params_mut()).collect()
    }

    fn check(&self, x: &Tensor, eps: &Tensor) -> Result<(), ModelError> {
        if x.cols() != self.data_dim() {
            return Err(ModelError::Shape { what: "x", expected: self.data_dim(), got: x.cols() });
        }
        if eps.cols() != self.latent_dim() {
            return Err(ModelError::Shape { what: "z", expected: self.latent_dim(), got: eps.cols() });
        }
        Ok(())
    }

    /// Posterior parameters `(μ_z, log σ_z)`.
    pub fn posterior(&self, x: &Tensor) -> (Tensor, Tensor) {
        self.encoder.forward(x)
    }

    /// Reparameterized `z = μ + σ ε` and `log q(z | x)` per row.
    pub fn encode(&self, x: &Tensor, eps: &Tensor) -> Result<(Tensor, Vec<f64>), ModelError> {
        self.check(x, eps)?;
        let (mu, ls) = self.encoder.forward(x);
        let z = mu.add(&ls.map(math::exp).hadamard(eps));
        let log_q = standard_normal_logp(eps).iter().zip(0..x.rows()).map(|(b, r)| b - ls.row_slice(r).iter().sum::<f64>()).collect();
        Ok((z, log_q))
    }

    pub fn log_weights(&self, x: &Tensor, eps: &Tensor) -> Result<Vec<f64>, ModelError> {
        let (z, log_q) = self.encode(x, eps)?;
        let log_p = standard_normal_logp(&z);
        let (mu, ls) = self.decoder.forward(&z);
        let lik = likelihood_logp(x, &mu, &ls);
        Ok((0..x.rows()).map(|r| lik[r] + log_p[r] - log_q[r]).collect())
    }

    /// Single-sample ELBO per row with the KL term in closed form.
    pub fn elbo_terms(&self, x: &Tensor, eps: &Tensor) -> Result<Vec<f64>, ModelError> {
        let (z, _) = self.encode(x, eps)?;
        let (mz, lz) = self.encoder.forward(x);
        let kl = gaussian_kl(&mz, &lz);
        let (mu, ls) = self.decoder.forward(&z);
        let lik = likelihood_logp(x, &mu, &ls);
        Ok(lik.iter().zip(&kl).map(|(a, b)| a - b).collect())
    }

    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> VanillaVars {
        VanillaVars { encoder: self.encoder.bind(tape, trainable), decoder: self.decoder.bind(tape, trainable) }
    }

    /// Differentiable closed-form-KL ELBO per row (`rows x 1`).
    pub fn elbo_tape(&self, tape: &mut Tape, v: &VanillaVars, x: Var, eps: Var) -> Result<Var, DiffError> {
        let (mz, lz) = self.encoder.forward_tape(tape, &v.encoder, x)?;
        let sz = tape.exp(lz)?;
        let noise = tape.mul(sz, eps)?;
        let z = tape.add(mz, noise)?;
        let m2 = tape.mul(mz, mz)?;
        let s2 = tape.mul(sz, sz)?;
        let kl = tape.add(m2, s2)?;
        let kl = tape.add_scalar(kl, -1.0)?;
        let kl = tape.scale(kl, 0.5)?;
        let kl = tape.sub(kl, lz)?;
        let kl = tape.row_sum(kl)?;
        let (mu, ls) = self.decoder.forward_tape(tape, &v.decoder, z)?;
        let lik = likelihood_tape(tape, x, mu, ls)?;
        tape.sub(lik, kl)
    }

    /// Differentiable log weights (`rows x 1`).
    pub fn log_weights_tape(&self, tape: &mut Tape, v: &VanillaVars, x: Var, eps: Var) -> Result<Var, DiffError> {
        let (mz, lz) = self.encoder.forward_tape(tape, &v.encoder, x)?;
        let sz = tape.exp(lz)?;
        let noise = tape.mul(sz, eps)?;
        let z = tape.add(mz, noise)?;
        let base = standard_normal_tape(tape, eps)?;
        let lsum = tape.row_sum(lz)?;
        let log_q = tape.sub(base, lsum)?;
        let log_p = standard_normal_tape(tape, z)?;
        let (mu, ls) = self.decoder.forward_tape(tape, &v.decoder, z)?;
        let lik = likelihood_tape(tape, x, mu, ls)?;
        let joint = tape.add(lik, log_p)?;
        tape.sub(joint, log_q)
    }
}
