use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use super::net::{likelihood_logp, likelihood_tape, standard_normal_logp, standard_normal_tape, GaussianNet, NetVars, NET_PARAM_NAMES};
use super::{ModelConfig, ModelError};
use crate::diff::{DiffError, Tape, Tensor, Var};
use crate::flow::{BlockVars, Direction, Grf};
use crate::graph::{faithful_inverse, make_structure, BayesNet, InverseGraph, Structure};
use crate::masking::{decoder_flow_masks, decoder_nn_masks, encoder_flow_masks};

/// Encoder flow `q(z | x)`, prior flow `p(z)`, masked decoder `p(x | z)` and
/// a standard-normal base distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct SirenVae {
    pub structure: Structure,
    /// The structure variant of the source network; masks derive from it.
    pub graph: BayesNet,
    pub inverse: InverseGraph,
    pub encoder: Grf,
    pub prior: Grf,
    pub decoder: GaussianNet,
}

#[derive(Debug, Clone)]
pub struct SirenVars {
    pub encoder: Vec<BlockVars>,
    pub prior: Vec<BlockVars>,
    pub decoder: NetVars,
}

impl SirenVae {
    /// Randomly initialized model for `structure` applied to `g`.
    pub fn new<R: Rng + ?Sized>(g: &BayesNet, structure: Structure, cfg: &ModelConfig, rng: &mut R) -> Result<Self, ModelError> {
        let graph = make_structure(structure, g);
        let inverse = faithful_inverse(&graph)?;
        let d = graph.observed_count();
        let enc_masks = encoder_flow_masks(&inverse, cfg.hidden_multiplier)?;
        let prior_masks = decoder_flow_masks(&graph, cfg.hidden_multiplier)?;
        let dec_masks = decoder_nn_masks(&graph, cfg.hidden_multiplier)?;
        let encoder = Grf::random(&enc_masks, d, cfg.blocks, cfg.lip, Direction::Generative, rng)?;
        let prior = Grf::random(&prior_masks, 0, cfg.blocks, cfg.lip, Direction::Normalizing, rng)?;
        let decoder = GaussianNet::random(dec_masks, rng);
        Ok(Self { structure, graph, inverse, encoder, prior, decoder })
    }

    /// Identity flows and an all-zero decoder (`μ = 0`, `σ = 1`).
    pub fn identity(g: &BayesNet, structure: Structure, cfg: &ModelConfig) -> Result<Self, ModelError> {
        let graph = make_structure(structure, g);
        let inverse = faithful_inverse(&graph)?;
        let d = graph.observed_count();
        let encoder = Grf::identity(&encoder_flow_masks(&inverse, cfg.hidden_multiplier)?, d, cfg.blocks, cfg.lip, Direction::Generative)?;
        let prior = Grf::identity(&decoder_flow_masks(&graph, cfg.hidden_multiplier)?, 0, cfg.blocks, cfg.lip, Direction::Normalizing)?;
        let decoder = GaussianNet::zeros(decoder_nn_masks(&graph, cfg.hidden_multiplier)?);
        Ok(Self { structure, graph, inverse, encoder, prior, decoder })
    }

    pub fn latent_dim(&self) -> usize {
        self.prior.dim()
    }

    pub fn data_dim(&self) -> usize {
        self.decoder.output_dim()
    }

    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for (flow, prefix) in [(&self.encoder, "encoder"), (&self.prior, "prior")] {
            for t in 0..flow.blocks().len() {
                for p in ["w1", "b1", "w2", "b2"] {
                    names.push(format!("{prefix}.{t}.{p}"));
                }
            }
        }
        names.extend(NET_PARAM_NAMES.iter().map(|p| format!("decoder.{p}")));
        names
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut out: Vec<&Tensor> = Vec::new();
        for b in self.encoder.blocks().iter().chain(self.prior.blocks()) {
            out.extend(b.params());
        }
        out.extend(self.decoder.params());
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = Vec::new();
        for b in self.encoder.blocks_mut().iter_mut() {
            out.extend(b.params_mut());
        }
        for b in self.prior.blocks_mut().iter_mut() {
            out.extend(b.params_mut());
        }
        out.extend(self.decoder.params_mut());
        out
    }

    fn check_x(&self, x: &Tensor) -> Result<(), ModelError> {
        if x.cols() != self.data_dim() {
            return Err(ModelError::Shape { what: "x", expected: self.data_dim(), got: x.cols() });
        }
        Ok(())
    }

    fn check_z(&self, z: &Tensor) -> Result<(), ModelError> {
        if z.cols() != self.latent_dim() {
            return Err(ModelError::Shape { what: "z", expected: self.latent_dim(), got: z.cols() });
        }
        Ok(())
    }

    /// `z = encoder(ε; x)` and `log q(z | x) = log p₀(ε) − log|det J|` per row.
    pub fn encode(&self, x: &Tensor, eps: &Tensor) -> Result<(Tensor, Vec<f64>), ModelError> {
        self.check_x(x)?;
        self.check_z(eps)?;
        let (z, logdet) = self.encoder.forward_logdet(eps, Some(x))?;
        let log_q = standard_normal_logp(eps).iter().zip(&logdet).map(|(a, b)| a - b).collect();
        Ok((z, log_q))
    }

    /// `log p₀(prior(z)) + log|det J|` per row.
    pub fn prior_logp(&self, z: &Tensor) -> Result<Vec<f64>, ModelError> {
        self.check_z(z)?;
        let (u, logdet) = self.prior.forward_logdet(z, None)?;
        Ok(standard_normal_logp(&u).iter().zip(&logdet).map(|(a, b)| a + b).collect())
    }

    pub fn decode_params(&self, z: &Tensor) -> Result<(Tensor, Tensor), ModelError> {
        self.check_z(z)?;
        Ok(self.decoder.forward(z))
    }

    /// Per-row `log p(x | z) + log p(z) − log q(z | x)` with `z = encoder(ε; x)`.
    pub fn log_weights(&self, x: &Tensor, eps: &Tensor) -> Result<Vec<f64>, ModelError> {
        let (z, log_q) = self.encode(x, eps)?;
        let log_p = self.prior_logp(&z)?;
        let (mu, ls) = self.decoder.forward(&z);
        let lik = likelihood_logp(x, &mu, &ls);
        Ok((0..x.rows()).map(|r| lik[r] + log_p[r] - log_q[r]).collect())
    }

    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> SirenVars {
        SirenVars {
            encoder: self.encoder.bind(tape, trainable),
            prior: self.prior.bind(tape, trainable),
            decoder: self.decoder.bind(tape, trainable),
        }
    }

    /// Differentiable per-row log weights (`rows x 1`).
    pub fn log_weights_tape(&self, tape: &mut Tape, v: &SirenVars, x: Var, eps: Var) -> Result<Var, DiffError> {
        let (z, enc_ld) = self.encoder.forward_tape(tape, &v.encoder, eps, Some(x))?;
        let base_eps = standard_normal_tape(tape, eps)?;
        let log_q = tape.sub(base_eps, enc_ld)?;
        let (u, prior_ld) = self.prior.forward_tape(tape, &v.prior, z, None)?;
        let base_u = standard_normal_tape(tape, u)?;
        let log_p = tape.add(base_u, prior_ld)?;
        let (mu, ls) = self.decoder.forward_tape(tape, &v.decoder, z)?;
        let lik = likelihood_tape(tape, x, mu, ls)?;
        let joint = tape.add(lik, log_p)?;
        tape.sub(joint, log_q)
    }

    /// Latent samples `z = prior⁻¹(ε)`.
    pub fn sample_latent(&self, eps: &Tensor, tol: f64, max_iter: usize) -> Result<Tensor, ModelError> {
        self.check_z(eps)?;
        Ok(self.prior.invert(eps, None, tol, max_iter)?)
    }

    pub fn normalize(&mut self) {
        self.encoder.normalize();
        self.prior.normalize();
    }
}
