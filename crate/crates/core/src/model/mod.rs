//! SIReN-VAE and the vanilla VAE baseline, with their ELBO, importance
//! weighted and reconstruction estimators.

mod net;
mod siren;
mod vanilla;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

pub use net::{likelihood_logp, standard_normal_logp, GaussianNet, NetVars, LOG_SIGMA_BOUND};
pub use siren::{SirenVae, SirenVars};
pub use vanilla::{gaussian_kl, VanillaVae, VanillaVars};

use crate::diff::{DiffError, Tape, Tensor, Var};
use crate::flow::{FlowError, ResidualBlock, DEFAULT_BLOCKS, DEFAULT_LIP, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::graph::{BayesNet, GraphError, Structure};
use crate::masking::MaskError;
use crate::math;
use crate::rng::normal_tensor;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error("{what} has width {got}, expected {expected}")]
    Shape { what: &'static str, expected: usize, got: usize },
    #[error("sample count must be at least 1")]
    NoSamples,
}

/// Model family: the vanilla baseline or SIReN-VAE on one structure variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    Vanilla,
    Siren(Structure),
}

impl Variant {
    pub const ALL: [Variant; 4] =
        [Variant::Vanilla, Variant::Siren(Structure::Independent), Variant::Siren(Structure::FullyConnected), Variant::Siren(Structure::True)];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Vanilla => "vanilla",
            Variant::Siren(s) => s.as_str(),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "vanilla" {
            Ok(Variant::Vanilla)
        } else {
            s.parse().map(Variant::Siren)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub blocks: usize,
    pub hidden_multiplier: usize,
    pub lip: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { blocks: DEFAULT_BLOCKS, hidden_multiplier: 4, lip: DEFAULT_LIP }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Siren(SirenVae),
    Vanilla(VanillaVae),
}

#[derive(Debug, Clone)]
pub enum ModelVars {
    Siren(SirenVars),
    Vanilla(VanillaVars),
}

impl ModelVars {
    /// Parameter handles in [`Model::params`] order.
    pub fn params(&self) -> Vec<Var> {
        match self {
            ModelVars::Siren(v) => {
                let mut out = Vec::new();
                for b in v.encoder.iter().chain(&v.prior) {
                    out.extend([b.w1, b.b1, b.w2, b.b2]);
                }
                out.extend(v.decoder.params());
                out
            }
            ModelVars::Vanilla(v) => v.encoder.params().into_iter().chain(v.decoder.params()).collect(),
        }
    }
}

impl Model {
    pub fn new<R: Rng + ?Sized>(variant: Variant, g: &BayesNet, cfg: &ModelConfig, rng: &mut R) -> Result<Self, ModelError> {
        match variant {
            Variant::Siren(s) => Ok(Model::Siren(SirenVae::new(g, s, cfg, rng)?)),
            Variant::Vanilla => {
                if g.latent_count() == 0 {
                    return Err(MaskError::NoLatents.into());
                }
                if g.observed_count() == 0 {
                    return Err(MaskError::NoObserved.into());
                }
                Ok(Model::Vanilla(VanillaVae::new(g.latent_count(), g.observed_count(), cfg, rng)))
            }
        }
    }

    pub fn variant(&self) -> Variant {
        match self {
            Model::Siren(m) => Variant::Siren(m.structure),
            Model::Vanilla(_) => Variant::Vanilla,
        }
    }

    pub fn latent_dim(&self) -> usize {
        match self {
            Model::Siren(m) => m.latent_dim(),
            Model::Vanilla(m) => m.latent_dim(),
        }
    }

    pub fn data_dim(&self) -> usize {
        match self {
            Model::Siren(m) => m.data_dim(),
            Model::Vanilla(m) => m.data_dim(),
        }
    }

    pub fn param_names(&self) -> Vec<String> {
        match self {
            Model::Siren(m) => m.param_names(),
            Model::Vanilla(m) => m.param_names(),
        }
    }

    pub fn params(&self) -> Vec<&Tensor> {
        match self {
            Model::Siren(m) => m.params(),
            Model::Vanilla(m) => m.params(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Model::Siren(m) => m.params_mut(),
            Model::Vanilla(m) => m.params_mut(),
        }
    }

    /// Residual blocks of every flow (encoder first), empty for the baseline.
    pub fn blocks(&self) -> Vec<&ResidualBlock> {
        match self {
            Model::Siren(m) => m.encoder.blocks().iter().chain(m.prior.blocks()).collect(),
            Model::Vanilla(_) => Vec::new(),
        }
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut ResidualBlock> {
        match self {
            Model::Siren(m) => {
                let SirenVae { encoder, prior, .. } = m;
                encoder.blocks_mut().iter_mut().chain(prior.blocks_mut().iter_mut()).collect()
            }
            Model::Vanilla(_) => Vec::new(),
        }
    }

    /// Re-projects every flow weight onto the spectral bound.
    pub fn normalize(&mut self) {
        if let Model::Siren(m) = self {
            m.normalize();
        }
    }

    pub fn encode(&self, x: &Tensor, eps: &Tensor) -> Result<(Tensor, Vec<f64>), ModelError> {
        match self {
            Model::Siren(m) => m.encode(x, eps),
            Model::Vanilla(m) => m.encode(x, eps),
        }
    }

    pub fn decode_params(&self, z: &Tensor) -> Result<(Tensor, Tensor), ModelError> {
        match self {
            Model::Siren(m) => m.decode_params(z),
            Model::Vanilla(m) => {
                if z.cols() != m.latent_dim() {
                    return Err(ModelError::Shape { what: "z", expected: m.latent_dim(), got: z.cols() });
                }
                Ok(m.decoder.forward(z))
            }
        }
    }

    /// Per-row importance log weights for the base draws `eps`.
    pub fn log_weights(&self, x: &Tensor, eps: &Tensor) -> Result<Vec<f64>, ModelError> {
        match self {
            Model::Siren(m) => m.log_weights(x, eps),
            Model::Vanilla(m) => m.log_weights(x, eps),
        }
    }

    /// Per-row single-sample ELBO (closed-form KL for the baseline).
    pub fn elbo_terms(&self, x: &Tensor, eps: &Tensor) -> Result<Vec<f64>, ModelError> {
        match self {
            Model::Siren(m) => m.log_weights(x, eps),
            Model::Vanilla(m) => m.elbo_terms(x, eps),
        }
    }

    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> ModelVars {
        match self {
            Model::Siren(m) => ModelVars::Siren(m.bind(tape, trainable)),
            Model::Vanilla(m) => ModelVars::Vanilla(m.bind(tape, trainable)),
        }
    }

    /// Differentiable single-sample ELBO per row (`rows x 1`).
    pub fn elbo_tape(&self, tape: &mut Tape, vars: &ModelVars, x: Var, eps: Var) -> Result<Var, DiffError> {
        match (self, vars) {
            (Model::Siren(m), ModelVars::Siren(v)) => m.log_weights_tape(tape, v, x, eps),
            (Model::Vanilla(m), ModelVars::Vanilla(v)) => m.elbo_tape(tape, v, x, eps),
            _ => Err(DiffError::ForeignVar),
        }
    }

    /// Mean negative ELBO over the rows of `x`, as a `1 x 1` tape value.
    pub fn loss_tape(&self, tape: &mut Tape, vars: &ModelVars, x: &Tensor, eps: &Tensor) -> Result<Var, DiffError> {
        let xv = tape.constant(x.clone());
        let ev = tape.constant(eps.clone());
        let e = self.elbo_tape(tape, vars, xv, ev)?;
        let m = tape.mean(e)?;
        tape.neg(m)
    }

    /// Latent draws from the prior; SIReN inverts its prior flow.
    pub fn sample_latent<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Tensor, ModelError> {
        let eps = normal_tensor(rng, n, self.latent_dim());
        match self {
            Model::Siren(m) => m.sample_latent(&eps, DEFAULT_TOL, DEFAULT_MAX_ITER),
            Model::Vanilla(_) => Ok(eps),
        }
    }
}

/// Monte-Carlo ELBO per row, averaged over `n_mc` fresh base draws.
pub fn elbo<R: Rng + ?Sized>(model: &Model, x: &Tensor, n_mc: usize, rng: &mut R) -> Result<Vec<f64>, ModelError> {
    if n_mc == 0 {
        return Err(ModelError::NoSamples);
    }
    let mut acc = alloc::vec![0.0; x.rows()];
    for _ in 0..n_mc {
        let eps = normal_tensor(rng, x.rows(), model.latent_dim());
        for (a, v) in acc.iter_mut().zip(model.elbo_terms(x, &eps)?) {
            *a += v;
        }
    }
    Ok(acc.into_iter().map(|a| a / n_mc as f64).collect())
}

/// Importance-weighted estimate of `log p(x)` per row with `s` samples.
pub fn iwae_logp<R: Rng + ?Sized>(model: &Model, x: &Tensor, s: usize, rng: &mut R) -> Result<Vec<f64>, ModelError> {
    if s == 0 {
        return Err(ModelError::NoSamples);
    }
    (0..x.rows())
        .map(|r| {
            let xs = Tensor::repeat_row(x.row_slice(r), s);
            let eps = normal_tensor(rng, s, model.latent_dim());
            Ok(math::log_mean_exp(&model.log_weights(&xs, &eps)?))
        })
        .collect()
}

/// `−E_q[log p(x | z)]` per row, estimated with `s` posterior draws.
pub fn reconstruction_error<R: Rng + ?Sized>(model: &Model, x: &Tensor, s: usize, rng: &mut R) -> Result<Vec<f64>, ModelError> {
    if s == 0 {
        return Err(ModelError::NoSamples);
    }
    (0..x.rows())
        .map(|r| {
            let xs = Tensor::repeat_row(x.row_slice(r), s);
            let eps = normal_tensor(rng, s, model.latent_dim());
            let (z, _) = model.encode(&xs, &eps)?;
            let (mu, ls) = model.decode_params(&z)?;
            Ok(-math::mean(&likelihood_logp(&xs, &mu, &ls)))
        })
        .collect()
}

/// `n` draws from the generative model.
pub fn sample<R: Rng + ?Sized>(model: &Model, n: usize, rng: &mut R) -> Result<Tensor, ModelError> {
    let z = model.sample_latent(n, rng)?;
    let (mu, ls) = model.decode_params(&z)?;
    let noise = normal_tensor(rng, n, model.data_dim());
    Ok(mu.add(&ls.map(math::exp).hadamard(&noise)))
}
