//! One cell of the structure-comparison experiment: fresh data, training
//! at each candidate learning rate, selection by final training loss and
//! held-out evaluation.

use alloc::vec::Vec;

use crate::data::{ancestral_sample, project_observed, split, DataError, Dataset};
use crate::graph::BayesNet;
use crate::math;
use crate::model::{elbo, iwae_logp, reconstruction_error, Model, ModelError, Variant};
use crate::rng::{derive_seed, init_rng, seeded};
use crate::train::{train_loop, TrainConfig, TrainError, DEFAULT_LRS};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonConfig {
    /// Training-set sizes as multiples of the node count.
    pub regimes: Vec<usize>,
    pub variants: Vec<Variant>,
    pub runs: usize,
    pub lrs: Vec<f64>,
    pub n_test: usize,
    pub iwae_samples: usize,
    pub re_samples: usize,
    pub elbo_samples: usize,
    pub seed: u64,
    /// Template; `initial_lr` and `seed` are set per candidate.
    pub train: TrainConfig,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        Self {
            regimes: alloc::vec![2, 100],
            variants: Variant::ALL.to_vec(),
            runs: 5,
            lrs: DEFAULT_LRS.to_vec(),
            n_test: 100,
            iwae_samples: 500,
            re_samples: 10,
            elbo_samples: 10,
            seed: 0,
            train: TrainConfig::default(),
        }
    }
}

/// Coordinates of one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct CellId {
    pub regime: usize,
    pub run: usize,
    pub variant: Variant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub id: CellId,
    pub n_train: usize,
    /// Best training loss per candidate rate; `inf` marks divergence.
    pub candidate_losses: Vec<f64>,
    pub selected_lr: f64,
    pub train_loss: f64,
    pub epochs: usize,
    /// Mean over test rows of the importance-weighted negative log-likelihood.
    pub nll: f64,
    pub re: f64,
    /// Mean negative ELBO over test rows.
    pub neg_elbo: f64,
}

impl ComparisonConfig {
    pub fn cells(&self) -> Vec<CellId> {
        let mut out = Vec::new();
        for &regime in &self.regimes {
            for run in 0..self.runs {
                for &variant in &self.variants {
                    out.push(CellId { regime, run, variant });
                }
            }
        }
        out
    }

    fn variant_index(v: Variant) -> u64 {
        Variant::ALL.iter().position(|&a| a == v).unwrap_or(0) as u64
    }

    /// Seed of the dataset shared by every variant in a run.
    pub fn data_seed(&self, regime: usize, run: usize) -> u64 {
        derive_seed(derive_seed(self.seed, regime as u64), run as u64)
    }

    fn candidate_seed(&self, id: CellId, lr_index: usize) -> u64 {
        let base = derive_seed(self.data_seed(id.regime, id.run), 1 + Self::variant_index(id.variant));
        derive_seed(base, 100 + lr_index as u64)
    }

    fn eval_seed(&self, id: CellId) -> u64 {
        derive_seed(derive_seed(self.data_seed(id.regime, id.run), 1 + Self::variant_index(id.variant)), 999)
    }

    /// Training and test rows for one `(regime, run)`.
    pub fn run_data(&self, g: &BayesNet, regime: usize, run: usize) -> Result<(Dataset, Dataset), ExperimentError> {
        let n_train = regime * g.len();
        let seed = self.data_seed(regime, run);
        let table = ancestral_sample(g, n_train + self.n_test, seed)?;
        let data = project_observed(&table, g, seed);
        Ok(split(&data, n_train, self.n_test, derive_seed(seed, 1))?)
    }
}

fn is_divergence(e: &TrainError) -> bool {
    matches!(e, TrainError::NonFiniteLoss { .. } | TrainError::NonFiniteGradient { .. } | TrainError::Diff(_))
}

/// Trains every candidate rate, keeps the lowest final training loss and
/// evaluates that model on the test rows.
pub fn run_cell(g: &BayesNet, cfg: &ComparisonConfig, id: CellId) -> Result<CellResult, ExperimentError> {
    let (train, test) = cfg.run_data(g, id.regime, id.run)?;
    let mut best: Option<(usize, f64, Model, usize)> = None;
    let mut losses = Vec::with_capacity(cfg.lrs.len());
    for (i, &lr) in cfg.lrs.iter().enumerate() {
        let seed = cfg.candidate_seed(id, i);
        let tc = TrainConfig { initial_lr: lr, seed, ..cfg.train };
        let mut model = Model::new(id.variant, g, &tc.model_config(), &mut init_rng(seed))?;
        match train_loop(&mut model, &train.rows, tc, |_| true) {
            Ok(out) => {
                losses.push(out.best_loss);
                if best.as_ref().map_or(true, |b| out.best_loss < b.1) {
                    best = Some((i, out.best_loss, model, out.history.len()));
                }
            }
            Err(e) if is_divergence(&e) => losses.push(f64::INFINITY),
            Err(e) => return Err(e.into()),
        }
    }
    let Some((lr_index, train_loss, model, epochs)) = best else {
        return Ok(CellResult {
            id,
            n_train: train.len(),
            candidate_losses: losses,
            selected_lr: f64::NAN,
            train_loss: f64::INFINITY,
            epochs: 0,
            nll: f64::INFINITY,
            re: f64::INFINITY,
            neg_elbo: f64::INFINITY,
        });
    };
    let mut rng = seeded(cfg.eval_seed(id));
    let nll = -math::mean(&iwae_logp(&model, &test.rows, cfg.iwae_samples, &mut rng)?);
    let re = math::mean(&reconstruction_error(&model, &test.rows, cfg.re_samples, &mut rng)?);
    let neg_elbo = -math::mean(&elbo(&model, &test.rows, cfg.elbo_samples, &mut rng)?);
    Ok(CellResult {
        id,
        n_train: train.len(),
        candidate_losses: losses,
        selected_lr: cfg.lrs[lr_index],
        train_loss,
        epochs,
        nll,
        re,
        neg_elbo,
    })
}

/// Mean and sample standard deviation across runs for one regime and variant.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub regime: usize,
    pub n_train: usize,
    pub variant: Variant,
    pub nll_mean: f64,
    pub nll_sd: f64,
    pub re_mean: f64,
    pub re_sd: f64,
    pub neg_elbo_mean: f64,
    pub neg_elbo_sd: f64,
}

/// Aggregates cells in `regimes x variants` order.
pub fn summarize(cfg: &ComparisonConfig, cells: &[CellResult]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for &regime in &cfg.regimes {
        for &variant in &cfg.variants {
            let group: Vec<&CellResult> = cells.iter().filter(|c| c.id.regime == regime && c.id.variant == variant).collect();
            if group.is_empty() {
                continue;
            }
            let stat = |f: fn(&CellResult) -> f64| {
                let v: Vec<f64> = group.iter().map(|c| f(c)).collect();
                (math::mean(&v), if v.len() > 1 { math::sample_sd(&v) } else { 0.0 })
            };
            let (nll_mean, nll_sd) = stat(|c| c.nll);
            let (re_mean, re_sd) = stat(|c| c.re);
            let (neg_elbo_mean, neg_elbo_sd) = stat(|c| c.neg_elbo);
            rows.push(SummaryRow { regime, n_train: group[0].n_train, variant, nll_mean, nll_sd, re_mean, re_sd, neg_elbo_mean, neg_elbo_sd });
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{LinearGaussianCpd, Structure};

    fn chain() -> BayesNet {
        BayesNet::builder("chain")
            .latent("z")
            .observed("x")
            .edge("z", "x")
            .cpd("z", LinearGaussianCpd::new(0.0, 1.0))
            .cpd("x", LinearGaussianCpd::new(0.0, 1.0).coef("z", 2.0))
            .build()
            .unwrap()
    }

    fn tiny() -> ComparisonConfig {
        ComparisonConfig {
            regimes: alloc::vec![4],
            variants: alloc::vec![Variant::Vanilla, Variant::Siren(Structure::True)],
            runs: 2,
            lrs: alloc::vec![1e-2],
            n_test: 5,
            iwae_samples: 8,
            re_samples: 2,
            elbo_samples: 2,
            seed: 3,
            train: TrainConfig { epochs: 3, blocks: 1, ..Default::default() },
        }
    }

    #[test]
    fn cells_and_summary_shape() {
        let cfg = tiny();
        let g = chain();
        let cells: Vec<CellResult> = cfg.cells().into_iter().map(|id| run_cell(&g, &cfg, id).unwrap()).collect();
        assert_eq!(cells.len(), 4);
        let summary = summarize(&cfg, &cells);
        assert_eq!(summary.len(), 2);
        assert!(summary.iter().all(|r| r.nll_mean.is_finite() && r.n_train == 8));
    }

    #[test]
    fn cells_are_deterministic() {
        let cfg = tiny();
        let id = cfg.cells()[1];
        assert_eq!(run_cell(&chain(), &cfg, id).unwrap(), run_cell(&chain(), &cfg, id).unwrap());
    }

    #[test]
    fn variants_share_run_data() {
        let cfg = tiny();
        let (a, _) = cfg.run_data(&chain(), 4, 1).unwrap();
        let (b, _) = cfg.run_data(&chain(), 4, 1).unwrap();
        let (c, _) = cfg.run_data(&chain(), 4, 0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.rows, c.rows);
    }
}
