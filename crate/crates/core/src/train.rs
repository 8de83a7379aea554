//! Adam, the plateau learning-rate schedule and a resumable training loop.

use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::diff::{DiffError, Tape, Tensor};
use crate::model::{Model, ModelConfig};
use crate::rng::{normal_tensor, seeded_stream};

/// Initial learning rates tried by the comparison experiment.
pub const DEFAULT_LRS: [f64; 3] = [1e-1, 1e-2, 1e-3];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("non-finite gradient for parameter {index}; step rejected")]
    NonFiniteGradient { index: usize },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("parameter {index} has shape {got:?}, expected {expected:?}")]
    Shape { index: usize, expected: (usize, usize), got: (usize, usize) },
    #[error("data width {got} does not match the model ({expected})")]
    DataWidth { expected: usize, got: usize },
    #[error("training data is empty")]
    EmptyData,
    #[error("invalid configuration: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Diff(#[from] DiffError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub initial_lr: f64,
    pub lr_patience: usize,
    pub lr_factor: f64,
    pub lr_floor: f64,
    pub epochs: usize,
    /// `None` means `min(64, n_train)`.
    pub batch_size: Option<usize>,
    pub seed: u64,
    pub blocks: usize,
    pub hidden_multiplier: usize,
    pub lip_coeff: f64,
    /// Epochs without improvement, once at the floor, before stopping.
    pub stop_patience: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            initial_lr: 1e-2,
            lr_patience: 10,
            lr_factor: 0.1,
            lr_floor: 1e-6,
            epochs: 2000,
            batch_size: None,
            seed: 0,
            blocks: 4,
            hidden_multiplier: 4,
            lip_coeff: 0.97,
            stop_patience: 50,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.initial_lr) || !pos(self.lr_floor) {
            return Err(TrainError::Config("learning rates must be positive"));
        }
        if !(self.lr_factor > 0.0 && self.lr_factor < 1.0) {
            return Err(TrainError::Config("lr_factor must lie in (0, 1)"));
        }
        if !(self.lip_coeff > 0.0 && self.lip_coeff < 1.0) {
            return Err(TrainError::Config("lip_coeff must lie in (0, 1)"));
        }
        if self.lr_patience == 0 || self.epochs == 0 || self.blocks == 0 || self.hidden_multiplier == 0 {
            return Err(TrainError::Config("counts must be positive"));
        }
        if self.batch_size == Some(0) {
            return Err(TrainError::Config("batch_size must be positive"));
        }
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig { blocks: self.blocks, hidden_multiplier: self.hidden_multiplier, lip: self.lip_coeff }
    }

    pub fn batch_for(&self, n: usize) -> usize {
        self.batch_size.unwrap_or(64).min(n).max(1)
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

impl Adam {
    pub fn new(shapes: &[(usize, usize)]) -> Self {
        let zeros: Vec<Tensor> = shapes.iter().map(|&(r, c)| Tensor::zeros(r, c)).collect();
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: zeros.clone(), v: zeros }
    }

    /// One update. Nothing changes if any gradient is non-finite.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor], lr: f64) -> Result<(), TrainError> {
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() || p.shape() != self.m[i].shape() {
                return Err(TrainError::Shape { index: i, expected: self.m[i].shape(), got: g.shape() });
            }
            if !g.is_finite() {
                return Err(TrainError::NonFiniteGradient { index: i });
            }
        }
        self.t += 1;
        let c1 = 1.0 - crate::math::powi(self.beta1, self.t as i32);
        let c2 = 1.0 - crate::math::powi(self.beta2, self.t as i32);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (self.m[i].data_mut(), self.v[i].data_mut());
            for (k, (w, &gk)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * gk;
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * gk * gk;
                let (mh, vh) = (m[k] / c1, v[k] / c2);
                *w -= lr * mh / (crate::math::sqrt(vh) + self.eps);
            }
        }
        Ok(())
    }
}

/// Multiplies the rate by `factor` after `patience` consecutive epochs
/// without a new best loss, never going below `floor`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    pub lr: f64,
    pub factor: f64,
    pub patience: usize,
    pub floor: f64,
    pub best: f64,
    pub bad_epochs: usize,
}

impl LrSchedule {
    pub fn new(lr: f64, factor: f64, patience: usize, floor: f64) -> Self {
        Self { lr: lr.max(floor), factor, patience, floor, best: f64::INFINITY, bad_epochs: 0 }
    }

    pub fn at_floor(&self) -> bool {
        self.lr <= self.floor
    }

    /// Records one epoch loss and returns the rate for the next epoch.
    pub fn observe(&mut self, loss: f64) -> f64 {
        if loss < self.best {
            self.best = loss;
            self.bad_epochs = 0;
        } else {
            self.bad_epochs += 1;
            if self.bad_epochs >= self.patience {
                let next = self.lr * self.factor;
                // snap values within rounding of the floor onto it
                self.lr = if next <= self.floor * (1.0 + 1e-9) { self.floor } else { next };
                self.bad_epochs = 0;
            }
        }
        self.lr
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean negative ELBO over the epoch's mini-batches.
    pub loss: f64,
    /// Rate used during the epoch.
    pub lr: f64,
    pub best_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Budget,
    Converged,
    Callback,
}

/// Complete optimizer state; saving and restoring it resumes training
/// exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Trainer {
    pub config: TrainConfig,
    pub adam: Adam,
    pub schedule: LrSchedule,
    /// Next epoch to run.
    pub epoch: usize,
    pub best_loss: f64,
    pub best_params: Vec<Tensor>,
    pub since_best: usize,
    pub history: Vec<EpochRecord>,
}

impl Trainer {
    pub fn new(model: &Model, config: TrainConfig) -> Result<Self, TrainError> {
        config.validate()?;
        let params: Vec<Tensor> = model.params().into_iter().cloned().collect();
        let shapes: Vec<(usize, usize)> = params.iter().map(Tensor::shape).collect();
        Ok(Self {
            config,
            adam: Adam::new(&shapes),
            schedule: LrSchedule::new(config.initial_lr, config.lr_factor, config.lr_patience, config.lr_floor),
            epoch: 0,
            best_loss: f64::INFINITY,
            best_params: params,
            since_best: 0,
            history: Vec::new(),
        })
    }

    pub fn finished(&self) -> Option<StopReason> {
        if self.epoch >= self.config.epochs {
            Some(StopReason::Budget)
        } else if self.schedule.at_floor() && self.since_best >= self.config.stop_patience {
            Some(StopReason::Converged)
        } else {
            None
        }
    }

    /// Runs one epoch of shuffled mini-batch Adam steps, re-normalizing the
    /// flows after every step.
    pub fn run_epoch(&mut self, model: &mut Model, data: &Tensor) -> Result<EpochRecord, TrainError> {
        let n = data.rows();
        if n == 0 {
            return Err(TrainError::EmptyData);
        }
        if data.cols() != model.data_dim() {
            return Err(TrainError::DataWidth { expected: model.data_dim(), got: data.cols() });
        }
        let epoch = self.epoch;
        let lr = self.schedule.lr;
        let mut rng = seeded_stream(self.config.seed, epoch as u64);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let batch = self.config.batch_for(n);
        let mut total = 0.0;
        for (b, idx) in order.chunks(batch).enumerate() {
            let x = data.select_rows(idx);
            let eps = normal_tensor(&mut rng, idx.len(), model.latent_dim());
            let non_finite = TrainError::NonFiniteLoss { epoch, batch: b };
            let mut tape = Tape::new();
            let vars = model.bind(&mut tape, true);
            let loss = match model.loss_tape(&mut tape, &vars, &x, &eps) {
                Ok(l) => l,
                Err(DiffError::NonFinite { .. }) => return Err(non_finite),
                Err(e) => return Err(e.into()),
            };
            let value = tape.value(loss).get(0, 0);
            if !value.is_finite() {
                return Err(non_finite);
            }
            let grads = tape.backward(loss)?;
            let g: Vec<Tensor> = vars.params().iter().map(|&v| grads.wrt(&tape, v)).collect();
            self.adam.step(&mut model.params_mut(), &g, lr)?;
            model.normalize();
            total += value * idx.len() as f64;
        }
        let loss = total / n as f64;
        if loss < self.best_loss {
            self.best_loss = loss;
            self.best_params = model.params().into_iter().cloned().collect();
            self.since_best = 0;
        } else {
            self.since_best += 1;
        }
        self.schedule.observe(loss);
        self.epoch += 1;
        let record = EpochRecord { epoch, loss, lr, best_loss: self.best_loss };
        self.history.push(record);
        Ok(record)
    }

    /// Runs epochs until the budget, convergence, or the callback returns
    /// `false`.
    pub fn run<F: FnMut(&EpochRecord) -> bool>(&mut self, model: &mut Model, data: &Tensor, mut callback: F) -> Result<StopReason, TrainError> {
        loop {
            if let Some(reason) = self.finished() {
                return Ok(reason);
            }
            let record = self.run_epoch(model, data)?;
            if !callback(&record) {
                return Ok(StopReason::Callback);
            }
        }
    }

    /// Copies the best parameters seen so far into `model`.
    pub fn restore_best(&self, model: &mut Model) {
        for (p, best) in model.params_mut().into_iter().zip(&self.best_params) {
            p.clone_from(best);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub history: Vec<EpochRecord>,
    pub best_loss: f64,
    pub stop: StopReason,
}

/// Trains `model` to completion and leaves it holding its best parameters.
pub fn train_loop<F: FnMut(&EpochRecord) -> bool>(model: &mut Model, data: &Tensor, config: TrainConfig, callback: F) -> Result<TrainOutcome, TrainError> {
    let mut trainer = Trainer::new(model, config)?;
    let stop = trainer.run(model, data, callback)?;
    trainer.restore_best(model);
    Ok(TrainOutcome { history: trainer.history, best_loss: trainer.best_loss, stop })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_is_lr_times_sign() {
        let mut adam = Adam::new(&[(1, 3)]);
        let mut w = Tensor::from_rows(&[&[1.0, 1.0, 1.0]]);
        let g = Tensor::from_rows(&[&[0.3, -2.0, 1e-3]]);
        adam.step(&mut [&mut w], &[g], 0.01).unwrap();
        for (v, expect) in w.data().iter().zip([0.99, 1.01, 0.99]) {
            assert!((v - expect).abs() < 1e-7, "{v}");
        }
    }

    #[test]
    fn zero_gradient_keeps_params() {
        let mut adam = Adam::new(&[(2, 2)]);
        let mut w = Tensor::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let before = w.clone();
        adam.step(&mut [&mut w], &[Tensor::zeros(2, 2)], 0.1).unwrap();
        assert_eq!(w, before);
    }

    #[test]
    fn quadratic_bowl() {
        let mut adam = Adam::new(&[(1, 4)]);
        let mut w = Tensor::from_rows(&[&[0.5, -0.3, 0.2, 0.1]]);
        for _ in 0..500 {
            let g = w.scale(2.0);
            adam.step(&mut [&mut w], &[g], 1e-2).unwrap();
        }
        assert!(w.frobenius_norm() < 1e-3, "{}", w.frobenius_norm());
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut adam = Adam::new(&[(1, 2)]);
        let mut w = Tensor::from_rows(&[&[1.0, 2.0]]);
        let err = adam.step(&mut [&mut w], &[Tensor::from_rows(&[&[0.1, f64::NAN]])], 0.1);
        assert_eq!(err, Err(TrainError::NonFiniteGradient { index: 0 }));
        assert_eq!((w, adam.t), (Tensor::from_rows(&[&[1.0, 2.0]]), 0));
    }

    #[test]
    fn schedule_steps() {
        let mut s = LrSchedule::new(1e-2, 0.1, 10, 1e-6);
        for i in 0..30 {
            assert_eq!(s.observe(10.0 - i as f64), 1e-2);
        }
        let mut s = LrSchedule::new(1e-2, 0.1, 10, 1e-6);
        s.observe(1.0);
        let lrs: Vec<f64> = (0..10).map(|_| s.observe(1.0)).collect();
        assert_eq!(lrs[8], 1e-2);
        assert!((lrs[9] - 1e-3).abs() < 1e-18);
        let mut s = LrSchedule::new(1e-6, 0.1, 10, 1e-6);
        for _ in 0..25 {
            assert_eq!(s.observe(1.0), 1e-6);
        }
    }

    #[test]
    fn schedule_reaches_floor_exactly() {
        let mut s = LrSchedule::new(1e-1, 0.1, 1, 1e-6);
        s.observe(0.0);
        for _ in 0..20 {
            s.observe(0.0);
        }
        assert_eq!(s.lr, 1e-6);
        assert!(s.at_floor());
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { initial_lr: 0.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { lip_coeff: 1.0, ..Default::default() }.validate().is_err());
        assert_eq!(TrainConfig::default().batch_for(24), 24);
        assert_eq!(TrainConfig::default().batch_for(1200), 64);
    }
}
