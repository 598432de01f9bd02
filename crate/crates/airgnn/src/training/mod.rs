//! Stochastic training over random channel realizations.
//!
//! Every iteration draws one channel realization and one minibatch, runs the
//! sampled network on every sample of the batch under that same realization,
//! and takes an optimizer step along the averaged gradient. All draws come
//! from substreams keyed by `(restart, iteration)`, so a run is reproducible
//! from its master seed.

pub mod convergence;
pub mod equivalence;
pub mod loss;
pub mod monitor;
pub mod optim;

use std::time::Instant;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelModel;
use crate::data::{sample_realizations, Dataset, RealizationSet};
use crate::error::{Error, Result};
use crate::model::{backward, forward, init_parameters, AirGnnParameters, Architecture, InitScheme};
use crate::rng::{derive_seed, substream};

pub use loss::{LossKind, Objective, Readout};
pub use optim::{OptimizerKind, OptimizerState, StepSchedule};

pub const CHANNEL_STREAM: &str = "channel";
pub const BATCH_STREAM: &str = "batch";
pub const INIT_STREAM: &str = "init";
pub const VALIDATION_STREAM: &str = "validation";
pub const MONITOR_STREAM: &str = "monitor";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub every: usize,
    /// Channel draws per validation estimate.
    pub draws: usize,
}

/// Periodic Monte-Carlo estimates of the expected loss and gradient norm on
/// the training split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorConfig {
    pub every: usize,
    pub draws: usize,
    /// Training samples per draw; `None` uses the whole split.
    pub batch: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub arch: Architecture,
    pub objective: Objective,
    pub channel: ChannelModel,
    pub optimizer: OptimizerKind,
    pub schedule: StepSchedule,
    pub batch_size: usize,
    pub iterations: usize,
    pub seed: u64,
    pub init: InitScheme,
    pub restarts: usize,
    pub validation: Option<ValidationConfig>,
    pub monitor: Option<MonitorConfig>,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        self.channel.validate()?;
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be at least 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("restarts must be at least 1".into()));
        }
        OptimizerState::new(self.optimizer, self.schedule, 0)?;
        Ok(())
    }
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// Minibatch objective under the iteration's realization.
    pub loss: f64,
    pub expected_loss: Option<f64>,
    pub grad_norm_sq: Option<f64>,
    pub wall_ms: f64,
    pub channel_seed: u64,
    pub batch_seed: u64,
}

/// Minibatch of distinct training indices for iteration `t`.
pub fn sample_batch(train: &[usize], size: usize, seed: u64, restart: u64, t: u64) -> Vec<usize> {
    let mut rng = substream(seed, BATCH_STREAM, &[restart, t]);
    let amount = size.min(train.len());
    index::sample(&mut rng, train.len(), amount).into_iter().map(|i| train[i]).collect()
}

/// Mean loss over `batch`, every sample under `realizations`.
pub fn minibatch_objective(
    dataset: &Dataset,
    batch: &[usize],
    arch: &Architecture,
    params: &AirGnnParameters,
    objective: &Objective,
    realizations: &RealizationSet,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let mut total = 0.0;
    for (pos, &r) in batch.iter().enumerate() {
        let sample = &dataset.samples[r];
        let tape = forward(dataset.graph_of(r), &sample.x, arch, params, realizations.get(pos))?;
        total += objective.loss(&tape.output, &sample.target)?;
    }
    Ok(total / batch.len() as f64)
}

/// Mean loss and mean gradient over `batch`, summed in batch order.
pub fn minibatch_gradient(
    dataset: &Dataset,
    batch: &[usize],
    arch: &Architecture,
    params: &AirGnnParameters,
    objective: &Objective,
    realizations: &RealizationSet,
) -> Result<(f64, AirGnnParameters)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let mut total = 0.0;
    let mut grad = AirGnnParameters::zeros(&arch.layers);
    for (pos, &r) in batch.iter().enumerate() {
        let sample = &dataset.samples[r];
        let tape = forward(dataset.graph_of(r), &sample.x, arch, params, realizations.get(pos))?;
        let (l, dout) = objective.loss_and_grad(&tape.output, &sample.target)?;
        total += l;
        grad.add_scaled(&backward(&tape, params, &dout)?, 1.0);
    }
    let b = batch.len() as f64;
    grad.scale(1.0 / b);
    Ok((total / b, grad))
}

/// Stepwise driver of the training loop for one restart.
#[derive(Debug, Clone)]
pub struct Trainer<'d> {
    config: TrainConfig,
    dataset: &'d Dataset,
    restart: u64,
    params: AirGnnParameters,
    optimizer: OptimizerState,
    t: usize,
}

impl<'d> Trainer<'d> {
    pub fn new(config: &TrainConfig, dataset: &'d Dataset, restart: u64) -> Result<Self> {
        config.validate()?;
        if dataset.splits.train.is_empty() {
            return Err(Error::InvalidArgument("training split is empty".into()));
        }
        let params = init_parameters(
            &config.arch.layers,
            config.init,
            &mut substream(config.seed, INIT_STREAM, &[restart]),
        );
        let optimizer = OptimizerState::new(config.optimizer, config.schedule, params.len())?;
        Ok(Self { config: config.clone(), dataset, restart, params, optimizer, t: 0 })
    }

    /// Continues from a saved state at iteration `t`.
    pub fn resume(
        config: &TrainConfig,
        dataset: &'d Dataset,
        restart: u64,
        params: AirGnnParameters,
        optimizer: OptimizerState,
        t: usize,
    ) -> Result<Self> {
        config.validate()?;
        if params.shapes() != config.arch.layers.as_slice() {
            return Err(Error::DimensionMismatch("checkpoint does not match the architecture".into()));
        }
        Ok(Self { config: config.clone(), dataset, restart, params, optimizer, t })
    }

    pub fn params(&self) -> &AirGnnParameters {
        &self.params
    }

    pub fn optimizer(&self) -> &OptimizerState {
        &self.optimizer
    }

    pub fn iteration(&self) -> usize {
        self.t
    }

    pub fn is_done(&self) -> bool {
        self.t >= self.config.iterations
    }

    /// Samples `(h_t, n_t)` and `R_t`, evaluates, and updates the parameters.
    pub fn step(&mut self) -> Result<IterationRecord> {
        let start = Instant::now();
        let cfg = &self.config;
        let t = self.t as u64;
        let (expected_loss, grad_norm_sq) = match cfg.monitor {
            Some(m) if m.every > 0 && self.t % m.every == 0 => {
                let train = &self.dataset.splits.train;
                let el = monitor::estimate_expected_loss(
                    self.dataset,
                    train,
                    &cfg.arch,
                    &self.params,
                    &cfg.objective,
                    &cfg.channel,
                    m.draws,
                    cfg.seed,
                    MONITOR_STREAM,
                    &[self.restart, t, 0],
                )?;
                let gn = monitor::estimate_gradient_norm(
                    self.dataset,
                    train,
                    &cfg.arch,
                    &self.params,
                    &cfg.objective,
                    &cfg.channel,
                    m.draws,
                    m.batch,
                    cfg.seed,
                    MONITOR_STREAM,
                    &[self.restart, t, 1],
                )?;
                (Some(el.mean), Some(gn.norm_sq))
            }
            _ => (None, None),
        };

        let batch = sample_batch(&self.dataset.splits.train, cfg.batch_size, cfg.seed, self.restart, t);
        let realizations = sample_realizations(
            self.dataset,
            &batch,
            &cfg.arch.layers,
            &cfg.channel,
            cfg.seed,
            CHANNEL_STREAM,
            &[self.restart, t],
        );
        let (loss, grad) =
            minibatch_gradient(self.dataset, &batch, &cfg.arch, &self.params, &cfg.objective, &realizations)?;
        if !loss.is_finite() || grad.as_slice().iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged { iter: self.t, loss });
        }
        self.optimizer.step(self.params.as_mut_slice(), grad.as_slice());
        self.t += 1;
        Ok(IterationRecord {
            iter: t as usize,
            loss,
            expected_loss,
            grad_norm_sq,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
            channel_seed: derive_seed(cfg.seed, CHANNEL_STREAM, &[self.restart, t]),
            batch_seed: derive_seed(cfg.seed, BATCH_STREAM, &[self.restart, t]),
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters with the best validation loss (final ones without a
    /// validation split).
    pub params: AirGnnParameters,
    pub final_params: AirGnnParameters,
    pub optimizer: OptimizerState,
    pub records: Vec<IterationRecord>,
    pub best_validation: Option<f64>,
    pub restart: usize,
}

fn validation_loss(config: &TrainConfig, dataset: &Dataset, params: &AirGnnParameters) -> Result<Option<f64>> {
    let draws = config.validation.map_or(1, |v| v.draws.max(1));
    if dataset.splits.val.is_empty() {
        return Ok(None);
    }
    let est = monitor::estimate_expected_loss(
        dataset,
        &dataset.splits.val,
        &config.arch,
        params,
        &config.objective,
        &config.channel,
        draws,
        config.seed,
        VALIDATION_STREAM,
        &[],
    )?;
    Ok(Some(est.mean))
}

/// Runs `config.restarts` independent trainings and keeps the one with the
/// lowest validation loss.
pub fn train(config: &TrainConfig, dataset: &Dataset) -> Result<TrainOutcome> {
    train_with(config, dataset, |_, _| Ok(()))
}

/// [`train`] with a callback after every update.
pub fn train_with(
    config: &TrainConfig,
    dataset: &Dataset,
    mut on_step: impl FnMut(&Trainer<'_>, &IterationRecord) -> Result<()>,
) -> Result<TrainOutcome> {
    config.validate()?;
    let mut best: Option<TrainOutcome> = None;
    for restart in 0..config.restarts {
        let mut trainer = Trainer::new(config, dataset, restart as u64)?;
        let mut records = Vec::with_capacity(config.iterations);
        let mut best_val: Option<(f64, AirGnnParameters)> = None;
        let consider = |trainer: &Trainer<'_>, best_val: &mut Option<(f64, AirGnnParameters)>| -> Result<()> {
            if let Some(v) = validation_loss(config, dataset, trainer.params())? {
                if best_val.as_ref().is_none_or(|(b, _)| v < *b) {
                    *best_val = Some((v, trainer.params().clone()));
                }
            }
            Ok(())
        };
        while !trainer.is_done() {
            let record = trainer.step()?;
            on_step(&trainer, &record)?;
            records.push(record);
            if let Some(vc) = config.validation {
                if vc.every > 0 && trainer.iteration() % vc.every == 0 && !trainer.is_done() {
                    consider(&trainer, &mut best_val)?;
                }
            }
        }
        consider(&trainer, &mut best_val)?;
        let (best_validation, params) = match best_val {
            Some((v, p)) => (Some(v), p),
            None => (None, trainer.params().clone()),
        };
        let outcome = TrainOutcome {
            params,
            final_params: trainer.params().clone(),
            optimizer: trainer.optimizer().clone(),
            records,
            best_validation,
            restart,
        };
        let better = match (&best, outcome.best_validation) {
            (None, _) => true,
            (Some(b), Some(v)) => b.best_validation.is_none_or(|bv| v < bv),
            (Some(_), None) => false,
        };
        if better {
            best = Some(outcome);
        }
    }
    Ok(best.expect("at least one restart"))
}
