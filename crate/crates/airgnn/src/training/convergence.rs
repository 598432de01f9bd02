//! Constant-step SGD runs at several horizons with the step size that
//! balances the stationarity bound, tracking the best gradient norm reached.

use serde::{Deserialize, Serialize};

use crate::data::{sample_realizations, Dataset};
use crate::error::{Error, Result};
use crate::model::AirGnnParameters;

use super::monitor::{estimate_expected_loss, estimate_gradient_norm, theoretical_step_size};
use super::{minibatch_gradient, sample_batch, OptimizerKind, StepSchedule, TrainConfig, Trainer};

pub const PROBE_STREAM: &str = "probe";
pub const GRADNORM_STREAM: &str = "gradnorm";
pub const L0_STREAM: &str = "l0";

/// Bound on stochastic gradient norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GradientBound {
    /// Largest norm over this many minibatch gradients at the initial point.
    Empirical { probes: usize },
    Given(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    /// Architecture, objective, channel, batch size and seed; optimizer,
    /// schedule and iteration count are overridden per horizon.
    pub base: TrainConfig,
    pub horizons: Vec<usize>,
    /// Lipschitz surrogate for the gradient.
    pub lipschitz: f64,
    /// Lower bound on the optimal expected loss.
    pub loss_lower_bound: f64,
    pub gradient_bound: GradientBound,
    /// Stochastic gradients averaged per norm estimate.
    pub grad_draws: usize,
    /// Training samples per gradient draw; `None` uses the whole split.
    pub grad_batch: Option<usize>,
    /// Iterations between gradient-norm estimates.
    pub grad_every: usize,
    /// Channel draws for the initial expected loss.
    pub l0_draws: usize,
}

impl ConvergenceConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(Error::InvalidArgument("horizons must be nonempty and positive".into()));
        }
        if self.grad_draws == 0 || self.grad_every == 0 || self.l0_draws == 0 {
            return Err(Error::InvalidArgument("draw counts and grid stride must be positive".into()));
        }
        match self.gradient_bound {
            GradientBound::Empirical { probes: 0 } => {
                Err(Error::InvalidArgument("gradient-bound probe needs at least one draw".into()))
            }
            GradientBound::Given(c) if !(c > 0.0) => {
                Err(Error::InvalidArgument(format!("gradient bound must be positive, got {c}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonResult {
    pub iterations: usize,
    pub step_size: f64,
    /// `(t, estimated squared gradient norm)` on the grid `t = 0, every, ...`.
    pub grad_curve: Vec<(usize, f64)>,
    pub min_grad_norm_sq: f64,
    /// Minibatch loss per iteration.
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub gradient_bound: f64,
    pub initial_loss: f64,
    pub horizons: Vec<HorizonResult>,
}

impl ConvergenceReport {
    /// Best gradient norm at the first horizon over the best at the last.
    pub fn decay_ratio(&self) -> Option<f64> {
        let (first, last) = (self.horizons.first()?, self.horizons.last()?);
        Some(first.min_grad_norm_sq / last.min_grad_norm_sq)
    }
}

/// Largest norm of `probes` minibatch gradients at `params`, each with its
/// own batch and realization keyed `(probe, [p])`.
pub fn probe_gradient_bound(
    config: &TrainConfig,
    dataset: &Dataset,
    params: &AirGnnParameters,
    probes: usize,
) -> Result<f64> {
    let mut best = 0.0f64;
    for p in 0..probes as u64 {
        let batch = sample_batch(&dataset.splits.train, config.batch_size, config.seed, u64::MAX, p);
        let real =
            sample_realizations(dataset, &batch, &config.arch.layers, &config.channel, config.seed, PROBE_STREAM, &[p]);
        let (_, g) = minibatch_gradient(dataset, &batch, &config.arch, params, &config.objective, &real)?;
        best = best.max(g.squared_norm().sqrt());
    }
    Ok(best)
}

/// Mean of `losses[end - window .. end]`, clipped at the start.
pub fn trailing_mean(losses: &[f64], end: usize, window: usize) -> f64 {
    let end = end.min(losses.len());
    let start = end.saturating_sub(window);
    let slice = &losses[start..end];
    slice.iter().sum::<f64>() / slice.len().max(1) as f64
}

/// Runs constant-step SGD from the same initial point for every horizon.
pub fn run_convergence(config: &ConvergenceConfig, dataset: &Dataset) -> Result<ConvergenceReport> {
    config.validate()?;
    let base = &config.base;
    let init = Trainer::new(base, dataset, 0)?;
    let a0 = init.params().clone();
    let train = &dataset.splits.train;
    let gradient_bound = match config.gradient_bound {
        GradientBound::Empirical { probes } => probe_gradient_bound(base, dataset, &a0, probes)?,
        GradientBound::Given(c) => c,
    };
    let initial_loss = estimate_expected_loss(
        dataset,
        train,
        &base.arch,
        &a0,
        &base.objective,
        &base.channel,
        config.l0_draws,
        base.seed,
        L0_STREAM,
        &[],
    )?
    .mean;
    let mut horizons = Vec::with_capacity(config.horizons.len());
    for &horizon in &config.horizons {
        let step_size = theoretical_step_size(
            initial_loss,
            config.loss_lower_bound,
            config.lipschitz,
            gradient_bound,
            horizon,
        )?;
        let run = TrainConfig {
            optimizer: OptimizerKind::Sgd,
            schedule: StepSchedule::Constant(step_size),
            iterations: horizon,
            monitor: None,
            validation: None,
            restarts: 1,
            ..base.clone()
        };
        let mut trainer = Trainer::new(&run, dataset, 0)?;
        let mut grad_curve = Vec::new();
        let mut losses = Vec::with_capacity(horizon);
        while !trainer.is_done() {
            let t = trainer.iteration();
            if t % config.grad_every == 0 {
                let est = estimate_gradient_norm(
                    dataset,
                    train,
                    &run.arch,
                    trainer.params(),
                    &run.objective,
                    &run.channel,
                    config.grad_draws,
                    config.grad_batch,
                    run.seed,
                    GRADNORM_STREAM,
                    &[horizon as u64, t as u64],
                )?;
                grad_curve.push((t, est.norm_sq));
            }
            losses.push(trainer.step()?.loss);
        }
        let min_grad_norm_sq = grad_curve.iter().map(|&(_, g)| g).fold(f64::INFINITY, f64::min);
        horizons.push(HorizonResult { iterations: horizon, step_size, grad_curve, min_grad_norm_sq, losses });
    }
    Ok(ConvergenceReport { gradient_bound, initial_loss, horizons })
}
