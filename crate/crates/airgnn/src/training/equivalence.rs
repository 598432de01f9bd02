//! Plain SGD on the expected objective, written independently of
//! [`Trainer`](super::Trainer), and a comparison of the two parameter traces.
//!
//! Here an iteration first samples a random objective (a data batch of the
//! configured size together with a single channel draw) and then descends
//! along its gradient. With the same master seed both procedures should visit
//! exactly the same parameters.

use crate::data::{sample_realizations, Dataset, RealizationSet};
use crate::error::Result;
use crate::model::{backward, forward, init_parameters, AirGnnParameters};
use crate::rng::substream;

use super::{sample_batch, OptimizerState, TrainConfig, Trainer, CHANNEL_STREAM, INIT_STREAM};

/// One draw of the random objective: data batch plus channel state.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledObjective {
    pub batch: Vec<usize>,
    pub realizations: RealizationSet,
}

impl SampledObjective {
    pub fn draw(config: &TrainConfig, dataset: &Dataset, restart: u64, t: u64) -> Self {
        let batch = sample_batch(&dataset.splits.train, config.batch_size, config.seed, restart, t);
        let realizations = sample_realizations(
            dataset,
            &batch,
            &config.arch.layers,
            &config.channel,
            config.seed,
            CHANNEL_STREAM,
            &[restart, t],
        );
        Self { batch, realizations }
    }

    pub fn value(&self, config: &TrainConfig, dataset: &Dataset, params: &AirGnnParameters) -> Result<f64> {
        let mut acc = 0.0;
        for (pos, &r) in self.batch.iter().enumerate() {
            let s = &dataset.samples[r];
            let tape = forward(dataset.graph_of(r), &s.x, &config.arch, params, self.realizations.get(pos))?;
            acc += config.objective.loss(&tape.output, &s.target)?;
        }
        Ok(acc / self.batch.len() as f64)
    }

    pub fn gradient(&self, config: &TrainConfig, dataset: &Dataset, params: &AirGnnParameters) -> Result<Vec<f64>> {
        let mut acc = vec![0.0; params.len()];
        for (pos, &r) in self.batch.iter().enumerate() {
            let s = &dataset.samples[r];
            let tape = forward(dataset.graph_of(r), &s.x, &config.arch, params, self.realizations.get(pos))?;
            let (_, dout) = config.objective.loss_and_grad(&tape.output, &s.target)?;
            let g = backward(&tape, params, &dout)?;
            for (a, v) in acc.iter_mut().zip(g.as_slice()) {
                *a += v;
            }
        }
        let inv = 1.0 / self.batch.len() as f64;
        acc.iter_mut().for_each(|a| *a *= inv);
        Ok(acc)
    }
}

/// Parameters `A_0, ..., A_T` produced by the training loop (restart 0).
pub fn training_trace(config: &TrainConfig, dataset: &Dataset) -> Result<Vec<Vec<f64>>> {
    let mut cfg = config.clone();
    cfg.monitor = None;
    let mut trainer = Trainer::new(&cfg, dataset, 0)?;
    let mut trace = vec![trainer.params().as_slice().to_vec()];
    while !trainer.is_done() {
        trainer.step()?;
        trace.push(trainer.params().as_slice().to_vec());
    }
    Ok(trace)
}

/// Parameters produced by SGD on sampled objectives. `perturb_at` nudges
/// one channel gain of that iteration's draw (a sensitivity hook).
pub fn sgd_trace(config: &TrainConfig, dataset: &Dataset, perturb_at: Option<usize>) -> Result<Vec<Vec<f64>>> {
    config.validate()?;
    let mut params = init_parameters(&config.arch.layers, config.init, &mut substream(config.seed, INIT_STREAM, &[0]));
    let mut opt = OptimizerState::new(config.optimizer, config.schedule, params.len())?;
    let mut trace = vec![params.as_slice().to_vec()];
    for t in 0..config.iterations {
        let mut objective = SampledObjective::draw(config, dataset, 0, t as u64);
        if perturb_at == Some(t) {
            objective.realizations.for_each_mut(|r| {
                if let Some(hop) = r.layers.iter_mut().flat_map(|l| l.hops.iter_mut()).next() {
                    if let Some(g) = hop.fading[0].gains.first_mut() {
                        *g += 1e-3;
                    }
                }
            });
        }
        let grad = objective.gradient(config, dataset, &params)?;
        opt.step(params.as_mut_slice(), &grad);
        trace.push(params.as_slice().to_vec());
    }
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceReport {
    pub identical: bool,
    /// First `t` at which `A_t` differs between the traces.
    pub first_divergence: Option<usize>,
    pub max_abs_diff: f64,
    pub iterations: usize,
}

pub fn compare_traces(a: &[Vec<f64>], b: &[Vec<f64>]) -> EquivalenceReport {
    let mut first = None;
    let mut max_abs_diff: f64 = 0.0;
    for (t, (x, y)) in a.iter().zip(b).enumerate() {
        let bitwise = x.len() == y.len() && x.iter().zip(y).all(|(p, q)| p.to_bits() == q.to_bits());
        if !bitwise && first.is_none() {
            first = Some(t);
        }
        for (p, q) in x.iter().zip(y) {
            max_abs_diff = max_abs_diff.max((p - q).abs());
        }
    }
    if first.is_none() && a.len() != b.len() {
        first = Some(a.len().min(b.len()));
    }
    EquivalenceReport {
        identical: first.is_none(),
        first_divergence: first,
        max_abs_diff,
        iterations: a.len().max(b.len()).saturating_sub(1),
    }
}

/// Runs both procedures from the same seed and compares them bit for bit.
pub fn sgd_equivalence_trace(config: &TrainConfig, dataset: &Dataset) -> Result<EquivalenceReport> {
    let a = training_trace(config, dataset)?;
    let b = sgd_trace(config, dataset, None)?;
    Ok(compare_traces(&a, &b))
}
