//! Monte-Carlo estimates of the expected objective over channel draws, its
//! gradient norm, and the constant step size that balances the convergence
//! bound.

use rand::seq::index;

use crate::channel::ChannelModel;
use crate::data::{sample_realizations, Dataset};
use crate::error::{Error, Result};
use crate::model::{AirGnnParameters, Architecture};
use crate::rng::substream;

use super::{minibatch_gradient, minibatch_objective, Objective};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    /// Standard error of the mean; NaN with a single draw.
    pub stderr: f64,
    pub draws: usize,
}

/// Averages the minibatch objective over `draws` fresh realizations; draw
/// `m` is keyed `(label, prefix ++ [m])`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_expected_loss(
    dataset: &Dataset,
    samples: &[usize],
    arch: &Architecture,
    params: &AirGnnParameters,
    objective: &Objective,
    channel: &ChannelModel,
    draws: usize,
    seed: u64,
    label: &str,
    prefix: &[u64],
) -> Result<McEstimate> {
    if draws == 0 {
        return Err(Error::InvalidArgument("need at least one channel draw".into()));
    }
    let mut key = prefix.to_vec();
    key.push(0);
    let last = key.len() - 1;
    let mut values = Vec::with_capacity(draws);
    for m in 0..draws {
        key[last] = m as u64;
        let real = sample_realizations(dataset, samples, &arch.layers, channel, seed, label, &key);
        values.push(minibatch_objective(dataset, samples, arch, params, objective, &real)?);
    }
    let mean = values.iter().sum::<f64>() / draws as f64;
    let stderr = if draws > 1 {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (draws - 1) as f64;
        (var / draws as f64).sqrt()
    } else {
        f64::NAN
    };
    Ok(McEstimate { mean, stderr, draws })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradNormEstimate {
    /// `|| mean of the stochastic gradients ||^2`.
    pub norm_sq: f64,
    pub draws: usize,
    pub mean_gradient: AirGnnParameters,
    /// Sum over coordinates of the sample variance of one stochastic
    /// gradient. `trace_cov / draws` is the bias of `norm_sq`.
    pub trace_cov: f64,
}

/// Squared norm of the average of `draws` stochastic gradients.
///
/// Each draw uses a fresh realization and, when `batch` is set, a fresh
/// random subset of `samples` of that size; otherwise all of `samples`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_gradient_norm(
    dataset: &Dataset,
    samples: &[usize],
    arch: &Architecture,
    params: &AirGnnParameters,
    objective: &Objective,
    channel: &ChannelModel,
    draws: usize,
    batch: Option<usize>,
    seed: u64,
    label: &str,
    prefix: &[u64],
) -> Result<GradNormEstimate> {
    if draws == 0 {
        return Err(Error::InvalidArgument("need at least one channel draw".into()));
    }
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let mut key = prefix.to_vec();
    key.extend([0, 0]);
    let last = key.len() - 1;
    let mut sum = AirGnnParameters::zeros(&arch.layers);
    let mut sum_sq = vec![0.0; sum.len()];
    let mut chosen = Vec::new();
    for m in 0..draws {
        key[last - 1] = m as u64;
        let subset: &[usize] = match batch {
            Some(b) if b < samples.len() => {
                key[last] = 1;
                let mut rng = substream(seed, label, &key);
                chosen.clear();
                chosen.extend(index::sample(&mut rng, samples.len(), b).into_iter().map(|i| samples[i]));
                &chosen
            }
            _ => samples,
        };
        key[last] = 0;
        let real = sample_realizations(dataset, subset, &arch.layers, channel, seed, label, &key);
        let (_, g) = minibatch_gradient(dataset, subset, arch, params, objective, &real)?;
        for (s2, v) in sum_sq.iter_mut().zip(g.as_slice()) {
            *s2 += v * v;
        }
        sum.add_scaled(&g, 1.0);
    }
    let m = draws as f64;
    sum.scale(1.0 / m);
    let trace_cov = if draws > 1 {
        sum_sq
            .iter()
            .zip(sum.as_slice())
            .map(|(s2, mu)| (s2 - m * mu * mu) / (m - 1.0))
            .sum::<f64>()
            .max(0.0)
    } else {
        0.0
    };
    Ok(GradNormEstimate { norm_sq: sum.squared_norm(), draws, mean_gradient: sum, trace_cov })
}

/// Constant step size `sqrt(2 (L0 - L*) / (T C_L C_g^2))`.
pub fn theoretical_step_size(l0: f64, lstar_bound: f64, c_l: f64, c_g: f64, iterations: usize) -> Result<f64> {
    let finite = [l0, lstar_bound, c_l, c_g].iter().all(|v| v.is_finite());
    if !finite || l0 <= lstar_bound || c_l <= 0.0 || c_g <= 0.0 || iterations == 0 {
        return Err(Error::InvalidArgument(format!(
            "need L0 > L*, C_L > 0, C_g > 0, T > 0 (got L0={l0}, L*={lstar_bound}, C_L={c_l}, C_g={c_g}, T={iterations})"
        )));
    }
    Ok((2.0 * (l0 - lstar_bound) / (iterations as f64 * c_l * c_g * c_g)).sqrt())
}
