//! Source localization: a Kronecker delta at one community's source node is
//! diffused for a random number of steps, observed with Gaussian noise, and
//! the network has to name the originating community.

use std::ops::RangeInclusive;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_realization, ChannelModel};
use crate::data::{Dataset, Sample, Splits, Target};
use crate::error::{Error, Result};
use crate::graphs::{generate_sbm, ideal_shift, kronecker_delta, GraphShiftOperator, GraphSignal};
use crate::model::{forward, AirGnnParameters, Architecture};
use crate::rng::substream;
use crate::training::Objective;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionConfig {
    pub n: usize,
    pub communities: usize,
    pub p_intra: f64,
    pub p_inter: f64,
    pub tau_min: usize,
    pub tau_max: usize,
    pub noise_sigma: f64,
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        Self {
            n: 100,
            communities: 10,
            p_intra: 0.8,
            p_inter: 0.2,
            tau_min: 1,
            tau_max: 100,
            noise_sigma: 0.01,
            train: 10_000,
            val: 2_500,
            test: 2_500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionSample {
    pub x: GraphSignal,
    pub label: usize,
    pub tau: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionDataset {
    /// Normalized shift operator the signals were diffused on.
    pub gso: GraphShiftOperator,
    /// Source node of each community, indexed by label.
    pub sources: Vec<usize>,
    pub samples: Vec<DiffusionSample>,
    pub splits: Splits,
    /// Mean per-node squared input value over the training split.
    pub reference_power: f64,
}

impl DiffusionDataset {
    pub fn to_dataset(&self) -> Dataset {
        Dataset {
            graphs: vec![self.gso.clone()],
            samples: self
                .samples
                .iter()
                .map(|s| Sample { graph: 0, x: s.x.clone(), target: Target::Class(s.label) })
                .collect(),
            splits: self.splits.clone(),
        }
    }
}

/// Lowest node index of every contiguous community.
pub fn community_sources(n: usize, communities: usize) -> Result<Vec<usize>> {
    if communities == 0 || n % communities != 0 {
        return Err(Error::CommunitySize { n, communities });
    }
    Ok((0..communities).map(|c| c * (n / communities)).collect())
}

pub(crate) fn mean_power<'a>(signals: impl Iterator<Item = &'a GraphSignal>) -> f64 {
    let (mut total, mut count) = (0.0, 0usize);
    for x in signals {
        total += x.as_slice().iter().map(|v| v * v).sum::<f64>();
        count += x.as_slice().len();
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

/// Samples `x = S^tau delta_c + noise` with `c` and `tau` uniform.
///
/// `splits` gives the train/val/test sizes, which must add up to `count`.
/// Sample `i` draws from its own substream.
pub fn build_diffusion_dataset(
    s: &GraphShiftOperator,
    sources: &[usize],
    count: usize,
    tau_range: RangeInclusive<usize>,
    noise_sigma: f64,
    splits: (usize, usize, usize),
    seed: u64,
) -> Result<DiffusionDataset> {
    let (tau_min, tau_max) = (*tau_range.start(), *tau_range.end());
    if tau_min == 0 || tau_min > tau_max {
        return Err(Error::InvalidArgument(format!("invalid diffusion-time range {tau_min}..={tau_max}")));
    }
    if sources.is_empty() || count == 0 {
        return Err(Error::InvalidArgument("need at least one source and one sample".into()));
    }
    if !(noise_sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise sigma must be nonnegative, got {noise_sigma}")));
    }
    if splits.0 + splits.1 + splits.2 != count {
        return Err(Error::InvalidArgument(format!(
            "split sizes {splits:?} do not add up to {count}"
        )));
    }
    let n = s.n();
    // Diffused deltas S^tau delta_c, built by repeated shifts.
    let mut table: Vec<Vec<GraphSignal>> = Vec::with_capacity(sources.len());
    for &src in sources {
        let mut x = kronecker_delta(n, src)?;
        let mut per_tau = Vec::with_capacity(tau_max + 1);
        per_tau.push(x.clone());
        for _ in 0..tau_max {
            x = ideal_shift(s, &x)?;
            per_tau.push(x.clone());
        }
        table.push(per_tau);
    }
    let mut samples = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = substream(seed, "diffusion", &[i as u64]);
        let label = rng.random_range(0..sources.len());
        let tau = rng.random_range(tau_min..=tau_max);
        let mut x = table[label][tau].clone();
        if noise_sigma > 0.0 {
            for v in x.as_mut_slice() {
                let z: f64 = rng.sample(StandardNormal);
                *v += noise_sigma * z;
            }
        }
        samples.push(DiffusionSample { x, label, tau });
    }
    let split = Splits::contiguous(splits.0, splits.1, splits.2);
    let reference_power = mean_power(split.train.iter().map(|&i| &samples[i].x));
    Ok(DiffusionDataset { gso: s.clone(), sources: sources.to_vec(), samples, splits: split, reference_power })
}

/// Generates the graph, normalizes it, and builds the dataset.
pub fn source_localization_dataset(cfg: &DiffusionConfig, seed: u64) -> Result<DiffusionDataset> {
    let adjacency = generate_sbm(cfg.n, cfg.communities, cfg.p_intra, cfg.p_inter, &mut substream(seed, "graph", &[]))?;
    let s = adjacency.normalize_by_spectral_radius()?;
    let sources = community_sources(cfg.n, cfg.communities)?;
    build_diffusion_dataset(
        &s,
        &sources,
        cfg.train + cfg.val + cfg.test,
        cfg.tau_min..=cfg.tau_max,
        cfg.noise_sigma,
        (cfg.train, cfg.val, cfg.test),
        seed,
    )
}

/// Fraction of correctly classified samples, averaged over `redraws`
/// independent channel draws; every sample gets its own realization.
#[allow(clippy::too_many_arguments)]
pub fn classify_accuracy(
    dataset: &Dataset,
    samples: &[usize],
    arch: &Architecture,
    params: &AirGnnParameters,
    channel: &ChannelModel,
    redraws: usize,
    seed: u64,
    label: &str,
) -> Result<f64> {
    let per_draw = accuracy_per_draw(dataset, samples, arch, params, channel, redraws, seed, label)?;
    Ok(per_draw.iter().sum::<f64>() / redraws as f64)
}

/// Accuracy under each of `redraws` channel draws; sample `r` of draw `rho`
/// uses realization `(label, [rho, r])`.
#[allow(clippy::too_many_arguments)]
pub fn accuracy_per_draw(
    dataset: &Dataset,
    samples: &[usize],
    arch: &Architecture,
    params: &AirGnnParameters,
    channel: &ChannelModel,
    redraws: usize,
    seed: u64,
    label: &str,
) -> Result<Vec<f64>> {
    if samples.is_empty() || redraws == 0 {
        return Err(Error::InvalidArgument("need samples and at least one redraw".into()));
    }
    let mut out = Vec::with_capacity(redraws);
    for rho in 0..redraws {
        let mut correct = 0usize;
        for &r in samples {
            let sample = &dataset.samples[r];
            let Target::Class(c) = sample.target else {
                return Err(Error::InvalidArgument("accuracy needs class targets".into()));
            };
            let s = dataset.graph_of(r);
            let real = sample_realization(s, &arch.layers, channel, seed, label, &[rho as u64, r as u64]);
            let tape = forward(s, &sample.x, arch, params, &real)?;
            if Objective::predict_class(&tape.output) == c {
                correct += 1;
            }
        }
        out.push(correct as f64 / samples.len() as f64);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> DiffusionConfig {
        DiffusionConfig { n: 20, communities: 2, train: 30, val: 10, test: 10, ..Default::default() }
    }

    #[test]
    fn split_sizes() {
        let d = source_localization_dataset(&small(), 1).unwrap();
        assert_eq!(d.samples.len(), 50);
        assert_eq!((d.splits.train.len(), d.splits.val.len(), d.splits.test.len()), (30, 10, 10));
        assert_eq!(d.sources, vec![0, 10]);
        assert!(d.reference_power > 0.0);
    }

    #[test]
    fn one_hop_noiseless_sample_is_shifted_delta() {
        let s = generate_sbm(20, 2, 0.8, 0.2, &mut substream(2, "g", &[])).unwrap().normalize_by_spectral_radius().unwrap();
        let d = build_diffusion_dataset(&s, &[0, 10], 20, 1..=1, 0.0, (20, 0, 0), 3).unwrap();
        for smp in &d.samples {
            let want = ideal_shift(&s, &kronecker_delta(20, d.sources[smp.label]).unwrap()).unwrap();
            assert_eq!(smp.x, want);
        }
    }

    #[test]
    fn invalid_ranges() {
        let s = GraphShiftOperator::from_undirected_edges(2, &[(0, 1)]).unwrap();
        assert!(build_diffusion_dataset(&s, &[0], 1, 0..=3, 0.0, (1, 0, 0), 0).is_err());
        #[allow(clippy::reversed_empty_ranges)]
        let bad = 5..=3;
        assert!(build_diffusion_dataset(&s, &[0], 1, bad, 0.0, (1, 0, 0), 0).is_err());
        assert!(build_diffusion_dataset(&s, &[0], 2, 1..=3, 0.0, (1, 0, 0), 0).is_err());
        assert!(community_sources(10, 3).is_err());
    }

    #[test]
    fn dataset_is_deterministic() {
        let a = source_localization_dataset(&small(), 9).unwrap();
        let b = source_localization_dataset(&small(), 9).unwrap();
        assert_eq!(a, b);
    }
}
