//! Labeled graph-signal datasets shared by both tasks.

use crate::channel::{sample_realization, ChannelModel, ChannelRealization};
use crate::error::{Error, Result};
use crate::graphs::{GraphShiftOperator, GraphSignal};
use crate::model::LayerShape;

#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Class(usize),
    Signal(GraphSignal),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Index into [`Dataset::graphs`].
    pub graph: usize,
    pub x: GraphSignal,
    pub target: Target,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    /// Consecutive blocks `[0, train)`, `[train, train + val)`, ...
    pub fn contiguous(train: usize, val: usize, test: usize) -> Self {
        Self {
            train: (0..train).collect(),
            val: (train..train + val).collect(),
            test: (train + val..train + val + test).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graphs: Vec<GraphShiftOperator>,
    pub samples: Vec<Sample>,
    pub splits: Splits,
}

impl Dataset {
    pub fn new(graphs: Vec<GraphShiftOperator>, samples: Vec<Sample>, splits: Splits) -> Result<Self> {
        if graphs.is_empty() {
            return Err(Error::InvalidArgument("dataset has no graphs".into()));
        }
        for (i, s) in samples.iter().enumerate() {
            let g = graphs
                .get(s.graph)
                .ok_or_else(|| Error::InvalidArgument(format!("sample {i} refers to missing graph {}", s.graph)))?;
            if s.x.n() != g.n() {
                return Err(Error::DimensionMismatch(format!("sample {i} has {} nodes, graph {}", s.x.n(), g.n())));
            }
        }
        let n = samples.len();
        if splits.train.iter().chain(&splits.val).chain(&splits.test).any(|&i| i >= n) {
            return Err(Error::InvalidArgument("split index out of range".into()));
        }
        Ok(Self { graphs, samples, splits })
    }

    /// All samples live on one graph, so one realization serves a whole batch.
    pub fn shared_graph(&self) -> bool {
        self.graphs.len() == 1
    }

    pub fn graph_of(&self, sample: usize) -> &GraphShiftOperator {
        &self.graphs[self.samples[sample].graph]
    }

    /// Restriction to a subset of samples, with the given indices as the
    /// training split.
    pub fn subset_train(&self, train: Vec<usize>) -> Self {
        Self {
            graphs: self.graphs.clone(),
            samples: self.samples.clone(),
            splits: Splits { train, val: self.splits.val.clone(), test: self.splits.test.clone() },
        }
    }
}

/// Channel draws for a set of samples evaluated together.
#[derive(Debug, Clone, PartialEq)]
pub enum RealizationSet {
    /// One realization used by every sample (common graph).
    Shared(ChannelRealization),
    /// One realization per sample, aligned with the sample list.
    PerSample(Vec<ChannelRealization>),
}

impl RealizationSet {
    pub fn get(&self, position: usize) -> &ChannelRealization {
        match self {
            Self::Shared(r) => r,
            Self::PerSample(v) => &v[position],
        }
    }

    pub fn for_each_mut(&mut self, mut f: impl FnMut(&mut ChannelRealization)) {
        match self {
            Self::Shared(r) => f(r),
            Self::PerSample(v) => v.iter_mut().for_each(f),
        }
    }
}

/// Draws the channel state for `samples`.
///
/// On a common graph a single realization keyed `(label, prefix)` is shared.
/// When samples carry their own graphs, sample `r` draws from
/// `(label, prefix ++ [r])`.
pub fn sample_realizations(
    dataset: &Dataset,
    samples: &[usize],
    shapes: &[LayerShape],
    channel: &ChannelModel,
    seed: u64,
    label: &str,
    prefix: &[u64],
) -> RealizationSet {
    if dataset.shared_graph() {
        RealizationSet::Shared(sample_realization(&dataset.graphs[0], shapes, channel, seed, label, prefix))
    } else {
        let mut key = prefix.to_vec();
        key.push(0);
        let last = key.len() - 1;
        RealizationSet::PerSample(
            samples
                .iter()
                .map(|&r| {
                    key[last] = r as u64;
                    sample_realization(dataset.graph_of(r), shapes, channel, seed, label, &key)
                })
                .collect(),
        )
    }
}
