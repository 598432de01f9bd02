#![allow(dead_code)]

use airgnn::channel::{sample_realization, ChannelModel, ChannelRealization, FadingMode};
use airgnn::graphs::{GraphShiftOperator, GraphSignal};
use airgnn::model::{init_parameters, AirGnnParameters, Architecture, InitScheme, LayerShape, Nonlinearity};
use airgnn::rng::substream;
use nalgebra::DMatrix;
use rand::Rng;

pub fn random_graph(n: usize, p: f64, seed: u64) -> GraphShiftOperator {
    let mut rng = substream(seed, "test-graph", &[]);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    GraphShiftOperator::from_undirected_edges(n, &edges).unwrap()
}

pub fn random_signal(n: usize, f: usize, seed: u64) -> GraphSignal {
    let mut rng = substream(seed, "test-signal", &[]);
    GraphSignal::from_rows(n, f, (0..n * f).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

pub fn dense(s: &GraphShiftOperator) -> DMatrix<f64> {
    let n = s.n();
    DMatrix::from_fn(n, n, |i, j| s.get(i, j))
}

pub fn signal_matrix(x: &GraphSignal) -> DMatrix<f64> {
    DMatrix::from_row_slice(x.n(), x.features(), x.as_slice())
}

/// A small random network: graph, architecture, parameters, input, and a
/// noisy faded realization.
pub struct Instance {
    pub s: GraphShiftOperator,
    pub arch: Architecture,
    pub params: AirGnnParameters,
    pub x: GraphSignal,
    pub realization: ChannelRealization,
}

pub fn random_instance(seed: u64, max_nodes: usize, activations: [Nonlinearity; 2]) -> Instance {
    let mut rng = substream(seed, "instance", &[]);
    let n = rng.random_range(2..=max_nodes);
    let g = random_graph(n, 0.4, seed);
    let s = if g.nnz() > 0 { g.normalize_by_spectral_radius().unwrap() } else { g };
    let widths = [rng.random_range(1..=3), rng.random_range(1..=4), rng.random_range(1..=3)];
    let orders = [rng.random_range(0..=5), rng.random_range(0..=5)];
    let arch = Architecture::new(
        vec![LayerShape::new(widths[0], widths[1], orders[0]), LayerShape::new(widths[1], widths[2], orders[1])],
        activations.to_vec(),
    )
    .unwrap();
    let params = init_parameters(&arch.layers, InitScheme::UniformFanin, &mut rng);
    let x = random_signal(n, widths[0], seed);
    let mode = if seed % 2 == 0 { FadingMode::Replace } else { FadingMode::Multiply };
    let model = ChannelModel::rayleigh(rng.random_range(0.3..1.5), 10.0, 1.0).unwrap().with_mode(mode);
    let realization = sample_realization(&s, &arch.layers, &model, seed, "channel", &[]);
    Instance { s, arch, params, x, realization }
}
