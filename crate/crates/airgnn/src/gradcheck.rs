//! Central finite-difference check of the analytic coefficient gradient on
//! small random networks under random channel draws.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_realization, ChannelModel, ChannelRealization, FadingMode};
use crate::error::{Error, Result};
use crate::graphs::{GraphShiftOperator, GraphSignal};
use crate::model::{backward, forward, init_parameters, AirGnnParameters, Architecture, InitScheme, Nonlinearity};
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradcheckConfig {
    pub instances: usize,
    pub max_nodes: usize,
    pub max_order: usize,
    pub step: f64,
    pub tolerance: f64,
    /// Smallest denominator of the relative error.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self { instances: 20, max_nodes: 12, max_order: 5, step: 1e-6, tolerance: 1e-5, floor: 1e-8, seed: 0 }
    }
}

/// Deliberate bug for exercising the checker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Negate the analytic derivative of one coefficient of every instance.
    FlipSign { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientCheck {
    pub instance: usize,
    pub index: usize,
    pub layer: usize,
    pub g: usize,
    pub f: usize,
    pub k: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub checks: Vec<CoefficientCheck>,
    pub max_rel_error: f64,
    pub median_rel_error: f64,
    pub tolerance: f64,
}

impl GradcheckReport {
    pub fn failures(&self) -> impl Iterator<Item = &CoefficientCheck> {
        self.checks.iter().filter(move |c| !(c.rel_error <= self.tolerance))
    }

    pub fn passed(&self) -> bool {
        self.failures().next().is_none()
    }
}

/// A random network, input, channel draw and test functional.
#[derive(Debug, Clone)]
pub struct Instance {
    pub gso: GraphShiftOperator,
    pub arch: Architecture,
    pub params: AirGnnParameters,
    pub x: GraphSignal,
    pub realization: ChannelRealization,
    /// Weights of the linear part of the test functional.
    pub weights: GraphSignal,
}

impl Instance {
    /// `sum w * y + 0.5 |y|^2`.
    pub fn objective(&self, params: &AirGnnParameters) -> Result<f64> {
        let y = forward(&self.gso, &self.x, &self.arch, params, &self.realization)?.output;
        Ok(y.as_slice()
            .iter()
            .zip(self.weights.as_slice())
            .map(|(v, w)| w * v + 0.5 * v * v)
            .sum())
    }

    pub fn gradient(&self, params: &AirGnnParameters) -> Result<AirGnnParameters> {
        let tape = forward(&self.gso, &self.x, &self.arch, params, &self.realization)?;
        let mut dout = self.weights.clone();
        for (d, y) in dout.as_mut_slice().iter_mut().zip(tape.output.as_slice()) {
            *d += y;
        }
        backward(&tape, params, &dout)
    }

    /// Smallest |pre-activation| feeding a ReLU; finite differences are
    /// unreliable next to the kink.
    fn relu_margin(&self) -> Result<f64> {
        let tape = forward(&self.gso, &self.x, &self.arch, &self.params, &self.realization)?;
        let mut m = f64::INFINITY;
        for (lt, act) in tape.layers.iter().zip(&self.arch.activations) {
            if *act == Nonlinearity::Relu {
                m = lt.pre.as_slice().iter().fold(m, |a, v| a.min(v.abs()));
            }
        }
        Ok(m)
    }
}

fn random_graph<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<GraphShiftOperator> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < 0.4 {
                edges.push((i, j));
            }
        }
    }
    if edges.is_empty() {
        edges.push((0, 1));
    }
    GraphShiftOperator::from_undirected_edges(n, &edges)?.normalize_by_spectral_radius()
}

/// Two-layer instance `index`; even instances use ReLU in the first layer,
/// odd ones tanh.
pub fn random_instance(cfg: &GradcheckConfig, index: usize) -> Result<Instance> {
    if cfg.max_nodes < 2 {
        return Err(Error::InvalidArgument("gradient check needs at least two nodes".into()));
    }
    let mut rng = substream(cfg.seed, "gradcheck", &[index as u64]);
    for _ in 0..100 {
        let n = rng.random_range(2..=cfg.max_nodes);
        let gso = random_graph(n, &mut rng)?;
        let widths = [rng.random_range(1..=3), rng.random_range(1..=4), rng.random_range(1..=3)];
        let orders = [rng.random_range(0..=cfg.max_order), rng.random_range(0..=cfg.max_order)];
        let first = if index % 2 == 0 { Nonlinearity::Relu } else { Nonlinearity::Tanh };
        let second = [Nonlinearity::Relu, Nonlinearity::Tanh, Nonlinearity::Identity][rng.random_range(0..3)];
        let arch = Architecture::chain(&widths, &orders, &[first, second])?;
        let params = init_parameters(&arch.layers, InitScheme::UniformFanin, &mut rng);
        let x = GraphSignal::from_rows(n, widths[0], (0..n * widths[0]).map(|_| rng.random_range(-1.0..1.0)).collect())?;
        let mode = [FadingMode::Replace, FadingMode::Multiply][rng.random_range(0..2)];
        let mut channel = ChannelModel::rayleigh(1.0, 20.0, 1.0)?.with_mode(mode);
        channel.per_feature_fading = rng.random::<bool>();
        let realization = sample_realization(&gso, &arch.layers, &channel, cfg.seed, "gradcheck-channel", &[index as u64]);
        let out = arch.output_width();
        let weights = GraphSignal::from_rows(n, out, (0..n * out).map(|_| rng.random_range(-1.0..1.0)).collect())?;
        let inst = Instance { gso, arch, params, x, realization, weights };
        if inst.relu_margin()? > 1e-3 {
            return Ok(inst);
        }
    }
    Err(Error::ResamplingExhausted(100))
}

/// Compares every coefficient's analytic derivative with a central
/// difference on `cfg.instances` random instances.
pub fn run_gradcheck(cfg: &GradcheckConfig, fault: Option<Fault>) -> Result<GradcheckReport> {
    if !(cfg.step > 0.0) || !(cfg.tolerance > 0.0) || cfg.instances == 0 {
        return Err(Error::InvalidArgument("need positive step, tolerance and instance count".into()));
    }
    let mut checks = Vec::new();
    for index in 0..cfg.instances {
        let inst = random_instance(cfg, index)?;
        let mut analytic = inst.gradient(&inst.params)?;
        if let Some(Fault::FlipSign { index: c }) = fault {
            if let Some(v) = analytic.as_mut_slice().get_mut(c) {
                *v = -*v;
            }
        }
        let mut p = inst.params.clone();
        for c in 0..p.len() {
            let orig = p.as_slice()[c];
            p.as_mut_slice()[c] = orig + cfg.step;
            let plus = inst.objective(&p)?;
            p.as_mut_slice()[c] = orig - cfg.step;
            let minus = inst.objective(&p)?;
            p.as_mut_slice()[c] = orig;
            let numeric = (plus - minus) / (2.0 * cfg.step);
            let a = analytic.as_slice()[c];
            let rel_error = (a - numeric).abs() / a.abs().max(numeric.abs()).max(cfg.floor);
            let (layer, g, f, k) = p.locate(c).expect("index in range");
            checks.push(CoefficientCheck { instance: index, index: c, layer, g, f, k, analytic: a, numeric, rel_error });
        }
    }
    let mut errs: Vec<f64> = checks.iter().map(|c| c.rel_error).collect();
    errs.sort_by(f64::total_cmp);
    let max_rel_error = errs.last().copied().unwrap_or(0.0);
    let median_rel_error = if errs.is_empty() { 0.0 } else { errs[errs.len() / 2] };
    Ok(GradcheckReport { checks, max_rel_error, median_rel_error, tolerance: cfg.tolerance })
}
