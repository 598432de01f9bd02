//! Graph filters over the air and the layered network built from them.
//!
//! A layer maps `F_in` input signals to `F_out` outputs through a bank of
//! filters `alpha[g][f][k]`: each input is shifted `K` times over the air,
//! the shifted copies are combined with the coefficients, summed over `g`, and
//! passed through a pointwise nonlinearity. No bias terms.
//!
//! [`forward`] records a [`ForwardTape`]; [`backward`] walks it in reverse to
//! get the exact gradient of the sampled (fixed-realization) network with
//! respect to every coefficient.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelRealization, HopRealization};
use crate::error::{Error, Result};
use crate::graphs::{GraphShiftOperator, GraphSignal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nonlinearity {
    Relu,
    Tanh,
    Identity,
}

impl Nonlinearity {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Self::Relu => x.max(0.0),
            Self::Tanh => x.tanh(),
            Self::Identity => x,
        }
    }

    /// Derivative at the pre-activation `x`. ReLU uses 0 at exactly 0.
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Self::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Self::Identity => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Relu => "relu",
            Self::Tanh => "tanh",
            Self::Identity => "identity",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Self::Relu),
            "tanh" => Some(Self::Tanh),
            "identity" | "linear" => Some(Self::Identity),
            _ => None,
        }
    }
}

/// Widths and filter order of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub f_in: usize,
    pub f_out: usize,
    /// Filter order `K`; the layer uses `K` over-the-air shifts.
    pub order: usize,
}

impl LayerShape {
    pub fn new(f_in: usize, f_out: usize, order: usize) -> Self {
        Self { f_in, f_out, order }
    }

    pub fn num_coefficients(&self) -> usize {
        self.f_in * self.f_out * (self.order + 1)
    }
}

/// Layer shapes plus the nonlinearity applied after each layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub layers: Vec<LayerShape>,
    pub activations: Vec<Nonlinearity>,
}

impl Architecture {
    pub fn new(layers: Vec<LayerShape>, activations: Vec<Nonlinearity>) -> Result<Self> {
        let a = Self { layers, activations };
        a.validate()?;
        Ok(a)
    }

    /// Chain of layers with widths `widths[0] -> widths[1] -> ...`.
    pub fn chain(widths: &[usize], orders: &[usize], activations: &[Nonlinearity]) -> Result<Self> {
        if widths.len() < 2 || orders.len() != widths.len() - 1 || activations.len() != orders.len() {
            return Err(Error::InvalidArgument(format!(
                "{} widths, {} orders, {} activations",
                widths.len(),
                orders.len(),
                activations.len()
            )));
        }
        let layers = widths
            .windows(2)
            .zip(orders)
            .map(|(w, &k)| LayerShape::new(w[0], w[1], k))
            .collect();
        Self::new(layers, activations.to_vec())
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidArgument("architecture has no layers".into()));
        }
        if self.layers.len() != self.activations.len() {
            return Err(Error::InvalidArgument(format!(
                "{} layers but {} nonlinearities",
                self.layers.len(),
                self.activations.len()
            )));
        }
        for (l, sh) in self.layers.iter().enumerate() {
            if sh.f_in == 0 || sh.f_out == 0 {
                return Err(Error::InvalidArgument(format!("layer {l} has zero width")));
            }
            if l > 0 && self.layers[l - 1].f_out != sh.f_in {
                return Err(Error::InvalidArgument(format!(
                    "layer {l} expects {} inputs but layer {} produces {}",
                    sh.f_in,
                    l - 1,
                    self.layers[l - 1].f_out
                )));
            }
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].f_in
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].f_out
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(LayerShape::num_coefficients).sum()
    }
}

/// All filter coefficients of a network, stored flat, layer after layer, each
/// bank in `[g][f][k]` row-major order. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
pub struct AirGnnParameters {
    shapes: Vec<LayerShape>,
    offsets: Vec<usize>,
    coeffs: Vec<f64>,
}

/// Borrowed view of one layer's coefficients.
#[derive(Debug, Clone, Copy)]
pub struct FilterBank<'a> {
    pub shape: LayerShape,
    pub coeffs: &'a [f64],
}

impl FilterBank<'_> {
    pub fn coeff(&self, g: usize, f: usize, k: usize) -> f64 {
        self.coeffs[(g * self.shape.f_out + f) * (self.shape.order + 1) + k]
    }
}

impl AirGnnParameters {
    pub fn zeros(shapes: &[LayerShape]) -> Self {
        let mut offsets = Vec::with_capacity(shapes.len() + 1);
        let mut total = 0;
        offsets.push(0);
        for sh in shapes {
            total += sh.num_coefficients();
            offsets.push(total);
        }
        Self {
            shapes: shapes.to_vec(),
            offsets,
            coeffs: vec![0.0; total],
        }
    }

    pub fn from_flat(shapes: &[LayerShape], coeffs: Vec<f64>) -> Result<Self> {
        let mut p = Self::zeros(shapes);
        if coeffs.len() != p.coeffs.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for an architecture with {}",
                coeffs.len(),
                p.coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("filter coefficients"));
        }
        p.coeffs = coeffs;
        Ok(p)
    }

    pub fn shapes(&self) -> &[LayerShape] {
        &self.shapes
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn bank(&self, layer: usize) -> FilterBank<'_> {
        FilterBank {
            shape: self.shapes[layer],
            coeffs: &self.coeffs[self.offsets[layer]..self.offsets[layer + 1]],
        }
    }

    fn bank_mut(&mut self, layer: usize) -> &mut [f64] {
        &mut self.coeffs[self.offsets[layer]..self.offsets[layer + 1]]
    }

    /// Flat index of `alpha[layer][g][f][k]`.
    pub fn index_of(&self, layer: usize, g: usize, f: usize, k: usize) -> usize {
        let sh = self.shapes[layer];
        self.offsets[layer] + (g * sh.f_out + f) * (sh.order + 1) + k
    }

    /// Inverse of [`Self::index_of`].
    pub fn locate(&self, index: usize) -> Option<(usize, usize, usize, usize)> {
        let layer = (0..self.shapes.len()).find(|&l| index < self.offsets[l + 1])?;
        let sh = self.shapes[layer];
        let local = index - self.offsets[layer];
        let k = local % (sh.order + 1);
        let gf = local / (sh.order + 1);
        Some((layer, gf / sh.f_out, gf % sh.f_out, k))
    }

    pub fn squared_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Self, scale: f64) {
        debug_assert_eq!(self.shapes, other.shapes);
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.coeffs.iter_mut().for_each(|c| *c *= factor);
    }

    fn check_against(&self, arch: &Architecture) -> Result<()> {
        if self.shapes != arch.layers {
            return Err(Error::DimensionMismatch("parameters do not match the architecture".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// `Uniform(-b, b)` with `b = 1 / sqrt(F_in (K + 1))`.
    UniformFanin,
    Constant(f64),
}

pub fn init_parameters<R: Rng + ?Sized>(shapes: &[LayerShape], scheme: InitScheme, rng: &mut R) -> AirGnnParameters {
    let mut p = AirGnnParameters::zeros(shapes);
    for (l, sh) in shapes.iter().enumerate() {
        let bank = p.bank_mut(l);
        match scheme {
            InitScheme::Constant(c) => bank.iter_mut().for_each(|v| *v = c),
            InitScheme::UniformFanin => {
                let b = 1.0 / ((sh.f_in * (sh.order + 1)) as f64).sqrt();
                bank.iter_mut().for_each(|v| *v = rng.random_range(-b..b));
            }
        }
    }
    p
}

/// Shifted copies `x^(0) = x, x^(k) = H_k x^(k-1) + n_k` for every feature.
pub fn shift_stack(s: &GraphShiftOperator, x: &GraphSignal, hops: &[HopRealization]) -> Vec<GraphSignal> {
    let mut stack = Vec::with_capacity(hops.len() + 1);
    stack.push(x.clone());
    for hop in hops {
        let next = hop.apply(s, stack.last().expect("stack is never empty"));
        stack.push(next);
    }
    stack
}

/// Single graph filter over the air: `sum_k alpha_k x^(k)`.
///
/// Applies the same coefficients to every feature column of `x`. Returns the
/// output together with the shifted stack.
pub fn air_filter_apply(
    s: &GraphShiftOperator,
    x: &GraphSignal,
    alpha: &[f64],
    hops: &[HopRealization],
) -> Result<(GraphSignal, Vec<GraphSignal>)> {
    if alpha.len() != hops.len() + 1 {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for {} hops",
            alpha.len(),
            hops.len()
        )));
    }
    if x.n() != s.n() {
        return Err(Error::DimensionMismatch(format!("signal has {} nodes, graph {}", x.n(), s.n())));
    }
    for hop in hops {
        if hop.noise.n() != s.n() || hop.noise.features() != x.features() {
            return Err(Error::DimensionMismatch("hop noise shape".into()));
        }
    }
    let stack = shift_stack(s, x, hops);
    let mut y = GraphSignal::zeros(x.n(), x.features());
    for (a, z) in alpha.iter().zip(&stack) {
        for (o, v) in y.as_mut_slice().iter_mut().zip(z.as_slice()) {
            *o += a * v;
        }
    }
    Ok((y, stack))
}

/// Intermediate values of one layer needed by the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTape {
    /// `K + 1` shifted copies of the layer input, each `n x F_in`.
    pub stack: Vec<GraphSignal>,
    /// Pre-nonlinearity sums, `n x F_out`.
    pub pre: GraphSignal,
}

/// Combines a shifted stack with a bank: `U[i,f] = sum_{g,k} alpha[g][f][k] Z_k[i,g]`.
fn combine(bank: FilterBank<'_>, stack: &[GraphSignal]) -> GraphSignal {
    let sh = bank.shape;
    let n = stack[0].n();
    let mut pre = GraphSignal::zeros(n, sh.f_out);
    let mut w = vec![0.0; sh.f_in * sh.f_out];
    for (k, z) in stack.iter().enumerate() {
        for g in 0..sh.f_in {
            for f in 0..sh.f_out {
                w[g * sh.f_out + f] = bank.coeff(g, f, k);
            }
        }
        for i in 0..n {
            let zi = z.node(i);
            let ui = pre.node_mut(i);
            for (g, &zv) in zi.iter().enumerate() {
                let wg = &w[g * sh.f_out..(g + 1) * sh.f_out];
                for (u, wv) in ui.iter_mut().zip(wg) {
                    *u += wv * zv;
                }
            }
        }
    }
    pre
}

/// One layer: a bank of filters over the air followed by `activation`.
///
/// The hop-`k` realization is shared by every filter of the bank.
pub fn layer_forward(
    s: &GraphShiftOperator,
    input: &GraphSignal,
    bank: FilterBank<'_>,
    hops: &[HopRealization],
    activation: Nonlinearity,
) -> Result<(GraphSignal, LayerTape)> {
    let sh = bank.shape;
    if input.n() != s.n() || input.features() != sh.f_in {
        return Err(Error::DimensionMismatch(format!(
            "layer expects {}x{} input, got {}x{}",
            s.n(),
            sh.f_in,
            input.n(),
            input.features()
        )));
    }
    if hops.len() != sh.order {
        return Err(Error::DimensionMismatch(format!("{} hops for order {}", hops.len(), sh.order)));
    }
    let stack = shift_stack(s, input, hops);
    let pre = combine(bank, &stack);
    let mut out = pre.clone();
    out.as_mut_slice().iter_mut().for_each(|v| *v = activation.apply(*v));
    Ok((out, LayerTape { stack, pre }))
}

/// Everything recorded by [`forward`].
#[derive(Debug, Clone)]
pub struct ForwardTape<'a> {
    pub gso: &'a GraphShiftOperator,
    pub realization: &'a ChannelRealization,
    pub activations: Vec<Nonlinearity>,
    pub layers: Vec<LayerTape>,
    pub output: GraphSignal,
}

/// Network output for input `x` under one channel realization.
pub fn forward<'a>(
    s: &'a GraphShiftOperator,
    x: &GraphSignal,
    arch: &Architecture,
    params: &AirGnnParameters,
    realization: &'a ChannelRealization,
) -> Result<ForwardTape<'a>> {
    params.check_against(arch)?;
    realization.check_shape(s, &arch.layers)?;
    let mut layers = Vec::with_capacity(arch.layers.len());
    let mut current = x.clone();
    for (l, &act) in arch.activations.iter().enumerate() {
        let (out, tape) = layer_forward(s, &current, params.bank(l), &realization.layers[l].hops, act)?;
        layers.push(tape);
        current = out;
    }
    Ok(ForwardTape {
        gso: s,
        realization,
        activations: arch.activations.clone(),
        layers,
        output: current,
    })
}

/// Gradient of `<output_grad, output>` with respect to every coefficient.
///
/// Channel gains and noise are constants of the sampled network.
pub fn backward(tape: &ForwardTape<'_>, params: &AirGnnParameters, output_grad: &GraphSignal) -> Result<AirGnnParameters> {
    if params.shapes.len() != tape.layers.len() {
        return Err(Error::DimensionMismatch("tape and parameters have different depth".into()));
    }
    if output_grad.n() != tape.output.n() || output_grad.features() != tape.output.features() {
        return Err(Error::DimensionMismatch("output gradient shape".into()));
    }
    let s = tape.gso;
    let mut grad = AirGnnParameters::zeros(&params.shapes);
    let mut upstream = output_grad.clone();
    for l in (0..tape.layers.len()).rev() {
        let lt = &tape.layers[l];
        let sh = params.shapes[l];
        if lt.stack.len() != sh.order + 1 || lt.pre.features() != sh.f_out || lt.stack[0].features() != sh.f_in {
            return Err(Error::DimensionMismatch(format!("tape layer {l} does not match parameters")));
        }
        let act = tape.activations[l];
        let n = lt.pre.n();

        let mut d_pre = upstream;
        for (d, &u) in d_pre.as_mut_slice().iter_mut().zip(lt.pre.as_slice()) {
            *d *= act.derivative(u);
        }

        let bank = params.bank(l);
        let k1 = sh.order + 1;
        let mut d_stack: Vec<GraphSignal> = Vec::with_capacity(k1);
        {
            let gbank = grad.bank_mut(l);
            for (k, z) in lt.stack.iter().enumerate() {
                let mut dz = GraphSignal::zeros(n, sh.f_in);
                for i in 0..n {
                    let zi = z.node(i);
                    let di = d_pre.node(i);
                    let dzi = dz.node_mut(i);
                    for g in 0..sh.f_in {
                        let base = g * sh.f_out * k1;
                        let mut acc = 0.0;
                        for (f, &dv) in di.iter().enumerate() {
                            gbank[base + f * k1 + k] += dv * zi[g];
                            acc += bank.coeffs[base + f * k1 + k] * dv;
                        }
                        dzi[g] = acc;
                    }
                }
                d_stack.push(dz);
            }
        }

        // Reverse the shift recursion: G_{k-1} = dZ_{k-1} + H_k^T G_k.
        let hops = &tape.realization.layers[l].hops;
        let mut carry = d_stack.pop().expect("stack has at least one entry");
        for k in (1..k1).rev() {
            let mut prev = d_stack.pop().expect("stack depth matches order");
            hops[k - 1].apply_transpose(s, &carry, &mut prev);
            carry = prev;
        }
        upstream = carry;
    }
    Ok(grad)
}
