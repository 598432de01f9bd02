//! Wireless channel simulation: Rayleigh fading on every directed link,
//! SNR-calibrated receiver noise, and the over-the-air graph shift.
//!
//! A received aggregate at node `i` is `sum_j h_ij x_j + n_i`, where the sum
//! runs over the links `(i, j)` of the shift operator. Diagonal entries of the
//! operator (a node reading its own value) are never faded.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{GraphShiftOperator, GraphSignal};
use crate::model::LayerShape;
use crate::rng::substream;

/// How a fading draw combines with the nominal operator entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FadingMode {
    /// The draw substitutes the nominal entry: `[S_air]_ij = h_ij`.
    #[default]
    Replace,
    /// The draw scales the nominal entry: `[S_air]_ij = h_ij * s_ij`.
    Multiply,
    /// No fading; every gain equals the nominal entry.
    Nominal,
}

impl FadingMode {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "replace" => Some(Self::Replace),
            "multiply" => Some(Self::Multiply),
            "nominal" | "none" => Some(Self::Nominal),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Replace => "replace",
            Self::Multiply => "multiply",
            Self::Nominal => "nominal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    /// Rayleigh scale parameter.
    pub fading_scale: f64,
    pub snr_db: f64,
    pub fading_mode: FadingMode,
    /// Average per-node signal power the SNR refers to.
    pub reference_power: f64,
    /// Independent fading per input feature instead of one draw per hop.
    pub per_feature_fading: bool,
}

impl ChannelModel {
    pub fn rayleigh(fading_scale: f64, snr_db: f64, reference_power: f64) -> Result<Self> {
        let m = Self {
            fading_scale,
            snr_db,
            fading_mode: FadingMode::Replace,
            reference_power,
            per_feature_fading: false,
        };
        m.validate()?;
        Ok(m)
    }

    /// Perfect links: nominal gains and no noise.
    pub fn ideal() -> Self {
        Self {
            fading_scale: 1.0,
            snr_db: f64::INFINITY,
            fading_mode: FadingMode::Nominal,
            reference_power: 1.0,
            per_feature_fading: false,
        }
    }

    pub fn with_mode(mut self, mode: FadingMode) -> Self {
        self.fading_mode = mode;
        self
    }

    pub fn with_fading_scale(mut self, scale: f64) -> Self {
        self.fading_scale = scale;
        self
    }

    pub fn is_ideal(&self) -> bool {
        self.fading_mode == FadingMode::Nominal && self.noise_variance() == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fading_scale > 0.0) || !self.fading_scale.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "fading scale must be positive, got {}",
                self.fading_scale
            )));
        }
        if !(self.reference_power > 0.0) || !self.reference_power.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "reference power must be positive, got {}",
                self.reference_power
            )));
        }
        if self.snr_db.is_nan() {
            return Err(Error::InvalidArgument("snr_db is NaN".into()));
        }
        Ok(())
    }

    /// `reference_power / 10^(snr_db / 10)`.
    pub fn noise_variance(&self) -> f64 {
        self.reference_power / 10f64.powf(self.snr_db / 10.0)
    }
}

/// One Rayleigh draw with scale `delta` by inverse transform.
pub fn rayleigh<R: Rng + ?Sized>(delta: f64, rng: &mut R) -> f64 {
    // 1 - U lies in (0, 1], so the log is finite.
    let u: f64 = rng.random();
    delta * (-2.0 * (1.0 - u).ln()).sqrt()
}

/// Effective link gains of one transmission, aligned entry-for-entry with the
/// nonzeros of the shift operator they were sampled for.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingMatrix {
    pub gains: Vec<f64>,
}

impl FadingMatrix {
    /// The nominal operator itself.
    pub fn nominal(s: &GraphShiftOperator) -> Self {
        Self { gains: s.values().to_vec() }
    }

    pub fn to_operator(&self, s: &GraphShiftOperator) -> Result<GraphShiftOperator> {
        s.with_values(self.gains.clone())
    }
}

/// Draws one fading matrix on the support of `s`.
///
/// Each off-diagonal entry gets its own i.i.d. draw, so `h_ij` and `h_ji` are
/// independent. Diagonal entries keep their nominal value.
pub fn sample_fading<R: Rng + ?Sized>(
    s: &GraphShiftOperator,
    model: &ChannelModel,
    rng: &mut R,
) -> FadingMatrix {
    let mut gains = Vec::with_capacity(s.nnz());
    for e in s.entries() {
        let g = if e.row == e.col {
            e.value
        } else {
            match model.fading_mode {
                FadingMode::Replace => rayleigh(model.fading_scale, rng),
                FadingMode::Multiply => rayleigh(model.fading_scale, rng) * e.value,
                FadingMode::Nominal => e.value,
            }
        };
        gains.push(g);
    }
    FadingMatrix { gains }
}

fn check_shift_dims(s: &GraphShiftOperator, x: &GraphSignal, noise: &GraphSignal) -> Result<()> {
    if x.n() != s.n() || noise.n() != s.n() || noise.features() != x.features() {
        return Err(Error::DimensionMismatch(format!(
            "operator n={}, signal {}x{}, noise {}x{}",
            s.n(),
            x.n(),
            x.features(),
            noise.n(),
            noise.features()
        )));
    }
    Ok(())
}

/// Over-the-air shift `H x + noise`, with one gain matrix for every feature.
pub fn air_shift(
    s: &GraphShiftOperator,
    x: &GraphSignal,
    fading: &FadingMatrix,
    noise: &GraphSignal,
) -> Result<GraphSignal> {
    check_shift_dims(s, x, noise)?;
    if fading.gains.len() != s.nnz() {
        return Err(Error::DimensionMismatch(format!(
            "{} gains for {} links",
            fading.gains.len(),
            s.nnz()
        )));
    }
    let mut out = noise.clone();
    shift_accumulate(s, &fading.gains, x, &mut out);
    Ok(out)
}

/// `out += H x` over all feature columns.
pub(crate) fn shift_accumulate(s: &GraphShiftOperator, gains: &[f64], x: &GraphSignal, out: &mut GraphSignal) {
    let cols = s.cols();
    for i in 0..s.n() {
        let range = s.row_range(i);
        let row = out.node_mut(i);
        for p in range {
            let h = gains[p];
            for (o, xv) in row.iter_mut().zip(x.node(cols[p])) {
                *o += h * xv;
            }
        }
    }
}

/// `out[:, f] += H x[:, f]` for a single feature column.
pub(crate) fn shift_accumulate_feature(
    s: &GraphShiftOperator,
    gains: &[f64],
    x: &GraphSignal,
    f: usize,
    out: &mut GraphSignal,
) {
    let cols = s.cols();
    for i in 0..s.n() {
        let mut acc = 0.0;
        for p in s.row_range(i) {
            acc += gains[p] * x.get(cols[p], f);
        }
        let cur = out.get(i, f);
        out.set(i, f, cur + acc);
    }
}

/// `out += H^T g`, the adjoint of [`shift_accumulate`].
pub(crate) fn shift_transpose_accumulate(s: &GraphShiftOperator, gains: &[f64], g: &GraphSignal, out: &mut GraphSignal) {
    let cols = s.cols();
    for i in 0..s.n() {
        for p in s.row_range(i) {
            let h = gains[p];
            for (o, gv) in out.node_mut(cols[p]).iter_mut().zip(g.node(i)) {
                *o += h * gv;
            }
        }
    }
}

pub(crate) fn shift_transpose_accumulate_feature(
    s: &GraphShiftOperator,
    gains: &[f64],
    g: &GraphSignal,
    f: usize,
    out: &mut GraphSignal,
) {
    let cols = s.cols();
    for i in 0..s.n() {
        let gi = g.get(i, f);
        for p in s.row_range(i) {
            let j = cols[p];
            let cur = out.get(j, f);
            out.set(j, f, cur + gains[p] * gi);
        }
    }
}

/// Channel state of one shift (hop): the link gains and the receiver noise
/// for every input feature.
#[derive(Debug, Clone, PartialEq)]
pub struct HopRealization {
    /// One matrix shared by all features, or one per input feature.
    pub fading: Vec<FadingMatrix>,
    /// `n x F_in` receiver noise.
    pub noise: GraphSignal,
}

impl HopRealization {
    /// Gains used for input feature `g`.
    pub fn gains_for(&self, g: usize) -> &[f64] {
        if self.fading.len() == 1 {
            &self.fading[0].gains
        } else {
            &self.fading[g].gains
        }
    }

    /// Applies the hop to every feature of `x`.
    pub fn apply(&self, s: &GraphShiftOperator, x: &GraphSignal) -> GraphSignal {
        let mut out = self.noise.clone();
        if self.fading.len() == 1 {
            shift_accumulate(s, &self.fading[0].gains, x, &mut out);
        } else {
            for (f, m) in self.fading.iter().enumerate() {
                shift_accumulate_feature(s, &m.gains, x, f, &mut out);
            }
        }
        out
    }

    /// Adjoint of [`Self::apply`] with respect to `x`: `out += H^T g`.
    pub fn apply_transpose(&self, s: &GraphShiftOperator, g: &GraphSignal, out: &mut GraphSignal) {
        if self.fading.len() == 1 {
            shift_transpose_accumulate(s, &self.fading[0].gains, g, out);
        } else {
            for (f, m) in self.fading.iter().enumerate() {
                shift_transpose_accumulate_feature(s, &m.gains, g, f, out);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LayerRealization {
    pub hops: Vec<HopRealization>,
}

/// Every channel draw one forward pass consumes: `K_l` hops for layer `l`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChannelRealization {
    pub layers: Vec<LayerRealization>,
}

impl ChannelRealization {
    /// Nominal gains and zero noise for every hop.
    pub fn ideal(s: &GraphShiftOperator, shapes: &[LayerShape]) -> Self {
        let layers = shapes
            .iter()
            .map(|sh| LayerRealization {
                hops: (0..sh.order)
                    .map(|_| HopRealization {
                        fading: vec![FadingMatrix::nominal(s)],
                        noise: GraphSignal::zeros(s.n(), sh.f_in),
                    })
                    .collect(),
            })
            .collect();
        Self { layers }
    }

    pub fn num_hops(&self) -> usize {
        self.layers.iter().map(|l| l.hops.len()).sum()
    }

    /// Checks that the realization fits `s` and the architecture shape.
    pub fn check_shape(&self, s: &GraphShiftOperator, shapes: &[LayerShape]) -> Result<()> {
        if self.layers.len() != shapes.len() {
            return Err(Error::DimensionMismatch(format!(
                "realization has {} layers, architecture {}",
                self.layers.len(),
                shapes.len()
            )));
        }
        for (l, (lr, sh)) in self.layers.iter().zip(shapes).enumerate() {
            if lr.hops.len() != sh.order {
                return Err(Error::DimensionMismatch(format!(
                    "layer {l}: {} hops for filter order {}",
                    lr.hops.len(),
                    sh.order
                )));
            }
            for hop in &lr.hops {
                let groups = hop.fading.len();
                if groups != 1 && groups != sh.f_in {
                    return Err(Error::DimensionMismatch(format!(
                        "layer {l}: {groups} fading matrices for {} input features",
                        sh.f_in
                    )));
                }
                if hop.fading.iter().any(|m| m.gains.len() != s.nnz()) {
                    return Err(Error::DimensionMismatch(format!("layer {l}: gain count differs from link count")));
                }
                if hop.noise.n() != s.n() || hop.noise.features() != sh.f_in {
                    return Err(Error::DimensionMismatch(format!("layer {l}: noise shape")));
                }
            }
        }
        Ok(())
    }

    /// Zeroes every noise term, keeping the gains.
    pub fn without_noise(&self) -> Self {
        let mut r = self.clone();
        for hop in r.layers.iter_mut().flat_map(|l| l.hops.iter_mut()) {
            hop.noise.as_mut_slice().iter_mut().for_each(|v| *v = 0.0);
        }
        r
    }
}

/// Draws the channel state of a single hop.
pub fn sample_hop<R: Rng + ?Sized>(
    s: &GraphShiftOperator,
    f_in: usize,
    model: &ChannelModel,
    rng: &mut R,
) -> HopRealization {
    let groups = if model.per_feature_fading { f_in.max(1) } else { 1 };
    let fading = (0..groups).map(|_| sample_fading(s, model, rng)).collect();
    let sigma = model.noise_variance().sqrt();
    let mut noise = GraphSignal::zeros(s.n(), f_in);
    if sigma > 0.0 {
        for v in noise.as_mut_slice() {
            let z: f64 = rng.sample(StandardNormal);
            *v = sigma * z;
        }
    }
    HopRealization { fading, noise }
}

/// Samples a full realization for an architecture.
///
/// Hop `k` of layer `l` draws from the substream
/// `(label, prefix ++ [l, k])`, so hops can be sampled in any order.
pub fn sample_realization(
    s: &GraphShiftOperator,
    shapes: &[LayerShape],
    model: &ChannelModel,
    master_seed: u64,
    label: &str,
    prefix: &[u64],
) -> ChannelRealization {
    let mut key = prefix.to_vec();
    key.extend([0, 0]);
    let depth = key.len();
    let layers = shapes
        .iter()
        .enumerate()
        .map(|(l, sh)| LayerRealization {
            hops: (0..sh.order)
                .map(|k| {
                    key[depth - 2] = l as u64;
                    key[depth - 1] = k as u64;
                    if model.is_ideal() {
                        HopRealization {
                            fading: vec![FadingMatrix::nominal(s)],
                            noise: GraphSignal::zeros(s.n(), sh.f_in),
                        }
                    } else {
                        sample_hop(s, sh.f_in, model, &mut substream(master_seed, label, &key))
                    }
                })
                .collect(),
        })
        .collect();
    ChannelRealization { layers }
}
