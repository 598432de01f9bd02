//! JSON checkpoints. Every float is stored as a hexadecimal string so a
//! reload is bit-exact.

use serde::{Deserialize, Serialize};

use crate::channel::{ChannelModel, FadingMode};
use crate::error::{Error, Result};
use crate::model::{AirGnnParameters, Architecture, LayerShape, Nonlinearity};
use crate::training::{OptimizerKind, OptimizerState, StepSchedule};

use super::hexfloat::{format_hex, parse_hex};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub task: String,
    /// Channel the parameters were trained under.
    pub train_channel: ChannelModel,
    pub arch: Architecture,
    pub params: AirGnnParameters,
    pub optimizer: Option<OptimizerState>,
    /// Iterations completed when the checkpoint was taken.
    pub iteration: Option<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelJson {
    fading_scale: String,
    snr_db: String,
    fading_mode: String,
    reference_power: String,
    per_feature_fading: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerJson {
    f_in: usize,
    f_out: usize,
    order: usize,
    activation: String,
    coefficients: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptimizerJson {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta1: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta2: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eps: Option<String>,
    schedule: String,
    step_size: String,
    t: u64,
    m: Vec<String>,
    v: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointJson {
    schema_version: u32,
    task: String,
    train_channel: ChannelJson,
    layers: Vec<LayerJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    optimizer: Option<OptimizerJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    iteration: Option<u64>,
}

fn hexes(v: &[f64]) -> Vec<String> {
    v.iter().map(|&x| format_hex(x)).collect()
}

fn unhex(v: &[String]) -> Result<Vec<f64>> {
    v.iter().map(|s| parse_hex(s)).collect()
}

fn schedule_name(s: &StepSchedule) -> &'static str {
    match s {
        StepSchedule::Constant(_) => "constant",
        StepSchedule::InverseT(_) => "inverse_t",
        StepSchedule::InverseSqrtT(_) => "inverse_sqrt_t",
    }
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        let c = &self.train_channel;
        let layers = self
            .arch
            .layers
            .iter()
            .zip(&self.arch.activations)
            .enumerate()
            .map(|(l, (sh, act))| LayerJson {
                f_in: sh.f_in,
                f_out: sh.f_out,
                order: sh.order,
                activation: act.name().into(),
                coefficients: hexes(self.params.bank(l).coeffs),
            })
            .collect();
        let optimizer = self.optimizer.as_ref().map(|o| {
            let (kind, b1, b2, eps) = match o.kind {
                OptimizerKind::Sgd => ("sgd", None, None, None),
                OptimizerKind::Adam { beta1, beta2, eps } => {
                    ("adam", Some(format_hex(beta1)), Some(format_hex(beta2)), Some(format_hex(eps)))
                }
            };
            OptimizerJson {
                kind: kind.into(),
                beta1: b1,
                beta2: b2,
                eps,
                schedule: schedule_name(&o.schedule).into(),
                step_size: format_hex(o.schedule.base()),
                t: o.t,
                m: hexes(&o.m),
                v: hexes(&o.v),
            }
        });
        let doc = CheckpointJson {
            schema_version: SCHEMA_VERSION,
            task: self.task.clone(),
            train_channel: ChannelJson {
                fading_scale: format_hex(c.fading_scale),
                snr_db: format_hex(c.snr_db),
                fading_mode: c.fading_mode.name().into(),
                reference_power: format_hex(c.reference_power),
                per_feature_fading: c.per_feature_fading,
            },
            layers,
            optimizer,
            iteration: self.iteration,
        };
        serde_json::to_string_pretty(&doc).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: CheckpointJson = serde_json::from_str(text).map_err(|e| Error::Decode(e.to_string()))?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(Error::Decode(format!("unsupported schema version {}", doc.schema_version)));
        }
        let ch = &doc.train_channel;
        let train_channel = ChannelModel {
            fading_scale: parse_hex(&ch.fading_scale)?,
            snr_db: parse_hex(&ch.snr_db)?,
            fading_mode: FadingMode::parse(&ch.fading_mode)
                .ok_or_else(|| Error::Decode(format!("unknown fading mode {:?}", ch.fading_mode)))?,
            reference_power: parse_hex(&ch.reference_power)?,
            per_feature_fading: ch.per_feature_fading,
        };
        train_channel.validate()?;
        let mut shapes = Vec::with_capacity(doc.layers.len());
        let mut acts = Vec::with_capacity(doc.layers.len());
        let mut flat = Vec::new();
        for layer in &doc.layers {
            let sh = LayerShape::new(layer.f_in, layer.f_out, layer.order);
            let expected = layer.f_in.checked_mul(layer.f_out).and_then(|v| v.checked_mul(layer.order.checked_add(1)?));
            if expected != Some(layer.coefficients.len()) {
                return Err(Error::Decode(format!(
                    "layer {}x{} of order {} has {} coefficients",
                    layer.f_in,
                    layer.f_out,
                    layer.order,
                    layer.coefficients.len()
                )));
            }
            shapes.push(sh);
            acts.push(
                Nonlinearity::parse(&layer.activation)
                    .ok_or_else(|| Error::Decode(format!("unknown activation {:?}", layer.activation)))?,
            );
            flat.extend(unhex(&layer.coefficients)?);
        }
        let arch = Architecture::new(shapes, acts)?;
        let params = AirGnnParameters::from_flat(&arch.layers, flat)?;
        let optimizer = match &doc.optimizer {
            None => None,
            Some(o) => {
                let kind = match o.kind.as_str() {
                    "sgd" => OptimizerKind::Sgd,
                    "adam" => {
                        let get = |v: &Option<String>, name: &str| -> Result<f64> {
                            parse_hex(v.as_deref().ok_or_else(|| Error::Decode(format!("adam state lacks {name}")))?)
                        };
                        OptimizerKind::Adam { beta1: get(&o.beta1, "beta1")?, beta2: get(&o.beta2, "beta2")?, eps: get(&o.eps, "eps")? }
                    }
                    k => return Err(Error::Decode(format!("unknown optimizer {k:?}"))),
                };
                let g = parse_hex(&o.step_size)?;
                let schedule = match o.schedule.as_str() {
                    "constant" => StepSchedule::Constant(g),
                    "inverse_t" => StepSchedule::InverseT(g),
                    "inverse_sqrt_t" => StepSchedule::InverseSqrtT(g),
                    s => return Err(Error::Decode(format!("unknown schedule {s:?}"))),
                };
                let mut state = OptimizerState::new(kind, schedule, params.len())?;
                let (m, v) = (unhex(&o.m)?, unhex(&o.v)?);
                if m.len() != state.m.len() || v.len() != state.v.len() {
                    return Err(Error::Decode("optimizer moments do not match the parameters".into()));
                }
                state.t = o.t;
                state.m = m;
                state.v = v;
                Some(state)
            }
        };
        Ok(Self { task: doc.task, train_channel, arch, params, optimizer, iteration: doc.iteration })
    }
}
