use serde::{Deserialize, Serialize};

use crate::data::Target;
use crate::error::{Error, Result};
use crate::graphs::GraphSignal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Softmax cross-entropy on node-averaged logits.
    CrossEntropyMeanPool,
    Mse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Readout {
    MeanOverNodes,
    PerNode,
}

/// Per-sample loss and the readout it is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Objective {
    pub loss: LossKind,
    pub readout: Readout,
}

impl Objective {
    pub fn new(loss: LossKind, readout: Readout) -> Result<Self> {
        if loss == LossKind::CrossEntropyMeanPool && readout != Readout::MeanOverNodes {
            return Err(Error::InvalidArgument("cross-entropy needs the mean-over-nodes readout".into()));
        }
        Ok(Self { loss, readout })
    }

    pub fn cross_entropy() -> Self {
        Self { loss: LossKind::CrossEntropyMeanPool, readout: Readout::MeanOverNodes }
    }

    pub fn mse() -> Self {
        Self { loss: LossKind::Mse, readout: Readout::PerNode }
    }

    /// Node-averaged output, one value per feature.
    pub fn pooled(output: &GraphSignal) -> Vec<f64> {
        let n = output.n() as f64;
        let mut v = vec![0.0; output.features()];
        for i in 0..output.n() {
            for (a, b) in v.iter_mut().zip(output.node(i)) {
                *a += b;
            }
        }
        v.iter_mut().for_each(|a| *a /= n);
        v
    }

    pub fn predict_class(output: &GraphSignal) -> usize {
        let logits = Self::pooled(output);
        let mut best = 0;
        for (i, &v) in logits.iter().enumerate() {
            if v > logits[best] {
                best = i;
            }
        }
        best
    }

    pub fn loss(&self, output: &GraphSignal, target: &Target) -> Result<f64> {
        self.eval(output, target, false).map(|(l, _)| l)
    }

    /// Loss and its gradient with respect to the network output.
    pub fn loss_and_grad(&self, output: &GraphSignal, target: &Target) -> Result<(f64, GraphSignal)> {
        self.eval(output, target, true)
            .map(|(l, g)| (l, g.expect("gradient requested")))
    }

    fn eval(&self, output: &GraphSignal, target: &Target, want_grad: bool) -> Result<(f64, Option<GraphSignal>)> {
        let n = output.n();
        let fw = output.features();
        match (self.loss, self.readout, target) {
            (LossKind::CrossEntropyMeanPool, Readout::MeanOverNodes, Target::Class(c)) => {
                if *c >= fw {
                    return Err(Error::DimensionMismatch(format!("class {c} but only {fw} output features")));
                }
                let logits = Self::pooled(output);
                let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = logits.iter().map(|l| (l - m).exp()).sum();
                let lse = m + z.ln();
                let loss = lse - logits[*c];
                let grad = want_grad.then(|| {
                    let mut d = vec![0.0; fw];
                    for (f, l) in logits.iter().enumerate() {
                        d[f] = ((l - lse).exp() - if f == *c { 1.0 } else { 0.0 }) / n as f64;
                    }
                    let mut g = GraphSignal::zeros(n, fw);
                    for i in 0..n {
                        g.node_mut(i).copy_from_slice(&d);
                    }
                    g
                });
                Ok((loss, grad))
            }
            (LossKind::Mse, Readout::PerNode, Target::Signal(t)) => {
                if t.n() != n || t.features() != fw {
                    return Err(Error::DimensionMismatch("target shape differs from output".into()));
                }
                let count = (n * fw) as f64;
                let loss = output
                    .as_slice()
                    .iter()
                    .zip(t.as_slice())
                    .map(|(y, t)| (y - t) * (y - t))
                    .sum::<f64>()
                    / count;
                // non-finite outputs pass through so the trainer can report divergence
                let grad = want_grad.then(|| {
                    let mut g = GraphSignal::zeros(n, fw);
                    for ((d, y), t) in g.as_mut_slice().iter_mut().zip(output.as_slice()).zip(t.as_slice()) {
                        *d = 2.0 * (y - t) / count;
                    }
                    g
                });
                Ok((loss, grad))
            }
            (LossKind::Mse, Readout::MeanOverNodes, Target::Signal(t)) => {
                if t.n() != 1 || t.features() != fw {
                    return Err(Error::DimensionMismatch("pooled target must be 1 x F".into()));
                }
                let pooled = Self::pooled(output);
                let loss = pooled
                    .iter()
                    .zip(t.as_slice())
                    .map(|(y, t)| (y - t) * (y - t))
                    .sum::<f64>()
                    / fw as f64;
                let grad = want_grad.then(|| {
                    let d: Vec<f64> = pooled
                        .iter()
                        .zip(t.as_slice())
                        .map(|(y, t)| 2.0 * (y - t) / (fw as f64 * n as f64))
                        .collect();
                    let mut g = GraphSignal::zeros(n, fw);
                    for i in 0..n {
                        g.node_mut(i).copy_from_slice(&d);
                    }
                    g
                });
                Ok((loss, grad))
            }
            _ => Err(Error::InvalidArgument("target kind does not match the objective".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_zero_at_target() {
        let y = GraphSignal::from_rows(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let l = Objective::mse().loss(&y, &Target::Signal(y.clone())).unwrap();
        assert_eq!(l, 0.0);
    }

    #[test]
    fn uniform_logits_give_log_classes() {
        let y = GraphSignal::from_rows(3, 10, vec![0.7; 30]).unwrap();
        let l = Objective::cross_entropy().loss(&y, &Target::Class(4)).unwrap();
        assert!((l - 10f64.ln()).abs() < 1e-12);
        assert!((l - 2.302_585_093).abs() < 1e-9);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let y = GraphSignal::from_rows(3, 3, vec![0.1, -0.4, 0.9, 1.2, 0.3, -0.8, 0.0, 0.5, 0.2]).unwrap();
        let t = GraphSignal::from_rows(3, 3, vec![0.0, 1.0, 0.3, -0.2, 0.1, 0.4, 0.9, -0.5, 0.0]).unwrap();
        let pooled_t = GraphSignal::from_rows(1, 3, vec![0.2, -0.1, 0.6]).unwrap();
        let cases = [
            (Objective::cross_entropy(), Target::Class(2)),
            (Objective::mse(), Target::Signal(t)),
            (Objective::new(LossKind::Mse, Readout::MeanOverNodes).unwrap(), Target::Signal(pooled_t)),
        ];
        for (obj, target) in cases {
            let (_, g) = obj.loss_and_grad(&y, &target).unwrap();
            for idx in 0..9 {
                let mut p = y.clone();
                p.as_mut_slice()[idx] += 1e-6;
                let mut m = y.clone();
                m.as_mut_slice()[idx] -= 1e-6;
                let fd = (obj.loss(&p, &target).unwrap() - obj.loss(&m, &target).unwrap()) / 2e-6;
                assert!((fd - g.as_slice()[idx]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn mismatched_targets_are_rejected() {
        let y = GraphSignal::zeros(2, 3);
        assert!(Objective::cross_entropy().loss(&y, &Target::Class(3)).is_err());
        assert!(Objective::mse().loss(&y, &Target::Class(0)).is_err());
        assert!(Objective::new(LossKind::CrossEntropyMeanPool, Readout::PerNode).is_err());
    }
}
