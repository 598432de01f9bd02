use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step size as a function of the zero-based iteration `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSchedule {
    Constant(f64),
    /// `gamma / (t + 1)`
    InverseT(f64),
    /// `gamma / sqrt(t + 1)`
    InverseSqrtT(f64),
}

impl StepSchedule {
    pub fn at(&self, t: u64) -> f64 {
        match *self {
            Self::Constant(g) => g,
            Self::InverseT(g) => g / (t as f64 + 1.0),
            Self::InverseSqrtT(g) => g / (t as f64 + 1.0).sqrt(),
        }
    }

    pub fn base(&self) -> f64 {
        match *self {
            Self::Constant(g) | Self::InverseT(g) | Self::InverseSqrtT(g) => g,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        Self::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub schedule: StepSchedule,
    /// Number of updates applied so far.
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, schedule: StepSchedule, num_params: usize) -> Result<Self> {
        let g = schedule.base();
        if !(g > 0.0) || !g.is_finite() {
            return Err(Error::InvalidArgument(format!("step size must be positive, got {g}")));
        }
        let moments = if let OptimizerKind::Adam { beta1, beta2, eps } = kind {
            for b in [beta1, beta2] {
                if !(0.0..1.0).contains(&b) {
                    return Err(Error::InvalidArgument(format!("decay factor {b} outside [0, 1)")));
                }
            }
            if !(eps > 0.0) {
                return Err(Error::InvalidArgument(format!("adam epsilon must be positive, got {eps}")));
            }
            num_params
        } else {
            0
        };
        Ok(Self { kind, schedule, t: 0, m: vec![0.0; moments], v: vec![0.0; moments] })
    }

    pub fn step_size(&self) -> f64 {
        self.schedule.at(self.t)
    }

    /// Applies one update in place.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        assert_eq!(params.len(), grad.len());
        match self.kind {
            OptimizerKind::Sgd => {
                let gamma = self.step_size();
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= gamma * g;
                }
                self.t += 1;
            }
            OptimizerKind::Adam { .. } => adam_step(self, params, grad),
        }
    }
}

/// ADAM update with bias correction.
pub fn adam_step(state: &mut OptimizerState, params: &mut [f64], grad: &[f64]) {
    let OptimizerKind::Adam { beta1, beta2, eps } = state.kind else {
        panic!("adam_step called on a non-adam optimizer");
    };
    let gamma = state.step_size();
    state.t += 1;
    let c1 = 1.0 - beta1.powi(state.t as i32);
    let c2 = 1.0 - beta2.powi(state.t as i32);
    params
        .iter_mut()
        .zip(grad)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
        .for_each(|((p, &g), (m, v))| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= gamma * (*m / c1) / ((*v / c2).sqrt() + eps);
        });
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Index-loop formulation of the same recurrences.
    fn adam_loop(m: &mut [f64], v: &mut [f64], p: &mut [f64], g: &[f64], t: u64, gamma: f64) {
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let mh = m[i] / (1.0 - b1.powi(t as i32));
            let vh = v[i] / (1.0 - b2.powi(t as i32));
            p[i] -= gamma * mh / (vh.sqrt() + eps);
        }
    }

    #[test]
    fn zero_gradient_keeps_parameters_and_decays_moments() {
        let mut fresh = OptimizerState::new(OptimizerKind::adam(), StepSchedule::Constant(0.1), 2).unwrap();
        let mut p = vec![1.0, 2.0];
        fresh.step(&mut p, &[0.0, 0.0]);
        assert_eq!(p, vec![1.0, 2.0]);

        let mut st = OptimizerState::new(OptimizerKind::adam(), StepSchedule::Constant(0.1), 2).unwrap();
        st.m = vec![0.5, -0.5];
        st.v = vec![0.25, 0.25];
        st.t = 3;
        st.step(&mut [0.0, 0.0], &[0.0, 0.0]);
        assert!((st.m[0] - 0.45).abs() < 1e-15);
        assert!((st.v[0] - 0.25 * 0.999).abs() < 1e-15);
    }

    #[test]
    fn first_adam_step_by_hand() {
        // After one step, m_hat = g and v_hat = g^2, so the move is
        // gamma * g / (|g| + eps).
        let g = 0.37;
        let mut st = OptimizerState::new(OptimizerKind::adam(), StepSchedule::Constant(0.01), 1).unwrap();
        let mut p = vec![1.0];
        st.step(&mut p, &[g]);
        let expect = 1.0 - 0.01 * g / (g.abs() + 1e-8);
        assert!((p[0] - expect).abs() < 1e-15, "{} vs {}", p[0], expect);
        // Second step with a different gradient, by hand.
        let g2 = -0.2f64;
        let m = 0.9 * 0.1 * g + 0.1 * g2;
        let v = 0.999 * 0.001 * g * g + 0.001 * g2 * g2;
        let mh = m / (1.0 - 0.81);
        let vh = v / (1.0 - 0.999f64.powi(2));
        let expect2 = p[0] - 0.01 * mh / (vh.sqrt() + 1e-8);
        st.step(&mut p, &[g2]);
        assert!((p[0] - expect2).abs() < 1e-15);
    }

    #[test]
    fn vectorized_and_loop_agree() {
        let n = 17;
        let mut st = OptimizerState::new(OptimizerKind::adam(), StepSchedule::Constant(1e-3), n).unwrap();
        let mut p1: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut p2 = p1.clone();
        let (mut m, mut v) = (vec![0.0; n], vec![0.0; n]);
        for t in 1..=50u64 {
            let g: Vec<f64> = (0..n).map(|i| ((i as f64 + 1.0) * t as f64 * 0.11).cos()).collect();
            st.step(&mut p1, &g);
            adam_loop(&mut m, &mut v, &mut p2, &g, t, 1e-3);
        }
        for (a, b) in p1.iter().zip(&p2) {
            assert!((a - b).abs() <= 1e-14);
        }
    }

    #[test]
    fn schedules() {
        assert_eq!(StepSchedule::Constant(0.5).at(9), 0.5);
        assert_eq!(StepSchedule::InverseT(1.0).at(3), 0.25);
        assert_eq!(StepSchedule::InverseSqrtT(1.0).at(3), 0.5);
    }

    #[test]
    fn sgd_update() {
        let mut st = OptimizerState::new(OptimizerKind::Sgd, StepSchedule::Constant(0.5), 2).unwrap();
        let mut p = vec![1.0, 1.0];
        st.step(&mut p, &[2.0, -2.0]);
        assert_eq!(p, vec![0.0, 2.0]);
        assert_eq!(st.t, 1);
    }

    #[test]
    fn invalid_settings() {
        assert!(OptimizerState::new(OptimizerKind::Sgd, StepSchedule::Constant(0.0), 1).is_err());
        let bad = OptimizerKind::Adam { beta1: 1.0, beta2: 0.999, eps: 1e-8 };
        assert!(OptimizerState::new(bad, StepSchedule::Constant(0.1), 1).is_err());
    }
}
