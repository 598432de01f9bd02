//! Double-integrator swarm, the centralized flocking controller it is taught
//! to imitate, and closed-loop evaluation of learned controllers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_realization, ChannelModel};
use crate::data::{Dataset, Sample, Splits, Target};
use crate::error::{Error, Result};
use crate::graphs::{generate_geometric, is_connected, GraphShiftOperator, GraphSignal};
use crate::model::{forward, AirGnnParameters, Architecture};
use crate::rng::substream;
use crate::training::monitor::McEstimate;

use super::diffusion::mean_power;

pub const FEATURES: usize = 6;
pub const ACTIONS: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlockingConfig {
    pub n: usize,
    pub comm_radius: f64,
    /// Cutoff of the collision potential.
    pub potential_cutoff: f64,
    /// Elementwise acceleration bound.
    pub u_max: f64,
    pub dt: f64,
    /// Initial velocities are uniform in `[-v, v]^2`.
    pub max_init_speed: f64,
    /// Target mean degree used to size the initial disc.
    pub mean_degree: f64,
    pub min_distance: f64,
    pub max_attempts: usize,
    pub steps: usize,
    pub trajectories: usize,
    pub splits: (usize, usize, usize),
    /// Scale each communication graph by its largest eigenvalue.
    pub normalize_gso: bool,
}

impl Default for FlockingConfig {
    fn default() -> Self {
        Self {
            n: 50,
            comm_radius: 1.5,
            potential_cutoff: 1.0,
            u_max: 10.0,
            dt: 0.01,
            max_init_speed: 3.0,
            mean_degree: 6.0,
            min_distance: 0.1,
            max_attempts: 1000,
            steps: 100,
            trajectories: 450,
            splits: (400, 25, 25),
            normalize_gso: true,
        }
    }
}

impl FlockingConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("comm_radius", self.comm_radius),
            ("potential_cutoff", self.potential_cutoff),
            ("u_max", self.u_max),
            ("dt", self.dt),
            ("mean_degree", self.mean_degree),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.max_init_speed >= 0.0) || !(self.min_distance >= 0.0) {
            return Err(Error::InvalidArgument("speeds and distances must be nonnegative".into()));
        }
        if self.n < 2 || self.steps == 0 || self.max_attempts == 0 {
            return Err(Error::InvalidArgument("need n >= 2, steps >= 1 and max_attempts >= 1".into()));
        }
        let (a, b, c) = self.splits;
        if a + b + c != self.trajectories {
            return Err(Error::InvalidArgument(format!(
                "split sizes {:?} do not add up to {} trajectories",
                self.splits, self.trajectories
            )));
        }
        Ok(())
    }

    /// Radius of the disc holding the initial positions, sized so a uniform
    /// placement gives roughly `mean_degree` neighbors.
    pub fn disc_radius(&self) -> f64 {
        self.comm_radius * ((self.n as f64 - 1.0) / self.mean_degree).sqrt().max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwarmState {
    pub positions: Vec<[f64; 2]>,
    pub velocities: Vec<[f64; 2]>,
    pub time: usize,
}

impl SwarmState {
    pub fn new(positions: Vec<[f64; 2]>, velocities: Vec<[f64; 2]>) -> Result<Self> {
        if positions.len() != velocities.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} positions, {} velocities",
                positions.len(),
                velocities.len()
            )));
        }
        if positions.iter().chain(&velocities).flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("swarm state"));
        }
        Ok(Self { positions, velocities, time: 0 })
    }

    pub fn n(&self) -> usize {
        self.positions.len()
    }

    pub fn min_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.n() {
            for j in (i + 1)..self.n() {
                best = best.min(dist(self.positions[i], self.positions[j]));
            }
        }
        best
    }

    /// `(1/n) sum_i |v_i - v_mean|^2`.
    pub fn velocity_variance(&self) -> f64 {
        let n = self.n() as f64;
        let mut mean = [0.0; 2];
        for v in &self.velocities {
            mean[0] += v[0];
            mean[1] += v[1];
        }
        mean[0] /= n;
        mean[1] /= n;
        self.velocities
            .iter()
            .map(|v| (v[0] - mean[0]).powi(2) + (v[1] - mean[1]).powi(2))
            .sum::<f64>()
            / n
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Collision potential `1/r^2 + ln r^2` below the cutoff, constant above.
pub fn collision_potential(r: f64, cutoff: f64) -> f64 {
    let r = r.min(cutoff);
    1.0 / (r * r) + (r * r).ln()
}

/// Centralized flocking control: velocity consensus over the whole swarm plus
/// the negative potential gradient, clamped elementwise to `u_max`.
pub fn oracle_controller(state: &SwarmState, cutoff: f64, u_max: f64) -> Result<Vec<[f64; 2]>> {
    let n = state.n();
    let mut u = vec![[0.0; 2]; n];
    for i in 0..n {
        let (ri, vi) = (state.positions[i], state.velocities[i]);
        let mut acc = [0.0; 2];
        for j in 0..n {
            if j == i {
                continue;
            }
            let (rj, vj) = (state.positions[j], state.velocities[j]);
            acc[0] -= vi[0] - vj[0];
            acc[1] -= vi[1] - vj[1];
            let d = [ri[0] - rj[0], ri[1] - rj[1]];
            let r2 = d[0] * d[0] + d[1] * d[1];
            if r2 == 0.0 {
                return Err(Error::CoincidentRobots(i, j));
            }
            if r2 < cutoff * cutoff {
                // grad_{r_i} U = (2/r^2 - 2/r^4) (r_i - r_j)
                let c = 2.0 / r2 - 2.0 / (r2 * r2);
                acc[0] -= c * d[0];
                acc[1] -= c * d[1];
            }
        }
        u[i] = [acc[0].clamp(-u_max, u_max), acc[1].clamp(-u_max, u_max)];
    }
    Ok(u)
}

/// Explicit Euler step of the double integrator; positions move with the
/// velocity from before the update.
pub fn swarm_step(state: &SwarmState, actions: &[[f64; 2]], dt: f64, u_max: f64) -> Result<SwarmState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if actions.len() != state.n() {
        return Err(Error::DimensionMismatch(format!("{} actions for {} robots", actions.len(), state.n())));
    }
    if actions.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("actions"));
    }
    let mut next = state.clone();
    for i in 0..state.n() {
        for d in 0..2 {
            let a = actions[i][d].clamp(-u_max, u_max);
            next.positions[i][d] += dt * state.velocities[i][d];
            next.velocities[i][d] += dt * a;
        }
    }
    next.time += 1;
    Ok(next)
}

/// Local features `[sum (v_i - v_j); sum (r_i - r_j)/|r_ij|^4; sum (r_i - r_j)/|r_ij|^2]`
/// over the graph neighbors of each robot.
pub fn flock_features(state: &SwarmState, graph: &GraphShiftOperator) -> Result<GraphSignal> {
    let n = state.n();
    if graph.n() != n {
        return Err(Error::DimensionMismatch(format!("graph has {} nodes, swarm {n}", graph.n())));
    }
    let mut x = GraphSignal::zeros(n, FEATURES);
    for i in 0..n {
        let (ri, vi) = (state.positions[i], state.velocities[i]);
        let row = x.node_mut(i);
        for (j, _) in graph.row(i) {
            if j == i {
                continue;
            }
            let (rj, vj) = (state.positions[j], state.velocities[j]);
            let d = [ri[0] - rj[0], ri[1] - rj[1]];
            let r2 = d[0] * d[0] + d[1] * d[1];
            if r2 == 0.0 {
                return Err(Error::CoincidentRobots(i, j));
            }
            let r4 = r2 * r2;
            row[0] += vi[0] - vj[0];
            row[1] += vi[1] - vj[1];
            row[2] += d[0] / r4;
            row[3] += d[1] / r4;
            row[4] += d[0] / r2;
            row[5] += d[1] / r2;
        }
    }
    Ok(x)
}

/// Disk graph over the current positions, and the operator the network
/// shifts with (normalized if configured and the graph has edges).
pub fn communication_graph(state: &SwarmState, cfg: &FlockingConfig) -> Result<(GraphShiftOperator, GraphShiftOperator)> {
    let adjacency = generate_geometric(&state.positions, cfg.comm_radius)?;
    let gso = if cfg.normalize_gso && adjacency.num_edges() > 0 {
        adjacency.normalize_by_spectral_radius()?
    } else {
        adjacency.clone()
    };
    Ok((adjacency, gso))
}

/// Time average of the per-step velocity variance.
pub fn velocity_variance_cost(states: &[SwarmState]) -> f64 {
    if states.is_empty() {
        return 0.0;
    }
    states.iter().map(SwarmState::velocity_variance).sum::<f64>() / states.len() as f64
}

fn draw_swarm<R: Rng + ?Sized>(cfg: &FlockingConfig, rng: &mut R) -> Result<SwarmState> {
    let radius = cfg.disc_radius();
    let mut positions = Vec::with_capacity(cfg.n);
    let mut velocities = Vec::with_capacity(cfg.n);
    for _ in 0..cfg.n {
        let rho = radius * rng.random::<f64>().sqrt();
        let phi = std::f64::consts::TAU * rng.random::<f64>();
        positions.push([rho * phi.cos(), rho * phi.sin()]);
    }
    let v = cfg.max_init_speed;
    for _ in 0..cfg.n {
        velocities.push([rng.random_range(-v..=v), rng.random_range(-v..=v)]);
    }
    SwarmState::new(positions, velocities)
}

fn admissible(state: &SwarmState, cfg: &FlockingConfig) -> Result<bool> {
    if state.min_distance() < cfg.min_distance {
        return Ok(false);
    }
    Ok(is_connected(&generate_geometric(&state.positions, cfg.comm_radius)?))
}

/// Initial swarm, redrawn until connected and spread out.
pub fn initial_swarm<R: Rng + ?Sized>(cfg: &FlockingConfig, rng: &mut R) -> Result<SwarmState> {
    for _ in 0..cfg.max_attempts {
        let state = draw_swarm(cfg, rng)?;
        if admissible(&state, cfg)? {
            return Ok(state);
        }
    }
    Err(Error::ResamplingExhausted(cfg.max_attempts))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlockStep {
    pub state: SwarmState,
    /// Operator the network shifts with at this step.
    pub graph: GraphShiftOperator,
    pub features: GraphSignal,
    pub action: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlockTrajectory {
    pub steps: Vec<FlockStep>,
}

impl FlockTrajectory {
    pub fn states(&self) -> Vec<SwarmState> {
        self.steps.iter().map(|s| s.state.clone()).collect()
    }

    /// Rebuilds graphs, features and oracle actions along `states`.
    pub fn from_states(states: Vec<SwarmState>, cfg: &FlockingConfig) -> Result<Self> {
        let mut steps = Vec::with_capacity(states.len());
        for state in states {
            let (adjacency, graph) = communication_graph(&state, cfg)?;
            let features = flock_features(&state, &adjacency)?;
            let action = oracle_controller(&state, cfg.potential_cutoff, cfg.u_max)?;
            steps.push(FlockStep { state, graph, features, action });
        }
        Ok(Self { steps })
    }
}

/// Oracle rollout of `cfg.steps` steps; `None` if a communication graph
/// along the way disconnects or two robots come closer than
/// `cfg.min_distance`.
fn oracle_rollout(init: SwarmState, cfg: &FlockingConfig) -> Result<Option<FlockTrajectory>> {
    let mut steps = Vec::with_capacity(cfg.steps);
    let mut state = init;
    for t in 0..cfg.steps {
        if state.min_distance() < cfg.min_distance {
            return Ok(None);
        }
        let (adjacency, graph) = communication_graph(&state, cfg)?;
        if !is_connected(&adjacency) {
            return Ok(None);
        }
        let features = flock_features(&state, &adjacency)?;
        let action = oracle_controller(&state, cfg.potential_cutoff, cfg.u_max)?;
        let next = if t + 1 < cfg.steps { Some(swarm_step(&state, &action, cfg.dt, cfg.u_max)?) } else { None };
        steps.push(FlockStep { state, graph, features, action });
        match next {
            Some(s) => state = s,
            None => break,
        }
    }
    Ok(Some(FlockTrajectory { steps }))
}

/// One oracle trajectory from its own substream. Initial draws that are
/// inadmissible, or whose rollout loses connectivity or spacing, are redrawn.
pub fn generate_trajectory(cfg: &FlockingConfig, seed: u64, index: u64) -> Result<FlockTrajectory> {
    let mut rng = substream(seed, "trajectory", &[index]);
    for _ in 0..cfg.max_attempts {
        let state = draw_swarm(cfg, &mut rng)?;
        if !admissible(&state, cfg)? {
            continue;
        }
        if let Some(traj) = oracle_rollout(state, cfg)? {
            return Ok(traj);
        }
    }
    Err(Error::ResamplingExhausted(cfg.max_attempts))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlockDataset {
    pub config: FlockingConfig,
    pub trajectories: Vec<FlockTrajectory>,
    /// Trajectory indices.
    pub splits: Splits,
    /// Mean squared feature value over the training trajectories.
    pub reference_power: f64,
}

impl FlockDataset {
    pub fn from_trajectories(config: FlockingConfig, trajectories: Vec<FlockTrajectory>) -> Result<Self> {
        config.validate()?;
        if trajectories.len() != config.trajectories {
            return Err(Error::DimensionMismatch(format!(
                "{} trajectories, config expects {}",
                trajectories.len(),
                config.trajectories
            )));
        }
        let (a, b, c) = config.splits;
        let splits = Splits::contiguous(a, b, c);
        let reference_power =
            mean_power(splits.train.iter().flat_map(|&k| trajectories[k].steps.iter().map(|s| &s.features)));
        Ok(Self { config, trajectories, splits, reference_power })
    }

    /// One sample per time step; sample splits follow the trajectory splits.
    pub fn to_dataset(&self) -> Dataset {
        let mut graphs = Vec::new();
        let mut samples = Vec::new();
        let mut offsets = Vec::with_capacity(self.trajectories.len());
        for traj in &self.trajectories {
            offsets.push(samples.len());
            for step in &traj.steps {
                let target = GraphSignal::from_rows(
                    step.action.len(),
                    ACTIONS,
                    step.action.iter().flatten().copied().collect(),
                )
                .expect("oracle actions are finite");
                samples.push(Sample { graph: graphs.len(), x: step.features.clone(), target: Target::Signal(target) });
                graphs.push(step.graph.clone());
            }
        }
        let expand = |ks: &[usize]| -> Vec<usize> {
            ks.iter()
                .flat_map(|&k| offsets[k]..offsets[k] + self.trajectories[k].steps.len())
                .collect()
        };
        let splits = Splits {
            train: expand(&self.splits.train),
            val: expand(&self.splits.val),
            test: expand(&self.splits.test),
        };
        Dataset { graphs, samples, splits }
    }
}

/// Oracle imitation dataset; trajectory `k` draws from its own substream.
pub fn build_flock_dataset(cfg: &FlockingConfig, seed: u64) -> Result<FlockDataset> {
    cfg.validate()?;
    let trajectories =
        (0..cfg.trajectories).map(|k| generate_trajectory(cfg, seed, k as u64)).collect::<Result<Vec<_>>>()?;
    FlockDataset::from_trajectories(cfg.clone(), trajectories)
}

/// Who picks the accelerations during a closed-loop rollout.
#[derive(Debug, Clone, Copy)]
pub enum Controller<'a> {
    /// Learned network, exchanging over `channel` at every step.
    AirGnn { arch: &'a Architecture, params: &'a AirGnnParameters, channel: &'a ChannelModel },
    Oracle,
    /// Uniform in `[-u_max, u_max]^2`.
    Random,
    Zero,
}

impl Controller<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Self::AirGnn { .. } => "airgnn",
            Self::Oracle => "oracle",
            Self::Random => "random",
            Self::Zero => "zero",
        }
    }

    fn act(&self, state: &SwarmState, cfg: &FlockingConfig, seed: u64, label: &str, key: &[u64]) -> Result<Vec<[f64; 2]>> {
        match self {
            Self::AirGnn { arch, params, channel } => {
                let (adjacency, gso) = communication_graph(state, cfg)?;
                let x = flock_features(state, &adjacency)?;
                let real = sample_realization(&gso, &arch.layers, channel, seed, label, key);
                let out = forward(&gso, &x, arch, params, &real)?.output;
                if out.features() != ACTIONS {
                    return Err(Error::DimensionMismatch(format!("controller emits {} outputs", out.features())));
                }
                Ok((0..state.n()).map(|i| [out.get(i, 0), out.get(i, 1)]).collect())
            }
            Self::Oracle => oracle_controller(state, cfg.potential_cutoff, cfg.u_max),
            Self::Random => {
                let mut rng = substream(seed, label, key);
                let u = cfg.u_max;
                Ok((0..state.n()).map(|_| [rng.random_range(-u..=u), rng.random_range(-u..=u)]).collect())
            }
            Self::Zero => Ok(vec![[0.0; 2]; state.n()]),
        }
    }
}

/// States visited over `cfg.steps` control steps starting at `init`; step
/// `t` of episode `e` draws its randomness from `(label, [e, t])`.
pub fn rollout(
    controller: &Controller<'_>,
    init: SwarmState,
    cfg: &FlockingConfig,
    seed: u64,
    label: &str,
    episode: u64,
) -> Result<Vec<SwarmState>> {
    let mut states = Vec::with_capacity(cfg.steps);
    let mut state = init;
    for t in 0..cfg.steps {
        let u = controller.act(&state, cfg, seed, label, &[episode, t as u64])?;
        let next = swarm_step(&state, &u, cfg.dt, cfg.u_max)?;
        states.push(std::mem::replace(&mut state, next));
    }
    Ok(states)
}

/// Velocity-variance cost over `episodes` rollouts from fresh initial
/// swarms. Episode `e` starts from substream `("episode", [e])`, so
/// controllers evaluated with the same seed face the same swarms.
pub fn closed_loop_eval(
    controller: &Controller<'_>,
    cfg: &FlockingConfig,
    episodes: usize,
    seed: u64,
    label: &str,
) -> Result<McEstimate> {
    if episodes == 0 {
        return Err(Error::InvalidArgument("need at least one episode".into()));
    }
    let costs = episode_costs(controller, cfg, episodes, seed, label)?;
    let mean = costs.iter().sum::<f64>() / episodes as f64;
    let stderr = if episodes > 1 {
        let var = costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (episodes - 1) as f64;
        (var / episodes as f64).sqrt()
    } else {
        f64::NAN
    };
    Ok(McEstimate { mean, stderr, draws: episodes })
}

/// Per-episode costs behind [`closed_loop_eval`].
pub fn episode_costs(
    controller: &Controller<'_>,
    cfg: &FlockingConfig,
    episodes: usize,
    seed: u64,
    label: &str,
) -> Result<Vec<f64>> {
    (0..episodes)
        .map(|e| {
            let init = initial_swarm(cfg, &mut substream(seed, "episode", &[e as u64]))?;
            Ok(velocity_variance_cost(&rollout(controller, init, cfg, seed, label, e as u64)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LayerShape, Nonlinearity};

    fn two(r0: [f64; 2], r1: [f64; 2], v0: [f64; 2], v1: [f64; 2]) -> SwarmState {
        SwarmState::new(vec![r0, r1], vec![v0, v1]).unwrap()
    }

    #[test]
    fn consensus_fixed_point() {
        let s = SwarmState::new(vec![[0.0, 0.0], [2.0, 0.0], [0.0, 3.0]], vec![[1.0, -1.0]; 3]).unwrap();
        assert_eq!(oracle_controller(&s, 1.0, 10.0).unwrap(), vec![[0.0, 0.0]; 3]);
    }

    #[test]
    fn close_pair_repels_symmetrically() {
        let s = two([0.0, 0.0], [0.5, 0.0], [0.3, 0.1], [0.3, 0.1]);
        let u = oracle_controller(&s, 1.0, 100.0).unwrap();
        assert!(u[0][0] < 0.0 && u[1][0] > 0.0);
        assert_eq!(u[0][0], -u[1][0]);
        assert_eq!(u[0][1], 0.0);
        assert_eq!(u[1][1], 0.0);
    }

    #[test]
    fn oracle_is_clamped_and_rejects_coincidence() {
        let s = two([0.0, 0.0], [0.05, 0.0], [0.0; 2], [0.0; 2]);
        let u = oracle_controller(&s, 1.0, 10.0).unwrap();
        assert_eq!(u[0][0], -10.0);
        let c = two([1.0, 1.0], [1.0, 1.0], [0.0; 2], [0.0; 2]);
        assert!(matches!(oracle_controller(&c, 1.0, 10.0), Err(Error::CoincidentRobots(0, 1))));
    }

    #[test]
    fn euler_arithmetic() {
        let s = SwarmState::new(vec![[0.0, 0.0]], vec![[0.0, 0.0]]).unwrap();
        let s1 = swarm_step(&s, &[[1.0, 0.0]], 0.1, 10.0).unwrap();
        assert_eq!(s1.velocities[0], [0.1, 0.0]);
        assert_eq!(s1.positions[0], [0.0, 0.0]);
        let s2 = swarm_step(&s1, &[[1.0, 0.0]], 0.1, 10.0).unwrap();
        assert!((s2.positions[0][0] - 0.01).abs() < 1e-15);
        assert_eq!(s2.time, 2);
        assert!(swarm_step(&s, &[[f64::NAN, 0.0]], 0.1, 10.0).is_err());
        assert!(swarm_step(&s, &[[0.0, 0.0]], 0.0, 10.0).is_err());
    }

    #[test]
    fn uniform_motion_without_control() {
        let s = two([0.0, 0.0], [1.0, 0.0], [1.0, 2.0], [-1.0, 0.5]);
        let mut cur = s.clone();
        for _ in 0..10 {
            cur = swarm_step(&cur, &[[0.0; 2]; 2], 0.1, 10.0).unwrap();
        }
        assert_eq!(cur.velocities, s.velocities);
        assert!((cur.positions[0][1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn feature_edge_cases() {
        let s = two([0.0, 0.0], [5.0, 0.0], [1.0, 0.0], [0.0, 1.0]);
        let g = generate_geometric(&s.positions, 1.5).unwrap();
        assert!(flock_features(&s, &g).unwrap().as_slice().iter().all(|&v| v == 0.0));
        let s = two([0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [1.0, 1.0]);
        let g = generate_geometric(&s.positions, 1.5).unwrap();
        let x = flock_features(&s, &g).unwrap();
        assert_eq!(&x.node(0)[..2], &[0.0, 0.0]);
        assert_eq!(&x.node(0)[2..], &[-1.0, 0.0, -1.0, 0.0]);
    }

    #[test]
    fn variance_cost_hand_values() {
        let s = two([0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [-1.0, 0.0]);
        assert_eq!(velocity_variance_cost(&[s.clone(), s.clone()]), 1.0);
        let mut shifted = s.clone();
        for v in &mut shifted.velocities {
            v[0] += 3.0;
            v[1] -= 2.0;
        }
        assert_eq!(velocity_variance_cost(&[shifted]), 1.0);
        let same = two([0.0, 0.0], [1.0, 0.0], [0.4, 0.2], [0.4, 0.2]);
        assert_eq!(velocity_variance_cost(&[same]), 0.0);
    }

    fn small_cfg() -> FlockingConfig {
        FlockingConfig { n: 8, trajectories: 3, splits: (1, 1, 1), steps: 20, ..Default::default() }
    }

    #[test]
    fn dataset_graphs_are_connected_and_symmetric() {
        let cfg = small_cfg();
        let d = build_flock_dataset(&cfg, 4).unwrap();
        assert_eq!(d.trajectories.len(), 3);
        for t in &d.trajectories {
            assert_eq!(t.steps.len(), 20);
            for s in &t.steps {
                assert!(is_connected(&s.graph));
                assert!(s.graph.is_symmetric());
                assert!(s.state.min_distance() >= cfg.min_distance);
            }
        }
        let ds = d.to_dataset();
        assert_eq!(ds.samples.len(), 60);
        assert_eq!(ds.splits.val, (20..40).collect::<Vec<_>>());
        assert_eq!(d, build_flock_dataset(&cfg, 4).unwrap());
    }

    #[test]
    fn two_robot_smoke() {
        let cfg = FlockingConfig { n: 2, trajectories: 1, splits: (1, 0, 0), steps: 10, ..Default::default() };
        let d = build_flock_dataset(&cfg, 0).unwrap();
        assert_eq!(d.trajectories[0].steps[0].features.n(), 2);
    }

    #[test]
    fn zero_network_leaves_variance_constant() {
        let cfg = FlockingConfig { n: 6, steps: 15, ..Default::default() };
        let arch = Architecture::new(vec![LayerShape::new(6, 2, 2)], vec![Nonlinearity::Identity]).unwrap();
        let params = AirGnnParameters::zeros(&arch.layers);
        let channel = ChannelModel::ideal();
        let ctl = Controller::AirGnn { arch: &arch, params: &params, channel: &channel };
        let init = initial_swarm(&cfg, &mut substream(1, "episode", &[0])).unwrap();
        let v0 = init.velocity_variance();
        let c = velocity_variance_cost(&rollout(&ctl, init, &cfg, 1, "eval", 0).unwrap());
        assert!((c - v0).abs() < 1e-12);
    }

    #[test]
    fn oracle_beats_random_and_eval_is_deterministic() {
        let cfg = FlockingConfig { n: 6, steps: 50, ..Default::default() };
        let o = closed_loop_eval(&Controller::Oracle, &cfg, 3, 5, "eval").unwrap();
        let r = closed_loop_eval(&Controller::Random, &cfg, 3, 5, "eval").unwrap();
        assert!(o.mean < r.mean);
        assert_eq!(o, closed_loop_eval(&Controller::Oracle, &cfg, 3, 5, "eval").unwrap());
    }
}
