//! Flat `key = value` experiment configs with `#` comments.
//!
//! Every key has a documented default per task; unknown keys, keys of the
//! other task, and repeated keys are errors.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use airgnn::channel::{ChannelModel, FadingMode};
use airgnn::gradcheck::GradcheckConfig;
use airgnn::model::{Architecture, InitScheme, LayerShape, Nonlinearity};
use airgnn::tasks::{DiffusionConfig, FlockingConfig};
use airgnn::training::convergence::{ConvergenceConfig, GradientBound};
use airgnn::training::{
    MonitorConfig, Objective, OptimizerKind, StepSchedule, TrainConfig, ValidationConfig,
};

use crate::error::{CliError, Result};

pub const SEED_ENV: &str = "AIRGNN_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    SourceLocalization,
    Flocking,
}

impl Task {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "source_localization" => Some(Self::SourceLocalization),
            "flocking" => Some(Self::Flocking),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::SourceLocalization => "source_localization",
            Self::Flocking => "flocking",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Scope {
    Both,
    Diffusion,
    Flocking,
}

struct Key {
    name: &'static str,
    scope: Scope,
    /// Default for source localization (and for both tasks when
    /// `flocking` is `None`).
    default: &'static str,
    flocking: Option<&'static str>,
}

const fn both(name: &'static str, default: &'static str) -> Key {
    Key { name, scope: Scope::Both, default, flocking: None }
}

const fn per_task(name: &'static str, diffusion: &'static str, flocking: &'static str) -> Key {
    Key { name, scope: Scope::Both, default: diffusion, flocking: Some(flocking) }
}

const fn diffusion(name: &'static str, default: &'static str) -> Key {
    Key { name, scope: Scope::Diffusion, default, flocking: None }
}

const fn flocking(name: &'static str, default: &'static str) -> Key {
    Key { name, scope: Scope::Flocking, default: "", flocking: Some(default) }
}

/// All keys in the order they are written back.
const KEYS: &[Key] = &[
    both("task", ""),
    both("seed", "0"),
    both("output_dir", "out"),
    both("dataset", "dataset.bin"),
    both("record_wall_time", "false"),
    // data
    per_task("n", "100", "50"),
    diffusion("communities", "10"),
    diffusion("p_intra", "0.8"),
    diffusion("p_inter", "0.2"),
    diffusion("tau_min", "1"),
    diffusion("tau_max", "100"),
    diffusion("diffusion_noise_sigma", "0.01"),
    diffusion("train_samples", "10000"),
    diffusion("val_samples", "2500"),
    diffusion("test_samples", "2500"),
    flocking("comm_radius", "1.5"),
    flocking("potential_cutoff", "1.0"),
    flocking("u_max", "10"),
    flocking("dt", "0.01"),
    flocking("max_init_speed", "3"),
    flocking("mean_degree", "6"),
    flocking("min_distance", "0.1"),
    flocking("max_attempts", "1000"),
    flocking("steps", "100"),
    flocking("trajectories", "450"),
    flocking("train_trajectories", "400"),
    flocking("val_trajectories", "25"),
    flocking("test_trajectories", "25"),
    flocking("normalize_gso", "true"),
    // architecture
    per_task("hidden_widths", "64", "32"),
    per_task("orders", "5,5", "5,0"),
    per_task("activations", "relu,relu", "tanh,identity"),
    both("init", "uniform_fanin"),
    // channel
    both("fading_scale", "1"),
    both("snr_db", "40"),
    both("fading_mode", "replace"),
    both("per_feature_fading", "false"),
    both("reference_power", "auto"),
    both("train_channel", "air"),
    // optimizer
    both("optimizer", "adam"),
    both("beta1", "0.9"),
    both("beta2", "0.999"),
    both("eps", "1e-8"),
    per_task("learning_rate", "1e-3", "5e-4"),
    both("schedule", "constant"),
    per_task("batch_size", "50", "20"),
    both("iterations", "3000"),
    both("restarts", "1"),
    both("validation_every", "500"),
    both("validation_draws", "1"),
    both("monitor_every", "0"),
    both("monitor_draws", "16"),
    both("monitor_batch", "all"),
    both("checkpoint_every", "0"),
    // evaluation
    both("eval_draws", "10"),
    both("air_checkpoint", "checkpoint_air.json"),
    both("ideal_checkpoint", "checkpoint_ideal.json"),
    both("deltas", "0.5,1,2"),
    // gradient check
    both("gradcheck_instances", "20"),
    both("gradcheck_max_nodes", "12"),
    both("gradcheck_max_order", "5"),
    both("gradcheck_step", "1e-6"),
    both("gradcheck_tolerance", "1e-5"),
    both("gradcheck_floor", "1e-8"),
    // convergence
    both("horizons", "256,1024"),
    both("lipschitz", "1"),
    both("loss_lower_bound", "0"),
    both("gradient_probes", "100"),
    both("grad_draws", "256"),
    both("grad_batch", "all"),
    both("grad_every", "16"),
    both("l0_draws", "64"),
    both("trailing_window", "200"),
];

fn spec(name: &str) -> Option<&'static Key> {
    KEYS.iter().find(|k| k.name == name)
}

fn applies(key: &Key, task: Task) -> bool {
    match key.scope {
        Scope::Both => true,
        Scope::Diffusion => task == Task::SourceLocalization,
        Scope::Flocking => task == Task::Flocking,
    }
}

fn default_for(key: &Key, task: Task) -> &'static str {
    match (task, key.flocking) {
        (Task::Flocking, Some(v)) => v,
        _ => key.default,
    }
}

/// Key-value pairs of a config file, before defaults are applied.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let syntax = |msg: &str| CliError::Syntax { line: i + 1, msg: msg.into() };
        let (key, value) = line.split_once('=').ok_or_else(|| syntax("expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(syntax("empty key"));
        }
        if out.insert(key.to_string(), value.to_string()).is_some() {
            return Err(syntax(&format!("key `{key}` given twice")));
        }
    }
    Ok(out)
}

/// A fully resolved experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    task: Task,
    values: BTreeMap<String, String>,
}

impl ExperimentConfig {
    /// Applies task defaults to explicit `pairs` and validates the result.
    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self> {
        let task_value = pairs.get("task").ok_or(CliError::Missing("task"))?;
        let task = Task::parse(task_value).ok_or_else(|| CliError::InvalidValue {
            key: "task".into(),
            value: task_value.clone(),
            reason: "expected source_localization or flocking".into(),
        })?;
        for key in pairs.keys() {
            let s = spec(key).ok_or_else(|| CliError::UnknownKey(key.clone()))?;
            if !applies(s, task) {
                return Err(CliError::WrongTask { key: key.clone(), task: task.name().into() });
            }
        }
        let values = KEYS
            .iter()
            .filter(|k| applies(k, task))
            .map(|k| {
                let v = pairs.get(k.name).cloned().unwrap_or_else(|| default_for(k, task).to_string());
                (k.name.to_string(), v)
            })
            .collect();
        let cfg = Self { task, values };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_pairs(&parse_pairs(text)?)
    }

    /// Reads a config file and applies the `AIRGNN_SEED` override.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        let mut cfg = Self::from_text(&text)?;
        if let Ok(seed) = std::env::var(SEED_ENV) {
            cfg.set("seed", &seed)?;
        }
        Ok(cfg)
    }

    /// Config text listing every applicable key.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for k in KEYS.iter().filter(|k| applies(k, self.task)) {
            out.push_str(&format!("{} = {}\n", k.name, self.values[k.name]));
        }
        out
    }

    pub fn pairs(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    /// Replaces one value and revalidates.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let s = spec(key).ok_or_else(|| CliError::UnknownKey(key.into()))?;
        if !applies(s, self.task) || key == "task" {
            return Err(CliError::WrongTask { key: key.into(), task: self.task.name().into() });
        }
        let mut next = self.clone();
        next.values.insert(key.into(), value.trim().into());
        next.validate()?;
        *self = next;
        Ok(())
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn get(&self, key: &str) -> &str {
        &self.values[key]
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: Display,
    {
        let v = self.get(key);
        v.parse().map_err(|e: T::Err| CliError::InvalidValue { key: key.into(), value: v.into(), reason: e.to_string() })
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: Display,
    {
        let v = self.get(key);
        v.split(',')
            .map(|p| {
                p.trim().parse().map_err(|e: T::Err| CliError::InvalidValue {
                    key: key.into(),
                    value: v.into(),
                    reason: e.to_string(),
                })
            })
            .collect()
    }

    fn invalid(&self, key: &str, reason: impl Into<String>) -> CliError {
        CliError::InvalidValue { key: key.into(), value: self.get(key).into(), reason: reason.into() }
    }

    /// `None` for `all`.
    fn optional_count(&self, key: &str) -> Result<Option<usize>> {
        match self.get(key) {
            "all" => Ok(None),
            _ => self.parse(key).map(Some),
        }
    }

    pub fn seed(&self) -> u64 {
        self.parse("seed").expect("validated")
    }

    pub fn output_dir(&self) -> PathBuf {
        PathBuf::from(self.get("output_dir"))
    }

    /// Path-valued key; relative paths are taken inside the output directory.
    pub fn path(&self, key: &str) -> PathBuf {
        let p = Path::new(self.get(key));
        if p.is_absolute() { p.to_path_buf() } else { self.output_dir().join(p) }
    }

    pub fn record_wall_time(&self) -> bool {
        self.get("record_wall_time") == "true"
    }

    pub fn eval_draws(&self) -> usize {
        self.parse("eval_draws").expect("validated")
    }

    pub fn trailing_window(&self) -> usize {
        self.parse("trailing_window").expect("validated")
    }

    pub fn checkpoint_every(&self) -> usize {
        self.parse("checkpoint_every").expect("validated")
    }

    pub fn deltas(&self) -> Result<Vec<f64>> {
        let d: Vec<f64> = self.list("deltas")?;
        if d.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(self.invalid("deltas", "fading scales must be positive"));
        }
        Ok(d)
    }

    /// Whether training happens under the channel model (`air`) or over
    /// ideal links (`ideal`).
    pub fn trains_over_air(&self) -> bool {
        self.get("train_channel") == "air"
    }

    pub fn diffusion(&self) -> Result<DiffusionConfig> {
        let c = DiffusionConfig {
            n: self.parse("n")?,
            communities: self.parse("communities")?,
            p_intra: self.parse("p_intra")?,
            p_inter: self.parse("p_inter")?,
            tau_min: self.parse("tau_min")?,
            tau_max: self.parse("tau_max")?,
            noise_sigma: self.parse("diffusion_noise_sigma")?,
            train: self.parse("train_samples")?,
            val: self.parse("val_samples")?,
            test: self.parse("test_samples")?,
        };
        if c.tau_min > c.tau_max {
            return Err(self.invalid("tau_min", "exceeds tau_max"));
        }
        if !(c.noise_sigma >= 0.0) || !c.noise_sigma.is_finite() {
            return Err(self.invalid("diffusion_noise_sigma", "must be nonnegative"));
        }
        if c.train == 0 {
            return Err(self.invalid("train_samples", "need at least one training sample"));
        }
        if c.communities == 0 || c.n % c.communities != 0 {
            return Err(self.invalid("communities", "must evenly divide n"));
        }
        for key in ["p_intra", "p_inter"] {
            let p: f64 = self.parse(key)?;
            if !(0.0..=1.0).contains(&p) {
                return Err(self.invalid(key, "must be a probability"));
            }
        }
        Ok(c)
    }

    pub fn flocking(&self) -> Result<FlockingConfig> {
        let c = FlockingConfig {
            n: self.parse("n")?,
            comm_radius: self.parse("comm_radius")?,
            potential_cutoff: self.parse("potential_cutoff")?,
            u_max: self.parse("u_max")?,
            dt: self.parse("dt")?,
            max_init_speed: self.parse("max_init_speed")?,
            mean_degree: self.parse("mean_degree")?,
            min_distance: self.parse("min_distance")?,
            max_attempts: self.parse("max_attempts")?,
            steps: self.parse("steps")?,
            trajectories: self.parse("trajectories")?,
            splits: (
                self.parse("train_trajectories")?,
                self.parse("val_trajectories")?,
                self.parse("test_trajectories")?,
            ),
            normalize_gso: self.parse("normalize_gso")?,
        };
        c.validate().map_err(|e| CliError::Invalid(e.to_string()))?;
        if c.splits.0 == 0 {
            return Err(self.invalid("train_trajectories", "need at least one training trajectory"));
        }
        Ok(c)
    }

    /// Input and output widths of the task.
    fn io_widths(&self) -> (usize, usize) {
        match self.task {
            Task::SourceLocalization => (1, self.parse("communities").expect("validated")),
            Task::Flocking => (airgnn::tasks::flocking::FEATURES, airgnn::tasks::flocking::ACTIONS),
        }
    }

    pub fn architecture(&self) -> Result<Architecture> {
        let hidden: Vec<usize> = match self.get("hidden_widths") {
            "" | "none" => Vec::new(),
            _ => self.list("hidden_widths")?,
        };
        let orders: Vec<usize> = self.list("orders")?;
        let names: Vec<String> = self.list("activations")?;
        let activations = names
            .iter()
            .map(|a| Nonlinearity::parse(a).ok_or_else(|| self.invalid("activations", format!("unknown nonlinearity {a}"))))
            .collect::<Result<Vec<_>>>()?;
        let layers = hidden.len() + 1;
        if orders.len() != layers || activations.len() != layers {
            return Err(self.invalid(
                "orders",
                format!("{} hidden widths need {layers} orders and {layers} activations", hidden.len()),
            ));
        }
        let (input, output) = self.io_widths();
        let mut widths = vec![input];
        widths.extend(&hidden);
        widths.push(output);
        let shapes = (0..layers).map(|l| LayerShape::new(widths[l], widths[l + 1], orders[l])).collect();
        Architecture::new(shapes, activations).map_err(|e| CliError::Invalid(e.to_string()))
    }

    fn init(&self) -> Result<InitScheme> {
        match self.get("init") {
            "uniform_fanin" => Ok(InitScheme::UniformFanin),
            other => match other.strip_prefix("constant:").map(str::parse::<f64>) {
                Some(Ok(v)) => Ok(InitScheme::Constant(v)),
                _ => Err(self.invalid("init", "expected uniform_fanin or constant:<value>")),
            },
        }
    }

    /// Channel model with `reference_power = auto` resolved to `auto_power`.
    pub fn channel(&self, auto_power: f64) -> Result<ChannelModel> {
        let reference_power = match self.get("reference_power") {
            "auto" => auto_power,
            _ => self.parse("reference_power")?,
        };
        let mode = FadingMode::parse(self.get("fading_mode"))
            .ok_or_else(|| self.invalid("fading_mode", "expected replace, multiply or nominal"))?;
        let mut c = ChannelModel::rayleigh(self.parse("fading_scale")?, self.parse("snr_db")?, reference_power)
            .map_err(|e| CliError::Invalid(e.to_string()))?
            .with_mode(mode);
        c.per_feature_fading = self.parse("per_feature_fading")?;
        Ok(c)
    }

    pub fn objective(&self) -> Objective {
        match self.task {
            Task::SourceLocalization => Objective::cross_entropy(),
            Task::Flocking => Objective::mse(),
        }
    }

    /// Training setup; the channel is ideal when `train_channel = ideal`.
    pub fn train_config(&self, auto_power: f64) -> Result<TrainConfig> {
        let channel = self.channel(auto_power)?;
        let optimizer = match self.get("optimizer") {
            "adam" => OptimizerKind::Adam { beta1: self.parse("beta1")?, beta2: self.parse("beta2")?, eps: self.parse("eps")? },
            "sgd" => OptimizerKind::Sgd,
            _ => return Err(self.invalid("optimizer", "expected adam or sgd")),
        };
        let lr: f64 = self.parse("learning_rate")?;
        let schedule = match self.get("schedule") {
            "constant" => StepSchedule::Constant(lr),
            "inverse_t" => StepSchedule::InverseT(lr),
            "inverse_sqrt_t" => StepSchedule::InverseSqrtT(lr),
            _ => return Err(self.invalid("schedule", "expected constant, inverse_t or inverse_sqrt_t")),
        };
        let validation_every: usize = self.parse("validation_every")?;
        let monitor_every: usize = self.parse("monitor_every")?;
        let channel = match self.get("train_channel") {
            "air" => channel,
            "ideal" => ChannelModel::ideal(),
            _ => return Err(self.invalid("train_channel", "expected air or ideal")),
        };
        let tc = TrainConfig {
            arch: self.architecture()?,
            objective: self.objective(),
            channel,
            optimizer,
            schedule,
            batch_size: self.parse("batch_size")?,
            iterations: self.parse("iterations")?,
            seed: self.parse("seed")?,
            init: self.init()?,
            restarts: self.parse("restarts")?,
            validation: (validation_every > 0)
                .then(|| Ok::<_, CliError>(ValidationConfig { every: validation_every, draws: self.parse("validation_draws")? }))
                .transpose()?,
            monitor: (monitor_every > 0)
                .then(|| {
                    Ok::<_, CliError>(MonitorConfig {
                        every: monitor_every,
                        draws: self.parse("monitor_draws")?,
                        batch: self.optional_count("monitor_batch")?,
                    })
                })
                .transpose()?,
        };
        tc.validate().map_err(|e| CliError::Invalid(e.to_string()))?;
        Ok(tc)
    }

    pub fn gradcheck(&self) -> Result<GradcheckConfig> {
        let c = GradcheckConfig {
            instances: self.parse("gradcheck_instances")?,
            max_nodes: self.parse("gradcheck_max_nodes")?,
            max_order: self.parse("gradcheck_max_order")?,
            step: self.parse("gradcheck_step")?,
            tolerance: self.parse("gradcheck_tolerance")?,
            floor: self.parse("gradcheck_floor")?,
            seed: self.parse("seed")?,
        };
        if c.instances == 0 || c.max_nodes < 2 {
            return Err(self.invalid("gradcheck_instances", "need at least one instance and at least two nodes"));
        }
        if !(c.step > 0.0) || !(c.tolerance > 0.0) || !(c.floor > 0.0) {
            return Err(self.invalid("gradcheck_step", "step, tolerance and floor must be positive"));
        }
        Ok(c)
    }

    /// Convergence run over `train_config` with constant steps per horizon.
    pub fn convergence(&self, auto_power: f64) -> Result<ConvergenceConfig> {
        let c = ConvergenceConfig {
            base: self.train_config(auto_power)?,
            horizons: self.list("horizons")?,
            lipschitz: self.parse("lipschitz")?,
            loss_lower_bound: self.parse("loss_lower_bound")?,
            gradient_bound: GradientBound::Empirical { probes: self.parse("gradient_probes")? },
            grad_draws: self.parse("grad_draws")?,
            grad_batch: self.optional_count("grad_batch")?,
            grad_every: self.parse("grad_every")?,
            l0_draws: self.parse("l0_draws")?,
        };
        c.validate().map_err(|e| CliError::Invalid(e.to_string()))?;
        if !(c.lipschitz > 0.0) {
            return Err(self.invalid("lipschitz", "must be positive"));
        }
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        self.parse::<u64>("seed")?;
        for key in ["record_wall_time", "per_feature_fading"] {
            self.parse::<bool>(key)?;
        }
        for key in ["eval_draws", "trailing_window"] {
            if self.parse::<usize>(key)? == 0 {
                return Err(self.invalid(key, "must be at least 1"));
            }
        }
        self.parse::<usize>("checkpoint_every")?;
        if self.get("output_dir").is_empty() {
            return Err(self.invalid("output_dir", "must not be empty"));
        }
        match self.task {
            Task::SourceLocalization => self.diffusion().map(drop)?,
            Task::Flocking => self.flocking().map(drop)?,
        }
        self.convergence(1.0)?;
        self.gradcheck()?;
        self.deltas()?;
        Ok(())
    }
}
