//! Subcommands. Each run writes its resolved config, its outputs and a
//! [`RunManifest`] into the output directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use airgnn::channel::ChannelModel;
use airgnn::data::Dataset;
use airgnn::gradcheck::{run_gradcheck, Fault};
use airgnn::io::{decode_dataset, encode_dataset, Checkpoint, StoredDataset};
use airgnn::tasks::diffusion::accuracy_per_draw;
use airgnn::tasks::flocking::episode_costs;
use airgnn::tasks::{build_flock_dataset, source_localization_dataset, Controller};
use airgnn::training::convergence::{run_convergence, trailing_mean, GRADNORM_STREAM, L0_STREAM, PROBE_STREAM};
use airgnn::training::{
    train_with, IterationRecord, Trainer, BATCH_STREAM, CHANNEL_STREAM, INIT_STREAM, MONITOR_STREAM,
    VALIDATION_STREAM,
};

use crate::config::{ExperimentConfig, Task};
use crate::error::{CliError, Result};
use crate::manifest::{sha256_hex, unix_ms, OutputFile, RunManifest};

pub const EVAL_STREAM: &str = "eval";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Trained and tested over the channel.
    Airgnn,
    /// Trained and tested over ideal links.
    GnnIdeal,
    /// Trained over ideal links, tested over the channel.
    GnnWithChannel,
}

impl EvalMode {
    pub const ALL: [Self; 3] = [Self::Airgnn, Self::GnnIdeal, Self::GnnWithChannel];

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "airgnn" => Some(Self::Airgnn),
            "gnn_ideal" => Some(Self::GnnIdeal),
            "gnn_with_channel" => Some(Self::GnnWithChannel),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Airgnn => "airgnn",
            Self::GnnIdeal => "gnn_ideal",
            Self::GnnWithChannel => "gnn_with_channel",
        }
    }

    fn trained_over_air(self) -> bool {
        self == Self::Airgnn
    }

    fn tested_over_air(self) -> bool {
        self != Self::GnnIdeal
    }

    fn checkpoint_key(self) -> &'static str {
        if self.trained_over_air() { "air_checkpoint" } else { "ideal_checkpoint" }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    GenData,
    Train { resume: Option<PathBuf> },
    Eval { mode: EvalMode, checkpoint: Option<PathBuf> },
    /// `inject_sign_flip` negates one analytic derivative, for testing the check.
    Gradcheck { inject_sign_flip: Option<usize> },
    Convergence,
    SweepDelta,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::GenData => "gen-data",
            Self::Train { .. } => "train",
            Self::Eval { .. } => "eval",
            Self::Gradcheck { .. } => "gradcheck",
            Self::Convergence => "convergence",
            Self::SweepDelta => "sweep-delta",
        }
    }

    /// File stem shared by the run's config, manifest and main CSV.
    pub fn run_name(&self, cfg: &ExperimentConfig) -> String {
        match self {
            Self::Train { .. } => format!("train_{}", cfg.get("train_channel")),
            Self::Eval { mode, .. } => format!("eval_{}", mode.name()),
            Self::SweepDelta => "sweep_delta".into(),
            Self::GenData => "gen_data".into(),
            other => other.name().into(),
        }
    }

    fn options(&self) -> BTreeMap<String, String> {
        let mut o = BTreeMap::new();
        let path = |p: &Path| p.display().to_string();
        match self {
            Self::Train { resume: Some(p) } => {
                o.insert("resume".into(), path(p));
            }
            Self::Eval { mode, checkpoint } => {
                o.insert("mode".into(), mode.name().into());
                if let Some(p) = checkpoint {
                    o.insert("checkpoint".into(), path(p));
                }
            }
            Self::Gradcheck { inject_sign_flip: Some(i) } => {
                o.insert("inject_sign_flip".into(), i.to_string());
            }
            _ => {}
        }
        o
    }

    pub fn from_manifest(command: &str, options: &BTreeMap<String, String>) -> Result<Self> {
        let bad = |what: &str| CliError::Manifest(format!("{what} for command {command}"));
        let allowed: &[&str] = match command {
            "train" => &["resume"],
            "eval" => &["mode", "checkpoint"],
            "gradcheck" => &["inject_sign_flip"],
            _ => &[],
        };
        if let Some(k) = options.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(bad(&format!("unexpected option {k}")));
        }
        let path = |k: &str| options.get(k).map(PathBuf::from);
        Ok(match command {
            "gen-data" => Self::GenData,
            "train" => Self::Train { resume: path("resume") },
            "eval" => Self::Eval {
                mode: options.get("mode").and_then(|m| EvalMode::parse(m)).ok_or_else(|| bad("missing or bad mode"))?,
                checkpoint: path("checkpoint"),
            },
            "gradcheck" => Self::Gradcheck {
                inject_sign_flip: options
                    .get("inject_sign_flip")
                    .map(|v| v.parse().map_err(|_| bad("bad inject_sign_flip")))
                    .transpose()?,
            },
            "convergence" => Self::Convergence,
            "sweep-delta" => Self::SweepDelta,
            _ => return Err(CliError::Manifest(format!("unknown command {command}"))),
        })
    }

    fn seed_streams(&self, task: Task) -> Vec<&'static str> {
        let data: &[&'static str] = match task {
            Task::SourceLocalization => &["graph", "diffusion"],
            Task::Flocking => &["trajectory"],
        };
        let eval: &[&'static str] = match task {
            Task::SourceLocalization => &[EVAL_STREAM],
            Task::Flocking => &["episode", EVAL_STREAM],
        };
        let training = [INIT_STREAM, BATCH_STREAM, CHANNEL_STREAM];
        match self {
            Self::GenData => data.to_vec(),
            Self::Train { .. } => [&training[..], &[VALIDATION_STREAM, MONITOR_STREAM]].concat(),
            Self::Eval { .. } | Self::SweepDelta => eval.to_vec(),
            Self::Gradcheck { .. } => vec!["gradcheck"],
            Self::Convergence => [data, &training[..], &[PROBE_STREAM, GRADNORM_STREAM, L0_STREAM]].concat(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest_path: PathBuf,
    pub manifest: RunManifest,
    /// One-line human summary.
    pub summary: String,
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    dir: PathBuf,
    outputs: Vec<OutputFile>,
    dataset_hash: Option<String>,
    expected_hash: Option<&'a str>,
}

impl Ctx<'_> {
    fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(CliError::io(parent))?;
        }
        std::fs::write(path, bytes).map_err(CliError::io(path))?;
        let shown = path.strip_prefix(&self.dir).unwrap_or(path).display().to_string();
        self.outputs.retain(|o| o.path != shown);
        self.outputs.push(OutputFile { path: shown, sha256: sha256_hex(bytes) });
        Ok(())
    }

    fn set_hash(&mut self, bytes: &[u8]) -> Result<()> {
        let hash = sha256_hex(bytes);
        if let Some(want) = self.expected_hash {
            if want != hash {
                return Err(CliError::Manifest(format!("dataset hash {hash} differs from recorded {want}")));
            }
        }
        self.dataset_hash = Some(hash);
        Ok(())
    }

    fn load_dataset(&mut self) -> Result<StoredDataset> {
        let path = self.cfg.path("dataset");
        let bytes = std::fs::read(&path).map_err(CliError::io(&path))?;
        self.set_hash(&bytes)?;
        let stored = decode_dataset(&bytes)?;
        if task_of(&stored) != self.cfg.task() {
            return Err(CliError::Mismatch(format!(
                "{} holds a {} dataset, config task is {}",
                path.display(),
                task_of(&stored).name(),
                self.cfg.task().name()
            )));
        }
        Ok(stored)
    }
}

fn task_of(d: &StoredDataset) -> Task {
    match d {
        StoredDataset::Diffusion(_) => Task::SourceLocalization,
        StoredDataset::Flocking(_) => Task::Flocking,
    }
}

/// Training view of a stored dataset and its reference signal power.
fn training_data(d: &StoredDataset) -> (Dataset, f64) {
    match d {
        StoredDataset::Diffusion(d) => (d.to_dataset(), d.reference_power),
        StoredDataset::Flocking(d) => (d.to_dataset(), d.reference_power),
    }
}

fn generate(cfg: &ExperimentConfig) -> Result<StoredDataset> {
    Ok(match cfg.task() {
        Task::SourceLocalization => StoredDataset::Diffusion(source_localization_dataset(&cfg.diffusion()?, cfg.seed())?),
        Task::Flocking => StoredDataset::Flocking(build_flock_dataset(&cfg.flocking()?, cfg.seed())?),
    })
}

fn load_checkpoint(path: &Path, cfg: &ExperimentConfig) -> Result<Checkpoint> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let ck = Checkpoint::from_json(&text)?;
    if ck.task != cfg.task().name() {
        return Err(CliError::Mismatch(format!(
            "checkpoint {} was trained for {}, config task is {}",
            path.display(),
            ck.task,
            cfg.task().name()
        )));
    }
    Ok(ck)
}

fn checkpoint_for_mode(path: &Path, cfg: &ExperimentConfig, mode: EvalMode) -> Result<Checkpoint> {
    let ck = load_checkpoint(path, cfg)?;
    if ck.train_channel.is_ideal() == mode.trained_over_air() {
        let trained = if ck.train_channel.is_ideal() { "ideal links" } else { "the channel" };
        return Err(CliError::Mismatch(format!(
            "mode {} needs a network trained over {}, {} was trained over {trained}",
            mode.name(),
            if mode.trained_over_air() { "the channel" } else { "ideal links" },
            path.display()
        )));
    }
    Ok(ck)
}

/// `a_last.json` next to `a.json`.
fn last_checkpoint_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = path.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
    path.with_file_name(format!("{stem}_last{ext}"))
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn train_csv(records: &[IterationRecord], wall_time: bool) -> String {
    let mut out = String::from("iter,loss,expected_loss,grad_norm_sq,wall_ms\n");
    for r in records {
        let wall = if wall_time { num(r.wall_ms) } else { String::new() };
        let _ = writeln!(out, "{},{},{},{},{wall}", r.iter, num(r.loss), opt(r.expected_loss), opt(r.grad_norm_sq));
    }
    out
}

fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Per-draw test metric: accuracy per channel redraw for source
/// localization, closed-loop velocity-variance cost per episode for flocking.
fn evaluate(
    stored: &StoredDataset,
    data: &Dataset,
    ck: &Checkpoint,
    channel: &ChannelModel,
    draws: usize,
    seed: u64,
) -> Result<(&'static str, Vec<f64>)> {
    Ok(match stored {
        StoredDataset::Diffusion(_) => {
            if data.splits.test.is_empty() {
                return Err(CliError::Invalid("dataset has an empty test split".into()));
            }
            let v = accuracy_per_draw(data, &data.splits.test, &ck.arch, &ck.params, channel, draws, seed, EVAL_STREAM)?;
            ("accuracy", v)
        }
        StoredDataset::Flocking(fd) => {
            let controller = Controller::AirGnn { arch: &ck.arch, params: &ck.params, channel };
            ("velocity_variance", episode_costs(&controller, &fd.config, draws, seed, EVAL_STREAM)?)
        }
    })
}

type BodyResult = Result<(String, Option<CliError>)>;

fn gen_data(ctx: &mut Ctx<'_>) -> BodyResult {
    let stored = generate(ctx.cfg)?;
    let bytes = encode_dataset(&stored);
    ctx.set_hash(&bytes)?;
    ctx.write(&ctx.cfg.path("dataset"), &bytes)?;
    let summary = match &stored {
        StoredDataset::Diffusion(d) => format!("{} samples on {} nodes", d.samples.len(), d.gso.n()),
        StoredDataset::Flocking(d) => format!("{} trajectories of {} steps", d.trajectories.len(), d.config.steps),
    };
    Ok((summary, None))
}

fn train(ctx: &mut Ctx<'_>, resume: Option<&Path>, name: &str) -> BodyResult {
    let cfg = ctx.cfg;
    let stored = ctx.load_dataset()?;
    let (data, power) = training_data(&stored);
    let tc = cfg.train_config(power)?;
    let best_path = cfg.path(if cfg.trains_over_air() { "air_checkpoint" } else { "ideal_checkpoint" });
    let last_path = last_checkpoint_path(&best_path);
    let checkpoint = |params, optimizer, iteration: usize| Checkpoint {
        task: cfg.task().name().into(),
        train_channel: tc.channel,
        arch: tc.arch.clone(),
        params,
        optimizer,
        iteration: Some(iteration as u64),
    };
    let every = cfg.checkpoint_every();
    let cadence = |trainer: &Trainer<'_>, record: &IterationRecord| -> airgnn::Result<()> {
        if every > 0 && (record.iter + 1) % every == 0 {
            let ck = checkpoint(trainer.params().clone(), Some(trainer.optimizer().clone()), trainer.iteration());
            std::fs::write(&last_path, ck.to_json())?;
        }
        Ok(())
    };
    let (records, best, last, best_validation) = match resume {
        Some(path) => {
            if tc.restarts != 1 {
                return Err(CliError::Invalid("resuming needs restarts = 1".into()));
            }
            let ck = load_checkpoint(path, cfg)?;
            if ck.arch != tc.arch || ck.train_channel != tc.channel {
                return Err(CliError::Mismatch(format!(
                    "checkpoint {} was trained with a different architecture or channel",
                    path.display()
                )));
            }
            let (Some(optimizer), Some(t)) = (ck.optimizer, ck.iteration) else {
                return Err(CliError::Mismatch(format!("checkpoint {} has no optimizer state", path.display())));
            };
            let mut trainer = Trainer::resume(&tc, &data, 0, ck.params, optimizer, t as usize)?;
            let mut records = Vec::new();
            while !trainer.is_done() {
                let r = trainer.step()?;
                cadence(&trainer, &r)?;
                records.push(r);
            }
            let t = trainer.iteration();
            let best = checkpoint(trainer.params().clone(), None, t);
            let last = checkpoint(trainer.params().clone(), Some(trainer.optimizer().clone()), t);
            (records, best, last, None)
        }
        None => {
            let out = train_with(&tc, &data, cadence)?;
            let t = tc.iterations;
            let best = checkpoint(out.params, None, t);
            let last = checkpoint(out.final_params, Some(out.optimizer), t);
            (out.records, best, last, out.best_validation)
        }
    };
    let dir = ctx.dir.clone();
    ctx.write(&dir.join(format!("{name}.csv")), train_csv(&records, cfg.record_wall_time()).as_bytes())?;
    ctx.write(&best_path, best.to_json().as_bytes())?;
    ctx.write(&last_path, last.to_json().as_bytes())?;
    let final_loss = records.last().map_or(f64::NAN, |r| r.loss);
    let mut summary = format!("{} iterations, last minibatch loss {final_loss:.6}", records.len());
    if let Some(v) = best_validation {
        let _ = write!(summary, ", best validation loss {v:.6}");
    }
    Ok((summary, None))
}

fn eval(ctx: &mut Ctx<'_>, mode: EvalMode, checkpoint: Option<&Path>, name: &str) -> BodyResult {
    let cfg = ctx.cfg;
    let path = checkpoint.map_or_else(|| cfg.path(mode.checkpoint_key()), Path::to_path_buf);
    let ck = checkpoint_for_mode(&path, cfg, mode)?;
    let stored = ctx.load_dataset()?;
    let (data, power) = training_data(&stored);
    let channel = if mode.tested_over_air() { cfg.channel(power)? } else { ChannelModel::ideal() };
    let (metric, values) = evaluate(&stored, &data, &ck, &channel, cfg.eval_draws(), cfg.seed())?;
    let (mean, stderr) = mean_stderr(&values);
    let csv = format!(
        "mode,metric,mean,stderr,draws\n{},{metric},{},{},{}\n",
        mode.name(),
        num(mean),
        num(stderr),
        values.len()
    );
    let dir = ctx.dir.clone();
    ctx.write(&dir.join(format!("{name}.csv")), csv.as_bytes())?;
    Ok((format!("{} {metric} {mean:.4} ± {stderr:.4}", mode.name()), None))
}

fn sweep_delta(ctx: &mut Ctx<'_>, name: &str) -> BodyResult {
    let cfg = ctx.cfg;
    let air = checkpoint_for_mode(&cfg.path("air_checkpoint"), cfg, EvalMode::Airgnn)?;
    let ideal = checkpoint_for_mode(&cfg.path("ideal_checkpoint"), cfg, EvalMode::GnnIdeal)?;
    let stored = ctx.load_dataset()?;
    let (data, power) = training_data(&stored);
    let base = cfg.channel(power)?;
    let deltas = cfg.deltas()?;
    let mut csv = String::from("delta,mode,metric,mean,stderr,draws\n");
    for &delta in &deltas {
        for mode in EvalMode::ALL {
            let ck = if mode.trained_over_air() { &air } else { &ideal };
            let channel = if mode.tested_over_air() { base.with_fading_scale(delta) } else { ChannelModel::ideal() };
            let (metric, values) = evaluate(&stored, &data, ck, &channel, cfg.eval_draws(), cfg.seed())?;
            let (mean, stderr) = mean_stderr(&values);
            let _ = writeln!(csv, "{},{},{metric},{},{},{}", num(delta), mode.name(), num(mean), num(stderr), values.len());
        }
    }
    let dir = ctx.dir.clone();
    ctx.write(&dir.join(format!("{name}.csv")), csv.as_bytes())?;
    Ok((format!("{} rows", 3 * deltas.len()), None))
}

fn gradcheck(ctx: &mut Ctx<'_>, fault: Option<usize>) -> BodyResult {
    let gc = ctx.cfg.gradcheck()?;
    let report = run_gradcheck(&gc, fault.map(|index| Fault::FlipSign { index }))?;
    let mut csv = String::from("instance,index,layer,g,f,k,analytic,numeric,rel_error\n");
    for c in &report.checks {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            c.instance,
            c.index,
            c.layer,
            c.g,
            c.f,
            c.k,
            num(c.analytic),
            num(c.numeric),
            num(c.rel_error)
        );
    }
    let passed = report.passed();
    let summary_csv = format!(
        "checks,max_rel_error,median_rel_error,tolerance,passed\n{},{},{},{},{passed}\n",
        report.checks.len(),
        num(report.max_rel_error),
        num(report.median_rel_error),
        num(report.tolerance)
    );
    let dir = ctx.dir.clone();
    ctx.write(&dir.join("gradcheck.csv"), csv.as_bytes())?;
    ctx.write(&dir.join("gradcheck_summary.csv"), summary_csv.as_bytes())?;
    let summary = format!(
        "{} coefficients, max relative error {:.3e}, median {:.3e}",
        report.checks.len(),
        report.max_rel_error,
        report.median_rel_error
    );
    let failures: Vec<_> = report.failures().collect();
    let failure = failures.first().map(|first| CliError::GradcheckFailed {
        failures: failures.len(),
        checks: report.checks.len(),
        tolerance: report.tolerance,
        instance: first.instance,
        index: first.index,
    });
    Ok((summary, failure))
}

fn convergence(ctx: &mut Ctx<'_>) -> BodyResult {
    let cfg = ctx.cfg;
    let stored = generate(cfg)?;
    ctx.set_hash(&encode_dataset(&stored))?;
    let (data, power) = training_data(&stored);
    let cc = cfg.convergence(power)?;
    let report = run_convergence(&cc, &data)?;
    let window = cfg.trailing_window();
    let mut grad = String::from("horizon,t,grad_norm_sq\n");
    let mut loss = String::from("horizon,iter,loss\n");
    let mut summary_csv = String::from(
        "horizon,step_size,min_grad_norm_sq,trailing_loss_end,trailing_loss_quarter,gradient_bound,initial_loss\n",
    );
    for h in &report.horizons {
        let t = h.iterations;
        for (i, g) in &h.grad_curve {
            let _ = writeln!(grad, "{t},{i},{}", num(*g));
        }
        for (i, l) in h.losses.iter().enumerate() {
            let _ = writeln!(loss, "{t},{i},{}", num(*l));
        }
        let _ = writeln!(
            summary_csv,
            "{t},{},{},{},{},{},{}",
            num(h.step_size),
            num(h.min_grad_norm_sq),
            num(trailing_mean(&h.losses, t, window)),
            num(trailing_mean(&h.losses, t / 4, window)),
            num(report.gradient_bound),
            num(report.initial_loss)
        );
    }
    let dir = ctx.dir.clone();
    ctx.write(&dir.join("convergence_grad.csv"), grad.as_bytes())?;
    ctx.write(&dir.join("convergence_loss.csv"), loss.as_bytes())?;
    ctx.write(&dir.join("convergence_summary.csv"), summary_csv.as_bytes())?;
    let ratio = report.decay_ratio().unwrap_or(f64::NAN);
    Ok((format!("gradient bound {:.4}, decay ratio {ratio:.3}", report.gradient_bound), None))
}

/// Runs `command` under `cfg`.
pub fn run(command: &Command, cfg: &ExperimentConfig) -> Result<RunOutcome> {
    execute(command, cfg, None)
}

/// Re-executes the run recorded in a manifest, optionally into another
/// output directory. The `AIRGNN_SEED` override does not apply.
pub fn rerun(manifest_path: &Path, output_dir: Option<&Path>) -> Result<RunOutcome> {
    let text = std::fs::read_to_string(manifest_path).map_err(CliError::io(manifest_path))?;
    let m = RunManifest::from_json(&text)?;
    let command = Command::from_manifest(&m.command, &m.options)?;
    let mut cfg = ExperimentConfig::from_pairs(&m.config)?;
    if cfg.seed() != m.master_seed {
        return Err(CliError::Manifest(format!("config seed {} differs from master seed {}", cfg.seed(), m.master_seed)));
    }
    if let Some(dir) = output_dir {
        cfg.set("output_dir", &dir.display().to_string())?;
    }
    execute(&command, &cfg, m.dataset_hash.as_deref())
}

fn execute(command: &Command, cfg: &ExperimentConfig, expected_hash: Option<&str>) -> Result<RunOutcome> {
    let dir = cfg.output_dir();
    std::fs::create_dir_all(&dir).map_err(CliError::io(&dir))?;
    let started = unix_ms();
    let name = command.run_name(cfg);
    let mut ctx = Ctx { cfg, dir: dir.clone(), outputs: Vec::new(), dataset_hash: None, expected_hash };
    ctx.write(&dir.join(format!("{name}.config")), cfg.to_text().as_bytes())?;
    let (summary, failure) = match command {
        Command::GenData => gen_data(&mut ctx)?,
        Command::Train { resume } => train(&mut ctx, resume.as_deref(), &name)?,
        Command::Eval { mode, checkpoint } => eval(&mut ctx, *mode, checkpoint.as_deref(), &name)?,
        Command::Gradcheck { inject_sign_flip } => gradcheck(&mut ctx, *inject_sign_flip)?,
        Command::Convergence => convergence(&mut ctx)?,
        Command::SweepDelta => sweep_delta(&mut ctx, &name)?,
    };
    let manifest = RunManifest {
        command: command.name().into(),
        options: command.options(),
        config: cfg.pairs().clone(),
        code_version: env!("CARGO_PKG_VERSION").into(),
        master_seed: cfg.seed(),
        seed_streams: command.seed_streams(cfg.task()).into_iter().map(String::from).collect(),
        dataset_hash: ctx.dataset_hash,
        started_unix_ms: started,
        finished_unix_ms: unix_ms(),
        outputs: ctx.outputs,
    };
    let manifest_path = dir.join(format!("{name}.manifest.json"));
    std::fs::write(&manifest_path, manifest.to_json()).map_err(CliError::io(&manifest_path))?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(RunOutcome { manifest_path, manifest, summary })
}
