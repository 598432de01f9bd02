use std::path::PathBuf;
use std::process::ExitCode;

use airgnn_cli::{rerun, run, CliError, Command, EvalMode, ExperimentConfig};
use clap::{Args, Parser, Subcommand};

/// Graph neural networks over simulated fading, noisy wireless links.
#[derive(Parser)]
#[command(name = "airgnn", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Source {
    /// Experiment config (`key = value` lines).
    #[arg(long, required_unless_present = "manifest", conflicts_with = "manifest")]
    config: Option<PathBuf>,
    /// Re-execute the run recorded in this manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Overrides `output_dir`.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the task dataset.
    GenData(Source),
    /// Train and write the best-validation checkpoint and the training log.
    Train {
        #[command(flatten)]
        source: Source,
        /// Overrides `restarts`; the restart with the lowest validation loss is kept.
        #[arg(long)]
        restarts: Option<usize>,
        /// Continue from a `_last` checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a checkpoint under one of the three test conditions.
    Eval {
        #[command(flatten)]
        source: Source,
        /// airgnn, gnn_ideal or gnn_with_channel.
        #[arg(long)]
        mode: Option<String>,
        /// Defaults to `air_checkpoint` or `ideal_checkpoint` by mode.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Compare analytic gradients with central finite differences.
    Gradcheck {
        #[command(flatten)]
        source: Source,
        #[arg(long, hide = true)]
        inject_sign_flip: Option<usize>,
    },
    /// Constant-step training at several horizons with gradient-norm tracking.
    Convergence(Source),
    /// Evaluate all three conditions for each fading scale.
    SweepDelta {
        #[command(flatten)]
        source: Source,
        /// Overrides `deltas`, comma separated.
        #[arg(long)]
        deltas: Option<String>,
    },
}

fn config_for(source: &Source, overrides: &[(&str, Option<String>)]) -> Result<ExperimentConfig, CliError> {
    let path = source.config.as_deref().expect("clap requires --config without --manifest");
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(dir) = &source.output_dir {
        cfg.set("output_dir", &dir.display().to_string())?;
    }
    for (key, value) in overrides {
        if let Some(v) = value {
            cfg.set(key, v)?;
        }
    }
    Ok(cfg)
}

fn execute(source: &Source, command: Command, overrides: &[(&str, Option<String>)]) -> Result<String, CliError> {
    let outcome = match &source.manifest {
        Some(m) => {
            if overrides.iter().any(|(_, v)| v.is_some()) {
                return Err(CliError::Invalid("a manifest rerun takes no overrides".into()));
            }
            rerun(m, source.output_dir.as_deref())?
        }
        None => run(&command, &config_for(source, overrides)?)?,
    };
    Ok(format!("{}\nmanifest: {}", outcome.summary, outcome.manifest_path.display()))
}

fn dispatch(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Cmd::GenData(s) => execute(&s, Command::GenData, &[]),
        Cmd::Train { source, restarts, resume } => {
            execute(&source, Command::Train { resume }, &[("restarts", restarts.map(|r| r.to_string()))])
        }
        Cmd::Eval { source, mode, checkpoint } => {
            let mode = match (&mode, &source.manifest) {
                (Some(m), _) => EvalMode::parse(m).ok_or_else(|| CliError::InvalidValue {
                    key: "mode".into(),
                    value: m.clone(),
                    reason: "expected airgnn, gnn_ideal or gnn_with_channel".into(),
                })?,
                (None, Some(_)) => EvalMode::Airgnn,
                (None, None) => return Err(CliError::Invalid("eval needs --mode".into())),
            };
            execute(&source, Command::Eval { mode, checkpoint }, &[])
        }
        Cmd::Gradcheck { source, inject_sign_flip } => execute(&source, Command::Gradcheck { inject_sign_flip }, &[]),
        Cmd::Convergence(s) => execute(&s, Command::Convergence, &[]),
        Cmd::SweepDelta { source, deltas } => execute(&source, Command::SweepDelta, &[("deltas", deltas)]),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

