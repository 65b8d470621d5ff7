//! `ess`: fit a tokenizer and prior, sample with one of four samplers,
//! evaluate, and sweep.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data or I/O errors.

mod commands;
mod config;

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ess_core::data::SyntheticKind;
use ess_core::sampler::Method;
use ess_core::{Error, Result};

use commands::{ArtifactPaths, EvalMode, SweepSpec};
use config::RunConfig;

#[derive(Parser)]
#[command(name = "ess", version, about = "Masked token sampling for time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `key=value` override, applied after the config file. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Root seed; overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(self.config.as_deref(), &self.overrides)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct ArtifactArgs {
    /// Directory written by `fit`.
    #[arg(long)]
    artifacts: Option<PathBuf>,
    /// Prior file to use instead of the one in the artifact directory.
    #[arg(long)]
    prior: Option<PathBuf>,
    /// Codebook file to use instead of the one in the artifact directory.
    #[arg(long)]
    codebook: Option<PathBuf>,
}

impl ArtifactArgs {
    fn paths(&self) -> ArtifactPaths {
        ArtifactPaths {
            dir: self.artifacts.clone(),
            prior: self.prior.clone(),
            codebook: self.codebook.clone(),
        }
    }
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse::<Method>().map_err(|e| e.to_string())
}

fn parse_kind(s: &str) -> std::result::Result<SyntheticKind, String> {
    s.parse::<SyntheticKind>().map_err(|e| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Fit the codebook and count priors on a UCR-format file.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Draw samples with one method.
    Sample {
        #[command(flatten)]
        art: ArtifactArgs,
        /// naive, token-critic, ess or ablation-b.
        #[arg(long, value_parser = parse_method)]
        method: Method,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        /// Sample from the per-class priors, cycling through the classes.
        #[arg(long)]
        conditional: bool,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Score generated samples.
    Eval {
        /// samples.tsv in feature mode, tokens.txt in exact mode.
        #[arg(long)]
        gen: PathBuf,
        /// Real UCR-format data (feature mode).
        #[arg(long)]
        real: Option<PathBuf>,
        /// Tabular ground-truth prior (exact mode).
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long, value_enum)]
        mode: EvalMode,
        /// Write the report here as well as to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample and score every method and seed combination into one CSV.
    Sweep {
        #[command(flatten)]
        art: ArtifactArgs,
        /// Comma-separated methods.
        #[arg(long, value_delimiter = ',', value_parser = parse_method, required = true)]
        methods: Vec<Method>,
        /// Comma-separated root seeds.
        #[arg(long, value_delimiter = ',', required = true)]
        seeds: Vec<u64>,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum)]
        mode: EvalMode,
        #[arg(long)]
        real: Option<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        conditional: bool,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Write a synthetic UCR-format corpus.
    Gen {
        /// sine-mix, cbf or step.
        #[arg(long, value_parser = parse_kind)]
        kind: SyntheticKind,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        length: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Worker count from `MS_THREADS`, defaulting to the available cores.
fn threads() -> Result<usize> {
    match std::env::var("MS_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(Error::usage(format!(
                "MS_THREADS must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.into()))?;
    println!("{text}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit { data, out, cfg } => {
            let summary = commands::cmd_fit(&cfg.load()?, &data, &out)?;
            print_json(&summary)
        }
        Command::Sample {
            art,
            method,
            n,
            out,
            conditional,
            cfg,
        } => {
            let cfg = cfg.load()?;
            let artifacts = art.paths().load(conditional)?;
            let run = commands::run_sampling(
                &artifacts,
                &cfg,
                method,
                n,
                cfg.seed,
                conditional,
                threads()?,
                true,
            )?;
            commands::write_sample_outputs(&run, &artifacts, &cfg, conditional, &out)
        }
        Command::Eval {
            gen,
            real,
            truth,
            mode,
            out,
        } => {
            let report = commands::cmd_eval(&gen, real.as_deref(), truth.as_deref(), mode)?;
            if let Some(path) = out {
                let mut buf = Vec::new();
                report.write_json(&mut buf)?;
                buf.push(b'\n');
                fs::write(path, buf)?;
            }
            print_json(&report)
        }
        Command::Sweep {
            art,
            methods,
            seeds,
            n,
            mode,
            real,
            truth,
            conditional,
            out,
            cfg,
        } => {
            let cfg = cfg.load()?;
            let artifacts = art.paths().load(conditional)?;
            let sweep = SweepSpec {
                methods: &methods,
                seeds: &seeds,
                n,
                conditional,
                mode,
                real: real.as_deref(),
                truth: truth.as_deref(),
            };
            let mut buf = Vec::new();
            commands::cmd_sweep(&artifacts, &cfg, &sweep, threads()?, &mut buf)?;
            fs::write(out, buf)?;
            Ok(())
        }
        Command::Gen {
            kind,
            n,
            length,
            seed,
            out,
        } => commands::cmd_gen(kind, n, length, seed, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "ess: {e}");
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}
