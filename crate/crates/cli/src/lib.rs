//! Command-line driver for the spiqgan library.
//!
//! Every command reads one configuration document (see [`config`]). Values
//! come from an optional `--config` file, then `--set section.key=value`
//! overrides in order, then the command's own flags.

pub mod commands;
pub mod config;
pub mod error;
pub mod sweep;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "spiqgan", version, about = "Quantum-circuit GAN for binned spike trains")]
pub struct Cli {
    /// Configuration file (`[section]` headers, `key = value` lines).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides training.seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides paths.out.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// `section.key=value`, applied after the config file. Repeatable.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a generator and critic on a spike file.
    Train {
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Sample windows from a checkpoint.
    Generate {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare generated and reference spike files.
    Evaluate {
        #[arg(long)]
        generated: Option<PathBuf>,
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long)]
        max_lag: Option<usize>,
    },
    /// Train and evaluate over a grid of shapes, K values and seeds.
    Sweep {
        #[arg(long)]
        data: Option<PathBuf>,
        /// Run cells concurrently.
        #[arg(long)]
        parallel: bool,
    },
    /// Write a synthetic bursty spike file.
    Surrogate {
        /// Comma-separated per-neuron spike probabilities.
        #[arg(long)]
        rates: Option<String>,
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long)]
        burst_prob: Option<f64>,
        #[arg(long)]
        burst_gain: Option<f64>,
        #[arg(long)]
        bin_width: Option<f64>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn push(out: &mut Vec<String>, key: &str, value: Option<impl ToString>) {
    if let Some(v) = value {
        out.push(format!("{key}={}", v.to_string()));
    }
}

fn path(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

impl Cli {
    /// `--set` values followed by the flags, as overrides.
    pub fn overrides(&self) -> Vec<String> {
        let mut o = self.set.clone();
        push(&mut o, "training.seed", self.seed);
        push(&mut o, "paths.out", path(&self.out));
        match &self.command {
            Command::Train { data } => push(&mut o, "paths.data", path(data)),
            Command::Generate { checkpoint, count, output } => {
                push(&mut o, "paths.checkpoint", path(checkpoint));
                push(&mut o, "generate.count", *count);
                push(&mut o, "paths.output", path(output));
            }
            Command::Evaluate { generated, reference, max_lag } => {
                push(&mut o, "paths.generated", path(generated));
                push(&mut o, "paths.reference", path(reference));
                push(&mut o, "evaluate.max_lag", *max_lag);
            }
            Command::Sweep { data, parallel } => {
                push(&mut o, "paths.data", path(data));
                if *parallel {
                    o.push("sweep.parallel=true".into());
                }
            }
            Command::Surrogate {
                rates,
                bins,
                burst_prob,
                burst_gain,
                bin_width,
                output,
            } => {
                push(&mut o, "surrogate.rates", rates.clone());
                push(&mut o, "surrogate.bins", *bins);
                push(&mut o, "surrogate.burst_prob", *burst_prob);
                push(&mut o, "surrogate.burst_gain", *burst_gain);
                push(&mut o, "surrogate.bin_width", *bin_width);
                push(&mut o, "paths.output", path(output));
            }
        }
        o
    }

    pub fn run(&self) -> CliResult<()> {
        let cfg = RunConfig::load(self.config.as_deref(), &self.overrides())?;
        match self.command {
            Command::Train { .. } => {
                commands::train(&cfg)?;
            }
            Command::Generate { .. } => {
                commands::generate(&cfg)?;
            }
            Command::Evaluate { .. } => {
                let s = commands::evaluate(&cfg)?;
                print!("{}", s.to_csv());
            }
            Command::Sweep { .. } => {
                sweep::sweep(&cfg)?;
            }
            Command::Surrogate { .. } => {
                commands::surrogate(&cfg)?;
            }
        }
        Ok(())
    }
}

/// Parses `args` (program name first) and runs the command. Usage errors
/// are reported as validation failures.
pub fn run_from_args<I, T>(args: I) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => cli.run(),
        Err(e) if e.use_stderr() => Err(CliError::validation(e.to_string().trim_end())),
        // --help and --version
        Err(e) => {
            let _ = e.print();
            Ok(())
        }
    }
}

/// [`run_from_args`] with the error printed to stderr; returns the exit code.
pub fn main_exit<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match run_from_args(args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
