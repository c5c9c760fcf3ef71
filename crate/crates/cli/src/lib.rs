//! Command-line driver for the kgclin pipeline.

pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use kgclin::corpus::TaskKind;

use crate::commands::{GenArgs, Metric, Split};
use crate::config::RunArgs;
use crate::error::Result;

#[derive(Debug, Parser)]
#[command(name = "kgclin", version, about = "Rule cascade plus dual-channel CNN for disease-status labeling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus and a run.toml pointing at it.
    Gen {
        /// Generator spec (TOML). Without it a challenge-like spec is used.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 500)]
        records: usize,
        #[arg(long, default_value_t = 200)]
        test_records: usize,
    },
    /// Dump trigger phrases as JSONL.
    Triggers {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value = "test")]
        split: Split,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one model per (task, disease).
    Train {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Label the test corpus with the rule cascade and trained models.
    Classify {
        #[command(flatten)]
        run: RunArgs,
        /// Prediction file; `<report_dir>/predictions.jsonl` when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score predictions against gold judgments.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Paired t-test on overall scores of two sets of evaluation reports.
    Ttest {
        #[arg(long, num_args = 1.., required = true)]
        a: Vec<PathBuf>,
        #[arg(long, num_args = 1.., required = true)]
        b: Vec<PathBuf>,
        #[arg(long, default_value = "textual")]
        task: TaskKind,
        #[arg(long, value_enum, default_value = "macro")]
        metric: Metric,
    },
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Gen {
            spec,
            out: dir,
            seed,
            records,
            test_records,
        } => commands::gen(
            &GenArgs {
                spec,
                out: dir,
                seed,
                records,
                test_records,
            },
            out,
        ),
        Command::Triggers { run, split, out: dest } => commands::triggers(&run, split, dest.as_deref(), out),
        Command::Train { run } => commands::train(&run, out),
        Command::Classify { run, out: dest } => commands::classify(&run, dest.as_deref(), out),
        Command::Evaluate { run, predictions } => commands::evaluate(&run, predictions.as_deref(), out),
        Command::Ttest { a, b, task, metric } => commands::ttest(&a, &b, task, metric, out),
    }
}

/// Parses `args`, runs the command, and returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if code == 0 {
                write!(out, "{}", e.render())
            } else {
                write!(err, "{}", e.render())
            };
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
