//! `semdiff`: build code-pair datasets with differential-fuzzing ground truth
//! and audit code evaluation metrics for surface bias.

mod commands;
mod config;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use semdiff_core::regions::ErrorFlavor;

use crate::config::{Overrides, RunConfig};
use crate::io::{parse_score_arg, Classify, CmdResult};

#[derive(Parser, Debug)]
#[command(name = "semdiff", version, about)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Mutation operators to use, e.g. AOR,ROR.
    #[arg(long, global = true)]
    operators: Option<String>,
    /// Threshold grid step.
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// absolute or squared.
    #[arg(long, global = true)]
    error_flavor: Option<ErrorFlavor>,
    /// Optimizer answers from a fixture file instead of the network.
    #[arg(long, global = true)]
    stub_fixture: Option<PathBuf>,
    /// Runner executable, or `toy` for the built-in toy runner.
    #[arg(long, global = true)]
    runner: Option<String>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate mutated and optimized variants for a task corpus.
    Variants {
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fill df_score by differential fuzzing; resumes from an existing output.
    Score {
        /// Variants or pairs file.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        tasks: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Discard an existing output instead of resuming from it.
        #[arg(long)]
        restart: bool,
    },
    /// Fill surface_sim for every pair.
    Surface {
        /// Variants or pairs file.
        #[arg(long)]
        input: PathBuf,
        /// Needed when the input holds variants.
        #[arg(long)]
        tasks: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// MAE, Spearman against surface similarity, and distinguishability per metric.
    Audit {
        #[arg(long)]
        input: PathBuf,
        /// Metric score file as NAME=PATH (CSV or JSONL); repeatable.
        #[arg(long = "scores", value_parser = parse_score_arg)]
        scores: Vec<(String, PathBuf)>,
        /// Comma-separated metrics; default all available.
        #[arg(long, value_delimiter = ',')]
        metrics: Option<Vec<String>>,
        /// df_score at or above which a pair counts as equivalent.
        #[arg(long, default_value_t = 1.0)]
        eq_min: f64,
        /// df_score at or below which a pair counts as non-equivalent.
        #[arg(long, default_value_t = 0.0)]
        neq_max: f64,
        /// CSV report path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Select SFD/DFS thresholds and report region coverage.
    Regions {
        #[arg(long)]
        input: PathBuf,
        #[arg(long = "scores", value_parser = parse_score_arg)]
        scores: Vec<(String, PathBuf)>,
        #[arg(long, value_delimiter = ',')]
        metrics: Option<Vec<String>>,
        /// Use these thresholds (x_lo,x_hi,y_lo,y_hi) instead of searching.
        #[arg(long, value_parser = commands::regions::parse_thresholds)]
        thresholds: Option<semdiff_core::RegionThresholds>,
        /// Scatter CSV (x, y, label).
        #[arg(long)]
        scatter: Option<PathBuf>,
        /// JSON report path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a dataset by variant kind.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

fn run(cli: Cli) -> CmdResult {
    let g = &cli.global;
    let overrides = Overrides {
        seed: g.seed,
        jobs: g.jobs,
        operators: g.operators.clone(),
        delta: g.delta,
        error_flavor: g.error_flavor,
        stub_fixture: g.stub_fixture.clone(),
        runner: g.runner.clone(),
    };
    let cfg = RunConfig::load(g.config.as_deref(), &overrides).usage()?;
    log::debug!("configuration digest {}", cfg.digest());
    match &cli.command {
        Command::Variants { tasks, out } => commands::variants::run(&cfg, tasks, out),
        Command::Score {
            input,
            tasks,
            out,
            restart,
        } => commands::score::run(&cfg, input, tasks, out, *restart),
        Command::Surface { input, tasks, out } => commands::surface::run(&cfg, input, tasks.as_deref(), out),
        Command::Audit {
            input,
            scores,
            metrics,
            eq_min,
            neq_max,
            out,
        } => commands::audit::run(
            input,
            scores,
            metrics.as_deref(),
            &commands::audit::Split {
                eq_min: *eq_min,
                neq_max: *neq_max,
            },
            out.as_deref(),
        ),
        Command::Regions {
            input,
            scores,
            metrics,
            thresholds,
            scatter,
            out,
        } => commands::regions::run(
            &cfg,
            input,
            scores,
            metrics.as_deref(),
            *thresholds,
            scatter.as_deref(),
            out.as_deref(),
        ),
        Command::Report { input, json } => commands::report::run(input, *json),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code() as u8)
        }
    }
}
