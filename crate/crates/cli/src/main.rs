//! Operator entry points: database inspection, hierarchy bootstrapping,
//! single-instruction grounding, suite evaluation and cache management.
//!
//! Exit codes: 0 success, 1 error, 2 budget exhausted or incomplete.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use groundwork::engine::Mode;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "groundwork",
    version,
    about = "Iterative skill grounding over a hierarchical skill database"
)]
struct Cli {
    /// JSON config file; relative paths inside it resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect a skill database file.
    Db {
        #[command(subcommand)]
        action: DbAction,
    },
    /// Ground one instruction in a scenario, printing every engine step.
    Ground(GroundArgs),
    /// Run a scenario suite and print the metrics grid.
    Eval(EvalArgs),
    /// Build a skill hierarchy bottom-up in a world.
    Bootstrap(BootstrapArgs),
    /// Manage record/replay cache files.
    Cache {
        #[command(subcommand)]
        action: CacheAction,
    },
}

#[derive(Subcommand)]
enum DbAction {
    /// Check structural rules; exit 1 with one line per violation.
    Validate { file: PathBuf },
    /// Per-level entry counts and plan lengths.
    Stats { file: PathBuf },
}

#[derive(Args)]
pub struct GroundArgs {
    /// Scenario JSON file.
    #[arg(long)]
    scenario: PathBuf,
    /// Overrides the scenario's instruction.
    #[arg(long)]
    instruction: Option<String>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    #[arg(long)]
    k: Option<usize>,
    /// Seed for the shift and the simulator.
    #[arg(long)]
    seed: Option<u64>,
    /// Trace output; defaults to `<scenario id>.trace.jsonl` in the trace directory.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Suite JSON file, or one of: ci, shift-small, shift-medium, shift-large, degree.
    #[arg(long)]
    suite: String,
    #[arg(long)]
    parallel: Option<usize>,
    /// Directory for report.json and per-episode traces.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
pub struct BootstrapArgs {
    /// Built-in world name or world JSON file.
    #[arg(long)]
    world: String,
    /// Highest level to build.
    #[arg(long, default_value_t = 3)]
    levels: u32,
    #[arg(long)]
    episodes: Option<u32>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Database output file.
    #[arg(long)]
    out: PathBuf,
    /// Observation dataset output file.
    #[arg(long)]
    observations: Option<PathBuf>,
    /// Build manifest output file.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CacheAction {
    /// Entry counts per backend and tag.
    Stats { file: PathBuf },
    /// Merge cache files into `into`, rejecting conflicting entries.
    Import {
        into: PathBuf,
        #[arg(required = true)]
        from: Vec<PathBuf>,
    },
    /// Write a normalized copy, optionally keeping one backend or tag.
    Export {
        from: PathBuf,
        to: PathBuf,
        #[arg(long)]
        backend: Option<String>,
        #[arg(long)]
        tag: Option<String>,
    },
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
        .map_err(|_| format!("unknown mode {s:?}; expected semgro, sg_l, sg_m or sg_h"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // usage errors exit 1; 2 is reserved for incomplete episodes
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result =
        config::CliConfig::load(cli.config.as_deref()).and_then(|config| match cli.command {
            Command::Db { action } => match action {
                DbAction::Validate { file } => commands::db_validate(&file),
                DbAction::Stats { file } => commands::db_stats(&file),
            },
            Command::Ground(args) => commands::ground(&config, &args),
            Command::Eval(args) => commands::eval(&config, &args),
            Command::Bootstrap(args) => commands::bootstrap(&config, &args),
            Command::Cache { action } => match action {
                CacheAction::Stats { file } => commands::cache_stats(&file),
                CacheAction::Import { into, from } => commands::cache_import(&into, &from),
                CacheAction::Export {
                    from,
                    to,
                    backend,
                    tag,
                } => commands::cache_export(&from, &to, backend.as_deref(), tag.as_deref()),
            },
        });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
