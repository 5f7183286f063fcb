// SPDX-License-Identifier: Apache-2.0
//! Command-line flow: compile once (place, route, build overlays), then
//! reconfigure the overlays per debug turn without touching the user
//! circuit. Every step reads and writes artifacts in a project directory.

pub mod bench;
mod commands;
pub mod flow;
pub mod project;
pub mod stats;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use debugfabric_core::{Error, Exec};

pub use commands::{OverlayReport, VerifyReport};
pub use flow::Order;

#[derive(Debug, Parser)]
#[command(name = "debugfabric", version, about = "Build and reconfigure FPGA debug overlays")]
pub struct Cli {
    /// Project directory holding every artifact and the manifest.
    #[arg(long, global = true, default_value = ".")]
    pub dir: PathBuf,
    /// Run everything on one thread.
    #[arg(long, global = true)]
    pub sequential: bool,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write an architecture description (arch.json).
    GenArch(GenArchArgs),
    /// Generate a synthetic user circuit (netlist.blif).
    SynthRandom(SynthArgs),
    /// Generate a random trigger over the user circuit's signals.
    SynthTrigger(SynthTriggerArgs),
    /// Place and route the user circuit (placement.json, routing.json).
    Pnr(PnrArgs),
    /// Search the minimum routable channel width (minw.json).
    Minw(MinwArgs),
    /// Build the trace overlay from leftover routing (overlay.json).
    BuildTraceOverlay(TraceArgs),
    /// Build the trigger overlay from spare logic (trigger_fabric.json).
    BuildTriggerFabric(FabricArgs),
    /// Debug time: route requested signals to trace inputs (debug_config.json).
    SelectSignals(SelectArgs),
    /// Debug time: map a trigger onto the trigger overlay (trigger_config.json).
    MapTrigger(MapArgs),
    /// Re-check every artifact with the independent checkers.
    Verify,
    /// Summarize the project (stats.json).
    Stats(StatsArgs),
    /// Run the whole flow over the bundled suite and check thresholds.
    Bench(BenchArgs),
    /// Compare trigger mapping against a full recompile over the suite.
    BenchTriggerSpeedup(SpeedupArgs),
}

#[derive(Debug, Args)]
pub struct GenArchArgs {
    /// Use the architecture of a bundled suite circuit (e.g. syn50).
    #[arg(long, conflicts_with_all = ["for_luts", "grid_width", "grid_height"])]
    pub suite: Option<String>,
    /// Size the grid for this many LUTs (plus the usual share of FFs).
    #[arg(long)]
    pub for_luts: Option<usize>,
    #[arg(long, default_value_t = 8)]
    pub grid_width: usize,
    #[arg(long, default_value_t = 8)]
    pub grid_height: usize,
    #[arg(long, default_value_t = 4)]
    pub lut_size: usize,
    #[arg(long, default_value_t = 4)]
    pub bles_per_clb: usize,
    #[arg(long, default_value_t = 12)]
    pub clb_inputs: usize,
    #[arg(long, default_value_t = 16)]
    pub channel_width: usize,
    #[arg(long, default_value_t = 0.5)]
    pub fc_in: f64,
    #[arg(long, default_value_t = 1.0)]
    pub fc_out: f64,
    #[arg(long, default_value_t = 4)]
    pub tb_period: usize,
    #[arg(long, default_value_t = 8)]
    pub tb_inputs: usize,
    #[arg(long, default_value_t = 0.5)]
    pub tb_fc: f64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Generate a bundled suite circuit (e.g. syn50) instead.
    #[arg(long, conflicts_with_all = ["luts", "rent"])]
    pub suite: Option<String>,
    #[arg(long, default_value_t = 50)]
    pub luts: usize,
    #[arg(long, default_value_t = 0.65)]
    pub rent: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SynthTriggerArgs {
    #[arg(long, default_value_t = 4)]
    pub les: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Output file name inside the project.
    #[arg(long, default_value = "trigger.blif")]
    pub out: String,
}

#[derive(Debug, Args)]
pub struct PnrArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Route at this channel width instead of searching w_min.
    #[arg(long)]
    pub width: Option<usize>,
    /// Route at the nearest even width ≥ (1 + margin) · w_min.
    #[arg(long, default_value_t = 0.3)]
    pub margin: f64,
    /// Upper bound of the width search.
    #[arg(long, default_value_t = 64)]
    pub w_hi: usize,
}

#[derive(Debug, Args)]
pub struct MinwArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 64)]
    pub w_hi: usize,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Distinct trace inputs each signal should reach.
    #[arg(long, default_value_t = 2)]
    pub fanout_target: usize,
    #[arg(long, default_value_t = 50)]
    pub max_iters: usize,
    /// Which overlay claims leftover resources first.
    #[arg(long, value_enum, default_value_t = Order::TraceFirst)]
    pub order: Order,
}

#[derive(Debug, Args)]
pub struct FabricArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Maximum outgoing (and incoming) links per overlay cell.
    #[arg(long, default_value_t = 8)]
    pub link_budget: usize,
    #[arg(long, value_enum, default_value_t = Order::TraceFirst)]
    pub order: Order,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Signals to observe (comma-separated or repeated).
    #[arg(long, value_delimiter = ',', required_unless_present = "random")]
    pub want: Vec<String>,
    /// Request this many random signals instead.
    #[arg(long, conflicts_with = "want")]
    pub random: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    /// Trigger netlist (BLIF); relative names are looked up in the project
    /// first.
    #[arg(long, default_value = "trigger.blif")]
    pub trigger: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub gamma_ind: u32,
    #[arg(long, default_value_t = 10_000)]
    pub gamma_blk: u32,
    /// Penalty for a tapped signal or the output with no free path.
    #[arg(long, default_value_t = 50)]
    pub gamma_feed: u32,
    /// Independent annealing runs; the best wins.
    #[arg(long, default_value_t = 1)]
    pub restarts: usize,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Print a human-readable table instead of JSON.
    #[arg(long)]
    pub table: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// JSON file with acceptance thresholds; built-in defaults otherwise.
    #[arg(long)]
    pub thresholds: Option<PathBuf>,
    /// Suite circuits to run (default: all).
    #[arg(long, value_delimiter = ',')]
    pub circuits: Vec<String>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Random request sets per circuit for the configuration check.
    #[arg(long, default_value_t = 50)]
    pub requests: usize,
    #[arg(long, default_value_t = 8)]
    pub link_budget: usize,
}

#[derive(Debug, Args)]
pub struct SpeedupArgs {
    #[arg(long, value_delimiter = ',')]
    pub circuits: Vec<String>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub link_budget: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Success,
    /// Finished, but not everything asked for was achieved.
    Partial,
    ValidationError,
    /// Unroutable, infeasible, or a checker found violations.
    AlgorithmicFailure,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Success => 0,
            Status::Partial => 1,
            Status::ValidationError => 2,
            Status::AlgorithmicFailure => 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub status: Status,
    /// Machine-readable summary for standard output.
    pub summary: Value,
    /// Human-readable rendering requested instead (`stats --table`).
    pub text: Option<String>,
}

/// Exit status for an error, by its root cause.
pub fn classify(e: &anyhow::Error) -> Status {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<Error>() {
            return match err {
                Error::Validation(_) | Error::Syntax { .. } | Error::Capacity(_) | Error::UnknownSignal(_) => {
                    Status::ValidationError
                }
                Error::Unroutable(_) | Error::Internal(_) => Status::AlgorithmicFailure,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() || cause.downcast_ref::<serde_json::Error>().is_some() {
            return Status::ValidationError;
        }
    }
    Status::AlgorithmicFailure
}

/// The producing-command record: arguments without the program name and
/// options that do not affect outputs.
fn command_record(args: &[String]) -> String {
    let mut out = Vec::new();
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        if a == "--dir" {
            it.next();
        } else if a.starts_with("--dir=") || a == "--sequential" || a.starts_with("-v") || a == "--verbose" {
        } else {
            out.push(a.as_str());
        }
    }
    out.join(" ")
}

/// Parses `args` (program name first) and runs one subcommand.
pub fn run_pipeline<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let args: Vec<String> = args.into_iter().map(|a| a.into().to_string_lossy().into_owned()).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let help = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let text = e.render().to_string();
            return if help {
                Outcome { status: Status::Success, summary: json!({ "help": text.clone() }), text: Some(text) }
            } else {
                Outcome { status: Status::ValidationError, summary: json!({ "error": text }), text: None }
            };
        }
    };
    run_cli(&cli, &command_record(&args))
}

pub fn run_cli(cli: &Cli, record: &str) -> Outcome {
    let exec = if cli.sequential { Exec::Sequential } else { Exec::Parallel };
    match commands::dispatch(cli, record, exec) {
        Ok((status, mut summary)) => {
            let mut text = None;
            if let Value::Object(m) = &mut summary {
                text = m.remove("table").and_then(|t| t.as_str().map(str::to_string));
                m.insert("status".into(), json!(status));
                m.insert("exit_code".into(), json!(status.code()));
            }
            Outcome { status, summary, text }
        }
        Err(e) => {
            let status = classify(&e);
            Outcome {
                status,
                summary: json!({ "status": status, "exit_code": status.code(), "error": format!("{e:#}") }),
                text: None,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_drops_directory_and_verbosity() {
        let a: Vec<String> = ["df", "--dir", "/tmp/x", "pnr", "--seed", "3", "-vv", "--sequential"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(command_record(&a), "pnr --seed 3");
    }

    #[test]
    fn exit_codes_follow_root_cause() {
        let v: anyhow::Error = Error::UnknownSignal("x".into()).into();
        assert_eq!(classify(&v), Status::ValidationError);
        let u: anyhow::Error = anyhow::Error::from(Error::Unroutable("w".into())).context("pnr");
        assert_eq!(classify(&u), Status::AlgorithmicFailure);
        assert_eq!(Status::Partial.code(), 1);
    }

    #[test]
    fn help_and_bad_flags() {
        assert_eq!(run_pipeline(["df", "--help"]).status, Status::Success);
        assert_eq!(run_pipeline(["df", "pnr", "--bogus"]).status, Status::ValidationError);
    }
}
