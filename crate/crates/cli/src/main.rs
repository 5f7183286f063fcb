// SPDX-License-Identifier: Apache-2.0
use std::process::ExitCode;

use debugfabric_cli::{run_pipeline, Status};

fn verbosity(args: &[String]) -> log::LevelFilter {
    let mut n = 0;
    for a in args.iter().skip(1) {
        if a == "--verbose" {
            n += 1;
        } else if a.starts_with('-') && !a.starts_with("--") {
            n += a.chars().filter(|&c| c == 'v').count();
        }
    }
    match n {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    env_logger::Builder::new().filter_level(verbosity(&args)).format_timestamp(None).init();
    let out = run_pipeline(&args);
    match &out.text {
        Some(t) => print!("{t}"),
        None => println!("{}", serde_json::to_string_pretty(&out.summary).expect("summary is JSON")),
    }
    if let Some(e) = out.summary.get("error").and_then(|e| e.as_str()) {
        if out.status != Status::Success {
            eprintln!("error: {e}");
        }
    }
    ExitCode::from(out.status.code())
}
