use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use opa_steer::io::{load_config, run, Mode, RunError};

/// Optical phased-array beam steering simulator.
#[derive(Debug, Parser)]
#[command(name = "opa-steer", version)]
struct Cli {
    /// cut | pattern3d | analyze | sweep
    mode: Mode,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads (default: available cores).
    #[arg(long)]
    workers: Option<usize>,
}

fn execute(cli: &Cli) -> Result<serde_json::Value, RunError> {
    let config = load_config(&cli.config)?;
    let workers = cli
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if let Some(n) = cli.workers.filter(|&n| n > 0) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let summary = run(cli.mode, &config, &cli.out, workers)?;
    let mut value = summary.summary;
    value["files"] = summary
        .files
        .iter()
        .map(|p| serde_json::Value::String(p.display().to_string()))
        .collect();
    Ok(value)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
