use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use vtol_nav::sim::{
    read_inputs, read_landmark_log, read_truth, run_closed_loop, run_closed_loop_logged,
    run_replay, write_run, SimConfig, SimError,
};

#[derive(Parser)]
#[command(name = "navsim", version, about = "Closed-loop VTOL observer/controller simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the closed loop and write run.csv and summary.txt.
    Run {
        /// Scenario file; the built-in reference scenario when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides `sim.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Also write landmarks.csv and truth.csv for replay.
        #[arg(long)]
        emit_log: bool,
    },
    /// Run the observer alone on a recorded landmark log.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// CSV with columns t, Tx, Ty, Tz, thrust (e.g. a run.csv).
        #[arg(long)]
        inputs: Option<PathBuf>,
    },
    /// Run the oracle and acceptance suite and print a pass/fail table.
    Verify,
}

fn load(config: Option<&PathBuf>) -> Result<SimConfig, SimError> {
    match config {
        Some(path) => Ok(SimConfig::from_file(path)?),
        None => Ok(SimConfig::reference()),
    }
}

fn report(written: &[PathBuf]) {
    for p in written {
        println!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> Result<bool, SimError> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            emit_log,
        } => {
            let mut cfg = load(config.as_ref())?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let start = Instant::now();
            let record = if emit_log {
                run_closed_loop_logged(&cfg)?
            } else {
                run_closed_loop(&cfg)?
            };
            log::info!("{} ticks in {:.2?}", record.rows.len(), start.elapsed());
            report(&write_run(&record, &out)?);
            print!("{}", record.summary.to_text());
            Ok(true)
        }
        Command::Replay {
            log,
            truth,
            config,
            out,
            inputs,
        } => {
            let cfg = load(config.as_ref())?;
            let frames = read_landmark_log(&log)?;
            let truth = read_truth(&truth)?;
            let inputs = inputs.as_deref().map(read_inputs).transpose()?;
            let record = run_replay(&frames, &truth, inputs.as_deref(), &cfg)?;
            report(&write_run(&record, &out)?);
            print!("{}", record.summary.to_text());
            Ok(true)
        }
        Command::Verify => {
            let results = vtol_verify::run_all();
            for r in &results {
                println!("{r}");
            }
            Ok(results.iter().all(|r| r.passed))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
