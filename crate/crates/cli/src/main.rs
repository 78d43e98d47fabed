// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tilesoc::experiment::{
    emit_report, load_config, load_sweep, run_experiment, summary, ConfigError, ConfigErrorKind, ExperimentError,
    RunOptions,
};
use tilesoc::sim::SimError;

/// Exit codes by failure category.
mod code {
    pub const CONFIG_IO: u8 = 3;
    pub const PARSE: u8 = 4;
    pub const INVALID: u8 = 5;
    pub const SIMULATION: u8 = 6;
    pub const DEADLOCK: u8 = 7;
    pub const DATA: u8 = 8;
    pub const OUTPUT: u8 = 9;
}

#[derive(Parser)]
#[command(name = "tilesoc", version, about = "Tiled SoC simulator and producer/consumer sweeps")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a sweep and write results.csv and summary.txt.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Sweep file; overrides the config's sweep section.
        #[arg(long)]
        sweep: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Write one event trace per run under <out>/traces.
        #[arg(long)]
        trace: bool,
        /// Parallel runs; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Data seed; the config's seed if unset.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse and check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn config_code(e: &ConfigError) -> u8 {
    match e.kind {
        ConfigErrorKind::Io => code::CONFIG_IO,
        ConfigErrorKind::Parse => code::PARSE,
        ConfigErrorKind::Invalid => code::INVALID,
    }
}

fn run_code(e: &ExperimentError) -> u8 {
    match e {
        ExperimentError::Point { source, .. } => run_code(source),
        ExperimentError::Workload(_) => code::INVALID,
        ExperimentError::Sim(SimError::Deadlock { .. }) => code::DEADLOCK,
        ExperimentError::Sim(_) => code::SIMULATION,
        ExperimentError::DataMismatch { .. } => code::DATA,
        ExperimentError::Io(_) => code::OUTPUT,
    }
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Validate { config } => match load_config(&config) {
            Ok((soc, sweep)) => {
                let points = sweep.map_or(0, |s| s.points().len());
                println!(
                    "{}: ok, {}x{} mesh, {} accelerators, {points} sweep points",
                    config.display(),
                    soc.noc.mesh_cols,
                    soc.noc.mesh_rows,
                    soc.accelerators().len()
                );
                ExitCode::SUCCESS
            }
            Err(e) => fail(config_code(&e), e),
        },
        Cmd::Run { config, sweep, out, trace, workers, seed } => {
            let (soc, inline) = match load_config(&config) {
                Ok(x) => x,
                Err(e) => return fail(config_code(&e), e),
            };
            let spec = match sweep {
                Some(path) => match load_sweep(&path, &soc) {
                    Ok(s) => s,
                    Err(e) => return fail(config_code(&e), e),
                },
                None => inline.unwrap_or_default(),
            };
            if let Err(e) = spec.validate(&soc) {
                return fail(code::INVALID, format!("sweep {}: {}", e.key, e.message));
            }
            let opts =
                RunOptions { workers, seed: seed.unwrap_or(soc.seed), trace_dir: trace.then(|| out.join("traces")) };
            let table = match run_experiment(&soc, &spec, &opts) {
                Ok(t) => t,
                Err(e) => return fail(run_code(&e), e),
            };
            if let Err(e) = emit_report(&table, &spec, &out) {
                return fail(run_code(&e), e);
            }
            print!("{}", summary(&table, &spec));
            println!("wrote {}", out.join("results.csv").display());
            ExitCode::SUCCESS
        }
    }
}
