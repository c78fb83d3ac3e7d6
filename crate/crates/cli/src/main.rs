use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use uav_noma::env::{Access, Scheme};
use uav_noma_cli::{run_experiment, RunConfig};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeArg {
    FixedAris,
    DmSwitching,
    AllActive,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AccessArg {
    Noma,
    Tdma,
    Fdma,
}

/// Train and evaluate multi-UAV data-collection policies.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    /// Scenario file (JSON).
    #[arg(long, env = "UAV_NOMA_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, env = "UAV_NOMA_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "UAV_NOMA_EPISODES")]
    episodes: Option<usize>,
    #[arg(long, value_enum, env = "UAV_NOMA_SCHEME")]
    scheme: Option<SchemeArg>,
    #[arg(long, value_enum, env = "UAV_NOMA_ACCESS")]
    access: Option<AccessArg>,
    /// Output directory.
    #[arg(long, env = "UAV_NOMA_OUT", default_value = "out")]
    out: PathBuf,
    /// Evaluate the checkpoint in the output directory without training.
    #[arg(long, env = "UAV_NOMA_EVAL_ONLY")]
    eval_only: bool,
    /// Write per-slot platform trajectories of the evaluation episodes.
    #[arg(long, env = "UAV_NOMA_TRACE")]
    trace: bool,
    /// Log progress; repeat for more detail.
    #[arg(short, long, action = clap::ArgAction::Count, env = "UAV_NOMA_VERBOSE")]
    verbose: u8,
    /// Record wall-clock time per episode in the metrics.
    #[arg(long, env = "UAV_NOMA_TIMING")]
    timing: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    let rc = RunConfig {
        config: cli.config,
        seed: cli.seed,
        episodes: cli.episodes,
        scheme: cli.scheme.map(|s| match s {
            SchemeArg::FixedAris => Scheme::FixedAris,
            SchemeArg::DmSwitching => Scheme::DmSwitching,
            SchemeArg::AllActive => Scheme::AllActive,
        }),
        access: cli.access.map(|a| match a {
            AccessArg::Noma => Access::Noma,
            AccessArg::Tdma => Access::Tdma,
            AccessArg::Fdma => Access::Fdma,
        }),
        out: cli.out,
        eval_only: cli.eval_only,
        trace: cli.trace,
        timing: cli.timing,
    };
    match run_experiment(&rc) {
        Ok(runs) => {
            for r in &runs {
                println!(
                    "{} / {} seed {}: {:.3} bits per evaluation episode",
                    r.scenario.scheme.as_str(),
                    r.scenario.access.as_str(),
                    r.scenario.seed,
                    r.eval_throughput_bits()
                );
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
