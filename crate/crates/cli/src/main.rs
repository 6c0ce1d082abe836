//! `fsirom`: offline, reduce, online and analyze stages of the FSI reduced basis pipelines.
//!
//! Exit codes: 0 success, 1 invalid input or configuration, 2 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fsirom::tooling::pipeline::{self, Scheme};
use fsirom::tooling::{Config, OutputDir};
use fsirom::FsiError;

#[derive(Debug, Parser)]
#[command(name = "fsirom", version, about = "Reduced basis pipelines for a 2D fluid-structure benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Configuration file (`[section]` headers with `key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; later stages read what earlier ones wrote here.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the benchmark mesh and its statistics.
    Mesh(Common),
    /// Run the monolithic full-order model and store snapshots and the trajectory.
    OfflineMonolithic(Common),
    /// Run the partitioned full-order model and store snapshots and the trajectory.
    OfflinePartitioned(Common),
    /// Build POD bases from stored snapshots.
    Reduce {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = ["monolithic", "partitioned"])]
        scheme: String,
    },
    /// Run the monolithic reduced model.
    OnlineMonolithic {
        #[command(flatten)]
        common: Common,
        /// One count for every field, or `key=value` pairs such as `n_u=10,n_lambda=3`.
        #[arg(long)]
        modes: Option<String>,
    },
    /// Run the partitioned reduced model.
    OnlinePartitioned {
        #[command(flatten)]
        common: Common,
        /// One count for every field, or `key=value` pairs such as `n_z=8,n_p0=6`.
        #[arg(long)]
        modes: Option<String>,
    },
    /// Compare reduced runs with their offline trajectories.
    Analyze(Common),
}

fn load(common: &Common, modes: Option<&str>) -> fsirom::Result<(Config, OutputDir)> {
    let mut cfg = fsirom::tooling::parse_config(&common.config)?;
    if let Some(m) = modes {
        pipeline::apply_modes(&mut cfg.online, m)?;
    }
    Ok((cfg, OutputDir::create(&common.output)?))
}

fn run(cli: Cli) -> fsirom::Result<()> {
    let (common, modes) = match &cli.command {
        Command::Mesh(c) | Command::OfflineMonolithic(c) | Command::OfflinePartitioned(c) | Command::Analyze(c) => (c, None),
        Command::Reduce { common, .. } => (common, None),
        Command::OnlineMonolithic { common, modes } | Command::OnlinePartitioned { common, modes } => (common, modes.as_deref()),
    };
    let (cfg, mut out) = load(common, modes)?;
    // The manifest is written even when a reduced run stops early, since its partial output is kept.
    let result = match &cli.command {
        Command::Mesh(_) => pipeline::run_mesh(&cfg, &mut out),
        Command::OfflineMonolithic(_) => pipeline::run_offline_monolithic_stage(&cfg, &mut out),
        Command::OfflinePartitioned(_) => pipeline::run_offline_partitioned_stage(&cfg, &mut out),
        Command::Reduce { scheme, .. } => scheme.parse::<Scheme>().and_then(|s| pipeline::run_reduce(&cfg, s, &mut out)),
        Command::OnlineMonolithic { .. } => pipeline::run_online_monolithic(&cfg, &mut out),
        Command::OnlinePartitioned { .. } => pipeline::run_online_partitioned(&cfg, &mut out),
        Command::Analyze(_) => pipeline::run_analyze(&cfg, &mut out).map(|reports| {
            for (scheme, rep) in reports {
                for f in &rep.fields {
                    println!("{} {}: average relative error {:.3e}", scheme.as_str(), f.field, f.average());
                }
                if let Some(s) = &rep.stress {
                    println!("{} interface stress: average error {:.3e}", scheme.as_str(), s.average());
                }
            }
        }),
    };
    let manifest = out.finish();
    result?;
    manifest.map(|_| ())
}

fn exit_code(e: &FsiError) -> u8 {
    if e.is_numerical() {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
