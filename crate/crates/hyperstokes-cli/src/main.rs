use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hyperstokes_cli::{exit_code, run, Mode, RunConfig, SweepParam};

/// Stokes and steady Navier–Stokes flow past a disk in the hyperbolic plane.
#[derive(Parser, Debug)]
#[command(name = "hyperstokes", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Flat key = value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for report.json and CSVs.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Omit timings so reports are bit-identical across runs.
    #[arg(long)]
    reproducible: bool,
    /// Solve even when ‖dF‖ is above the smallness threshold.
    #[arg(long)]
    unsafe_allow_large_data: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    SolveStokes(Common),
    SolveNs(Common),
    Verify(Common),
    Sweep {
        #[command(flatten)]
        common: Common,
        /// One of grid, R_max, c, n.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
    },
}

fn load(c: &Common) -> hyperstokes::Result<RunConfig> {
    let mut cfg = RunConfig::load(c.config.as_deref(), std::env::vars())?;
    if let Some(o) = &c.out {
        cfg.out = o.clone();
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    cfg.reproducible |= c.reproducible;
    cfg.allow_large_data |= c.unsafe_allow_large_data;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::SolveStokes(c) => load(c).and_then(|cfg| run(Mode::Stokes, &cfg, None)),
        Command::SolveNs(c) => load(c).and_then(|cfg| run(Mode::NavierStokes, &cfg, None)),
        Command::Verify(c) => load(c).and_then(|cfg| run(Mode::Verify, &cfg, None)),
        Command::Sweep {
            common,
            param,
            values,
        } => load(common)
            .and_then(|cfg| Ok((cfg, param.parse::<SweepParam>()?)))
            .and_then(|(cfg, p)| run(Mode::Sweep, &cfg, Some((p, values)))),
    };
    match &result {
        Ok(o) if !o.passed => {
            for c in o.report["checks"]
                .as_array()
                .into_iter()
                .flatten()
                .filter(|c| c["passed"] == false)
            {
                eprintln!(
                    "check failed: {} ({}) = {} {} {}",
                    c["name"], c["anchor"], c["value"], c["relation"], c["bound"]
                );
            }
        }
        Err(e) => eprintln!("error: {e}"),
        _ => {}
    }
    ExitCode::from(exit_code(&result) as u8)
}
