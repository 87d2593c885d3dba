use clap::{Parser, Subcommand};
use spray_core::cli_io::{execute, parse_config, Command, ScenarioConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "spray",
    version,
    about = "Thick-spray kinetic and fluid-kinetic models with consistency checks"
)]
struct Cli {
    /// Scenario config (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every seed in the scenario; at most 2^63 - 1 so it fits a TOML integer.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(..=i64::MAX as u64))]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Closed forms against quadrature for every kernel.
    KernelsCheck,
    /// Stochastic simulation of the coupled kinetic system.
    Dsmc,
    /// Fluid-kinetic spray simulation (thick, or thin with `mode = "thin-spray"`).
    SpraySim,
    /// Drag limit of the particle collision integral.
    VerifyProp1,
    /// Identity suite for the delocalized collision integrals.
    VerifyProp3,
    /// Order of the remainders and of the thin/thick discrepancy in the radius.
    RemainderScaling,
    /// Stochastic ensemble against the solver along an (eta, delta) schedule.
    CompareMoments,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::KernelsCheck => Command::KernelsCheck,
            Sub::Dsmc => Command::Dsmc,
            Sub::SpraySim => Command::SpraySim,
            Sub::VerifyProp1 => Command::VerifyProp1,
            Sub::VerifyProp3 => Command::VerifyProp3,
            Sub::RemainderScaling => Command::RemainderScaling,
            Sub::CompareMoments => Command::CompareMoments,
        }
    }
}

fn run(cli: Cli) -> Result<bool, Box<dyn std::error::Error>> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    let mut cfg = match &cli.config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            parse_config(&text)?
        }
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    let command = Command::from(cli.command);
    cfg.mode = command.mode(cfg.mode);
    let outcome = execute(&cfg, &cli.out)?;
    println!("{}", outcome.summary);
    for f in &outcome.files {
        eprintln!("wrote {}", f.display());
    }
    Ok(outcome.pass)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
