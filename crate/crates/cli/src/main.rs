use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vlstein_cli::{run, CliError, ExperimentConfig, Mode, SourceSpec, EXIT_OK, EXIT_OTHER, EXIT_VERIFICATION};

#[derive(Parser)]
#[command(name = "vlstein", version, about = "Type-II error exponents for distributed testing against independence")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal exponent over a noiseless link.
    Exponent(Common),
    /// Optimal exponent over a DMC with stop-feedback.
    ExponentDmc(Common),
    /// Monte Carlo run of the noiseless-link scheme.
    SimulateLink(Common),
    /// Monte Carlo run of the DMC scheme.
    SimulateDmc(Common),
    /// Exponent curves over a parameter grid.
    Sweep(Common),
    /// Property and oracle suites; exit 4 on any violation.
    Verify(Common),
}

/// Flags override fields of the config file.
#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the effective config as JSON and exit.
    #[arg(long)]
    dump_config: bool,
    /// Doubly symmetric binary source with this crossover.
    #[arg(long, conflicts_with = "rho")]
    alpha: Option<f64>,
    /// Gaussian pair with this correlation.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    epsilon_prime: Option<f64>,
}

impl Command {
    fn split(self) -> (Mode, Common) {
        match self {
            Command::Exponent(c) => (Mode::Exponent, c),
            Command::ExponentDmc(c) => (Mode::ExponentDmc, c),
            Command::SimulateLink(c) => (Mode::SimulateLink, c),
            Command::SimulateDmc(c) => (Mode::SimulateDmc, c),
            Command::Sweep(c) => (Mode::Sweep, c),
            Command::Verify(c) => (Mode::Verify, c),
        }
    }
}

fn effective_config(mode: Mode, flags: &Common) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &flags.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.mode = Some(mode);
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    if flags.trials.is_some() {
        cfg.trials = flags.trials;
    }
    if flags.out.is_some() {
        cfg.output_path = flags.out.clone();
    }
    if let Some(alpha) = flags.alpha {
        cfg.source = Some(SourceSpec::Dsbs { alpha });
    }
    if let Some(rho) = flags.rho {
        cfg.source = Some(SourceSpec::Gaussian { rho });
    }
    macro_rules! set {
        ($($f:ident),*) => { $(if flags.$f.is_some() { cfg.$f = flags.$f; })* };
    }
    set!(rate, epsilon, n, mu, kappa, epsilon_prime);
    cfg.validate()?;
    Ok(cfg)
}

fn execute(mode: Mode, flags: Common) -> Result<i32, CliError> {
    let cfg = effective_config(mode, &flags)?;
    if flags.dump_config {
        println!("{}", cfg.to_json());
        return Ok(EXIT_OK);
    }
    let outcome = run(&cfg)?;
    match &cfg.output_path {
        Some(path) => std::fs::write(path, &outcome.csv)?,
        None => std::io::stdout().lock().write_all(outcome.csv.as_bytes())?,
    }
    eprintln!("{}", outcome.summary);
    Ok(if outcome.verified { EXIT_OK } else { EXIT_VERIFICATION })
}

fn main() -> ExitCode {
    let (mode, flags) = Cli::parse().command.split();
    let code = match execute(mode, flags) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("vlstein: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(u8::try_from(code).unwrap_or(EXIT_OTHER as u8))
}
