use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cnls_cli::{commands, CliError, Options, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "cnls", version, about = "Ground states, evolution and orbital stability of three coupled NLS equations")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed override for the solver noise or the stability ensemble.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute a ground state and write groundstate.json and profile.csv.
    Solve,
    /// Evolve a profile and write trace.csv.
    Evolve {
        /// Profile CSV on the configured grid.
        #[arg(long)]
        input: PathBuf,
    },
    /// Perturb the ground state and track its orbital distance.
    Stability,
    /// Subadditivity margins for the configured mass splits.
    Subadd,
    /// Run the built-in oracle checks.
    Validate,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let opts = Options { out: cli.out, seed: cli.seed, quiet: cli.quiet };
    if let Command::Validate = cli.command {
        return commands::validate(&opts).map(|_| ());
    }
    let path = cli
        .config
        .ok_or_else(|| CliError::Input("--config is required for this subcommand".into()))?;
    let cfg = RunConfig::load(&path)?;
    match cli.command {
        Command::Solve => commands::solve(&cfg, &opts).map(|_| ()),
        Command::Evolve { input } => commands::evolve_profile(&cfg, &input, &opts).map(|_| ()),
        Command::Stability => commands::stability(&cfg, &opts).map(|_| ()),
        Command::Subadd => commands::subadd(&cfg, &opts).map(|_| ()),
        Command::Validate => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
