use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sigmacell_cli::{parse_config, run_command, Command, Overrides};

#[derive(Parser)]
#[command(name = "sigmacell", version, about = "Surface tension cell problems for periodic double-well energies")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Estimate sigma for every configured direction.
    Sigma(RunArgs),
    /// Plot a sigma table as an SVG polar diagram.
    Polar(RunArgs),
    /// Flat-strip energy gaps over the eps schedule.
    Gamma(RunArgs),
    /// Check hypotheses, rotations, periodicity and table convexity.
    Validate(RunArgs),
    /// Tile a T-cell minimizer into an S-cell.
    Tile(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to output.dir of the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match cli.command {
        Cmd::Sigma(a) => (Command::Sigma, a),
        Cmd::Polar(a) => (Command::Polar, a),
        Cmd::Gamma(a) => (Command::Gamma, a),
        Cmd::Validate(a) => (Command::Validate, a),
        Cmd::Tile(a) => (Command::Tile, a),
    };
    let result = parse_config(&args.config)
        .map_err(Into::into)
        .and_then(|cfg| run_command(cmd, &cfg, &Overrides { out: args.out, workers: args.workers, seed: args.seed }));
    match result {
        Ok(o) => {
            eprintln!("{}: {} ({})", cmd.name(), o.message, o.out_dir.display());
            ExitCode::from(o.exit_code)
        }
        Err(e) => {
            eprintln!("sigmacell {}: {e}", cmd.name());
            ExitCode::from(e.exit_code())
        }
    }
}
