use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tubetrack_cli::config::{config_help, PipelineConfig};
use tubetrack_cli::{commands, CliError};

/// Tubular tree extraction from 3-D volumes: multi-scale blob measurements,
/// per-branch Bayesian smoothing, covariance-based branch validation.
#[derive(Parser)]
#[command(name = "tubetrack", version, after_help = config_help())]
struct Cli {
    /// Configuration file (key = value per line); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the configured rng_seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Print the resolved configuration and exit without writing anything.
    #[arg(long, global = true)]
    dry_run: bool,

    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic tube-tree volume plus ground truth.
    Phantom {
        /// Output prefix; writes <prefix>.mhd, <prefix>.raw, <prefix>.truth.json.
        out_prefix: PathBuf,
    },
    /// Detect multi-scale blob measurements in a volume.
    Blobs {
        /// Input MetaImage header (.mhd).
        volume: PathBuf,
        /// Output measurements JSON.
        out: PathBuf,
    },
    /// Track branches from a measurement file.
    Track {
        /// Input MetaImage header (.mhd).
        volume: PathBuf,
        /// Input measurements JSON.
        measurements: PathBuf,
        /// Output branches JSON.
        out: PathBuf,
    },
    /// Evaluate accepted branches against a ground-truth tree.
    Eval {
        /// Input branches JSON.
        branches: PathBuf,
        /// Input ground-truth tree JSON.
        truth: PathBuf,
        /// Output metrics JSON.
        out: PathBuf,
    },
    /// Run phantom, blobs, track and all evaluations in one directory.
    Pipeline {
        /// Working directory for all artifacts.
        workdir: PathBuf,
    },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
            PipelineConfig::from_text(&text)?
        }
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.rng_seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    if cli.dry_run {
        print!("{}", cfg.resolved_lines());
        return Ok(());
    }
    match &cli.command {
        Command::Phantom { out_prefix } => commands::run_phantom(&cfg, out_prefix),
        Command::Blobs { volume, out } => commands::run_blobs(&cfg, volume, out),
        Command::Track { volume, measurements, out } => {
            commands::run_track(&cfg, volume, measurements, out)
        }
        Command::Eval { branches, truth, out } => {
            commands::run_eval(&cfg, branches, truth, out).map(|_| ())
        }
        Command::Pipeline { workdir } => commands::run_pipeline(&cfg, workdir, cli.quiet).map(|_| ()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tubetrack: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
