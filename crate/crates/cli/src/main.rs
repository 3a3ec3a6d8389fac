use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use cascade_cli::commands::{load_config, run, Command};
use cascade_cli::config::{keys_help, Format};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cascade", version, about = "Time-bin entangled photon pairs from a radiative cascade")]
#[command(after_help = keys_help())]
struct Cli {
    /// Configuration file (section.key = value); defaults when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for Monte Carlo commands, overrides emitter.seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file, `-` for stdout; otherwise <dir>/<command>.<format>
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format, overrides output.format
    #[arg(long, global = true)]
    format: Option<Format>,
    /// Accept grids that truncate the emission
    #[arg(long, global = true)]
    grid_override: bool,
    /// Worker threads for sweeps and Monte Carlo (default: all cores)
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Default output directory when neither --out nor output.dir is given
    #[arg(long, env = "CASCADE_OUT_DIR", global = true, hide_env_values = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Analytic and numeric purity of photon B
    Purity,
    /// Probability and purity over the configured gate windows
    Gate,
    /// Two-photon interference fringe, analytic or Monte Carlo
    Fringe {
        /// Sample detection events instead of computing probabilities
        #[arg(long)]
        mc: bool,
    },
    /// Entanglement-swapping error of two identical sources
    Swap,
    /// Emission and detection Monte Carlo, one record per trial
    Montecarlo,
    /// Swapping error over the configured sweep
    Sweep,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        anyhow::ensure!(n >= 1, "--workers must be at least 1");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("building worker pool")?;
    }
    let mut config = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        config.emitter.seed = seed;
    }
    if cli.grid_override {
        config.grid = config.grid.with_override(true);
    }
    let command = match cli.command {
        Sub::Purity => Command::Purity,
        Sub::Gate => Command::Gate,
        Sub::Fringe { mc } => Command::Fringe { monte_carlo: mc },
        Sub::Swap => Command::Swap,
        Sub::Montecarlo => Command::MonteCarlo,
        Sub::Sweep => Command::Sweep,
    };
    let format = cli.format.or(config.output.format).unwrap_or_else(|| command.default_format());
    let bytes = run(command, &config, format)?;

    let ext = match format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let target = match (&cli.out, &config.output.dir, &cli.out_dir) {
        (Some(p), _, _) if p.as_os_str() == "-" => None,
        (Some(p), _, _) => Some(p.clone()),
        (None, Some(d), _) | (None, None, Some(d)) => Some(d.join(format!("{}.{ext}", command.name()))),
        (None, None, None) => None,
    };
    match target {
        None => std::io::stdout().lock().write_all(&bytes).context("writing to stdout")?,
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            std::fs::write(&path, &bytes).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("[{}] wrote {}", command.name(), path.display());
        }
    }
    Ok(())
}
