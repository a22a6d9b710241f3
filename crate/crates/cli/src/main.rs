#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Adaptive delay-Doppler processing for passive radar.
#[derive(Parser, Debug)]
#[command(name = "ddadapt", version, about)]
struct Cli {
    /// Worker threads for trial-level parallelism (0 = one per core).
    #[arg(long, global = true, env = "DDADAPT_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Overrides {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Base seed for scene generation.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Adaptation weight(s), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub gamma: Vec<f64>,
    /// Tuned CFAR false-alarm rate(s), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub pfa: Vec<f64>,
    /// Number of Monte Carlo trials.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceMode {
    Unadapted,
    Adapted,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize the reference waveform and write it as CSV.
    Waveform {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Compute one trial's surface and report its peak and clutter residual.
    Surface {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, value_enum, default_value = "adapted")]
        mode: SurfaceMode,
        /// Trial index within the seeded sequence.
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
    /// Run the Monte Carlo experiment and write ROC tables.
    Simulate {
        #[command(flatten)]
        overrides: Overrides,
        /// Also write every trial's surfaces as DDS1 files into this directory.
        #[arg(long)]
        dump_surfaces: Option<PathBuf>,
    },
    /// Run the experiment across a list of adaptation weights.
    Sweep {
        #[command(flatten)]
        overrides: Overrides,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("warning: could not size thread pool: {e}");
        }
    }
    let result = match cli.command {
        Command::Waveform { overrides } => commands::waveform(&overrides),
        Command::Surface {
            overrides,
            mode,
            trial,
        } => commands::surface(&overrides, mode, trial),
        Command::Simulate {
            overrides,
            dump_surfaces,
        } => commands::simulate(&overrides, dump_surfaces.as_deref()),
        Command::Sweep { overrides } => commands::sweep(&overrides),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
