//! `phalanx`: assemble kernels, run them on the simulated array, and report.
//!
//! Every failure prints exactly one line of the form `error[Code]: message`
//! on stderr and exits nonzero.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "phalanx",
    version,
    about = "Cycle-level RISC-V manycore array simulator"
)]
#[command(
    after_help = "PHALANX_SEED is reserved for future randomized traffic generators and is currently ignored."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load one or more kernels, run until every PE stops, and report.
    Run(RunArgs),
    /// Assemble a source file into a flat little-endian image.
    Asm {
        input: PathBuf,
        /// Output path; defaults to the input with a `.bin` extension.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// List an image as `offset: instruction` lines.
    Disasm { input: PathBuf },
    /// Print the analytic peak figures for a configuration without simulating.
    Metrics(MetricsArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// System configuration (JSON); defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Kernel for every cluster: `.s` source or a flat image.
    #[arg(long)]
    kernel: Option<PathBuf>,
    /// Kernel for one cluster, as `x,y,path`. Repeatable.
    #[arg(long = "kernel-per-cluster", value_name = "X,Y,PATH")]
    kernel_per_cluster: Vec<String>,
    /// Watchdog: stop with an error after this many cycles.
    #[arg(long)]
    max_cycles: Option<u64>,
    /// Comma-separated trace kinds written to stdout
    /// (retire, stall, halt, fault, console, send, recv, noc, or all).
    #[arg(long)]
    trace: Option<String>,
    /// Write the JSON statistics report here.
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Clock frequency in Hz used for rates.
    #[arg(long)]
    fclk: Option<f64>,
    /// Pipeline depth, 2 or 3.
    #[arg(long)]
    stages: Option<u8>,
    /// Worker threads for the cluster phase; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    fclk: Option<f64>,
    /// Print the model as JSON instead of `key=value` lines.
    #[arg(long)]
    json: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => commands::run(a),
        Command::Asm { input, output } => commands::asm(&input, output.as_deref()),
        Command::Disasm { input } => commands::disasm(&input),
        Command::Metrics(a) => commands::metrics(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit)
        }
    }
}
