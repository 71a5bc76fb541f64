use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser)]
#[command(name = "mastereq", version, about = "Master-equation kernels, dynamics and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a dissipative kernel and check the trace condition.
    BuildKernel(Common),
    /// Propagate the initial state over the configured time grid.
    Evolve(Common),
    /// Null space of the Liouvillian.
    SteadyState(Common),
    /// Pairwise comparison of the four Markov kernels.
    Compare(Common),
    /// Exact finite-bath oracle runs.
    Validate(Common),
    /// Population/coherence cross-block entries of a kernel.
    BlockReport(Common),
}

#[derive(Args, Clone)]
pub struct Common {
    /// Model configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Kernel variant: born[:w], redfield_qq, redfield_pp, energy_conserving, lindblad.
    #[arg(long)]
    pub variant: Option<String>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Table format; kernels are written in both formats when omitted.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::BuildKernel(c) => commands::build_kernel_cmd(c),
        Command::Evolve(c) => commands::evolve(c),
        Command::SteadyState(c) => commands::steady_state(c),
        Command::Compare(c) => commands::compare(c),
        Command::Validate(c) => commands::validate(c),
        Command::BlockReport(c) => commands::block_report(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
