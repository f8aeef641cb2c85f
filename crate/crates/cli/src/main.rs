//! `floydnet` command-line entry point.

mod checks;
mod output;
mod settings;
mod training;
mod wl;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use floydnet::memtrack::TrackingAllocator;
use floydnet::{Error, Result};
use output::OutDir;

#[global_allocator]
static ALLOC: TrackingAllocator = TrackingAllocator;

#[derive(Parser)]
#[command(
    name = "floydnet",
    version,
    about = "Pivotal-attention relational networks: verification, expressivity and training runs",
    after_help = "Exit status: 0 on success, 1 when a check or run fails, 2 on usage or input errors."
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
pub struct Global {
    /// Base random seed [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory receiving every output file
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker thread cap; 1 gives bitwise reproducible runs [default: all cores]
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// `key = value` file. For `train` it holds model and training keys;
    /// for other subcommands it supplies defaults for their flags
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Finite-difference gradient checks of every primitive and the full model
    Gradcheck(checks::GradcheckArgs),
    /// Streamed against naive attention kernel on random configurations
    KernelEquiv(checks::KernelEquivArgs),
    /// Wall time and peak allocation of the attention kernels
    KernelBench(checks::KernelBenchArgs),
    /// Oracle and model verdicts on the curated pair suite
    Expressivity(wl::ExpressivityArgs),
    /// Rotation composition through the fixed value maps
    RotationCheck(checks::RotationArgs),
    /// Online training on a synthetic task
    Train(training::TrainArgs),
    /// Evaluates a trained run on its test set or on a graph file
    Eval(training::EvalArgs),
    /// Color refinement of one graph, or a verdict on two
    Oracle(wl::OracleArgs),
}

/// Whether the run passed its checks.
pub type Outcome = Result<bool>;

fn run(cli: Cli) -> Outcome {
    if let Some(t) = cli.global.threads {
        if t == 0 {
            return Err(Error::InvalidArgument("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    let out = OutDir::create(&cli.global.out)?;
    let g = &cli.global;
    match cli.command {
        Command::Gradcheck(a) => checks::gradcheck(a, g, &out),
        Command::KernelEquiv(a) => checks::kernel_equiv(a, g, &out),
        Command::KernelBench(a) => checks::kernel_bench(a, g, &out),
        Command::RotationCheck(a) => checks::rotation_check(a, g, &out),
        Command::Expressivity(a) => wl::expressivity(a, g, &out),
        Command::Oracle(a) => wl::oracle(a, g, &out),
        Command::Train(a) => training::train(a, g, &out),
        Command::Eval(a) => training::eval(a, g, &out),
    }
}

/// Exit status for errors: bad input is a usage error, anything raised while
/// computing is a failure.
fn error_code(e: &Error) -> u8 {
    match e {
        Error::NonFinite(_) | Error::Diverged { .. } | Error::MissingForward(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::settings::List;
    use clap::CommandFactory;

    #[test]
    fn command_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn unknown_flags_are_rejected() {
        assert!(Cli::try_parse_from(["floydnet", "gradcheck", "--bogus"]).is_err());
        assert!(
            Cli::try_parse_from(["floydnet", "gradcheck", "--seed", "1", "--tol", "1e-6"]).is_ok()
        );
    }

    #[test]
    fn lists_parse_from_flags() {
        let cli = Cli::try_parse_from(["floydnet", "kernel-bench", "--n", "32,64", "--dr", "64"])
            .unwrap();
        match cli.command {
            Command::KernelBench(a) => assert_eq!(a.n, Some(List(vec![32, 64]))),
            _ => unreachable!(),
        }
    }

    #[test]
    fn errors_map_to_exit_codes() {
        assert_eq!(error_code(&Error::InvalidArgument("x".into())), 2);
        assert_eq!(
            error_code(&Error::Diverged {
                step: 3,
                msg: "nan".into()
            }),
            1
        );
    }
}
