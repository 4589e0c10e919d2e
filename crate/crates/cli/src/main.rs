//! `pmdlab`: generate instances, solve them, run the algorithms and check bounds.

mod commands;
mod output;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CheckArgs, DecomposeArgs, MdpArgs, RunArgs};
use output::CliResult;

#[derive(Parser, Debug)]
#[command(name = "pmdlab", version, about = "Policy mirror descent with TD critics on tabular MDPs")]
struct Cli {
    /// Master seed; the PMDLAB_SEED environment variable takes precedence.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a Garnet instance.
    Gen {
        #[command(flatten)]
        mdp: MdpArgs,
        #[arg(long, default_value = "mdp.json")]
        out: PathBuf,
    },
    /// Optimal values and policy by value iteration.
    Solve {
        #[command(flatten)]
        mdp: MdpArgs,
        #[arg(long, default_value_t = commands::SOLVE_TOL)]
        tol: f64,
        #[arg(long, default_value = "solution.json")]
        out: PathBuf,
    },
    /// One run; writes run.csv and result.json.
    Run {
        #[command(flatten)]
        mdp: MdpArgs,
        /// Run configuration JSON.
        #[arg(long)]
        config: PathBuf,
        /// Behavior policy as a JSON array of rows; uniform when absent.
        #[arg(long)]
        behavior: Option<PathBuf>,
        /// Initial distribution for the suboptimality column; uniform when absent.
        #[arg(long)]
        mu: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// A grid of runs; writes runs/*.csv and summary.csv.
    Sweep {
        #[command(flatten)]
        mdp: MdpArgs,
        /// Sweep specification JSON.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Property suite; writes report.json and exits 1 if a check fails.
    Check {
        #[command(flatten)]
        mdp: MdpArgs,
        #[command(flatten)]
        options: CheckArgs,
        #[arg(long)]
        behavior: Option<PathBuf>,
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
    },
    /// Bias decomposition of one run; writes decomp.json.
    Decompose {
        #[command(flatten)]
        mdp: MdpArgs,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        behavior: Option<PathBuf>,
        /// Iteration to decompose; defaults to the last.
        #[arg(long)]
        k: Option<usize>,
        /// State to decompose; all states when absent.
        #[arg(long)]
        state: Option<usize>,
        #[arg(long, default_value = "decomp.json")]
        out: PathBuf,
    },
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let seed = commands::resolve_seed(cli.seed)?;
    match &cli.command {
        Command::Gen { mdp, out } => commands::gen(mdp, seed, out),
        Command::Solve { mdp, tol, out } => commands::solve(mdp, *tol, out),
        Command::Run {
            mdp,
            config,
            behavior,
            mu,
            out_dir,
        } => commands::run(RunArgs {
            mdp,
            config,
            behavior: behavior.as_deref(),
            mu: mu.as_deref(),
            seed,
            out_dir,
        }),
        Command::Sweep { mdp, spec, out_dir } => sweep::sweep(&mdp.load()?, spec, seed, out_dir),
        Command::Check {
            mdp,
            options,
            behavior,
            out,
        } => commands::check(mdp, options, behavior.as_deref(), seed, out),
        Command::Decompose {
            mdp,
            config,
            behavior,
            k,
            state,
            out,
        } => commands::decompose(DecomposeArgs {
            mdp,
            config,
            behavior: behavior.as_deref(),
            k: *k,
            state: *state,
            seed,
            out,
        }),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pmdlab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
