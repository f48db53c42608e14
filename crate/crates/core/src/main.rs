use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use skeleton_dae::cli::{self, CliError, CommandOutput, Overrides};
use skeleton_dae::problem::ProblemFile;

#[derive(Parser)]
#[command(
    name = "skeleton-dae",
    version,
    about = "Solve B x' = x + f(t) with singular B"
)]
struct Args {
    /// Rank tolerance for the chain factorizations.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output step, overriding the problem file.
    #[arg(long, global = true)]
    step: Option<f64>,
    /// Final time, overriding the problem file.
    #[arg(long = "t-end", global = true)]
    t_end: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the skeleton chain and report its structure.
    Chain { file: PathBuf },
    /// Solve the problem and write the trajectory as CSV.
    Solve {
        file: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check classical consistency of x0 and verify the chain.
    Check { file: PathBuf },
    /// Write a random problem with a known solution.
    Synth {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        n: usize,
        /// Writes `<out>.json` and `<out>.ref.csv`.
        #[arg(long)]
        out: PathBuf,
    },
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn emit(out: CommandOutput) {
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    print!("{}", out.stdout);
}

fn run(args: Args) -> Result<(), CliError> {
    let ov = Overrides {
        tol: args.tol,
        step: args.step,
        t_end: args.t_end,
    };
    if let Some(tol) = ov.tol {
        if !(tol.is_finite() && tol > 0.0) {
            return Err(CliError::Input(format!(
                "--tol must be positive, got {tol}"
            )));
        }
    }
    match args.command {
        Command::Chain { file } => emit(cli::cmd_chain(&ProblemFile::load(&file)?, &ov)?),
        Command::Solve { file, out } => {
            let res = cli::cmd_solve(&ProblemFile::load(&file)?, &ov)?;
            write(&out, &res.csv)?;
            emit(res.output);
        }
        Command::Check { file } => emit(cli::cmd_check(&ProblemFile::load(&file)?, &ov)?),
        Command::Synth { seed, n, out } => {
            let res = cli::cmd_synth(seed, n)?;
            let json = with_suffix(&out, ".json");
            let csv = with_suffix(&out, ".ref.csv");
            write(&json, &res.problem_json)?;
            write(&csv, &res.reference_csv)?;
            println!("wrote {} and {}", json.display(), csv.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
