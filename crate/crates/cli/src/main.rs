use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use weingarten_cli::commands::{self, Exit, ExportFormat};

/// Thread count for the parallel residual and Jacobian assembly.
const THREADS_ENV: &str = "WEINGARTEN_THREADS";

#[derive(Parser)]
#[command(name = "weingarten", version, about = "Prescribed Weingarten curvature solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the structural hypotheses of a config
    Check { config: PathBuf },
    /// Solve by continuation and write the solution, mesh and report
    Solve { config: PathBuf },
    /// Recompute residual and monitors for a stored solution
    Verify { solution: PathBuf, config: PathBuf },
    /// Convert a stored solution to OBJ or canonical CSV
    Export {
        solution: PathBuf,
        config: PathBuf,
        #[arg(long, value_enum)]
        format: Format,
        /// Output file; standard output if omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Obj,
    Csv,
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() {
                Exit::InputError.code() as u8
            } else {
                0
            });
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(Exit::InputError.code() as u8);
    }
    let mut stdout = std::io::stdout().lock();
    let result = match &cli.command {
        Command::Check { config } => commands::check(config, &mut stdout),
        Command::Solve { config } => commands::solve(config, &mut stdout),
        Command::Verify { solution, config } => commands::verify(solution, config, &mut stdout),
        Command::Export {
            solution,
            config,
            format,
            out,
        } => {
            let format = match format {
                Format::Obj => ExportFormat::Obj,
                Format::Csv => ExportFormat::Csv,
            };
            commands::export(solution, config, format, out.as_deref(), &mut stdout)
        }
    };
    let exit = result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit()
    });
    ExitCode::from(exit.code() as u8)
}
