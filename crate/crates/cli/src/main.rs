use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ergolab::Limits;
use ergolab_cli::config::Kind;
use ergolab_cli::report::{emit_plot_data, write_atomic, Report};
use ergolab_cli::{load_config, run, CliError};

#[derive(Parser)]
#[command(name = "ergolab", version, about = "Desk-scale spectral ergodic theory experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Report path; defaults to the config's `out`, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    Multiplier(RunArgs),
    Odometer(RunArgs),
    Bk(RunArgs),
    Subspace(RunArgs),
    Gaussian(RunArgs),
    Heisenberg(RunArgs),
    /// Emit one series of a report as `x,y` CSV.
    Plot {
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        series: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write_output(out: Option<&PathBuf>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(p) => write_atomic(p, bytes),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::io(std::path::Path::new("<stdout>"), e)),
    }
}

fn experiment(kind: Kind, args: RunArgs) -> Result<(), CliError> {
    let limits = Limits::from_env()?;
    let cfg = load_config(&args.config, kind, args.seed)?;
    let report = run(&cfg, &limits)?;
    let out = args.out.as_ref().or(cfg.out());
    write_output(out, report.to_json()?.as_bytes())?;
    if let Some(p) = out {
        let verdicts: Vec<String> = report.verdicts.iter().map(|(k, v)| format!("{k}={v}")).collect();
        eprintln!("{} -> {} [{}]", kind.name(), p.display(), verdicts.join(", "));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Multiplier(a) => experiment(Kind::Multiplier, a),
        Command::Odometer(a) => experiment(Kind::Odometer, a),
        Command::Bk(a) => experiment(Kind::Bk, a),
        Command::Subspace(a) => experiment(Kind::Subspace, a),
        Command::Gaussian(a) => experiment(Kind::Gaussian, a),
        Command::Heisenberg(a) => experiment(Kind::Heisenberg, a),
        Command::Plot { report, series, out } => Report::read(&report).and_then(|r| {
            let mut buf = Vec::new();
            emit_plot_data(&r, &series, &mut buf)?;
            write_output(out.as_ref(), &buf)
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
