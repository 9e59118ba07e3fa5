use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use muband::report::{run, Command, RunConfig, RunOptions, Status};
use muband::Error;

/// Width estimates for warped bands under spectral curvature bounds.
#[derive(Debug, Parser)]
#[command(name = "muband", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Grid size (overrides the model's `n_points`).
    #[arg(long)]
    grid_points: Option<usize>,
    /// Omit the timestamp so reruns are byte-identical.
    #[arg(long)]
    reproducible: bool,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Eigen(_) | Error::NoCriticalPoint { .. } => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = (|| {
        let (config, bytes) = RunConfig::load(&cli.config)?;
        let options = RunOptions {
            out_dir: cli.out.clone(),
            grid_points: cli.grid_points,
            reproducible: cli.reproducible,
            tol_scale: RunOptions::tol_scale_from_env()?,
        };
        run(cli.command, &config, &bytes, &options)
    })();
    match outcome {
        Ok(report) => {
            for r in &report.records {
                let tag = match r.status {
                    Status::Pass => "PASS",
                    Status::Fail => "FAIL",
                    Status::Skipped => "SKIP",
                };
                println!("{tag} {:<28} residual {:.3e} tol {:.1e}", r.name, r.residual, r.tolerance);
            }
            let s = report.summary;
            println!("{} passed, {} failed, {} skipped", s.pass, s.fail, s.skipped);
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
