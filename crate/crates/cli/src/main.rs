use clap::Parser;
use jacobi_cli::config::parse_config_file;
use jacobi_cli::report::{render, write_artifacts};
use jacobi_cli::run::EXIT_CONFIG;
use jacobi_cli::{run, ExperimentConfig, Overrides};
use std::path::PathBuf;
use std::process::ExitCode;

/// Jost solutions, polynomial asymptotics and spectral data for Jacobi matrices.
#[derive(Parser, Debug)]
#[command(name = "jacobi", version)]
struct Cli {
    /// Experiment document (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in model name or model file.
    #[arg(long)]
    model: Option<String>,
    /// classify, jost, poly, asym, eig, mass, identity or carleman-density.
    #[arg(long)]
    cmd: Option<String>,
    /// Evaluation point(s), e.g. `1+1i`; repeat or separate with commas.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    z: Vec<String>,
    /// `lo:hi:step`.
    #[arg(long, allow_hyphen_values = true)]
    grid: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    n: Option<i64>,
    #[arg(long, allow_hyphen_values = true)]
    n_trunc: Option<i64>,
    #[arg(long, allow_hyphen_values = true)]
    tol: Option<f64>,
    /// Working precision of the finite-section oracle.
    #[arg(long, env = "JACOBI_BITS", allow_hyphen_values = true)]
    bits: Option<i64>,
    /// Directory for the artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(EXIT_CONFIG as u8);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let (file, base) = match &cli.config {
        None => (None, None),
        Some(p) => {
            let text = match std::fs::read_to_string(p) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: {}: {e}", p.display());
                    return ExitCode::from(EXIT_CONFIG as u8);
                }
            };
            match parse_config_file(&text) {
                Ok(f) => (Some(f), p.parent().map(PathBuf::from)),
                Err(e) => {
                    eprintln!("error: {}: {e}", p.display());
                    return ExitCode::from(EXIT_CONFIG as u8);
                }
            }
        }
    };
    let ov = Overrides {
        command: cli.cmd,
        model: cli.model,
        z: cli.z,
        grid: cli.grid,
        n: cli.n,
        n_trunc: cli.n_trunc,
        tol: cli.tol,
        bits: cli.bits,
        out: cli.out,
    };
    let cfg = match ExperimentConfig::build(file, ov, base.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let outcome = run(&cfg);
    print!("{}", render(&outcome));
    if let Some(dir) = &cfg.out {
        match write_artifacts(&outcome, dir) {
            Ok(paths) => {
                for p in paths {
                    eprintln!("wrote {}", p.display());
                }
            }
            Err(e) => {
                eprintln!("error: writing artifacts to {}: {e}", dir.display());
                return ExitCode::from(EXIT_CONFIG as u8);
            }
        }
    }
    ExitCode::from(outcome.exit_code as u8)
}
