use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fsvi_cli::{run_experiment, ExperimentKind, PartialConfig, Result};

/// Run a variational inference experiment and write its artifacts.
#[derive(Debug, Parser)]
#[command(name = "fsvi", version)]
struct Args {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// bivariate, blr, blr-overfit, logistic, multiclass, cauchy-ppca or
    /// flat-regression.
    #[arg(long)]
    experiment: Option<String>,
    /// Directory of train_<i>.csv / test_<i>.csv splits.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Number of training draws S.
    #[arg(long)]
    samples: Option<usize>,
    /// Number of holdout draws S' (0 disables monitoring).
    #[arg(long)]
    holdout_samples: Option<usize>,
    /// SCG iterations per block per outer iteration.
    #[arg(long)]
    inner_iters: Option<usize>,
    /// Maximum outer iterations
    #[arg(long)]
    max_iter: Option<usize>,
    /// Convergence tolerance on the bound.
    #[arg(long)]
    tol: Option<f64>,
    /// Random seed (required here or in the config file)
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(args: Args) -> Result<()> {
    let file = match &args.config {
        Some(path) => PartialConfig::from_file(path)?,
        None => PartialConfig::default(),
    };
    let flags = PartialConfig {
        experiment: args.experiment.as_deref().map(str::parse::<ExperimentKind>).transpose()?,
        seed: args.seed,
        data: args.data,
        out: args.out,
        samples: args.samples,
        holdout_samples: args.holdout_samples,
        inner_iters: args.inner_iters,
        max_iter: args.max_iter,
        tol: args.tol,
        ..Default::default()
    };
    let config = file.merge(flags).resolve()?;
    if let Some(dir) = &config.data {
        if !dir.is_dir() {
            return Err(fsvi_cli::CliError::Data(format!("{}: not a directory", dir.display())));
        }
    }
    let artifacts = run_experiment(&config)?;
    println!("{}", std::fs::read_to_string(&artifacts.metrics_file).unwrap_or_default().trim_end());
    println!("artifacts written to {}", artifacts.dir.display());
    Ok(())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
