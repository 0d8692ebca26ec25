use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use majorana::experiment::{run, Command, DisorderSpec, EstimatorKind, PartialConfig};

/// Storage experiments on disordered Majorana chain quantum memories.
///
/// Flags override the values of the `--config` file. Results go to
/// `<out>/results.csv`, `<out>/manifest.json` and `<out>/plots/`.
#[derive(Debug, Parser)]
#[command(name = "majorana", version)]
struct Cli {
    /// Experiment to run; may also come from the config file.
    command: Option<Command>,
    /// JSON config file, or the manifest of an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Chain lengths, comma separated.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Mean chemical potentials, comma separated.
    #[arg(long, value_delimiter = ',')]
    mu: Option<Vec<f64>>,
    #[arg(long)]
    eta: Option<f64>,
    /// Sets eta = mu / ratio for each mu.
    #[arg(long)]
    mu_over_eta: Option<f64>,
    /// none, uniform or logistic:<y1>:<a>.
    #[arg(long)]
    disorder: Option<DisorderSpec>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    estimator: Option<EstimatorKind>,
    /// Monte Carlo samples per time point.
    #[arg(long)]
    samples: Option<usize>,
    /// Refine Monte Carlo points near a storage-time threshold up to this many samples.
    #[arg(long)]
    max_samples: Option<usize>,
    #[arg(long)]
    realizations: Option<usize>,
    /// Fidelity thresholds, comma separated.
    #[arg(long, value_delimiter = ',')]
    f0: Option<Vec<f64>>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    grid_points: Option<usize>,
    /// Explicit time grid, comma separated.
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<f64>>,
    #[arg(long)]
    lyapunov_sites: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    y1: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    a: Option<Vec<f64>>,
    /// Storage times for the best candidates of pseudorandom-search.
    #[arg(long)]
    top: Option<usize>,
    /// Compute storage times in xi-scan.
    #[arg(long)]
    storage: bool,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Cli {
    fn partial(self) -> PartialConfig {
        PartialConfig {
            command: self.command,
            n: self.n,
            mu: self.mu,
            eta: self.eta,
            mu_over_eta: self.mu_over_eta,
            disorder: self.disorder,
            seed: self.seed,
            estimator: self.estimator,
            samples: self.samples,
            max_samples: self.max_samples,
            realizations: self.realizations,
            f0: self.f0,
            t_max: self.t_max,
            grid_points: self.grid_points,
            times: self.times,
            lyapunov_sites: self.lyapunov_sites,
            y1_grid: self.y1,
            a_grid: self.a,
            top: self.top,
            storage: self.storage.then_some(true),
            workers: self.workers,
            out: self.out,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = (|| {
        let base = match &cli.config {
            Some(path) => PartialConfig::from_file(path)?,
            None => PartialConfig::default(),
        };
        let config = base.overlay(cli.partial()).resolve()?;
        run(&config)
    })();
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
