mod config;
mod error;
mod experiments;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use carma_core::Driver;
use clap::{Args, Parser, Subcommand, ValueEnum};

use config::{ExperimentConfig, ExperimentKind, InitKind, KernelMode, ModelSource};
use error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "carma", version = output::VERSION)]
#[command(about = "Experiments on high-frequency sampled Levy-driven CARMA processes")]
struct Cli {
    /// Directory for CSV and JSON artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for Monte Carlo experiments.
    #[arg(long, global = true, env = "CARMA_WORKERS")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate sampled paths and write them as CSV.
    Simulate {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        deltas: DeltaArg,
        /// Number of observations per path.
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        drivers: DriverArgs,
        #[arg(long)]
        subgrid: Option<usize>,
        #[arg(long, value_enum, default_value_t = InitArg::Stationary)]
        init: InitArg,
        /// Include the state vector in the CSV.
        #[arg(long)]
        states: bool,
    },
    /// Exact (and optionally asymptotic) sampled ARMA representation.
    SampleArma {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        deltas: DeltaArg,
        #[arg(long)]
        asymptotic: bool,
    },
    /// The rational function alpha_n with the roots of its numerator.
    Alpha {
        #[arg(long)]
        n: usize,
    },
    /// ARMA form of the Riemann-sum approximation, or its matching rules.
    #[command(args_conflicts_with_subcommands = true)]
    Riemann {
        #[command(subcommand)]
        action: Option<RiemannAction>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long = "delta", value_delimiter = ',')]
        deltas: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        h: Vec<f64>,
    },
    /// Monte Carlo error of the recovered driving increments.
    Recover {
        #[command(flatten)]
        model: ModelArg,
        #[command(flatten)]
        deltas: DeltaArg,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 2000)]
        paths: usize,
        #[command(flatten)]
        drivers: DriverArgs,
        #[arg(long)]
        subgrid: Option<usize>,
    },
    /// Kernel estimates against the true kernel at several offsets.
    KernelStudy {
        /// Study a single model instead of the three presets.
        #[arg(long)]
        model: Option<String>,
        #[arg(long = "delta", value_delimiter = ',')]
        deltas: Vec<f64>,
        #[arg(long, value_enum, default_value_t = ModeArg::Theoretical)]
        mode: ModeArg,
        /// Path length in empirical mode.
        #[arg(long)]
        n: Option<usize>,
        /// Extra offsets to tabulate.
        #[arg(long, value_delimiter = ',')]
        h: Vec<f64>,
    },
    /// Run an experiment described by a JSON config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Subcommand)]
enum RiemannAction {
    /// Offsets h matching the sampled process to leading order.
    Match {
        #[arg(long)]
        pq: usize,
    },
}

#[derive(Args)]
struct ModelArg {
    /// Model JSON file or preset (carma21, car2, car3).
    #[arg(long)]
    model: String,
}

#[derive(Args)]
struct DeltaArg {
    /// Sampling steps, comma separated or repeated.
    #[arg(long = "delta", value_delimiter = ',', required = true)]
    deltas: Vec<f64>,
}

#[derive(Args)]
struct DriverArgs {
    #[arg(long = "driver", value_enum, value_delimiter = ',', default_value = "brownian")]
    kinds: Vec<DriverKind>,
    /// Jump intensity of the compound Poisson driver.
    #[arg(long, default_value_t = 1.0)]
    rate: f64,
    #[arg(long, default_value_t = 1.0)]
    shape: f64,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Variance rate of the gamma subordinator.
    #[arg(long, default_value_t = 0.5)]
    nu: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum DriverKind {
    Brownian,
    CompoundPoisson,
    Gamma,
    VarianceGamma,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    Zero,
    Stationary,
    BurnIn,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Theoretical,
    Empirical,
}

impl DriverArgs {
    fn drivers(&self) -> Vec<Driver> {
        self.kinds
            .iter()
            .map(|k| match k {
                DriverKind::Brownian => Driver::BrownianMotion,
                DriverKind::CompoundPoisson => Driver::CompoundPoissonNormal { rate: self.rate },
                DriverKind::Gamma => Driver::GammaCentered { shape: self.shape, scale: self.scale },
                DriverKind::VarianceGamma => Driver::VarianceGamma { nu: self.nu },
            })
            .collect()
    }
}

fn build_config(cli: Cli) -> CliResult<ExperimentConfig> {
    let mut cfg = match cli.command {
        Command::Run { config } => ExperimentConfig::from_file(&config)?,
        Command::Simulate { model, deltas, n, drivers, subgrid, init, states } => {
            let mut c = ExperimentConfig::new(ExperimentKind::Simulate);
            c.model = Some(ModelSource::Named(model.model));
            c.deltas = Some(deltas.deltas);
            c.n = Some(n);
            c.drivers = drivers.drivers();
            c.subgrid = subgrid;
            c.init = match init {
                InitArg::Zero => InitKind::Zero,
                InitArg::Stationary => InitKind::Stationary,
                InitArg::BurnIn => InitKind::BurnIn,
            };
            c.states = states;
            c
        }
        Command::SampleArma { model, deltas, asymptotic } => {
            let mut c = ExperimentConfig::new(ExperimentKind::SampleArma);
            c.model = Some(ModelSource::Named(model.model));
            c.deltas = Some(deltas.deltas);
            c.asymptotic = asymptotic;
            c
        }
        Command::Alpha { n } => {
            let mut c = ExperimentConfig::new(ExperimentKind::Alpha);
            c.n = Some(n);
            c
        }
        Command::Riemann { action, model, deltas, h } => {
            let mut c = ExperimentConfig::new(ExperimentKind::Riemann);
            match action {
                Some(RiemannAction::Match { pq }) => c.pq = Some(pq),
                None => {
                    c.model = model.map(ModelSource::Named);
                    c.deltas = Some(deltas);
                    c.h = h;
                }
            }
            c
        }
        Command::Recover { model, deltas, t, paths, drivers, subgrid } => {
            let mut c = ExperimentConfig::new(ExperimentKind::Recover);
            c.model = Some(ModelSource::Named(model.model));
            c.deltas = Some(deltas.deltas);
            c.t = Some(t);
            c.paths = Some(paths);
            c.drivers = drivers.drivers();
            c.subgrid = subgrid;
            c
        }
        Command::KernelStudy { model, deltas, mode, n, h } => {
            let mut c = ExperimentConfig::new(ExperimentKind::KernelStudy);
            c.model = model.map(ModelSource::Named);
            if !deltas.is_empty() {
                c.deltas = Some(deltas);
            }
            c.kernel_mode = match mode {
                ModeArg::Theoretical => KernelMode::Theoretical,
                ModeArg::Empirical => KernelMode::Empirical,
            };
            c.n = n;
            c.h = h;
            c
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if cli.out.is_some() {
        cfg.out = cli.out;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(k) = cli.workers {
        if k == 0 {
            eprintln!("carma: config error: --workers must be at least 1");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .expect("thread pool is configured once");
    }
    let outcome = build_config(cli).and_then(|cfg| experiments::run(&cfg));
    match outcome {
        Ok(doc) => {
            let text = serde_json::to_string_pretty(&doc).expect("serializes");
            match writeln!(std::io::stdout().lock(), "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    eprintln!("carma: {}", CliError::io("<stdout>", e));
                    ExitCode::from(4)
                }
                _ => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("carma: {e}");
            if let CliError::Numeric(inner) = &e {
                eprintln!("  caused by: {inner:?}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
