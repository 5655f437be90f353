use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fpp_cli::{emit, run_experiment, CliError, Experiment, ExperimentConfig, Format};

#[derive(Parser)]
#[command(name = "fpp", version, about = "Run first-passage and oriented percolation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Speed of the right edge (slope and break-point ratio estimates).
    Alpha(Overrides),
    /// Time constant in a direction.
    Fpt(Overrides),
    /// Passage-time curve along the frozen critical direction.
    FCurve(Overrides),
    /// Upper tail of the right edge.
    Tail(Overrides),
    /// Break points of the conditioned right edge.
    Breakpoints(Overrides),
    /// Sub-optimal edges and traces of sampled geodesics.
    Traces(Overrides),
    /// Curve below p0 with speed gaps and the singularity fit.
    Probe(Overrides),
    /// Search against exhaustive enumeration on tiny windows.
    Oracle(Overrides),
}

/// Each flag overrides the config field of the same name.
#[derive(Args)]
struct Overrides {
    /// JSON config file; flags given here take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, alias = "p_grid", value_delimiter = ',')]
    p_grid: Option<Vec<f64>>,
    #[arg(long)]
    p0: Option<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, alias = "n_grid", value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    /// Two comma-separated components.
    #[arg(long, value_delimiter = ',')]
    direction: Option<Vec<f64>>,
    #[arg(long)]
    alpha0: Option<f64>,
    #[arg(long, alias = "alpha_n")]
    alpha_n: Option<usize>,
    #[arg(long, alias = "alpha_reps")]
    alpha_reps: Option<usize>,
    #[arg(long, alias = "critical_p")]
    critical_p: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to $FPP_WORKERS, then 1.
    #[arg(long)]
    workers: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long, alias = "out_path", alias = "out-path")]
    out: Option<PathBuf>,
    /// Output format; inferred from the extension of --out when absent.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl Overrides {
    fn resolve(self, experiment: Experiment) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        cfg.experiment = experiment;
        macro_rules! set {
            ($($field:ident),*) => { $(if let Some(v) = self.$field { cfg.$field = v; })* };
        }
        macro_rules! set_opt {
            ($($field:ident),*) => { $(if self.$field.is_some() { cfg.$field = self.$field; })* };
        }
        set!(a, b, reps, horizon, alpha_n, alpha_reps, critical_p, seed);
        set_opt!(p, p_grid, p0, q, n, n_grid, eps, alpha0, workers, format);
        if let Some(d) = self.direction {
            let [x, y] = d[..] else {
                return Err(CliError::Config(format!("direction needs 2 components, got {}", d.len())));
            };
            cfg.direction = Some([x, y]);
        }
        if self.out.is_some() {
            cfg.out_path = self.out;
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (experiment, overrides) = match cli.command {
        Command::Alpha(o) => (Experiment::Alpha, o),
        Command::Fpt(o) => (Experiment::Fpt, o),
        Command::FCurve(o) => (Experiment::FCurve, o),
        Command::Tail(o) => (Experiment::Tail, o),
        Command::Breakpoints(o) => (Experiment::Breakpoints, o),
        Command::Traces(o) => (Experiment::Traces, o),
        Command::Probe(o) => (Experiment::Probe, o),
        Command::Oracle(o) => (Experiment::Oracle, o),
    };
    let result = overrides.resolve(experiment).and_then(|cfg| {
        let rows = run_experiment(&cfg)?;
        log::info!("{} rows", rows.len());
        emit(&rows, cfg.format(), cfg.out_path.as_deref())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
