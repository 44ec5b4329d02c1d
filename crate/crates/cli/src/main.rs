//! `excursion`: excursion-probability approximations for Gaussian random
//! fields on manifolds, and Monte Carlo checks of them.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand as ClapSubcommand};
use excursion_core::PickandsEstimator;

use config::{
    resolve, CliError, CliResult, DomainRecord, Format, McRecord, MethodName, ModelRecord, OutputRecord,
    PickandsRecord, RawConfig, Subcommand,
};

#[derive(Parser, Debug)]
#[command(name = "excursion", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(ClapSubcommand, Debug)]
enum Command {
    /// Lipschitz–Killing curvatures of a domain.
    Lk(Common),
    /// Expected-Euler-characteristic approximation of a smooth field.
    Eec(Common),
    /// Pickands approximation of a locally isotropic field.
    Pickands(Common),
    /// Monte Carlo estimate of a Pickands constant.
    PickandsConst(Common),
    /// Analytic approximation against a brute-force simulation.
    Validate(Common),
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum MethodArg {
    Eec,
    Pickands,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum EstimatorArg {
    ExtremalRatio,
    TailIntegral,
}

/// Flags shared by all subcommands; each one overrides the matching config
/// field.
#[derive(Args, Debug, Default)]
struct Common {
    /// JSON config file (a run manifest also works).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file, `-` for stdout.
    #[arg(long, short)]
    output: Option<String>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Manifest location; defaults to `<output>.manifest.json`.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Worker threads (also `EXCURSION_THREADS`).
    #[arg(long, env = "EXCURSION_THREADS")]
    threads: Option<usize>,

    /// Covariance family.
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    length_scale: Option<f64>,
    /// Schoenberg coefficients, comma separated.
    #[arg(long, value_delimiter = ',')]
    b: Option<Vec<f64>>,
    #[arg(long)]
    c: Option<f64>,
    /// Local exponent; for `pickands-const` the constant's alpha.
    #[arg(long)]
    alpha: Option<f64>,

    #[arg(long)]
    shape: Option<String>,
    #[arg(long, value_delimiter = ',')]
    sides: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    origin: Option<Vec<f64>>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    center: Option<Vec<f64>>,
    /// Domain dimension; for `pickands-const` the constant's N.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    periods: Option<Vec<f64>>,

    /// Levels, comma separated.
    #[arg(long = "u", value_delimiter = ',', allow_negative_numbers = true)]
    u_grid: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Pickands constant to use instead of resolving one.
    #[arg(long = "H")]
    h: Option<f64>,

    /// Grid points per unit side (validate).
    #[arg(long)]
    resolution: Option<usize>,
    /// Replications of the run's simulation.
    #[arg(long)]
    reps: Option<usize>,
    /// Seed of the run's simulation; drawn and recorded when absent.
    #[arg(long)]
    seed: Option<u64>,
    /// Half-width of the Pickands lattice.
    #[arg(long = "K")]
    k: Option<f64>,
    #[arg(long)]
    spacing: Option<f64>,
    #[arg(long, value_enum)]
    estimator: Option<EstimatorArg>,
}

fn set<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

/// Applies command-line overrides on top of the file config.
fn merge(sub: Subcommand, mut raw: RawConfig, a: &Common) -> RawConfig {
    let model = raw.model.get_or_insert_with(ModelRecord::default);
    set(&mut model.family, a.family.clone());
    set(&mut model.length_scale, a.length_scale);
    set(&mut model.b, a.b.clone());
    set(&mut model.c, a.c);
    let domain = raw.domain.get_or_insert_with(DomainRecord::default);
    set(&mut domain.shape, a.shape.clone());
    set(&mut domain.sides, a.sides.clone());
    set(&mut domain.origin, a.origin.clone());
    set(&mut domain.radius, a.radius);
    set(&mut domain.center, a.center.clone());
    set(&mut domain.periods, a.periods.clone());
    set(&mut raw.u_grid, a.u_grid.clone());
    set(
        &mut raw.method,
        a.method.map(|m| match m {
            MethodArg::Eec => MethodName::Eec,
            MethodArg::Pickands => MethodName::Pickands,
        }),
    );
    set(&mut raw.h, a.h);
    let pickands = raw.pickands.get_or_insert_with(PickandsRecord::default);
    set(&mut pickands.k, a.k);
    set(&mut pickands.spacing, a.spacing);
    set(
        &mut pickands.estimator,
        a.estimator.map(|e| match e {
            EstimatorArg::ExtremalRatio => PickandsEstimator::ExtremalRatio,
            EstimatorArg::TailIntegral => PickandsEstimator::TailIntegral,
        }),
    );
    match sub {
        Subcommand::PickandsConst => {
            set(&mut pickands.alpha, a.alpha);
            set(&mut pickands.dim, a.dim);
            set(&mut pickands.reps, a.reps);
            set(&mut pickands.seed, a.seed);
        }
        Subcommand::Pickands => {
            set(&mut model.alpha, a.alpha);
            set(&mut domain.dim, a.dim);
            set(&mut pickands.reps, a.reps);
            set(&mut pickands.seed, a.seed);
        }
        _ => {
            set(&mut model.alpha, a.alpha);
            set(&mut domain.dim, a.dim);
            let mc = raw.mc.get_or_insert_with(McRecord::default);
            set(&mut mc.resolution, a.resolution);
            set(&mut mc.reps, a.reps);
            set(&mut mc.seed, a.seed);
        }
    }
    let output = raw.output.get_or_insert_with(OutputRecord::default);
    set(&mut output.path, a.output.clone());
    set(&mut output.format, a.format);
    prune(raw)
}

/// Drops sections the overrides left empty, so configs stay minimal.
fn prune(mut raw: RawConfig) -> RawConfig {
    fn keep<T: Default + PartialEq>(slot: &mut Option<T>) {
        if slot.as_ref().is_some_and(|v| *v == T::default()) {
            *slot = None;
        }
    }
    keep(&mut raw.model);
    keep(&mut raw.domain);
    keep(&mut raw.mc);
    keep(&mut raw.pickands);
    keep(&mut raw.output);
    raw
}

fn setup_threads(threads: Option<usize>) -> CliResult<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::at("threads", "must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::at("threads", e))?;
    }
    Ok(())
}

fn main_inner(cli: Cli) -> CliResult<()> {
    let (sub, args) = match &cli.command {
        Command::Lk(a) => (Subcommand::Lk, a),
        Command::Eec(a) => (Subcommand::Eec, a),
        Command::Pickands(a) => (Subcommand::Pickands, a),
        Command::PickandsConst(a) => (Subcommand::PickandsConst, a),
        Command::Validate(a) => (Subcommand::Validate, a),
    };
    setup_threads(args.threads)?;
    let file = match &args.config {
        Some(path) => RawConfig::load(path)?,
        None => RawConfig::default(),
    };
    let resolved = resolve(sub, merge(sub, file, args))?;
    log::debug!("resolved config: {:?}", resolved.config);
    run::run(sub, &resolved, args.manifest.as_ref())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("excursion: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
