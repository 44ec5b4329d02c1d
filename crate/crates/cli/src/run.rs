//! Executes a resolved job and writes its output and manifest.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use excursion_core::mc::empirical_excursion_with_refinement;
use excursion_core::report::{approx_csv, comparison_csv, lk_csv, pickands_csv};
use excursion_core::{
    compare_report, eec_approx, estimate_pickands, lk_curvatures, pickands_approx_submanifold,
    resolve_h, ApproxResult, Covariance, DomainSpec, LocallyIsotropicModel, PickandsConstant,
};
use serde::Serialize;

use crate::config::{CliError, CliResult, FieldModel, Format, HSource, Job, MethodName, RawConfig, Resolved, Subcommand};

const MANIFEST_VERSION: u32 = 1;

/// Provenance record written next to every output file.
#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub manifest_version: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub config: &'a RawConfig,
    pub seed: Option<u64>,
    pub wall_time_seconds: f64,
    pub threads: usize,
}

fn core(section: &str) -> impl Fn(excursion_core::Error) -> CliError + '_ {
    move |e| CliError::from_core(section, e)
}

fn h_constant(source: &HSource, alpha: f64, dim: usize) -> CliResult<PickandsConstant> {
    match source {
        HSource::Supplied(v) => PickandsConstant::supplied(alpha, dim, *v).map_err(core("")),
        // the seed is irrelevant for the exact constant
        HSource::Exact => resolve_h(alpha, dim, 0).map_err(core("pickands")),
        HSource::Estimate(cfg) => {
            log::info!(
                "estimating H_{{{alpha},{dim}}}: K = {}, spacing = {}, reps = {}",
                cfg.k,
                cfg.spacing,
                cfg.reps
            );
            let est = estimate_pickands(cfg).map_err(core("pickands"))?;
            log::info!("H = {} ± {}", est.estimate, est.stderr);
            Ok(PickandsConstant::from_estimate(est))
        }
    }
}

fn pickands_levels(
    model: &LocallyIsotropicModel,
    domain: &DomainSpec,
    u_grid: &[f64],
    h: &HSource,
) -> CliResult<Vec<ApproxResult>> {
    let h = h_constant(h, model.alpha(), domain.dim())?;
    u_grid
        .iter()
        .map(|&u| pickands_approx_submanifold(model, domain, u, &h).map_err(core("")))
        .collect()
}

fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("results serialize");
    s.push('\n');
    s
}

#[allow(clippy::too_many_arguments)]
fn validate_job(
    model: &FieldModel,
    domain: &DomainSpec,
    u_grid: &[f64],
    method: MethodName,
    h: Option<&HSource>,
    resolution: usize,
    reps: usize,
    seed: u64,
    format: Format,
) -> CliResult<String> {
    let analytic = match (method, model) {
        (MethodName::Eec, FieldModel::Smooth(m)) => u_grid
            .iter()
            .map(|&u| eec_approx(m, domain, u).map_err(core("")))
            .collect::<CliResult<Vec<_>>>()?,
        (MethodName::Eec, FieldModel::Local(_)) => unreachable!("rejected during resolution"),
        (MethodName::Pickands, m) => {
            let local = match m {
                FieldModel::Smooth(s) => LocallyIsotropicModel::from_smooth(s),
                FieldModel::Local(l) => l.clone(),
            };
            pickands_levels(&local, domain, u_grid, h.expect("resolved with the method"))?
        }
    };
    log::info!("simulating {reps} replications at resolution {resolution}");
    let cov: &(dyn Covariance + Sync) = match model {
        FieldModel::Smooth(m) => m,
        FieldModel::Local(m) => m,
    };
    let (fine, coarse) =
        empirical_excursion_with_refinement(cov, domain, u_grid, resolution, reps, seed).map_err(core("mc"))?;
    let rows = compare_report(&analytic, &fine, &coarse).map_err(core(""))?;
    Ok(match format {
        Format::Csv => comparison_csv(&rows),
        Format::Json => to_json(&rows),
    })
}

/// Computes the job's output document.
pub fn execute(job: &Job, format: Format) -> CliResult<String> {
    match job {
        Job::Lk { domain } => {
            let lk = lk_curvatures(domain);
            Ok(match format {
                Format::Csv => lk_csv(&lk),
                Format::Json => to_json(&lk),
            })
        }
        Job::Eec { model, domain, u_grid } => {
            let results = u_grid
                .iter()
                .map(|&u| eec_approx(model, domain, u).map_err(core("")))
                .collect::<CliResult<Vec<_>>>()?;
            Ok(match format {
                Format::Csv => approx_csv(&results),
                Format::Json => to_json(&results),
            })
        }
        Job::Pickands {
            model,
            domain,
            u_grid,
            h,
        } => {
            let results = pickands_levels(model, domain, u_grid, h)?;
            Ok(match format {
                Format::Csv => approx_csv(&results),
                Format::Json => to_json(&results),
            })
        }
        Job::PickandsConst { config } => {
            let est = estimate_pickands(config).map_err(core("pickands"))?;
            Ok(match format {
                Format::Csv => pickands_csv(std::slice::from_ref(&est)),
                Format::Json => to_json(&est),
            })
        }
        Job::Validate {
            model,
            domain,
            u_grid,
            method,
            h,
            resolution,
            reps,
            seed,
        } => validate_job(model, domain, u_grid, *method, h.as_ref(), *resolution, *reps, *seed, format),
    }
}

/// The seed that drives the run's randomness, if any.
fn primary_seed(config: &RawConfig, sub: Subcommand) -> Option<u64> {
    match sub {
        Subcommand::Validate => config.mc.as_ref().and_then(|m| m.seed),
        Subcommand::Pickands | Subcommand::PickandsConst => config.pickands.as_ref().and_then(|p| p.seed),
        Subcommand::Lk | Subcommand::Eec => None,
    }
}

/// Where the manifest goes: beside the output file, or `manifest` if given.
pub fn manifest_path(output: &str, manifest: Option<&PathBuf>) -> Option<PathBuf> {
    match manifest {
        Some(p) => Some(p.clone()),
        None if output == "-" => None,
        None => Some(PathBuf::from(format!("{output}.manifest.json"))),
    }
}

/// Runs a resolved job end to end. Nothing is written unless the
/// computation succeeds.
pub fn run(sub: Subcommand, resolved: &Resolved, manifest: Option<&PathBuf>) -> CliResult<()> {
    let start = Instant::now();
    let body = execute(&resolved.job, resolved.format)?;
    let elapsed = start.elapsed().as_secs_f64();
    let io_err = |what: &str, e: std::io::Error| CliError::Validation(format!("cannot write {what}: {e}"));
    if resolved.output == "-" {
        std::io::stdout()
            .lock()
            .write_all(body.as_bytes())
            .map_err(|e| io_err("stdout", e))?;
    } else {
        fs::write(&resolved.output, &body).map_err(|e| io_err(&resolved.output, e))?;
    }
    if let Some(path) = manifest_path(&resolved.output, manifest) {
        let record = Manifest {
            manifest_version: MANIFEST_VERSION,
            tool: "excursion",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: sub.name(),
            config: &resolved.config,
            seed: primary_seed(&resolved.config, sub),
            wall_time_seconds: elapsed,
            threads: rayon::current_num_threads(),
        };
        fs::write(&path, to_json(&record)).map_err(|e| io_err(&path.display().to_string(), e))?;
    }
    Ok(())
}
