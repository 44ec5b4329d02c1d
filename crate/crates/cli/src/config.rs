//! Run configuration: a JSON file, overridden field by field by command-line
//! flags, validated completely before anything is computed.

use std::fmt;
use std::fs;
use std::path::Path;

use excursion_core::{
    DomainSpec, Error, LocallyIsotropicModel, ManifoldSpec, PickandsConfig, PickandsEstimator,
    Shape, SmoothIsotropicModel,
};
use serde::{Deserialize, Serialize};

/// Levels used by `validate` when none are given.
pub const DEFAULT_U_GRID: [f64; 4] = [2.0, 2.5, 3.0, 3.5];
pub const DEFAULT_RESOLUTION: usize = 40;
pub const DEFAULT_REPS: usize = 10_000;

/// Failure of a run, split by exit status.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad or missing input; exit status 1.
    Validation(String),
    /// The numerical machinery gave up (covariance factorization); exit
    /// status 2.
    Numerical(String),
}

impl CliError {
    pub fn at(path: &str, message: impl fmt::Display) -> Self {
        CliError::Validation(format!("`{path}`: {message}"))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }

    /// Wraps a library error raised while handling the config section
    /// `section` (e.g. `model`), naming the offending field when known.
    pub fn from_core(section: &str, err: Error) -> Self {
        if err.is_numerical() {
            return CliError::Numerical(err.to_string());
        }
        match &err {
            Error::InvalidParameter { field, reason } => {
                let path = if field.contains('.') || section.is_empty() {
                    field.clone()
                } else {
                    format!("{section}.{field}")
                };
                CliError::at(&path, reason)
            }
            _ if section.is_empty() => CliError::Validation(err.to_string()),
            _ => CliError::at(section, &err),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid configuration: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sides: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periods: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PickandsRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, rename = "N", skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, rename = "K", skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<PickandsEstimator>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Eec,
    Pickands,
}

/// Everything a run can be configured with. After resolution every field
/// the subcommand uses is filled in, the seed included.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<MethodName>,
    /// Pickands constant to use instead of resolving one.
    #[serde(default, rename = "H", skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pickands: Option<PickandsRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputRecord>,
}

impl RawConfig {
    /// Reads a config file. A run manifest is accepted too: its resolved
    /// `config` section is used.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::at("config", format!("cannot read {}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::at("config", format!("{}: {e}", path.display())))?;
        let value = match value {
            serde_json::Value::Object(mut map) if map.contains_key("manifest_version") => {
                map.remove("config").unwrap_or_default()
            }
            other => other,
        };
        serde_json::from_value(value).map_err(|e| CliError::at("config", format!("{}: {e}", path.display())))
    }
}

/// Which subcommand is being resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Lk,
    Eec,
    Pickands,
    PickandsConst,
    Validate,
}

impl Subcommand {
    pub fn name(&self) -> &'static str {
        match self {
            Subcommand::Lk => "lk",
            Subcommand::Eec => "eec",
            Subcommand::Pickands => "pickands",
            Subcommand::PickandsConst => "pickands-const",
            Subcommand::Validate => "validate",
        }
    }
}

/// A covariance model as configured.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldModel {
    Smooth(SmoothIsotropicModel),
    Local(LocallyIsotropicModel),
}

impl FieldModel {
    fn into_local(self) -> LocallyIsotropicModel {
        match self {
            FieldModel::Smooth(m) => LocallyIsotropicModel::from_smooth(&m),
            FieldModel::Local(m) => m,
        }
    }
}

/// Where the Pickands constant of a run comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum HSource {
    Supplied(f64),
    /// `α = 2`: the exact value.
    Exact,
    Estimate(PickandsConfig),
}

/// A validated unit of work.
#[derive(Debug, Clone)]
pub enum Job {
    Lk {
        domain: DomainSpec,
    },
    Eec {
        model: SmoothIsotropicModel,
        domain: DomainSpec,
        u_grid: Vec<f64>,
    },
    Pickands {
        model: LocallyIsotropicModel,
        domain: DomainSpec,
        u_grid: Vec<f64>,
        h: HSource,
    },
    PickandsConst {
        config: PickandsConfig,
    },
    Validate {
        model: FieldModel,
        domain: DomainSpec,
        u_grid: Vec<f64>,
        method: MethodName,
        h: Option<HSource>,
        resolution: usize,
        reps: usize,
        seed: u64,
    },
}

/// A validated job together with its fully explicit config.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub job: Job,
    pub config: RawConfig,
    pub output: String,
    pub format: Format,
}

fn draw_seed() -> u64 {
    // 53 bits, so the value survives any JSON reader
    rand::random::<u64>() >> 11
}

fn required<T: Clone>(value: &Option<T>, path: &str) -> CliResult<T> {
    value.clone().ok_or_else(|| CliError::at(path, "is required"))
}

fn build_domain(rec: &DomainRecord) -> CliResult<DomainSpec> {
    let shape = required(&rec.shape, "domain.shape")?;
    let core = |e| CliError::from_core("domain", e);
    let (manifold, shape) = match shape.as_str() {
        "rectangle" => {
            let sides = required(&rec.sides, "domain.sides")?;
            let manifold = match &rec.periods {
                Some(p) => ManifoldSpec::flat_torus(p.clone()),
                None => ManifoldSpec::euclidean(sides.len()),
            }
            .map_err(core)?;
            (
                manifold,
                Shape::Rectangle {
                    sides,
                    origin: rec.origin.clone(),
                },
            )
        }
        "ball" => {
            let radius = required(&rec.radius, "domain.radius")?;
            let dim = match (&rec.dim, &rec.center) {
                (Some(d), _) => *d,
                (None, Some(c)) => c.len(),
                (None, None) => return Err(CliError::at("domain.dim", "is required (or give domain.center)")),
            };
            (
                ManifoldSpec::euclidean(dim).map_err(core)?,
                Shape::Ball {
                    radius,
                    center: rec.center.clone(),
                },
            )
        }
        "full_sphere" | "great_circle" => {
            let radius = required(&rec.radius, "domain.radius")?;
            let manifold = ManifoldSpec::sphere(rec.dim.unwrap_or(2), radius).map_err(core)?;
            let shape = if shape == "full_sphere" {
                Shape::FullSphere
            } else {
                Shape::GreatCircle
            };
            (manifold, shape)
        }
        "full_torus" => {
            let periods = required(&rec.periods, "domain.periods")?;
            (ManifoldSpec::flat_torus(periods).map_err(core)?, Shape::FullTorus)
        }
        other => {
            return Err(CliError::at(
                "domain.shape",
                format!("unknown shape `{other}` (rectangle, ball, full_sphere, full_torus, great_circle)"),
            ))
        }
    };
    DomainSpec::new(manifold, shape).map_err(core)
}

fn build_model(rec: &ModelRecord, manifold: &ManifoldSpec) -> CliResult<FieldModel> {
    let family = required(&rec.family, "model.family")?;
    let core = |e| CliError::from_core("model", e);
    let m = manifold.clone();
    match family.as_str() {
        "squared_exponential" => {
            let l = required(&rec.length_scale, "model.length_scale")?;
            Ok(FieldModel::Smooth(SmoothIsotropicModel::squared_exponential(l, m).map_err(core)?))
        }
        "sphere_schoenberg" => {
            let b = required(&rec.b, "model.b")?;
            Ok(FieldModel::Smooth(SmoothIsotropicModel::sphere_schoenberg(b, m).map_err(core)?))
        }
        "powered_exponential" | "stable_on_chart" | "local" => {
            let c = required(&rec.c, "model.c")?;
            let alpha = required(&rec.alpha, "model.alpha")?;
            let model = match family.as_str() {
                "powered_exponential" => LocallyIsotropicModel::powered_exponential(c, alpha, m),
                "stable_on_chart" => LocallyIsotropicModel::stable_on_chart(c, alpha, m),
                _ => LocallyIsotropicModel::new(c, alpha, m),
            }
            .map_err(core)?;
            Ok(FieldModel::Local(model))
        }
        other => Err(CliError::at(
            "model.family",
            format!(
                "unknown family `{other}` (squared_exponential, sphere_schoenberg, powered_exponential, stable_on_chart, local)"
            ),
        )),
    }
}

fn build_u_grid(raw: &Option<Vec<f64>>, default: Option<&[f64]>, positive: bool) -> CliResult<Vec<f64>> {
    let grid = match (raw, default) {
        (Some(g), _) => g.clone(),
        (None, Some(d)) => d.to_vec(),
        (None, None) => return Err(CliError::at("u_grid", "is required")),
    };
    if grid.is_empty() {
        return Err(CliError::at("u_grid", "must not be empty"));
    }
    if grid.iter().any(|u| !u.is_finite()) {
        return Err(CliError::at("u_grid", "levels must be finite"));
    }
    if positive && grid.iter().any(|&u| u <= 0.0) {
        return Err(CliError::at("u_grid", "the Pickands approximation needs u > 0"));
    }
    Ok(grid)
}

/// Fills the Pickands block for a constant with index `(alpha, dim)` and
/// returns how the constant will be obtained.
fn resolve_h(
    raw: &mut RawConfig,
    alpha: f64,
    dim: usize,
    fallback_seed: Option<u64>,
) -> CliResult<HSource> {
    if let Some(h) = raw.h {
        if !(h.is_finite() && h > 0.0) {
            return Err(CliError::at("H", "must be positive"));
        }
        return Ok(HSource::Supplied(h));
    }
    if alpha == 2.0 {
        return Ok(HSource::Exact);
    }
    let mut rec = raw.pickands.clone().unwrap_or_default();
    if rec.alpha.is_some_and(|a| a != alpha) {
        return Err(CliError::at("pickands.alpha", format!("must equal the model's alpha {alpha}")));
    }
    if rec.dim.is_some_and(|d| d != dim) {
        return Err(CliError::at("pickands.N", format!("must equal the domain dimension {dim}")));
    }
    let seed = rec.seed.or(fallback_seed).unwrap_or_else(draw_seed);
    let config = pickands_config(&mut rec, alpha, dim, seed)?;
    raw.pickands = Some(rec);
    Ok(HSource::Estimate(config))
}

fn pickands_config(rec: &mut PickandsRecord, alpha: f64, dim: usize, seed: u64) -> CliResult<PickandsConfig> {
    let d = PickandsConfig::defaults(alpha, dim, seed);
    let config = PickandsConfig {
        alpha,
        dim,
        k: rec.k.unwrap_or(d.k),
        spacing: rec.spacing.unwrap_or(d.spacing),
        reps: rec.reps.unwrap_or(d.reps),
        seed,
        estimator: rec.estimator.unwrap_or(d.estimator),
    };
    config.validate().map_err(|e| CliError::from_core("pickands", e))?;
    *rec = PickandsRecord {
        alpha: Some(alpha),
        dim: Some(dim),
        k: Some(config.k),
        spacing: Some(config.spacing),
        reps: Some(config.reps),
        seed: Some(seed),
        estimator: Some(config.estimator),
    };
    Ok(config)
}

/// Validates `raw` for `sub` and makes every default explicit.
pub fn resolve(sub: Subcommand, mut raw: RawConfig) -> CliResult<Resolved> {
    let output_rec = raw.output.clone().unwrap_or_default();
    let output = output_rec.path.clone().unwrap_or_else(|| "-".to_string());
    if output.is_empty() {
        return Err(CliError::at("output.path", "must not be empty"));
    }
    let format = output_rec.format.unwrap_or_default();
    raw.output = Some(OutputRecord {
        path: Some(output.clone()),
        format: Some(format),
    });
    let domain = || -> CliResult<DomainSpec> {
        build_domain(raw.domain.as_ref().ok_or_else(|| CliError::at("domain", "is required"))?)
    };
    let model = |d: &DomainSpec| -> CliResult<FieldModel> {
        build_model(raw.model.as_ref().ok_or_else(|| CliError::at("model", "is required"))?, d.manifold())
    };
    let job = match sub {
        Subcommand::Lk => Job::Lk { domain: domain()? },
        Subcommand::Eec => {
            let domain = domain()?;
            let model = match model(&domain)? {
                FieldModel::Smooth(m) => m,
                FieldModel::Local(_) => {
                    return Err(CliError::at("model.family", "the EEC needs a smooth isotropic model"))
                }
            };
            let u_grid = build_u_grid(&raw.u_grid, None, false)?;
            Job::Eec { model, domain, u_grid }
        }
        Subcommand::Pickands => {
            let domain = domain()?;
            let model = model(&domain)?.into_local();
            let u_grid = build_u_grid(&raw.u_grid, None, true)?;
            let h = resolve_h(&mut raw, model.alpha(), domain.dim(), None)?;
            Job::Pickands {
                model,
                domain,
                u_grid,
                h,
            }
        }
        Subcommand::PickandsConst => {
            let mut rec = raw.pickands.clone().unwrap_or_default();
            let alpha = required(&rec.alpha, "pickands.alpha")?;
            let dim = required(&rec.dim, "pickands.N")?;
            let seed = rec.seed.unwrap_or_else(draw_seed);
            let config = pickands_config(&mut rec, alpha, dim, seed)?;
            raw.pickands = Some(rec);
            Job::PickandsConst { config }
        }
        Subcommand::Validate => {
            let domain = domain()?;
            let model = model(&domain)?;
            let method = match (raw.method, &model) {
                (Some(MethodName::Eec), FieldModel::Local(_)) => {
                    return Err(CliError::at("method", "the EEC needs a smooth isotropic model"))
                }
                (Some(m), _) => m,
                (None, FieldModel::Smooth(_)) => MethodName::Eec,
                (None, FieldModel::Local(_)) => MethodName::Pickands,
            };
            if let FieldModel::Local(m) = &model {
                if m.family().is_none() {
                    return Err(CliError::at(
                        "model.family",
                        "`local` has no full covariance and cannot be simulated",
                    ));
                }
            }
            let u_grid = build_u_grid(&raw.u_grid, Some(&DEFAULT_U_GRID), method == MethodName::Pickands)?;
            let mc = raw.mc.clone().unwrap_or_default();
            let resolution = mc.resolution.unwrap_or(DEFAULT_RESOLUTION);
            let reps = mc.reps.unwrap_or(DEFAULT_REPS);
            if reps == 0 {
                return Err(CliError::at("mc.reps", "must be positive"));
            }
            let seed = mc.seed.unwrap_or_else(draw_seed);
            // grid size is checked here so that nothing runs on a bad config
            excursion_core::mc::build_grid(&domain, resolution).map_err(|e| CliError::from_core("mc", e))?;
            raw.mc = Some(McRecord {
                resolution: Some(resolution),
                reps: Some(reps),
                seed: Some(seed),
            });
            let h = match method {
                MethodName::Eec => None,
                MethodName::Pickands => {
                    let local = model.clone().into_local();
                    Some(resolve_h(&mut raw, local.alpha(), domain.dim(), Some(seed))?)
                }
            };
            raw.method = Some(method);
            raw.u_grid = Some(u_grid.clone());
            Job::Validate {
                model,
                domain,
                u_grid,
                method,
                h,
                resolution,
                reps,
                seed,
            }
        }
    };
    Ok(Resolved {
        job,
        config: raw,
        output,
        format,
    })
}
