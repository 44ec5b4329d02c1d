//! Brute-force Monte Carlo: simulate the field on a grid over the domain,
//! record the grid maximum of every replication, and estimate
//! `P{sup X ≥ u}` with Wilson intervals.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::approx::ApproxResult;
use crate::covariance::Covariance;
use crate::error::{Error, Result};
use crate::gaussian::{GaussianSampler, SymmetricMatrix};
use crate::lk::{DomainSpec, Shape};
use crate::manifold::{ChartPoint, ManifoldSpec};

/// Largest grid accepted (covariance factorization budget).
pub const MAX_GRID_POINTS: usize = 10_000;
/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Simulation grid on a domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    manifold: ManifoldSpec,
    points: Vec<ChartPoint>,
    resolution: usize,
    /// Indices of the points that form the grid at `resolution / 2`, for
    /// grids that nest under doubling.
    coarse: Option<Vec<usize>>,
}

impl Grid {
    pub fn manifold(&self) -> &ManifoldSpec {
        &self.manifold
    }

    pub fn points(&self) -> &[ChartPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Indices of the half-resolution subgrid, when the grid nests.
    pub fn coarse_subset(&self) -> Option<&[usize]> {
        self.coarse.as_deref()
    }
}

fn check_size(count: usize) -> Result<()> {
    if count > MAX_GRID_POINTS {
        return Err(Error::invalid(
            "mc.resolution",
            format!("grid would have {count} points, more than the cap {MAX_GRID_POINTS}"),
        ));
    }
    Ok(())
}

/// Half-open vertex grid `origin + j·side/res`, `j = 0..res`, per axis.
/// Doubling `res` adds points without moving the existing ones.
fn box_grid(
    manifold: &ManifoldSpec,
    sides: &[f64],
    origin: &[f64],
    resolution: usize,
) -> Result<Grid> {
    let n = sides.len();
    check_size(resolution.saturating_pow(n as u32))?;
    let periods = match manifold {
        ManifoldSpec::FlatTorus { periods } => Some(periods),
        _ => None,
    };
    let total = resolution.pow(n as u32);
    let mut points = Vec::with_capacity(total);
    let mut coarse = Vec::new();
    for flat in 0..total {
        let mut rest = flat;
        let mut idx = vec![0; n];
        for i in (0..n).rev() {
            idx[i] = rest % resolution;
            rest /= resolution;
        }
        let coords: Vec<f64> = (0..n)
            .map(|i| {
                let x = origin[i] + idx[i] as f64 * sides[i] / resolution as f64;
                match periods {
                    Some(p) => x.rem_euclid(p[i]),
                    None => x,
                }
            })
            .collect();
        if resolution % 2 == 0 && idx.iter().all(|j| j % 2 == 0) {
            coarse.push(flat);
        }
        points.push(ChartPoint::flat(coords));
    }
    Ok(Grid {
        manifold: manifold.clone(),
        points,
        resolution,
        coarse: (resolution % 2 == 0 && resolution >= 4).then_some(coarse),
    })
}

/// Quasi-uniform grid on the domain.
///
/// * boxes and tori: half-open tensor grid with `resolution` points per axis;
/// * balls: cell centres of a `resolution`-per-axis grid on the bounding box
///   that fall inside the ball;
/// * the 2-sphere: `resolution` latitude rings at cell-centre polar angles
///   (poles excluded by half a pitch), ring `i` holding
///   `max(1, round(2·resolution·sin θ_i))` equally spaced points;
/// * circles and great circles: `resolution` equally spaced points.
pub fn build_grid(d: &DomainSpec, resolution: usize) -> Result<Grid> {
    if resolution < 2 {
        return Err(Error::invalid("mc.resolution", "must be at least 2"));
    }
    let manifold = d.manifold();
    match (d.shape(), manifold) {
        (Shape::Rectangle { sides, origin }, _) => {
            let origin = origin.clone().unwrap_or_else(|| vec![0.0; sides.len()]);
            box_grid(manifold, sides, &origin, resolution)
        }
        (Shape::FullTorus, ManifoldSpec::FlatTorus { periods }) => {
            box_grid(manifold, periods, &vec![0.0; periods.len()], resolution)
        }
        (Shape::Ball { radius, center }, ManifoldSpec::Euclidean { dim }) => {
            let n = *dim;
            check_size(resolution.saturating_pow(n as u32))?;
            let center = center.clone().unwrap_or_else(|| vec![0.0; n]);
            let h = 2.0 * radius / resolution as f64;
            let mut points = Vec::new();
            for flat in 0..resolution.pow(n as u32) {
                let mut rest = flat;
                let mut x = vec![0.0; n];
                for i in (0..n).rev() {
                    x[i] = -radius + ((rest % resolution) as f64 + 0.5) * h;
                    rest /= resolution;
                }
                if x.iter().map(|v| v * v).sum::<f64>() <= radius * radius {
                    points.push(ChartPoint::flat(
                        x.iter().zip(&center).map(|(a, c)| a + c).collect::<Vec<f64>>(),
                    ));
                }
            }
            Ok(Grid {
                manifold: manifold.clone(),
                points,
                resolution,
                coarse: None,
            })
        }
        (Shape::FullSphere, ManifoldSpec::Sphere { dim: 1, .. }) => Ok(circle_grid(manifold, &[], resolution)),
        (Shape::FullSphere, ManifoldSpec::Sphere { dim: 2, .. }) => {
            let mut points = Vec::new();
            for i in 0..resolution {
                let theta = (i as f64 + 0.5) * PI / resolution as f64;
                let ring = ((2.0 * resolution as f64 * theta.sin()).round() as usize).max(1);
                for j in 0..ring {
                    points.push(ChartPoint::polar([theta, 2.0 * PI * j as f64 / ring as f64]));
                }
                check_size(points.len())?;
            }
            Ok(Grid {
                manifold: manifold.clone(),
                points,
                resolution,
                coarse: None,
            })
        }
        (Shape::GreatCircle, ManifoldSpec::Sphere { dim, .. }) => {
            Ok(circle_grid(manifold, &vec![PI / 2.0; dim - 1], resolution))
        }
        _ => Err(Error::Unsupported(format!("no simulation grid for {d}"))),
    }
}

fn circle_grid(manifold: &ManifoldSpec, fixed: &[f64], resolution: usize) -> Grid {
    let points = (0..resolution)
        .map(|j| {
            let mut a = fixed.to_vec();
            a.push(2.0 * PI * j as f64 / resolution as f64);
            ChartPoint::polar(a)
        })
        .collect();
    let coarse = (resolution % 2 == 0 && resolution >= 4).then(|| (0..resolution).step_by(2).collect());
    Grid {
        manifold: manifold.clone(),
        points,
        resolution,
        coarse,
    }
}

/// A field model factorized on a grid.
#[derive(Debug, Clone)]
pub struct FieldSampler {
    grid: Grid,
    sampler: GaussianSampler,
}

impl FieldSampler {
    pub fn new<C: Covariance + ?Sized>(model: &C, grid: Grid) -> Result<Self> {
        if model.manifold() != grid.manifold() {
            return Err(Error::ManifoldMismatch {
                model: model.manifold().to_string(),
                domain: grid.manifold().to_string(),
            });
        }
        let pts = grid.points();
        let cov = SymmetricMatrix::try_from_fn(pts.len(), |i, j| model.covariance(&pts[i], &pts[j]))?;
        Ok(FieldSampler {
            sampler: GaussianSampler::new(cov)?,
            grid,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Relative jitter the factorization needed.
    pub fn jitter(&self) -> f64 {
        self.sampler.factor().jitter()
    }

    /// Applies `f` to every replication of the field on the grid.
    pub fn map_reps<T, F>(&self, reps: usize, seed: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(&[f64]) -> T + Sync,
    {
        self.sampler.map_reps(reps, seed, f)
    }

    /// Grid maximum of each replication.
    pub fn maxima(&self, reps: usize, seed: u64) -> Vec<f64> {
        self.map_reps(reps, seed, max_of)
    }

    /// For each replication, the maximum over the whole grid followed by
    /// the maximum over each index subset, all from the same sample.
    pub fn nested_maxima(&self, reps: usize, seed: u64, subsets: &[&[usize]]) -> Vec<Vec<f64>> {
        self.map_reps(reps, seed, |x| {
            let mut out = Vec::with_capacity(subsets.len() + 1);
            out.push(max_of(x));
            for s in subsets {
                out.push(s.iter().map(|&i| x[i]).fold(f64::NEG_INFINITY, f64::max));
            }
            out
        })
    }
}

fn max_of(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Per-replication grid maxima of `model` on `grid`.
pub fn sample_field<C: Covariance + ?Sized>(model: &C, grid: &Grid, reps: usize, seed: u64) -> Result<Vec<f64>> {
    Ok(FieldSampler::new(model, grid.clone())?.maxima(reps, seed))
}

/// Empirical excursion probability at one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub u: f64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub hits: usize,
    pub reps: usize,
    pub grid_size: usize,
    pub resolution: usize,
    pub seed: u64,
}

impl McEstimate {
    /// Binomial standard error `√(p̂(1 − p̂)/n)`.
    pub fn stderr(&self) -> f64 {
        (self.p_hat * (1.0 - self.p_hat) / self.reps as f64).sqrt()
    }
}

/// 95% Wilson score interval for `hits` successes out of `n`.
pub fn wilson_interval(hits: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = hits as f64 / nf;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    let low = if hits == 0 { 0.0 } else { (center - half).clamp(0.0, p) };
    let high = if hits == n { 1.0 } else { (center + half).clamp(p, 1.0) };
    (low, high)
}

/// Counts `M_i ≥ u` for every level, all on the same maxima.
pub fn excursion_estimates(
    maxima: &[f64],
    u_grid: &[f64],
    grid_size: usize,
    resolution: usize,
    seed: u64,
) -> Vec<McEstimate> {
    let reps = maxima.len();
    u_grid
        .iter()
        .map(|&u| {
            let hits = maxima.iter().filter(|&&m| m >= u).count();
            let (ci_low, ci_high) = wilson_interval(hits, reps);
            McEstimate {
                u,
                p_hat: if reps == 0 { 0.0 } else { hits as f64 / reps as f64 },
                ci_low,
                ci_high,
                hits,
                reps,
                grid_size,
                resolution,
                seed,
            }
        })
        .collect()
}

fn check_u_grid(u_grid: &[f64]) -> Result<()> {
    if u_grid.iter().any(|u| !u.is_finite()) {
        return Err(Error::invalid("u_grid", "levels must be finite"));
    }
    Ok(())
}

/// `P{max over the grid ≥ u}` for every `u` of `u_grid`, on one shared set
/// of replications.
pub fn empirical_excursion<C: Covariance + ?Sized>(
    model: &C,
    d: &DomainSpec,
    u_grid: &[f64],
    resolution: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<McEstimate>> {
    check_u_grid(u_grid)?;
    if reps == 0 {
        return Err(Error::invalid("mc.reps", "must be positive"));
    }
    let grid = build_grid(d, resolution)?;
    let size = grid.len();
    let maxima = sample_field(model, &grid, reps, seed)?;
    Ok(excursion_estimates(&maxima, u_grid, size, resolution, seed))
}

/// Full- and half-resolution estimates from the same replications (the
/// half-resolution grid is a subset of the full one). The second list is
/// empty when the grid does not nest.
pub fn empirical_excursion_with_refinement<C: Covariance + ?Sized>(
    model: &C,
    d: &DomainSpec,
    u_grid: &[f64],
    resolution: usize,
    reps: usize,
    seed: u64,
) -> Result<(Vec<McEstimate>, Vec<McEstimate>)> {
    check_u_grid(u_grid)?;
    if reps == 0 {
        return Err(Error::invalid("mc.reps", "must be positive"));
    }
    let grid = build_grid(d, resolution)?;
    let coarse = grid.coarse_subset().map(|c| c.to_vec());
    let sampler = FieldSampler::new(model, grid)?;
    let size = sampler.grid().len();
    match coarse {
        None => {
            let maxima = sampler.maxima(reps, seed);
            Ok((excursion_estimates(&maxima, u_grid, size, resolution, seed), Vec::new()))
        }
        Some(sub) => {
            let both = sampler.nested_maxima(reps, seed, &[&sub]);
            let fine: Vec<f64> = both.iter().map(|m| m[0]).collect();
            let coarse: Vec<f64> = both.iter().map(|m| m[1]).collect();
            Ok((
                excursion_estimates(&fine, u_grid, size, resolution, seed),
                excursion_estimates(&coarse, u_grid, sub.len(), resolution / 2, seed),
            ))
        }
    }
}

/// One row of an analytic-versus-empirical comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub u: f64,
    pub analytic_total: f64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `analytic / p̂`; `None` when `p̂ = 0`.
    pub ratio: Option<f64>,
    pub within_ci: bool,
    pub resolution: usize,
    pub reps: usize,
    pub seed: u64,
    /// `p̂` on the half-resolution subgrid of the same replications.
    pub p_hat_coarse: Option<f64>,
}

/// Joins analytic and empirical results level by level. `coarse` may be
/// empty; otherwise it must share the level grid.
pub fn compare_report(
    analytic: &[ApproxResult],
    empirical: &[McEstimate],
    coarse: &[McEstimate],
) -> Result<Vec<ComparisonRow>> {
    if analytic.len() != empirical.len() {
        return Err(Error::MismatchedGrids(format!(
            "{} analytic levels versus {} empirical",
            analytic.len(),
            empirical.len()
        )));
    }
    if !coarse.is_empty() && coarse.len() != empirical.len() {
        return Err(Error::MismatchedGrids("refinement column has a different length".into()));
    }
    analytic
        .iter()
        .zip(empirical)
        .enumerate()
        .map(|(i, (a, e))| {
            if a.u != e.u || coarse.get(i).is_some_and(|c| c.u != e.u) {
                return Err(Error::MismatchedGrids(format!(
                    "level {i}: analytic u = {}, empirical u = {}",
                    a.u, e.u
                )));
            }
            Ok(ComparisonRow {
                u: e.u,
                analytic_total: a.total,
                p_hat: e.p_hat,
                ci_low: e.ci_low,
                ci_high: e.ci_high,
                ratio: (e.p_hat > 0.0).then(|| a.total / e.p_hat),
                within_ci: e.ci_low <= a.total && a.total <= e.ci_high,
                resolution: e.resolution,
                reps: e.reps,
                seed: e.seed,
                p_hat_coarse: coarse.get(i).map(|c| c.p_hat),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::Method;
    use crate::covariance::{LocallyIsotropicModel, SmoothIsotropicModel};
    use crate::kernels::gaussian_tail;

    fn torus() -> ManifoldSpec {
        ManifoldSpec::flat_torus(vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn torus_grid_shape() {
        let d = DomainSpec::full_torus(vec![1.0, 1.0]).unwrap();
        let g = build_grid(&d, 50).unwrap();
        assert_eq!(g.len(), 2500);
        assert_eq!(build_grid(&d, 100).unwrap().len(), 4 * 2500);
        let coarse = g.coarse_subset().unwrap();
        assert_eq!(coarse.len(), 625);
        let half = build_grid(&d, 25).unwrap();
        for (k, &i) in coarse.iter().enumerate() {
            assert_eq!(g.points()[i], half.points()[k]);
        }
        assert!(build_grid(&d, 1).is_err());
        assert!(matches!(
            build_grid(&d, 101),
            Err(Error::InvalidParameter { field, .. }) if field == "mc.resolution"
        ));
    }

    #[test]
    fn sphere_grid_avoids_poles() {
        let s2 = ManifoldSpec::sphere(2, 1.0).unwrap();
        let d = DomainSpec::full_sphere(2, 1.0).unwrap();
        let res = 20;
        let g = build_grid(&d, res).unwrap();
        let delta = 0.5 * PI / res as f64;
        for p in g.points() {
            assert!(p.coords[0] >= delta - 1e-15 && p.coords[0] <= PI - delta + 1e-15);
            s2.check_regular(p).unwrap();
        }
        // ring sizes follow sin θ: about 4 res² / π points in all
        let expected = 4.0 * (res * res) as f64 / PI;
        assert!((g.len() as f64 / expected - 1.0).abs() < 0.05);
    }

    #[test]
    fn single_point_maximum_is_standard_normal() {
        let e2 = ManifoldSpec::euclidean(2).unwrap();
        let model = SmoothIsotropicModel::squared_exponential(0.5, e2.clone()).unwrap();
        let grid = Grid {
            manifold: e2,
            points: vec![ChartPoint::flat([0.3, 0.3])],
            resolution: 1,
            coarse: None,
        };
        let maxima = sample_field(&model, &grid, 20_000, 4).unwrap();
        let est = excursion_estimates(&maxima, &[1.0], 1, 1, 4);
        let psi = gaussian_tail(1.0);
        assert!((est[0].p_hat - psi).abs() < 3.0 * (psi * (1.0 - psi) / 20_000.0).sqrt());
    }

    #[test]
    fn duplicated_point_changes_nothing() {
        let e1 = ManifoldSpec::euclidean(1).unwrap();
        let model = SmoothIsotropicModel::squared_exponential(1.0, e1.clone()).unwrap();
        let single = Grid {
            manifold: e1.clone(),
            points: vec![ChartPoint::flat([0.0])],
            resolution: 1,
            coarse: None,
        };
        let double = Grid {
            points: vec![ChartPoint::flat([0.0]), ChartPoint::flat([0.0])],
            ..single.clone()
        };
        let a = sample_field(&model, &single, 5_000, 9).unwrap();
        let b = sample_field(&model, &double, 5_000, 9).unwrap();
        let ea = excursion_estimates(&a, &[0.0, 1.0, 2.0], 1, 1, 9);
        let eb = excursion_estimates(&b, &[0.0, 1.0, 2.0], 2, 1, 9);
        for (x, y) in ea.iter().zip(&eb) {
            // same law: counts agree within binomial noise
            assert!((x.p_hat - y.p_hat).abs() < 4.0 * (x.stderr().powi(2) + y.stderr().powi(2)).sqrt() + 1e-12);
        }
    }

    #[test]
    fn extreme_levels() {
        let maxima = vec![0.5, 1.0, 1.5];
        let est = excursion_estimates(&maxima, &[0.0, 10.0], 3, 2, 1);
        assert_eq!(est[0].p_hat, 1.0);
        assert_eq!(est[1].p_hat, 0.0);
        assert!(est[1].ci_high > 0.0);
        assert_eq!(est[1].ci_low, 0.0);
        for e in &est {
            assert!(e.ci_low <= e.p_hat && e.p_hat <= e.ci_high);
        }
    }

    #[test]
    fn wilson_reference() {
        // 10 of 100: centre 0.1 shifted, interval (0.0552, 0.1744)
        let (lo, hi) = wilson_interval(10, 100);
        assert!((lo - 0.055_229).abs() < 1e-5, "{lo}");
        assert!((hi - 0.174_366).abs() < 1e-5, "{hi}");
    }

    #[test]
    fn compare_report_rows() {
        assert!(compare_report(&[], &[], &[]).unwrap().is_empty());
        let approx = |u: f64, total: f64| ApproxResult {
            method: Method::Eec,
            u,
            total,
            terms: vec![total],
            model: String::new(),
            domain: String::new(),
            h: None,
            notes: vec![],
        };
        let emp = excursion_estimates(&[0.5, 1.0, 1.5, 2.5], &[1.0, 3.0], 4, 2, 0);
        let rows = compare_report(&[approx(1.0, 0.7), approx(3.0, 0.01)], &emp, &[]).unwrap();
        assert_eq!(rows[0].ratio, Some(0.7 / 0.75));
        assert!(rows[0].within_ci);
        assert_eq!(rows[1].ratio, None);
        assert!(rows[1].within_ci);
        assert!(matches!(
            compare_report(&[approx(2.0, 0.7)], &emp[..1], &[]),
            Err(Error::MismatchedGrids(_))
        ));
        assert!(compare_report(&[approx(1.0, 0.7)], &emp, &[]).is_err());
    }

    #[test]
    fn invalid_torus_covariance_fails_numerically() {
        let model = SmoothIsotropicModel::squared_exponential(1.0, torus()).unwrap();
        let d = DomainSpec::full_torus(vec![1.0, 1.0]).unwrap();
        let err = empirical_excursion(&model, &d, &[3.0], 20, 100, 1).unwrap_err();
        assert!(err.is_numerical(), "{err}");
    }

    #[test]
    fn refinement_shares_replications() {
        let model = LocallyIsotropicModel::stable_on_chart(1.0, 1.0, torus()).unwrap();
        let d = DomainSpec::full_torus(vec![1.0, 1.0]).unwrap();
        let (fine, coarse) = empirical_excursion_with_refinement(&model, &d, &[1.5, 2.5], 16, 2_000, 3).unwrap();
        assert_eq!(coarse.len(), 2);
        assert_eq!(coarse[0].grid_size, 64);
        for (f, c) in fine.iter().zip(&coarse) {
            assert!(f.hits >= c.hits);
        }
        let again = empirical_excursion(&model, &d, &[1.5, 2.5], 16, 2_000, 3).unwrap();
        assert_eq!(again, fine);
    }
}
