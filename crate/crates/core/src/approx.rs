//! Analytic excursion-probability approximations: the expected Euler
//! characteristic (EEC) for smooth isotropic fields and the Pickands-type
//! formula for locally isotropic fields.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::{Covariance, LocallyIsotropicModel, SmoothIsotropicModel};
use crate::error::{Error, Result};
use crate::kernels::{beta_j, gaussian_tail};
use crate::lk::{lk_curvatures, rescale_lk, DomainSpec, Shape};
use crate::manifold::{ChartId, ChartPoint, ManifoldSpec};
use crate::pickands::{estimate_pickands, gaussian_pickands_constant, PickandsConfig, PickandsEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Eec,
    Pickands,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Eec => "eec",
            Method::Pickands => "pickands",
        })
    }
}

/// Where a Pickands constant came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HProvenance {
    /// `H_{2,N} = π^{−N/2}`.
    Exact,
    /// A Monte Carlo estimate.
    MonteCarlo,
    /// Given by the caller.
    Supplied,
}

impl fmt::Display for HProvenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HProvenance::Exact => "exact",
            HProvenance::MonteCarlo => "monte_carlo",
            HProvenance::Supplied => "supplied",
        })
    }
}

/// A value of `H_{α,k}` together with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PickandsConstant {
    pub alpha: f64,
    pub dim: usize,
    pub value: f64,
    pub provenance: HProvenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<PickandsEstimate>,
}

impl PickandsConstant {
    pub fn supplied(alpha: f64, dim: usize, value: f64) -> Result<Self> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::invalid("H", "must be positive"));
        }
        Ok(PickandsConstant {
            alpha,
            dim,
            value,
            provenance: HProvenance::Supplied,
            estimate: None,
        })
    }

    pub fn from_estimate(estimate: PickandsEstimate) -> Self {
        PickandsConstant {
            alpha: estimate.alpha,
            dim: estimate.dim,
            value: estimate.estimate,
            provenance: HProvenance::MonteCarlo,
            estimate: Some(estimate),
        }
    }
}

/// `H_{α,k}`: exact for `α = 2`, otherwise estimated with the default
/// lattice parameters of [`PickandsConfig::defaults`] and `seed`.
pub fn resolve_h(alpha: f64, dim: usize, seed: u64) -> Result<PickandsConstant> {
    if alpha == 2.0 {
        return Ok(PickandsConstant {
            alpha,
            dim,
            value: gaussian_pickands_constant(dim),
            provenance: HProvenance::Exact,
            estimate: None,
        });
    }
    let estimate = estimate_pickands(&PickandsConfig::defaults(alpha, dim, seed))?;
    Ok(PickandsConstant::from_estimate(estimate))
}

/// An analytic approximation at one level `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxResult {
    pub method: Method,
    pub u: f64,
    pub total: f64,
    /// EEC: the summands `j = 0..=k`; Pickands: the single term.
    pub terms: Vec<f64>,
    pub model: String,
    pub domain: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<PickandsConstant>,
    /// Caveats attached to the result.
    pub notes: Vec<String>,
}

const EEC_ERROR_NOTE: &str =
    "error versus the excursion probability is super-exponentially small in u, unquantified";
const BOUNDARYLESS_NOTE: &str = "boundaryless domain, used as a validation case";
const BOUNDARY_NOTE: &str = "boundary untreated";

fn check_same_manifold(model: &ManifoldSpec, d: &DomainSpec) -> Result<()> {
    if model != d.manifold() {
        return Err(Error::ManifoldMismatch {
            model: model.to_string(),
            domain: d.manifold().to_string(),
        });
    }
    Ok(())
}

fn check_level(u: f64) -> Result<()> {
    if !u.is_finite() {
        return Err(Error::invalid("u", "must be finite"));
    }
    Ok(())
}

/// Expected Euler characteristic of the excursion set above `u`:
/// `Σ_j (−2ρ'(0))^{j/2} L_j(D) β_j(u)`.
pub fn eec_approx(model: &SmoothIsotropicModel, d: &DomainSpec, u: f64) -> Result<ApproxResult> {
    check_level(u)?;
    check_same_manifold(model.manifold(), d)?;
    let lk = rescale_lk(&lk_curvatures(d), model.kappa())?;
    let terms = lk
        .values()
        .iter()
        .enumerate()
        .map(|(j, l)| Ok(l * beta_j(j, u)?))
        .collect::<Result<Vec<f64>>>()?;
    let mut notes = vec![EEC_ERROR_NOTE.to_string()];
    if matches!(d.shape(), Shape::FullTorus) {
        notes.push(BOUNDARYLESS_NOTE.to_string());
    }
    Ok(ApproxResult {
        method: Method::Eec,
        u,
        total: terms.iter().sum(),
        terms,
        model: model.to_string(),
        domain: d.to_string(),
        h: None,
        notes,
    })
}

/// `Vol(D)·c^{k/α}·H_{α,k}·u^{2k/α}·Ψ(u)` for a `k`-dimensional domain
/// (`k ≤ N`), with `Vol` the induced-metric volume.
pub fn pickands_approx_submanifold(
    model: &LocallyIsotropicModel,
    d: &DomainSpec,
    u: f64,
    h: &PickandsConstant,
) -> Result<ApproxResult> {
    check_level(u)?;
    if u <= 0.0 {
        return Err(Error::invalid("u", "the Pickands approximation needs u > 0"));
    }
    check_same_manifold(model.manifold(), d)?;
    let (c, alpha) = model.local_expansion();
    let k = d.dim();
    if h.dim != k || h.alpha != alpha {
        return Err(Error::invalid(
            "H",
            format!(
                "constant is for (alpha = {}, k = {}), need (alpha = {alpha}, k = {k})",
                h.alpha, h.dim
            ),
        ));
    }
    if !(h.value.is_finite() && h.value > 0.0) {
        return Err(Error::invalid("H", "must be positive"));
    }
    let e = k as f64 / alpha;
    let term = d.volume() * c.powf(e) * h.value * u.powf(2.0 * e) * gaussian_tail(u);
    let mut notes = Vec::new();
    if d.has_boundary() {
        notes.push(BOUNDARY_NOTE.to_string());
    }
    Ok(ApproxResult {
        method: Method::Pickands,
        u,
        total: term,
        terms: vec![term],
        model: model.to_string(),
        domain: d.to_string(),
        h: Some(h.clone()),
        notes,
    })
}

/// Pickands approximation for a full-dimensional domain.
pub fn pickands_approx(
    model: &LocallyIsotropicModel,
    d: &DomainSpec,
    u: f64,
    h: &PickandsConstant,
) -> Result<ApproxResult> {
    if d.dim() != d.manifold().dim() {
        return Err(Error::invalid(
            "domain",
            "domain is lower-dimensional; use the submanifold approximation",
        ));
    }
    pickands_approx_submanifold(model, d, u, h)
}

/// A coordinate box `Π [lo_i, hi_i]` inside one chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartRegion {
    pub chart: ChartId,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// Default midpoint-rule resolution per axis.
pub const DEFAULT_QUADRATURE_RESOLUTION: usize = 512;

/// `∫_T |det B(t)| dt` with `B(t) = c^{1/α} G^{1/2}(t)`, by the midpoint
/// rule on a tensor grid with `resolution` cells per axis. Equals
/// `c^{N/α}` times the Riemannian volume of the region.
pub fn euclidean_det_integral(
    manifold: &ManifoldSpec,
    region: &ChartRegion,
    c: f64,
    alpha: f64,
    resolution: usize,
) -> Result<f64> {
    let n = manifold.dim();
    if region.lo.len() != n || region.hi.len() != n {
        return Err(Error::invalid("region", "bounds must have one entry per dimension"));
    }
    if region.lo.iter().zip(&region.hi).any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
        return Err(Error::invalid("region", "needs lo < hi on every axis"));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::invalid("c", "must be positive"));
    }
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::invalid("alpha", "must lie in (0, 2]"));
    }
    if resolution == 0 {
        return Err(Error::invalid("resolution", "must be positive"));
    }
    let widths: Vec<f64> = (0..n)
        .map(|i| (region.hi[i] - region.lo[i]) / resolution as f64)
        .collect();
    let cell: f64 = widths.iter().product();
    let scale = c.powf(1.0 / alpha);
    let cells = resolution.pow(n as u32);
    // one task per slab of the first axis; slab sums are combined pairwise
    let slab = cells / resolution;
    let slabs: Vec<f64> = (0..resolution)
        .into_par_iter()
        .map(|s| -> Result<f64> {
            let mut vals = Vec::with_capacity(slab);
            for flat in s * slab..(s + 1) * slab {
                let mut rest = flat;
                let mut x = vec![0.0; n];
                for i in (0..n).rev() {
                    let idx = rest % resolution;
                    rest /= resolution;
                    x[i] = region.lo[i] + (idx as f64 + 0.5) * widths[i];
                }
                let p = ChartPoint {
                    chart: region.chart,
                    coords: x,
                };
                let g = manifold.metric_tensor(&p)?;
                let b = g.sqrt() * scale;
                vals.push(b.determinant().abs());
            }
            Ok(pairwise_sum(&vals))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_sum(&slabs) * cell)
}

/// Pairwise (cascade) summation; the order depends only on the length.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 16 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn torus() -> ManifoldSpec {
        ManifoldSpec::flat_torus(vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn eec_torus_reference() {
        let model = SmoothIsotropicModel::squared_exponential(1.0, torus()).unwrap();
        let d = DomainSpec::full_torus(vec![1.0, 1.0]).unwrap();
        let r = eec_approx(&model, &d, 3.0).unwrap();
        assert_eq!(r.terms.len(), 3);
        assert_eq!(r.terms[0], 0.0);
        assert_eq!(r.terms[1], 0.0);
        let expected = (2.0 * PI).powf(-1.5) * 3.0 * (-4.5f64).exp();
        assert!((r.total - expected).abs() < 1e-15);
        assert!((r.total - 0.002_116_05).abs() < 1e-8);
        assert!(r.notes.iter().any(|n| n.contains("boundaryless")));
    }

    #[test]
    fn eec_sphere_reference() {
        let s2 = ManifoldSpec::sphere(2, 1.0).unwrap();
        let model = SmoothIsotropicModel::sphere_schoenberg(vec![0.0, 1.0], s2).unwrap();
        let d = DomainSpec::full_sphere(2, 1.0).unwrap();
        for u in [0.5, 2.0, 4.0] {
            let r = eec_approx(&model, &d, u).unwrap();
            let expected = 2.0 * gaussian_tail(u) + 4.0 * PI * (2.0 * PI).powf(-1.5) * u * (-0.5 * u * u).exp();
            assert!((r.total - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn eec_rejects_other_manifold() {
        let model = SmoothIsotropicModel::squared_exponential(1.0, torus()).unwrap();
        let d = DomainSpec::rectangle(ManifoldSpec::euclidean(2).unwrap(), vec![1.0, 1.0]).unwrap();
        assert!(matches!(eec_approx(&model, &d, 3.0), Err(Error::ManifoldMismatch { .. })));
    }

    #[test]
    fn pickands_torus_reference() {
        let model = LocallyIsotropicModel::new(0.5, 2.0, torus()).unwrap();
        let d = DomainSpec::full_torus(vec![1.0, 1.0]).unwrap();
        let h = resolve_h(2.0, 2, 0).unwrap();
        assert_eq!(h.provenance, HProvenance::Exact);
        let r = pickands_approx(&model, &d, 3.0, &h).unwrap();
        // u^{2N/α} = u² here
        let expected = 0.5 / PI * 9.0 * gaussian_tail(3.0);
        assert!((r.total - expected).abs() < 1e-16);
        assert!((r.total - 0.001_933_586_499_6).abs() < 1e-12);
        assert_eq!(r.terms, vec![r.total]);
    }

    #[test]
    fn pickands_great_circle_reference() {
        let s2 = ManifoldSpec::sphere(2, 1.0).unwrap();
        let model = LocallyIsotropicModel::new(0.5, 2.0, s2.clone()).unwrap();
        let d = DomainSpec::new(s2, Shape::GreatCircle).unwrap();
        let h = resolve_h(2.0, 1, 0).unwrap();
        let r = pickands_approx_submanifold(&model, &d, 3.0, &h).unwrap();
        // u^{2k/α} = u for k = 1, α = 2
        let expected = 2.0 * PI * 0.5f64.sqrt() / PI.sqrt() * 3.0 * gaussian_tail(3.0);
        assert!((r.total - expected).abs() < 1e-15);
        assert!((r.total - 0.010_151_077_721_9).abs() < 1e-12);
        assert!(pickands_approx(&model, &d, 3.0, &h).is_err());
    }

    #[test]
    fn pickands_guards() {
        let model = LocallyIsotropicModel::new(1.0, 1.0, torus()).unwrap();
        let d = DomainSpec::full_torus(vec![1.0, 1.0]).unwrap();
        let h = PickandsConstant::supplied(1.0, 2, 0.6).unwrap();
        assert!(pickands_approx(&model, &d, 0.0, &h).is_err());
        assert!(pickands_approx(&model, &d, -1.0, &h).is_err());
        let wrong = PickandsConstant::supplied(1.0, 1, 0.6).unwrap();
        assert!(pickands_approx(&model, &d, 3.0, &wrong).is_err());
        assert!(PickandsConstant::supplied(1.0, 2, 0.0).is_err());
    }

    #[test]
    fn det_integral_flat_and_scaling() {
        let e2 = ManifoldSpec::euclidean(2).unwrap();
        let region = ChartRegion {
            chart: ChartId::Flat,
            lo: vec![0.0, -1.0],
            hi: vec![2.0, 0.5],
        };
        let v = euclidean_det_integral(&e2, &region, 1.0, 2.0, 16).unwrap();
        assert!((v - 3.0).abs() < 1e-13);
        let scaled = euclidean_det_integral(&e2, &region, 3.0, 1.0, 16).unwrap();
        assert!((scaled - 9.0 * 3.0).abs() < 1e-12);
    }

    #[test]
    fn pairwise_sum_is_exact_on_integers() {
        let v: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 500_500.0);
    }
}
