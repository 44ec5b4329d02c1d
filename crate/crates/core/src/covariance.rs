//! Covariance families on catalogue manifolds.
//!
//! Smooth isotropic models are functions of the squared geodesic distance,
//! `C(p, q) = ρ(d²(p, q))`, and expose `ρ'(0)`. Locally isotropic models
//! carry the constants of the near-diagonal expansion
//! `C(p, q) = 1 − c·d^α(p, q)(1 + o(1))`, optionally with a full family that
//! can be simulated.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{ChartPoint, ManifoldSpec};

/// Tolerance on `Σ b_n = 1` for Schoenberg coefficients.
const UNIT_VARIANCE_TOL: f64 = 1e-10;

/// Anything that can evaluate a covariance between two points of a manifold.
pub trait Covariance: Send + Sync {
    fn manifold(&self) -> &ManifoldSpec;

    fn covariance(&self, p: &ChartPoint, q: &ChartPoint) -> Result<f64>;

    /// `1 − C(p, q)`, without cancellation where the family allows it.
    fn one_minus_covariance(&self, p: &ChartPoint, q: &ChartPoint) -> Result<f64> {
        Ok(1.0 - self.covariance(p, q)?)
    }

    fn describe(&self) -> String;
}

/// Dense covariance matrix of `model` on `points`.
pub fn covariance_matrix<C: Covariance + ?Sized>(
    model: &C,
    points: &[ChartPoint],
) -> Result<DMatrix<f64>> {
    let n = points.len();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v = model.covariance(&points[i], &points[j])?;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SmoothFamily {
    /// `ρ(r) = exp(−r / (2ℓ²))`.
    SquaredExponential { length_scale: f64 },
    /// `C(p, q) = Σ b_n ⟨p̂, q̂⟩^n` on a sphere, with `p̂, q̂` unit vectors.
    SphereSchoenberg { b: Vec<f64> },
}

/// Centered, unit-variance isotropic covariance `C(p, q) = ρ(d²(p, q))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothIsotropicModel {
    family: SmoothFamily,
    manifold: ManifoldSpec,
}

impl SmoothIsotropicModel {
    pub fn new(family: SmoothFamily, manifold: ManifoldSpec) -> Result<Self> {
        manifold.validate()?;
        match &family {
            SmoothFamily::SquaredExponential { length_scale } => {
                if !(length_scale.is_finite() && *length_scale > 0.0) {
                    return Err(Error::invalid("length_scale", "must be positive"));
                }
            }
            SmoothFamily::SphereSchoenberg { b } => {
                if !matches!(manifold, ManifoldSpec::Sphere { .. }) {
                    return Err(Error::invalid(
                        "family",
                        "sphere_schoenberg is only defined on spheres",
                    ));
                }
                if b.is_empty() || b.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::invalid("b", "coefficients must be non-negative"));
                }
                let total: f64 = b.iter().sum();
                if (total - 1.0).abs() > UNIT_VARIANCE_TOL {
                    return Err(Error::invalid(
                        "b",
                        format!("coefficients must sum to 1 (unit variance), got {total}"),
                    ));
                }
            }
        }
        let model = SmoothIsotropicModel { family, manifold };
        if model.rho_prime_0() >= 0.0 {
            return Err(Error::DegenerateField(
                "ρ'(0) = 0: the field is constant".into(),
            ));
        }
        Ok(model)
    }

    pub fn squared_exponential(length_scale: f64, manifold: ManifoldSpec) -> Result<Self> {
        Self::new(SmoothFamily::SquaredExponential { length_scale }, manifold)
    }

    pub fn sphere_schoenberg(b: Vec<f64>, manifold: ManifoldSpec) -> Result<Self> {
        Self::new(SmoothFamily::SphereSchoenberg { b }, manifold)
    }

    pub fn family(&self) -> &SmoothFamily {
        &self.family
    }

    /// `ρ'(0)`.
    pub fn rho_prime_0(&self) -> f64 {
        match &self.family {
            SmoothFamily::SquaredExponential { length_scale } => {
                -0.5 / (length_scale * length_scale)
            }
            SmoothFamily::SphereSchoenberg { b } => {
                let radius = match self.manifold {
                    ManifoldSpec::Sphere { radius, .. } => radius,
                    _ => 1.0,
                };
                let weighted: f64 = b.iter().enumerate().map(|(n, bn)| n as f64 * bn).sum();
                -0.5 * weighted / (radius * radius)
            }
        }
    }

    /// `κ = −2ρ'(0)`, the scale of the induced metric `g^X = κ g`.
    pub fn kappa(&self) -> f64 {
        -2.0 * self.rho_prime_0()
    }

    /// `ρ` as a function of the squared geodesic distance.
    pub fn rho(&self, squared_distance: f64) -> f64 {
        match &self.family {
            SmoothFamily::SquaredExponential { length_scale } => {
                (-squared_distance / (2.0 * length_scale * length_scale)).exp()
            }
            SmoothFamily::SphereSchoenberg { b } => {
                let radius = match self.manifold {
                    ManifoldSpec::Sphere { radius, .. } => radius,
                    _ => 1.0,
                };
                polynomial(b, (squared_distance.sqrt() / radius).cos())
            }
        }
    }
}

/// `Σ b_n x^n` by Horner's rule.
fn polynomial(b: &[f64], x: f64) -> f64 {
    b.iter().rev().fold(0.0, |acc, bn| acc * x + bn)
}

impl fmt::Display for SmoothIsotropicModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            SmoothFamily::SquaredExponential { length_scale } => {
                write!(f, "squared_exponential(l={length_scale}) on {}", self.manifold)
            }
            SmoothFamily::SphereSchoenberg { b } => {
                write!(f, "sphere_schoenberg(b={b:?}) on {}", self.manifold)
            }
        }
    }
}

impl Covariance for SmoothIsotropicModel {
    fn manifold(&self) -> &ManifoldSpec {
        &self.manifold
    }

    fn covariance(&self, p: &ChartPoint, q: &ChartPoint) -> Result<f64> {
        match &self.family {
            SmoothFamily::SquaredExponential { .. } => {
                let d = self.manifold.geodesic_distance(p, q)?;
                Ok(self.rho(d * d))
            }
            SmoothFamily::SphereSchoenberg { b } => {
                Ok(polynomial(b, unit_inner_product(&self.manifold, p, q)?))
            }
        }
    }

    fn one_minus_covariance(&self, p: &ChartPoint, q: &ChartPoint) -> Result<f64> {
        let d = self.manifold.geodesic_distance(p, q)?;
        match &self.family {
            SmoothFamily::SquaredExponential { length_scale } => {
                Ok(-(-d * d / (2.0 * length_scale * length_scale)).exp_m1())
            }
            SmoothFamily::SphereSchoenberg { b } => {
                let radius = match self.manifold {
                    ManifoldSpec::Sphere { radius, .. } => radius,
                    _ => 1.0,
                };
                // 1 − x^n = (1 − x)(1 + x + … + x^{n−1}), with 1 − cos θ = 2 sin²(θ/2)
                let theta = d / radius;
                let x = theta.cos();
                let one_minus_x = 2.0 * (0.5 * theta).sin().powi(2);
                let mut total = 0.0;
                let mut geometric = 0.0;
                let mut power = 1.0;
                for bn in b.iter().skip(1) {
                    geometric += power;
                    power *= x;
                    total += bn * geometric;
                }
                Ok(one_minus_x * total)
            }
        }
    }

    fn describe(&self) -> String {
        self.to_string()
    }
}

fn unit_inner_product(m: &ManifoldSpec, p: &ChartPoint, q: &ChartPoint) -> Result<f64> {
    let a = m.embed(p)?;
    let b = m.embed(q)?;
    let r2 = match m {
        ManifoldSpec::Sphere { radius, .. } => radius * radius,
        _ => 1.0,
    };
    let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
    Ok((dot / r2).clamp(-1.0, 1.0))
}

/// A full covariance attached to a locally isotropic model, for simulation.
#[derive(Debug, Clone, PartialEq)]
pub enum LocalFamily {
    /// `exp(−c·d_M^α)` with the geodesic distance.
    PoweredExponential,
    /// `exp(−c·‖x − y‖^α)` in flat ambient coordinates: chart coordinates
    /// (fundamental domain) on Euclidean space and tori, embedding
    /// coordinates on the sphere. Positive definite for every α in (0, 2].
    StableOnChart,
    /// A smooth isotropic model read as `α = 2`, `c = −ρ'(0)`.
    Smooth(SmoothIsotropicModel),
}

/// Covariance with near-diagonal expansion `1 − c·d_M^α (1 + o(1))`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocallyIsotropicModel {
    c: f64,
    alpha: f64,
    manifold: ManifoldSpec,
    family: Option<LocalFamily>,
}

impl LocallyIsotropicModel {
    /// Local constants only; usable by the analytic approximations but not
    /// by the simulators.
    pub fn new(c: f64, alpha: f64, manifold: ManifoldSpec) -> Result<Self> {
        manifold.validate()?;
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::invalid("c", "must be positive"));
        }
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(Error::invalid("alpha", "must lie in (0, 2]"));
        }
        Ok(LocallyIsotropicModel {
            c,
            alpha,
            manifold,
            family: None,
        })
    }

    /// `exp(−c·d_M^α)`. Positive definite on Euclidean space for α ≤ 2, and
    /// on spheres and circles for α ≤ 1. On tori of dimension ≥ 2 the
    /// wrapped distance breaks positive definiteness, so it is rejected
    /// there; use [`LocallyIsotropicModel::stable_on_chart`] instead.
    pub fn powered_exponential(c: f64, alpha: f64, manifold: ManifoldSpec) -> Result<Self> {
        let mut model = Self::new(c, alpha, manifold)?;
        match &model.manifold {
            ManifoldSpec::Euclidean { .. } => {}
            ManifoldSpec::Sphere { .. } if alpha > 1.0 => {
                return Err(Error::invalid(
                    "alpha",
                    "powered_exponential on a sphere requires alpha <= 1",
                ));
            }
            ManifoldSpec::FlatTorus { periods } if periods.len() == 1 && alpha > 1.0 => {
                return Err(Error::invalid(
                    "alpha",
                    "powered_exponential on a circle requires alpha <= 1",
                ));
            }
            ManifoldSpec::FlatTorus { periods } if periods.len() > 1 => {
                return Err(Error::invalid(
                    "family",
                    "powered_exponential of the wrapped distance is not positive definite on \
                     tori of dimension >= 2; use stable_on_chart",
                ));
            }
            _ => {}
        }
        model.family = Some(LocalFamily::PoweredExponential);
        Ok(model)
    }

    pub fn stable_on_chart(c: f64, alpha: f64, manifold: ManifoldSpec) -> Result<Self> {
        let mut model = Self::new(c, alpha, manifold)?;
        model.family = Some(LocalFamily::StableOnChart);
        Ok(model)
    }

    /// Smooth isotropic model viewed through its local expansion:
    /// `α = 2`, `c = −ρ'(0)`.
    pub fn from_smooth(model: &SmoothIsotropicModel) -> Self {
        LocallyIsotropicModel {
            c: -model.rho_prime_0(),
            alpha: 2.0,
            manifold: model.manifold.clone(),
            family: Some(LocalFamily::Smooth(model.clone())),
        }
    }

    /// The `(c, α)` pair.
    pub fn local_expansion(&self) -> (f64, f64) {
        (self.c, self.alpha)
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn family(&self) -> Option<&LocalFamily> {
        self.family.as_ref()
    }

    /// `(1 − C(p, q_k)) / (c·d_M^α(p, q_k))` along a sequence of points.
    pub fn expansion_ratio_check(&self, p: &ChartPoint, q_sequence: &[ChartPoint]) -> Result<Vec<f64>> {
        if self.family.is_none() {
            return Err(Error::invalid(
                "family",
                "expansion check needs a full covariance family",
            ));
        }
        q_sequence
            .iter()
            .map(|q| {
                let d = self.manifold.geodesic_distance(p, q)?;
                if d == 0.0 {
                    return Err(Error::invalid("q_sequence", "point coincides with p"));
                }
                Ok(self.one_minus_covariance(p, q)? / (self.c * d.powf(self.alpha)))
            })
            .collect()
    }

    /// Distance fed to the stable family: Euclidean distance between flat
    /// ambient representatives.
    fn chart_distance(&self, p: &ChartPoint, q: &ChartPoint) -> Result<f64> {
        let (a, b) = match &self.manifold {
            ManifoldSpec::FlatTorus { periods } => {
                let reduce = |x: &ChartPoint| -> Vec<f64> {
                    x.coords
                        .iter()
                        .zip(periods)
                        .map(|(v, period)| v.rem_euclid(*period))
                        .collect()
                };
                (reduce(p), reduce(q))
            }
            m => (m.embed(p)?, m.embed(q)?),
        };
        if a.len() != b.len() {
            return Err(Error::invalid("coords", "dimension mismatch"));
        }
        Ok(a.iter()
            .zip(&b)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt())
    }

    fn exponent(&self, p: &ChartPoint, q: &ChartPoint) -> Result<f64> {
        let d = match &self.family {
            Some(LocalFamily::PoweredExponential) => self.manifold.geodesic_distance(p, q)?,
            Some(LocalFamily::StableOnChart) => {
                // validate both points against the manifold first
                self.manifold.geodesic_distance(p, q)?;
                self.chart_distance(p, q)?
            }
            _ => unreachable!("exponent is only used by the exponential families"),
        };
        Ok(-self.c * d.powf(self.alpha))
    }
}

impl fmt::Display for LocallyIsotropicModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let family = match &self.family {
            None => "local".to_string(),
            Some(LocalFamily::PoweredExponential) => "powered_exponential".to_string(),
            Some(LocalFamily::StableOnChart) => "stable_on_chart".to_string(),
            Some(LocalFamily::Smooth(m)) => format!("smooth[{m}]"),
        };
        write!(
            f,
            "{family}(c={}, alpha={}) on {}",
            self.c, self.alpha, self.manifold
        )
    }
}

impl Covariance for LocallyIsotropicModel {
    fn manifold(&self) -> &ManifoldSpec {
        &self.manifold
    }

    fn covariance(&self, p: &ChartPoint, q: &ChartPoint) -> Result<f64> {
        match &self.family {
            None => Err(Error::invalid(
                "family",
                "model has no full covariance family attached",
            )),
            Some(LocalFamily::Smooth(m)) => m.covariance(p, q),
            Some(_) => Ok(self.exponent(p, q)?.exp()),
        }
    }

    fn one_minus_covariance(&self, p: &ChartPoint, q: &ChartPoint) -> Result<f64> {
        match &self.family {
            None => self.covariance(p, q).map(|c| 1.0 - c),
            Some(LocalFamily::Smooth(m)) => m.one_minus_covariance(p, q),
            Some(_) => Ok(-self.exponent(p, q)?.exp_m1()),
        }
    }

    fn describe(&self) -> String {
        self.to_string()
    }
}
