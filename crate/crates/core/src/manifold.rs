//! Closed-form Riemannian manifolds: Euclidean space, flat tori and round
//! spheres, with their charts, metric tensors and geodesic distances.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A manifold from the closed-form catalogue.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ManifoldSpec {
    Euclidean { dim: usize },
    FlatTorus { periods: Vec<f64> },
    Sphere { dim: usize, radius: f64 },
}

/// Which coordinate chart a point is expressed in.
///
/// Euclidean space and the flat torus use a single flat chart (for the
/// torus: the fundamental domain, with coordinates taken modulo the
/// periods). The sphere uses two hyperspherical charts. `Polar` is the
/// standard one, degenerate where `x_1 = x_2 = 0`; `Rotated` uses the same
/// angles with ambient coordinates cyclically shifted by two, so it is
/// degenerate where `x_3 = x_4 = 0` (indices mod `N + 1`). Together they
/// cover spheres of dimension up to 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartId {
    Flat,
    Polar,
    Rotated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub chart: ChartId,
    pub coords: Vec<f64>,
}

impl ChartPoint {
    pub fn flat(coords: impl Into<Vec<f64>>) -> Self {
        ChartPoint {
            chart: ChartId::Flat,
            coords: coords.into(),
        }
    }

    /// Hyperspherical angles `(θ_1, …, θ_N)` in the polar chart.
    pub fn polar(angles: impl Into<Vec<f64>>) -> Self {
        ChartPoint {
            chart: ChartId::Polar,
            coords: angles.into(),
        }
    }

    pub fn rotated(angles: impl Into<Vec<f64>>) -> Self {
        ChartPoint {
            chart: ChartId::Rotated,
            coords: angles.into(),
        }
    }
}

/// Metric tensor `G(p)` in local coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTensor(pub DMatrix<f64>);

impl MetricTensor {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.0.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Symmetric positive-definite square root, by eigendecomposition.
    pub fn sqrt(&self) -> DMatrix<f64> {
        let eig = SymmetricEigen::new(self.0.clone());
        let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
        &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
    }
}

impl fmt::Display for ManifoldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ManifoldSpec::Euclidean { dim } => write!(f, "R^{dim}"),
            ManifoldSpec::FlatTorus { periods } => write!(f, "T^{}{:?}", periods.len(), periods),
            ManifoldSpec::Sphere { dim, radius } => write!(f, "S^{dim}(r={radius})"),
        }
    }
}

impl ManifoldSpec {
    pub fn euclidean(dim: usize) -> Result<Self> {
        let m = ManifoldSpec::Euclidean { dim };
        m.validate()?;
        Ok(m)
    }

    pub fn flat_torus(periods: impl Into<Vec<f64>>) -> Result<Self> {
        let m = ManifoldSpec::FlatTorus {
            periods: periods.into(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn sphere(dim: usize, radius: f64) -> Result<Self> {
        let m = ManifoldSpec::Sphere { dim, radius };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ManifoldSpec::Euclidean { dim } | ManifoldSpec::Sphere { dim, .. } if *dim == 0 => {
                Err(Error::invalid("dim", "must be at least 1"))
            }
            ManifoldSpec::FlatTorus { periods } if periods.is_empty() => {
                Err(Error::invalid("periods", "torus needs at least one period"))
            }
            ManifoldSpec::FlatTorus { periods }
                if periods.iter().any(|p| !(p.is_finite() && *p > 0.0)) =>
            {
                Err(Error::invalid("periods", "period lengths must be positive"))
            }
            ManifoldSpec::Sphere { radius, .. } if !(radius.is_finite() && *radius > 0.0) => {
                Err(Error::invalid("radius", "must be positive"))
            }
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ManifoldSpec::Euclidean { dim } | ManifoldSpec::Sphere { dim, .. } => *dim,
            ManifoldSpec::FlatTorus { periods } => periods.len(),
        }
    }

    pub fn is_flat(&self) -> bool {
        !matches!(self, ManifoldSpec::Sphere { .. })
    }

    /// Dimension of the ambient space used by [`ManifoldSpec::embed`].
    pub fn ambient_dim(&self) -> usize {
        match self {
            ManifoldSpec::Sphere { dim, .. } => dim + 1,
            _ => self.dim(),
        }
    }

    fn check_point(&self, p: &ChartPoint) -> Result<()> {
        if p.coords.len() != self.dim() {
            return Err(Error::invalid(
                "coords",
                format!("expected {} coordinates, got {}", self.dim(), p.coords.len()),
            ));
        }
        if p.coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("coords", "coordinates must be finite"));
        }
        let chart_ok = match self {
            ManifoldSpec::Sphere { .. } => p.chart != ChartId::Flat,
            _ => p.chart == ChartId::Flat,
        };
        if !chart_ok {
            return Err(Error::invalid(
                "chart",
                format!("chart {:?} does not belong to {self}", p.chart),
            ));
        }
        Ok(())
    }

    /// Checks that `p` lies in the open coordinate domain of its chart.
    pub fn check_regular(&self, p: &ChartPoint) -> Result<()> {
        self.check_point(p)?;
        if let ManifoldSpec::Sphere { dim, .. } = self {
            // θ_1..θ_{N-1} must avoid {0, π}; the last angle is periodic.
            for &theta in &p.coords[..dim - 1] {
                if theta <= 0.0 || theta >= PI {
                    return Err(Error::DegenerateChart {
                        coords: p.coords.clone(),
                        reason: "polar angles must lie in (0, π)".into(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Metric tensor `G(p)` in the coordinates of `p`'s chart.
    pub fn metric_tensor(&self, p: &ChartPoint) -> Result<MetricTensor> {
        self.check_regular(p)?;
        let n = self.dim();
        let diag = match self {
            ManifoldSpec::Euclidean { .. } | ManifoldSpec::FlatTorus { .. } => vec![1.0; n],
            ManifoldSpec::Sphere { radius, .. } => {
                let mut diag = Vec::with_capacity(n);
                let mut scale = radius * radius;
                for (i, theta) in p.coords.iter().enumerate() {
                    diag.push(scale);
                    if i + 1 < n {
                        scale *= theta.sin().powi(2);
                    }
                }
                diag
            }
        };
        Ok(MetricTensor(DMatrix::from_diagonal(&DVector::from_vec(diag))))
    }

    /// Point of the ambient space: the coordinates themselves for flat
    /// manifolds, the standard embedding with norm `r` for the sphere.
    pub fn embed(&self, p: &ChartPoint) -> Result<Vec<f64>> {
        self.check_point(p)?;
        match self {
            ManifoldSpec::Sphere { radius, .. } => {
                let mut x = unit_embedding(&p.coords);
                if p.chart == ChartId::Rotated {
                    let shift = 2 % x.len();
                    x.rotate_right(shift);
                }
                x.iter_mut().for_each(|v| *v *= radius);
                Ok(x)
            }
            _ => Ok(p.coords.clone()),
        }
    }

    /// Chart point for an ambient vector on the sphere (normalized first),
    /// in whichever chart keeps it farther from its degenerate set.
    pub fn sphere_point(&self, ambient: &[f64]) -> Result<ChartPoint> {
        let ManifoldSpec::Sphere { dim, .. } = self else {
            return Err(Error::Unsupported("sphere_point on a flat manifold".into()));
        };
        let len = dim + 1;
        if ambient.len() != len {
            return Err(Error::invalid("ambient", "wrong ambient dimension"));
        }
        let norm = ambient.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::invalid("ambient", "zero vector"));
        }
        let unit: Vec<f64> = ambient.iter().map(|v| v / norm).collect();
        if *dim == 1 {
            return Ok(ChartPoint::polar(unit_angles(&unit)));
        }
        let clearance = |a: usize, b: usize| unit[a % len].hypot(unit[b % len]);
        let point = if clearance(0, 1) >= clearance(2, 3) {
            ChartPoint::polar(unit_angles(&unit))
        } else {
            let mut shifted = unit;
            shifted.rotate_left(2 % len);
            ChartPoint::rotated(unit_angles(&shifted))
        };
        self.check_regular(&point)?;
        Ok(point)
    }

    /// Geodesic distance `d_M(p, q)`.
    pub fn geodesic_distance(&self, p: &ChartPoint, q: &ChartPoint) -> Result<f64> {
        self.check_point(p)?;
        self.check_point(q)?;
        match self {
            ManifoldSpec::Euclidean { .. } => Ok(norm_of_diff(&p.coords, &q.coords)),
            ManifoldSpec::FlatTorus { periods } => Ok(p
                .coords
                .iter()
                .zip(&q.coords)
                .zip(periods)
                .map(|((a, b), period)| wrap(b - a, *period).powi(2))
                .sum::<f64>()
                .sqrt()),
            ManifoldSpec::Sphere { radius, .. } => {
                let a = self.embed(p)?;
                let b = self.embed(q)?;
                Ok(radius * unit_angle(&a, &b, *radius))
            }
        }
    }

    /// Coordinate displacement `φ(q) - φ(p)`, taking the shortest
    /// representative along periodic coordinates.
    pub fn chart_displacement(&self, p: &ChartPoint, q: &ChartPoint) -> Result<Vec<f64>> {
        self.check_point(p)?;
        self.check_point(q)?;
        if p.chart != q.chart {
            return Err(Error::ChartMismatch);
        }
        let n = self.dim();
        Ok((0..n)
            .map(|i| {
                let delta = q.coords[i] - p.coords[i];
                match self {
                    ManifoldSpec::Euclidean { .. } => delta,
                    ManifoldSpec::FlatTorus { periods } => wrap(delta, periods[i]),
                    ManifoldSpec::Sphere { .. } if i + 1 == n => wrap(delta, 2.0 * PI),
                    ManifoldSpec::Sphere { .. } => delta,
                }
            })
            .collect())
    }

    /// `‖G^{1/2}(p) (φ(q) − φ(p))‖`: the first-order chart approximation of
    /// `d_M(p, q)`.
    pub fn chart_quadratic_form(&self, p: &ChartPoint, q: &ChartPoint) -> Result<f64> {
        let g = self.metric_tensor(p)?;
        let dx = DVector::from_vec(self.chart_displacement(p, q)?);
        Ok((g.sqrt() * dx).norm())
    }
}

/// Shortest signed representative of `delta` modulo `period`.
pub(crate) fn wrap(delta: f64, period: f64) -> f64 {
    delta - period * (delta / period).round()
}

fn norm_of_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Angle between two vectors of norm `radius`, stable at both small and
/// near-antipodal separations.
fn unit_angle(a: &[f64], b: &[f64], radius: f64) -> f64 {
    let mut diff = 0.0;
    let mut sum = 0.0;
    for (x, y) in a.iter().zip(b) {
        diff += ((x - y) / radius).powi(2);
        sum += ((x + y) / radius).powi(2);
    }
    2.0 * diff.sqrt().atan2(sum.sqrt())
}

fn unit_embedding(angles: &[f64]) -> Vec<f64> {
    match angles {
        [theta] => vec![theta.cos(), theta.sin()],
        [first, rest @ ..] => {
            let s = first.sin();
            let mut x: Vec<f64> = unit_embedding(rest).into_iter().map(|v| v * s).collect();
            x.push(first.cos());
            x
        }
        [] => unreachable!("sphere dimension is at least 1"),
    }
}

fn unit_angles(x: &[f64]) -> Vec<f64> {
    match x.len() {
        2 => {
            let t = x[1].atan2(x[0]);
            vec![if t < 0.0 { t + 2.0 * PI } else { t }]
        }
        len => {
            let (head, last) = x.split_at(len - 1);
            let r = head.iter().map(|v| v * v).sum::<f64>().sqrt();
            let theta = r.atan2(last[0]);
            let mut angles = vec![theta];
            if r > 0.0 {
                let inner: Vec<f64> = head.iter().map(|v| v / r).collect();
                angles.extend(unit_angles(&inner));
            } else {
                angles.extend(std::iter::repeat(PI / 2.0).take(len - 3));
                angles.push(0.0);
            }
            angles
        }
    }
}
