//! Lipschitz-Killing curvatures (intrinsic volumes) of catalogue domains.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::ManifoldSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    /// Axis-aligned box `origin + Π [0, T_i]` in Euclidean space or inside a
    /// flat torus.
    Rectangle {
        sides: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        origin: Option<Vec<f64>>,
    },
    /// Euclidean ball.
    Ball {
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
    },
    /// The whole sphere the domain lives on.
    FullSphere,
    /// The whole flat torus the domain lives on.
    FullTorus,
    /// Equator `θ_1 = … = θ_{N−1} = π/2` of a sphere, a 1-dimensional
    /// submanifold carrying the induced metric.
    GreatCircle,
}

/// A compact domain of a catalogue manifold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    manifold: ManifoldSpec,
    shape: Shape,
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, "must be positive"))
    }
}

impl DomainSpec {
    pub fn new(manifold: ManifoldSpec, shape: Shape) -> Result<Self> {
        manifold.validate()?;
        let n = manifold.dim();
        match (&shape, &manifold) {
            (Shape::Rectangle { sides, origin }, ManifoldSpec::Euclidean { .. } | ManifoldSpec::FlatTorus { .. }) => {
                if sides.len() != n {
                    return Err(Error::invalid(
                        "sides",
                        format!("expected {n} side lengths, got {}", sides.len()),
                    ));
                }
                for s in sides {
                    positive("sides", *s)?;
                }
                if let ManifoldSpec::FlatTorus { periods } = &manifold {
                    if sides.iter().zip(periods).any(|(s, p)| s > p) {
                        return Err(Error::invalid("sides", "rectangle wider than the torus"));
                    }
                }
                if let Some(o) = origin {
                    if o.len() != n || o.iter().any(|v| !v.is_finite()) {
                        return Err(Error::invalid("origin", format!("expected {n} finite coordinates")));
                    }
                }
            }
            (Shape::Ball { radius, center }, ManifoldSpec::Euclidean { .. }) => {
                positive("radius", *radius)?;
                if let Some(c) = center {
                    if c.len() != n || c.iter().any(|v| !v.is_finite()) {
                        return Err(Error::invalid("center", format!("expected {n} finite coordinates")));
                    }
                }
            }
            (Shape::FullSphere, ManifoldSpec::Sphere { .. }) => {}
            (Shape::FullTorus, ManifoldSpec::FlatTorus { .. }) => {}
            (Shape::GreatCircle, ManifoldSpec::Sphere { dim, .. }) if *dim >= 2 => {}
            _ => {
                return Err(Error::Unsupported(format!(
                    "shape {shape:?} on manifold {manifold}"
                )))
            }
        }
        Ok(DomainSpec { manifold, shape })
    }

    pub fn rectangle(manifold: ManifoldSpec, sides: Vec<f64>) -> Result<Self> {
        Self::new(manifold, Shape::Rectangle { sides, origin: None })
    }

    pub fn full_torus(periods: Vec<f64>) -> Result<Self> {
        Self::new(ManifoldSpec::flat_torus(periods)?, Shape::FullTorus)
    }

    pub fn full_sphere(dim: usize, radius: f64) -> Result<Self> {
        Self::new(ManifoldSpec::sphere(dim, radius)?, Shape::FullSphere)
    }

    pub fn manifold(&self) -> &ManifoldSpec {
        &self.manifold
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// Intrinsic dimension `k`.
    pub fn dim(&self) -> usize {
        match self.shape {
            Shape::GreatCircle => 1,
            _ => self.manifold.dim(),
        }
    }

    pub fn has_boundary(&self) -> bool {
        matches!(self.shape, Shape::Rectangle { .. } | Shape::Ball { .. })
    }

    /// Volume under the (induced) Riemannian metric, i.e. `L_k`.
    pub fn volume(&self) -> f64 {
        *lk_curvatures(self).values().last().expect("non-empty")
    }

    /// Splits a rectangle or a full torus into `parts^N` congruent boxes.
    pub fn subdivide(&self, parts: usize) -> Result<Vec<DomainSpec>> {
        if parts == 0 {
            return Err(Error::invalid("parts", "must be at least 1"));
        }
        let (sides, origin) = match (&self.shape, &self.manifold) {
            (Shape::Rectangle { sides, origin }, _) => (
                sides.clone(),
                origin.clone().unwrap_or_else(|| vec![0.0; sides.len()]),
            ),
            (Shape::FullTorus, ManifoldSpec::FlatTorus { periods }) => {
                (periods.clone(), vec![0.0; periods.len()])
            }
            _ => return Err(Error::Unsupported("only boxes can be subdivided".into())),
        };
        let n = sides.len();
        let piece: Vec<f64> = sides.iter().map(|s| s / parts as f64).collect();
        let mut out = Vec::with_capacity(parts.pow(n as u32));
        for flat in 0..parts.pow(n as u32) {
            let mut rest = flat;
            let corner: Vec<f64> = (0..n)
                .map(|i| {
                    let idx = rest % parts;
                    rest /= parts;
                    origin[i] + idx as f64 * piece[i]
                })
                .collect();
            out.push(DomainSpec::new(
                self.manifold.clone(),
                Shape::Rectangle {
                    sides: piece.clone(),
                    origin: Some(corner),
                },
            )?);
        }
        Ok(out)
    }
}

impl fmt::Display for DomainSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.shape {
            Shape::Rectangle { sides, .. } => write!(f, "rectangle{sides:?}")?,
            Shape::Ball { radius, .. } => write!(f, "ball(a={radius})")?,
            Shape::FullSphere => write!(f, "full_sphere")?,
            Shape::FullTorus => write!(f, "full_torus")?,
            Shape::GreatCircle => write!(f, "great_circle")?,
        }
        write!(f, " in {}", self.manifold)
    }
}

/// Curvature vector `(L_0, …, L_k)`; `L_j` has units of length^j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LkVector(Vec<f64>);

impl LkVector {
    pub fn new(values: Vec<f64>) -> Self {
        LkVector(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len() - 1
    }

    pub fn euler_characteristic(&self) -> f64 {
        self.0[0]
    }
}

/// Volume of the unit ball in `R^m`, via `ω_m = (2π/m) ω_{m−2}`.
pub fn unit_ball_volume(m: usize) -> f64 {
    match m {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / m as f64 * unit_ball_volume(m - 2),
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Elementary symmetric polynomials `e_0..e_n` of `x`.
pub fn elementary_symmetric(x: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; x.len() + 1];
    e[0] = 1.0;
    for (i, xi) in x.iter().enumerate() {
        for j in (1..=i + 1).rev() {
            e[j] += xi * e[j - 1];
        }
    }
    e
}

/// Curvatures of a box with the given side lengths. Zero-length sides
/// collapse the box to its intrinsic dimension.
pub fn rectangle_lk(sides: &[f64]) -> LkVector {
    let live: Vec<f64> = sides.iter().copied().filter(|s| *s > 0.0).collect();
    LkVector(elementary_symmetric(&live))
}

/// `(L_0, …, L_k)` of a catalogue domain.
pub fn lk_curvatures(d: &DomainSpec) -> LkVector {
    match (&d.shape, &d.manifold) {
        (Shape::Rectangle { sides, .. }, _) => rectangle_lk(sides),
        (Shape::Ball { radius, .. }, m) => {
            let n = m.dim();
            LkVector(
                (0..=n)
                    .map(|j| {
                        binomial(n, j) * unit_ball_volume(n) / unit_ball_volume(n - j)
                            * radius.powi(j as i32)
                    })
                    .collect(),
            )
        }
        (Shape::FullSphere, ManifoldSpec::Sphere { dim, radius }) => {
            // L_j(S^N_r) = 2 C(N+1, j) ω_{N+1}/ω_{N+1−j} r^j when N − j is even, else 0
            let n = *dim;
            LkVector(
                (0..=n)
                    .map(|j| {
                        if (n - j) % 2 == 0 {
                            2.0 * binomial(n + 1, j) * unit_ball_volume(n + 1)
                                / unit_ball_volume(n + 1 - j)
                                * radius.powi(j as i32)
                        } else {
                            0.0
                        }
                    })
                    .collect(),
            )
        }
        (Shape::FullTorus, ManifoldSpec::FlatTorus { periods }) => {
            let mut v = vec![0.0; periods.len() + 1];
            v[periods.len()] = periods.iter().product();
            LkVector(v)
        }
        (Shape::GreatCircle, ManifoldSpec::Sphere { radius, .. }) => {
            LkVector(vec![0.0, 2.0 * PI * radius])
        }
        _ => unreachable!("DomainSpec::new rejects other combinations"),
    }
}

/// Curvatures under the metric `κ g`: `L_j ↦ κ^{j/2} L_j`.
pub fn rescale_lk(lk: &LkVector, kappa: f64) -> Result<LkVector> {
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(Error::DegenerateField(format!(
            "metric scale must be positive, got {kappa}"
        )));
    }
    let root = kappa.sqrt();
    Ok(LkVector(
        lk.0.iter()
            .enumerate()
            .map(|(j, l)| l * root.powi(j as i32))
            .collect(),
    ))
}

/// Steiner polynomial `Σ_j ω_{k−j} r^{k−j} L_j(D)`: the volume of the
/// `r`-neighbourhood of a convex Euclidean domain.
pub fn tube_volume(d: &DomainSpec, r: f64) -> Result<f64> {
    if !matches!(d.manifold, ManifoldSpec::Euclidean { .. }) {
        return Err(Error::Unsupported(
            "tube volumes are only available in Euclidean space".into(),
        ));
    }
    if !matches!(d.shape, Shape::Rectangle { .. } | Shape::Ball { .. }) {
        return Err(Error::Unsupported("tube volume needs a convex shape".into()));
    }
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::invalid("r", "must be non-negative"));
    }
    let lk = lk_curvatures(d);
    let k = lk.dim();
    Ok(lk
        .values()
        .iter()
        .enumerate()
        .map(|(j, l)| unit_ball_volume(k - j) * r.powi((k - j) as i32) * l)
        .sum())
}
