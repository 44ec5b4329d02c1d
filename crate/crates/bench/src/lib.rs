//! Benchmark fixtures shared by the criterion suites in `benches/`.

use excursion_core::gaussian::SymmetricMatrix;
use excursion_core::{DomainSpec, LocallyIsotropicModel, ManifoldSpec};

/// The unit flat 2-torus as a whole domain.
pub fn unit_torus() -> DomainSpec {
    DomainSpec::full_torus(vec![1.0, 1.0]).expect("valid periods")
}

/// `exp(−|x − y|)` in chart coordinates of the unit torus.
pub fn rough_torus_model() -> LocallyIsotropicModel {
    let torus = ManifoldSpec::flat_torus(vec![1.0, 1.0]).expect("valid periods");
    LocallyIsotropicModel::stable_on_chart(1.0, 1.0, torus).expect("valid model")
}

/// Exponential covariance of `n` equally spaced points on [0, 1]: a
/// well-conditioned dense matrix for factorization timings.
pub fn exponential_matrix(n: usize) -> SymmetricMatrix {
    let h = 1.0 / n as f64;
    SymmetricMatrix::from_fn(n, |i, j| (-((i as f64 - j as f64).abs() * h)).exp())
}
