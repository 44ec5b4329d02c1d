//! Excursion probabilities `P{sup_{p∈D} X(p) ≥ u}` of Gaussian random
//! fields on catalogue manifolds (Euclidean space, flat tori, round
//! spheres).
//!
//! * [`approx`]: the expected-Euler-characteristic approximation for smooth
//!   isotropic fields and the Pickands-type approximation for locally
//!   isotropic (possibly non-smooth) fields;
//! * [`pickands`]: Monte Carlo estimation of Pickands' constant;
//! * [`mc`]: brute-force simulation of the field itself, as an oracle;
//! * [`manifold`], [`covariance`], [`lk`], [`kernels`]: the geometry,
//!   covariance families, intrinsic volumes and special functions they
//!   rest on.

pub mod approx;
pub mod covariance;
pub mod error;
pub mod gaussian;
pub mod kernels;
pub mod lk;
pub mod manifold;
pub mod mc;
pub mod pickands;
pub mod report;

pub use approx::{
    eec_approx, euclidean_det_integral, pickands_approx, pickands_approx_submanifold, resolve_h,
    ApproxResult, ChartRegion, HProvenance, Method, PickandsConstant,
};
pub use covariance::{
    Covariance, LocalFamily, LocallyIsotropicModel, SmoothFamily, SmoothIsotropicModel,
};
pub use error::{Error, Result};
pub use kernels::{beta_j, gaussian_tail, hermite};
pub use lk::{lk_curvatures, rescale_lk, tube_volume, DomainSpec, LkVector, Shape};
pub use manifold::{ChartId, ChartPoint, ManifoldSpec, MetricTensor};
pub use mc::{
    build_grid, compare_report, empirical_excursion, sample_field, ComparisonRow, Grid, McEstimate,
};
pub use pickands::{
    estimate_pickands, simulate_z, PickandsConfig, PickandsEstimate, PickandsEstimator,
};
