//! Electromagnetism and fluids on a multi-fiber spacetime: the potential
//! `Y` and field `F = dY♭`, fiber averaging, the fluid decomposition of the
//! Einstein tensor, the residual checkers for the dust and fluid equations,
//! geodesic/Lorentz integration, frame pullback and fiber spectra.

pub mod averaging;
pub mod dynamics;
pub mod fluid;
pub mod frame;
pub mod potential;
pub mod residuals;
pub mod spectrum;

use thiserror::Error;

use crate::multifiber::BundleError;
use crate::tensor::GeometryError;

pub use averaging::{average_metric, AveragedMetric};
pub use dynamics::{geodesic_integrate, lorentz_integrate, Trajectory};
pub use fluid::{decompose, reconstruct, FluidDecomposition};
pub use frame::{frame_pullback, FramePullback};
pub use potential::{build_potential, Potential, PotentialField};
pub use residuals::{recombination_residual, theorem1_residuals, theorem2_residuals, FluidFields, Recombination};
pub use spectrum::{fiber_spectrum, SpectralData, SpectrumFiber};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KaluzaError {
    #[error("S¹-fiber tangent is degenerate at {0:?}")]
    FiberTangentDegenerate(Vec<f64>),
    #[error("flow of Y does not close after one fiber length (error {0:e})")]
    FlowNotPeriodic(f64),
    #[error("not of fluid form: {0}")]
    NotFluidForm(String),
    #[error("timelike eigenspace of ^eG_H is not one-dimensional (eigenvalues {0:?})")]
    NonUniqueEigenspace(Vec<f64>),
    #[error("trajectory left every chart at parameter {t} (point {point:?})")]
    LeftAllCharts { t: f64, point: Vec<f64> },
    #[error("tangent map of f on the W-fiber is singular at {0:?}")]
    TangentMapSingular(Vec<f64>),
    #[error("fiber metric is not definite at {0:?}")]
    FiberMetricNotPositive(Vec<f64>),
    #[error("induced fiber metric deviates from a round sphere by {0:e}")]
    NotRoundSphere(f64),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
