//! Computational toolkit for multi-fiber bundles over semi-Riemannian
//! manifolds: charts and exact differentiation, curvature, fiber splittings
//! and observation atlases, and the Kaluza–Klein physics layer built on top.

// NaN-rejecting comparisons and index-heavy tensor loops are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod chart;
pub mod expr;
pub mod field;
pub mod harness;
pub mod kaluza;
pub mod linalg;
pub mod multifiber;
pub mod real;
pub mod report;
pub mod tensor;

pub use chart::{
    Chart, ChartError, ChartId, ChartManifold, Domain, ManifoldPoint, MetricField, Signature, Slot, TensorFieldSpec,
};
pub use expr::{Expr, ExprError};
pub use field::{ExprField, Field};
pub use kaluza::KaluzaError;
pub use multifiber::{BundleError, FiberKind, MultiFiberBundle, Trivialization};
pub use real::{Dual, Real};
pub use report::{ReportEntry, Residual, ResidualReport, Verdict};
pub use tensor::{curvature, CurvatureBundle, Geometry, GeometryError};
