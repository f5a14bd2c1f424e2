//! The unit, oriented `S¹`-fiber tangent `Y` and its field strength.

use nalgebra::DMatrix;
use serde::Serialize;

use super::KaluzaError;
use crate::chart::MetricField;
use crate::field::{jacobian, Field};
use crate::linalg::{inverse_g, max_abs, quad_form_g};
use crate::multifiber::{FiberKind, MultiFiberBundle};
use crate::real::Real;
use crate::tensor::{covariant_accel, exterior_d_1form, exterior_d_2form, lie_metric, ExteriorD, Lowered};

/// `Y = k / sqrt|g(k, k)|` with `k` the oriented kernel of `[dπ; df]`.
/// Differentiable to any order; `NaN` outside every trivialization.
pub struct PotentialField<'a> {
    pub bundle: &'a MultiFiberBundle,
    pub metric: &'a MetricField,
}

impl Field for PotentialField<'_> {
    fn dim_in(&self) -> usize {
        self.bundle.dim()
    }
    fn dim_out(&self) -> usize {
        self.bundle.dim()
    }
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        let n = self.bundle.dim();
        let re: Vec<f64> = x.iter().map(|v| v.re()).collect();
        let Ok(patch) = self.bundle.patch_at(&re) else {
            return vec![S::cst(f64::NAN); n];
        };
        let k = self.bundle.s_tangent_g(patch, x);
        let g = self.metric.eval(x);
        let norm = quad_form_g(&g, &k, &k, n).abs().sqrt();
        k.into_iter().map(|v| v / norm).collect()
    }
}

impl<'a> PotentialField<'a> {
    pub fn new(bundle: &'a MultiFiberBundle, metric: &'a MetricField) -> Self {
        PotentialField { bundle, metric }
    }

    pub fn flat(&self) -> Lowered<'_, Self> {
        Lowered {
            metric: self.metric,
            vector: self,
        }
    }

    /// `F = d(Y♭)` at `x`.
    pub fn field_strength(&self, x: &[f64]) -> DMatrix<f64> {
        exterior_d_1form(&self.flat(), x)
    }

    /// `^eF(v) = g⁻¹ F v`.
    pub fn f_endo(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let n = x.len();
        let f = self.field_strength(x);
        let ginv = inverse_g(&self.metric.eval(x), n).unwrap_or_else(|| vec![f64::NAN; n * n]);
        let fv: Vec<f64> = (0..n).map(|a| (0..n).map(|b| f[(a, b)] * v[b]).sum()).collect();
        (0..n).map(|a| (0..n).map(|b| ginv[a * n + b] * fv[b]).sum()).collect()
    }

    /// Largest component of `dF` at `x`.
    pub fn df_residual(&self, x: &[f64]) -> f64 {
        let flat = self.flat();
        let f = ExteriorD { form: &flat };
        exterior_d_2form(&f, x).iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Fiber length `ℓ_x`: composite trapezoid rule on `nodes` points of
    /// the `S`-fiber through `x`, parametrized by `h`.
    pub fn fiber_length(&self, x: &[f64], nodes: usize) -> Result<f64, KaluzaError> {
        let period =
            self.bundle.s_factor.periods[0].ok_or_else(|| KaluzaError::Invalid("S factor is not periodic".into()))?;
        let fiber = self.bundle.fiber(x, FiberKind::S)?;
        let pts = fiber.sample(nodes)?;
        let n = x.len();
        let mut acc = 0.0;
        for y in &pts {
            let patch = self.bundle.patch_at(y)?;
            let k = self.bundle.s_tangent_g(patch, y);
            let dh = jacobian(&patch.h, y);
            let rate: f64 = (0..n).map(|i| dh[(0, i)] * k[i]).sum();
            let g = self.metric.eval(y);
            acc += quad_form_g(&g, &k, &k, n).abs().sqrt() / rate.abs();
        }
        Ok(acc * period / nodes as f64)
    }
}

/// `F` restricted to the leading `base_dim` coordinates, with the
/// remaining coordinates frozen at `fiber_coords`.
pub struct BaseFieldStrength<'a> {
    pub potential: &'a PotentialField<'a>,
    pub base_dim: usize,
    pub fiber_coords: Vec<f64>,
}

impl Field for BaseFieldStrength<'_> {
    fn dim_in(&self) -> usize {
        self.base_dim
    }
    fn dim_out(&self) -> usize {
        self.base_dim * self.base_dim
    }
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        let n = self.potential.bundle.dim();
        let b = self.base_dim;
        let mut full = x.to_vec();
        full.extend(self.fiber_coords.iter().map(|&c| S::cst(c)));
        let flat = self.potential.flat();
        let f = ExteriorD { form: &flat }.eval(&full);
        (0..b * b).map(|k| f[(k / b) * n + k % b]).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PotentialDiagnostics {
    /// `max |g(Y,Y) + 1|`.
    pub norm_residual: f64,
    /// `max(|dπ(Y)|, |df(Y)|)`.
    pub tangency_residual: f64,
    /// `max |L_Y g|`.
    pub killing_residual: f64,
    /// `max |∇_Y Y|`.
    pub geodesic_residual: f64,
    /// `max |dF|`.
    pub df_residual: f64,
    /// `max |F + Fᵀ|`.
    pub antisymmetry_residual: f64,
    pub fiber_lengths: Vec<f64>,
}

/// Potential together with diagnostics over a sample cloud.
pub struct Potential<'a> {
    pub field: PotentialField<'a>,
    pub diagnostics: PotentialDiagnostics,
}

impl Potential<'_> {
    pub fn is_killing(&self, tol: f64) -> bool {
        self.diagnostics.killing_residual <= tol
    }
}

/// Build `Y` (oriented by the bundle's declared orientation of `S`) and
/// evaluate its diagnostics at `samples`.
pub fn build_potential<'a>(
    bundle: &'a MultiFiberBundle,
    metric: &'a MetricField,
    samples: &[Vec<f64>],
) -> Result<Potential<'a>, KaluzaError> {
    if bundle.s_dim() != 1 {
        return Err(KaluzaError::Invalid(
            "the potential needs a one-dimensional S fiber".into(),
        ));
    }
    let field = PotentialField::new(bundle, metric);
    let mut d = PotentialDiagnostics {
        norm_residual: 0.0,
        tangency_residual: 0.0,
        killing_residual: 0.0,
        geodesic_residual: 0.0,
        df_residual: 0.0,
        antisymmetry_residual: 0.0,
        fiber_lengths: Vec::with_capacity(samples.len()),
    };
    let n = bundle.dim();
    for x in samples {
        let patch = bundle.patch_at(x)?;
        let k = bundle.s_tangent_g(patch, x);
        let g = metric.eval(x);
        let kk = quad_form_g(&g, &k, &k, n);
        if kk.abs() < 1e-10 || k.iter().all(|v| v.abs() < 1e-12) {
            return Err(KaluzaError::FiberTangentDegenerate(x.clone()));
        }
        let y = field.eval(x);
        d.norm_residual = d.norm_residual.max((quad_form_g(&g, &y, &y, n) + 1.0).abs());
        let jp = jacobian(&patch.pi, x);
        let jf = jacobian(&patch.f, x);
        for r in jp.row_iter().chain(jf.row_iter()) {
            let v: f64 = r.iter().zip(&y).map(|(a, b)| a * b).sum();
            d.tangency_residual = d.tangency_residual.max(v.abs());
        }
        d.killing_residual = d.killing_residual.max(max_abs(&lie_metric(metric, &field, x)));
        let acc = covariant_accel(metric, &field, x)?;
        d.geodesic_residual = d.geodesic_residual.max(acc.iter().fold(0.0, |a, v| a.max(v.abs())));
        d.df_residual = d.df_residual.max(field.df_residual(x));
        let f = field.field_strength(x);
        d.antisymmetry_residual = d.antisymmetry_residual.max(max_abs(&(&f + f.transpose())));
        if bundle.s_factor.periods[0].is_some() {
            d.fiber_lengths.push(field.fiber_length(x, 128)?);
        }
    }
    Ok(Potential { field, diagnostics: d })
}
