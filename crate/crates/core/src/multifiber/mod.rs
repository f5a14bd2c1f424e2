//! Multi-fiber bundles `(π, Φ = (h, f))` over a chart manifold: the two
//! sub-fibers through a point, the splitting `ψ_p`, adapted charts, the
//! horizontal projector and the signature/orientation checks.
//!
//! All maps are expressed in the home chart of the total space. Each
//! registered [`Trivialization`] gives `π`, `h` and `f` on a coordinate
//! region; together they form a local diffeomorphism
//! `y ↦ (π(y), h(y), f(y))`, which is inverted by Newton iteration.

pub mod atlas;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::chart::{wrapped_delta, wrapped_distance, Chart, ChartManifold, Domain, MetricField, Signature};
use crate::field::{jacobian, jacobian_g, ExprField, Field};
use crate::linalg::{kernel_vector_g, null_space, signature_counts};
use crate::real::Real;

pub use atlas::{
    atlas_equivalence, atlas_to_bundle, bundle_to_atlas, check_w_atlas, AtlasBundle, AtlasError, AtlasVerdict,
    ObservationAtlas, ObservationChart, WCondition,
};

/// Null-space threshold for `ker dπ`.
pub const KERNEL_TOL: f64 = 1e-9;
const NEWTON_TOL: f64 = 1e-13;
const NEWTON_MAX_ITER: usize = 60;
/// Largest parameter jump attempted in one Newton continuation step.
const CONTINUATION_STEP: f64 = 0.25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BundleError {
    #[error("no registered trivialization contains {0:?}")]
    NoTrivialization(Vec<f64>),
    #[error("Φ is not invertible on the fiber near {point:?}: {reason}")]
    PhiNotInvertibleOnFiber { point: Vec<f64>, reason: String },
    #[error("metric restricted to the fiber tangent space is degenerate at {point:?} (eigenvalue {eigenvalue:e})")]
    DegenerateFiberMetric { point: Vec<f64>, eigenvalue: f64 },
    #[error("invalid bundle: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FiberKind {
    S,
    W,
}

/// `π`, `h`, `f` on one coordinate region of the total space.
#[derive(Clone, Debug, PartialEq)]
pub struct Trivialization {
    pub id: String,
    pub domain: Domain,
    pub pi: ExprField,
    pub h: ExprField,
    pub f: ExprField,
}

impl Trivialization {
    pub fn map(&self) -> TrivializationMap<'_> {
        TrivializationMap(self)
    }
}

/// `y ↦ (π(y), h(y), f(y))`.
pub struct TrivializationMap<'a>(&'a Trivialization);

impl Field for TrivializationMap<'_> {
    fn dim_in(&self) -> usize {
        self.0.pi.dim_in
    }
    fn dim_out(&self) -> usize {
        self.0.pi.dim_out() + self.0.h.dim_out() + self.0.f.dim_out()
    }
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        let mut v = self.0.pi.eval(x);
        v.extend(self.0.h.eval(x));
        v.extend(self.0.f.eval(x));
        v
    }
}

#[derive(Clone, Debug)]
pub struct MultiFiberBundle {
    pub total: ChartManifold,
    pub base: ChartManifold,
    /// Chart of the fiber factor `S` (periods mark angle coordinates).
    pub s_factor: Chart,
    pub w_factor: Chart,
    pub patches: Vec<Trivialization>,
    /// Declared orientation of `S` (`±1` on the sign of `dh`).
    pub s_orientation: f64,
}

impl MultiFiberBundle {
    pub fn new(
        total: ChartManifold,
        base: ChartManifold,
        s_factor: Chart,
        w_factor: Chart,
        patches: Vec<Trivialization>,
    ) -> Result<Self, BundleError> {
        let b = MultiFiberBundle {
            total,
            base,
            s_factor,
            w_factor,
            patches,
            s_orientation: 1.0,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn with_orientation(mut self, sign: f64) -> Self {
        self.s_orientation = sign.signum();
        self
    }

    fn validate(&self) -> Result<(), BundleError> {
        let n = self.total.dim();
        if self.base_dim() + self.s_dim() + self.w_dim() != n {
            return Err(BundleError::Invalid(format!(
                "dim B + dim S + dim W = {} + {} + {} differs from dim M = {n}",
                self.base_dim(),
                self.s_dim(),
                self.w_dim()
            )));
        }
        if self.patches.is_empty() {
            return Err(BundleError::Invalid("no trivializations registered".into()));
        }
        for p in &self.patches {
            let ok = p.pi.dim_in == n
                && p.h.dim_in == n
                && p.f.dim_in == n
                && p.pi.dim_out() == self.base_dim()
                && p.h.dim_out() == self.s_dim()
                && p.f.dim_out() == self.w_dim()
                && p.domain.bounds.len() == n;
            if !ok {
                return Err(BundleError::Invalid(format!(
                    "trivialization `{}` has inconsistent shapes",
                    p.id
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.total.dim()
    }
    pub fn base_dim(&self) -> usize {
        self.base.dim()
    }
    pub fn s_dim(&self) -> usize {
        self.s_factor.dim()
    }
    pub fn w_dim(&self) -> usize {
        self.w_factor.dim()
    }

    pub fn total_periods(&self) -> &[Option<f64>] {
        &self.total.home().periods
    }

    /// Periods of the output of `(π, h, f)`.
    pub fn target_periods(&self) -> Vec<Option<f64>> {
        let mut p = self.base.home().periods.clone();
        p.extend(self.s_factor.periods.iter().copied());
        p.extend(self.w_factor.periods.iter().copied());
        p
    }

    pub fn patch_at(&self, y: &[f64]) -> Result<&Trivialization, BundleError> {
        self.patches
            .iter()
            .find(|p| p.domain.contains(y))
            .ok_or_else(|| BundleError::NoTrivialization(y.to_vec()))
    }

    pub fn pi(&self, y: &[f64]) -> Result<Vec<f64>, BundleError> {
        Ok(self.patch_at(y)?.pi.eval(y))
    }
    pub fn h(&self, y: &[f64]) -> Result<Vec<f64>, BundleError> {
        Ok(self.patch_at(y)?.h.eval(y))
    }
    pub fn f(&self, y: &[f64]) -> Result<Vec<f64>, BundleError> {
        Ok(self.patch_at(y)?.f.eval(y))
    }

    /// `(π, h, f)` at `y`.
    pub fn coordinates(&self, y: &[f64]) -> Result<Vec<f64>, BundleError> {
        Ok(self.patch_at(y)?.map().eval(y))
    }

    /// Point `y` with `(π, h, f)(y) = target`, found by Newton continuation
    /// from `guess`. Periodic target components are matched modulo their
    /// period.
    pub fn solve(&self, target: &[f64], guess: &[f64]) -> Result<Vec<f64>, BundleError> {
        let patch = self.patch_at(guess)?;
        invert(&patch.map(), target, guess, &self.target_periods())
            .map_err(|(point, reason)| BundleError::PhiNotInvertibleOnFiber { point, reason })
    }

    /// `Φ⁻¹(u, v)` on the π-fiber over `base`, near `guess`.
    pub fn phi_inverse(&self, base: &[f64], u: &[f64], v: &[f64], guess: &[f64]) -> Result<Vec<f64>, BundleError> {
        let mut target = base.to_vec();
        target.extend_from_slice(u);
        target.extend_from_slice(v);
        self.solve(&target, guess)
    }

    /// Parametrization of `S_p` (by `h`-offsets) or `W_p` (by `f`-offsets).
    pub fn fiber(&self, p: &[f64], which: FiberKind) -> Result<FiberParametrization<'_>, BundleError> {
        let coords = self.coordinates(p)?;
        let (b, s, w) = (self.base_dim(), self.s_dim(), self.w_dim());
        let fp = FiberParametrization {
            bundle: self,
            base_point: p.to_vec(),
            which,
            pi_p: coords[..b].to_vec(),
            h_p: coords[b..b + s].to_vec(),
            f_p: coords[b + s..b + s + w].to_vec(),
        };
        // tangent map of Φ restricted to the π-fiber must be invertible at p
        let tangent = self.pi_fiber_tangent(p)?;
        let patch = self.patch_at(p)?;
        let (jh, jf) = (jacobian(&patch.h, p), jacobian(&patch.f, p));
        let phi = DMatrix::from_fn(
            s + w,
            self.dim(),
            |r, c| if r < s { jh[(r, c)] } else { jf[(r - s, c)] },
        );
        let det = (phi * tangent).determinant();
        if det.abs() < 1e-10 {
            return Err(BundleError::PhiNotInvertibleOnFiber {
                point: p.to_vec(),
                reason: format!("tangent map of Φ on the π-fiber has determinant {det:e}"),
            });
        }
        Ok(fp)
    }

    /// `ψ_p(y) = (Φ⁻¹(h(y), f(p)), Φ⁻¹(h(p), f(y)))` for `y` in the π-fiber of `p`.
    pub fn splitting(&self, p: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>), BundleError> {
        let cp = self.coordinates(p)?;
        let cy = self.coordinates(y)?;
        let (b, s) = (self.base_dim(), self.s_dim());
        let a = self.phi_inverse(&cp[..b], &cy[b..b + s], &cp[b + s..], y)?;
        let c = self.phi_inverse(&cp[..b], &cp[b..b + s], &cy[b + s..], y)?;
        Ok((a, c))
    }

    /// `ψ_p⁻¹(a, c) = Φ⁻¹(h(a), f(c))`.
    pub fn splitting_inverse(&self, p: &[f64], a: &[f64], c: &[f64]) -> Result<Vec<f64>, BundleError> {
        let cp = self.coordinates(p)?;
        let ca = self.coordinates(a)?;
        let cc = self.coordinates(c)?;
        let (b, s) = (self.base_dim(), self.s_dim());
        self.phi_inverse(&cp[..b], &ca[b..b + s], &cc[b + s..], a)
    }

    /// Chart centred at `p` with coordinates `(π − π(p), h − h(p), f − f(p))`.
    pub fn adapted_chart(&self, p: &[f64]) -> Result<AdaptedChart<'_>, BundleError> {
        let center = self.coordinates(p)?;
        let patch = self.patch_at(p)?;
        let mut names: Vec<String> = (0..self.base_dim()).map(|k| format!("x{k}")).collect();
        names.extend((0..self.s_dim()).map(|k| format!("u{k}")));
        names.extend((0..self.w_dim()).map(|k| format!("w{k}")));
        let mut chart = Chart::new(format!("adapted@{}", patch.id), names, Domain::whole(self.dim()))
            .map_err(|e| BundleError::Invalid(e.to_string()))?;
        chart.periods = self.target_periods();
        Ok(AdaptedChart {
            bundle: self,
            center_point: p.to_vec(),
            center,
            chart,
        })
    }

    /// Columns spanning `T_x F_x̄ = ker dπ`.
    pub fn pi_fiber_tangent(&self, x: &[f64]) -> Result<DMatrix<f64>, BundleError> {
        let patch = self.patch_at(x)?;
        let basis = null_space(&jacobian(&patch.pi, x), KERNEL_TOL);
        if basis.ncols() != self.s_dim() + self.w_dim() {
            return Err(BundleError::Invalid(format!("π is not a submersion at {x:?}")));
        }
        Ok(basis)
    }

    /// Columns spanning the tangent space of `S_x` (`ker[dπ; df]`) or
    /// `W_x` (`ker[dπ; dh]`).
    pub fn subfiber_tangent(&self, x: &[f64], which: FiberKind) -> Result<DMatrix<f64>, BundleError> {
        let patch = self.patch_at(x)?;
        let other = match which {
            FiberKind::S => &patch.f,
            FiberKind::W => &patch.h,
        };
        let jp = jacobian(&patch.pi, x);
        let jo = jacobian(other, x);
        let stacked = DMatrix::from_fn(jp.nrows() + jo.nrows(), self.dim(), |r, c| {
            if r < jp.nrows() {
                jp[(r, c)]
            } else {
                jo[(r - jp.nrows(), c)]
            }
        });
        let basis = null_space(&stacked, KERNEL_TOL);
        let want = match which {
            FiberKind::S => self.s_dim(),
            FiberKind::W => self.w_dim(),
        };
        if basis.ncols() != want {
            return Err(BundleError::PhiNotInvertibleOnFiber {
                point: x.to_vec(),
                reason: format!("sub-fiber tangent has dimension {} instead of {want}", basis.ncols()),
            });
        }
        Ok(basis)
    }

    /// Horizontal projector `pr_H = I − B (BᵀgB)⁻¹ Bᵀg` with `B` spanning `ker dπ`.
    pub fn horizontal_projector(&self, metric: &MetricField, x: &[f64]) -> Result<HorizontalProjector, BundleError> {
        let b = self.pi_fiber_tangent(x)?;
        let g = metric.matrix(x);
        let gram = b.transpose() * &g * &b;
        let eig = gram.clone().symmetric_eigen();
        let smallest = eig
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &l| if l.abs() < a.abs() { l } else { a });
        if smallest.abs() < crate::linalg::DEGENERACY_TOL {
            return Err(BundleError::DegenerateFiberMetric {
                point: x.to_vec(),
                eigenvalue: smallest,
            });
        }
        let gram_inv = gram.try_inverse().ok_or_else(|| BundleError::DegenerateFiberMetric {
            point: x.to_vec(),
            eigenvalue: smallest,
        })?;
        let n = self.dim();
        let p = DMatrix::identity(n, n) - &b * gram_inv * b.transpose() * &g;
        // H = {v : Bᵀ g v = 0}
        let horizontal_basis = null_space(&(b.transpose() * &g), KERNEL_TOL);
        let hg = horizontal_basis.transpose() * &g * &horizontal_basis;
        let horizontal_signature = signature_counts(&hg)
            .map(|(neg, pos)| Signature::new(neg, pos))
            .map_err(|eigenvalue| BundleError::DegenerateFiberMetric {
                point: x.to_vec(),
                eigenvalue,
            })?;
        Ok(HorizontalProjector {
            point: x.to_vec(),
            fiber_tangent_basis: b,
            projector_matrix: p,
            horizontal_basis,
            horizontal_signature,
            metric: g,
        })
    }

    /// Signature of `g` restricted to the span of `basis`.
    fn restricted_signature(
        &self,
        metric: &MetricField,
        x: &[f64],
        basis: &DMatrix<f64>,
    ) -> Result<Signature, BundleError> {
        let g = metric.matrix(x);
        signature_counts(&(basis.transpose() * g * basis))
            .map(|(neg, pos)| Signature::new(neg, pos))
            .map_err(|eigenvalue| BundleError::DegenerateFiberMetric {
                point: x.to_vec(),
                eigenvalue,
            })
    }

    /// Signatures of `g` on `S_x`, `W_x` and `H_x` at every sample; passes
    /// iff each is constant.
    pub fn check_compatibility(
        &self,
        metric: &MetricField,
        samples: &[Vec<f64>],
    ) -> Result<CompatibilityReport, BundleError> {
        let mut rows = Vec::with_capacity(samples.len());
        for x in samples {
            let s = self.restricted_signature(metric, x, &self.subfiber_tangent(x, FiberKind::S)?)?;
            let w = self.restricted_signature(metric, x, &self.subfiber_tangent(x, FiberKind::W)?)?;
            let h = self.horizontal_projector(metric, x)?.horizontal_signature;
            rows.push(SignatureTriple { s, w, h });
        }
        let mut mismatch = None;
        if let Some(first) = rows.first() {
            if let Some(k) = rows.iter().position(|r| r != first) {
                mismatch = Some((0, k));
            }
        }
        Ok(CompatibilityReport {
            passes: mismatch.is_none() && !rows.is_empty(),
            triple: rows.first().copied(),
            per_sample: rows,
            mismatch,
        })
    }

    /// Oriented tangent of `S_x` for one-dimensional `S`, differentiable in
    /// `x`: the signed-minor kernel of `[dπ; df]`, with sign such that
    /// `dh(k)` has the declared orientation.
    pub fn s_tangent_g<S: Real>(&self, patch: &Trivialization, x: &[S]) -> Vec<S> {
        let n = x.len();
        let mut rows = jacobian_g(&patch.pi, x);
        rows.extend(jacobian_g(&patch.f, x));
        let k = kernel_vector_g(&rows, n);
        let dh = jacobian_g(&patch.h, x);
        let dhk = (0..n).fold(S::zero(), |a, i| a + dh[0][i] * k[i]);
        let sign = if dhk.re() * self.s_orientation < 0.0 { -1.0 } else { 1.0 };
        k.into_iter().map(|v| v.scale(sign)).collect()
    }

    /// Orientation and time-orientation agreement between overlapping
    /// observation charts at each sample.
    pub fn check_orientation(
        &self,
        charts: &[OrientedChart],
        metric: Option<&MetricField>,
        samples: &[Vec<f64>],
    ) -> Result<OrientationReport, BundleError> {
        let mut report = OrientationReport {
            passes: true,
            orientation_failures: Vec::new(),
            time_products: Vec::new(),
            time_failures: Vec::new(),
        };
        if self.s_dim() != 1 {
            return Err(BundleError::Invalid(
                "orientation check needs a one-dimensional S".into(),
            ));
        }
        let b = self.base_dim();
        for (si, x) in samples.iter().enumerate() {
            let patch = self.patch_at(x)?;
            let k = self.s_tangent_g(patch, x);
            let inside: Vec<&OrientedChart> = charts.iter().filter(|c| c.domain.contains(x)).collect();
            let mut signs = Vec::new();
            let mut times = Vec::new();
            for c in &inside {
                let j = jacobian(&c.map, x);
                let ds: f64 = (0..self.dim()).map(|i| j[(b, i)] * k[i]).sum();
                signs.push(ds.signum() * c.s_orientation);
                if metric.is_some() {
                    let lu = j.clone().lu();
                    let mut e0 = DVector::zeros(self.dim());
                    e0[0] = 1.0;
                    let t = lu
                        .solve(&e0)
                        .ok_or_else(|| BundleError::Invalid(format!("chart `{}` is singular", c.id)))?;
                    times.push(t);
                }
            }
            for a in 0..inside.len() {
                for c in (a + 1)..inside.len() {
                    if signs[a] != signs[c] {
                        report.passes = false;
                        report
                            .orientation_failures
                            .push((si, inside[a].id.clone(), inside[c].id.clone()));
                    }
                    if let Some(m) = metric {
                        let g = m.matrix(x);
                        let v = (times[a].transpose() * &g * &times[c])[(0, 0)];
                        report
                            .time_products
                            .push((si, inside[a].id.clone(), inside[c].id.clone(), v));
                        if !(v < 0.0) {
                            report.passes = false;
                            report
                                .time_failures
                                .push((si, inside[a].id.clone(), inside[c].id.clone()));
                        }
                    }
                }
            }
        }
        Ok(report)
    }

    /// Largest distance from sampled points of `S_p`/`W_p` (as built in
    /// `self`) to the corresponding fiber through `q` in `other`, in both
    /// directions. Zero when the two fibers are the same set.
    pub fn fiber_set_distance(
        &self,
        p: &[f64],
        other: &MultiFiberBundle,
        q: &[f64],
        which: FiberKind,
        nodes: usize,
    ) -> Result<f64, BundleError> {
        let a = self.fiber(p, which)?.sample(nodes)?;
        let b = other.fiber(q, which)?.sample(nodes)?;
        let fa = other.fiber(q, which)?;
        let fb = self.fiber(p, which)?;
        let periods = self.total_periods();
        let mut worst = 0.0_f64;
        for y in &a {
            worst = worst.max(wrapped_distance(y, &fa.project(y)?, periods));
        }
        for y in &b {
            worst = worst.max(wrapped_distance(y, &fb.project(y)?, periods));
        }
        Ok(worst)
    }
}

/// Solve `map(y) = target` (periodic outputs matched modulo their period)
/// by Newton continuation from `guess`. On failure returns the last iterate
/// and a reason.
pub fn invert<F: Field>(
    map: &F,
    target: &[f64],
    guess: &[f64],
    periods: &[Option<f64>],
) -> Result<Vec<f64>, (Vec<f64>, String)> {
    let start = map.eval(guess);
    let delta = wrapped_delta(target, &start, periods);
    let span = delta.iter().fold(0.0_f64, |a, d| a.max(d.abs()));
    let steps = ((span / CONTINUATION_STEP).ceil() as usize).max(1);
    let mut y = guess.to_vec();
    for s in 1..=steps {
        let t = s as f64 / steps as f64;
        let goal: Vec<f64> = start.iter().zip(&delta).map(|(a, d)| a + t * d).collect();
        y = newton(map, &goal, &y, periods)?;
    }
    Ok(y)
}

fn newton<F: Field>(
    map: &F,
    target: &[f64],
    guess: &[f64],
    periods: &[Option<f64>],
) -> Result<Vec<f64>, (Vec<f64>, String)> {
    let mut y = guess.to_vec();
    let mut norm = f64::INFINITY;
    for _ in 0..NEWTON_MAX_ITER {
        let r = wrapped_delta(&map.eval(&y), target, periods);
        norm = r.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if norm < NEWTON_TOL {
            return Ok(y);
        }
        let j = jacobian(map, &y);
        let Some(step) = j.lu().solve(&DVector::from_vec(r)) else {
            return Err((y, "singular Jacobian".into()));
        };
        for (yk, sk) in y.iter_mut().zip(step.iter()) {
            *yk -= sk;
        }
    }
    if norm < 1e-11 {
        Ok(y)
    } else {
        Err((
            y,
            format!("Newton residual {norm:e} after {NEWTON_MAX_ITER} iterations"),
        ))
    }
}

/// `t ↦ Φ⁻¹(h(p) + t, f(p))` (S) or `t ↦ Φ⁻¹(h(p), f(p) + t)` (W), over `π(p)`.
pub struct FiberParametrization<'a> {
    pub bundle: &'a MultiFiberBundle,
    pub base_point: Vec<f64>,
    pub which: FiberKind,
    pi_p: Vec<f64>,
    h_p: Vec<f64>,
    f_p: Vec<f64>,
}

impl FiberParametrization<'_> {
    pub fn param_dim(&self) -> usize {
        match self.which {
            FiberKind::S => self.h_p.len(),
            FiberKind::W => self.f_p.len(),
        }
    }

    pub fn param_periods(&self) -> &[Option<f64>] {
        match self.which {
            FiberKind::S => &self.bundle.s_factor.periods,
            FiberKind::W => &self.bundle.w_factor.periods,
        }
    }

    pub fn map(&self, t: &[f64]) -> Result<Vec<f64>, BundleError> {
        self.map_from(t, &self.base_point)
    }

    /// Same as [`map`](Self::map), starting Newton continuation at `guess`.
    pub fn map_from(&self, t: &[f64], guess: &[f64]) -> Result<Vec<f64>, BundleError> {
        let shift = |v: &[f64]| -> Vec<f64> { v.iter().zip(t).map(|(a, b)| a + b).collect() };
        match self.which {
            FiberKind::S => self.bundle.phi_inverse(&self.pi_p, &shift(&self.h_p), &self.f_p, guess),
            FiberKind::W => self.bundle.phi_inverse(&self.pi_p, &self.h_p, &shift(&self.f_p), guess),
        }
    }

    /// Closest point of this fiber to `y` in the sense of the fiber
    /// parameter: the point whose free coordinates match those of `y`.
    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>, BundleError> {
        let cy = self.bundle.coordinates(y)?;
        let (b, s) = (self.pi_p.len(), self.h_p.len());
        match self.which {
            FiberKind::S => self.bundle.phi_inverse(&self.pi_p, &cy[b..b + s], &self.f_p, y),
            FiberKind::W => self.bundle.phi_inverse(&self.pi_p, &self.h_p, &cy[b + s..], y),
        }
    }

    /// Points on a regular grid of offsets: a full period along periodic
    /// parameters, `[-1, 1]` along the others, `nodes` per direction.
    pub fn sample(&self, nodes: usize) -> Result<Vec<Vec<f64>>, BundleError> {
        let d = self.param_dim();
        let periods = self.param_periods().to_vec();
        let axis = |k: usize, i: usize| match periods.get(k).copied().flatten() {
            Some(p) => p * i as f64 / nodes as f64,
            None => -1.0 + 2.0 * i as f64 / (nodes.max(2) - 1) as f64,
        };
        let total = nodes.pow(d as u32);
        let mut out = Vec::with_capacity(total);
        let mut prev = self.base_point.clone();
        for idx in 0..total {
            let mut rem = idx;
            let t: Vec<f64> = (0..d)
                .map(|k| {
                    let i = rem % nodes;
                    rem /= nodes;
                    axis(k, i)
                })
                .collect();
            // continue from the previous node, restarting each grid row at p
            if idx % nodes == 0 {
                prev = self.base_point.clone();
            }
            let y = self.map_from(&t, &prev)?;
            prev = y.clone();
            out.push(y);
        }
        Ok(out)
    }
}

/// Chart centred at a point with coordinates `(π − π(p), h − h(p), f − f(p))`.
pub struct AdaptedChart<'a> {
    pub bundle: &'a MultiFiberBundle,
    pub center_point: Vec<f64>,
    pub center: Vec<f64>,
    pub chart: Chart,
}

impl AdaptedChart<'_> {
    pub fn to_adapted(&self, y: &[f64]) -> Result<Vec<f64>, BundleError> {
        let c = self.bundle.coordinates(y)?;
        Ok(wrapped_delta(&c, &self.center, &self.chart.periods))
    }

    pub fn from_adapted(&self, z: &[f64]) -> Result<Vec<f64>, BundleError> {
        let target: Vec<f64> = self.center.iter().zip(z).map(|(a, b)| a + b).collect();
        self.bundle.solve(&target, &self.center_point)
    }
}

#[derive(Clone, Debug)]
pub struct HorizontalProjector {
    pub point: Vec<f64>,
    pub fiber_tangent_basis: DMatrix<f64>,
    pub projector_matrix: DMatrix<f64>,
    pub horizontal_basis: DMatrix<f64>,
    pub horizontal_signature: Signature,
    metric: DMatrix<f64>,
}

impl HorizontalProjector {
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (&self.projector_matrix * DVector::from_column_slice(v))
            .iter()
            .copied()
            .collect()
    }

    /// `‖P² − P‖_max`.
    pub fn idempotence_residual(&self) -> f64 {
        let p = &self.projector_matrix;
        (p * p - p).abs().max()
    }

    /// `‖gP − (gP)ᵀ‖_max`.
    pub fn self_adjoint_residual(&self) -> f64 {
        let gp = &self.metric * &self.projector_matrix;
        (&gp - gp.transpose()).abs().max()
    }

    /// `‖P B‖_max` over the fiber-tangent basis.
    pub fn kernel_residual(&self) -> f64 {
        (&self.projector_matrix * &self.fiber_tangent_basis).abs().max()
    }

    pub fn rank(&self) -> usize {
        crate::linalg::rank(&self.projector_matrix, 1e-9)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SignatureTriple {
    pub s: Signature,
    pub w: Signature,
    pub h: Signature,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompatibilityReport {
    pub passes: bool,
    pub triple: Option<SignatureTriple>,
    pub per_sample: Vec<SignatureTriple>,
    /// Indices of two samples with different signature triples.
    pub mismatch: Option<(usize, usize)>,
}

/// An observation chart as a map from total coordinates, first component
/// a base time, component `dim B` the `S` angle.
#[derive(Clone, Debug)]
pub struct OrientedChart {
    pub id: String,
    pub domain: Domain,
    pub map: ExprField,
    pub s_orientation: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct OrientationReport {
    pub passes: bool,
    /// `(sample, chart, chart)` where the pulled-back S orientations differ.
    pub orientation_failures: Vec<(usize, String, String)>,
    /// `g(φ_i^*∂_t, φ_j^*∂_t)` per sample and chart pair.
    pub time_products: Vec<(usize, String, String, f64)>,
    pub time_failures: Vec<(usize, String, String)>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use std::f64::consts::PI;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn ef(vars: &[&str], comps: &[&str]) -> ExprField {
        let n = names(vars);
        ExprField::new(n.len(), comps.iter().map(|s| Expr::parse(s, &n).unwrap()).collect())
    }

    /// Total space `(x, u, w)` with `u, w` angles; `f` twists `w` by `0.4 sin u + 0.3 x`.
    fn twisted(f: &str) -> MultiFiberBundle {
        let vars = ["x", "u", "w"];
        let total = Chart::new("m", names(&vars), Domain::whole(3))
            .unwrap()
            .with_period(1, 2.0 * PI)
            .unwrap()
            .with_period(2, 2.0 * PI)
            .unwrap();
        let base = Chart::new("b", names(&["x"]), Domain::whole(1)).unwrap();
        let s = Chart::new("s", names(&["u"]), Domain::whole(1))
            .unwrap()
            .with_period(0, 2.0 * PI)
            .unwrap();
        let w = Chart::new("w", names(&["w"]), Domain::whole(1))
            .unwrap()
            .with_period(0, 2.0 * PI)
            .unwrap();
        let patch = Trivialization {
            id: "t".into(),
            domain: Domain::whole(3),
            pi: ef(&vars, &["x"]),
            h: ef(&vars, &["u"]),
            f: ef(&vars, &[f]),
        };
        MultiFiberBundle::new(
            ChartManifold::single(total),
            ChartManifold::single(base),
            s,
            w,
            vec![patch],
        )
        .unwrap()
    }

    #[test]
    fn product_fibers_are_coordinate_circles() {
        let b = twisted("w");
        let p = [0.3, 1.0, -2.0];
        let fs = b.fiber(&p, FiberKind::S).unwrap();
        let y = fs.map(&[0.5]).unwrap();
        assert!((y[0] - 0.3).abs() < 1e-12 && (y[1] - 1.5).abs() < 1e-12 && (y[2] + 2.0).abs() < 1e-12);
        let (a, c) = b.splitting(&p, &[0.3, 2.0, 0.5]).unwrap();
        assert!(wrapped_distance(&a, &[0.3, 2.0, -2.0], b.total_periods()) < 1e-12);
        assert!(wrapped_distance(&c, &[0.3, 1.0, 0.5], b.total_periods()) < 1e-12);
    }

    #[test]
    fn twisted_fiber_keeps_f_constant() {
        let b = twisted("w + 0.4*sin(u) + 0.3*x");
        let p = [0.3, 1.0, -2.0];
        let fs = b.fiber(&p, FiberKind::S).unwrap();
        let f0 = b.f(&p).unwrap()[0];
        for y in fs.sample(24).unwrap() {
            let d = crate::chart::wrap_angle(b.f(&y).unwrap()[0] - f0, 2.0 * PI);
            assert!(d.abs() < 1e-10);
            assert!((y[0] - 0.3).abs() < 1e-12);
        }
        // not the coordinate circle
        let y = fs.map(&[PI / 2.0]).unwrap();
        assert!(crate::chart::wrap_angle(y[2] + 2.0, 2.0 * PI).abs() > 0.05);
    }

    #[test]
    fn splitting_round_trip() {
        let b = twisted("w + 0.4*sin(u) + 0.3*x");
        let p = [0.3, 1.0, -2.0];
        for (u, w) in [(0.1, 0.2), (3.0, -2.5), (-1.0, 1.0)] {
            let y = b.phi_inverse(&[0.3], &[u], &[w], &p).unwrap();
            let (a, c) = b.splitting(&p, &y).unwrap();
            let back = b.splitting_inverse(&p, &a, &c).unwrap();
            assert!(wrapped_distance(&back, &y, b.total_periods()) < 1e-10);
        }
        let (a, c) = b.splitting(&p, &p).unwrap();
        assert!(wrapped_distance(&a, &p, b.total_periods()) < 1e-12);
        assert!(wrapped_distance(&c, &p, b.total_periods()) < 1e-12);
    }

    #[test]
    fn adapted_chart_straightens_fibers() {
        let b = twisted("w + 0.4*sin(u) + 0.3*x");
        let p = [0.3, 1.0, -2.0];
        let ac = b.adapted_chart(&p).unwrap();
        assert!(ac.to_adapted(&p).unwrap().iter().all(|v| v.abs() < 1e-14));
        for y in b.fiber(&p, FiberKind::S).unwrap().sample(8).unwrap() {
            let z = ac.to_adapted(&y).unwrap();
            assert!(z[0].abs() < 1e-10 && z[2].abs() < 1e-10);
        }
        let y = ac.from_adapted(&[0.0, 0.7, 0.0]).unwrap();
        assert!((b.h(&y).unwrap()[0] - 1.7).abs() < 1e-10);
    }

    #[test]
    fn projector_on_block_metric() {
        let b = twisted("w");
        let m = MetricField::diagonal(
            "m",
            vec![Expr::c(1.0), Expr::c(-1.0), Expr::c(2.0)],
            Signature::new(1, 2),
        )
        .unwrap();
        let hp = b.horizontal_projector(&m, &[0.0, 0.0, 0.0]).unwrap();
        let p = hp.apply(&[1.0, 2.0, 3.0]);
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1].abs() < 1e-12 && p[2].abs() < 1e-12);
        assert!(hp.idempotence_residual() < 1e-12);
        assert_eq!(hp.horizontal_signature, Signature::new(0, 1));
        let rep = b
            .check_compatibility(&m, &[vec![0.0, 0.0, 0.0], vec![1.0, 2.0, 3.0]])
            .unwrap();
        assert!(rep.passes);
        assert_eq!(rep.triple.unwrap().s, Signature::new(1, 0));
    }

    #[test]
    fn degenerate_fiber_metric_is_reported() {
        let b = twisted("w");
        let m = MetricField::diagonal(
            "m",
            vec![Expr::c(1.0), Expr::var(0), Expr::c(1.0)],
            Signature::new(0, 3),
        )
        .unwrap();
        assert!(matches!(
            b.horizontal_projector(&m, &[0.0, 0.0, 0.0]),
            Err(BundleError::DegenerateFiberMetric { .. })
        ));
    }
}
