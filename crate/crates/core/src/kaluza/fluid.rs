//! Fluid form of the Einstein tensor:
//! `G = μ X⊗X + α Y⊗Y + P` with `X = X₀ + (e/μ) Y`, where `X₀` spans the
//! timelike eigendirection of `^eG_H` (eigenvalue `−μ`).

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::KaluzaError;
use crate::linalg::null_space;
use crate::multifiber::HorizontalProjector;

/// `is_dust` iff `‖P‖ < DUST_TOL`.
pub const DUST_TOL: f64 = 1e-8;
/// `is_perfect` iff `‖P_h(Y)‖ < PERFECT_TOL`.
pub const PERFECT_TOL: f64 = 1e-8;
/// `NotFluidForm` if `‖P(X₀, ·)‖ > BLOCK_TOL`.
pub const BLOCK_TOL: f64 = 1e-6;
/// Timelike eigenvalues closer than this are not distinguished.
pub const EIGEN_SPLIT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, Serialize)]
pub struct FluidDecomposition {
    pub mu: f64,
    pub e: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub x0: Vec<f64>,
    pub x: Vec<f64>,
    /// Row-major covariant components.
    pub p: Vec<f64>,
    pub p_v: Vec<f64>,
    pub p_h: Vec<f64>,
    pub is_dust: bool,
    pub is_perfect: bool,
    /// `‖P(X₀, ·)‖_max`.
    pub block_residual: f64,
}

fn lower(g: &DMatrix<f64>, v: &[f64]) -> DVector<f64> {
    g * DVector::from_column_slice(v)
}

fn bilinear(m: &DMatrix<f64>, u: &[f64], v: &[f64]) -> f64 {
    (DVector::from_column_slice(u).transpose() * m * DVector::from_column_slice(v))[(0, 0)]
}

/// Complex eigenvalues through a Schur form with an iteration cap; a stalled
/// QR sweep is retried once on `m + scale·I`.
fn eigenvalues_capped(m: &DMatrix<f64>, scale: f64) -> Result<Vec<nalgebra::Complex<f64>>, KaluzaError> {
    const MAX_SCHUR_ITER: usize = 10_000;
    let n = m.nrows();
    for shift in [0.0, scale] {
        let shifted = m + DMatrix::identity(n, n) * shift;
        if let Some(schur) = shifted.try_schur(f64::EPSILON, MAX_SCHUR_ITER) {
            return Ok(schur.complex_eigenvalues().iter().map(|c| c - shift).collect());
        }
    }
    Err(KaluzaError::Invalid("Schur iteration did not converge".into()))
}

/// `μ X₀♭⊗X₀♭ + e (X₀♭⊗Y♭ + Y♭⊗X₀♭) + γ Y♭⊗Y♭ + P`.
pub fn reconstruct(
    g: &DMatrix<f64>,
    y: &[f64],
    mu: f64,
    e: f64,
    gamma: f64,
    x0: &[f64],
    p: &DMatrix<f64>,
) -> DMatrix<f64> {
    let a = lower(g, x0);
    let b = lower(g, y);
    &a * a.transpose() * mu + (&a * b.transpose() + &b * a.transpose()) * e + &b * b.transpose() * gamma + p
}

/// Decompose the covariant tensor `gt` at a point with metric `g`, unit
/// potential `y`, horizontal projector `proj` and future reference vector
/// `time_ref`.
pub fn decompose(
    gt: &DMatrix<f64>,
    g: &DMatrix<f64>,
    y: &[f64],
    proj: &HorizontalProjector,
    time_ref: &[f64],
) -> Result<FluidDecomposition, KaluzaError> {
    let n = g.nrows();
    let e_basis = &proj.horizontal_basis;
    let gh = e_basis.transpose() * g * e_basis;
    let gth = e_basis.transpose() * gt * e_basis;

    // g_H = Lᵀ⁻¹ η L⁻¹ with η = diag(±1)
    let eig = gh.clone().symmetric_eigen();
    let hdim = gh.nrows();
    let mut l = DMatrix::zeros(hdim, hdim);
    let mut eta = DVector::zeros(hdim);
    for k in 0..hdim {
        let lam = eig.eigenvalues[k];
        eta[k] = lam.signum();
        let col = eig.eigenvectors.column(k) / lam.abs().sqrt();
        l.set_column(k, &col);
    }
    // ^eG_H in the orthonormal basis: η Lᵀ G_H L
    let gs = l.transpose() * &gth * &l;
    let m = DMatrix::from_diagonal(&eta) * &gs;
    let scale = m.abs().max().max(1e-300);

    // real eigenvalues, clustered within the split tolerance
    let mut reals: Vec<f64> = eigenvalues_capped(&m, scale)?
        .iter()
        .filter(|c| c.im.abs() <= 1e-9 * scale)
        .map(|c| c.re)
        .collect();
    reals.sort_by(f64::total_cmp);
    let mut clusters: Vec<Vec<f64>> = Vec::new();
    for lam in reals {
        match clusters.last_mut() {
            Some(c) if lam - c[c.len() - 1] <= EIGEN_SPLIT_TOL * scale.max(1.0) => c.push(lam),
            _ => clusters.push(vec![lam]),
        }
    }
    let eta_m = DMatrix::from_diagonal(&eta);
    let mut timelike: Vec<(f64, DVector<f64>)> = Vec::new();
    for c in &clusters {
        let lam = c.iter().sum::<f64>() / c.len() as f64;
        let ns = null_space(&(&m - DMatrix::identity(hdim, hdim) * lam), 1e-8);
        if ns.ncols() == 0 {
            continue;
        }
        let q = ns.transpose() * &eta_m * &ns;
        let has_timelike = q.symmetric_eigen().eigenvalues.iter().any(|&v| v < 0.0);
        if !has_timelike {
            continue;
        }
        if ns.ncols() > 1 || c.len() > 1 {
            return Err(KaluzaError::NonUniqueEigenspace(c.clone()));
        }
        timelike.push((lam, ns.column(0).into()));
    }
    if timelike.is_empty() {
        return Err(KaluzaError::NotFluidForm("no timelike eigendirection of ^eG_H".into()));
    }
    if timelike.len() > 1 {
        let ls: Vec<f64> = timelike.iter().map(|(q, _)| *q).collect();
        return Err(KaluzaError::NotFluidForm(format!(
            "several timelike eigendirections {ls:?}"
        )));
    }
    let (lambda, d) = timelike.remove(0);
    if lambda >= 0.0 {
        return Err(KaluzaError::NotFluidForm(format!(
            "timelike eigenvalue {lambda} is not negative"
        )));
    }

    let mut x0: Vec<f64> = (e_basis * (&l * d)).iter().copied().collect();
    let norm = bilinear(g, &x0, &x0);
    let s = 1.0 / (-norm).sqrt();
    x0.iter_mut().for_each(|v| *v *= s);
    if bilinear(g, &x0, time_ref) > 0.0 {
        x0.iter_mut().for_each(|v| *v = -*v);
    }

    let mu = bilinear(gt, &x0, &x0);
    let e = bilinear(gt, y, &x0);
    let gamma = bilinear(gt, y, y);
    let alpha = gamma - e * e / mu;
    let x: Vec<f64> = x0.iter().zip(y).map(|(a, b)| a + e / mu * b).collect();
    let xl = lower(g, &x);
    let yl = lower(g, y);
    let p = gt - &xl * xl.transpose() * mu - &yl * yl.transpose() * alpha;
    let pr = &proj.projector_matrix;
    let p_v = pr.transpose() * &p * pr;
    let p_h = &p - &p_v;

    let x0v = DVector::from_column_slice(&x0);
    let block_residual = (&p * &x0v).abs().max();
    if block_residual > BLOCK_TOL * scale.max(1.0) {
        return Err(KaluzaError::NotFluidForm(format!(
            "P(X0, .) has size {block_residual:e}"
        )));
    }
    let p_h_y = (&p_h * DVector::from_column_slice(y)).abs().max();
    let flat = |m: &DMatrix<f64>| -> Vec<f64> { (0..n * n).map(|k| m[(k / n, k % n)]).collect() };
    Ok(FluidDecomposition {
        mu,
        e,
        gamma,
        alpha,
        is_dust: p.abs().max() < DUST_TOL,
        is_perfect: p_h_y < PERFECT_TOL,
        x0,
        x,
        p: flat(&p),
        p_v: flat(&p_v),
        p_h: flat(&p_h),
        block_residual,
    })
}
