//! Laplace spectra of the fibers: a periodic finite-difference operator on
//! `S¹`, and the closed-form round spectrum on `S³` behind a roundness gate.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::potential::PotentialField;
use super::KaluzaError;
use crate::chart::MetricField;
use crate::field::{jacobian, Field};
use crate::linalg::quad_form_g;
use crate::multifiber::{FiberKind, MultiFiberBundle};

/// Largest relative deviation of the induced `S³` metric from a round one.
pub const ROUNDNESS_TOL: f64 = 1e-8;
/// Relative tolerance for grouping equal eigenvalues.
const MULTIPLICITY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumFiber {
    S1,
    S3,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralData {
    pub fiber: SpectrumFiber,
    /// Distinct eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    pub multiplicities: Vec<usize>,
    pub discretization: usize,
    /// `ℓ_x` on `S¹`, radius on `S³`.
    pub scale: f64,
    /// `max |Δ 1|` for the `S¹` operator; zero on `S³`.
    pub constant_mode_residual: f64,
}

impl SpectralData {
    /// Eigenvalue `k` counted with multiplicity.
    pub fn nth(&self, k: usize) -> Option<f64> {
        let mut seen = 0;
        for (lam, m) in self.eigenvalues.iter().zip(&self.multiplicities) {
            seen += m;
            if k < seen {
                return Some(*lam);
            }
        }
        None
    }
}

fn group(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let scale = values.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    let mut eig: Vec<f64> = Vec::new();
    let mut mult: Vec<usize> = Vec::new();
    let mut sums: Vec<f64> = Vec::new();
    for &v in values {
        match eig.last() {
            Some(&last) if (v - last).abs() <= MULTIPLICITY_TOL * scale => {
                let i = eig.len() - 1;
                mult[i] += 1;
                sums[i] += v;
                eig[i] = v;
            }
            _ => {
                eig.push(v);
                mult.push(1);
                sums.push(v);
            }
        }
    }
    let means = sums.iter().zip(&mult).map(|(s, m)| s / *m as f64).collect();
    (means, mult)
}

/// `−d²/ds²` on `n` equally spaced nodes of a circle of length `length`.
pub fn circle_laplacian(length: f64, n: usize) -> DMatrix<f64> {
    let h = length / n as f64;
    let c = 1.0 / (h * h);
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            2.0 * c
        } else if (i + 1) % n == j || (j + 1) % n == i {
            -c
        } else {
            0.0
        }
    })
}

fn s1_spectrum(
    bundle: &MultiFiberBundle,
    metric: &MetricField,
    x: &[f64],
    resolution: usize,
) -> Result<SpectralData, KaluzaError> {
    if resolution < 3 {
        return Err(KaluzaError::Invalid("an S¹ spectrum needs at least three nodes".into()));
    }
    // the fiber metric must keep one sign and stay away from zero
    let fiber = bundle.fiber(x, FiberKind::S)?;
    let n = bundle.dim();
    let mut sign = 0.0;
    for y in fiber.sample(32)? {
        let patch = bundle.patch_at(&y)?;
        let k = bundle.s_tangent_g(patch, &y);
        let kk = quad_form_g(&metric.eval(&y), &k, &k, n);
        if kk.abs() < 1e-10 || (sign != 0.0 && kk.signum() != sign) {
            return Err(KaluzaError::FiberMetricNotPositive(y));
        }
        sign = kk.signum();
    }
    let length = PotentialField::new(bundle, metric).fiber_length(x, 128)?;
    let lap = circle_laplacian(length, resolution);
    let ones = nalgebra::DVector::from_element(resolution, 1.0);
    let constant_mode_residual = (&lap * ones).abs().max();
    let mut values: Vec<f64> = lap.symmetric_eigen().eigenvalues.iter().map(|v| v.max(0.0)).collect();
    values.sort_by(f64::total_cmp);
    values[0] = 0.0_f64.max(values[0]);
    let (eigenvalues, multiplicities) = group(&values);
    Ok(SpectralData {
        fiber: SpectrumFiber::S1,
        eigenvalues,
        multiplicities,
        discretization: resolution,
        scale: length,
        constant_mode_residual,
    })
}

/// Radius of the `W`-fiber through `x` read off its induced metric in the
/// stereographic coordinates of `f`.
pub fn s3_radius(bundle: &MultiFiberBundle, metric: &MetricField, x: &[f64]) -> Result<f64, KaluzaError> {
    if bundle.w_dim() != 3 {
        return Err(KaluzaError::Invalid(
            "an S³ spectrum needs a three-dimensional W".into(),
        ));
    }
    let fiber = bundle.fiber(x, FiberKind::W)?;
    let mut radii2 = Vec::new();
    let mut metrics = Vec::new();
    for y in fiber.sample(3)? {
        let patch = bundle.patch_at(&y)?;
        let b = bundle.subfiber_tangent(&y, FiberKind::W)?;
        let t = jacobian(&patch.f, &y) * &b;
        let tinv = t
            .clone()
            .try_inverse()
            .ok_or_else(|| KaluzaError::TangentMapSingular(y.clone()))?;
        let induced = b.transpose() * metric.matrix(&y) * &b;
        let h = tinv.transpose() * induced * &tinv;
        let h = (&h + h.transpose()) * 0.5;
        if h.clone().symmetric_eigen().eigenvalues.iter().any(|&v| v <= 0.0) {
            return Err(KaluzaError::FiberMetricNotPositive(y));
        }
        let w = patch.f.eval(&y);
        let conf = 4.0 / (1.0 + w.iter().map(|v| v * v).sum::<f64>()).powi(2);
        radii2.push(h.trace() / (3.0 * conf));
        metrics.push((h, conf));
    }
    let r2 = radii2.iter().sum::<f64>() / radii2.len() as f64;
    let mut dev = 0.0_f64;
    for (h, conf) in &metrics {
        let round = DMatrix::identity(3, 3) * (r2 * conf);
        dev = dev.max((h - &round).abs().max() / round[(0, 0)]);
    }
    if dev > ROUNDNESS_TOL {
        return Err(KaluzaError::NotRoundSphere(dev));
    }
    Ok(r2.sqrt())
}

fn s3_spectrum(
    bundle: &MultiFiberBundle,
    metric: &MetricField,
    x: &[f64],
    levels: usize,
) -> Result<SpectralData, KaluzaError> {
    let r = s3_radius(bundle, metric, x)?;
    let eigenvalues = (0..levels).map(|k| (k * (k + 2)) as f64 / (r * r)).collect();
    let multiplicities = (0..levels).map(|k| (k + 1) * (k + 1)).collect();
    Ok(SpectralData {
        fiber: SpectrumFiber::S3,
        eigenvalues,
        multiplicities,
        discretization: levels,
        scale: r,
        constant_mode_residual: 0.0,
    })
}

/// Spectrum of the fiber Laplacian `−∇^i∇_i` at `x`. `resolution` is the
/// node count on `S¹` and the number of eigenvalue levels on `S³`.
pub fn fiber_spectrum(
    bundle: &MultiFiberBundle,
    metric: &MetricField,
    x: &[f64],
    fiber: SpectrumFiber,
    resolution: usize,
) -> Result<SpectralData, KaluzaError> {
    match fiber {
        SpectrumFiber::S1 => s1_spectrum(bundle, metric, x, resolution),
        SpectrumFiber::S3 => s3_spectrum(bundle, metric, x, resolution),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_operator_matches_fourier_modes() {
        let l = 2.0 * std::f64::consts::PI;
        let mut vals: Vec<f64> = circle_laplacian(l, 64)
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        vals.sort_by(f64::total_cmp);
        let (eig, mult) = group(&vals);
        assert!(eig[0].abs() < 1e-10);
        assert_eq!(mult[0], 1);
        assert_eq!(mult[1], 2);
        let h = l / 64.0;
        let exact = 4.0 / (h * h) * (std::f64::consts::PI / 64.0).sin().powi(2);
        assert!((eig[1] - exact).abs() < 1e-10);
    }
}
