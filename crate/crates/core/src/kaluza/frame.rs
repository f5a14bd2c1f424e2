//! Pullback of a global frame of `S³` to the `W = S³` fibers through `f`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::KaluzaError;
use crate::field::{jacobian, Field};
use crate::multifiber::{FiberKind, MultiFiberBundle};

/// Inverse north-pole stereographic projection `R³ → S³ ⊂ R⁴`.
pub fn stereo_inverse(w: &[f64]) -> [f64; 4] {
    let r2: f64 = w.iter().map(|v| v * v).sum();
    let d = 1.0 + r2;
    [2.0 * w[0] / d, 2.0 * w[1] / d, 2.0 * w[2] / d, (r2 - 1.0) / d]
}

/// North-pole stereographic projection `S³ → R³`.
pub fn stereo(x: &[f64; 4]) -> [f64; 3] {
    let d = 1.0 - x[3];
    [x[0] / d, x[1] / d, x[2] / d]
}

/// Left-invariant frame of `S³ ⊂ R⁴` (quaternion units acting on `x`),
/// `j ∈ {0, 1, 2}`.
pub fn frame_r4(j: usize, x: &[f64; 4]) -> [f64; 4] {
    let [a, b, c, d] = *x;
    match j {
        0 => [-b, a, -d, c],
        1 => [-c, d, a, -b],
        _ => [-d, -c, b, a],
    }
}

/// The same frame in stereographic coordinates at `w`.
pub fn frame_stereo(j: usize, w: &[f64]) -> [f64; 3] {
    let x = stereo_inverse(w);
    let v = frame_r4(j, &x);
    let d = 1.0 - x[3];
    let mut out = [0.0; 3];
    for (i, o) in out.iter_mut().enumerate() {
        *o = v[i] / d + x[i] * v[3] / (d * d);
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct FramePullback {
    pub points: Vec<Vec<f64>>,
    /// `X_j(f(x))` in stereographic components, per point.
    pub source: Vec<Vec<Vec<f64>>>,
    /// `Ĩ X_j(x)` in total coordinates, per point.
    pub pulled: Vec<Vec<Vec<f64>>>,
    /// `max |T f(Ĩ X_j) − X_j ∘ f|`.
    pub residual: f64,
    /// Smallest Gram determinant of the pulled triple.
    pub min_gram: f64,
}

/// Solve `T f · v = X_j(f(x))` for `v` tangent to `W_x`, at each point.
pub fn frame_pullback(bundle: &MultiFiberBundle, points: &[Vec<f64>]) -> Result<FramePullback, KaluzaError> {
    if bundle.w_dim() != 3 {
        return Err(KaluzaError::Invalid(
            "frame pullback needs a three-dimensional W".into(),
        ));
    }
    let mut out = FramePullback {
        points: points.to_vec(),
        source: Vec::new(),
        pulled: Vec::new(),
        residual: 0.0,
        min_gram: f64::INFINITY,
    };
    for x in points {
        let patch = bundle.patch_at(x)?;
        let b = bundle.subfiber_tangent(x, FiberKind::W)?;
        let jf = jacobian(&patch.f, x);
        let t = &jf * &b;
        let lu = t.clone().lu();
        if t.determinant().abs() < 1e-12 {
            return Err(KaluzaError::TangentMapSingular(x.clone()));
        }
        let w = patch.f.eval(x);
        let mut src = Vec::with_capacity(3);
        let mut vs = Vec::with_capacity(3);
        for j in 0..3 {
            let target = DVector::from_column_slice(&frame_stereo(j, &w));
            let c = lu
                .solve(&target)
                .ok_or_else(|| KaluzaError::TangentMapSingular(x.clone()))?;
            let v = &b * c;
            let res = (&jf * &v - &target).abs().max();
            out.residual = out.residual.max(res);
            src.push(target.iter().copied().collect());
            vs.push(v);
        }
        let m = DMatrix::from_columns(&vs);
        out.min_gram = out.min_gram.min((m.transpose() * &m).determinant());
        out.source.push(src);
        out.pulled
            .push(vs.iter().map(|v| v.iter().copied().collect()).collect());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stereographic_round_trip_and_tangency() {
        let w = [0.3, -1.2, 0.5];
        let x = stereo_inverse(&w);
        let norm: f64 = x.iter().map(|v| v * v).sum();
        assert!((norm - 1.0).abs() < 1e-15);
        let back = stereo(&x);
        for i in 0..3 {
            assert!((back[i] - w[i]).abs() < 1e-14);
        }
        for j in 0..3 {
            let v = frame_r4(j, &x);
            let dot: f64 = x.iter().zip(&v).map(|(a, b)| a * b).sum();
            assert!(dot.abs() < 1e-15);
        }
    }

    #[test]
    fn stereo_frame_matches_finite_difference_pushforward() {
        let w = [0.4, 0.1, -0.7];
        let x = stereo_inverse(&w);
        let h = 1e-6;
        for j in 0..3 {
            let v = frame_r4(j, &x);
            let mut xp = x;
            let mut xm = x;
            for k in 0..4 {
                xp[k] += h * v[k];
                xm[k] -= h * v[k];
            }
            let (sp, sm) = (stereo(&xp), stereo(&xm));
            let fs = frame_stereo(j, &w);
            for i in 0..3 {
                assert!(((sp[i] - sm[i]) / (2.0 * h) - fs[i]).abs() < 1e-8);
            }
        }
    }
}
