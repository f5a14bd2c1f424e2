//! Small dense linear algebra: generic routines over [`Real`] for the
//! differentiable paths, nalgebra-backed ones for pointwise `f64` work.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::real::Real;

/// Eigenvalues (or singular values) below this are treated as zero.
pub const DEGENERACY_TOL: f64 = 1e-10;

/// Row-major `n×n` inverse by Gauss–Jordan with partial pivoting on the real
/// part. `None` when a pivot is negligible relative to the matrix scale.
pub fn inverse_g<S: Real>(m: &[S], n: usize) -> Option<Vec<S>> {
    let scale = m.iter().fold(0.0_f64, |a, v| a.max(v.re().abs())).max(1e-300);
    let mut a = m.to_vec();
    let mut inv = vec![S::zero(); n * n];
    for i in 0..n {
        inv[i * n + i] = S::one();
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&p, &q| a[p * n + col].re().abs().total_cmp(&a[q * n + col].re().abs()))?;
        if a[piv * n + col].re().abs() < 1e-13 * scale {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
                inv.swap(piv * n + k, col * n + k);
            }
        }
        let p = S::one() / a[col * n + col];
        for k in 0..n {
            a[col * n + k] = a[col * n + k] * p;
            inv[col * n + k] = inv[col * n + k] * p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[r * n + col];
            for k in 0..n {
                a[r * n + k] = a[r * n + k] - f * a[col * n + k];
                inv[r * n + k] = inv[r * n + k] - f * inv[col * n + k];
            }
        }
    }
    Some(inv)
}

/// Determinant by elimination with partial pivoting on the real part.
pub fn det_g<S: Real>(m: &[S], n: usize) -> S {
    let mut a = m.to_vec();
    let mut det = S::one();
    for col in 0..n {
        let piv = match (col..n).max_by(|&p, &q| a[p * n + col].re().abs().total_cmp(&a[q * n + col].re().abs())) {
            Some(p) => p,
            None => return S::zero(),
        };
        if a[piv * n + col].re() == 0.0 {
            return S::zero();
        }
        if piv != col {
            for k in 0..n {
                a.swap(piv * n + k, col * n + k);
            }
            det = -det;
        }
        let p = a[col * n + col];
        det = det * p;
        for r in (col + 1)..n {
            let f = a[r * n + col] / p;
            for k in col..n {
                a[r * n + k] = a[r * n + k] - f * a[col * n + k];
            }
        }
    }
    det
}

/// Kernel of a full-rank `(n-1)×n` matrix, as the vector of signed maximal
/// minors (generalized cross product). Differentiable in the entries.
pub fn kernel_vector_g<S: Real>(rows: &[Vec<S>], n: usize) -> Vec<S> {
    debug_assert_eq!(rows.len() + 1, n);
    let m = n - 1;
    let mut out = Vec::with_capacity(n);
    let mut minor = vec![S::zero(); m * m];
    for skip in 0..n {
        for (r, row) in rows.iter().enumerate() {
            let mut c = 0;
            for (k, &v) in row.iter().enumerate() {
                if k != skip {
                    minor[r * m + c] = v;
                    c += 1;
                }
            }
        }
        let d = if m == 0 { S::one() } else { det_g(&minor, m) };
        out.push(if skip % 2 == 0 { d } else { -d });
    }
    out
}

pub fn mat_vec_g<S: Real>(m: &[S], v: &[S], n: usize) -> Vec<S> {
    (0..n)
        .map(|i| (0..n).fold(S::zero(), |acc, k| acc + m[i * n + k] * v[k]))
        .collect()
}

pub fn quad_form_g<S: Real>(m: &[S], u: &[S], v: &[S], n: usize) -> S {
    let mut acc = S::zero();
    for i in 0..n {
        for k in 0..n {
            acc = acc + u[i] * m[i * n + k] * v[k];
        }
    }
    acc
}

/// Orthonormal basis of the null space of `m` (columns), using singular
/// values below `tol` (relative to the largest).
pub fn null_space(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let (r, c) = m.shape();
    let mut sq = DMatrix::zeros(c.max(r), c);
    sq.view_mut((0, 0), (r, c)).copy_from(m);
    let svd = sq.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max).max(1.0);
    let cols: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s < tol * smax)
        .map(|(i, _)| vt.row(i).transpose())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(c, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

pub fn rank(m: &DMatrix<f64>, tol: f64) -> usize {
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    svd.singular_values.iter().filter(|&&s| s > tol * smax.max(1.0)).count()
}

/// Counts of negative and positive eigenvalues of a symmetric matrix.
/// `Err(λ)` carries the offending eigenvalue when one lies below
/// [`DEGENERACY_TOL`] in magnitude.
pub fn signature_counts(m: &DMatrix<f64>) -> Result<(usize, usize), f64> {
    if m.nrows() == 0 {
        return Ok((0, 0));
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut neg = 0;
    let mut pos = 0;
    for &l in eig.eigenvalues.iter() {
        if l.abs() < DEGENERACY_TOL {
            return Err(l);
        }
        if l < 0.0 {
            neg += 1;
        } else {
            pos += 1;
        }
    }
    Ok((neg, pos))
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

pub fn max_abs_slice(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

pub fn flat_to_matrix(v: &[f64], n: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::real::Dual;

    #[test]
    fn generic_inverse_matches_nalgebra() {
        let m = [2.0, 1.0, 0.5, 1.0, -3.0, 0.2, 0.5, 0.2, 1.5];
        let inv = inverse_g(&m, 3).unwrap();
        let nm = DMatrix::from_row_slice(3, 3, &m).try_inverse().unwrap();
        for i in 0..3 {
            for k in 0..3 {
                assert!((inv[i * 3 + k] - nm[(i, k)]).abs() < 1e-14);
            }
        }
        assert!(inverse_g(&[1.0, 2.0, 2.0, 4.0], 2).is_none());
    }

    #[test]
    fn determinant_derivative() {
        // d/dt det([[t, 1], [2, t]]) = 2t
        let t = Dual::var(1.5);
        let one = Dual::<f64>::cst(1.0);
        let two = Dual::<f64>::cst(2.0);
        let d = det_g(&[t, one, two, t], 2);
        assert!((d.re - (2.25 - 2.0)).abs() < 1e-15);
        assert!((d.eps - 3.0).abs() < 1e-15);
    }

    #[test]
    fn kernel_vector_annihilates_rows() {
        let rows = vec![vec![1.0, 2.0, 0.5], vec![0.0, -1.0, 3.0]];
        let k = kernel_vector_g(&rows, 3);
        for r in &rows {
            let dot: f64 = r.iter().zip(&k).map(|(a, b)| a * b).sum();
            assert!(dot.abs() < 1e-14);
        }
        assert!(k.iter().any(|v| v.abs() > 0.1));
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        let ns = null_space(&m, 1e-9);
        assert_eq!(ns.ncols(), 2);
        assert!((&m * &ns).abs().max() < 1e-14);
    }

    #[test]
    fn signature_and_degeneracy() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 1.0, 1.0, 1.0, -1.0, 1.0, 1.0, 1.0]));
        assert_eq!(signature_counts(&m), Ok((2, 6)));
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-14, 2.0]));
        assert!(signature_counts(&d).is_err());
    }
}
