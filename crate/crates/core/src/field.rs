//! Smooth maps `R^n -> R^m` evaluable over any [`Real`], plus the exact
//! (dual-number) and finite-difference derivative drivers built on them.

use nalgebra::DMatrix;

use crate::expr::Expr;
use crate::real::{seed, seed2, Dual, Real};

/// A smooth coordinate map. Every geometric object in the crate (metric
/// components, vector fields, bundle projections) implements this.
pub trait Field: Sync {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S>;
}

impl<F: Field + ?Sized> Field for &F {
    fn dim_in(&self) -> usize {
        (**self).dim_in()
    }
    fn dim_out(&self) -> usize {
        (**self).dim_out()
    }
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        (**self).eval(x)
    }
}

/// Component list of closed-form expressions.
#[derive(Clone, Debug, PartialEq)]
pub struct ExprField {
    pub dim_in: usize,
    pub components: Vec<Expr>,
}

impl ExprField {
    pub fn new(dim_in: usize, components: Vec<Expr>) -> Self {
        ExprField { dim_in, components }
    }

    pub fn zeros(dim_in: usize, dim_out: usize) -> Self {
        ExprField::new(dim_in, vec![Expr::zero(); dim_out])
    }

    /// Coordinate vector field `∂_k`.
    pub fn coordinate(dim_in: usize, k: usize) -> Self {
        let mut c = vec![Expr::zero(); dim_in];
        c[k] = Expr::one();
        ExprField::new(dim_in, c)
    }

    /// Projection onto the listed coordinates.
    pub fn projection(dim_in: usize, coords: &[usize]) -> Self {
        ExprField::new(dim_in, coords.iter().map(|&k| Expr::var(k)).collect())
    }
}

impl Field for ExprField {
    fn dim_in(&self) -> usize {
        self.dim_in
    }
    fn dim_out(&self) -> usize {
        self.components.len()
    }
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        self.components.iter().map(|e| e.eval(x)).collect()
    }
}

/// Stack of two maps on the same domain: `x -> (a(x), b(x))`.
pub struct Stacked<'a, A: Field, B: Field> {
    pub a: &'a A,
    pub b: &'a B,
}

impl<A: Field, B: Field> Field for Stacked<'_, A, B> {
    fn dim_in(&self) -> usize {
        self.a.dim_in()
    }
    fn dim_out(&self) -> usize {
        self.a.dim_out() + self.b.dim_out()
    }
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        let mut v = self.a.eval(x);
        v.extend(self.b.eval(x));
        v
    }
}

/// Jacobian `J[c][k] = ∂_k f_c` at a generic point, via one dual pass per
/// coordinate.
pub fn jacobian_g<F: Field, S: Real>(f: &F, x: &[S]) -> Vec<Vec<S>> {
    let n = x.len();
    let m = f.dim_out();
    let mut jac = vec![vec![S::zero(); n]; m];
    for k in 0..n {
        let out = f.eval(&seed(x, k));
        for (c, v) in out.into_iter().enumerate() {
            jac[c][k] = v.eps;
        }
    }
    jac
}

/// Value and Jacobian at a generic point.
pub fn value_and_jacobian_g<F: Field, S: Real>(f: &F, x: &[S]) -> (Vec<S>, Vec<Vec<S>>) {
    let n = x.len();
    let m = f.dim_out();
    if n == 0 {
        return (f.eval(x), vec![Vec::new(); m]);
    }
    let mut jac = vec![vec![S::zero(); n]; m];
    let mut val = Vec::new();
    for k in 0..n {
        let out = f.eval(&seed(x, k));
        if k == 0 {
            val = out.iter().map(|d: &Dual<S>| d.re).collect();
        }
        for (c, v) in out.into_iter().enumerate() {
            jac[c][k] = v.eps;
        }
    }
    (val, jac)
}

/// Value, first and second partials at a generic point. `d2[c][i][j]`.
#[allow(clippy::type_complexity)]
pub fn second_g<F: Field, S: Real>(f: &F, x: &[S]) -> (Vec<S>, Vec<Vec<S>>, Vec<Vec<Vec<S>>>) {
    let n = x.len();
    let m = f.dim_out();
    let mut val = f.eval(x);
    if n == 0 {
        return (val, vec![Vec::new(); m], vec![Vec::new(); m]);
    }
    let mut d1 = vec![vec![S::zero(); n]; m];
    let mut d2 = vec![vec![vec![S::zero(); n]; n]; m];
    for i in 0..n {
        for j in i..n {
            let out = f.eval(&seed2(x, i, j));
            for (c, v) in out.into_iter().enumerate() {
                if i == 0 && j == 0 {
                    val[c] = v.re.re;
                }
                d1[c][i] = v.re.eps;
                d1[c][j] = v.eps.re;
                d2[c][i][j] = v.eps.eps;
                d2[c][j][i] = v.eps.eps;
            }
        }
    }
    (val, d1, d2)
}

pub fn value<F: Field>(f: &F, x: &[f64]) -> Vec<f64> {
    f.eval(x)
}

pub fn jacobian<F: Field>(f: &F, x: &[f64]) -> DMatrix<f64> {
    let j = jacobian_g(f, x);
    to_matrix(&j, f.dim_out(), x.len())
}

pub fn to_matrix(rows: &[Vec<f64>], m: usize, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(m, n, |r, c| rows[r][c])
}

/// Central-difference Jacobian, `J[c][k]`.
pub fn fd_jacobian<F: Field>(f: &F, x: &[f64], h: f64) -> Vec<Vec<f64>> {
    let n = x.len();
    let m = f.dim_out();
    let mut jac = vec![vec![0.0; n]; m];
    let mut xp = x.to_vec();
    for k in 0..n {
        xp[k] = x[k] + h;
        let fp = f.eval(&xp);
        xp[k] = x[k] - h;
        let fm = f.eval(&xp);
        xp[k] = x[k];
        for c in 0..m {
            jac[c][k] = (fp[c] - fm[c]) / (2.0 * h);
        }
    }
    jac
}

/// Central-difference second partials `d2[c][i][j]` (step `h`).
pub fn fd_second<F: Field>(f: &F, x: &[f64], h: f64) -> Vec<Vec<Vec<f64>>> {
    let n = x.len();
    let m = f.dim_out();
    let mut d2 = vec![vec![vec![0.0; n]; n]; m];
    let mut xp = x.to_vec();
    let at = |xp: &mut Vec<f64>, di: usize, si: f64, dj: usize, sj: f64| {
        xp[di] += si * h;
        xp[dj] += sj * h;
        let v = f.eval(xp);
        xp[di] = x[di];
        xp[dj] = x[dj];
        v
    };
    for i in 0..n {
        for j in i..n {
            let pp = at(&mut xp, i, 1.0, j, 1.0);
            let pm = at(&mut xp, i, 1.0, j, -1.0);
            let mp = at(&mut xp, i, -1.0, j, 1.0);
            let mm = at(&mut xp, i, -1.0, j, -1.0);
            for c in 0..m {
                let v = (pp[c] - pm[c] - mp[c] + mm[c]) / (4.0 * h * h);
                d2[c][i][j] = v;
                d2[c][j][i] = v;
            }
        }
    }
    d2
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExprField {
        let names: Vec<String> = ["x", "y"].iter().map(|s| s.to_string()).collect();
        ExprField::new(
            2,
            vec![
                Expr::parse("x^3*y + sin(y)", &names).unwrap(),
                Expr::parse("exp(x)*cos(y)", &names).unwrap(),
            ],
        )
    }

    #[test]
    fn dual_jacobian_matches_central_differences() {
        let f = sample();
        let x = [0.4, -0.3];
        let j = jacobian_g(&f, &x);
        let fd = fd_jacobian(&f, &x, 1e-5);
        for c in 0..2 {
            for k in 0..2 {
                assert!((j[c][k] - fd[c][k]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn polynomial_second_partials_are_exact() {
        let f = sample();
        let x = [0.4, -0.3];
        let (v, d1, d2) = second_g(&f, &x);
        assert_eq!(v, f.eval(&x));
        // d(x^3 y)/dx dy = 3x^2
        assert!((d2[0][0][1] - 3.0 * 0.16).abs() < 1e-14);
        assert!((d2[0][0][0] - 6.0 * 0.4 * -0.3).abs() < 1e-14);
        assert!((d1[0][0] - 3.0 * 0.16 * -0.3).abs() < 1e-14);
        let fd = fd_second(&f, &x, 1e-4);
        for c in 0..2 {
            for i in 0..2 {
                for k in 0..2 {
                    assert!((d2[c][i][k] - fd[c][i][k]).abs() < 1e-6);
                }
            }
        }
    }
}
