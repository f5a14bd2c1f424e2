//! Levi-Civita connection, curvature, divergences, exterior derivatives and
//! Lie derivatives of a [`MetricField`] at a point.
//!
//! Sign conventions (fixed here, checked by the round-sphere calibration
//! `Ric = +(n-1) g` on the unit sphere):
//!
//! * `Γ^k_ij = ½ g^kl (∂_i g_lj + ∂_j g_li − ∂_l g_ij)`
//! * `R^l_ijk = ∂_i Γ^l_jk − ∂_j Γ^l_ik + Γ^l_im Γ^m_jk − Γ^l_jm Γ^m_ik`
//!   (so `R(∂_i, ∂_j) ∂_k = R^l_ijk ∂_l`)
//! * `Ric_jk = R^i_ijk`, `S = g^jk Ric_jk`, `G = Ric − ½ S g`
//! * `(∇·T)^j = ∇_i T^ij` (first slot contracted, result sharped)
//! * `(dω)_ij = ∂_i ω_j − ∂_j ω_i`

use nalgebra::DMatrix;
use thiserror::Error;

use crate::chart::{transport_components, MetricField, Slot};
use crate::field::{jacobian_g, second_g, value_and_jacobian_g, Field};
use crate::linalg::inverse_g;
use crate::real::{seed, Real};

/// Human-readable record of the frozen conventions, copied into reports.
pub const SIGN_CONVENTIONS: &str = "R^l_ijk = d_i G^l_jk - d_j G^l_ik + G^l_im G^m_jk - G^l_jm G^m_ik; \
Ric_jk = R^i_ijk; G = Ric - S g / 2; (div T)^j = nabla_i T^ij; (d w)_ij = d_i w_j - d_j w_i; \
calibrated by Ric = +2g on the unit 3-sphere";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("metric is degenerate at {0:?}")]
    Degenerate(Vec<f64>),
    #[error("slot {slot} out of range for a rank-{rank} tensor")]
    BadSlot { slot: usize, rank: usize },
}

/// Curvature data at one point, generic over the scalar so that the whole
/// computation can itself be differentiated.
#[derive(Clone, Debug)]
pub struct Geometry<S> {
    pub n: usize,
    /// `g_ij`, row-major.
    pub g: Vec<S>,
    pub ginv: Vec<S>,
    /// `∂_k g_ij` at `[k][i][j]`.
    pub dg: Vec<S>,
    /// `Γ^k_ij` at `[k][i][j]`.
    pub christoffel: Vec<S>,
    /// `R^l_ijk` at `[l][i][j][k]`.
    pub riemann: Vec<S>,
    pub ricci: Vec<S>,
    pub scalar: S,
    pub einstein: Vec<S>,
}

pub type CurvatureBundle = Geometry<f64>;

#[inline]
fn i3(n: usize, a: usize, b: usize, c: usize) -> usize {
    (a * n + b) * n + c
}

#[inline]
fn i4(n: usize, a: usize, b: usize, c: usize, d: usize) -> usize {
    ((a * n + b) * n + c) * n + d
}

fn re_vec<S: Real>(x: &[S]) -> Vec<f64> {
    x.iter().map(|v| v.re()).collect()
}

/// Christoffel symbols of the second kind from `g^-1` and `∂g`.
fn christoffel_from<S: Real>(n: usize, ginv: &[S], dg: &[S]) -> Vec<S> {
    // first kind Γ_lij
    let mut first = vec![S::zero(); n * n * n];
    for l in 0..n {
        for i in 0..n {
            for j in i..n {
                let v = (dg[i3(n, i, l, j)] + dg[i3(n, j, l, i)] - dg[i3(n, l, i, j)]).scale(0.5);
                first[i3(n, l, i, j)] = v;
                first[i3(n, l, j, i)] = v;
            }
        }
    }
    let mut gamma = vec![S::zero(); n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let mut acc = S::zero();
                for l in 0..n {
                    acc = acc + ginv[k * n + l] * first[i3(n, l, i, j)];
                }
                gamma[i3(n, k, i, j)] = acc;
                gamma[i3(n, k, j, i)] = acc;
            }
        }
    }
    gamma
}

/// `(g, g⁻¹, Γ)`, row-major.
pub type Connection<S> = (Vec<S>, Vec<S>, Vec<S>);

/// Connection only (first derivatives of the metric).
pub fn connection_g<S: Real>(metric: &MetricField, x: &[S]) -> Result<Connection<S>, GeometryError> {
    let n = metric.dim();
    let (g, d1) = value_and_jacobian_g(metric, x);
    let ginv = inverse_g(&g, n).ok_or_else(|| GeometryError::Degenerate(re_vec(x)))?;
    let mut dg = vec![S::zero(); n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                dg[i3(n, k, i, j)] = d1[i * n + j][k];
            }
        }
    }
    let gamma = christoffel_from(n, &ginv, &dg);
    Ok((g, ginv, gamma))
}

pub fn geometry_g<S: Real>(metric: &MetricField, x: &[S]) -> Result<Geometry<S>, GeometryError> {
    let n = metric.dim();
    let (g, d1, d2) = second_g(metric, x);
    let ginv = inverse_g(&g, n).ok_or_else(|| GeometryError::Degenerate(re_vec(x)))?;
    let mut dg = vec![S::zero(); n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                dg[i3(n, k, i, j)] = d1[i * n + j][k];
            }
        }
    }
    let gamma = christoffel_from(n, &ginv, &dg);

    // ∂_m g^kl = −g^ka ∂_m g_ab g^bl
    let mut dginv = vec![S::zero(); n * n * n];
    for m in 0..n {
        for k in 0..n {
            for l in k..n {
                let mut acc = S::zero();
                for a in 0..n {
                    let gka = ginv[k * n + a];
                    for b in 0..n {
                        acc = acc + gka * dg[i3(n, m, a, b)] * ginv[b * n + l];
                    }
                }
                dginv[i3(n, m, k, l)] = -acc;
                dginv[i3(n, m, l, k)] = -acc;
            }
        }
    }
    // ∂_m Γ_lij (first kind)
    let d2g = |m: usize, p: usize, a: usize, b: usize| d2[a * n + b][m][p];
    // ∂_m Γ^k_ij at [m][k][i][j]
    let mut dgamma = vec![S::zero(); n * n * n * n];
    for m in 0..n {
        for i in 0..n {
            for j in i..n {
                // first-kind pieces for all l
                let mut first = vec![S::zero(); n];
                let mut dfirst = vec![S::zero(); n];
                for l in 0..n {
                    first[l] = (dg[i3(n, i, l, j)] + dg[i3(n, j, l, i)] - dg[i3(n, l, i, j)]).scale(0.5);
                    dfirst[l] = (d2g(m, i, l, j) + d2g(m, j, l, i) - d2g(m, l, i, j)).scale(0.5);
                }
                for k in 0..n {
                    let mut acc = S::zero();
                    for l in 0..n {
                        acc = acc + dginv[i3(n, m, k, l)] * first[l] + ginv[k * n + l] * dfirst[l];
                    }
                    dgamma[i4(n, m, k, i, j)] = acc;
                    dgamma[i4(n, m, k, j, i)] = acc;
                }
            }
        }
    }

    let mut riemann = vec![S::zero(); n * n * n * n];
    for l in 0..n {
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                for k in 0..n {
                    let mut acc = dgamma[i4(n, i, l, j, k)] - dgamma[i4(n, j, l, i, k)];
                    for m in 0..n {
                        acc = acc + gamma[i3(n, l, i, m)] * gamma[i3(n, m, j, k)]
                            - gamma[i3(n, l, j, m)] * gamma[i3(n, m, i, k)];
                    }
                    riemann[i4(n, l, i, j, k)] = acc;
                }
            }
        }
    }
    let mut ricci = vec![S::zero(); n * n];
    for j in 0..n {
        for k in j..n {
            let mut acc = S::zero();
            for i in 0..n {
                acc = acc + riemann[i4(n, i, i, j, k)];
            }
            ricci[j * n + k] = acc;
            ricci[k * n + j] = acc;
        }
    }
    let mut scalar = S::zero();
    for j in 0..n {
        for k in 0..n {
            scalar = scalar + ginv[j * n + k] * ricci[j * n + k];
        }
    }
    let half_s = scalar.scale(0.5);
    let einstein = ricci.iter().zip(&g).map(|(&r, &gv)| r - half_s * gv).collect();

    Ok(Geometry {
        n,
        g,
        ginv,
        dg,
        christoffel: gamma,
        riemann,
        ricci,
        scalar,
        einstein,
    })
}

impl Geometry<f64> {
    pub fn gamma(&self, k: usize, i: usize, j: usize) -> f64 {
        self.christoffel[i3(self.n, k, i, j)]
    }

    pub fn riemann_up(&self, l: usize, i: usize, j: usize, k: usize) -> f64 {
        self.riemann[i4(self.n, l, i, j, k)]
    }

    /// `R_lijk = g_lm R^m_ijk`.
    pub fn riemann_down(&self, l: usize, i: usize, j: usize, k: usize) -> f64 {
        let n = self.n;
        (0..n).map(|m| self.g[l * n + m] * self.riemann_up(m, i, j, k)).sum()
    }

    pub fn metric_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.g)
    }

    pub fn ricci_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.ricci)
    }

    pub fn einstein_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.einstein)
    }

    /// `^eG = g^-1 G`, i.e. `g(u, ^eG v) = G(u, v)`.
    pub fn einstein_endo(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.ginv) * self.einstein_matrix()
    }

    /// Largest violation of the algebraic Riemann symmetries:
    /// `R_lijk = −R_ljik`, `R_lijk = −R_kijl`, `R_lijk = R_jkli`.
    pub fn riemann_symmetry_residual(&self) -> f64 {
        let n = self.n;
        let mut low = vec![0.0; n * n * n * n];
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        low[i4(n, l, i, j, k)] = self.riemann_down(l, i, j, k);
                    }
                }
            }
        }
        let mut worst = 0.0_f64;
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let r = low[i4(n, l, i, j, k)];
                        worst = worst
                            .max((r + low[i4(n, l, j, i, k)]).abs())
                            .max((r + low[i4(n, k, i, j, l)]).abs())
                            .max((r - low[i4(n, j, k, l, i)]).abs());
                    }
                }
            }
        }
        worst
    }

    /// Largest `|Γ^k_ij − Γ^k_ji|`.
    pub fn christoffel_symmetry_residual(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0_f64;
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    worst = worst.max((self.gamma(k, i, j) - self.gamma(k, j, i)).abs());
                }
            }
        }
        worst
    }

    pub fn max_riemann(&self) -> f64 {
        self.riemann.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

pub fn curvature(metric: &MetricField, x: &[f64]) -> Result<CurvatureBundle, GeometryError> {
    geometry_g(metric, x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Raise,
    Lower,
}

/// Raise or lower one slot of a tensor given by row-major components.
pub fn musical(
    metric: &MetricField,
    x: &[f64],
    components: &[f64],
    variance: &[Slot],
    slot: usize,
    direction: Direction,
) -> Result<(Vec<f64>, Vec<Slot>), GeometryError> {
    if slot >= variance.len() {
        return Err(GeometryError::BadSlot {
            slot,
            rank: variance.len(),
        });
    }
    let n = metric.dim();
    let g = metric.eval(x);
    let m = match direction {
        Direction::Lower => g,
        Direction::Raise => inverse_g(&g, n).ok_or_else(|| GeometryError::Degenerate(x.to_vec()))?,
    };
    // identity on every slot but `slot`
    let mut out = components.to_vec();
    let rank = variance.len();
    let stride = n.pow((rank - slot - 1) as u32);
    for (idx, v) in out.iter_mut().enumerate() {
        let new = (idx / stride) % n;
        let base = idx - new * stride;
        *v = (0..n)
            .map(|old| m[new * n + old] * components[base + old * stride])
            .sum();
    }
    let mut var = variance.to_vec();
    var[slot] = match direction {
        Direction::Lower => Slot::Covariant,
        Direction::Raise => Slot::Contravariant,
    };
    Ok((out, var))
}

/// `V^♭ = g(V, ·)` as a field.
pub struct Lowered<'a, V: Field> {
    pub metric: &'a MetricField,
    pub vector: &'a V,
}

impl<V: Field> Field for Lowered<'_, V> {
    fn dim_in(&self) -> usize {
        self.metric.dim()
    }
    fn dim_out(&self) -> usize {
        self.metric.dim()
    }
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        let n = self.metric.dim();
        let g = self.metric.eval(x);
        let v = self.vector.eval(x);
        (0..n)
            .map(|i| (0..n).fold(S::zero(), |a, k| a + g[i * n + k] * v[k]))
            .collect()
    }
}

/// Covariant 2-tensor with both slots raised.
struct Raised2<'a, T: Field> {
    metric: &'a MetricField,
    tensor: &'a T,
}

impl<T: Field> Field for Raised2<'_, T> {
    fn dim_in(&self) -> usize {
        self.metric.dim()
    }
    fn dim_out(&self) -> usize {
        self.metric.dim() * self.metric.dim()
    }
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        let n = self.metric.dim();
        let g = self.metric.eval(x);
        let ginv = inverse_g(&g, n).unwrap_or_else(|| vec![S::cst(f64::NAN); n * n]);
        let t = self.tensor.eval(x);
        transport_components(&t, &[Slot::Covariant, Slot::Covariant], n, |_, new, old| {
            ginv[new * n + old]
        })
    }
}

/// Einstein tensor `G_ij` of a metric, as a field (so it can be
/// differentiated once more for the Bianchi identity).
pub struct EinsteinField<'a> {
    pub metric: &'a MetricField,
}

impl Field for EinsteinField<'_> {
    fn dim_in(&self) -> usize {
        self.metric.dim()
    }
    fn dim_out(&self) -> usize {
        self.metric.dim() * self.metric.dim()
    }
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        match geometry_g(self.metric, x) {
            Ok(geo) => geo.einstein,
            Err(_) => vec![S::cst(f64::NAN); self.dim_out()],
        }
    }
}

/// Exterior derivative of a 1-form field: `(dω)_ij = ∂_i ω_j − ∂_j ω_i`.
pub struct ExteriorD<'a, W: Field> {
    pub form: &'a W,
}

impl<W: Field> Field for ExteriorD<'_, W> {
    fn dim_in(&self) -> usize {
        self.form.dim_in()
    }
    fn dim_out(&self) -> usize {
        self.form.dim_in() * self.form.dim_in()
    }
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        let n = x.len();
        let j = jacobian_g(self.form, x);
        let mut out = vec![S::zero(); n * n];
        for a in 0..n {
            for b in (a + 1)..n {
                let v = j[b][a] - j[a][b];
                out[a * n + b] = v;
                out[b * n + a] = -v;
            }
        }
        out
    }
}

/// `dω` at a point, antisymmetric by construction.
pub fn exterior_d_1form<W: Field>(form: &W, x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_row_slice(n, n, &ExteriorD { form }.eval(x))
}

/// `(dF)_ijk = ∂_i F_jk + ∂_j F_ki + ∂_k F_ij`, row-major `n³`.
pub fn exterior_d_2form<F: Field>(form: &F, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let j = jacobian_g(form, x);
    let mut out = vec![0.0; n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                out[i3(n, a, b, c)] = j[b * n + c][a] + j[c * n + a][b] + j[a * n + b][c];
            }
        }
    }
    out
}

/// `(∇·T)^j = ∇_i T^ij` for a covariant 2-tensor field `T`, returned as a
/// vector.
pub fn divergence2<T: Field>(metric: &MetricField, x: &[f64], tensor: &T) -> Result<Vec<f64>, GeometryError> {
    let n = metric.dim();
    let (_, _, gamma) = connection_g(metric, x)?;
    let raised = Raised2 { metric, tensor };
    let mut div = vec![0.0; n];
    let mut tup = vec![0.0; n * n];
    for i in 0..n {
        let out = raised.eval(&seed(x, i));
        for (c, v) in out.iter().enumerate() {
            tup[c] = v.re;
        }
        for j in 0..n {
            div[j] += out[i * n + j].eps;
        }
    }
    for j in 0..n {
        let mut acc = 0.0;
        for i in 0..n {
            for k in 0..n {
                acc += gamma[i3(n, i, i, k)] * tup[k * n + j] + gamma[i3(n, j, i, k)] * tup[i * n + k];
            }
        }
        div[j] += acc;
    }
    Ok(div)
}

/// Same as [`divergence2`] with a fourth-order central-difference stencil
/// of step `h` for the derivative of `T^ij`.
pub fn divergence2_fd<T: Field>(
    metric: &MetricField,
    x: &[f64],
    tensor: &T,
    h: f64,
) -> Result<Vec<f64>, GeometryError> {
    let n = metric.dim();
    let (_, _, gamma) = connection_g(metric, x)?;
    let raised = Raised2 { metric, tensor };
    let tup = raised.eval(x);
    let mut div = vec![0.0; n];
    let mut xp = x.to_vec();
    for i in 0..n {
        let mut at = |s: f64| {
            xp[i] = x[i] + s * h;
            let v = raised.eval(&xp);
            xp[i] = x[i];
            v
        };
        let (p1, m1, p2, m2) = (at(1.0), at(-1.0), at(2.0), at(-2.0));
        for j in 0..n {
            let c = i * n + j;
            div[j] += (8.0 * (p1[c] - m1[c]) - (p2[c] - m2[c])) / (12.0 * h);
        }
    }
    for j in 0..n {
        for i in 0..n {
            for k in 0..n {
                div[j] += gamma[i3(n, i, i, k)] * tup[k * n + j] + gamma[i3(n, j, i, k)] * tup[i * n + k];
            }
        }
    }
    Ok(div)
}

/// `∇·V = ∂_i V^i + Γ^i_ik V^k`.
pub fn divergence_vector<V: Field>(metric: &MetricField, x: &[f64], v: &V) -> Result<f64, GeometryError> {
    let n = metric.dim();
    let (_, _, gamma) = connection_g(metric, x)?;
    let (val, j) = value_and_jacobian_g(v, x);
    let mut acc = 0.0;
    for i in 0..n {
        acc += j[i][i];
        for k in 0..n {
            acc += gamma[i3(n, i, i, k)] * val[k];
        }
    }
    Ok(acc)
}

/// `(L_V g)_ij = V^k ∂_k g_ij + g_kj ∂_i V^k + g_ik ∂_j V^k`.
pub fn lie_metric<V: Field>(metric: &MetricField, v: &V, x: &[f64]) -> DMatrix<f64> {
    let n = metric.dim();
    let (g, dg) = value_and_jacobian_g(metric, x);
    let (vv, dv) = value_and_jacobian_g(v, x);
    DMatrix::from_fn(n, n, |i, j| {
        let mut acc = 0.0;
        for k in 0..n {
            acc += vv[k] * dg[i * n + j][k] + g[k * n + j] * dv[k][i] + g[i * n + k] * dv[k][j];
        }
        acc
    })
}

/// `(∇_A B)^k = A^i ∂_i B^k + Γ^k_ij A^i B^j` for a fixed vector `A` at `x`.
pub fn covariant_derivative<B: Field>(
    metric: &MetricField,
    a: &[f64],
    b: &B,
    x: &[f64],
) -> Result<Vec<f64>, GeometryError> {
    let n = metric.dim();
    let (_, _, gamma) = connection_g(metric, x)?;
    let (bv, db) = value_and_jacobian_g(b, x);
    Ok((0..n)
        .map(|k| {
            let mut acc = 0.0;
            for i in 0..n {
                acc += a[i] * db[k][i];
                for j in 0..n {
                    acc += gamma[i3(n, k, i, j)] * a[i] * bv[j];
                }
            }
            acc
        })
        .collect())
}

/// `∇_X X`.
pub fn covariant_accel<X: Field>(metric: &MetricField, xfield: &X, x: &[f64]) -> Result<Vec<f64>, GeometryError> {
    let a = xfield.eval(x);
    covariant_derivative(metric, &a, xfield, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Signature;
    use crate::expr::Expr;
    use crate::field::ExprField;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn parse_metric(names_: &[&str], rows: &[&[&str]], sig: Signature) -> MetricField {
        let n = names(names_);
        let rows = rows
            .iter()
            .map(|r| r.iter().map(|s| Expr::parse(s, &n).unwrap()).collect())
            .collect();
        MetricField::new("c", rows, sig).unwrap()
    }

    fn field(names_: &[&str], comps: &[&str]) -> ExprField {
        let n = names(names_);
        ExprField::new(n.len(), comps.iter().map(|s| Expr::parse(s, &n).unwrap()).collect())
    }

    fn round_s2() -> MetricField {
        let c = "4/(1 + x^2 + y^2)^2";
        parse_metric(&["x", "y"], &[&[c, "0"], &["0", c]], Signature::new(0, 2))
    }

    #[test]
    fn flat_metric_has_no_curvature() {
        let m = parse_metric(
            &["t", "x", "y", "z"],
            &[
                &["-1", "0", "0", "0"],
                &["0", "1", "0", "0"],
                &["0", "0", "1", "0"],
                &["0", "0", "0", "1"],
            ],
            Signature::new(1, 3),
        );
        let c = curvature(&m, &[0.3, -0.2, 1.0, 2.0]).unwrap();
        assert!(c.christoffel.iter().all(|&v| v == 0.0));
        assert_eq!(c.max_riemann(), 0.0);
        assert!(c.einstein.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn round_two_sphere_at_origin() {
        // hand computation: K = 1, so S = 2 and G vanishes in dimension 2
        let c = curvature(&round_s2(), &[0.0, 0.0]).unwrap();
        assert!((c.scalar - 2.0).abs() < 1e-12);
        assert!(c.einstein.iter().all(|v| v.abs() < 1e-12));
        // at a generic point too
        let c = curvature(&round_s2(), &[0.4, -0.7]).unwrap();
        assert!((c.scalar - 2.0).abs() < 1e-11);
        assert!(c.riemann_symmetry_residual() < 1e-9);
        let trace = c.einstein_endo().trace();
        assert!((trace - c.scalar * (1.0 - 1.0)).abs() < 1e-9);
    }

    #[test]
    fn musical_round_trip_and_lowering() {
        let m = parse_metric(&["x", "u"], &[&["1", "0"], &["0", "-1"]], Signature::new(1, 1));
        let (low, var) = musical(
            &m,
            &[0.0, 0.0],
            &[0.0, 1.0],
            &[Slot::Contravariant],
            0,
            Direction::Lower,
        )
        .unwrap();
        assert_eq!(low, vec![0.0, -1.0]);
        assert_eq!(var, vec![Slot::Covariant]);
        let w = parse_metric(
            &["x", "y"],
            &[&["2 + x", "0.3*y"], &["0.3*y", "1 + y^2"]],
            Signature::new(0, 2),
        );
        let v = [0.7, -1.3];
        let (l, _) = musical(&w, &[0.2, 0.5], &v, &[Slot::Contravariant], 0, Direction::Lower).unwrap();
        let (r, _) = musical(&w, &[0.2, 0.5], &l, &[Slot::Covariant], 0, Direction::Raise).unwrap();
        assert!((r[0] - v[0]).abs() < 1e-12 && (r[1] - v[1]).abs() < 1e-12);
        assert!(musical(&w, &[0.0, 0.0], &v, &[Slot::Contravariant], 1, Direction::Lower).is_err());
    }

    #[test]
    fn exterior_derivative_identities() {
        // d(df) = 0 for f = x^2 u
        let df = field(&["x", "u"], &["2*x*u", "x^2"]);
        let d = exterior_d_1form(&df, &[0.3, 1.7]);
        assert!(d.abs().max() < 1e-12);
        let konst = field(&["x", "u"], &["2", "-3"]);
        assert_eq!(exterior_d_1form(&konst, &[1.0, 1.0]).abs().max(), 0.0);
        // d(x dy) = dx ^ dy
        let a = field(&["x", "y"], &["0", "x"]);
        let d = exterior_d_1form(&a, &[0.5, 0.5]);
        assert_eq!(d[(0, 1)], 1.0);
        assert_eq!(d[(1, 0)], -1.0);
    }

    #[test]
    fn lie_derivative_examples() {
        let e = parse_metric(&["x", "y"], &[&["1", "0"], &["0", "1"]], Signature::new(0, 2));
        let rot = field(&["x", "y"], &["-y", "x"]);
        assert!(lie_metric(&e, &rot, &[0.3, -1.2]).abs().max() < 1e-12);
        let dil = field(&["x", "y"], &["x", "0"]);
        let l = lie_metric(&e, &dil, &[0.3, -1.2]);
        assert_eq!(l[(0, 0)], 2.0);
        assert_eq!(l[(0, 1)] + l[(1, 0)] + l[(1, 1)], 0.0);
    }

    #[test]
    fn sphere_latitude_acceleration() {
        // S^2 in (θ, φ): g = diag(1, sin^2 θ). ∂_θ is geodesic; ∂_φ is not:
        // (∇_φ ∂_φ)^θ = Γ^θ_φφ = −sin θ cos θ
        let m = parse_metric(&["th", "ph"], &[&["1", "0"], &["0", "sin(th)^2"]], Signature::new(0, 2));
        let th = std::f64::consts::FRAC_PI_4;
        let dth = field(&["th", "ph"], &["1", "0"]);
        let a = covariant_accel(&m, &dth, &[th, 0.2]).unwrap();
        assert!(a.iter().all(|v| v.abs() < 1e-15));
        let dph = field(&["th", "ph"], &["0", "1"]);
        let a = covariant_accel(&m, &dph, &[th, 0.2]).unwrap();
        assert!((a[0] + th.sin() * th.cos()).abs() < 1e-14);
        assert!(a[1].abs() < 1e-14);
    }

    #[test]
    fn metric_is_divergence_free() {
        let m = round_s2();
        let g = ExprField::new(2, m.tensor.components.components.clone());
        let d = divergence2(&m, &[0.2, 0.9], &g).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-12), "{d:?}");
    }

    fn round_s3(r: f64) -> MetricField {
        let c = format!("{}/(1 + x^2 + y^2 + z^2)^2", 4.0 * r * r);
        let c = c.as_str();
        parse_metric(
            &["x", "y", "z"],
            &[&[c, "0", "0"], &["0", c, "0"], &["0", "0", c]],
            Signature::new(0, 3),
        )
    }

    #[test]
    fn unit_three_sphere_calibration() {
        let m = round_s3(1.0);
        let x = [0.3, -0.5, 0.8];
        let c = curvature(&m, &x).unwrap();
        let diff = c.ricci_matrix() - c.metric_matrix() * 2.0;
        assert!(diff.abs().max() < 1e-10, "{diff}");
        assert!((c.scalar - 6.0).abs() < 1e-10);
        let c2 = curvature(&round_s3(2.0), &x).unwrap();
        assert!((c2.scalar - 1.5).abs() < 1e-10);
    }

    #[test]
    fn christoffels_match_finite_differences() {
        let m = parse_metric(
            &["x", "y"],
            &[&["2 + sin(x*y)", "0.3*x"], &["0.3*x", "1 + exp(y)"]],
            Signature::new(0, 2),
        );
        let x = [0.4, 0.1];
        let c = curvature(&m, &x).unwrap();
        let fd = crate::field::fd_jacobian(&m, &x, 1e-5);
        let ginv = inverse_g(&m.eval(&x), 2).unwrap();
        for k in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let mut v = 0.0;
                    for l in 0..2 {
                        v += 0.5 * ginv[k * 2 + l] * (fd[l * 2 + j][i] + fd[l * 2 + i][j] - fd[i * 2 + j][l]);
                    }
                    assert!((v - c.gamma(k, i, j)).abs() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn einstein_tensor_is_divergence_free() {
        let m = parse_metric(
            &["t", "x", "y"],
            &[
                &["-(1 + 0.2*x^2)", "0.1*y", "0"],
                &["0.1*y", "exp(0.3*t)", "0"],
                &["0", "0", "1 + sin(x)^2"],
            ],
            Signature::new(1, 2),
        );
        let x = [0.2, 0.5, -0.4];
        let g = EinsteinField { metric: &m };
        let d = divergence2(&m, &x, &g).unwrap();
        assert!(d.iter().all(|v| v.abs() < 1e-10), "{d:?}");
        let c = curvature(&m, &x).unwrap();
        assert!(c.max_riemann() > 1e-2);
        assert!(c.riemann_symmetry_residual() < 1e-10);
    }
}
