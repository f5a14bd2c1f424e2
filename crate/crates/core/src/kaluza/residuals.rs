//! Residual checkers for the charged-dust and charged-fluid equations, and
//! the recombination identity that holds for arbitrary smooth fields.
//!
//! Vectors are contravariant, divergences are `(∇·T)^j = ∇_i T^ij`, and
//! `F = d(Y♭)` with `^eF(v) = g⁻¹ F v`.

use nalgebra::{DMatrix, DVector};

use super::KaluzaError;
use crate::chart::MetricField;
use crate::field::{jacobian_g, ExprField, Field};
use crate::linalg::inverse_g;
use crate::real::Real;
use crate::report::Residual;
use crate::tensor::{
    covariant_accel, covariant_derivative, curvature, divergence2, divergence2_fd, divergence_vector, exterior_d_1form,
    ExteriorD, Lowered,
};

/// Smooth fluid data: scalars `μ, e, γ` (one output each), the vector
/// field `X₀` and, optionally, the covariant pressure `P` (row-major).
#[derive(Clone, Debug)]
pub struct FluidFields {
    pub mu: ExprField,
    pub e: ExprField,
    pub gamma: ExprField,
    pub x0: ExprField,
    pub p: Option<ExprField>,
}

/// `s · V` for a scalar field `s`.
struct Scaled<'a, A: Field, V: Field> {
    s: &'a A,
    v: &'a V,
}

impl<A: Field, V: Field> Field for Scaled<'_, A, V> {
    fn dim_in(&self) -> usize {
        self.v.dim_in()
    }
    fn dim_out(&self) -> usize {
        self.v.dim_out()
    }
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        let s = self.s.eval(x)[0];
        self.v.eval(x).into_iter().map(|c| s * c).collect()
    }
}

/// `X = X₀ + (e/μ) Y`.
struct XField<'a, Y: Field> {
    f: &'a FluidFields,
    y: &'a Y,
}

impl<Y: Field> Field for XField<'_, Y> {
    fn dim_in(&self) -> usize {
        self.y.dim_in()
    }
    fn dim_out(&self) -> usize {
        self.y.dim_out()
    }
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        let r = self.f.e.eval(x)[0] / self.f.mu.eval(x)[0];
        self.f
            .x0
            .eval(x)
            .into_iter()
            .zip(self.y.eval(x))
            .map(|(a, b)| a + r * b)
            .collect()
    }
}

/// `μ X = μ X₀ + e Y`.
struct MuX<'a, Y: Field> {
    f: &'a FluidFields,
    y: &'a Y,
}

impl<Y: Field> Field for MuX<'_, Y> {
    fn dim_in(&self) -> usize {
        self.y.dim_in()
    }
    fn dim_out(&self) -> usize {
        self.y.dim_out()
    }
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        let (mu, e) = (self.f.mu.eval(x)[0], self.f.e.eval(x)[0]);
        self.f
            .x0
            .eval(x)
            .into_iter()
            .zip(self.y.eval(x))
            .map(|(a, b)| mu * a + e * b)
            .collect()
    }
}

/// `α Y` with `α = γ − e²/μ`.
struct AlphaY<'a, Y: Field> {
    f: &'a FluidFields,
    y: &'a Y,
}

impl<Y: Field> Field for AlphaY<'_, Y> {
    fn dim_in(&self) -> usize {
        self.y.dim_in()
    }
    fn dim_out(&self) -> usize {
        self.y.dim_out()
    }
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        let (mu, e, gamma) = (self.f.mu.eval(x)[0], self.f.e.eval(x)[0], self.f.gamma.eval(x)[0]);
        let alpha = gamma - e * e / mu;
        self.y.eval(x).into_iter().map(|b| alpha * b).collect()
    }
}

/// `e/μ` as a scalar field.
struct Ratio<'a> {
    f: &'a FluidFields,
}

impl Field for Ratio<'_> {
    fn dim_in(&self) -> usize {
        self.f.mu.dim_in()
    }
    fn dim_out(&self) -> usize {
        1
    }
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        vec![self.f.e.eval(x)[0] / self.f.mu.eval(x)[0]]
    }
}

/// Covariant `μ X₀♭⊗X₀♭ + e (X₀♭⊗Y♭ + Y♭⊗X₀♭) + γ Y♭⊗Y♭ + P`.
pub struct DecomposedTensor<'a, Y: Field> {
    pub metric: &'a MetricField,
    pub fields: &'a FluidFields,
    pub y: &'a Y,
}

impl<Y: Field> Field for DecomposedTensor<'_, Y> {
    fn dim_in(&self) -> usize {
        self.metric.dim()
    }
    fn dim_out(&self) -> usize {
        self.metric.dim() * self.metric.dim()
    }
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        let n = self.metric.dim();
        let g = self.metric.eval(x);
        let lower = |v: Vec<S>| -> Vec<S> {
            (0..n)
                .map(|i| (0..n).fold(S::zero(), |a, k| a + g[i * n + k] * v[k]))
                .collect()
        };
        let a = lower(self.fields.x0.eval(x));
        let b = lower(self.y.eval(x));
        let (mu, e, gamma) = (
            self.fields.mu.eval(x)[0],
            self.fields.e.eval(x)[0],
            self.fields.gamma.eval(x)[0],
        );
        let p = self.fields.p.as_ref().map(|p| p.eval(x));
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut v = mu * a[i] * a[j] + e * (a[i] * b[j] + b[i] * a[j]) + gamma * b[i] * b[j];
                if let Some(p) = &p {
                    v = v + p[i * n + j];
                }
                out.push(v);
            }
        }
        out
    }
}

/// Pointwise quantities shared by the checkers.
struct Local {
    n: usize,
    g: DMatrix<f64>,
    ginv: DMatrix<f64>,
    mu: f64,
    e: f64,
    gamma: f64,
    x0: Vec<f64>,
    y: Vec<f64>,
    x: Vec<f64>,
    f: DMatrix<f64>,
    div_f: Vec<f64>,
    div_p: Vec<f64>,
    p: DMatrix<f64>,
}

fn local<Y: Field>(metric: &MetricField, y: &Y, fields: &FluidFields, x: &[f64]) -> Result<Local, KaluzaError> {
    let n = metric.dim();
    let g = metric.matrix(x);
    let ginv = inverse_g(&metric.eval(x), n)
        .map(|v| DMatrix::from_row_slice(n, n, &v))
        .ok_or_else(|| KaluzaError::Geometry(crate::tensor::GeometryError::Degenerate(x.to_vec())))?;
    let flat = Lowered { metric, vector: y };
    let f = exterior_d_1form(&flat, x);
    let div_f = divergence2(metric, x, &ExteriorD { form: &flat })?;
    let (div_p, p) = match &fields.p {
        Some(p) => (divergence2(metric, x, p)?, DMatrix::from_row_slice(n, n, &p.eval(x))),
        None => (vec![0.0; n], DMatrix::zeros(n, n)),
    };
    Ok(Local {
        n,
        mu: fields.mu.eval(x)[0],
        e: fields.e.eval(x)[0],
        gamma: fields.gamma.eval(x)[0],
        x0: fields.x0.eval(x),
        y: y.eval(x),
        x: XField { f: fields, y }.eval(x),
        g,
        ginv,
        f,
        div_f,
        div_p,
        p,
    })
}

impl Local {
    fn dot(&self, u: &[f64], v: &[f64]) -> f64 {
        (DVector::from_column_slice(u).transpose() * &self.g * DVector::from_column_slice(v))[(0, 0)]
    }

    /// `g⁻¹ M v` for a covariant matrix `M`.
    fn endo(&self, m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
        (&self.ginv * m * DVector::from_column_slice(v))
            .iter()
            .copied()
            .collect()
    }

    /// `F_ij F^ij`.
    fn f_contracted(&self) -> f64 {
        let up = &self.ginv * &self.f * &self.ginv;
        self.f.component_mul(&up).sum()
    }

    fn lorentz(&self, acc0: &[f64]) -> Vec<f64> {
        let fx0 = self.endo(&self.f, &self.x0);
        (0..self.n).map(|k| self.mu * acc0[k] - self.e * fx0[k]).collect()
    }
}

fn combine(terms: &[(f64, &[f64])]) -> Vec<f64> {
    let n = terms[0].1.len();
    (0..n).map(|k| terms.iter().map(|(c, v)| c * v[k]).sum()).collect()
}

/// Charged-dust residuals at `x`: conservation, Maxwell (the stated form
/// and the form calibrated to the frozen curvature sign), free fall and
/// Lorentz. `P` is ignored.
pub fn theorem1_residuals<Y: Field>(
    metric: &MetricField,
    y: &Y,
    fields: &FluidFields,
    x: &[f64],
) -> Result<Vec<Residual>, KaluzaError> {
    let dust = FluidFields {
        p: None,
        ..fields.clone()
    };
    let l = local(metric, y, &dust, x)?;
    let n = l.n;
    let s = curvature(metric, x)?.scalar;

    let dratio = jacobian_g(&Ratio { f: &dust }, x);
    let x0_ratio: f64 = (0..n).map(|i| l.x0[i] * dratio[0][i]).sum();
    let div_mu_x0 = divergence_vector(
        metric,
        x,
        &Scaled {
            s: &dust.mu,
            v: &dust.x0,
        },
    )?;
    let div_e_x0 = divergence_vector(
        metric,
        x,
        &Scaled {
            s: &dust.e,
            v: &dust.x0,
        },
    )?;

    let stated = combine(&[(1.0, &l.div_f), (-2.0 * l.e, &l.x0), (2.0 * l.gamma + s, &l.y)]);
    let calibrated = combine(&[(1.0, &l.div_f), (-2.0 * l.e, &l.x0), (s - 2.0 * l.gamma, &l.y)]);

    let free_fall = covariant_accel(metric, &XField { f: &dust, y }, x)?;
    let acc0 = covariant_accel(metric, &dust.x0, x)?;

    Ok(vec![
        Residual::scalar("dust.conservation.ratio", "X0(e/mu) = 0", x0_ratio),
        Residual::scalar("dust.conservation.mass", "div(mu X0) = 0", div_mu_x0),
        Residual::scalar("dust.conservation.charge", "div(e X0) = 0", div_e_x0),
        Residual::vector("dust.maxwell.stated", "div F = 2e X0 - (2 gamma + S) Y", stated),
        Residual::vector("dust.maxwell.calibrated", "div F = 2e X0 + (2 gamma - S) Y", calibrated),
        Residual::vector("dust.free_fall", "nabla_X X = 0", free_fall),
        Residual::vector("dust.lorentz", "mu nabla_X0 X0 = e eF(X0)", l.lorentz(&acc0)),
    ])
}

/// Charged-fluid residuals at `x`: energy, charge, fluid motion, apparent
/// motion and Maxwell with both readings of `|F|`.
pub fn theorem2_residuals<Y: Field>(
    metric: &MetricField,
    y: &Y,
    fields: &FluidFields,
    x: &[f64],
) -> Result<Vec<Residual>, KaluzaError> {
    let l = local(metric, y, fields, x)?;
    let x0_divp = l.dot(&l.x0, &l.div_p);
    let y_divp = l.dot(&l.y, &l.div_p);

    let div_mu_x = divergence_vector(metric, x, &MuX { f: fields, y })?;
    let div_mu_x0 = divergence_vector(
        metric,
        x,
        &Scaled {
            s: &fields.mu,
            v: &fields.x0,
        },
    )?;
    let div_e_x0 = divergence_vector(
        metric,
        x,
        &Scaled {
            s: &fields.e,
            v: &fields.x0,
        },
    )?;

    let acc = covariant_accel(metric, &XField { f: fields, y }, x)?;
    let fluid_motion = combine(&[(l.mu, &acc), (1.0, &l.div_p), (x0_divp, &l.x)]);

    // projection orthogonal to span(X₀, Y), both unit timelike
    let t_perp = combine(&[(1.0, &l.div_p), (x0_divp, &l.x0), (y_divp, &l.y)]);
    let acc0 = covariant_accel(metric, &fields.x0, x)?;
    let apparent = combine(&[(1.0, &l.lorentz(&acc0)), (1.0, &t_perp)]);

    let py = l.endo(&l.p, &l.y);
    let ff = l.f_contracted();
    let maxwell = |norm: f64| combine(&[(1.0, &l.div_f), (-l.e, &l.x0), (-0.5 * norm, &l.y), (1.0, &py)]);

    Ok(vec![
        Residual::scalar("fluid.energy", "div(mu X) = <X0, div P>", div_mu_x - x0_divp),
        Residual::scalar("fluid.energy.x0", "div(mu X0) = <X0, div P>", div_mu_x0 - x0_divp),
        Residual::scalar("fluid.charge", "div(e X0) = <Y, div P>", div_e_x0 - y_divp),
        Residual::vector("fluid.motion", "mu nabla_X X = -div P - <X0, div P> X", fluid_motion),
        Residual::vector(
            "fluid.apparent_motion",
            "mu nabla_X0 X0 = e eF(X0) - pr_T(div P)",
            apparent,
        ),
        Residual::vector(
            "fluid.maxwell.contracted",
            "div F = e X0 + |F|/2 Y - eP(Y), |F| = F_ij F^ij",
            maxwell(ff),
        ),
        Residual::vector(
            "fluid.maxwell.norm",
            "div F = e X0 + |F|/2 Y - eP(Y), |F| = sqrt|F_ij F^ij|",
            maxwell(ff.abs().sqrt()),
        ),
    ])
}

/// Differences between the direct divergence of the reconstructed tensor
/// and its two product-rule expansions, plus a finite-difference oracle.
#[derive(Clone, Debug)]
pub struct Recombination {
    pub direct: Vec<f64>,
    pub classical: Vec<f64>,
    pub x_form: Vec<f64>,
    pub finite_difference: Vec<f64>,
}

impl Recombination {
    fn gap(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0, |m, (p, q)| m.max((p - q).abs()))
    }

    pub fn classical_residual(&self) -> f64 {
        Self::gap(&self.direct, &self.classical)
    }

    pub fn x_form_residual(&self) -> f64 {
        Self::gap(&self.direct, &self.x_form)
    }

    pub fn oracle_residual(&self) -> f64 {
        Self::gap(&self.direct, &self.finite_difference)
    }

    pub fn residuals(&self) -> Vec<Residual> {
        vec![
            Residual::scalar(
                "recombination.classical",
                "div G = product-rule expansion in (X0, Y)",
                self.classical_residual(),
            ),
            Residual::scalar(
                "recombination.x_form",
                "div G = product-rule expansion in (X, Y)",
                self.x_form_residual(),
            ),
            Residual::scalar(
                "recombination.oracle",
                "finite-difference divergence",
                self.oracle_residual(),
            ),
        ]
    }
}

/// Step of the finite-difference divergence oracle.
pub const ORACLE_STEP: f64 = 1e-3;

pub fn recombination_residual<Y: Field>(
    metric: &MetricField,
    y: &Y,
    fields: &FluidFields,
    x: &[f64],
) -> Result<Recombination, KaluzaError> {
    let l = local(metric, y, fields, x)?;
    let tensor = DecomposedTensor { metric, fields, y };
    let direct = divergence2(metric, x, &tensor)?;
    let finite_difference = divergence2_fd(metric, x, &tensor, ORACLE_STEP)?;

    let div_mu_x0 = divergence_vector(
        metric,
        x,
        &Scaled {
            s: &fields.mu,
            v: &fields.x0,
        },
    )?;
    let div_e_x0 = divergence_vector(
        metric,
        x,
        &Scaled {
            s: &fields.e,
            v: &fields.x0,
        },
    )?;
    let div_e_y = divergence_vector(metric, x, &Scaled { s: &fields.e, v: y })?;
    let div_gamma_y = divergence_vector(metric, x, &Scaled { s: &fields.gamma, v: y })?;
    let acc0 = covariant_accel(metric, &fields.x0, x)?;
    let d_x0_y = covariant_derivative(metric, &l.x0, y, x)?;
    let d_y_x0 = covariant_derivative(metric, &l.y, &fields.x0, x)?;
    let acc_y = covariant_accel(metric, y, x)?;
    let classical = combine(&[
        (div_mu_x0 + div_e_y, &l.x0),
        (l.mu, &acc0),
        (div_e_x0 + div_gamma_y, &l.y),
        (l.e, &d_x0_y),
        (l.e, &d_y_x0),
        (l.gamma, &acc_y),
        (1.0, &l.div_p),
    ]);

    let alpha = l.gamma - l.e * l.e / l.mu;
    let div_mu_x = divergence_vector(metric, x, &MuX { f: fields, y })?;
    let div_alpha_y = divergence_vector(metric, x, &AlphaY { f: fields, y })?;
    let acc_x = covariant_accel(metric, &XField { f: fields, y }, x)?;
    let x_form = combine(&[
        (div_mu_x, &l.x),
        (l.mu, &acc_x),
        (div_alpha_y, &l.y),
        (alpha, &acc_y),
        (1.0, &l.div_p),
    ]);
    Ok(Recombination {
        direct,
        classical,
        x_form,
        finite_difference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::Signature;
    use crate::expr::Expr;

    fn names() -> Vec<String> {
        ["t", "x", "y", "z", "u"].iter().map(|s| s.to_string()).collect()
    }

    fn parse(s: &str) -> Expr {
        Expr::parse(s, &names()).unwrap()
    }

    fn field(src: &[&str]) -> ExprField {
        ExprField::new(5, src.iter().map(|s| parse(s)).collect())
    }

    /// `η − (du + B x dy)²`.
    fn flat_kk() -> MetricField {
        let z = "0";
        let rows: Vec<Vec<&str>> = vec![
            vec!["-1", z, z, z, z],
            vec![z, "1", z, z, z],
            vec![z, z, "1 - x*x", z, "-x"],
            vec![z, z, z, "1", z],
            vec![z, z, "-x", z, "-1"],
        ];
        let rows = rows.iter().map(|r| r.iter().map(|s| parse(s)).collect()).collect();
        MetricField::new("c", rows, Signature::new(2, 3)).unwrap()
    }

    fn fields(with_p: bool) -> FluidFields {
        let p = with_p.then(|| {
            let mut c = vec!["0"; 25];
            c[6] = "0.2*sin(x)";
            c[8] = "0.1*cos(y)*z";
            c[16] = "0.1*cos(y)*z";
            c[18] = "0.3 + 0.1*x*t";
            field(&c)
        });
        FluidFields {
            mu: field(&["2 + 0.3*sin(x + 0.5*t)"]),
            e: field(&["0.4*cos(y) + 0.1*z"]),
            gamma: field(&["0.7 + 0.2*x*y"]),
            x0: field(&["1.2 + 0.1*sin(y)", "0.3*cos(t)", "0.2*x", "0.1*z*u", "0.05*x"]),
            p,
        }
    }

    #[test]
    fn recombination_holds_for_arbitrary_fields() {
        let g = flat_kk();
        let y = field(&["0", "0", "0", "0", "1"]);
        for with_p in [false, true] {
            let f = fields(with_p);
            for x in [[0.1, 0.3, -0.2, 0.5, 1.0], [-0.4, 0.8, 0.6, -0.1, 2.5]] {
                let r = recombination_residual(&g, &y, &f, &x).unwrap();
                assert!(r.classical_residual() < 1e-10, "{}", r.classical_residual());
                assert!(r.x_form_residual() < 1e-10, "{}", r.x_form_residual());
                assert!(r.oracle_residual() < 1e-6, "{}", r.oracle_residual());
            }
        }
    }

    #[test]
    fn pressure_free_fluid_matches_dust() {
        let g = flat_kk();
        let y = field(&["0", "0", "0", "0", "1"]);
        let f = fields(false);
        let x = [0.2, -0.3, 0.4, 0.1, 0.7];
        let t1 = theorem1_residuals(&g, &y, &f, &x).unwrap();
        let t2 = theorem2_residuals(&g, &y, &f, &x).unwrap();
        let get = |v: &[Residual], id: &str| v.iter().find(|r| r.identity == id).unwrap().components.clone();
        let mu = f.mu.eval(&x)[0];
        assert!((get(&t1, "dust.conservation.mass")[0] - get(&t2, "fluid.energy.x0")[0]).abs() < 1e-12);
        assert!((get(&t1, "dust.conservation.charge")[0] - get(&t2, "fluid.charge")[0]).abs() < 1e-12);
        for (a, b) in get(&t1, "dust.free_fall").iter().zip(get(&t2, "fluid.motion")) {
            assert!((mu * a - b).abs() < 1e-12);
        }
        for (a, b) in get(&t1, "dust.lorentz").iter().zip(get(&t2, "fluid.apparent_motion")) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
