//! RK4 integration of the geodesic equation and of the Lorentz equation
//! `∇_{ẋ} ẋ = q ^eF(ẋ)`, with conserved-quantity bookkeeping and CSV export.

use std::io::Write;

use serde::Serialize;

use super::KaluzaError;
use crate::chart::{ChartManifold, MetricField};
use crate::field::{ExprField, Field};
use crate::linalg::{inverse_g, quad_form_g};
use crate::tensor::connection_g;

#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub chart: String,
    pub coords: Vec<f64>,
    pub velocity: Vec<f64>,
    /// `g(ẋ, ẋ)`.
    pub speed2: f64,
    /// `g(ẋ, K)` for each declared Killing field.
    pub killing: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub coord_names: Vec<String>,
    pub killing_names: Vec<String>,
    pub rows: Vec<TrajectoryRow>,
}

impl Trajectory {
    /// `max_t |g(ẋ,ẋ)(t) − g(ẋ,ẋ)(0)|`.
    pub fn speed_drift(&self) -> f64 {
        let s0 = self.rows[0].speed2;
        self.rows.iter().fold(0.0, |a, r| a.max((r.speed2 - s0).abs()))
    }

    /// Drift of `g(ẋ, K_k)`.
    pub fn killing_drift(&self, k: usize) -> f64 {
        let c0 = self.rows[0].killing[k];
        self.rows.iter().fold(0.0, |a, r| a.max((r.killing[k] - c0).abs()))
    }

    pub fn last(&self) -> &TrajectoryRow {
        &self.rows[self.rows.len() - 1]
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string(), "chart".to_string()];
        header.extend(self.coord_names.iter().cloned());
        header.extend(self.coord_names.iter().map(|c| format!("d{c}")));
        header.push("g(v,v)".into());
        header.extend(self.killing_names.iter().map(|k| format!("g(v,{k})")));
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![format!("{:.17e}", r.t), r.chart.clone()];
            rec.extend(r.coords.iter().chain(&r.velocity).map(|v| format!("{v:.17e}")));
            rec.push(format!("{:.17e}", r.speed2));
            rec.extend(r.killing.iter().map(|v| format!("{v:.17e}")));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Second-order ODE `ẍ = a(x, ẋ)` advanced by classical RK4.
fn rk4_step<A: Fn(&[f64], &[f64]) -> Result<Vec<f64>, KaluzaError>>(
    acc: &A,
    x: &[f64],
    v: &[f64],
    h: f64,
) -> Result<(Vec<f64>, Vec<f64>), KaluzaError> {
    let add = |a: &[f64], b: &[f64], s: f64| -> Vec<f64> { a.iter().zip(b).map(|(p, q)| p + s * q).collect() };
    let k1x = v.to_vec();
    let k1v = acc(x, v)?;
    let k2x = add(v, &k1v, h / 2.0);
    let k2v = acc(&add(x, &k1x, h / 2.0), &k2x)?;
    let k3x = add(v, &k2v, h / 2.0);
    let k3v = acc(&add(x, &k2x, h / 2.0), &k3x)?;
    let k4x = add(v, &k3v, h);
    let k4v = acc(&add(x, &k3x, h), &k4x)?;
    let comb = |y: &[f64], a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
        (0..y.len())
            .map(|i| y[i] + h / 6.0 * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]))
            .collect()
    };
    Ok((comb(x, &k1x, &k2x, &k3x, &k4x), comb(v, &k1v, &k2v, &k3v, &k4v)))
}

/// `−Γ^k_ij v^i v^j`.
pub fn geodesic_acceleration(metric: &MetricField, x: &[f64], v: &[f64]) -> Result<Vec<f64>, KaluzaError> {
    let n = x.len();
    let (_, _, gamma) = connection_g(metric, x)?;
    Ok((0..n)
        .map(|k| {
            let mut a = 0.0;
            for i in 0..n {
                for j in 0..n {
                    a -= gamma[(k * n + i) * n + j] * v[i] * v[j];
                }
            }
            a
        })
        .collect())
}

/// `q g^-1 F v` for a 2-form field `F` (row-major components).
pub fn lorentz_force<F: Field>(
    metric: &MetricField,
    f: &F,
    q: f64,
    x: &[f64],
    v: &[f64],
) -> Result<Vec<f64>, KaluzaError> {
    let n = x.len();
    let g = metric.eval(x);
    let ginv =
        inverse_g(&g, n).ok_or_else(|| KaluzaError::Geometry(crate::tensor::GeometryError::Degenerate(x.to_vec())))?;
    let fm = f.eval(x);
    let fv: Vec<f64> = (0..n).map(|a| (0..n).map(|b| fm[a * n + b] * v[b]).sum()).collect();
    Ok((0..n)
        .map(|a| q * (0..n).map(|b| ginv[a * n + b] * fv[b]).sum::<f64>())
        .collect())
}

#[allow(clippy::too_many_arguments)]
fn integrate<A: Fn(&[f64], &[f64]) -> Result<Vec<f64>, KaluzaError>>(
    manifold: &ChartManifold,
    metric: &MetricField,
    killing: &[(String, ExprField)],
    start: &[f64],
    velocity: &[f64],
    t_end: f64,
    step: f64,
    acc: A,
) -> Result<Trajectory, KaluzaError> {
    if !(step > 0.0) || !(t_end >= 0.0) {
        return Err(KaluzaError::Invalid(format!(
            "step {step} and end {t_end} must be positive"
        )));
    }
    let n = start.len();
    if velocity.len() != n || metric.dim() != n {
        return Err(KaluzaError::Invalid(
            "start, velocity and metric dimensions differ".into(),
        ));
    }
    let chart = manifold.home();
    let row = |t: f64, x: &[f64], v: &[f64]| {
        let g = metric.eval(x);
        TrajectoryRow {
            t,
            chart: chart.id.clone(),
            coords: x.to_vec(),
            velocity: v.to_vec(),
            speed2: quad_form_g(&g, v, v, n),
            killing: killing.iter().map(|(_, k)| quad_form_g(&g, v, &k.eval(x), n)).collect(),
        }
    };
    let steps = (t_end / step).round() as usize;
    let mut x = start.to_vec();
    let mut v = velocity.to_vec();
    let mut rows = Vec::with_capacity(steps + 1);
    rows.push(row(0.0, &x, &v));
    for s in 1..=steps {
        let (nx, nv) = rk4_step(&acc, &x, &v, step)?;
        let t = s as f64 * step;
        if !chart.contains(&nx) || nx.iter().chain(&nv).any(|c| !c.is_finite()) {
            return Err(KaluzaError::LeftAllCharts { t, point: nx });
        }
        x = nx;
        v = nv;
        rows.push(row(t, &x, &v));
    }
    Ok(Trajectory {
        coord_names: chart.coord_names.clone(),
        killing_names: killing.iter().map(|(k, _)| k.clone()).collect(),
        rows,
    })
}

/// Geodesic from `start` with initial velocity `velocity`, parameter in
/// `[0, t_end]`.
pub fn geodesic_integrate(
    manifold: &ChartManifold,
    metric: &MetricField,
    killing: &[(String, ExprField)],
    start: &[f64],
    velocity: &[f64],
    t_end: f64,
    step: f64,
) -> Result<Trajectory, KaluzaError> {
    integrate(manifold, metric, killing, start, velocity, t_end, step, |x, v| {
        geodesic_acceleration(metric, x, v)
    })
}

/// Charged motion `∇_{ẋ} ẋ = q ^eF(ẋ)` on the base with metric
/// `base_metric` and field `f_base` (row-major 2-form components).
#[allow(clippy::too_many_arguments)]
pub fn lorentz_integrate<F: Field>(
    manifold: &ChartManifold,
    base_metric: &MetricField,
    f_base: &F,
    charge_ratio: f64,
    start: &[f64],
    velocity: &[f64],
    t_end: f64,
    step: f64,
) -> Result<Trajectory, KaluzaError> {
    integrate(manifold, base_metric, &[], start, velocity, t_end, step, |x, v| {
        let a = geodesic_acceleration(base_metric, x, v)?;
        let l = lorentz_force(base_metric, f_base, charge_ratio, x, v)?;
        Ok(a.iter().zip(&l).map(|(p, q)| p + q).collect())
    })
}

/// Largest mismatch, along a geodesic of the total metric, between the
/// base components of its acceleration and the Lorentz acceleration
/// `−Γ_base(ẋ, ẋ) + q ^eF_base(ẋ)` with `q = −g(ẋ, Y)`. The base
/// coordinates are the leading `base_metric.dim()` coordinates.
pub fn lorentz_residual_along<Y: Field, F: Field>(
    traj: &Trajectory,
    metric: &MetricField,
    y: &Y,
    base_metric: &MetricField,
    f_base: &F,
) -> Result<f64, KaluzaError> {
    let n = metric.dim();
    let b = base_metric.dim();
    let mut worst = 0.0_f64;
    for r in &traj.rows {
        let a = geodesic_acceleration(metric, &r.coords, &r.velocity)?;
        let g = metric.eval(&r.coords);
        let q = -quad_form_g(&g, &r.velocity, &y.eval(&r.coords), n);
        let (xb, vb) = (&r.coords[..b], &r.velocity[..b]);
        let ab = geodesic_acceleration(base_metric, xb, vb)?;
        let l = lorentz_force(base_metric, f_base, q, xb, vb)?;
        for k in 0..b {
            worst = worst.max((a[k] - ab[k] - l[k]).abs());
        }
    }
    Ok(worst)
}
