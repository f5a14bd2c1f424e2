//! Averaging the metric over the flow of `Y` around one `S¹` fiber.

use nalgebra::DMatrix;
use serde::Serialize;

use super::potential::PotentialField;
use super::KaluzaError;
use crate::chart::{wrapped_distance, MetricField};
use crate::field::{value_and_jacobian_g, Field};
use crate::multifiber::MultiFiberBundle;

/// Closure tolerance for the flow after one fiber length.
pub const CLOSURE_TOL: f64 = 1e-6;
/// RK4 steps per fiber length, at least.
const MIN_FLOW_STEPS: usize = 512;

#[derive(Clone, Debug, Serialize)]
pub struct AveragedMetric {
    pub point: Vec<f64>,
    /// `ḡ_x`, row-major.
    pub metric: Vec<f64>,
    pub fiber_length: f64,
    pub nodes: usize,
    pub closure_error: f64,
    /// `|ḡ(Y, Y) + 1|` at the point.
    pub norm_residual: f64,
    /// `max_s |σ_s^* ḡ − ḡ|` at the point over a few flow times.
    pub killing_residual: f64,
}

impl AveragedMetric {
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.point.len();
        DMatrix::from_row_slice(n, n, &self.metric)
    }
}

/// Flow state: point and Jacobian of the flow map, row-major.
struct FlowState {
    y: Vec<f64>,
    j: Vec<f64>,
}

fn flow_rhs(field: &PotentialField<'_>, s: &FlowState) -> FlowState {
    let n = s.y.len();
    let (v, dv) = value_and_jacobian_g(field, &s.y);
    let mut dj = vec![0.0; n * n];
    for a in 0..n {
        for b in 0..n {
            dj[a * n + b] = (0..n).map(|k| dv[a][k] * s.j[k * n + b]).sum();
        }
    }
    FlowState { y: v, j: dj }
}

fn axpy(s: &FlowState, h: f64, d: &FlowState) -> FlowState {
    FlowState {
        y: s.y.iter().zip(&d.y).map(|(a, b)| a + h * b).collect(),
        j: s.j.iter().zip(&d.j).map(|(a, b)| a + h * b).collect(),
    }
}

fn rk4(field: &PotentialField<'_>, s: &FlowState, h: f64) -> FlowState {
    let k1 = flow_rhs(field, s);
    let k2 = flow_rhs(field, &axpy(s, h / 2.0, &k1));
    let k3 = flow_rhs(field, &axpy(s, h / 2.0, &k2));
    let k4 = flow_rhs(field, &axpy(s, h, &k3));
    let comb = |a: &[f64], b1: &[f64], b2: &[f64], b3: &[f64], b4: &[f64]| -> Vec<f64> {
        (0..a.len())
            .map(|i| a[i] + h / 6.0 * (b1[i] + 2.0 * b2[i] + 2.0 * b3[i] + b4[i]))
            .collect()
    };
    FlowState {
        y: comb(&s.y, &k1.y, &k2.y, &k3.y, &k4.y),
        j: comb(&s.j, &k1.j, &k2.j, &k3.j, &k4.j),
    }
}

/// Flow of `Y` from `x` sampled at `nodes` equally spaced times over one
/// fiber length; returns the samples and the closure error.
fn flow_samples(
    field: &PotentialField<'_>,
    x: &[f64],
    length: f64,
    nodes: usize,
) -> Result<(Vec<FlowState>, f64), KaluzaError> {
    let n = x.len();
    let per_node = MIN_FLOW_STEPS.div_ceil(nodes).max(1);
    let h = length / (nodes * per_node) as f64;
    let mut j = vec![0.0; n * n];
    for i in 0..n {
        j[i * n + i] = 1.0;
    }
    let mut s = FlowState { y: x.to_vec(), j };
    let mut out = Vec::with_capacity(nodes);
    for _ in 0..nodes {
        out.push(FlowState {
            y: s.y.clone(),
            j: s.j.clone(),
        });
        for _ in 0..per_node {
            s = rk4(field, &s, h);
            if s.y.iter().any(|v| !v.is_finite()) {
                return Err(KaluzaError::FlowNotPeriodic(f64::INFINITY));
            }
        }
    }
    let closure = wrapped_distance(&s.y, x, field.bundle.total_periods());
    Ok((out, closure))
}

fn pullback_mean(metric: &MetricField, samples: &[FlowState]) -> Vec<f64> {
    let n = samples[0].y.len();
    let mut acc = vec![0.0; n * n];
    for s in samples {
        let g = metric.eval(&s.y);
        for a in 0..n {
            for b in 0..n {
                let mut v = 0.0;
                for k in 0..n {
                    for l in 0..n {
                        v += s.j[k * n + a] * g[k * n + l] * s.j[l * n + b];
                    }
                }
                acc[a * n + b] += v;
            }
        }
    }
    acc.iter().map(|v| v / samples.len() as f64).collect()
}

fn average_at(
    bundle: &MultiFiberBundle,
    metric: &MetricField,
    x: &[f64],
    nodes: usize,
) -> Result<(Vec<f64>, f64, f64, Vec<FlowState>), KaluzaError> {
    let field = PotentialField::new(bundle, metric);
    let length = field.fiber_length(x, 128)?;
    let (samples, closure) = flow_samples(&field, x, length, nodes)?;
    if !(closure < CLOSURE_TOL) {
        return Err(KaluzaError::FlowNotPeriodic(closure));
    }
    Ok((pullback_mean(metric, &samples), length, closure, samples))
}

/// `ḡ_x = (1/ℓ_x) ∫ σ_t^* g dt` by the periodic trapezoid rule on `nodes`
/// flow samples.
pub fn average_metric(
    bundle: &MultiFiberBundle,
    metric: &MetricField,
    x: &[f64],
    nodes: usize,
) -> Result<AveragedMetric, KaluzaError> {
    if nodes == 0 {
        return Err(KaluzaError::Invalid("at least one quadrature node is needed".into()));
    }
    let n = x.len();
    let (gbar, length, closure, samples) = average_at(bundle, metric, x, nodes)?;
    let y = PotentialField::new(bundle, metric).eval(x);
    let yy: f64 = (0..n)
        .map(|a| (0..n).map(|b| y[a] * gbar[a * n + b] * y[b]).sum::<f64>())
        .sum();

    // flow invariance of ḡ at a few points along the fiber
    let mut killing = 0.0_f64;
    for s in samples.iter().skip(1).step_by((nodes / 3).max(1)).take(3) {
        let (g_s, _, _, _) = average_at(bundle, metric, &s.y, nodes)?;
        for a in 0..n {
            for b in 0..n {
                let mut v = 0.0;
                for k in 0..n {
                    for l in 0..n {
                        v += s.j[k * n + a] * g_s[k * n + l] * s.j[l * n + b];
                    }
                }
                killing = killing.max((v - gbar[a * n + b]).abs());
            }
        }
    }
    Ok(AveragedMetric {
        point: x.to_vec(),
        metric: gbar,
        fiber_length: length,
        nodes,
        closure_error: closure,
        norm_residual: (yy + 1.0).abs(),
        killing_residual: killing,
    })
}
