//! Manifolds presented as coordinate charts with explicit transition maps,
//! and tensor fields stored as closed-form components in a home chart.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::Expr;
use crate::field::{fd_jacobian, fd_second, jacobian_g, second_g, value_and_jacobian_g, ExprField, Field};
use crate::linalg::{inverse_g, signature_counts, DEGENERACY_TOL};
use crate::real::Real;

pub type ChartId = String;

/// Transition round trips must close to this.
pub const ROUND_TRIP_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChartError {
    #[error("point {coords:?} lies outside the domain of chart `{chart}`")]
    PointOutsideDomain { chart: ChartId, coords: Vec<f64> },
    #[error("no transition path from chart `{from}` to chart `{to}`")]
    NoTransitionPath { from: ChartId, to: ChartId },
    #[error("point {coords:?} of chart `{from}` is not in a registered overlap with `{to}`")]
    NotInOverlap {
        from: ChartId,
        to: ChartId,
        coords: Vec<f64>,
    },
    #[error("unknown chart `{0}`")]
    UnknownChart(ChartId),
    #[error("invalid chart: {0}")]
    InvalidChart(String),
    #[error("transition `{from}` -> `{to}` fails to round-trip at {coords:?} (error {error:e})")]
    TransitionIncoherent {
        from: ChartId,
        to: ChartId,
        coords: Vec<f64>,
        error: f64,
    },
    #[error("degenerate metric (eigenvalue {0:e})")]
    Degenerate(f64),
    #[error("component array has {found} entries, expected {expected}")]
    ShapeMismatch { expected: usize, found: usize },
}

/// A ball `|x_coords| <= radius` removed from a domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Puncture {
    pub coords: Vec<usize>,
    pub radius: f64,
}

/// Open coordinate region: a (possibly unbounded) box minus closed balls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub bounds: Vec<(f64, f64)>,
    #[serde(default)]
    pub punctures: Vec<Puncture>,
}

impl Domain {
    pub fn whole(n: usize) -> Self {
        Domain {
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); n],
            punctures: Vec::new(),
        }
    }

    pub fn bounded(bounds: Vec<(f64, f64)>) -> Self {
        Domain {
            bounds,
            punctures: Vec::new(),
        }
    }

    pub fn with_puncture(mut self, coords: Vec<usize>, radius: f64) -> Self {
        self.punctures.push(Puncture { coords, radius });
        self
    }

    /// Restrict coordinate `k` to `(lo, hi)`.
    pub fn restrict(mut self, k: usize, lo: f64, hi: f64) -> Self {
        self.bounds[k] = (lo, hi);
        self
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        if x.len() != self.bounds.len() {
            return false;
        }
        let in_box = x
            .iter()
            .zip(&self.bounds)
            .all(|(&v, &(lo, hi))| v.is_finite() && v > lo && v < hi);
        in_box
            && self.punctures.iter().all(|p| {
                let r2: f64 = p.coords.iter().map(|&k| x[k] * x[k]).sum();
                r2 > p.radius * p.radius
            })
    }

    pub fn is_nonempty_open(&self) -> bool {
        self.bounds.iter().all(|&(lo, hi)| lo < hi) && self.punctures.iter().all(|p| p.radius >= 0.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Chart {
    pub id: ChartId,
    pub coord_names: Vec<String>,
    pub domain: Domain,
    pub periods: Vec<Option<f64>>,
}

impl Chart {
    pub fn new(id: impl Into<ChartId>, coord_names: Vec<String>, domain: Domain) -> Result<Self, ChartError> {
        let n = coord_names.len();
        let chart = Chart {
            id: id.into(),
            coord_names,
            domain,
            periods: vec![None; n],
        };
        chart.validate()?;
        Ok(chart)
    }

    /// Zero-dimensional chart (a single point), which [`Chart::new`] rejects.
    pub fn point(id: impl Into<ChartId>) -> Self {
        Chart {
            id: id.into(),
            coord_names: vec![],
            domain: Domain {
                bounds: vec![],
                punctures: vec![],
            },
            periods: vec![],
        }
    }

    pub fn with_period(mut self, k: usize, period: f64) -> Result<Self, ChartError> {
        self.periods[k] = Some(period);
        self.validate()?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.coord_names.len()
    }

    pub fn validate(&self) -> Result<(), ChartError> {
        if self.dim() == 0 {
            return Err(ChartError::InvalidChart(format!("chart `{}` has dimension 0", self.id)));
        }
        if self.domain.bounds.len() != self.dim() || !self.domain.is_nonempty_open() {
            return Err(ChartError::InvalidChart(format!(
                "chart `{}` has an empty or malformed domain",
                self.id
            )));
        }
        if self.periods.iter().flatten().any(|&p| !(p > 0.0)) {
            return Err(ChartError::InvalidChart(format!(
                "chart `{}` has a nonpositive period",
                self.id
            )));
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.domain.contains(x)
    }

    /// Coordinate difference `a - b` with periodic coordinates wrapped into
    /// `[-period/2, period/2)`.
    pub fn delta(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        wrapped_delta(a, b, &self.periods)
    }
}

pub fn wrap_angle(d: f64, period: f64) -> f64 {
    d - period * (d / period).round()
}

pub fn wrapped_delta(a: &[f64], b: &[f64], periods: &[Option<f64>]) -> Vec<f64> {
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(k, (x, y))| match periods.get(k).copied().flatten() {
            Some(p) => wrap_angle(x - y, p),
            None => x - y,
        })
        .collect()
}

pub fn wrapped_distance(a: &[f64], b: &[f64], periods: &[Option<f64>]) -> f64 {
    wrapped_delta(a, b, periods).iter().map(|d| d * d).sum::<f64>().sqrt()
}

/// Coordinate change `from -> to`, valid on `region` (in `from` coordinates).
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMap {
    pub from: ChartId,
    pub to: ChartId,
    pub map: ExprField,
    pub region: Domain,
    pub overlap_samples: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldPoint {
    pub chart: ChartId,
    pub coords: Vec<f64>,
}

impl ManifoldPoint {
    pub fn new(chart: impl Into<ChartId>, coords: Vec<f64>) -> Self {
        ManifoldPoint {
            chart: chart.into(),
            coords,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Slot {
    Covariant,
    Contravariant,
}

/// Components of a tensor field in its home chart, row-major over slots.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorFieldSpec {
    pub variance: Vec<Slot>,
    pub components: ExprField,
    pub chart: ChartId,
}

impl TensorFieldSpec {
    pub fn new(chart: impl Into<ChartId>, variance: Vec<Slot>, components: ExprField) -> Result<Self, ChartError> {
        let n = components.dim_in;
        let expected = n.pow(variance.len() as u32);
        if components.components.len() != expected {
            return Err(ChartError::ShapeMismatch {
                expected,
                found: components.components.len(),
            });
        }
        Ok(TensorFieldSpec {
            variance,
            components,
            chart: chart.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.components.dim_in
    }
}

impl Field for TensorFieldSpec {
    fn dim_in(&self) -> usize {
        self.components.dim_in
    }
    fn dim_out(&self) -> usize {
        self.components.components.len()
    }
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        self.components.eval(x)
    }
}

/// Multiset of metric eigenvalue signs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    pub neg: usize,
    pub pos: usize,
}

impl Signature {
    pub fn new(neg: usize, pos: usize) -> Self {
        Signature { neg, pos }
    }

    pub fn from_signs(signs: &[i32]) -> Self {
        Signature {
            neg: signs.iter().filter(|&&s| s < 0).count(),
            pos: signs.iter().filter(|&&s| s > 0).count(),
        }
    }

    pub fn of_matrix(m: &DMatrix<f64>) -> Result<Self, ChartError> {
        signature_counts(m)
            .map(|(neg, pos)| Signature { neg, pos })
            .map_err(ChartError::Degenerate)
    }
}

impl std::fmt::Display for Signature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{-:{}, +:{}}}", self.neg, self.pos)
    }
}

/// Symmetric covariant 2-tensor. Evaluation mirrors the upper triangle, so
/// symmetry is exact; [`MetricField::check_symmetry`] confirms the supplied
/// lower triangle agreed.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricField {
    pub tensor: TensorFieldSpec,
    pub declared_signature: Signature,
}

impl MetricField {
    pub fn new(
        chart: impl Into<ChartId>,
        rows: Vec<Vec<Expr>>,
        declared_signature: Signature,
    ) -> Result<Self, ChartError> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(ChartError::ShapeMismatch {
                expected: n * n,
                found: rows.iter().map(Vec::len).sum(),
            });
        }
        if declared_signature.neg + declared_signature.pos != n {
            return Err(ChartError::InvalidChart(format!(
                "declared signature {declared_signature} does not match dimension {n}"
            )));
        }
        let comps = rows.into_iter().flatten().collect();
        let tensor = TensorFieldSpec::new(chart, vec![Slot::Covariant; 2], ExprField::new(n, comps))?;
        Ok(MetricField {
            tensor,
            declared_signature,
        })
    }

    pub fn diagonal(
        chart: impl Into<ChartId>,
        diag: Vec<Expr>,
        declared_signature: Signature,
    ) -> Result<Self, ChartError> {
        let n = diag.len();
        let rows = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { diag[i].clone() } else { Expr::zero() })
                    .collect()
            })
            .collect();
        MetricField::new(chart, rows, declared_signature)
    }

    pub fn dim(&self) -> usize {
        self.tensor.dim()
    }

    pub fn chart(&self) -> &ChartId {
        &self.tensor.chart
    }

    pub fn matrix(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_row_slice(n, n, &self.eval(x))
    }

    /// Largest `|g_ij - g_ji|` of the supplied components over `points`.
    pub fn check_symmetry(&self, points: &[Vec<f64>]) -> f64 {
        let n = self.dim();
        let mut worst = 0.0_f64;
        for p in points {
            let raw = self.tensor.components.eval(p);
            for i in 0..n {
                for j in (i + 1)..n {
                    worst = worst.max((raw[i * n + j] - raw[j * n + i]).abs());
                }
            }
        }
        worst
    }

    /// Nondegeneracy and signature at a home-chart point.
    pub fn signature_at_coords(&self, x: &[f64]) -> Result<Signature, ChartError> {
        let m = self.matrix(x);
        let det = m.determinant();
        if det.abs() <= DEGENERACY_TOL {
            return Err(ChartError::Degenerate(det));
        }
        Signature::of_matrix(&m)
    }
}

impl Field for MetricField {
    fn dim_in(&self) -> usize {
        self.dim()
    }
    fn dim_out(&self) -> usize {
        self.dim() * self.dim()
    }
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        let n = self.dim();
        let comps = &self.tensor.components.components;
        let mut out = vec![S::zero(); n * n];
        for i in 0..n {
            for j in i..n {
                let v = comps[i * n + j].eval(x);
                out[i * n + j] = v;
                out[j * n + i] = v;
            }
        }
        out
    }
}

/// Components plus requested coordinate derivatives. `first[c][k]`,
/// `second[c][i][j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub values: Vec<f64>,
    pub first: Option<Vec<Vec<f64>>>,
    pub second: Option<Vec<Vec<Vec<f64>>>>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ChartManifold {
    pub charts: Vec<Chart>,
    pub transitions: Vec<TransitionMap>,
}

impl ChartManifold {
    pub fn single(chart: Chart) -> Self {
        ChartManifold {
            charts: vec![chart],
            transitions: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.charts.first().map_or(0, Chart::dim)
    }

    pub fn home(&self) -> &Chart {
        &self.charts[0]
    }

    pub fn chart(&self, id: &str) -> Result<&Chart, ChartError> {
        self.charts
            .iter()
            .find(|c| c.id == id)
            .ok_or_else(|| ChartError::UnknownChart(id.to_string()))
    }

    pub fn add_chart(&mut self, chart: Chart) -> Result<(), ChartError> {
        chart.validate()?;
        if let Some(first) = self.charts.first() {
            if first.dim() != chart.dim() {
                return Err(ChartError::InvalidChart(format!(
                    "chart `{}` has dimension {}, manifold has {}",
                    chart.id,
                    chart.dim(),
                    first.dim()
                )));
            }
        }
        self.charts.push(chart);
        Ok(())
    }

    /// Register a transition; if a reverse transition covering the samples
    /// exists, the round trip is verified on every overlap sample.
    pub fn add_transition(&mut self, t: TransitionMap) -> Result<(), ChartError> {
        self.chart(&t.from)?;
        self.chart(&t.to)?;
        self.transitions.push(t);
        self.verify_round_trips()
    }

    pub fn verify_round_trips(&self) -> Result<(), ChartError> {
        for t in &self.transitions {
            let to_chart = self.chart(&t.to)?;
            let from_chart = self.chart(&t.from)?;
            for s in &t.overlap_samples {
                let y = t.map.eval(s);
                let Some(back) = self.find_transition(&t.to, &t.from, &y) else {
                    continue;
                };
                let z = back.map.eval(&y);
                let err = wrapped_distance(&z, s, &from_chart.periods);
                if err > ROUND_TRIP_TOL || !to_chart.contains(&y) {
                    return Err(ChartError::TransitionIncoherent {
                        from: t.from.clone(),
                        to: t.to.clone(),
                        coords: s.clone(),
                        error: err,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn find_transition(&self, from: &str, to: &str, coords: &[f64]) -> Option<&TransitionMap> {
        self.transitions
            .iter()
            .find(|t| t.from == from && t.to == to && t.region.contains(coords))
    }

    pub fn check_point(&self, p: &ManifoldPoint) -> Result<&Chart, ChartError> {
        let chart = self.chart(&p.chart)?;
        if !chart.contains(&p.coords) {
            return Err(ChartError::PointOutsideDomain {
                chart: p.chart.clone(),
                coords: p.coords.clone(),
            });
        }
        Ok(chart)
    }

    /// Coordinates of the same point in `target`.
    pub fn transition(&self, p: &ManifoldPoint, target: &str) -> Result<ManifoldPoint, ChartError> {
        self.check_point(p)?;
        if p.chart == target {
            return Ok(p.clone());
        }
        let t = self
            .find_transition(&p.chart, target, &p.coords)
            .ok_or_else(|| ChartError::NotInOverlap {
                from: p.chart.clone(),
                to: target.to_string(),
                coords: p.coords.clone(),
            })?;
        let y = t.map.eval(&p.coords);
        let target_chart = self.chart(target)?;
        if !target_chart.contains(&y) {
            return Err(ChartError::NotInOverlap {
                from: p.chart.clone(),
                to: target.to_string(),
                coords: p.coords.clone(),
            });
        }
        Ok(ManifoldPoint::new(target, y))
    }

    /// Field components at `p`, expressed in `p`'s chart, with exact
    /// dual-number derivatives up to `order` (0, 1 or 2).
    pub fn evaluate(&self, field: &TensorFieldSpec, p: &ManifoldPoint, order: u8) -> Result<Evaluation, ChartError> {
        self.check_point(p)?;
        if p.chart == field.chart {
            return Ok(eval_with_order(field, &p.coords, order));
        }
        let t = self.transport_map(field, p)?;
        let view = Transported { field, map: &t.map };
        Ok(eval_with_order(&view, &p.coords, order))
    }

    /// Same as [`ChartManifold::evaluate`] but with central differences of
    /// step `h` for the derivatives.
    pub fn evaluate_fd(
        &self,
        field: &TensorFieldSpec,
        p: &ManifoldPoint,
        order: u8,
        h: f64,
    ) -> Result<Evaluation, ChartError> {
        self.check_point(p)?;
        if p.chart == field.chart {
            return Ok(fd_with_order(field, &p.coords, order, h));
        }
        let t = self.transport_map(field, p)?;
        let view = Transported { field, map: &t.map };
        Ok(fd_with_order(&view, &p.coords, order, h))
    }

    fn transport_map(&self, field: &TensorFieldSpec, p: &ManifoldPoint) -> Result<&TransitionMap, ChartError> {
        if self
            .transitions
            .iter()
            .all(|t| !(t.from == p.chart && t.to == field.chart))
        {
            return Err(ChartError::NoTransitionPath {
                from: p.chart.clone(),
                to: field.chart.clone(),
            });
        }
        self.find_transition(&p.chart, &field.chart, &p.coords)
            .ok_or_else(|| ChartError::NotInOverlap {
                from: p.chart.clone(),
                to: field.chart.clone(),
                coords: p.coords.clone(),
            })
    }

    /// Signs of the eigenvalues of the metric at `p`.
    pub fn signature_at(&self, metric: &MetricField, p: &ManifoldPoint) -> Result<Signature, ChartError> {
        let e = self.evaluate(&metric.tensor, p, 0)?;
        let n = metric.dim();
        let m = DMatrix::from_row_slice(n, n, &e.values);
        let m = (&m + m.transpose()) * 0.5;
        let det = m.determinant();
        if det.abs() <= DEGENERACY_TOL {
            return Err(ChartError::Degenerate(det));
        }
        Signature::of_matrix(&m)
    }
}

fn eval_with_order<F: Field>(f: &F, x: &[f64], order: u8) -> Evaluation {
    match order {
        0 => Evaluation {
            values: f.eval(x),
            first: None,
            second: None,
        },
        1 => {
            let (values, j) = value_and_jacobian_g(f, x);
            Evaluation {
                values,
                first: Some(j),
                second: None,
            }
        }
        _ => {
            let (values, j, h) = second_g(f, x);
            Evaluation {
                values,
                first: Some(j),
                second: Some(h),
            }
        }
    }
}

fn fd_with_order<F: Field>(f: &F, x: &[f64], order: u8, h: f64) -> Evaluation {
    Evaluation {
        values: f.eval(x),
        first: (order >= 1).then(|| fd_jacobian(f, x, h)),
        second: (order >= 2).then(|| fd_second(f, x, h)),
    }
}

/// A tensor field pulled into another chart: components at `y` are the home
/// components at `map(y)` transported with the transition Jacobian.
pub struct Transported<'a> {
    pub field: &'a TensorFieldSpec,
    pub map: &'a ExprField,
}

impl Field for Transported<'_> {
    fn dim_in(&self) -> usize {
        self.map.dim_in
    }
    fn dim_out(&self) -> usize {
        self.field.dim_out()
    }
    fn eval<S: Real>(&self, y: &[S]) -> Vec<S> {
        let n = y.len();
        let x = self.map.eval(y);
        // jac[i][a] = ∂x^i/∂y^a
        let jac = jacobian_g(self.map, y);
        let flat: Vec<S> = jac.iter().flatten().copied().collect();
        let needs_inverse = self.field.variance.contains(&Slot::Contravariant);
        // inv[a][i] = ∂y^a/∂x^i
        let inv = if needs_inverse {
            inverse_g(&flat, n).unwrap_or_else(|| vec![S::cst(f64::NAN); n * n])
        } else {
            Vec::new()
        };
        transport_components(
            &self.field.eval(&x),
            &self.field.variance,
            n,
            |slot, new, old| match slot {
                Slot::Covariant => flat[old * n + new],
                Slot::Contravariant => inv[new * n + old],
            },
        )
    }
}

/// Contract each slot of `comps` with `factor(slot, new_index, old_index)`.
pub fn transport_components<S: Real>(
    comps: &[S],
    variance: &[Slot],
    n: usize,
    factor: impl Fn(Slot, usize, usize) -> S,
) -> Vec<S> {
    let mut cur = comps.to_vec();
    let rank = variance.len();
    for (s, &slot) in variance.iter().enumerate() {
        let stride = n.pow((rank - s - 1) as u32);
        let mut next = vec![S::zero(); cur.len()];
        for (idx, out) in next.iter_mut().enumerate() {
            let new = (idx / stride) % n;
            let base = idx - new * stride;
            let mut acc = S::zero();
            for old in 0..n {
                acc = acc + factor(slot, new, old) * cur[base + old * stride];
            }
            *out = acc;
        }
        cur = next;
    }
    cur
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn angle_atlas() -> ChartManifold {
        let a = Chart::new("a", names(&["u"]), Domain::bounded(vec![(-PI, PI)])).unwrap();
        let b = Chart::new("b", names(&["v"]), Domain::bounded(vec![(-2.0 * PI, 0.0)])).unwrap();
        let mut m = ChartManifold::single(a);
        m.add_chart(b).unwrap();
        let shift = |from: &str, to: &str, c: f64, region: (f64, f64), samples: Vec<f64>| TransitionMap {
            from: from.into(),
            to: to.into(),
            map: ExprField::new(1, vec![Expr::var(0) + c]),
            region: Domain::bounded(vec![region]),
            overlap_samples: samples.into_iter().map(|s| vec![s]).collect(),
        };
        m.add_transition(shift("a", "b", -2.0 * PI, (0.0, PI), vec![0.5, 3.0]))
            .unwrap();
        m.add_transition(shift("a", "b", 0.0, (-PI, 0.0), vec![-0.5])).unwrap();
        m.add_transition(shift("b", "a", 2.0 * PI, (-2.0 * PI, -PI), vec![-4.0]))
            .unwrap();
        m.add_transition(shift("b", "a", 0.0, (-PI, 0.0), vec![-0.5])).unwrap();
        m
    }

    #[test]
    fn periodic_shift_transition() {
        let m = angle_atlas();
        let p = ManifoldPoint::new("a", vec![3.0]);
        let q = m.transition(&p, "b").unwrap();
        assert!((q.coords[0] - (3.0 - 2.0 * PI)).abs() < 1e-15);
        let back = m.transition(&q, "a").unwrap();
        assert!((back.coords[0] - 3.0).abs() < 1e-12);
        assert_eq!(m.transition(&p, "a").unwrap(), p);
    }

    #[test]
    fn outside_domain_and_missing_overlap() {
        let m = angle_atlas();
        let bad = ManifoldPoint::new("a", vec![4.0]);
        assert!(matches!(
            m.transition(&bad, "b"),
            Err(ChartError::PointOutsideDomain { .. })
        ));
        let mut single = ChartManifold::single(m.charts[0].clone());
        single.add_chart(m.charts[1].clone()).unwrap();
        let p = ManifoldPoint::new("a", vec![1.0]);
        assert!(matches!(
            single.transition(&p, "b"),
            Err(ChartError::NotInOverlap { .. })
        ));
    }

    #[test]
    fn sine_metric_derivative() {
        let n = names(&["x", "u"]);
        let gxx = Expr::parse("1 + 0.1*sin(u)", &n).unwrap();
        let metric = MetricField::diagonal("c", vec![gxx, Expr::c(-1.0)], Signature::new(1, 1)).unwrap();
        let chart = Chart::new("c", n, Domain::whole(2)).unwrap();
        let m = ChartManifold::single(chart);
        let e = m
            .evaluate(&metric.tensor, &ManifoldPoint::new("c", vec![0.3, 0.0]), 1)
            .unwrap();
        let first = e.first.unwrap();
        assert!((first[0][1] - 0.1).abs() < 1e-15);
        assert_eq!(first[0][0], 0.0);
    }

    #[test]
    fn minkowski_signature_and_flat_partials() {
        let n = names(&["t", "x", "y", "z"]);
        let diag = vec![Expr::c(-1.0), Expr::c(1.0), Expr::c(1.0), Expr::c(1.0)];
        let metric = MetricField::diagonal("m", diag, Signature::new(1, 3)).unwrap();
        let m = ChartManifold::single(Chart::new("m", n, Domain::whole(4)).unwrap());
        let p = ManifoldPoint::new("m", vec![0.2, -1.0, 3.0, 0.5]);
        let e = m.evaluate(&metric.tensor, &p, 2).unwrap();
        assert!(e.first.unwrap().iter().flatten().all(|&v| v == 0.0));
        assert!(e.second.unwrap().iter().flatten().flatten().all(|&v| v == 0.0));
        assert_eq!(m.signature_at(&metric, &p).unwrap(), Signature::new(1, 3));
    }

    #[test]
    fn tiny_eigenvalue_is_degenerate() {
        let n = names(&["a", "b"]);
        let metric = MetricField::diagonal("m", vec![Expr::c(1.0), Expr::c(1e-14)], Signature::new(0, 2)).unwrap();
        let m = ChartManifold::single(Chart::new("m", n, Domain::whole(2)).unwrap());
        let r = m.signature_at(&metric, &ManifoldPoint::new("m", vec![0.0, 0.0]));
        assert!(matches!(r, Err(ChartError::Degenerate(_))));
    }

    #[test]
    fn invalid_charts_rejected() {
        assert!(Chart::new("z", vec![], Domain::whole(0)).is_err());
        assert!(Chart::new("e", names(&["x"]), Domain::bounded(vec![(1.0, 1.0)])).is_err());
        let c = Chart::new("p", names(&["u"]), Domain::whole(1)).unwrap();
        assert!(c.with_period(0, 0.0).is_err());
    }
}
