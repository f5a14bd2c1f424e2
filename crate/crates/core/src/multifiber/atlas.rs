//! Observation atlases: charts `φ_i : V_i → Θ_i × W_a × W_b` whose overlaps
//! preserve fiber slices, and the constructions between atlases and
//! multi-fiber bundles.

use serde::Serialize;
use thiserror::Error;

use super::{invert, BundleError, MultiFiberBundle, Trivialization};
use crate::chart::{wrapped_distance, Chart, ChartManifold, Domain};
use crate::field::{ExprField, Field};
use crate::real::Real;

/// Fiber sets closer than this (sampled Hausdorff distance) are equal.
pub const FIBER_SET_TOL: f64 = 1e-8;
/// Distinct glued classes whose fibers are closer than this make the
/// sampled quotient non-Hausdorff.
pub const HAUSDORFF_TOL: f64 = 1e-9;
/// Base values closer than this are the same fiber.
const GLUE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AtlasError {
    #[error("atlas fails the {condition:?} overlap condition at sample {sample} between `{chart_a}` and `{chart_b}` (distance {distance:e})")]
    AtlasInconsistent {
        condition: WCondition,
        sample: usize,
        chart_a: String,
        chart_b: String,
        distance: f64,
    },
    #[error("samples {a} and {b} lie on distinct glued fibers at distance {distance:e}: the sampled quotient is not Hausdorff")]
    NonHausdorffQuotient { a: usize, b: usize, distance: f64 },
    #[error("sample {0} is not covered by any chart")]
    Uncovered(usize),
    #[error(transparent)]
    Bundle(#[from] BundleError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum WCondition {
    /// Slices `{θ} × W`.
    Full,
    /// Slices `{θ} × W_a × {b}`.
    A,
    /// Slices `{θ} × {a} × W_b`.
    B,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObservationChart {
    pub id: String,
    /// Region `V_i` in total coordinates.
    pub domain: Domain,
    pub base: ExprField,
    pub wa: ExprField,
    pub wb: ExprField,
}

impl ObservationChart {
    fn map(&self) -> ChartMap<'_> {
        ChartMap(self)
    }
}

struct ChartMap<'a>(&'a ObservationChart);

impl Field for ChartMap<'_> {
    fn dim_in(&self) -> usize {
        self.0.base.dim_in
    }
    fn dim_out(&self) -> usize {
        self.0.base.dim_out() + self.0.wa.dim_out() + self.0.wb.dim_out()
    }
    fn eval<S: Real>(&self, x: &[S]) -> Vec<S> {
        let mut v = self.0.base.eval(x);
        v.extend(self.0.wa.eval(x));
        v.extend(self.0.wb.eval(x));
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObservationAtlas {
    pub total_periods: Vec<Option<f64>>,
    pub wa_periods: Vec<Option<f64>>,
    pub wb_periods: Vec<Option<f64>>,
    pub charts: Vec<ObservationChart>,
    pub is_wa_atlas: bool,
    pub is_wb_atlas: bool,
    pub orientation_preserving: bool,
}

impl ObservationAtlas {
    pub fn new(
        total_periods: Vec<Option<f64>>,
        wa_periods: Vec<Option<f64>>,
        wb_periods: Vec<Option<f64>>,
        charts: Vec<ObservationChart>,
    ) -> Self {
        ObservationAtlas {
            total_periods,
            wa_periods,
            wb_periods,
            charts,
            is_wa_atlas: false,
            is_wb_atlas: false,
            orientation_preserving: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.total_periods.len()
    }

    pub fn base_dim(&self) -> usize {
        self.charts.first().map_or(0, |c| c.base.dim_out())
    }

    fn output_periods(&self) -> Vec<Option<f64>> {
        let mut p = vec![None; self.base_dim()];
        p.extend(self.wa_periods.iter().copied());
        p.extend(self.wb_periods.iter().copied());
        p
    }

    /// Runs [`check_w_atlas`] and sets the W_a / W_b flags from it.
    pub fn certify(&mut self, samples: &[Vec<f64>], nodes: usize) -> AtlasVerdict {
        let v = check_w_atlas(self, samples, nodes);
        self.is_wa_atlas = v.wa;
        self.is_wb_atlas = v.wb;
        v
    }

    /// Fraction of samples covered by some chart.
    pub fn coverage(&self, samples: &[Vec<f64>]) -> f64 {
        if samples.is_empty() {
            return 1.0;
        }
        let covered = samples
            .iter()
            .filter(|x| self.charts.iter().any(|c| c.domain.contains(x)))
            .count();
        covered as f64 / samples.len() as f64
    }

    fn chart_inverse(&self, chart: &ObservationChart, target: &[f64], guess: &[f64]) -> Option<Vec<f64>> {
        invert(&chart.map(), target, guess, &self.output_periods()).ok()
    }

    /// Sampled slice through `x` of chart `c` for `condition`: the free W
    /// coordinates run over a grid of `nodes` per periodic direction
    /// (`[-1, 1]` offsets for non-periodic ones), the rest are held at
    /// their values at `x`.
    fn slice(&self, c: &ObservationChart, x: &[f64], condition: WCondition, nodes: usize) -> Vec<Vec<f64>> {
        let at_x = c.map().eval(x);
        let b = self.base_dim();
        let na = self.wa_periods.len();
        let free: Vec<usize> = match condition {
            WCondition::Full => (b..at_x.len()).collect(),
            WCondition::A => (b..b + na).collect(),
            WCondition::B => (b + na..at_x.len()).collect(),
        };
        let periods = self.output_periods();
        let total = nodes.pow(free.len() as u32);
        let mut out = Vec::with_capacity(total);
        let mut prev = x.to_vec();
        for idx in 0..total {
            let mut rem = idx;
            let mut target = at_x.clone();
            for &k in &free {
                let i = rem % nodes;
                rem /= nodes;
                target[k] += match periods[k] {
                    Some(p) => p * i as f64 / nodes as f64,
                    None => -1.0 + 2.0 * i as f64 / (nodes.max(2) - 1) as f64,
                };
            }
            if idx % nodes == 0 {
                prev = x.to_vec();
            }
            if let Some(y) = self.chart_inverse(c, &target, &prev) {
                prev = y.clone();
                out.push(y);
            }
        }
        out
    }

    /// Point of chart `c`'s slice through `x` matching `y` in the free
    /// coordinates.
    fn project(&self, c: &ObservationChart, x: &[f64], y: &[f64], condition: WCondition) -> Option<Vec<f64>> {
        let at_x = c.map().eval(x);
        let at_y = c.map().eval(y);
        let b = self.base_dim();
        let na = self.wa_periods.len();
        let mut target = at_x;
        let range = match condition {
            WCondition::Full => b..target.len(),
            WCondition::A => b..b + na,
            WCondition::B => b + na..target.len(),
        };
        for k in range {
            target[k] = at_y[k];
        }
        self.chart_inverse(c, &target, y)
    }

    /// Symmetric sampled distance between the `condition` slices through
    /// `x` of charts `a` and `b`.
    fn slice_distance(
        &self,
        a: &ObservationChart,
        b: &ObservationChart,
        x: &[f64],
        condition: WCondition,
        nodes: usize,
    ) -> f64 {
        let mut worst = 0.0_f64;
        for (from, to) in [(a, b), (b, a)] {
            for y in self.slice(from, x, condition, nodes) {
                let d = match self.project(to, x, &y, condition) {
                    Some(q) => wrapped_distance(&y, &q, &self.total_periods),
                    None => f64::INFINITY,
                };
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Distance between the full-W fibers through `x` (in chart `a`) and
    /// `y` (in chart `b`).
    fn fiber_distance(&self, a: &ObservationChart, x: &[f64], b: &ObservationChart, y: &[f64], nodes: usize) -> f64 {
        let mut worst = 0.0_f64;
        for (ca, pa, cb, pb) in [(a, x, b, y), (b, y, a, x)] {
            for z in self.slice(ca, pa, WCondition::Full, nodes) {
                let d = match self.project(cb, pb, &z, WCondition::Full) {
                    Some(q) => wrapped_distance(&z, &q, &self.total_periods),
                    None => f64::INFINITY,
                };
                worst = worst.max(d);
                if worst > HAUSDORFF_TOL {
                    return worst;
                }
            }
        }
        worst
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub condition: WCondition,
    pub sample: usize,
    pub chart_a: String,
    pub chart_b: String,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AtlasVerdict {
    pub full: bool,
    pub wa: bool,
    pub wb: bool,
    /// Largest slice distance per condition (full, a, b).
    pub worst: [f64; 3],
    pub witnesses: Vec<Witness>,
}

impl AtlasVerdict {
    pub fn all(&self) -> bool {
        self.full && self.wa && self.wb
    }

    fn first_failure(&self, condition: WCondition) -> Option<&Witness> {
        self.witnesses.iter().find(|w| w.condition == condition)
    }
}

/// For each sample and each pair of charts containing it, compare the
/// full-W, W_a and W_b slices through the sample.
pub fn check_w_atlas(atlas: &ObservationAtlas, samples: &[Vec<f64>], nodes: usize) -> AtlasVerdict {
    let mut v = AtlasVerdict {
        full: true,
        wa: true,
        wb: true,
        worst: [0.0; 3],
        witnesses: Vec::new(),
    };
    for (si, x) in samples.iter().enumerate() {
        let inside: Vec<&ObservationChart> = atlas.charts.iter().filter(|c| c.domain.contains(x)).collect();
        for i in 0..inside.len() {
            for j in (i + 1)..inside.len() {
                for (slot, cond) in [WCondition::Full, WCondition::A, WCondition::B].into_iter().enumerate() {
                    let d = atlas.slice_distance(inside[i], inside[j], x, cond, nodes);
                    v.worst[slot] = v.worst[slot].max(d);
                    if !(d <= FIBER_SET_TOL) {
                        match cond {
                            WCondition::Full => v.full = false,
                            WCondition::A => v.wa = false,
                            WCondition::B => v.wb = false,
                        }
                        v.witnesses.push(Witness {
                            condition: cond,
                            sample: si,
                            chart_a: inside[i].id.clone(),
                            chart_b: inside[j].id.clone(),
                            distance: d,
                        });
                    }
                }
            }
        }
    }
    v
}

/// Bundle built from an atlas, with the gluing of the sample cloud.
#[derive(Clone, Debug)]
pub struct AtlasBundle {
    pub bundle: MultiFiberBundle,
    /// Glued class of each sample.
    pub sample_class: Vec<usize>,
    pub class_count: usize,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Glue the sample cloud into fibers and assemble `(π, h, f)` chartwise
/// from `(φ¹, φ^a, φ^b)`.
pub fn atlas_to_bundle(
    atlas: &ObservationAtlas,
    samples: &[Vec<f64>],
    nodes: usize,
) -> Result<AtlasBundle, AtlasError> {
    let verdict = check_w_atlas(atlas, samples, nodes);
    for cond in [WCondition::Full, WCondition::A, WCondition::B] {
        if let Some(w) = verdict.first_failure(cond) {
            return Err(AtlasError::AtlasInconsistent {
                condition: cond,
                sample: w.sample,
                chart_a: w.chart_a.clone(),
                chart_b: w.chart_b.clone(),
                distance: w.distance,
            });
        }
    }
    let home: Vec<usize> = samples
        .iter()
        .enumerate()
        .map(|(i, x)| {
            atlas
                .charts
                .iter()
                .position(|c| c.domain.contains(x))
                .ok_or(AtlasError::Uncovered(i))
        })
        .collect::<Result<_, _>>()?;

    let mut parent: Vec<usize> = (0..samples.len()).collect();
    for c in &atlas.charts {
        let members: Vec<(usize, Vec<f64>)> = samples
            .iter()
            .enumerate()
            .filter(|(_, x)| c.domain.contains(x))
            .map(|(i, x)| (i, c.base.eval(x)))
            .collect();
        for a in 0..members.len() {
            for b in (a + 1)..members.len() {
                let d = wrapped_distance(&members[a].1, &members[b].1, &[]);
                if d < GLUE_TOL {
                    let (ra, rb) = (find(&mut parent, members[a].0), find(&mut parent, members[b].0));
                    parent[ra] = rb;
                }
            }
        }
    }
    let mut roots: Vec<usize> = Vec::new();
    let mut sample_class = vec![0; samples.len()];
    for i in 0..samples.len() {
        let r = find(&mut parent, i);
        let k = match roots.iter().position(|&q| q == r) {
            Some(k) => k,
            None => {
                roots.push(r);
                roots.len() - 1
            }
        };
        sample_class[i] = k;
    }

    // distinct classes must have separated fibers
    for a in 0..roots.len() {
        for b in (a + 1)..roots.len() {
            let (ia, ib) = (roots[a], roots[b]);
            let (ca, cb) = (&atlas.charts[home[ia]], &atlas.charts[home[ib]]);
            // one projected point is a cheap lower bound
            let quick = atlas
                .project(cb, &samples[ib], &samples[ia], WCondition::Full)
                .map_or(f64::INFINITY, |q| {
                    wrapped_distance(&samples[ia], &q, &atlas.total_periods)
                });
            if quick > HAUSDORFF_TOL {
                continue;
            }
            let d = atlas.fiber_distance(ca, &samples[ia], cb, &samples[ib], nodes);
            if d < HAUSDORFF_TOL {
                return Err(AtlasError::NonHausdorffQuotient {
                    a: ia,
                    b: ib,
                    distance: d,
                });
            }
        }
    }

    let n = atlas.dim();
    let names = |prefix: &str, k: usize| (0..k).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>();
    let invalid = |e: crate::chart::ChartError| AtlasError::Bundle(BundleError::Invalid(e.to_string()));
    let mut total = Chart::new("total", names("y", n), Domain::whole(n)).map_err(invalid)?;
    total.periods = atlas.total_periods.clone();
    let bd = atlas.base_dim();
    let mut base = ChartManifold::default();
    for c in &atlas.charts {
        base.charts
            .push(Chart::new(format!("theta_{}", c.id), names("x", bd), Domain::whole(bd)).map_err(invalid)?);
    }
    let chart = |id: &str, prefix: &str, k: usize| {
        if k == 0 {
            Ok(Chart::point(id))
        } else {
            Chart::new(id, names(prefix, k), Domain::whole(k)).map_err(invalid)
        }
    };
    let mut w = chart("W_b", "b", atlas.wb_periods.len())?;
    w.periods = atlas.wb_periods.clone();
    let mut s = chart("W_a", "a", atlas.wa_periods.len())?;
    s.periods = atlas.wa_periods.clone();
    let patches = atlas
        .charts
        .iter()
        .map(|c| Trivialization {
            id: c.id.clone(),
            domain: c.domain.clone(),
            pi: c.base.clone(),
            h: c.wa.clone(),
            f: c.wb.clone(),
        })
        .collect();
    let bundle = MultiFiberBundle::new(ChartManifold::single(total), base, s, w, patches)?;
    Ok(AtlasBundle {
        bundle,
        sample_class,
        class_count: roots.len(),
    })
}

/// One observation chart per trivialization, `φ = (π, h, f)`.
pub fn bundle_to_atlas(bundle: &MultiFiberBundle) -> ObservationAtlas {
    let charts = bundle
        .patches
        .iter()
        .map(|p| ObservationChart {
            id: p.id.clone(),
            domain: p.domain.clone(),
            base: p.pi.clone(),
            wa: p.h.clone(),
            wb: p.f.clone(),
        })
        .collect();
    ObservationAtlas::new(
        bundle.total_periods().to_vec(),
        bundle.s_factor.periods.clone(),
        bundle.w_factor.periods.clone(),
        charts,
    )
}

/// Two atlases are equivalent when their union still passes every overlap
/// condition.
pub fn atlas_equivalence(
    a: &ObservationAtlas,
    b: &ObservationAtlas,
    samples: &[Vec<f64>],
    nodes: usize,
) -> AtlasVerdict {
    let mut union = a.clone();
    for c in &b.charts {
        let mut c = c.clone();
        if union.charts.iter().any(|d| d.id == c.id) {
            c.id = format!("{}'", c.id);
        }
        union.charts.push(c);
    }
    check_w_atlas(&union, samples, nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use std::f64::consts::PI;

    fn ef(comps: &[&str]) -> ExprField {
        let n: Vec<String> = ["th", "a", "b"].iter().map(|s| s.to_string()).collect();
        ExprField::new(3, comps.iter().map(|s| Expr::parse(s, &n).unwrap()).collect())
    }

    fn chart(id: &str, lo: f64, hi: f64, maps: [&str; 3]) -> ObservationChart {
        ObservationChart {
            id: id.into(),
            domain: Domain::whole(3).restrict(0, lo, hi),
            base: ef(&[maps[0]]),
            wa: ef(&[maps[1]]),
            wb: ef(&[maps[2]]),
        }
    }

    fn atlas(charts: Vec<ObservationChart>) -> ObservationAtlas {
        let tp = 2.0 * PI;
        ObservationAtlas::new(vec![None, Some(tp), Some(tp)], vec![Some(tp)], vec![Some(tp)], charts)
    }

    fn samples() -> Vec<Vec<f64>> {
        vec![vec![-0.5, 0.3, 1.2], vec![0.2, -2.0, 2.5], vec![0.7, 3.0, -0.4]]
    }

    #[test]
    fn single_chart_passes() {
        let a = atlas(vec![chart("1", -2.0, 2.0, ["th", "a", "b"])]);
        assert!(check_w_atlas(&a, &samples(), 8).all());
    }

    #[test]
    fn consistent_pair_passes_and_glues() {
        let a = atlas(vec![
            chart("1", -2.0, 1.0, ["th", "a", "b"]),
            chart("2", -1.0, 2.0, ["th + 1", "a + 0.5", "b"]),
        ]);
        let v = check_w_atlas(&a, &samples(), 8);
        assert!(v.all(), "{v:?}");
        let mut s = samples();
        s.push(vec![0.2, 1.0, -1.0]);
        let ab = atlas_to_bundle(&a, &s, 8).unwrap();
        assert_eq!(ab.class_count, 3);
        assert_eq!(ab.sample_class[1], ab.sample_class[3]);
    }

    #[test]
    fn shear_breaks_only_wb() {
        let a = atlas(vec![
            chart("1", -2.0, 1.0, ["th", "a", "b"]),
            chart("2", -1.0, 2.0, ["th", "a + 0.3*sin(b)", "b + 0.5"]),
        ]);
        let v = check_w_atlas(&a, &samples(), 8);
        assert!(v.full && v.wa && !v.wb, "{v:?}");
    }

    #[test]
    fn mixing_breaks_both_factors() {
        let a = atlas(vec![
            chart("1", -2.0, 1.0, ["th", "a", "b"]),
            chart("2", -1.0, 2.0, ["th", "a + 0.3*sin(b)", "b + 0.3*sin(a + 0.3*sin(b))"]),
        ]);
        let v = check_w_atlas(&a, &samples(), 8);
        assert!(v.full && !v.wa && !v.wb, "{v:?}");
    }

    #[test]
    fn base_twist_is_inconsistent() {
        let a = atlas(vec![
            chart("1", -2.0, 1.0, ["th", "a", "b"]),
            chart("2", -1.0, 2.0, ["th + 0.2*sin(a)", "a", "b"]),
        ]);
        match atlas_to_bundle(&a, &samples(), 8) {
            Err(AtlasError::AtlasInconsistent { condition, .. }) => assert_eq!(condition, WCondition::Full),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn touching_charts_are_non_hausdorff() {
        let a = atlas(vec![
            chart("1", -1.0, 0.0, ["th", "a", "b"]),
            chart("2", 0.0, 1.0, ["th", "a", "b"]),
        ]);
        let s = vec![vec![-2e-10, 0.1, 0.2], vec![2e-10, 0.1, 0.2]];
        assert!(matches!(
            atlas_to_bundle(&a, &s, 8),
            Err(AtlasError::NonHausdorffQuotient { .. })
        ));
    }
}
