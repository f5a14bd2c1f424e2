//! Curvature, Bianchi, fiber and atlas suites.

use rayon::prelude::*;

use super::{Scenario, Tolerances};
use crate::chart::wrapped_distance;
use crate::expr::Expr;
use crate::field::ExprField;
use crate::linalg::max_abs_slice;
use crate::multifiber::atlas::{atlas_to_bundle, bundle_to_atlas, check_w_atlas, AtlasVerdict, ObservationAtlas};
use crate::multifiber::{BundleError, FiberKind, MultiFiberBundle};
use crate::report::ReportEntry;
use crate::tensor::{self, divergence2, divergence2_fd, EinsteinField};

/// Step of the finite-difference Bianchi cross-check.
const BIANCHI_FD_STEP: f64 = 1e-3;

fn max_of<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    it.into_iter()
        .fold(0.0, |a, v| if v.is_nan() || a.is_nan() { f64::NAN } else { a.max(v) })
}

pub(super) fn curvature(s: &Scenario, tol: &Tolerances<'_>) -> Vec<ReportEntry> {
    let n = s.dim();
    let geos: Result<Vec<_>, _> = s.samples.par_iter().map(|x| tensor::curvature(&s.metric, x)).collect();
    let geos = match geos {
        Ok(g) => g,
        Err(e) => return vec![tol.failed("curvature.evaluate", "metric is nondegenerate at samples", 0.0, e)],
    };
    let mut out = vec![
        tol.entry(
            "curvature.riemann_symmetry",
            "R_lijk = -R_ljik = -R_kijl = R_jkli",
            max_of(geos.iter().map(|g| g.riemann_symmetry_residual())),
            1e-9,
        ),
        tol.entry(
            "curvature.christoffel_symmetry",
            "Gamma^k_ij = Gamma^k_ji",
            max_of(geos.iter().map(|g| g.christoffel_symmetry_residual())),
            1e-12,
        ),
    ];
    if s.spec.expect.flat {
        out.push(tol.entry(
            "curvature.riemann_zero",
            "flat metric: R = 0",
            max_of(geos.iter().map(|g| g.max_riemann())),
            1e-12,
        ));
        out.push(tol.entry(
            "curvature.einstein_zero",
            "flat metric: G = 0",
            max_of(geos.iter().map(|g| max_abs_slice(&g.einstein))),
            1e-12,
        ));
    }
    if let Some(k) = s.spec.expect.constant_curvature {
        let ric = (n as f64 - 1.0) * k;
        let ein = ric * (1.0 - n as f64 / 2.0);
        out.push(
            tol.entry(
                "curvature.ricci_constant",
                "constant curvature K: Ric = (n-1) K g",
                max_of(
                    geos.iter()
                        .map(|g| (g.ricci_matrix() - g.metric_matrix() * ric).abs().max()),
                ),
                1e-9,
            ),
        );
        out.push(
            tol.entry(
                "curvature.einstein_constant",
                "constant curvature K: G = (n-1)(1-n/2) K g",
                max_of(
                    geos.iter()
                        .map(|g| (g.einstein_matrix() - g.metric_matrix() * ein).abs().max()),
                ),
                1e-9,
            ),
        );
    }
    out
}

pub(super) fn bianchi(s: &Scenario, tol: &Tolerances<'_>) -> Vec<ReportEntry> {
    let ein = EinsteinField { metric: &s.metric };
    let per_point: Result<Vec<(f64, f64)>, _> = s
        .samples
        .par_iter()
        .map(|x| {
            let exact = divergence2(&s.metric, x, &ein)?;
            let fd = divergence2_fd(&s.metric, x, &ein, BIANCHI_FD_STEP)?;
            let gap = exact.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            Ok::<_, crate::tensor::GeometryError>((max_abs_slice(&exact), gap))
        })
        .collect();
    match per_point {
        Ok(v) => vec![
            tol.entry(
                "bianchi.divergence",
                "div G = 0 (contracted Bianchi identity)",
                max_of(v.iter().map(|p| p.0)),
                1e-6,
            ),
            tol.entry(
                "bianchi.fd_cross_check",
                "exact divergence vs finite differences",
                max_of(v.iter().map(|p| p.1)),
                1e-4,
            ),
        ],
        Err(e) => vec![tol.failed("bianchi.divergence", "div G = 0 (contracted Bianchi identity)", 1e-6, e)],
    }
}

/// Largest `ψ_p` round-trip error at `p`, over a few points of `S_p × W_p`.
pub fn splitting_roundtrip(bundle: &MultiFiberBundle, p: &[f64]) -> Result<f64, BundleError> {
    let periods = bundle.total_periods();
    let a_pts = bundle.fiber(p, FiberKind::S)?.sample(3)?;
    let c_pts = bundle.fiber(p, FiberKind::W)?.sample(2)?;
    let mut worst = 0.0_f64;
    for a in &a_pts {
        for c in &c_pts {
            let y = bundle.splitting_inverse(p, a, c)?;
            let (a2, c2) = bundle.splitting(p, &y)?;
            let y2 = bundle.splitting_inverse(p, &a2, &c2)?;
            worst = worst
                .max(wrapped_distance(a, &a2, periods))
                .max(wrapped_distance(c, &c2, periods))
                .max(wrapped_distance(&y, &y2, periods));
        }
    }
    Ok(worst)
}

/// Fibers through another point of the same fiber coincide with the fiber
/// through `p`.
pub fn fiber_well_defined(bundle: &MultiFiberBundle, p: &[f64], nodes: usize) -> Result<f64, BundleError> {
    let mut worst = 0.0_f64;
    for which in [FiberKind::S, FiberKind::W] {
        let pts = bundle.fiber(p, which)?.sample(2)?;
        let q = pts.last().cloned().unwrap_or_else(|| p.to_vec());
        worst = worst.max(bundle.fiber_set_distance(p, bundle, &q, which, nodes)?);
    }
    Ok(worst)
}

fn fiber_nodes(bundle: &MultiFiberBundle) -> usize {
    if bundle.w_dim() >= 3 {
        3
    } else {
        8
    }
}

pub(super) fn fibers(s: &Scenario, tol: &Tolerances<'_>) -> Vec<ReportEntry> {
    let Some(bundle) = &s.bundle else { return vec![] };
    let nodes = fiber_nodes(bundle);
    let pts: Vec<&Vec<f64>> = s.samples.iter().take(12).collect();
    let mut out = Vec::new();
    let split: Result<Vec<f64>, _> = pts.par_iter().map(|p| splitting_roundtrip(bundle, p)).collect();
    out.push(match split {
        Ok(v) => tol.entry(
            "fibers.splitting_roundtrip",
            "psi_p is a diffeomorphism onto S_p x W_p",
            max_of(v),
            1e-9,
        ),
        Err(e) => tol.failed(
            "fibers.splitting_roundtrip",
            "psi_p is a diffeomorphism onto S_p x W_p",
            1e-9,
            e,
        ),
    });
    let wd: Result<Vec<f64>, _> = pts.par_iter().map(|p| fiber_well_defined(bundle, p, nodes)).collect();
    out.push(match wd {
        Ok(v) => tol.entry(
            "fibers.well_defined",
            "S_q = S_p and W_q = W_p for q on the fiber",
            max_of(v),
            1e-9,
        ),
        Err(e) => tol.failed(
            "fibers.well_defined",
            "S_q = S_p and W_q = W_p for q on the fiber",
            1e-9,
            e,
        ),
    });
    out.push(match bundle.check_compatibility(&s.metric, &s.samples) {
        Ok(r) => ReportEntry::flag("fibers.compatibility", "signatures on S, W, H constant", r.passes),
        Err(e) => tol.failed("fibers.compatibility", "signatures on S, W, H constant", 0.5, e),
    });
    let proj: Result<Vec<f64>, _> = s
        .samples
        .iter()
        .map(|x| {
            bundle.horizontal_projector(&s.metric, x).map(|p| {
                p.idempotence_residual()
                    .max(p.self_adjoint_residual())
                    .max(p.kernel_residual())
            })
        })
        .collect();
    out.push(match proj {
        Ok(v) => tol.entry(
            "fibers.horizontal_projector",
            "pr_H idempotent, g-self-adjoint, kills ker dpi",
            max_of(v),
            1e-9,
        ),
        Err(e) => tol.failed(
            "fibers.horizontal_projector",
            "pr_H idempotent, g-self-adjoint, kills ker dpi",
            1e-9,
            e,
        ),
    });
    out
}

/// Split the single chart of `atlas` in two along coordinate 0, the second
/// chart's maps post-composed with `(base, wa, wb) ↦ modify(base, wa, wb)`.
pub fn split_atlas(
    atlas: &ObservationAtlas,
    modify: impl Fn(&[Expr], &[Expr], &[Expr]) -> (Vec<Expr>, Vec<Expr>, Vec<Expr>),
) -> ObservationAtlas {
    let c = &atlas.charts[0];
    let mut first = c.clone();
    first.id = format!("{}-lo", c.id);
    first.domain = c.domain.clone().restrict(0, f64::NEG_INFINITY, 0.3);
    let (b, a, w) = modify(&c.base.components, &c.wa.components, &c.wb.components);
    let n = c.base.dim_in;
    let mut second = c.clone();
    second.id = format!("{}-hi", c.id);
    second.domain = c.domain.clone().restrict(0, -0.3, f64::INFINITY);
    second.base = ExprField::new(n, b);
    second.wa = ExprField::new(n, a);
    second.wb = ExprField::new(n, w);
    let mut out = atlas.clone();
    out.charts = vec![first, second];
    out
}

fn verdict_entry(name: &str, v: &AtlasVerdict, expect: [bool; 3]) -> ReportEntry {
    let got = [v.full, v.wa, v.wb];
    ReportEntry::flag(
        format!("atlas.{name}"),
        format!("W-atlas conditions (full, W_a, W_b) = {expect:?}, observed {got:?}"),
        got == expect,
    )
}

pub(super) fn atlas(s: &Scenario, tol: &Tolerances<'_>) -> Vec<ReportEntry> {
    let Some(bundle) = &s.bundle else { return vec![] };
    let nodes = fiber_nodes(bundle);
    let samples: Vec<Vec<f64>> = s.samples.iter().take(12).cloned().collect();
    let mut out = Vec::new();
    let atlas = bundle_to_atlas(bundle);
    match atlas_to_bundle(&atlas, &samples, nodes) {
        Ok(ab) => {
            let d: Result<Vec<f64>, _> = samples
                .iter()
                .map(|p| {
                    let ds = bundle.fiber_set_distance(p, &ab.bundle, p, FiberKind::S, nodes)?;
                    let dw = bundle.fiber_set_distance(p, &ab.bundle, p, FiberKind::W, nodes)?;
                    Ok::<_, BundleError>(ds.max(dw))
                })
                .collect();
            out.push(match d {
                Ok(v) => tol.entry(
                    "atlas.bundle_roundtrip",
                    "bundle -> atlas -> bundle preserves fibers",
                    max_of(v),
                    1e-9,
                ),
                Err(e) => tol.failed(
                    "atlas.bundle_roundtrip",
                    "bundle -> atlas -> bundle preserves fibers",
                    1e-9,
                    e,
                ),
            });
        }
        Err(e) => out.push(tol.failed(
            "atlas.bundle_roundtrip",
            "bundle -> atlas -> bundle preserves fibers",
            1e-9,
            e,
        )),
    }

    let shift = |b: &[Expr], a: &[Expr], w: &[Expr]| {
        let b2 = b.iter().map(|e| e.clone() + 1.0).collect();
        let a2 = a.iter().map(|e| e.clone() + 0.5).collect();
        (b2, a2, w.to_vec())
    };
    let consistent = split_atlas(&atlas, shift);
    out.push(verdict_entry(
        "consistent_split",
        &check_w_atlas(&consistent, &samples, nodes),
        [true, true, true],
    ));
    if bundle.s_dim() >= 1 && bundle.w_dim() >= 1 {
        let shear = |b: &[Expr], a: &[Expr], w: &[Expr]| {
            let mut a2 = a.to_vec();
            a2[0] = a2[0].clone() + w[0].clone().sin() * 0.3;
            let w2 = w.iter().map(|e| e.clone() + 0.5).collect();
            (b.to_vec(), a2, w2)
        };
        let mixing = |b: &[Expr], a: &[Expr], w: &[Expr]| {
            let mut a2 = a.to_vec();
            a2[0] = a2[0].clone() + w[0].clone().sin() * 0.3;
            let mut w2 = w.to_vec();
            w2[0] = w2[0].clone() + a2[0].clone().sin() * 0.3;
            (b.to_vec(), a2, w2)
        };
        let sheared = split_atlas(&atlas, shear);
        out.push(verdict_entry(
            "shear_split",
            &check_w_atlas(&sheared, &samples, nodes),
            [true, true, false],
        ));
        let mixed = split_atlas(&atlas, mixing);
        out.push(verdict_entry(
            "mixing_split",
            &check_w_atlas(&mixed, &samples, nodes),
            [true, false, false],
        ));
    }
    out
}
