//! Electromagnetism, fluid, dynamics and spectrum suites.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Scenario, Tolerances};
use crate::chart::{Chart, ChartManifold, Domain, MetricField};
use crate::expr::Expr;
use crate::field::{ExprField, Field};
use crate::kaluza::dynamics::lorentz_residual_along;
use crate::kaluza::fluid::{decompose, reconstruct};
use crate::kaluza::potential::BaseFieldStrength;
use crate::kaluza::residuals::{recombination_residual, theorem1_residuals, theorem2_residuals, FluidFields};
use crate::kaluza::spectrum::{fiber_spectrum, SpectrumFiber};
use crate::kaluza::{
    average_metric, build_potential, frame_pullback, geodesic_integrate, lorentz_integrate, KaluzaError, PotentialField,
};
use crate::linalg::max_abs_slice;
use crate::multifiber::MultiFiberBundle;
use crate::report::{worst_by_identity, ReportEntry, Residual};
use crate::tensor::{curvature, divergence2, ExteriorD, Lowered};

fn max_of<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    it.into_iter()
        .fold(0.0, |a, v| if v.is_nan() || a.is_nan() { f64::NAN } else { a.max(v) })
}

/// `amp · sin(k·x + φ)` with random `k ∈ [−1, 1]ⁿ`, `φ ∈ [0, 2π)`.
fn wave<R: Rng>(rng: &mut R, n: usize, amp: f64) -> Expr {
    let mut arg = Expr::c(rng.gen_range(0.0..std::f64::consts::TAU));
    for i in 0..n {
        arg = arg + Expr::var(i) * rng.gen_range(-1.0..1.0);
    }
    arg.sin() * amp
}

/// Random smooth fluid fields on `n` coordinates: `μ = 2 + 0.3 sin(·)`,
/// `e`, `γ`, `X₀` and (optionally) symmetric `P` built from random waves.
pub fn random_fluid_fields<R: Rng>(rng: &mut R, n: usize, with_p: bool) -> FluidFields {
    let scalar = |rng: &mut R, base: f64, amp: f64| ExprField::new(n, vec![wave(rng, n, amp) + base]);
    let mu = scalar(rng, 2.0, 0.3);
    let e = scalar(rng, 0.2, 0.4);
    let gamma = scalar(rng, 0.5, 0.3);
    let x0 = ExprField::new(
        n,
        (0..n)
            .map(|i| wave(rng, n, 0.3) + if i == 0 { 1.0 } else { 0.0 })
            .collect(),
    );
    let p = with_p.then(|| {
        let mut comps = vec![Expr::zero(); n * n];
        for i in 0..n {
            for j in i..n {
                let w = wave(rng, n, 0.2);
                comps[i * n + j] = w.clone();
                comps[j * n + i] = w;
            }
        }
        ExprField::new(n, comps)
    });
    FluidFields { mu, e, gamma, x0, p }
}

/// Base four-velocity `(γ, γ v)` (unit for a Minkowski base at the start)
/// and the total-space velocity `(v₀, u̇₀)` with `u̇₀ + A(v₀) = q`, where
/// `A_a = −g_au`.
pub fn kk_start_velocity(g: &DMatrix<f64>, spatial: &[f64], q: f64) -> (Vec<f64>, Vec<f64>) {
    let v2: f64 = spatial.iter().map(|v| v * v).sum();
    let gamma = 1.0 / (1.0 - v2).sqrt();
    let mut v0 = vec![gamma];
    v0.extend(spatial.iter().map(|v| gamma * v));
    let b = v0.len();
    let a_dot_v: f64 = (0..b).map(|a| -g[(a, b)] * v0[a]).sum();
    let mut full = v0.clone();
    full.push(q - a_dot_v);
    (v0, full)
}

/// Closed-form orbit for `F_xy = −B`, start velocity along `+x` with
/// spatial speed `v`, at proper time `tau`.
pub fn larmor_position(start: &[f64], v: f64, q: f64, b: f64, tau: f64) -> Vec<f64> {
    let gamma = 1.0 / (1.0 - v * v).sqrt();
    let w = q * b;
    let r = gamma * v / w;
    vec![
        start[0] + gamma * tau,
        start[1] + r * (w * tau).sin(),
        start[2] + r * (1.0 - (w * tau).cos()),
        start[3],
    ]
}

/// A synthetic fluid at `x`: `X₀` the normalized horizontal part of a
/// perturbed time reference, and `P = p (g|_H + X₀♭⊗X₀♭)` horizontal.
pub struct SyntheticFluid {
    pub tensor: DMatrix<f64>,
    pub mu: f64,
    pub e: f64,
    pub gamma: f64,
    pub x0: Vec<f64>,
}

pub fn synthetic_fluid<R: Rng>(
    bundle: &MultiFiberBundle,
    metric: &MetricField,
    x: &[f64],
    time_ref: &[f64],
    rng: &mut R,
    pressure: f64,
) -> Result<SyntheticFluid, KaluzaError> {
    let n = x.len();
    let g = metric.matrix(x);
    let proj = bundle.horizontal_projector(metric, x)?;
    let y = PotentialField::new(bundle, metric).eval(x);
    let mut v: Vec<f64> = time_ref.iter().map(|t| t + rng.gen_range(-0.3..0.3)).collect();
    v = proj.apply(&v);
    let vv = DVector::from_column_slice(&v);
    let norm = (vv.transpose() * &g * &vv)[(0, 0)];
    if norm >= 0.0 {
        return Err(KaluzaError::Invalid("perturbed reference is not timelike".into()));
    }
    let x0: Vec<f64> = v.iter().map(|c| c / (-norm).sqrt()).collect();
    let mu = rng.gen_range(0.5..3.0);
    let e = rng.gen_range(-1.0..1.0);
    let alpha = rng.gen_range(-1.0..1.0);
    let gamma = alpha + e * e / mu;
    let pr = &proj.projector_matrix;
    let xl = &g * DVector::from_column_slice(&x0);
    let p = (pr.transpose() * &g * pr + &xl * xl.transpose()) * pressure;
    let tensor = reconstruct(&g, &y, mu, e, gamma, &x0, &p);
    debug_assert_eq!(tensor.nrows(), n);
    Ok(SyntheticFluid {
        tensor,
        mu,
        e,
        gamma,
        x0,
    })
}

fn potential_entries(s: &Scenario, bundle: &MultiFiberBundle, tol: &Tolerances<'_>) -> Vec<ReportEntry> {
    let pot = match build_potential(bundle, &s.metric, &s.samples) {
        Ok(p) => p,
        Err(e) => return vec![tol.failed("potential.build", "unit oriented fiber tangent exists", 0.0, e)],
    };
    let d = &pot.diagnostics;
    let mut out = vec![
        tol.entry("potential.norm", "g(Y, Y) = -1", d.norm_residual, 1e-10),
        tol.entry(
            "potential.tangency",
            "dpi(Y) = 0 and df(Y) = 0",
            d.tangency_residual,
            1e-9,
        ),
        tol.entry("potential.df", "dF = 0", d.df_residual, 1e-10),
        tol.entry(
            "potential.antisymmetry",
            "F antisymmetric",
            d.antisymmetry_residual,
            0.0,
        ),
    ];
    if s.spec.expect.killing_potential {
        out.push(tol.entry("potential.killing", "L_Y g = 0", d.killing_residual, 1e-9));
        out.push(tol.entry("potential.geodesic", "nabla_Y Y = 0", d.geodesic_residual, 1e-9));
        let flat = Lowered {
            metric: &s.metric,
            vector: &pot.field,
        };
        let f = ExteriorD { form: &flat };
        let bridge: Result<Vec<f64>, KaluzaError> = s
            .samples
            .par_iter()
            .map(|x| {
                let n = x.len();
                let div = divergence2(&s.metric, x, &f)?;
                let geo = curvature(&s.metric, x)?;
                let y = pot.field.eval(x);
                let ric_y = geo.ricci_matrix() * DVector::from_column_slice(&y);
                let ric_up = DMatrix::from_row_slice(n, n, &geo.ginv) * ric_y;
                Ok((0..n).fold(0.0_f64, |a, k| a.max((div[k] + 2.0 * ric_up[k]).abs())))
            })
            .collect();
        out.push(match bridge {
            Ok(v) => tol.entry(
                "maxwell.killing_bridge",
                "div F = -2 eRic(Y) for Killing unit Y",
                max_of(v),
                1e-6,
            ),
            Err(e) => tol.failed(
                "maxwell.killing_bridge",
                "div F = -2 eRic(Y) for Killing unit Y",
                1e-6,
                e,
            ),
        });
    }
    out
}

/// Fiber length constant (relative 1e-8) under unit coordinate steps of
/// size 1e-3 around `x`.
fn uniform_fiber_length(bundle: &MultiFiberBundle, metric: &MetricField, x: &[f64]) -> bool {
    let field = PotentialField::new(bundle, metric);
    let Ok(l0) = field.fiber_length(x, 128) else {
        return false;
    };
    (0..x.len()).all(|k| {
        let mut p = x.to_vec();
        p[k] += 1e-3;
        field.fiber_length(&p, 128).is_ok_and(|l| ((l - l0) / l0).abs() < 1e-8)
    })
}

fn averaging_entries(s: &Scenario, bundle: &MultiFiberBundle, tol: &Tolerances<'_>) -> Vec<ReportEntry> {
    let pts: Vec<&Vec<f64>> = s.samples.iter().take(2).collect();
    let avgs: Result<Vec<_>, _> = pts
        .par_iter()
        .map(|x| average_metric(bundle, &s.metric, x, 64))
        .collect();
    let avgs = match avgs {
        Ok(a) => a,
        Err(e) => return vec![tol.failed("average.norm", "averaged metric: gbar(Y, Y) = -1", 1e-9, e)],
    };
    let mut out = vec![tol.entry(
        "average.norm",
        "averaged metric: gbar(Y, Y) = -1",
        max_of(avgs.iter().map(|a| a.norm_residual)),
        1e-9,
    )];
    // the unit-Y flow is a circle action only where neighbouring fibers share one length
    if pts.iter().all(|x| uniform_fiber_length(bundle, &s.metric, x)) {
        out.push(tol.entry(
            "average.killing",
            "Y is Killing for gbar",
            max_of(avgs.iter().map(|a| a.killing_residual)),
            1e-8,
        ));
    }
    if let Some((i, j, v)) = s.spec.expect.averaged_component {
        let n = s.dim();
        out.push(tol.entry(
            "average.component",
            "oscillating component averages to its mean",
            max_of(avgs.iter().map(|a| (a.metric[i * n + j] - v).abs())),
            1e-9,
        ));
    }
    if s.spec.expect.killing_potential {
        out.push(
            tol.entry(
                "average.invariance",
                "flow-invariant metric: gbar = g",
                max_of(
                    avgs.iter()
                        .map(|a| (a.matrix() - s.metric.matrix(&a.point)).abs().max()),
                ),
                1e-10,
            ),
        );
    }
    out
}

fn decomposition_entries(s: &Scenario, bundle: &MultiFiberBundle, tol: &Tolerances<'_>, seed: u64) -> Vec<ReportEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xdec0);
    let mut worst = 0.0_f64;
    let mut scale = 0.0_f64;
    let mut perfect = true;
    for (k, x) in s.samples.iter().take(10).enumerate() {
        let pressure = if k % 2 == 0 { 0.0 } else { 0.4 };
        let mut run = || -> Result<(f64, f64, bool), KaluzaError> {
            let syn = synthetic_fluid(bundle, &s.metric, x, &s.time_reference, &mut rng, pressure)?;
            let g = s.metric.matrix(x);
            let y = PotentialField::new(bundle, &s.metric).eval(x);
            let proj = bundle.horizontal_projector(&s.metric, x)?;
            let d = decompose(&syn.tensor, &g, &y, &proj, &s.time_reference)?;
            let err = [(d.mu - syn.mu).abs(), (d.e - syn.e).abs(), (d.gamma - syn.gamma).abs()]
                .into_iter()
                .chain(d.x0.iter().zip(&syn.x0).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            let d2 = decompose(&(&syn.tensor * 3.0), &g, &y, &proj, &s.time_reference)?;
            let serr = [
                (d2.mu - 3.0 * d.mu).abs(),
                (d2.e - 3.0 * d.e).abs(),
                (d2.gamma - 3.0 * d.gamma).abs(),
            ]
            .into_iter()
            .chain(d2.x0.iter().zip(&d.x0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
            Ok((err, serr, d.is_perfect))
        };
        match run() {
            Ok((e, se, p)) => {
                worst = worst.max(e);
                scale = scale.max(se);
                perfect &= p;
            }
            Err(e) => return vec![tol.failed("decompose.roundtrip", "decompose(reconstruct(d)) = d", 1e-9, e)],
        }
    }
    vec![
        tol.entry("decompose.roundtrip", "decompose(reconstruct(d)) = d", worst, 1e-9),
        tol.entry(
            "decompose.scale_equivariance",
            "decompose(cG) = (c mu, c e, c gamma, X0)",
            scale,
            1e-9,
        ),
        ReportEntry::flag(
            "decompose.perfect_flag",
            "horizontal pressure is perfect: P_h(Y) = 0",
            perfect,
        ),
    ]
}

fn recombination_entries(s: &Scenario, bundle: &MultiFiberBundle, tol: &Tolerances<'_>, seed: u64) -> Vec<ReportEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7ec0);
    let n = s.dim();
    let dust = random_fluid_fields(&mut rng, n, false);
    let fluid = random_fluid_fields(&mut rng, n, true);
    let y = PotentialField::new(bundle, &s.metric);
    let pts: Vec<&Vec<f64>> = s.samples.iter().take(10).collect();
    let per_point: Result<Vec<Vec<Residual>>, KaluzaError> = pts
        .par_iter()
        .map(|x| {
            let mut out = Vec::new();
            for (tag, f) in [("dust", &dust), ("fluid", &fluid)] {
                for mut r in recombination_residual(&s.metric, &y, f, x)?.residuals() {
                    r.identity = format!("{}.{tag}", r.identity);
                    out.push(r);
                }
            }
            let t1 = theorem1_residuals(&s.metric, &y, &dust, x)?;
            let t2 = theorem2_residuals(&s.metric, &y, &dust, x)?;
            let get = |v: &[Residual], id: &str| {
                v.iter()
                    .find(|r| r.identity == id)
                    .map(|r| r.components.clone())
                    .unwrap_or_default()
            };
            let mu = dust.mu.eval(x)[0];
            let mut gap = 0.0_f64;
            for (a, b) in [
                ("dust.conservation.mass", "fluid.energy.x0"),
                ("dust.conservation.charge", "fluid.charge"),
                ("dust.lorentz", "fluid.apparent_motion"),
            ] {
                gap = get(&t1, a)
                    .iter()
                    .zip(get(&t2, b))
                    .fold(gap, |m, (p, q)| m.max((p - q).abs()));
            }
            gap = get(&t1, "dust.free_fall")
                .iter()
                .zip(get(&t2, "fluid.motion"))
                .fold(gap, |m, (p, q)| m.max((mu * p - q).abs()));
            out.push(Residual::scalar(
                "fluid.reduces_to_dust",
                "P = 0: fluid laws reduce to the dust laws",
                gap,
            ));
            Ok(out)
        })
        .collect();
    match per_point {
        Ok(v) => worst_by_identity(v.iter().flatten())
            .into_iter()
            .map(|(id, reference, val)| {
                let default = if id == "fluid.reduces_to_dust" { 1e-12 } else { 1e-6 };
                tol.entry(&id, &reference, val, default)
            })
            .collect(),
        Err(e) => vec![tol.failed("recombination", "div G = recombined law expressions", 1e-6, e)],
    }
}

fn dust_entries(s: &Scenario, bundle: &MultiFiberBundle, tol: &Tolerances<'_>) -> Vec<ReportEntry> {
    // constant dust at rest: every law holds exactly on a flat product
    let n = s.dim();
    let fields = FluidFields {
        mu: ExprField::new(n, vec![Expr::one()]),
        e: ExprField::zeros(n, 1),
        gamma: ExprField::zeros(n, 1),
        x0: ExprField::coordinate(n, 0),
        p: None,
    };
    let y = PotentialField::new(bundle, &s.metric);
    let per_point: Result<Vec<Vec<Residual>>, KaluzaError> = s
        .samples
        .par_iter()
        .map(|x| {
            let mut r = theorem1_residuals(&s.metric, &y, &fields, x)?;
            r.extend(theorem2_residuals(&s.metric, &y, &fields, x)?);
            Ok(r)
        })
        .collect();
    match per_point {
        Ok(v) => worst_by_identity(v.iter().flatten())
            .into_iter()
            .map(|(id, reference, val)| tol.entry(&id, &reference, val, 1e-10))
            .collect(),
        Err(e) => vec![tol.failed("dust", "charged dust laws", 1e-10, e)],
    }
}

fn frame_entries(s: &Scenario, bundle: &MultiFiberBundle, tol: &Tolerances<'_>) -> Vec<ReportEntry> {
    match frame_pullback(bundle, &s.samples) {
        Ok(fp) => vec![
            tol.entry("frame.residual", "T f(pulled X_j) = X_j o f", fp.residual, 1e-8),
            // ratio below one iff the Gram determinant exceeds 1e-8
            tol.entry(
                "frame.gram",
                "pulled frame is a basis: Gram determinant > 1e-8 (as 1e-8/det)",
                1e-8 / fp.min_gram,
                1.0,
            ),
        ],
        Err(e) => vec![tol.failed("frame.residual", "T f(pulled X_j) = X_j o f", 1e-8, e)],
    }
}

pub(super) fn kaluza(s: &Scenario, tol: &Tolerances<'_>, seed: u64) -> Vec<ReportEntry> {
    let Some(bundle) = &s.bundle else { return vec![] };
    let mut out = Vec::new();
    if bundle.s_dim() == 1 {
        out.extend(potential_entries(s, bundle, tol));
        if bundle.s_factor.periods[0].is_some() {
            out.extend(averaging_entries(s, bundle, tol));
        }
        out.extend(decomposition_entries(s, bundle, tol, seed));
        out.extend(recombination_entries(s, bundle, tol, seed));
        if s.spec.expect.flat {
            out.extend(dust_entries(s, bundle, tol));
        }
    }
    if bundle.w_dim() == 3 {
        out.extend(frame_entries(s, bundle, tol));
    }
    out
}

pub(super) fn dynamics(s: &Scenario, tol: &Tolerances<'_>) -> Vec<ReportEntry> {
    let (Some(bundle), Some(l)) = (&s.bundle, &s.spec.lorentz) else {
        return vec![];
    };
    let run = || -> Result<Vec<ReportEntry>, KaluzaError> {
        let b = l.start.len();
        let base_metric = s.base_metric(b).map_err(|e| KaluzaError::Invalid(e.to_string()))?;
        let base_chart = Chart::new("base", s.spec.coordinates[..b].to_vec(), Domain::whole(b))
            .map_err(|e| KaluzaError::Invalid(e.to_string()))?;
        let base = ChartManifold::single(base_chart);
        let mut x0 = l.start.clone();
        x0.resize(s.dim(), 0.0);
        let (v0, v_total) = kk_start_velocity(&s.metric.matrix(&x0), &l.start_velocity, l.charge_ratio);
        let y = PotentialField::new(bundle, &s.metric);
        let f_base = BaseFieldStrength {
            potential: &y,
            base_dim: b,
            fiber_coords: x0[b..].to_vec(),
        };
        let geo = geodesic_integrate(&s.manifold, &s.metric, &s.killing, &x0, &v_total, l.t_end, l.step)?;
        let lor = lorentz_integrate(
            &base,
            &base_metric,
            &f_base,
            l.charge_ratio,
            &l.start,
            &v0,
            l.t_end,
            l.step,
        )?;
        let mut out = Vec::new();
        if let Some(k) = s.killing.iter().position(|(name, _)| name == "du") {
            out.push(tol.entry(
                "dynamics.charge_drift",
                "g(v, d_u) conserved along geodesics",
                geo.killing_drift(k),
                1e-8,
            ));
        }
        out.push(tol.entry(
            "dynamics.speed_drift",
            "g(v, v) conserved along geodesics",
            geo.speed_drift(),
            1e-8,
        ));
        let dev = geo
            .rows
            .iter()
            .zip(&lor.rows)
            .map(|(a, c)| {
                max_abs_slice(
                    &a.coords[..b]
                        .iter()
                        .zip(&c.coords)
                        .map(|(p, q)| p - q)
                        .collect::<Vec<_>>(),
                )
            })
            .fold(0.0, f64::max);
        out.push(tol.entry(
            "dynamics.geodesic_vs_lorentz",
            "projected free fall = Lorentz motion",
            dev,
            1e-6,
        ));
        let along = lorentz_residual_along(&geo, &s.metric, &y, &base_metric, &f_base)?;
        out.push(tol.entry(
            "dynamics.lorentz_along_geodesic",
            "base acceleration of a geodesic = q eF(v)",
            along,
            1e-6,
        ));

        if let (Some(bf), [v, rest @ ..]) = (l.magnetic_field, l.start_velocity.as_slice()) {
            if rest.iter().all(|c| *c == 0.0) {
                let larmor = lor
                    .rows
                    .iter()
                    .map(|r| {
                        let e = larmor_position(&l.start, *v, l.charge_ratio, bf, r.t);
                        (0..b).map(|k| (r.coords[k] - e[k]).abs()).fold(0.0, f64::max)
                    })
                    .fold(0.0, f64::max);
                out.push(tol.entry(
                    "dynamics.larmor",
                    "uniform field: closed-form Larmor orbit",
                    larmor,
                    1e-5,
                ));
                let err = |h: f64| -> Result<f64, KaluzaError> {
                    let t = lorentz_integrate(&base, &base_metric, &f_base, l.charge_ratio, &l.start, &v0, l.t_end, h)?;
                    let last = t.last();
                    let e = larmor_position(&l.start, *v, l.charge_ratio, bf, last.t);
                    Ok((0..b).map(|k| (last.coords[k] - e[k]).abs()).fold(0.0, f64::max))
                };
                let ratio = err(0.2)? / err(0.1)?;
                out.push(tol.entry(
                    "dynamics.rk4_order",
                    "halving the step divides the error by 16 (|ratio - 16|)",
                    (ratio - 16.0).abs(),
                    4.0,
                ));
            }
        }
        Ok(out)
    };
    run().unwrap_or_else(|e| vec![tol.failed("dynamics", "geodesic and Lorentz integration", 0.0, e)])
}

pub(super) fn spectrum(s: &Scenario, tol: &Tolerances<'_>) -> Vec<ReportEntry> {
    let Some(bundle) = &s.bundle else { return vec![] };
    let x = &s.samples[0];
    let mut out = Vec::new();
    if bundle.s_dim() == 1 && bundle.s_factor.periods[0].is_some() {
        let run = || -> Result<Vec<ReportEntry>, KaluzaError> {
            let a = fiber_spectrum(bundle, &s.metric, x, SpectrumFiber::S1, 256)?;
            let c = fiber_spectrum(bundle, &s.metric, x, SpectrumFiber::S1, 512)?;
            let exact = (std::f64::consts::TAU / a.scale).powi(2);
            let (ea, ec) = ((a.eigenvalues[1] - exact).abs(), (c.eigenvalues[1] - exact).abs());
            Ok(vec![
                tol.entry("spectrum.s1.lambda1", "circle: lambda_1 = (2 pi / l)^2", ea, 1e-3),
                tol.entry(
                    "spectrum.s1.convergence",
                    "second-order convergence (|ratio - 4|)",
                    (ea / ec - 4.0).abs(),
                    0.2,
                ),
                tol.entry(
                    "spectrum.s1.zero_mode",
                    "lambda_0 = 0 with constant eigenvector",
                    a.eigenvalues[0].abs() + a.constant_mode_residual,
                    1e-9,
                ),
                ReportEntry::flag(
                    "spectrum.s1.multiplicity",
                    "lambda_1 has multiplicity 2",
                    a.multiplicities[1] == 2,
                ),
            ])
        };
        out.extend(run().unwrap_or_else(|e| vec![tol.failed("spectrum.s1", "circle spectrum", 0.0, e)]));
    }
    if let (3, Some(r)) = (bundle.w_dim(), s.spec.expect.s3_radius) {
        let run = || -> Result<Vec<ReportEntry>, KaluzaError> {
            let sp = fiber_spectrum(bundle, &s.metric, x, SpectrumFiber::S3, 4)?;
            let mut out = vec![
                tol.entry(
                    "spectrum.s3.radius",
                    "induced fiber metric is round of the declared radius",
                    (sp.scale - r).abs(),
                    1e-8,
                ),
                ReportEntry::flag(
                    "spectrum.s3.lambda1",
                    "round S3: lambda_1 = 3/r^2 with multiplicity 4",
                    (sp.eigenvalues[1] - 3.0 / (r * r)).abs() < 1e-8 && sp.multiplicities[1] == 4,
                ),
            ];
            let perturbed = perturb_w_metric(s)?;
            let gate = matches!(
                fiber_spectrum(bundle, &perturbed, x, SpectrumFiber::S3, 4),
                Err(KaluzaError::NotRoundSphere(_))
            );
            out.push(ReportEntry::flag(
                "spectrum.s3.roundness_gate",
                "perturbed fiber metric is rejected as not round",
                gate,
            ));
            Ok(out)
        };
        out.extend(run().unwrap_or_else(|e| vec![tol.failed("spectrum.s3", "round sphere spectrum", 0.0, e)]));
    }
    out
}

/// The scenario metric with its first `W` diagonal component scaled by
/// `1 + 0.01 w1`.
fn perturb_w_metric(s: &Scenario) -> Result<MetricField, KaluzaError> {
    let n = s.dim();
    let k = n - 3;
    let comps = &s.metric.tensor.components.components;
    let rows = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let c = comps[i * n + j].clone();
                    if i == k && j == k {
                        c * (Expr::one() + Expr::var(k) * 0.01)
                    } else {
                        c
                    }
                })
                .collect()
        })
        .collect();
    let sig = crate::chart::Signature::new(s.spec.signature[0], s.spec.signature[1]);
    MetricField::new(s.metric.chart().clone(), rows, sig).map_err(|e| KaluzaError::Invalid(e.to_string()))
}
