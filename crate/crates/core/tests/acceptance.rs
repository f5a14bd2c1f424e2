//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always print; exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::Instant;

use mfb_core::expr::Expr;
use mfb_core::harness::{
    builtin, fiber_well_defined, random_fluid_fields, resolve_scenario, run_suite, split_atlas, splitting_roundtrip,
    synthetic_fluid, Scenario, Suite,
};
use mfb_core::kaluza::{decompose, recombination_residual, PotentialField};
use mfb_core::multifiber::atlas::{atlas_to_bundle, bundle_to_atlas, AtlasError};
use mfb_core::{Field, ReportEntry};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn scenario(name: &str) -> Scenario {
    resolve_scenario(name, 0).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn with_samples(name: &str, count: usize) -> Scenario {
    let mut spec = builtin(name).unwrap();
    spec.samples.count = count;
    Scenario::from_spec(spec, 0).unwrap()
}

fn suite(s: &Scenario, suite: Suite) -> Vec<ReportEntry> {
    run_suite(s, suite, &BTreeMap::new(), 0).entries
}

/// Every named entry is present and passes at its (default) tolerance.
fn require(entries: &[ReportEntry], scenario: &str, ids: &[&str]) -> Result<Vec<String>, String> {
    ids.iter()
        .map(|id| {
            let e = entries
                .iter()
                .find(|e| e.identity == *id)
                .ok_or_else(|| format!("{scenario}: entry {id} missing"))?;
            if !e.passed() {
                return Err(format!(
                    "{scenario}: {id} = {:.3e} > {:.1e} {}",
                    e.residual,
                    e.tolerance,
                    e.error.clone().unwrap_or_default()
                ));
            }
            Ok(format!("{id}={:.1e}", e.residual))
        })
        .collect()
}

fn check(worst: f64, tol: f64, what: &str) -> Result<String, String> {
    if worst <= tol {
        Ok(format!("{what}={worst:.1e}"))
    } else {
        Err(format!("{what} = {worst:.3e} > {tol:.1e}"))
    }
}

fn flatness() -> Outcome {
    let s = scenario("minkowski5");
    if s.samples.len() != 50 {
        return Err(format!("{} samples", s.samples.len()));
    }
    let e = suite(&s, Suite::Curvature);
    Ok(require(&e, "minkowski5", &["curvature.riemann_zero", "curvature.einstein_zero"])?.join(" "))
}

fn constant_curvature() -> Outcome {
    let s = scenario("round_s3(1)");
    let e = suite(&s, Suite::Curvature);
    Ok(require(
        &e,
        "round_s3(1)",
        &["curvature.ricci_constant", "curvature.einstein_constant"],
    )?
    .join(" "))
}

fn bianchi() -> Outcome {
    let mut out = Vec::new();
    for name in ["warped_kk", "product_r13_s1_s3"] {
        let e = suite(&scenario(name), Suite::Bianchi);
        out.extend(require(&e, name, &["bianchi.divergence", "bianchi.fd_cross_check"])?);
    }
    Ok(out.join(" "))
}

fn electromagnetic_structure() -> Outcome {
    let mut out = Vec::new();
    for name in ["flat_kk", "warped_kk"] {
        let e = suite(&scenario(name), Suite::Kaluza);
        out.extend(require(
            &e,
            name,
            &[
                "potential.df",
                "potential.norm",
                "potential.killing",
                "potential.geodesic",
            ],
        )?);
    }
    Ok(out.join(" "))
}

fn killing_maxwell_bridge() -> Outcome {
    let mut out = Vec::new();
    for name in ["minkowski5", "flat_kk", "warped_kk", "product_r13_s1_s3"] {
        let s = scenario(name);
        assert!(s.spec.expect.killing_potential);
        let e = suite(&s, Suite::Kaluza);
        out.extend(require(&e, name, &["maxwell.killing_bridge"])?);
    }
    Ok(out.join(" "))
}

fn averaging() -> Outcome {
    let e = suite(&scenario("u_periodic"), Suite::Kaluza);
    Ok(require(
        &e,
        "u_periodic",
        &["average.norm", "average.killing", "average.component"],
    )?
    .join(" "))
}

fn decomposition_roundtrip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0_f64;
    let mut scale_x0 = 0.0_f64;
    let mut scale_coeff = 0.0_f64;
    let mut count = 0;
    for name in ["flat_kk", "warped_kk"] {
        let s = scenario(name);
        let bundle = s.bundle.as_ref().unwrap();
        for (k, x) in s.samples.iter().enumerate() {
            let pressure = if k % 2 == 0 { 0.0 } else { 0.5 };
            let syn = synthetic_fluid(bundle, &s.metric, x, &s.time_reference, &mut rng, pressure)
                .map_err(|e| e.to_string())?;
            let g = s.metric.matrix(x);
            let y = PotentialField::new(bundle, &s.metric).eval(x);
            let proj = bundle.horizontal_projector(&s.metric, x).map_err(|e| e.to_string())?;
            let d = decompose(&syn.tensor, &g, &y, &proj, &s.time_reference).map_err(|e| e.to_string())?;
            let errs = [d.mu - syn.mu, d.e - syn.e, d.gamma - syn.gamma];
            worst = errs
                .iter()
                .chain(&d.x0.iter().zip(&syn.x0).map(|(a, b)| a - b).collect::<Vec<_>>())
                .fold(worst, |m, v| m.max(v.abs()));
            let c = 2.5;
            let dc = decompose(&(&syn.tensor * c), &g, &y, &proj, &s.time_reference).map_err(|e| e.to_string())?;
            scale_x0 = dc.x0.iter().zip(&d.x0).fold(scale_x0, |m, (a, b)| m.max((a - b).abs()));
            scale_coeff = [(dc.mu, d.mu), (dc.e, d.e), (dc.gamma, d.gamma)]
                .iter()
                .fold(scale_coeff, |m, (a, b)| m.max((a - c * b).abs() / b.abs().max(1.0)));
            count += 1;
        }
    }
    if count != 100 {
        return Err(format!("{count} fluids"));
    }
    Ok([
        check(worst, 1e-9, "roundtrip")?,
        check(scale_x0, 1e-12, "scaled_x0")?,
        check(scale_coeff, 1e-9, "scaled_coeffs")?,
    ]
    .join(" "))
}

fn recombination() -> Outcome {
    let s = scenario("warped_kk");
    let bundle = s.bundle.as_ref().unwrap();
    let y = PotentialField::new(bundle, &s.metric);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let dust = random_fluid_fields(&mut rng, s.dim(), false);
    let fluid = random_fluid_fields(&mut rng, s.dim(), true);
    let per_point: Result<Vec<[f64; 3]>, String> = s
        .samples
        .par_iter()
        .map(|x| {
            let mut w = [0.0_f64; 3];
            for f in [&dust, &fluid] {
                let r = recombination_residual(&s.metric, &y, f, x).map_err(|e| e.to_string())?;
                w[0] = w[0].max(r.classical_residual());
                w[1] = w[1].max(r.x_form_residual());
                w[2] = w[2].max(r.oracle_residual());
            }
            Ok(w)
        })
        .collect();
    let per_point = per_point?;
    if per_point.len() != 50 {
        return Err(format!("{} points", per_point.len()));
    }
    let worst = |k: usize| per_point.iter().fold(0.0_f64, |m, w| m.max(w[k]));
    Ok([
        check(worst(0), 1e-6, "classical")?,
        check(worst(1), 1e-6, "x_form")?,
        check(worst(2), 1e-6, "finite_difference")?,
    ]
    .join(" "))
}

fn dynamics() -> Outcome {
    let s = scenario("flat_kk(1.0)");
    let l = s.spec.lorentz.as_ref().unwrap();
    assert_eq!((l.charge_ratio, l.step, l.t_end), (0.5, 1e-3, 20.0));
    let e = suite(&s, Suite::Dynamics);
    Ok(require(
        &e,
        "flat_kk",
        &[
            "dynamics.geodesic_vs_lorentz",
            "dynamics.larmor",
            "dynamics.charge_drift",
            "dynamics.rk4_order",
        ],
    )?
    .join(" "))
}

fn fibers_and_atlases() -> Outcome {
    let mut out = Vec::new();
    for name in ["product_r13_s1_s3", "twisted_phi"] {
        let s = with_samples(name, 100);
        let bundle = s.bundle.as_ref().unwrap();
        let rt: Result<Vec<f64>, _> = s.samples.par_iter().map(|p| splitting_roundtrip(bundle, p)).collect();
        let rt = rt.map_err(|e| e.to_string())?;
        if rt.len() != 100 {
            return Err(format!("{} samples", rt.len()));
        }
        out.push(check(
            rt.iter().cloned().fold(0.0, f64::max),
            1e-9,
            &format!("{name}.psi_roundtrip"),
        )?);
        let wd: Result<Vec<f64>, _> = s
            .samples
            .par_iter()
            .take(20)
            .map(|p| fiber_well_defined(bundle, p, 3))
            .collect();
        out.push(check(
            wd.map_err(|e| e.to_string())?.into_iter().fold(0.0, f64::max),
            1e-9,
            &format!("{name}.well_defined"),
        )?);
    }

    let s = scenario("product_r13_s1_s3");
    let e = suite(&s, Suite::Atlas);
    out.extend(require(
        &e,
        "product_r13_s1_s3",
        &[
            "atlas.bundle_roundtrip",
            "atlas.consistent_split",
            "atlas.shear_split",
            "atlas.mixing_split",
        ],
    )?);

    let bundle = s.bundle.as_ref().unwrap();
    let atlas = bundle_to_atlas(bundle);
    let samples: Vec<Vec<f64>> = s.samples.iter().take(12).cloned().collect();
    let twist = |b: &[Expr], a: &[Expr], w: &[Expr]| {
        let mut b2 = b.to_vec();
        b2[1] = b2[1].clone() + a[0].clone().sin() * 0.2;
        (b2, a.to_vec(), w.to_vec())
    };
    match atlas_to_bundle(&split_atlas(&atlas, twist), &samples, 3) {
        Err(AtlasError::AtlasInconsistent { .. }) => out.push("inconsistency=fired".into()),
        other => return Err(format!("base twist not flagged inconsistent: {:?}", other.map(|_| ()))),
    }

    let mut touching = atlas.clone();
    let mut lo = atlas.charts[0].clone();
    lo.id = "lo".into();
    lo.domain = lo.domain.restrict(1, -2.0, 0.0);
    let mut hi = atlas.charts[0].clone();
    hi.id = "hi".into();
    hi.domain = hi.domain.restrict(1, 0.0, 2.0);
    touching.charts = vec![lo, hi];
    let mut near = samples[0].clone();
    near[1] = -2e-10;
    let mut far = near.clone();
    far[1] = 2e-10;
    match atlas_to_bundle(&touching, &[near, far], 3) {
        Err(AtlasError::NonHausdorffQuotient { .. }) => out.push("non_hausdorff=fired".into()),
        other => {
            return Err(format!(
                "touching charts not flagged non-Hausdorff: {:?}",
                other.map(|_| ())
            ))
        }
    }
    Ok(out.join(" "))
}

fn spectra() -> Outcome {
    let mut out = require(
        &suite(&scenario("minkowski5"), Suite::Spectrum),
        "minkowski5",
        &[
            "spectrum.s1.lambda1",
            "spectrum.s1.convergence",
            "spectrum.s1.zero_mode",
        ],
    )?;
    out.extend(require(
        &suite(&scenario("product_r13_s1_s3"), Suite::Spectrum),
        "product_r13_s1_s3",
        &[
            "spectrum.s3.radius",
            "spectrum.s3.lambda1",
            "spectrum.s3.roundness_gate",
        ],
    )?);
    Ok(out.join(" "))
}

fn frame_pullback() -> Outcome {
    let s = scenario("twisted_phi");
    if s.samples.len() != 30 {
        return Err(format!("{} samples", s.samples.len()));
    }
    let e = suite(&s, Suite::Kaluza);
    Ok(require(&e, "twisted_phi", &["frame.residual", "frame.gram"])?.join(" "))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("1 flatness", flatness),
        ("2 constant curvature", constant_curvature),
        ("3 bianchi identity", bianchi),
        ("4 electromagnetic structure", electromagnetic_structure),
        ("5 killing-maxwell bridge", killing_maxwell_bridge),
        ("6 metric averaging", averaging),
        ("7 decomposition round-trip", decomposition_roundtrip),
        ("8 recombination identity", recombination),
        ("9 dynamics equivalence", dynamics),
        ("10 fibers and atlases", fibers_and_atlases),
        ("11 spectra", spectra),
        ("12 frame pullback", frame_pullback),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (name, f) in criteria {
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {name:<30} {:>6.1}s  {detail}", t.elapsed().as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL {name:<30} {:>6.1}s  {why}", t.elapsed().as_secs_f64());
            }
        }
    }
    println!(
        "acceptance: {} of 12 passed in {:.1}s",
        12 - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
