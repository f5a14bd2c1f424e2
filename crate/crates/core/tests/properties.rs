#![allow(clippy::needless_range_loop)]

use mfb_core::expr::Expr;
use mfb_core::field::jacobian;
use mfb_core::harness::{builtin, synthetic_fluid, MetricSpec, Scenario};
use mfb_core::kaluza::frame::{stereo, stereo_inverse};
use mfb_core::kaluza::{decompose, PotentialField};
use mfb_core::{curvature, ExprField, Field};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// `diag(−1, 1, 1, 1) + ε·h` with `h_ij = sin(a_ij·x + b_ij)`, symmetric.
fn wavy_metric(coeffs: &[(f64, f64)]) -> Scenario {
    let mut spec = builtin("warped_kk").unwrap();
    let mut rows = vec![vec![String::new(); 5]; 5];
    let mut k = 0;
    for i in 0..5 {
        for j in i..5 {
            let (a, b) = coeffs[k];
            k += 1;
            let diag = match (i == j, i) {
                (true, 0) | (true, 4) => "-1",
                (true, _) => "1",
                _ => "0",
            };
            let e = format!("{diag} + 0.05*sin({a:?}*x + {b:?}*t + {a:?}*{b:?}*z)");
            rows[i][j] = e.clone();
            rows[j][i] = e;
        }
    }
    spec.metric = MetricSpec::Full { rows };
    spec.killing.clear();
    spec.expect.killing_potential = false;
    spec.samples.count = 4;
    Scenario::from_spec(spec, 0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn riemann_symmetries_hold_for_perturbed_metrics(
        coeffs in prop::collection::vec((-1.5..1.5f64, -1.5..1.5f64), 15)
    ) {
        let s = wavy_metric(&coeffs);
        for x in &s.samples {
            let geo = curvature(&s.metric, x).unwrap();
            prop_assert!(geo.riemann_symmetry_residual() < 1e-9, "{}", geo.riemann_symmetry_residual());
            prop_assert!(geo.christoffel_symmetry_residual() < 1e-12);
        }
    }

    #[test]
    fn decomposition_inverts_reconstruction(seed in any::<u64>(), k in 0usize..50, pressure in 0.0..1.0f64, c in 0.1..10.0f64) {
        let s = Scenario::from_spec(builtin("warped_kk").unwrap(), 0).unwrap();
        let bundle = s.bundle.as_ref().unwrap();
        let x = &s.samples[k];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let Ok(syn) = synthetic_fluid(bundle, &s.metric, x, &s.time_reference, &mut rng, pressure) else {
            return Ok(());
        };
        let g = s.metric.matrix(x);
        let y = PotentialField::new(bundle, &s.metric).eval(x);
        let proj = bundle.horizontal_projector(&s.metric, x).unwrap();
        let d = decompose(&syn.tensor, &g, &y, &proj, &s.time_reference).unwrap();
        prop_assert!((d.mu - syn.mu).abs() < 1e-9);
        prop_assert!((d.e - syn.e).abs() < 1e-9);
        prop_assert!((d.gamma - syn.gamma).abs() < 1e-9);
        for (a, b) in d.x0.iter().zip(&syn.x0) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        prop_assert!(d.is_perfect);

        let dc = decompose(&(&syn.tensor * c), &g, &y, &proj, &s.time_reference).unwrap();
        prop_assert!((dc.mu - c * d.mu).abs() < 1e-9 * c.max(1.0));
        prop_assert!((dc.e - c * d.e).abs() < 1e-9 * c.max(1.0));
        prop_assert!((dc.gamma - c * d.gamma).abs() < 1e-9 * c.max(1.0));
        for (a, b) in dc.x0.iter().zip(&d.x0) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn s3_north_south_transition_is_inversion(w in prop::array::uniform3(-3.0..3.0f64)) {
        let r2: f64 = w.iter().map(|v| v * v).sum();
        prop_assume!(r2 > 1e-2);
        let x = stereo_inverse(&w);
        let south: Vec<f64> = (0..3).map(|i| x[i] / (1.0 + x[3])).collect();
        for i in 0..3 {
            prop_assert!((south[i] - w[i] / r2).abs() < 1e-12);
        }
        let back = stereo(&x);
        for i in 0..3 {
            prop_assert!((back[i] - w[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn round_metric_is_invariant_under_inversion(w in prop::array::uniform3(-3.0..3.0f64)) {
        let r2: f64 = w.iter().map(|v| v * v).sum();
        prop_assume!(r2 > 1e-2);
        let vars = names(&["w1", "w2", "w3"]);
        let inv = ExprField::new(
            3,
            ["w1", "w2", "w3"]
                .iter()
                .map(|c| Expr::parse(&format!("{c}/(w1^2 + w2^2 + w3^2)"), &vars).unwrap())
                .collect(),
        );
        let j = jacobian(&inv, &w);
        let conf = |r2: f64| 4.0 / (1.0 + r2).powi(2);
        let pulled = j.transpose() * &j * conf(1.0 / r2);
        for a in 0..3 {
            for b in 0..3 {
                let want = if a == b { conf(r2) } else { 0.0 };
                prop_assert!((pulled[(a, b)] - want).abs() < 1e-10);
            }
        }
    }
}
