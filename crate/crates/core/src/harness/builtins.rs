//! Scenarios available by name without a file.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::scenario::{BundleSpec, Expectations, LorentzSpec, MetricSpec, SampleSpec, ScenarioSpec};

pub const BUILTIN_NAMES: &[&str] = &[
    "minkowski5",
    "flat_kk(B)",
    "warped_kk",
    "product_r13_s1_s3",
    "u_periodic",
    "twisted_phi",
    "round_s3(r)",
];

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn kk_coords() -> Vec<String> {
    strings(&["t", "x", "y", "z", "u"])
}

fn fiber_coords() -> Vec<String> {
    strings(&["t", "x", "y", "z", "u", "w1", "w2", "w3"])
}

fn u_period() -> BTreeMap<String, f64> {
    BTreeMap::from([("u".to_string(), 2.0 * PI)])
}

fn kk_bundle() -> BundleSpec {
    BundleSpec {
        pi: strings(&["t", "x", "y", "z"]),
        h: strings(&["u"]),
        f: vec![],
        s_periods: vec![Some(2.0 * PI)],
        w_periods: vec![],
        orientation: 1.0,
    }
}

fn samples(count: usize, coords: &[String], spread: &[(&str, f64, f64)]) -> SampleSpec {
    let mut region: BTreeMap<String, [f64; 2]> = coords.iter().map(|c| (c.clone(), [-1.0, 1.0])).collect();
    for (c, lo, hi) in spread {
        region.insert(c.to_string(), [*lo, *hi]);
    }
    SampleSpec {
        count,
        region,
        points: vec![],
    }
}

fn killing(coords: &[String], which: &[&str]) -> BTreeMap<String, Vec<String>> {
    which
        .iter()
        .map(|c| {
            let v = coords
                .iter()
                .map(|d| if d == c { "1" } else { "0" }.to_string())
                .collect();
            (format!("d{c}"), v)
        })
        .collect()
}

fn base(name: &str, coordinates: Vec<String>, metric: MetricSpec, signature: [usize; 2]) -> ScenarioSpec {
    ScenarioSpec {
        name: name.into(),
        periods: BTreeMap::new(),
        bounds: BTreeMap::new(),
        samples: samples(50, &coordinates, &[]),
        coordinates,
        metric,
        signature,
        bundle: None,
        killing: BTreeMap::new(),
        time_reference: None,
        lorentz: None,
        expect: Expectations::default(),
        tolerances: BTreeMap::new(),
    }
}

fn kk(name: &str, metric: MetricSpec) -> ScenarioSpec {
    let c = kk_coords();
    let mut s = base(name, c.clone(), metric, [2, 3]);
    s.periods = u_period();
    s.bundle = Some(kk_bundle());
    s.samples = samples(50, &c, &[("u", 0.0, 2.0 * PI)]);
    s
}

/// `diag(−1, 1, 1, 1, −1)`, `u` periodic.
pub fn minkowski5() -> ScenarioSpec {
    let mut s = kk(
        "minkowski5",
        MetricSpec::Diagonal {
            diagonal: strings(&["-1", "1", "1", "1", "-1"]),
        },
    );
    s.killing = killing(&s.coordinates, &["u", "t", "x", "y", "z"]);
    s.expect.flat = true;
    s.expect.killing_potential = true;
    s
}

/// `η − (du + B x dy)²`: uniform magnetic field `B` along `z`.
pub fn flat_kk(b: f64) -> ScenarioSpec {
    let b = format!("({b:?})");
    let rows = vec![
        strings(&["-1", "0", "0", "0", "0"]),
        strings(&["0", "1", "0", "0", "0"]),
        vec![
            "0".into(),
            "0".into(),
            format!("1 - {b}^2*x^2"),
            "0".into(),
            format!("-{b}*x"),
        ],
        strings(&["0", "0", "0", "1", "0"]),
        vec!["0".into(), "0".into(), format!("-{b}*x"), "0".into(), "-1".into()],
    ];
    let mut s = kk(&format!("flat_kk({})", &b[1..b.len() - 1]), MetricSpec::Full { rows });
    s.killing = killing(&s.coordinates, &["u", "t", "z"]);
    s.expect.killing_potential = true;
    s.lorentz = Some(LorentzSpec {
        charge_ratio: 0.5,
        start_velocity: vec![0.01, 0.0, 0.0],
        start: vec![0.0, 0.0, 0.0, 0.0],
        t_end: 20.0,
        step: 1e-3,
        magnetic_field: b[1..b.len() - 1].parse().ok(),
    });
    s
}

/// Curved base `−dt² + e^{0.2t}(dx² + dy²) + (1 + 0.1 cos x) dz²` with
/// potential `A = 0.5 x dy + 0.3 sin t dz`, metric `g_B − (du + A)²`.
pub fn warped_kk() -> ScenarioSpec {
    let rows = vec![
        strings(&["-1", "0", "0", "0", "0"]),
        strings(&["0", "exp(0.2*t)", "0", "0", "0"]),
        strings(&["0", "0", "exp(0.2*t) - 0.25*x^2", "-0.15*x*sin(t)", "-0.5*x"]),
        strings(&[
            "0",
            "0",
            "-0.15*x*sin(t)",
            "1 + 0.1*cos(x) - 0.09*sin(t)^2",
            "-0.3*sin(t)",
        ]),
        strings(&["0", "0", "-0.5*x", "-0.3*sin(t)", "-1"]),
    ];
    let mut s = kk("warped_kk", MetricSpec::Full { rows });
    s.killing = killing(&s.coordinates, &["u"]);
    s.expect.killing_potential = true;
    s
}

const S3_RADIUS2: &str = "16/(1 + w1^2 + w2^2 + w3^2)^2";

fn fiber_scenario(name: &str) -> ScenarioSpec {
    let c = fiber_coords();
    let diag = MetricSpec::Diagonal {
        diagonal: strings(&["-1", "1", "1", "1", "-1", S3_RADIUS2, S3_RADIUS2, S3_RADIUS2]),
    };
    let mut s = base(name, c.clone(), diag, [2, 6]);
    s.periods = u_period();
    s.samples = samples(
        50,
        &c,
        &[
            ("u", 0.0, 2.0 * PI),
            ("w1", -1.5, 1.5),
            ("w2", -1.5, 1.5),
            ("w3", -1.5, 1.5),
        ],
    );
    s.expect.s3_radius = Some(2.0);
    s
}

/// `R^{1,3} × S¹ × S³` with the `S³` factor of radius 2 in stereographic
/// coordinates.
pub fn product_r13_s1_s3() -> ScenarioSpec {
    let mut s = fiber_scenario("product_r13_s1_s3");
    s.bundle = Some(BundleSpec {
        pi: strings(&["t", "x", "y", "z"]),
        h: strings(&["u"]),
        f: strings(&["w1", "w2", "w3"]),
        s_periods: vec![Some(2.0 * PI)],
        w_periods: vec![None, None, None],
        orientation: 1.0,
    });
    s.killing = killing(&s.coordinates, &["u", "t"]);
    s.expect.killing_potential = true;
    s
}

/// Product metric with `f` rotating `(w1, w2)` by `0.3 sin u + 0.2 x`.
pub fn twisted_phi() -> ScenarioSpec {
    let mut s = fiber_scenario("twisted_phi");
    let th = "(0.3*sin(u) + 0.2*x)";
    s.bundle = Some(BundleSpec {
        pi: strings(&["t", "x", "y", "z"]),
        h: strings(&["u"]),
        f: vec![
            format!("cos{th}*w1 - sin{th}*w2"),
            format!("sin{th}*w1 + cos{th}*w2"),
            "w3".into(),
        ],
        s_periods: vec![Some(2.0 * PI)],
        w_periods: vec![None, None, None],
        orientation: 1.0,
    });
    s.samples.count = 30;
    s
}

/// `g_xx = 1 + 0.3 sin u`: `∂_u` is unit but not Killing.
pub fn u_periodic() -> ScenarioSpec {
    let mut s = kk(
        "u_periodic",
        MetricSpec::Diagonal {
            diagonal: strings(&["-1", "1 + 0.3*sin(u)", "1", "1", "-1"]),
        },
    );
    s.expect.averaged_component = Some((1, 1, 1.0));
    s.samples.count = 10;
    s
}

/// Round `S³` of radius `r` in stereographic coordinates.
pub fn round_s3(r: f64) -> ScenarioSpec {
    let c = strings(&["w1", "w2", "w3"]);
    let g = format!("4*{:?}/(1 + w1^2 + w2^2 + w3^2)^2", r * r);
    let mut s = base(
        &format!("round_s3({r:?})"),
        c.clone(),
        MetricSpec::Diagonal {
            diagonal: vec![g.clone(), g.clone(), g],
        },
        [0, 3],
    );
    s.samples = samples(30, &c, &[("w1", -1.5, 1.5), ("w2", -1.5, 1.5), ("w3", -1.5, 1.5)]);
    s.time_reference = Some(vec![0.0, 0.0, 0.0]);
    s.expect.constant_curvature = Some(1.0 / (r * r));
    s
}

fn argument(name: &str, stem: &str) -> Option<Option<f64>> {
    let rest = name.strip_prefix(stem)?;
    if rest.is_empty() {
        return Some(None);
    }
    let inner = rest.strip_prefix('(')?.strip_suffix(')')?;
    Some(Some(inner.trim().parse().ok()?))
}

/// Built-in scenario by name; `flat_kk` and `round_s3` take an optional
/// numeric argument (default 1).
pub fn builtin(name: &str) -> Option<ScenarioSpec> {
    match name {
        "minkowski5" => return Some(minkowski5()),
        "warped_kk" => return Some(warped_kk()),
        "product_r13_s1_s3" => return Some(product_r13_s1_s3()),
        "u_periodic" => return Some(u_periodic()),
        "twisted_phi" => return Some(twisted_phi()),
        _ => {}
    }
    if let Some(b) = argument(name, "flat_kk") {
        return Some(flat_kk(b.unwrap_or(1.0)));
    }
    if let Some(r) = argument(name, "round_s3") {
        return Some(round_s3(r.unwrap_or(1.0)));
    }
    None
}
