//! Scenario files: a JSON description of coordinates, metric, bundle maps,
//! Killing fields and sample clouds, validated into a [`Scenario`].

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::chart::{Chart, ChartManifold, Domain, MetricField, Signature};
use crate::expr::{Expr, ExprError};
use crate::field::{ExprField, Field};
use crate::multifiber::{MultiFiberBundle, Trivialization};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricSpec {
    Diagonal { diagonal: Vec<String> },
    Full { rows: Vec<Vec<String>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleSpec {
    /// Components of `π`, `h`, `f` in the total coordinates.
    pub pi: Vec<String>,
    pub h: Vec<String>,
    #[serde(default)]
    pub f: Vec<String>,
    /// Periods of the `S` and `W` factor coordinates (`null` if not periodic).
    pub s_periods: Vec<Option<f64>>,
    #[serde(default)]
    pub w_periods: Vec<Option<f64>>,
    #[serde(default = "one")]
    pub orientation: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSpec {
    #[serde(default = "default_count")]
    pub count: usize,
    /// Sampling box per coordinate; missing coordinates are sampled in
    /// `[-1, 1]`.
    #[serde(default, rename = "box")]
    pub region: BTreeMap<String, [f64; 2]>,
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
}

fn default_count() -> usize {
    50
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec {
            count: default_count(),
            region: BTreeMap::new(),
            points: vec![],
        }
    }
}

/// Properties the suites can hold the scenario to.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectations {
    #[serde(default)]
    pub flat: bool,
    /// Sectional curvature `K` of a constant-curvature metric.
    #[serde(default)]
    pub constant_curvature: Option<f64>,
    #[serde(default)]
    pub killing_potential: bool,
    /// Metric component averaged over the fiber: `[i, j, expected]`.
    #[serde(default)]
    pub averaged_component: Option<(usize, usize, f64)>,
    /// Radius of the `W = S³` fibers.
    #[serde(default)]
    pub s3_radius: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LorentzSpec {
    /// Charge-to-mass ratio `q`.
    pub charge_ratio: f64,
    /// Spatial start velocity `v` on the base; time component fixed by
    /// `η(v, v) = −1`.
    pub start_velocity: Vec<f64>,
    pub start: Vec<f64>,
    pub t_end: f64,
    pub step: f64,
    /// Uniform magnetic field along `z`, for the closed-form orbit.
    #[serde(default)]
    pub magnetic_field: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub coordinates: Vec<String>,
    #[serde(default)]
    pub periods: BTreeMap<String, f64>,
    #[serde(default)]
    pub bounds: BTreeMap<String, [f64; 2]>,
    pub metric: MetricSpec,
    /// `[negative, positive]` eigenvalue counts.
    pub signature: [usize; 2],
    #[serde(default)]
    pub bundle: Option<BundleSpec>,
    #[serde(default)]
    pub killing: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub samples: SampleSpec,
    #[serde(default)]
    pub time_reference: Option<Vec<f64>>,
    #[serde(default)]
    pub lorentz: Option<LorentzSpec>,
    #[serde(default)]
    pub expect: Expectations,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

/// A validated scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub spec: ScenarioSpec,
    pub manifold: ChartManifold,
    pub metric: MetricField,
    pub bundle: Option<MultiFiberBundle>,
    pub killing: Vec<(String, ExprField)>,
    pub samples: Vec<Vec<f64>>,
    pub time_reference: Vec<f64>,
}

impl Scenario {
    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    /// Tolerance `name`, overridden by the scenario if it sets one.
    pub fn tol(&self, name: &str, default: f64) -> f64 {
        self.spec.tolerances.get(name).copied().unwrap_or(default)
    }

    /// `g_ab − g_au g_bu / g_uu` on the leading `base_dim` coordinates with
    /// the others set to zero; the base metric of a Kaluza–Klein metric.
    pub fn base_metric(&self, base_dim: usize) -> Result<MetricField, HarnessError> {
        let n = self.dim();
        if base_dim + 1 > n {
            return Err(HarnessError::validation("base metric", "base dimension too large"));
        }
        let rows = &self.metric.tensor.components.components;
        let u = base_dim;
        let subs: Vec<Expr> = (0..n)
            .map(|k| if k < base_dim { Expr::var(k) } else { Expr::zero() })
            .collect();
        let c = |a: usize, b: usize| rows[a * n + b].clone();
        let base_rows = (0..base_dim)
            .map(|a| {
                (0..base_dim)
                    .map(|b| (c(a, b) - c(a, u) * c(b, u) / c(u, u)).compose(&subs))
                    .collect()
            })
            .collect();
        let neg = self.spec.signature[0].saturating_sub(1);
        let chart = self.manifold.home().id.clone();
        MetricField::new(chart, base_rows, Signature::new(neg, base_dim - neg))
            .map_err(|e| HarnessError::validation("base metric", &e.to_string()))
    }
}

fn parse_list(src: &[String], names: &[String], what: &str) -> Result<Vec<Expr>, HarnessError> {
    src.iter()
        .enumerate()
        .map(|(i, s)| {
            Expr::parse(s, names).map_err(|ExprError::Parse { pos, msg }| HarnessError::Parse {
                context: format!("{what}[{i}]"),
                pos,
                msg,
            })
        })
        .collect()
}

fn factor_chart(id: &str, periods: &[Option<f64>]) -> Result<Chart, HarnessError> {
    if periods.is_empty() {
        return Ok(Chart::point(id));
    }
    let names = (0..periods.len())
        .map(|k| format!("{}{k}", id.to_lowercase()))
        .collect();
    let mut c = Chart::new(id, names, Domain::whole(periods.len()))
        .map_err(|e| HarnessError::validation("bundle", &e.to_string()))?;
    for (k, p) in periods.iter().enumerate() {
        if let Some(p) = p {
            c = c
                .with_period(k, *p)
                .map_err(|e| HarnessError::validation("bundle", &e.to_string()))?;
        }
    }
    Ok(c)
}

fn sample_cloud(spec: &ScenarioSpec, seed: u64) -> Result<Vec<Vec<f64>>, HarnessError> {
    let n = spec.coordinates.len();
    for name in spec.samples.region.keys() {
        if !spec.coordinates.contains(name) {
            return Err(HarnessError::validation(
                "samples",
                &format!("unknown coordinate `{name}` in sample box"),
            ));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = spec.samples.points.clone();
    for p in &out {
        if p.len() != n {
            return Err(HarnessError::validation(
                "samples",
                "explicit point has the wrong dimension",
            ));
        }
    }
    for _ in 0..spec.samples.count {
        let p = spec
            .coordinates
            .iter()
            .map(|c| {
                let [lo, hi] = spec.samples.region.get(c).copied().unwrap_or([-1.0, 1.0]);
                rng.gen_range(lo..=hi)
            })
            .collect();
        out.push(p);
    }
    if out.is_empty() {
        return Err(HarnessError::validation("samples", "no sample points"));
    }
    Ok(out)
}

impl Scenario {
    /// Parse, build and validate a scenario; random samples use `seed`.
    pub fn from_spec(spec: ScenarioSpec, seed: u64) -> Result<Scenario, HarnessError> {
        let names = spec.coordinates.clone();
        let n = names.len();
        if n == 0 {
            return Err(HarnessError::validation("coordinates", "no coordinates declared"));
        }
        let mut bounds = vec![(f64::NEG_INFINITY, f64::INFINITY); n];
        for (c, [lo, hi]) in &spec.bounds {
            let k = names
                .iter()
                .position(|m| m == c)
                .ok_or_else(|| HarnessError::validation("bounds", &format!("unknown coordinate `{c}`")))?;
            bounds[k] = (*lo, *hi);
        }
        let mut chart = Chart::new(spec.name.clone(), names.clone(), Domain::bounded(bounds))
            .map_err(|e| HarnessError::validation("chart", &e.to_string()))?;
        for (c, p) in &spec.periods {
            let k = names
                .iter()
                .position(|m| m == c)
                .ok_or_else(|| HarnessError::validation("periods", &format!("unknown coordinate `{c}`")))?;
            chart = chart
                .with_period(k, *p)
                .map_err(|e| HarnessError::validation("periods", &e.to_string()))?;
        }
        let sig = Signature::new(spec.signature[0], spec.signature[1]);
        let metric = match &spec.metric {
            MetricSpec::Diagonal { diagonal } => {
                if diagonal.len() != n {
                    return Err(HarnessError::validation(
                        "metric",
                        "diagonal length differs from the dimension",
                    ));
                }
                MetricField::diagonal(chart.id.clone(), parse_list(diagonal, &names, "metric.diagonal")?, sig)
            }
            MetricSpec::Full { rows } => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(HarnessError::validation(
                        "metric",
                        "rows do not form a square matrix of the dimension",
                    ));
                }
                let parsed = rows
                    .iter()
                    .enumerate()
                    .map(|(i, r)| parse_list(r, &names, &format!("metric.rows[{i}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                MetricField::new(chart.id.clone(), parsed, sig)
            }
        }
        .map_err(|e| HarnessError::validation("metric", &e.to_string()))?;

        let manifold = ChartManifold::single(chart.clone());
        let bundle = match &spec.bundle {
            None => None,
            Some(b) => {
                let pi = ExprField::new(n, parse_list(&b.pi, &names, "bundle.pi")?);
                let h = ExprField::new(n, parse_list(&b.h, &names, "bundle.h")?);
                let f = ExprField::new(n, parse_list(&b.f, &names, "bundle.f")?);
                if b.h.len() != b.s_periods.len() || b.f.len() != b.w_periods.len() {
                    return Err(HarnessError::validation(
                        "bundle",
                        "factor periods do not match the h/f components",
                    ));
                }
                let base_names = (0..b.pi.len()).map(|k| format!("b{k}")).collect();
                let base = Chart::new("base", base_names, Domain::whole(b.pi.len()))
                    .map_err(|e| HarnessError::validation("bundle", &e.to_string()))?;
                let patch = Trivialization {
                    id: "U0".into(),
                    domain: chart.domain.clone(),
                    pi,
                    h,
                    f,
                };
                let bundle = MultiFiberBundle::new(
                    manifold.clone(),
                    ChartManifold::single(base),
                    factor_chart("S", &b.s_periods)?,
                    factor_chart("W", &b.w_periods)?,
                    vec![patch],
                )
                .map_err(|e| HarnessError::validation("bundle", &e.to_string()))?
                .with_orientation(b.orientation);
                Some(bundle)
            }
        };
        let killing = spec
            .killing
            .iter()
            .map(|(k, comps)| {
                if comps.len() != n {
                    return Err(HarnessError::validation(
                        "killing",
                        &format!("field `{k}` has the wrong dimension"),
                    ));
                }
                Ok((
                    k.clone(),
                    ExprField::new(n, parse_list(comps, &names, &format!("killing.{k}"))?),
                ))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let samples = sample_cloud(&spec, seed)?;
        let time_reference = spec.time_reference.clone().unwrap_or_else(|| {
            let mut e = vec![0.0; n];
            e[0] = 1.0;
            e
        });
        let s = Scenario {
            spec,
            manifold,
            metric,
            bundle,
            killing,
            samples,
            time_reference,
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<(), HarnessError> {
        let declared = Signature::new(self.spec.signature[0], self.spec.signature[1]);
        for (i, x) in self.samples.iter().enumerate() {
            if !self.manifold.home().contains(x) {
                return Err(HarnessError::validation(
                    "samples in domain",
                    &format!("sample {i} lies outside the chart"),
                ));
            }
            if self.metric.eval(x).iter().any(|v| !v.is_finite()) {
                return Err(HarnessError::validation(
                    "expressions evaluate",
                    &format!("metric is not finite at sample {i}"),
                ));
            }
            for (k, f) in &self.killing {
                if f.eval(x).iter().any(|v| !v.is_finite()) {
                    return Err(HarnessError::validation(
                        "expressions evaluate",
                        &format!("field `{k}` is not finite at sample {i}"),
                    ));
                }
            }
            let computed = self
                .metric
                .signature_at_coords(x)
                .map_err(|e| HarnessError::validation("signature", &format!("sample {i}: {e}")))?;
            if computed != declared {
                return Err(HarnessError::validation(
                    "signature",
                    &format!("declared {declared:?} but computed {computed:?} at sample {i}"),
                ));
            }
        }
        Ok(())
    }
}

/// Read and validate a scenario file.
pub fn load_scenario(path: &Path, seed: u64) -> Result<Scenario, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    parse_scenario(&text, seed)
}

/// Parse and validate a scenario from JSON text.
pub fn parse_scenario(text: &str, seed: u64) -> Result<Scenario, HarnessError> {
    let spec: ScenarioSpec = serde_json::from_str(text).map_err(|e| HarnessError::Parse {
        context: format!("line {}, column {}", e.line(), e.column()),
        pos: e.column(),
        msg: e.to_string(),
    })?;
    Scenario::from_spec(spec, seed)
}
