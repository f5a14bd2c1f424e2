//! Scenario registry and suite orchestration.

mod builtins;
mod geometry_suites;
mod physics_suites;
mod scenario;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use crate::report::{ReportEntry, ReportMetadata, ResidualReport};
use crate::tensor::SIGN_CONVENTIONS;

pub use builtins::{
    builtin, flat_kk, minkowski5, product_r13_s1_s3, round_s3, twisted_phi, u_periodic, warped_kk, BUILTIN_NAMES,
};
pub use geometry_suites::{fiber_well_defined, split_atlas, splitting_roundtrip};
pub use physics_suites::{kk_start_velocity, larmor_position, random_fluid_fields, synthetic_fluid, SyntheticFluid};
pub use scenario::{
    load_scenario, parse_scenario, BundleSpec, Expectations, LorentzSpec, MetricSpec, SampleSpec, Scenario,
    ScenarioSpec,
};

/// Default sampling seed.
pub const DEFAULT_SEED: u64 = 0;

/// Sign of the Lorentz coupling recorded in every report.
pub const LORENTZ_SIGN: &str = "nabla_v v = q g^-1 F v with F = d(Y_flat) and q = -g(v, Y)";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HarnessError {
    #[error("parse error in {context} at position {pos}: {msg}")]
    Parse { context: String, pos: usize, msg: String },
    #[error("validation failed ({invariant}): {detail}")]
    Validation { invariant: String, detail: String },
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("unknown suite `{0}`")]
    UnknownSuite(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl HarnessError {
    pub fn validation(invariant: &str, detail: &str) -> Self {
        HarnessError::Validation {
            invariant: invariant.into(),
            detail: detail.into(),
        }
    }
}

/// Built-in name or path to a JSON scenario file.
pub fn resolve_scenario(name_or_path: &str, seed: u64) -> Result<Scenario, HarnessError> {
    if let Some(spec) = builtin(name_or_path) {
        return Scenario::from_spec(spec, seed);
    }
    let path = Path::new(name_or_path);
    if path.exists() {
        return load_scenario(path, seed);
    }
    Err(HarnessError::UnknownScenario(name_or_path.into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Curvature,
    Bianchi,
    Fibers,
    Atlas,
    Kaluza,
    Dynamics,
    Spectrum,
    All,
}

impl Suite {
    pub const EACH: [Suite; 7] = [
        Suite::Curvature,
        Suite::Bianchi,
        Suite::Fibers,
        Suite::Atlas,
        Suite::Kaluza,
        Suite::Dynamics,
        Suite::Spectrum,
    ];
}

impl FromStr for Suite {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "curvature" => Suite::Curvature,
            "bianchi" => Suite::Bianchi,
            "fibers" => Suite::Fibers,
            "atlas" => Suite::Atlas,
            "kaluza" => Suite::Kaluza,
            "dynamics" => Suite::Dynamics,
            "spectrum" => Suite::Spectrum,
            "all" => Suite::All,
            other => return Err(HarnessError::UnknownSuite(other.into())),
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Suite::Curvature => "curvature",
            Suite::Bianchi => "bianchi",
            Suite::Fibers => "fibers",
            Suite::Atlas => "atlas",
            Suite::Kaluza => "kaluza",
            Suite::Dynamics => "dynamics",
            Suite::Spectrum => "spectrum",
            Suite::All => "all",
        };
        f.write_str(s)
    }
}

/// Tolerance lookup: command-line overrides, then the scenario, then the
/// suite default.
pub struct Tolerances<'a> {
    scenario: &'a Scenario,
    overrides: &'a BTreeMap<String, f64>,
}

impl Tolerances<'_> {
    pub fn get(&self, name: &str, default: f64) -> f64 {
        self.overrides
            .get(name)
            .copied()
            .unwrap_or_else(|| self.scenario.tol(name, default))
    }

    pub fn entry(&self, identity: &str, reference: &str, residual: f64, default: f64) -> ReportEntry {
        ReportEntry::new(identity, reference, residual, self.get(identity, default))
    }

    pub fn failed(&self, identity: &str, reference: &str, default: f64, err: impl ToString) -> ReportEntry {
        ReportEntry::failed(identity, reference, self.get(identity, default), err)
    }
}

/// Run one suite (or all of them) on a scenario. Module errors become
/// failing entries; the suite never aborts.
pub fn run_suite(scenario: &Scenario, suite: Suite, overrides: &BTreeMap<String, f64>, seed: u64) -> ResidualReport {
    let mut report = ResidualReport::new(
        scenario.name(),
        &suite.to_string(),
        ReportMetadata {
            sign_conventions: SIGN_CONVENTIONS.into(),
            lorentz_sign: LORENTZ_SIGN.into(),
            seed,
            tool_version: env!("CARGO_PKG_VERSION").into(),
        },
    );
    let tol = Tolerances { scenario, overrides };
    let suites: Vec<Suite> = if suite == Suite::All {
        Suite::EACH.to_vec()
    } else {
        vec![suite]
    };
    for s in suites {
        let entries = match s {
            Suite::Curvature => geometry_suites::curvature(scenario, &tol),
            Suite::Bianchi => geometry_suites::bianchi(scenario, &tol),
            Suite::Fibers => geometry_suites::fibers(scenario, &tol),
            Suite::Atlas => geometry_suites::atlas(scenario, &tol),
            Suite::Kaluza => physics_suites::kaluza(scenario, &tol, seed),
            Suite::Dynamics => physics_suites::dynamics(scenario, &tol),
            Suite::Spectrum => physics_suites::spectrum(scenario, &tol),
            Suite::All => unreachable!(),
        };
        for e in entries {
            report.push(e);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minkowski5_signature_validates() {
        let s = resolve_scenario("minkowski5", DEFAULT_SEED).unwrap();
        assert_eq!(s.dim(), 5);
    }

    #[test]
    fn unknown_token_is_a_parse_error() {
        let mut spec = minkowski5();
        spec.metric = MetricSpec::Diagonal {
            diagonal: ["-1", "1", "1", "1", "-1 + q"].map(String::from).to_vec(),
        };
        let err = Scenario::from_spec(spec, 0).unwrap_err();
        assert!(
            matches!(&err, HarnessError::Parse { msg, .. } if msg.contains('q')),
            "{err}"
        );
    }

    #[test]
    fn wrong_signature_is_a_validation_error() {
        let mut spec = minkowski5();
        spec.signature = [1, 4];
        let err = Scenario::from_spec(spec, 0).unwrap_err();
        assert!(
            matches!(&err, HarnessError::Validation { invariant, .. } if invariant.contains("signature")),
            "{err}"
        );
    }

    #[test]
    fn unknown_names_are_rejected() {
        assert!(matches!(
            resolve_scenario("nope", 0),
            Err(HarnessError::UnknownScenario(_))
        ));
        assert!(matches!("nope".parse::<Suite>(), Err(HarnessError::UnknownSuite(_))));
        assert!(builtin("flat_kk(0.5)").is_some());
        assert!(builtin("flat_kk(x)").is_none());
    }
}
