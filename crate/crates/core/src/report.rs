//! Named residuals and the JSON report assembled from them.

use serde::{Deserialize, Serialize};

/// One checked identity at one point: its signed residual components and
/// their largest magnitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub identity: String,
    pub reference: String,
    pub value: f64,
    pub components: Vec<f64>,
}

impl Residual {
    pub fn vector(identity: &str, reference: &str, components: Vec<f64>) -> Self {
        let value = components.iter().fold(0.0_f64, |a, v| {
            if v.is_nan() || a.is_nan() {
                f64::NAN
            } else {
                a.max(v.abs())
            }
        });
        Residual {
            identity: identity.into(),
            reference: reference.into(),
            value,
            components,
        }
    }

    pub fn scalar(identity: &str, reference: &str, v: f64) -> Self {
        Self::vector(identity, reference, vec![v])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportEntry {
    pub identity: String,
    pub reference: String,
    pub residual: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ReportEntry {
    /// Pass iff `residual ≤ tolerance`; `NaN` fails.
    pub fn new(identity: impl Into<String>, reference: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        let verdict = if residual <= tolerance {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        ReportEntry {
            identity: identity.into(),
            reference: reference.into(),
            residual,
            tolerance,
            verdict,
            error: None,
        }
    }

    /// An entry whose computation failed.
    pub fn failed(
        identity: impl Into<String>,
        reference: impl Into<String>,
        tolerance: f64,
        error: impl ToString,
    ) -> Self {
        ReportEntry {
            error: Some(error.to_string()),
            ..Self::new(identity, reference, f64::NAN, tolerance)
        }
    }

    /// An entry that passes iff `expected` holds.
    pub fn flag(identity: impl Into<String>, reference: impl Into<String>, expected: bool) -> Self {
        Self::new(identity, reference, if expected { 0.0 } else { 1.0 }, 0.5)
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub sign_conventions: String,
    pub lorentz_sign: String,
    pub seed: u64,
    pub tool_version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub scenario: String,
    pub suite: String,
    pub entries: Vec<ReportEntry>,
    pub metadata: ReportMetadata,
}

impl ResidualReport {
    pub fn new(scenario: &str, suite: &str, metadata: ReportMetadata) -> Self {
        ResidualReport {
            scenario: scenario.into(),
            suite: suite.into(),
            entries: Vec::new(),
            metadata,
        }
    }

    pub fn push(&mut self, entry: ReportEntry) {
        self.entries.push(entry);
    }

    pub fn passed(&self) -> bool {
        self.entries.iter().all(ReportEntry::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ReportEntry> {
        self.entries.iter().filter(|e| !e.passed())
    }

    pub fn entry(&self, identity: &str) -> Option<&ReportEntry> {
        self.entries.iter().find(|e| e.identity == identity)
    }
}

/// Largest value per identity over several points, in first-seen order.
pub fn worst_by_identity<'a, I: IntoIterator<Item = &'a Residual>>(residuals: I) -> Vec<(String, String, f64)> {
    let mut out: Vec<(String, String, f64)> = Vec::new();
    for r in residuals {
        match out.iter_mut().find(|(id, _, _)| *id == r.identity) {
            Some(slot) => {
                if r.value.is_nan() || slot.2.is_nan() {
                    slot.2 = f64::NAN;
                } else {
                    slot.2 = slot.2.max(r.value);
                }
            }
            None => out.push((r.identity.clone(), r.reference.clone(), r.value)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_is_residual_within_tolerance() {
        assert!(ReportEntry::new("a", "plumbing", 1e-7, 1e-6).passed());
        assert!(ReportEntry::new("a", "plumbing", 1e-6, 1e-6).passed());
        assert!(!ReportEntry::new("a", "plumbing", 2e-6, 1e-6).passed());
        assert!(!ReportEntry::new("a", "plumbing", f64::NAN, 1e-6).passed());
    }

    #[test]
    fn worst_keeps_max_and_nan() {
        let rs = [
            Residual::scalar("x", "r", 1.0),
            Residual::scalar("y", "r", 0.5),
            Residual::scalar("x", "r", -3.0),
            Residual::scalar("y", "r", f64::NAN),
        ];
        let w = worst_by_identity(&rs);
        assert_eq!(w[0].2, 3.0);
        assert!(w[1].2.is_nan());
    }
}
