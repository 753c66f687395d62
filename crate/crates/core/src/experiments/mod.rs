//! Scenario builders and the named experiments.
//!
//! Each experiment returns its records together with a list of [`Check`]s;
//! the runner turns those into summary lines and the exit status.

use serde::Serialize;

pub mod appendix_a;
pub mod custom;
pub mod fig1;
pub mod no_signalling;

/// One named, pass/fail invariant with a human-readable measurement.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    /// `value ≤ bound`, rejecting NaN.
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check::new(name, value <= bound, format!("{value:.3e} <= {bound:.1e}"))
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Check::new(name, value >= bound, format!("{value:.3e} >= {bound:.1e}"))
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}
