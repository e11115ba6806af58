//! Verdict records shared by all checks.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::pde::SolveResult;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    Violated,
    HypothesisNotMet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub check: String,
    pub inputs: Value,
    pub measured: Value,
    pub tolerances: Value,
    pub verdict: Verdict,
    pub provenance: Value,
}

impl TheoremReport {
    pub fn is_violated(&self) -> bool {
        self.verdict == Verdict::Violated
    }

    /// A measured number by key, if present.
    pub fn number(&self, key: &str) -> Option<f64> {
        self.measured.get(key).and_then(Value::as_f64)
    }
}

/// Grid and solver settings behind a solve.
pub fn provenance(result: &SolveResult) -> Value {
    json!({
        "resolution": result.options.resolution,
        "spacing": result.field.grid.spacing,
        "truncation_radii": result.truncation_radii,
        "epsilon_schedule": result.epsilon_schedule,
        "outer_bc": result.options.outer_bc,
        "converged": result.converged,
        "threads": result.threads,
    })
}
