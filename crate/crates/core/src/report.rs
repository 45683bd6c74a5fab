//! Stable JSON-lines records for pair checking and benchmarking.

use crate::matcher::{MatchReport, Verdict, Witness};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct WitnessRecord {
    pub index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transformed_value: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub original_value: Option<i64>,
    pub detail: String,
}

impl From<&Witness> for WitnessRecord {
    fn from(w: &Witness) -> Self {
        WitnessRecord {
            index: w.index,
            location: w.location.clone(),
            transformed_value: w.values.map(|v| v.0),
            original_value: w.values.map(|v| v.1),
            detail: w.detail.clone(),
        }
    }
}

/// One line of the `--json` output of pair checking.
#[derive(Debug, Clone, Serialize)]
pub struct PairRecord {
    pub pair: String,
    pub verdict: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constraint: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<WitnessRecord>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub degenerate: Vec<&'static str>,
    pub time_us: u64,
    /// Transformation sequence found by the event oracle, when it ran.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transformations: Option<Vec<String>>,
}

pub fn verdict_str(verdict: Verdict) -> &'static str {
    match verdict {
        Verdict::Match => "match",
        Verdict::PrefixDivergenceMatch => "prefix-divergence-match",
        Verdict::Mismatch => "mismatch",
    }
}

impl PairRecord {
    pub fn from_report(pair: impl Into<String>, report: &MatchReport, time_us: u64) -> Self {
        PairRecord {
            pair: pair.into(),
            verdict: verdict_str(report.verdict),
            constraint: report.constraint.map(|c| c.label()),
            witness: report.witness.as_ref().map(WitnessRecord::from),
            degenerate: report.degenerate.iter().map(|c| c.label()).collect(),
            time_us,
            transformations: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}
