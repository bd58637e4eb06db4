//! Attribution report written as JSON.
//!
//! Scores are keyed by method name (`lc`, `z`, `lime+`, `sv+`) and every
//! score vector follows `feature_names`. Maps are ordered, so the serialized
//! report is byte-stable for a given input.

use std::collections::BTreeMap;

use lcattr_core::{Diagnostics, Method};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub feature_names: Vec<String>,
    pub methods: Vec<Method>,
    pub grouped: bool,
    pub samples: Vec<SampleRecord>,
    /// Present when the run was grouped; one record per group in order of
    /// first appearance.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub groups: Vec<GroupRecord>,
    pub anomaly: AnomalySummary,
    pub metadata: Metadata,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
    pub target: f64,
    pub prediction: f64,
    pub sigma2: f64,
    pub outlier_score: f64,
    pub flagged: bool,
    pub scores: BTreeMap<Method, Vec<f64>>,
    pub diagnostics: BTreeMap<Method, Diagnostics>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub errors: BTreeMap<Method, String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GroupRecord {
    pub group: String,
    pub sample_ids: Vec<String>,
    /// Mean outlier score of the members.
    pub outlier_score: f64,
    pub scores: BTreeMap<Method, Vec<f64>>,
    pub diagnostics: BTreeMap<Method, Diagnostics>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub errors: BTreeMap<Method, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnomalySummary {
    /// Mean outlier score over all samples.
    pub aggregate_score: f64,
    pub threshold: Option<f64>,
    pub flagged: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub config: RunConfig,
    pub version: String,
    /// Samples whose local variance fell back to the unweighted estimate.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub variance_fallbacks: Vec<String>,
    pub wall_time_ms: u64,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    /// All per-method failures, as `(record, method, message)`.
    pub fn failures(&self) -> Vec<(&str, Method, &str)> {
        let samples = self.samples.iter().flat_map(|r| {
            r.errors
                .iter()
                .map(move |(m, e)| (r.id.as_str(), *m, e.as_str()))
        });
        let groups = self.groups.iter().flat_map(|g| {
            g.errors
                .iter()
                .map(move |(m, e)| (g.group.as_str(), *m, e.as_str()))
        });
        samples.chain(groups).collect()
    }

    /// True when any LC record stopped without meeting the step tolerance.
    pub fn has_unconverged(&self) -> bool {
        let unconverged = |d: &BTreeMap<Method, Diagnostics>| d.values().any(|d| !d.converged);
        self.samples.iter().any(|r| unconverged(&r.diagnostics))
            || self.groups.iter().any(|g| unconverged(&g.diagnostics))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Report {
        let mut rec = SampleRecord {
            id: "1".into(),
            target: 1.0,
            prediction: 0.5,
            sigma2: 0.1,
            outlier_score: 0.3,
            ..Default::default()
        };
        rec.scores.insert(Method::Z, vec![0.5, -1.0]);
        rec.scores.insert(Method::Lc, vec![0.1, 0.0]);
        rec.diagnostics.insert(
            Method::Lc,
            Diagnostics {
                iterations: 12,
                objective: Some(0.2),
                converged: false,
            },
        );
        Report {
            feature_names: vec!["a".into(), "b".into()],
            methods: vec![Method::Lc, Method::Z],
            grouped: false,
            samples: vec![rec],
            groups: vec![],
            anomaly: AnomalySummary {
                aggregate_score: 0.3,
                threshold: None,
                flagged: vec![],
            },
            metadata: Metadata {
                config: RunConfig::new("builtin:mexican_hat", "d.csv", "y"),
                version: "0.1.0".into(),
                variance_fallbacks: vec![],
                wall_time_ms: 5,
            },
        }
    }

    #[test]
    fn json_round_trip() {
        let r = tiny();
        let json = r.to_json();
        assert!(json.contains("\"lc\""));
        assert!(json.contains("\"z\""));
        assert_eq!(Report::from_json(&json).unwrap(), r);
    }

    #[test]
    fn method_keys_are_ordered() {
        let json = tiny().to_json();
        let scores = json.find("\"scores\"").unwrap();
        let lc = json[scores..].find("\"lc\"").unwrap();
        let z = json[scores..].find("\"z\"").unwrap();
        assert!(lc < z);
    }

    #[test]
    fn unconverged_is_detected() {
        assert!(tiny().has_unconverged());
        assert!(tiny().failures().is_empty());
    }
}
