//! Contrastive explanations: how much the clustering cost moves when a
//! query vertex is forced to be a center.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::coreset::cost_multiplier;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    #[serde(rename = "exp")]
    pub exp_value: f64,
    pub fixed_cost: f64,
    pub baseline_cost: f64,
}

/// Explanations keyed by external vertex id.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ExplanationSet {
    pub entries: BTreeMap<u64, Explanation>,
}

impl ExplanationSet {
    pub fn get(&self, vertex: u64) -> Option<&Explanation> {
        self.entries.get(&vertex)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `|baseline − (ln(n/β)/0.01)^{p/2} · fixed|`.
pub fn explanation(baseline_cost: f64, fixed_cost: f64, n: usize, beta: f64, p: u32) -> f64 {
    (baseline_cost - cost_multiplier(n, beta, p) * fixed_cost).abs()
}
