//! Per-app risk: detectability flags, flow counts, the weighted risk value,
//! and detector-chain voting.
//!
//! The risk value of an app is
//! `Σ_i w_i · (⋁_tool b_tool,i) · (Σ_sc w_sc · n_sc,i)` over the 21
//! vulnerability types: severity-weighted, gated by whether any chain
//! detector can see the type, and scaled by the sink-weighted number of
//! sensitive flows. All arithmetic is exact integer arithmetic.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::adapters::merge_and_dedup;
use crate::misuse::{MisuseKey, MisuseTuple};
use crate::taxonomy::{CapabilityMatrix, SinkCategory, Taxonomy, VulnId};

/// Severity and sink weights used by one risk computation. Defaults come from
/// the loaded taxonomy; individual entries may be overridden.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Weights {
    severity: BTreeMap<VulnId, u64>,
    sink: BTreeMap<SinkCategory, u64>,
}

impl Weights {
    pub fn from_taxonomy(taxonomy: &Taxonomy) -> Self {
        Weights {
            severity: VulnId::all()
                .map(|id| (id, taxonomy.vuln_type(id).severity_weight))
                .collect(),
            sink: SinkCategory::ALL
                .iter()
                .map(|&sc| (sc, taxonomy.risk_weight(sc)))
                .collect(),
        }
    }

    pub fn override_severity(&mut self, id: VulnId, weight: u64) {
        self.severity.insert(id, weight);
    }

    pub fn override_sink(&mut self, sc: SinkCategory, weight: u64) {
        self.sink.insert(sc, weight);
    }

    pub fn severity(&self, id: VulnId) -> u64 {
        self.severity[&id]
    }

    pub fn sink(&self, sc: SinkCategory) -> u64 {
        self.sink[&sc]
    }
}

/// 1 iff some tuple of vulnerability `id` was reported by `tool` (directly or
/// via a merged reporters set).
pub fn detectability(tuples: &[MisuseTuple], tool: &str, id: VulnId) -> u8 {
    u8::from(tuples.iter().any(|t| t.id == id && t.reported_by(tool)))
}

/// Total multiplicity of `sc` in the sink lists of tuples with vulnerability
/// `id`. Assumes the tuples are already deduplicated, so each entry counts one
/// distinct access point on the attack surface.
pub fn flow_count(tuples: &[MisuseTuple], sc: SinkCategory, id: VulnId) -> u64 {
    tuples
        .iter()
        .filter(|t| t.id == id)
        .map(|t| t.sink_categories.iter().filter(|&&c| c == sc).count() as u64)
        .sum()
}

/// The app-level risk value over deduplicated, annotated tuples.
pub fn risk_value(tuples: &[MisuseTuple], chain: &BTreeSet<String>, weights: &Weights) -> u64 {
    let mut total = 0u64;
    for id in VulnId::all() {
        let detectable = chain
            .iter()
            .any(|tool| detectability(tuples, tool, id) == 1);
        if !detectable {
            continue;
        }
        let flow_sum: u64 = SinkCategory::ALL
            .iter()
            .map(|&sc| weights.sink(sc) * flow_count(tuples, sc, id))
            .sum();
        total += weights.severity(id) * flow_sum;
    }
    total
}

/// Partitions deduplicated misuses into expected true positives and rejected
/// ones. A misuse keyed `(m, id, p, loc)` is an expected TP iff strictly more
/// than half of the chain detectors capable of its vulnerability type report
/// it. The comparison is strict: exactly half is not enough.
pub fn vote_merged(
    merged: &[MisuseTuple],
    matrix: &CapabilityMatrix,
    chain: &BTreeSet<String>,
) -> (Vec<MisuseTuple>, Vec<MisuseTuple>) {
    let mut expected = Vec::new();
    let mut rejected = Vec::new();
    for tuple in merged {
        let capable: BTreeSet<String> = matrix
            .capable_detectors(tuple.id)
            .intersection(chain)
            .cloned()
            .collect();
        let reporters = tuple
            .reporters
            .iter()
            .filter(|r| capable.contains(*r))
            .count();
        if !capable.is_empty() && 2 * reporters > capable.len() {
            expected.push(tuple.clone());
        } else {
            rejected.push(tuple.clone());
        }
    }
    (expected, rejected)
}

/// Voting over per-detector result sets; merges and deduplicates first.
pub fn vote(
    by_detector: &BTreeMap<String, Vec<MisuseTuple>>,
    matrix: &CapabilityMatrix,
    chain: &BTreeSet<String>,
) -> (Vec<MisuseTuple>, Vec<MisuseTuple>) {
    let all: Vec<MisuseTuple> = by_detector.values().flatten().cloned().collect();
    vote_merged(&merge_and_dedup(&all), matrix, chain)
}

/// Precision of a detection result against the expected true positives;
/// vacuously 1 when nothing was detected.
pub fn chain_precision(detected: &BTreeSet<MisuseKey>, expected: &BTreeSet<MisuseKey>) -> f64 {
    if detected.is_empty() {
        return 1.0;
    }
    detected.intersection(expected).count() as f64 / detected.len() as f64
}

/// Per-app risk report: detectability flags `b`, flow counts `n`, and the
/// risk value, plus the chains that produced them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppRiskReport {
    pub report_version: u32,
    pub app_id: String,
    /// Detector chain the risk value is gated on, in feature order.
    pub chain: Vec<String>,
    pub vote_chain: Vec<String>,
    /// Sparse `b[tool][id]` flags; absent entries are 0.
    pub b: BTreeMap<String, BTreeMap<VulnId, u8>>,
    /// Sparse `n[sc][id]` counts; absent entries are 0.
    pub n: BTreeMap<SinkCategory, BTreeMap<VulnId, u64>>,
    pub r_x: u64,
    pub expected_tps: usize,
    pub rejected: Vec<MisuseKey>,
}

impl AppRiskReport {
    /// Builds the report from annotated expected-TP tuples.
    pub fn compute(
        app_id: &str,
        expected: &[MisuseTuple],
        rejected: &[MisuseTuple],
        chain: &[String],
        vote_chain: &[String],
        weights: &Weights,
    ) -> AppRiskReport {
        let mut b: BTreeMap<String, BTreeMap<VulnId, u8>> = BTreeMap::new();
        for tool in chain {
            let mut row = BTreeMap::new();
            for id in VulnId::all() {
                if detectability(expected, tool, id) == 1 {
                    row.insert(id, 1u8);
                }
            }
            b.insert(tool.clone(), row);
        }

        let mut n: BTreeMap<SinkCategory, BTreeMap<VulnId, u64>> = BTreeMap::new();
        for &sc in &SinkCategory::ALL {
            let mut row = BTreeMap::new();
            for id in VulnId::all() {
                let count = flow_count(expected, sc, id);
                if count > 0 {
                    row.insert(id, count);
                }
            }
            if !row.is_empty() {
                n.insert(sc, row);
            }
        }

        let chain_set: BTreeSet<String> = chain.iter().cloned().collect();
        let mut rejected_keys: Vec<MisuseKey> = rejected.iter().map(MisuseTuple::key).collect();
        rejected_keys.sort();

        AppRiskReport {
            report_version: 1,
            app_id: app_id.to_string(),
            chain: chain.to_vec(),
            vote_chain: vote_chain.to_vec(),
            b,
            n,
            r_x: risk_value(expected, &chain_set, weights),
            expected_tps: expected.len(),
            rejected: rejected_keys,
        }
    }

    pub fn b_flag(&self, tool: &str, id: VulnId) -> u8 {
        self.b
            .get(tool)
            .and_then(|row| row.get(&id))
            .copied()
            .unwrap_or(0)
    }

    pub fn n_count(&self, sc: SinkCategory, id: VulnId) -> u64 {
        self.n
            .get(&sc)
            .and_then(|row| row.get(&id))
            .copied()
            .unwrap_or(0)
    }

    /// Re-evaluates the risk formula from the stored `b` and `n` maps.
    pub fn recompute_rx(&self, weights: &Weights) -> u64 {
        let mut total = 0u64;
        for id in VulnId::all() {
            let detectable = self.chain.iter().any(|tool| self.b_flag(tool, id) == 1);
            if !detectable {
                continue;
            }
            let flow_sum: u64 = SinkCategory::ALL
                .iter()
                .map(|&sc| weights.sink(sc) * self.n_count(sc, id))
                .sum();
            total += weights.severity(id) * flow_sum;
        }
        total
    }
}
