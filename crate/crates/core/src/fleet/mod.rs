//! Fleet-scale assessment: fixed-layout feature vectors, k-means clustering
//! with the Davies-Bouldin index, per-cluster top-label summaries, and
//! FP-growth association-rule mining.

mod fpgrowth;
mod kmeans;

pub use fpgrowth::{
    frequent_itemsets, mine_rules, AssociationRule, DEFAULT_MIN_CONFIDENCE,
    DEFAULT_MIN_SUPPORT_APPS,
};
pub use kmeans::{dbi, kmeans, wcss, KMeansResult};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::risk::AppRiskReport;
use crate::taxonomy::{SinkCategory, VulnId, VULN_TYPE_COUNT};

/// A (vulnerability type, sink category) pair.
pub type Label = (VulnId, SinkCategory);

pub const MU_DIMS: usize = 2 * VULN_TYPE_COUNT as usize;
pub const NU_DIMS: usize = 9 * VULN_TYPE_COUNT as usize;
/// 231 = 2×21 detectability flags + 9×21 flow counts.
pub const FEATURE_DIMS: usize = MU_DIMS + NU_DIMS;

/// Index of the detectability flag `b[tool][id]`, tools in chain order.
pub fn mu_index(tool_idx: usize, id: VulnId) -> usize {
    debug_assert!(tool_idx < 2);
    2 * (id.get() as usize - 1) + tool_idx
}

/// Index of the flow count `n[sc][id]`.
pub fn nu_index(sc: SinkCategory, id: VulnId) -> usize {
    MU_DIMS + 9 * (id.get() as usize - 1) + sc.index()
}

/// Inverse of [`mu_index`].
pub fn mu_coords(index: usize) -> (usize, VulnId) {
    debug_assert!(index < MU_DIMS);
    let tool = index % 2;
    let id = VulnId::new((index / 2) as u8 + 1).unwrap();
    (tool, id)
}

/// Inverse of [`nu_index`].
pub fn nu_coords(index: usize) -> (SinkCategory, VulnId) {
    debug_assert!((MU_DIMS..FEATURE_DIMS).contains(&index));
    let rel = index - MU_DIMS;
    let id = VulnId::new((rel / 9) as u8 + 1).unwrap();
    (SinkCategory::ALL[rel % 9], id)
}

/// One app's 231-dimensional feature vector `(μ, ν)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub app_id: String,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn nu(&self) -> &[f64] {
        &self.values[MU_DIMS..]
    }

    /// Labels with at least one flow, the app's transaction for rule mining.
    pub fn labels(&self) -> std::collections::BTreeSet<Label> {
        self.values[MU_DIMS..]
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(i, _)| {
                let (sc, id) = nu_coords(MU_DIMS + i);
                (id, sc)
            })
            .collect()
    }
}

/// Flattens a risk report into the fixed 231-dimension layout. The report's
/// chain supplies the two μ detectors in order, so it must contain exactly
/// two.
pub fn extract_features(report: &AppRiskReport) -> Result<FeatureVector> {
    if report.chain.len() != 2 {
        return Err(Error::domain(format!(
            "feature extraction needs a two-detector chain, report {:?} has {:?}",
            report.app_id, report.chain
        )));
    }
    let mut values = vec![0.0; FEATURE_DIMS];
    for (tool_idx, tool) in report.chain.iter().enumerate() {
        for id in VulnId::all() {
            values[mu_index(tool_idx, id)] = f64::from(report.b_flag(tool, id));
        }
    }
    for &sc in &SinkCategory::ALL {
        for id in VulnId::all() {
            values[nu_index(sc, id)] = report.n_count(sc, id) as f64;
        }
    }
    Ok(FeatureVector {
        app_id: report.app_id.clone(),
        values,
    })
}

/// One ranked label row of a cluster summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelStat {
    pub id: VulnId,
    pub category: SinkCategory,
    /// Apps in the cluster with at least one such flow.
    pub apps_with_label: usize,
    pub total_flows: u64,
    pub avg_per_app: f64,
    /// Share of all detected flows in the cluster, in percent.
    pub pct_of_labels: f64,
}

/// Ranks the labels of a cluster by average flows per member app, descending;
/// ties break on (id, category name). Labels without flows are omitted.
pub fn top_labels(members: &[&FeatureVector], top_n: usize) -> Vec<LabelStat> {
    if members.is_empty() {
        return Vec::new();
    }
    let cluster_total: f64 = members.iter().map(|m| m.nu().iter().sum::<f64>()).sum();

    let mut stats = Vec::new();
    for idx in MU_DIMS..FEATURE_DIMS {
        let (sc, id) = nu_coords(idx);
        let total: f64 = members.iter().map(|m| m.values[idx]).sum();
        if total <= 0.0 {
            continue;
        }
        let apps_with_label = members.iter().filter(|m| m.values[idx] > 0.0).count();
        stats.push(LabelStat {
            id,
            category: sc,
            apps_with_label,
            total_flows: total as u64,
            avg_per_app: total / members.len() as f64,
            pct_of_labels: 100.0 * total / cluster_total,
        });
    }
    stats.sort_by(|a, b| {
        b.avg_per_app
            .partial_cmp(&a.avg_per_app)
            .unwrap()
            .then_with(|| a.id.cmp(&b.id))
            .then_with(|| a.category.name().cmp(b.category.name()))
    });
    stats.truncate(top_n);
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn empty_report(app: &str) -> AppRiskReport {
        AppRiskReport {
            report_version: 1,
            app_id: app.to_string(),
            chain: vec!["CG".into(), "CC".into()],
            vote_chain: vec!["CG".into(), "CC".into()],
            b: BTreeMap::new(),
            n: BTreeMap::new(),
            r_x: 0,
            expected_tps: 0,
            rejected: vec![],
        }
    }

    #[test]
    fn empty_report_gives_zero_vector() {
        let v = extract_features(&empty_report("a")).unwrap();
        assert_eq!(v.values.len(), FEATURE_DIMS);
        assert!(v.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn two_nonzero_entries_land_at_computed_indices() {
        let mut report = empty_report("a");
        let id12 = VulnId::new(12).unwrap();
        report.b.insert("CG".into(), BTreeMap::from([(id12, 1)]));
        report
            .n
            .insert(SinkCategory::NETWORK, BTreeMap::from([(id12, 2u64)]));
        let v = extract_features(&report).unwrap();
        let nonzero: Vec<usize> = v
            .values
            .iter()
            .enumerate()
            .filter(|(_, &x)| x != 0.0)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(
            nonzero,
            vec![mu_index(0, id12), nu_index(SinkCategory::NETWORK, id12)]
        );
        assert_eq!(v.values[nu_index(SinkCategory::NETWORK, id12)], 2.0);
    }

    #[test]
    fn index_round_trip_is_lossless() {
        for i in 0..MU_DIMS {
            let (tool, id) = mu_coords(i);
            assert_eq!(mu_index(tool, id), i);
        }
        for i in MU_DIMS..FEATURE_DIMS {
            let (sc, id) = nu_coords(i);
            assert_eq!(nu_index(sc, id), i);
        }
    }

    #[test]
    fn wrong_chain_arity_is_rejected() {
        let mut report = empty_report("a");
        report.chain = vec!["CG".into()];
        assert!(extract_features(&report).is_err());
    }

    fn vector_with(entries: &[(Label, f64)], app: &str) -> FeatureVector {
        let mut values = vec![0.0; FEATURE_DIMS];
        for ((id, sc), v) in entries {
            values[nu_index(*sc, *id)] = *v;
        }
        FeatureVector {
            app_id: app.to_string(),
            values,
        }
    }

    #[test]
    fn single_app_single_label() {
        let id12 = VulnId::new(12).unwrap();
        let v = vector_with(&[((id12, SinkCategory::NETWORK), 3.0)], "a");
        let labels = top_labels(&[&v], 3);
        assert_eq!(labels.len(), 1);
        assert_eq!(labels[0].avg_per_app, 3.0);
        assert_eq!(labels[0].pct_of_labels, 100.0);
        assert_eq!(labels[0].apps_with_label, 1);
    }

    #[test]
    fn label_average_spreads_over_all_members() {
        let id1 = VulnId::new(1).unwrap();
        let a = vector_with(&[((id1, SinkCategory::LOG), 4.0)], "a");
        let b = vector_with(&[], "b");
        let labels = top_labels(&[&a, &b], 3);
        assert_eq!(labels[0].avg_per_app, 2.0);
        assert_eq!(labels[0].apps_with_label, 1);
        assert_eq!(labels[0].total_flows, 4);
    }

    #[test]
    fn percentages_sum_to_one_hundred() {
        let id1 = VulnId::new(1).unwrap();
        let id2 = VulnId::new(2).unwrap();
        let a = vector_with(
            &[
                ((id1, SinkCategory::LOG), 4.0),
                ((id2, SinkCategory::FILE), 6.0),
            ],
            "a",
        );
        let b = vector_with(&[((id1, SinkCategory::NETWORK), 10.0)], "b");
        let labels = top_labels(&[&a, &b], usize::MAX);
        let pct: f64 = labels.iter().map(|l| l.pct_of_labels).sum();
        assert!((pct - 100.0).abs() < 1e-9);
    }
}
