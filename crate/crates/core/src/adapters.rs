//! Adapters for external detector reports.
//!
//! Each supported detector declares a JSON report format (see
//! `docs/report-formats.md`); thin out-of-repo scripts convert real tool
//! output into it. Findings are translated to unified misuse tuples through
//! the shipped mapping-rule table, which resolves coarse tags like
//! `ConstraintError` by looking at the misused API's class first and then at
//! description keywords. Findings no rule matches are returned separately,
//! never dropped.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ir::Loc;
use crate::misuse::{MisuseKey, MisuseTuple};
use crate::taxonomy::{Taxonomy, VulnId, VULN_TYPE_COUNT};

/// One finding as emitted by an external detector: the raw tag `err`, the
/// misused API `m`, the parent method `p`, the description `d`, and the
/// location.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalFinding {
    pub err: String,
    pub m: String,
    pub p: String,
    #[serde(default)]
    pub d: String,
    pub loc: Loc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalReport {
    pub report_version: u32,
    pub detector: String,
    pub app_id: String,
    #[serde(default)]
    pub findings: Vec<ExternalFinding>,
}

/// A finding that matched no mapping rule, carried through with its origin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnmappedFinding {
    pub detector: String,
    #[serde(flatten)]
    pub finding: ExternalFinding,
}

/// Result of [`validate_chain`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChainValidation {
    Valid,
    MissingIds(BTreeSet<VulnId>),
}

/// Parses an external report document into misuse tuples.
///
/// Every finding either becomes a tuple (with `t` = the detector and an empty
/// sink list) or lands in the unmapped list; the two together account for all
/// findings in the document.
pub fn parse_report(
    taxonomy: &Taxonomy,
    detector: &str,
    doc: &str,
) -> Result<(Vec<MisuseTuple>, Vec<UnmappedFinding>)> {
    if !taxonomy.capabilities().is_registered(detector) {
        return Err(Error::domain(format!("unknown detector id {detector:?}")));
    }
    let report: ExternalReport =
        serde_json::from_str(doc).map_err(|e| Error::Malformed(e.to_string()))?;
    if report.report_version != 1 {
        return Err(Error::domain(format!(
            "unsupported report_version {}",
            report.report_version
        )));
    }
    if report.detector != detector {
        return Err(Error::domain(format!(
            "report declares detector {:?} but was parsed as {detector:?}",
            report.detector
        )));
    }

    let mut tuples = Vec::new();
    let mut unmapped = Vec::new();
    for finding in report.findings {
        let hit = taxonomy
            .mapping_rules()
            .iter()
            .find(|r| r.matches(detector, &finding.err, &finding.m, &finding.d));
        match hit {
            Some(rule) => {
                tuples.push(MisuseTuple::new(
                    finding.m,
                    rule.id,
                    finding.p,
                    finding.d,
                    detector,
                    finding.loc,
                ));
            }
            None => unmapped.push(UnmappedFinding {
                detector: detector.to_string(),
                finding,
            }),
        }
    }
    Ok((tuples, unmapped))
}

/// Checks that a detector set covers the whole taxonomy (every detector
/// registered, union of capabilities ⊇ 1..=21).
pub fn validate_chain(
    taxonomy: &Taxonomy,
    detectors: &BTreeSet<String>,
) -> Result<ChainValidation> {
    let mut covered: BTreeSet<VulnId> = BTreeSet::new();
    for d in detectors {
        covered.extend(taxonomy.capabilities().capability(d)?.iter().copied());
    }
    let missing: BTreeSet<VulnId> = VulnId::all().filter(|id| !covered.contains(id)).collect();
    Ok(if missing.is_empty() {
        ChainValidation::Valid
    } else {
        ChainValidation::MissingIds(missing)
    })
}

/// Collapses tuples that agree on `(m, id, p, loc)` into one record carrying
/// the union of reporting detectors. All combination rules are commutative,
/// so the result is independent of input order: `t` becomes the
/// lexicographically first reporter, the description comes from the smallest
/// (detector, description) pair, and sink multisets merge by per-category
/// maximum (they differ only when some inputs predate annotation).
pub fn merge_and_dedup(tuples: &[MisuseTuple]) -> Vec<MisuseTuple> {
    let mut buckets: BTreeMap<MisuseKey, Vec<&MisuseTuple>> = BTreeMap::new();
    for tuple in tuples {
        buckets.entry(tuple.key()).or_default().push(tuple);
    }

    let mut merged = Vec::with_capacity(buckets.len());
    for (_, bucket) in buckets {
        let mut reporters: BTreeSet<String> = BTreeSet::new();
        let mut sink_counts: BTreeMap<crate::taxonomy::SinkCategory, usize> = BTreeMap::new();
        let mut unlocatable = false;
        for t in &bucket {
            reporters.insert(t.detector.clone());
            reporters.extend(t.reporters.iter().cloned());
            unlocatable |= t.unlocatable;
            let mut counts: BTreeMap<crate::taxonomy::SinkCategory, usize> = BTreeMap::new();
            for &sc in &t.sink_categories {
                *counts.entry(sc).or_default() += 1;
            }
            for (sc, c) in counts {
                let entry = sink_counts.entry(sc).or_default();
                *entry = (*entry).max(c);
            }
        }
        let description = bucket
            .iter()
            .map(|t| (&t.detector, &t.description))
            .min()
            .map(|(_, d)| d.clone())
            .unwrap_or_default();
        let mut sink_categories = Vec::new();
        for (sc, count) in sink_counts {
            sink_categories.extend(std::iter::repeat_n(sc, count));
        }

        let exemplar = bucket[0];
        merged.push(MisuseTuple {
            api: exemplar.api.clone(),
            id: exemplar.id,
            parent: exemplar.parent.clone(),
            description,
            detector: reporters.iter().next().cloned().unwrap_or_default(),
            sink_categories,
            loc: exemplar.loc.clone(),
            reporters,
            unlocatable,
        });
    }
    merged
}

/// Maximum vulnerability id, re-exported for report consumers.
pub const TAXONOMY_SIZE: u8 = VULN_TYPE_COUNT;
