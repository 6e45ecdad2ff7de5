//! The unified misuse record produced by the built-in detector and the
//! report adapters, enriched with sink categories by the dataflow stage.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ir::Loc;
use crate::taxonomy::{SinkCategory, VulnId};

/// A sink-related cryptographic misuse.
///
/// JSONL field names follow the unified tuple schema: `m` the misused API,
/// `id` the vulnerability type, `p` the parent method, `d` a description with
/// reason and actual parameters, `t` the reporting detector, `S` the sink
/// categories filled in by dataflow annotation (a multiset: one entry per
/// distinct sink call site reached).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MisuseTuple {
    #[serde(rename = "m")]
    pub api: String,
    pub id: VulnId,
    #[serde(rename = "p")]
    pub parent: String,
    #[serde(rename = "d")]
    pub description: String,
    #[serde(rename = "t")]
    pub detector: String,
    #[serde(rename = "S")]
    pub sink_categories: Vec<SinkCategory>,
    pub loc: Loc,
    /// Every detector that reported this misuse; starts as `{t}` and grows
    /// during deduplication.
    #[serde(default)]
    pub reporters: BTreeSet<String>,
    /// Set when annotation could not locate a call site of `m` inside `p`.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub unlocatable: bool,
}

impl MisuseTuple {
    pub fn new(
        api: impl Into<String>,
        id: VulnId,
        parent: impl Into<String>,
        description: impl Into<String>,
        detector: impl Into<String>,
        loc: Loc,
    ) -> Self {
        let detector = detector.into();
        MisuseTuple {
            api: api.into(),
            id,
            parent: parent.into(),
            description: description.into(),
            detector: detector.clone(),
            sink_categories: Vec::new(),
            loc,
            reporters: BTreeSet::from([detector]),
            unlocatable: false,
        }
    }

    /// Identity used for deduplication and voting.
    pub fn key(&self) -> MisuseKey {
        MisuseKey {
            api: self.api.clone(),
            id: self.id,
            parent: self.parent.clone(),
            loc: self.loc.clone(),
        }
    }

    /// True when `detector` is the primary reporter or among the merged ones.
    pub fn reported_by(&self, detector: &str) -> bool {
        self.detector == detector || self.reporters.contains(detector)
    }
}

/// The `(m, id, p, loc)` identity of a misuse.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MisuseKey {
    pub api: String,
    pub id: VulnId,
    pub parent: String,
    pub loc: Loc,
}

/// Serializes tuples one-per-line in deterministic order.
pub fn to_jsonl(tuples: &[MisuseTuple]) -> String {
    let mut sorted: Vec<&MisuseTuple> = tuples.iter().collect();
    sorted.sort();
    let mut out = String::new();
    for t in sorted {
        out.push_str(&serde_json::to_string(t).expect("tuple serialization cannot fail"));
        out.push('\n');
    }
    out
}

/// Parses a JSONL tuple stream, ignoring blank lines.
pub fn from_jsonl(text: &str) -> Result<Vec<MisuseTuple>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|line| {
            serde_json::from_str(line).map_err(|e| Error::Malformed(format!("tuple line: {e}")))
        })
        .collect()
}
