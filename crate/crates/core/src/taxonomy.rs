//! The fixed vulnerability taxonomy, weight tables, crypto-API catalog,
//! sink categories, and the detector capability matrix.
//!
//! Everything here loads from a JSON catalog file. A default catalog is
//! embedded so callers can run without any configuration; the file format is
//! documented in `docs/catalog.md`.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Identifier of a vulnerability type, always in `1..=21`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct VulnId(u8);

pub const VULN_TYPE_COUNT: u8 = 21;

impl VulnId {
    pub fn new(id: u8) -> Result<Self> {
        if (1..=VULN_TYPE_COUNT).contains(&id) {
            Ok(VulnId(id))
        } else {
            Err(Error::domain(format!(
                "vulnerability id {id} out of range 1..={VULN_TYPE_COUNT}"
            )))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// All 21 ids in ascending order.
    pub fn all() -> impl Iterator<Item = VulnId> {
        (1..=VULN_TYPE_COUNT).map(VulnId)
    }
}

impl std::fmt::Display for VulnId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One of the nine sink categories. The declaration order is the canonical
/// dimension order used by feature vectors and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[allow(non_camel_case_types)]
pub enum SinkCategory {
    FILE,
    LOG,
    NETWORK,
    SMS_MMS,
    SYNC,
    NC_STORAGE,
    NC_ICC,
    NC_OUT_STREAM,
    NC_OTHER,
}

impl SinkCategory {
    pub const ALL: [SinkCategory; 9] = [
        SinkCategory::FILE,
        SinkCategory::LOG,
        SinkCategory::NETWORK,
        SinkCategory::SMS_MMS,
        SinkCategory::SYNC,
        SinkCategory::NC_STORAGE,
        SinkCategory::NC_ICC,
        SinkCategory::NC_OUT_STREAM,
        SinkCategory::NC_OTHER,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SinkCategory::FILE => "FILE",
            SinkCategory::LOG => "LOG",
            SinkCategory::NETWORK => "NETWORK",
            SinkCategory::SMS_MMS => "SMS_MMS",
            SinkCategory::SYNC => "SYNC",
            SinkCategory::NC_STORAGE => "NC_STORAGE",
            SinkCategory::NC_ICC => "NC_ICC",
            SinkCategory::NC_OUT_STREAM => "NC_OUT_STREAM",
            SinkCategory::NC_OTHER => "NC_OTHER",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        SinkCategory::ALL
            .iter()
            .copied()
            .find(|c| c.name() == name)
            .ok_or_else(|| Error::domain(format!("unknown sink category {name:?}")))
    }

    /// Position in [`SinkCategory::ALL`]; used for fixed-order flattening.
    pub fn index(self) -> usize {
        SinkCategory::ALL.iter().position(|c| *c == self).unwrap()
    }
}

impl std::fmt::Display for SinkCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Whether a crypto API processes data directly or builds parameters for one
/// that does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ApiKind {
    DAPI,
    PAPI,
}

/// Result of classifying an arbitrary method signature against the catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApiClass {
    Dapi,
    Papi,
    Unknown,
}

/// One catalog row. `kind` is present for crypto APIs, absent for plain sink
/// APIs. `taints_receiver` marks void parameter-setting calls whose receiver
/// absorbs the configured parameter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiCatalogEntry {
    pub signature: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ApiKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_sink_category: Option<SinkCategory>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub is_sink: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub taints_receiver: bool,
}

/// Maps detector ids to the vulnerability types they can detect; queryable in
/// both directions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CapabilityMatrix {
    capabilities: BTreeMap<String, BTreeSet<VulnId>>,
}

impl CapabilityMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, detector: impl Into<String>, ids: impl IntoIterator<Item = VulnId>) {
        self.capabilities
            .entry(detector.into())
            .or_default()
            .extend(ids);
    }

    pub fn is_registered(&self, detector: &str) -> bool {
        self.capabilities.contains_key(detector)
    }

    pub fn detectors(&self) -> impl Iterator<Item = &str> {
        self.capabilities.keys().map(String::as_str)
    }

    pub fn capability(&self, detector: &str) -> Result<&BTreeSet<VulnId>> {
        self.capabilities
            .get(detector)
            .ok_or_else(|| Error::domain(format!("detector {detector:?} is not registered")))
    }

    /// All registered detectors whose capability set contains `id`.
    pub fn capable_detectors(&self, id: VulnId) -> BTreeSet<String> {
        self.capabilities
            .iter()
            .filter(|(_, ids)| ids.contains(&id))
            .map(|(d, _)| d.clone())
            .collect()
    }
}

/// One row of the shipped table translating an external finding
/// `(err tag, api signature m, description d)` to a vulnerability id.
/// Rows are evaluated in order; the first match wins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingRule {
    pub detector: String,
    /// Raw type/rule tag emitted by the external detector.
    pub err: String,
    /// Substring that must occur in the misused API signature.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_contains: Option<String>,
    /// Keywords, at least one of which must occur in the description.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub d_any: Vec<String>,
    pub id: VulnId,
}

impl MappingRule {
    pub fn matches(&self, detector: &str, err: &str, m: &str, d: &str) -> bool {
        self.detector == detector
            && self.err == err
            && self.m_contains.as_ref().is_none_or(|pat| m.contains(pat))
            && (self.d_any.is_empty() || self.d_any.iter().any(|kw| d.contains(kw)))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct VulnTypeRow {
    id: u8,
    description: String,
    severity_weight: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SinkCategoryRow {
    name: String,
    risk_weight: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CatalogFile {
    catalog_version: u32,
    vuln_types: Vec<VulnTypeRow>,
    sink_categories: Vec<SinkCategoryRow>,
    apis: Vec<ApiCatalogEntry>,
    #[serde(default)]
    type_tags: BTreeMap<String, SinkCategory>,
    detectors: BTreeMap<String, Vec<u8>>,
    #[serde(default)]
    mapping_rules: Vec<MappingRule>,
}

/// A vulnerability type with its shipped severity weight.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VulnType {
    pub id: VulnId,
    pub description: String,
    pub severity_weight: u64,
}

/// The loaded taxonomy: vulnerability types, sink weights, API catalog,
/// semantic type tags, capability matrix, and adapter mapping rules.
/// Immutable after load; share freely across threads.
#[derive(Debug, Clone)]
pub struct Taxonomy {
    vuln_types: BTreeMap<VulnId, VulnType>,
    risk_weights: BTreeMap<SinkCategory, u64>,
    apis: BTreeMap<String, ApiCatalogEntry>,
    type_tags: BTreeMap<String, SinkCategory>,
    capabilities: CapabilityMatrix,
    mapping_rules: Vec<MappingRule>,
}

const DEFAULT_CATALOG: &str = include_str!("../data/default_catalog.json");

static BUILTIN: OnceLock<Taxonomy> = OnceLock::new();

impl Taxonomy {
    /// The embedded default catalog, parsed once.
    pub fn builtin() -> &'static Taxonomy {
        BUILTIN.get_or_init(|| {
            Taxonomy::from_json(DEFAULT_CATALOG).expect("embedded catalog must be valid")
        })
    }

    pub fn from_json(text: &str) -> Result<Taxonomy> {
        let file: CatalogFile =
            serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
        if file.catalog_version != 1 {
            return Err(Error::domain(format!(
                "unsupported catalog_version {}",
                file.catalog_version
            )));
        }

        let mut vuln_types = BTreeMap::new();
        for row in &file.vuln_types {
            let id = VulnId::new(row.id)?;
            if ![1, 4, 7, 10].contains(&row.severity_weight) {
                return Err(Error::domain(format!(
                    "severity weight {} for id {} not in {{1,4,7,10}}",
                    row.severity_weight, row.id
                )));
            }
            let prev = vuln_types.insert(
                id,
                VulnType {
                    id,
                    description: row.description.clone(),
                    severity_weight: row.severity_weight,
                },
            );
            if prev.is_some() {
                return Err(Error::domain(format!("duplicate vulnerability id {id}")));
            }
        }
        if vuln_types.len() != VULN_TYPE_COUNT as usize {
            return Err(Error::domain(format!(
                "catalog must define all {VULN_TYPE_COUNT} vulnerability types, found {}",
                vuln_types.len()
            )));
        }

        let mut risk_weights = BTreeMap::new();
        for row in &file.sink_categories {
            let cat = SinkCategory::parse(&row.name)?;
            if ![1, 3, 4, 5, 7, 10].contains(&row.risk_weight) {
                return Err(Error::domain(format!(
                    "risk weight {} for {} not in {{1,3,4,5,7,10}}",
                    row.risk_weight, row.name
                )));
            }
            if risk_weights.insert(cat, row.risk_weight).is_some() {
                return Err(Error::domain(format!("duplicate sink category {cat}")));
            }
        }
        if risk_weights.len() != SinkCategory::ALL.len() {
            return Err(Error::domain(
                "catalog must assign a risk weight to all 9 sink categories".to_string(),
            ));
        }

        let mut apis = BTreeMap::new();
        for entry in &file.apis {
            if entry.is_sink && entry.default_sink_category.is_none() {
                return Err(Error::domain(format!(
                    "sink API {:?} has no default sink category",
                    entry.signature
                )));
            }
            if apis
                .insert(entry.signature.clone(), entry.clone())
                .is_some()
            {
                return Err(Error::domain(format!(
                    "duplicate API signature {:?}",
                    entry.signature
                )));
            }
        }

        let mut capabilities = CapabilityMatrix::new();
        for (detector, ids) in &file.detectors {
            if ids.is_empty() {
                return Err(Error::domain(format!(
                    "detector {detector:?} registered with empty capability set"
                )));
            }
            let ids = ids
                .iter()
                .map(|&i| VulnId::new(i))
                .collect::<Result<Vec<_>>>()?;
            capabilities.register(detector.clone(), ids);
        }

        for rule in &file.mapping_rules {
            if !capabilities.is_registered(&rule.detector) {
                return Err(Error::domain(format!(
                    "mapping rule references unregistered detector {:?}",
                    rule.detector
                )));
            }
        }

        Ok(Taxonomy {
            vuln_types,
            risk_weights,
            apis,
            type_tags: file.type_tags,
            capabilities,
            mapping_rules: file.mapping_rules,
        })
    }

    pub fn from_file(path: &std::path::Path) -> Result<Taxonomy> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))?;
        Taxonomy::from_json(&text)
    }

    pub fn vuln_type(&self, id: VulnId) -> &VulnType {
        &self.vuln_types[&id]
    }

    /// Severity weight `w_id` for a vulnerability id.
    pub fn severity_weight(&self, id: u8) -> Result<u64> {
        let id = VulnId::new(id)?;
        Ok(self.vuln_types[&id].severity_weight)
    }

    /// Risk weight `w_sc` for a sink category name.
    pub fn risk_weight_of(&self, name: &str) -> Result<u64> {
        Ok(self.risk_weights[&SinkCategory::parse(name)?])
    }

    pub fn risk_weight(&self, sc: SinkCategory) -> u64 {
        self.risk_weights[&sc]
    }

    /// Catalog lookup; `Unknown` for any signature without a DAPI/PAPI kind.
    pub fn classify_api(&self, signature: &str) -> ApiClass {
        match self.apis.get(signature).and_then(|e| e.kind) {
            Some(ApiKind::DAPI) => ApiClass::Dapi,
            Some(ApiKind::PAPI) => ApiClass::Papi,
            None => ApiClass::Unknown,
        }
    }

    pub fn api(&self, signature: &str) -> Option<&ApiCatalogEntry> {
        self.apis.get(signature)
    }

    /// Signatures of every catalog API of the given kind, in sorted order.
    pub fn apis_of_kind(&self, kind: ApiKind) -> BTreeSet<String> {
        self.apis
            .values()
            .filter(|e| e.kind == Some(kind))
            .map(|e| e.signature.clone())
            .collect()
    }

    /// Signatures of every catalog sink API, in sorted order.
    pub fn sink_apis(&self) -> BTreeSet<String> {
        self.apis
            .values()
            .filter(|e| e.is_sink)
            .map(|e| e.signature.clone())
            .collect()
    }

    /// Sink-category tag attached to a semantic type, if any.
    pub fn type_tag(&self, type_name: &str) -> Option<SinkCategory> {
        self.type_tags.get(type_name).copied()
    }

    pub fn capabilities(&self) -> &CapabilityMatrix {
        &self.capabilities
    }

    /// Registered detectors able to detect misuses of vulnerability `id`.
    pub fn capable_detectors(&self, id: u8) -> Result<BTreeSet<String>> {
        Ok(self.capabilities.capable_detectors(VulnId::new(id)?))
    }

    pub fn mapping_rules(&self) -> &[MappingRule] {
        &self.mapping_rules
    }

    /// Picks the most sensitive category: maximal risk weight, ties broken by
    /// lexicographically smallest name.
    pub fn most_sensitive(
        &self,
        cats: impl IntoIterator<Item = SinkCategory>,
    ) -> Option<SinkCategory> {
        cats.into_iter().min_by(|a, b| {
            self.risk_weight(*b)
                .cmp(&self.risk_weight(*a))
                .then_with(|| a.name().cmp(b.name()))
        })
    }
}
