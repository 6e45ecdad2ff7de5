//! Detects cryptographic-API misuses in programs expressed in CEIR (a minimal
//! typed three-address IR), traces the sensitive data flows each misuse
//! originates, quantifies per-app risk, and summarizes fleet-scale threats
//! through clustering and association-rule mining.
//!
//! The pipeline stages are independent modules wired together by the CLI:
//!
//! * [`taxonomy`] — vulnerability types, severity/risk weight tables, the
//!   crypto-API catalog, and the detector capability matrix.
//! * [`ir`] / [`constprop`] — CEIR parsing, validation, and intra-procedural
//!   constant propagation.
//! * [`detector`] — the built-in rule-based misuse detector (`BI`).
//! * [`adapters`] — parsers for external detector reports, the tag-to-id
//!   mapping table, chain validation, and deduplication.
//! * [`dataflow`] — misuse-originating taint-connection analysis, source
//!   refinement, and backward sink categorization.
//! * [`risk`] — detectability flags, flow counts, the per-app risk value, and
//!   detector-chain voting.
//! * [`fleet`] — feature extraction, k-means clustering with the
//!   Davies-Bouldin index, top-label summaries, and FP-growth rule mining.

pub mod adapters;
pub mod constprop;
pub mod dataflow;
pub mod detector;
pub mod error;
pub mod fleet;
pub mod ir;
pub mod misuse;
pub mod risk;
pub mod samples;
pub mod taxonomy;

pub use error::{Error, Result};
pub use ir::{Loc, Program};
pub use misuse::{MisuseKey, MisuseTuple};
pub use taxonomy::{SinkCategory, Taxonomy, VulnId};
