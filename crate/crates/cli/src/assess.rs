//! `cryptorisk assess`: run the misuse-originating data-flow annotation,
//! vote out unendorsed misuses, and compute per-app risk reports.

use std::collections::BTreeSet;
use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;

use cryptorisk_core::adapters::{merge_and_dedup, validate_chain, ChainValidation};
use cryptorisk_core::dataflow::{annotate, DEFAULT_CALL_DEPTH};
use cryptorisk_core::risk::{vote_merged, AppRiskReport, Weights};
use cryptorisk_core::taxonomy::{SinkCategory, Taxonomy, VulnId};

use crate::detect::load_programs;
use crate::io;
use crate::{load_taxonomy, with_jobs, AppError};

#[derive(Args, Debug)]
pub struct AssessArgs {
    /// A CEIR JSON file or a directory of them.
    #[arg(long)]
    pub programs: PathBuf,
    /// Directory containing `<app>.tuples.jsonl` from the detect stage.
    #[arg(long)]
    pub tuples: PathBuf,
    /// Catalog file overriding the embedded default.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Detector chain gating the risk value, e.g. `CG,CC`. Defaults to the
    /// detectors that ran, narrowed to CG/CC when present.
    #[arg(long)]
    pub chain: Option<String>,
    /// Detector chain used for voting. Defaults to the detectors that ran.
    #[arg(long)]
    pub vote_chain: Option<String>,
    /// Inter-procedural call-depth bound for taint tracking.
    #[arg(long, default_value_t = DEFAULT_CALL_DEPTH)]
    pub depth: usize,
    /// Fail unless the risk chain covers all 21 vulnerability types.
    #[arg(long)]
    pub require_full_chain: bool,
    /// Severity-weight override, `id=weight`; repeatable.
    #[arg(long = "override-severity")]
    pub override_severity: Vec<String>,
    /// Sink-weight override, `CATEGORY=weight`; repeatable.
    #[arg(long = "override-sink-weight")]
    pub override_sink_weight: Vec<String>,
    /// Output directory for reports, annotated tuples, and flow sidecars.
    #[arg(long)]
    pub out: PathBuf,
    /// Bound on app-level parallelism.
    #[arg(long)]
    pub jobs: Option<usize>,
}

fn parse_chain(spec: &str) -> Vec<String> {
    spec.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

fn build_weights(taxonomy: &Taxonomy, args: &AssessArgs) -> Result<Weights, AppError> {
    let mut weights = Weights::from_taxonomy(taxonomy);
    for spec in &args.override_severity {
        let (id, w) = spec
            .split_once('=')
            .ok_or_else(|| AppError::input(format!("bad --override-severity {spec:?}")))?;
        let id = VulnId::new(
            id.parse()
                .map_err(|_| AppError::input(format!("bad vulnerability id {id:?}")))?,
        )?;
        let w: u64 = w
            .parse()
            .map_err(|_| AppError::input(format!("bad weight {w:?}")))?;
        weights.override_severity(id, w);
    }
    for spec in &args.override_sink_weight {
        let (sc, w) = spec
            .split_once('=')
            .ok_or_else(|| AppError::input(format!("bad --override-sink-weight {spec:?}")))?;
        let sc = SinkCategory::parse(sc)?;
        let w: u64 = w
            .parse()
            .map_err(|_| AppError::input(format!("bad weight {w:?}")))?;
        weights.override_sink(sc, w);
    }
    Ok(weights)
}

fn default_chain(detectors_run: &[String]) -> Vec<String> {
    let narrowed: Vec<String> = ["CG", "CC"]
        .iter()
        .filter(|d| detectors_run.iter().any(|r| r == *d))
        .map(|d| d.to_string())
        .collect();
    if narrowed.is_empty() {
        detectors_run.to_vec()
    } else {
        narrowed
    }
}

fn csv_escape(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// One flattened row per app: id, risk, then the b grid and the n grid in
/// the documented dimension order.
fn csv_rows(reports: &[AppRiskReport], chain: &[String]) -> String {
    let mut header = vec![
        "app_id".to_string(),
        "r_x".to_string(),
        "expected_tps".to_string(),
    ];
    for tool in chain {
        for id in VulnId::all() {
            header.push(format!("b_{tool}_{id}"));
        }
    }
    for sc in SinkCategory::ALL {
        for id in VulnId::all() {
            header.push(format!("n_{sc}_{id}"));
        }
    }
    let mut out = header.join(",") + "\n";
    for report in reports {
        let mut row = vec![
            csv_escape(&report.app_id),
            report.r_x.to_string(),
            report.expected_tps.to_string(),
        ];
        for tool in chain {
            for id in VulnId::all() {
                row.push(report.b_flag(tool, id).to_string());
            }
        }
        for sc in SinkCategory::ALL {
            for id in VulnId::all() {
                row.push(report.n_count(sc, id).to_string());
            }
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn run(args: AssessArgs) -> Result<(), AppError> {
    let taxonomy = load_taxonomy(&args.catalog)?;
    let weights = build_weights(&taxonomy, &args)?;
    let programs = load_programs(&args.programs)?;
    let sinks = taxonomy.sink_apis();

    std::fs::create_dir_all(&args.out)
        .map_err(|e| AppError::input(format!("creating {}: {e}", args.out.display())))?;

    let flag_chain = args.chain.as_deref().map(parse_chain);
    let flag_vote_chain = args.vote_chain.as_deref().map(parse_chain);

    let reports: Vec<AppRiskReport> = with_jobs(args.jobs, || {
        programs
            .par_iter()
            .map(|program| {
                let tuples_path = args.tuples.join(format!("{}.tuples.jsonl", program.app_id));
                let (header, tuples) = io::read_tuples_file(&tuples_path)?;
                if header.app_id != program.app_id {
                    return Err(AppError::input(format!(
                        "{}: header names app {:?}",
                        tuples_path.display(),
                        header.app_id
                    )));
                }

                let chain = flag_chain
                    .clone()
                    .unwrap_or_else(|| default_chain(&header.detectors));
                let vote_chain = flag_vote_chain
                    .clone()
                    .unwrap_or_else(|| header.detectors.clone());
                let chain_set: BTreeSet<String> = chain.iter().cloned().collect();
                let vote_set: BTreeSet<String> = vote_chain.iter().cloned().collect();

                if args.require_full_chain {
                    if let ChainValidation::MissingIds(missing) =
                        validate_chain(&taxonomy, &chain_set)?
                    {
                        return Err(AppError::input(format!(
                            "chain {chain:?} does not cover vulnerability types {missing:?}"
                        )));
                    }
                }
                for d in chain_set.iter().chain(&vote_set) {
                    taxonomy.capabilities().capability(d)?;
                }

                let merged = merge_and_dedup(&tuples);
                let (mut expected, rejected) =
                    vote_merged(&merged, taxonomy.capabilities(), &vote_set);
                let flow_records = annotate(&mut expected, program, &taxonomy, &sinks, args.depth)?;

                let report = AppRiskReport::compute(
                    &program.app_id,
                    &expected,
                    &rejected,
                    &chain,
                    &vote_chain,
                    &weights,
                );
                if report.recompute_rx(&weights) != report.r_x {
                    return Err(AppError::internal(format!(
                        "risk recomputation mismatch for {}",
                        program.app_id
                    )));
                }

                let annotated_path = args.out.join(format!("{}.annotated.jsonl", program.app_id));
                io::write_tuples_file(&annotated_path, &header, &expected)?;

                let mut flow_lines: Vec<String> = flow_records
                    .iter()
                    .map(|r| serde_json::to_string(r).expect("flow serialization"))
                    .collect();
                flow_lines.sort();
                let mut flows_text = flow_lines.join("\n");
                if !flows_text.is_empty() {
                    flows_text.push('\n');
                }
                io::atomic_write(
                    &args.out.join(format!("{}.flows.jsonl", program.app_id)),
                    &flows_text,
                )?;

                let report_json = serde_json::to_string_pretty(&report)
                    .expect("report serialization cannot fail");
                io::atomic_write(
                    &args.out.join(format!("{}.risk.json", program.app_id)),
                    &(report_json + "\n"),
                )?;
                Ok(report)
            })
            .collect::<Result<Vec<_>, AppError>>()
    })?;

    // CSV needs one uniform column set; insist on a shared chain.
    let mut reports = reports;
    reports.sort_by(|a, b| a.app_id.cmp(&b.app_id));
    if let Some(first) = reports.first() {
        let chain = first.chain.clone();
        if reports.iter().any(|r| r.chain != chain) {
            return Err(AppError::input(
                "apps resolved to different default chains; pass --chain explicitly".to_string(),
            ));
        }
        io::atomic_write(&args.out.join("risk.csv"), &csv_rows(&reports, &chain))?;
    }

    println!(
        "assess: wrote {} risk report(s) to {}",
        reports.len(),
        args.out.display()
    );
    Ok(())
}
