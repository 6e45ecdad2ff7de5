//! `cryptorisk detect`: parse CEIR programs, run the built-in detector and
//! any external detector reports, merge, and write per-app tuple streams.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;

use cryptorisk_core::adapters::{merge_and_dedup, parse_report, UnmappedFinding};
use cryptorisk_core::detector::{detect, BUILT_IN_DETECTOR};
use cryptorisk_core::ir::parse_program;
use cryptorisk_core::misuse::MisuseTuple;
use cryptorisk_core::Program;

use crate::io::{self, TuplesHeader};
use crate::{load_taxonomy, with_jobs, AppError};

#[derive(Args, Debug)]
pub struct DetectArgs {
    /// A CEIR JSON file or a directory of them.
    #[arg(long)]
    pub programs: PathBuf,
    /// Directory of external detector reports (JSON, any file names).
    #[arg(long)]
    pub reports: Option<PathBuf>,
    /// Catalog file overriding the embedded default.
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Output directory for `<app>.tuples.jsonl` (and `.unmapped.jsonl`).
    #[arg(long)]
    pub out: PathBuf,
    /// Bound on app-level parallelism.
    #[arg(long)]
    pub jobs: Option<usize>,
}

/// Collects program files from a path that is either one file or a directory.
pub fn program_files(path: &Path) -> Result<Vec<PathBuf>, AppError> {
    if path.is_file() {
        Ok(vec![path.to_path_buf()])
    } else if path.is_dir() {
        let files = io::list_files(path, ".json")?;
        if files.is_empty() {
            return Err(AppError::input(format!(
                "no .json programs under {}",
                path.display()
            )));
        }
        Ok(files)
    } else {
        Err(AppError::input(format!(
            "{} is neither a file nor a directory",
            path.display()
        )))
    }
}

/// Parses every program, failing with a listing of all per-file errors.
pub fn load_programs(path: &Path) -> Result<Vec<Program>, AppError> {
    let files = program_files(path)?;
    let mut programs = Vec::new();
    let mut errors = Vec::new();
    for file in files {
        let text = io::read_to_string(&file)?;
        match parse_program(&text) {
            Ok(p) => {
                if let Err(e) = io::check_app_id(&p.app_id) {
                    errors.push(format!("{}: {:?}", file.display(), e));
                } else {
                    programs.push(p);
                }
            }
            Err(e) => errors.push(format!("{}: {e}", file.display())),
        }
    }
    if !errors.is_empty() {
        return Err(AppError::input(format!(
            "{} program file(s) failed to parse:\n{}",
            errors.len(),
            errors.join("\n")
        )));
    }
    let mut seen = std::collections::BTreeSet::new();
    for p in &programs {
        if !seen.insert(p.app_id.clone()) {
            return Err(AppError::input(format!("duplicate app id {:?}", p.app_id)));
        }
    }
    programs.sort_by(|a, b| a.app_id.cmp(&b.app_id));
    Ok(programs)
}

struct AppReports {
    detectors: Vec<String>,
    tuples: Vec<MisuseTuple>,
    unmapped: Vec<UnmappedFinding>,
}

pub fn run(args: DetectArgs) -> Result<(), AppError> {
    let taxonomy = load_taxonomy(&args.catalog)?;
    let programs = load_programs(&args.programs)?;

    // External reports, grouped by the app they describe.
    let mut by_app: BTreeMap<String, AppReports> = BTreeMap::new();
    if let Some(reports_dir) = &args.reports {
        for file in io::list_files(reports_dir, ".json")? {
            let text = io::read_to_string(&file)?;
            let value: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| AppError::input(format!("{}: {e}", file.display())))?;
            let detector = value["detector"]
                .as_str()
                .ok_or_else(|| {
                    AppError::input(format!("{}: missing detector field", file.display()))
                })?
                .to_string();
            let app_id = value["app_id"]
                .as_str()
                .ok_or_else(|| {
                    AppError::input(format!("{}: missing app_id field", file.display()))
                })?
                .to_string();
            let (tuples, unmapped) = parse_report(&taxonomy, &detector, &text)
                .map_err(|e| AppError::input(format!("{}: {e}", file.display())))?;
            let entry = by_app.entry(app_id).or_insert_with(|| AppReports {
                detectors: Vec::new(),
                tuples: Vec::new(),
                unmapped: Vec::new(),
            });
            if !entry.detectors.contains(&detector) {
                entry.detectors.push(detector);
            }
            entry.tuples.extend(tuples);
            entry.unmapped.extend(unmapped);
        }
        for app in by_app.keys() {
            if !programs.iter().any(|p| &p.app_id == app) {
                eprintln!("warning: reports for {app:?} have no matching program; skipped");
            }
        }
    }

    std::fs::create_dir_all(&args.out)
        .map_err(|e| AppError::input(format!("creating {}: {e}", args.out.display())))?;

    with_jobs(args.jobs, || {
        programs
            .par_iter()
            .map(|program| {
                let mut tuples = detect(program);
                let mut detectors = vec![BUILT_IN_DETECTOR.to_string()];
                let mut unmapped: Vec<UnmappedFinding> = Vec::new();
                if let Some(reports) = by_app.get(&program.app_id) {
                    tuples.extend(reports.tuples.iter().cloned());
                    detectors.extend(reports.detectors.iter().cloned());
                    unmapped.extend(reports.unmapped.iter().cloned());
                }
                detectors.sort();
                let merged = merge_and_dedup(&tuples);

                let header = TuplesHeader {
                    tuples_version: 1,
                    app_id: program.app_id.clone(),
                    detectors,
                };
                let path = args.out.join(format!("{}.tuples.jsonl", program.app_id));
                io::write_tuples_file(&path, &header, &merged)?;

                if !unmapped.is_empty() {
                    let mut lines: Vec<String> = unmapped
                        .iter()
                        .map(|u| serde_json::to_string(u).expect("unmapped serialization"))
                        .collect();
                    lines.sort();
                    let path = args.out.join(format!("{}.unmapped.jsonl", program.app_id));
                    io::atomic_write(&path, &(lines.join("\n") + "\n"))?;
                }
                Ok(())
            })
            .collect::<Result<Vec<()>, AppError>>()?;
        Ok(())
    })?;

    println!(
        "detect: wrote tuples for {} app(s) to {}",
        programs.len(),
        args.out.display()
    );
    Ok(())
}
