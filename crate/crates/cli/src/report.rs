//! `cryptorisk report`: a quick human-readable digest of risk reports.

use std::path::PathBuf;

use clap::Args;

use cryptorisk_core::risk::AppRiskReport;
use cryptorisk_core::taxonomy::{SinkCategory, VulnId};

use crate::io;
use crate::AppError;

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Directory of `<app>.risk.json` reports.
    #[arg(long)]
    pub risk: PathBuf,
}

pub fn run(args: ReportArgs) -> Result<(), AppError> {
    let files = io::list_files(&args.risk, ".risk.json")?;
    if files.is_empty() {
        return Err(AppError::input(format!(
            "no .risk.json reports under {}",
            args.risk.display()
        )));
    }

    let mut reports = Vec::new();
    for file in files {
        let text = io::read_to_string(&file)?;
        let report: AppRiskReport = serde_json::from_str(&text)
            .map_err(|e| AppError::input(format!("{}: {e}", file.display())))?;
        reports.push(report);
    }
    reports.sort_by(|a, b| b.r_x.cmp(&a.r_x).then_with(|| a.app_id.cmp(&b.app_id)));

    println!(
        "{:<30} {:>10} {:>8} {:>8}  top sink categories",
        "app", "R_x", "misuses", "flows"
    );
    for report in &reports {
        let flows: u64 = SinkCategory::ALL
            .iter()
            .flat_map(|&sc| VulnId::all().map(move |id| report.n_count(sc, id)))
            .sum();
        let mut by_category: Vec<(SinkCategory, u64)> = SinkCategory::ALL
            .iter()
            .map(|&sc| {
                (
                    sc,
                    VulnId::all().map(|id| report.n_count(sc, id)).sum::<u64>(),
                )
            })
            .filter(|(_, n)| *n > 0)
            .collect();
        by_category.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.name().cmp(b.0.name())));
        let tops = by_category
            .iter()
            .take(3)
            .map(|(sc, n)| format!("{sc}:{n}"))
            .collect::<Vec<_>>()
            .join(" ");
        println!(
            "{:<30} {:>10} {:>8} {:>8}  {}",
            report.app_id, report.r_x, report.expected_tps, flows, tops
        );
    }

    let total: u64 = reports.iter().map(|r| r.r_x).sum();
    let zero = reports.iter().filter(|r| r.r_x == 0).count();
    println!(
        "{} app(s), total R_x {}, {} with no sensitive flow",
        reports.len(),
        total,
        zero
    );
    Ok(())
}
