//! `cryptorisk fleet`: clustering and association-rule mining over a
//! directory of risk reports.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand};
use serde::Serialize;

use cryptorisk_core::fleet::{
    dbi, extract_features, kmeans, mine_rules, top_labels, FeatureVector, LabelStat, MU_DIMS,
};
use cryptorisk_core::risk::AppRiskReport;

use crate::io;
use crate::AppError;

#[derive(Subcommand, Debug)]
pub enum FleetSubcommand {
    /// Sweep k, report the Davies-Bouldin index per k, and emit cluster
    /// artifacts for the chosen k.
    Cluster(ClusterArgs),
    /// Mine single-antecedent association rules between (type, sink) labels.
    Mine(MineArgs),
}

#[derive(Args, Debug)]
pub struct ClusterArgs {
    /// Directory of `<app>.risk.json` reports from the assess stage.
    #[arg(long)]
    pub reports: PathBuf,
    /// Cluster count; when absent, the swept k with the best (lowest) DBI.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub k_min: usize,
    #[arg(long, default_value_t = 8)]
    pub k_max: usize,
    /// RNG seed for centroid initialization.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Cluster on the flow counts (ν) only, ignoring detectability flags.
    #[arg(long)]
    pub nu_only: bool,
    /// How many labels to keep per cluster summary.
    #[arg(long, default_value_t = 3)]
    pub top_labels: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct MineArgs {
    /// Directory of `<app>.risk.json` reports from the assess stage.
    #[arg(long)]
    pub reports: PathBuf,
    /// Minimum number of supporting apps for a rule.
    #[arg(long, default_value_t = cryptorisk_core::fleet::DEFAULT_MIN_SUPPORT_APPS)]
    pub min_support_apps: usize,
    /// Confidence threshold; rules must exceed it strictly.
    #[arg(long, default_value_t = cryptorisk_core::fleet::DEFAULT_MIN_CONFIDENCE)]
    pub min_conf: f64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn load_features(reports_dir: &Path) -> Result<Vec<FeatureVector>, AppError> {
    let files = io::list_files(reports_dir, ".risk.json")?;
    if files.is_empty() {
        return Err(AppError::input(format!(
            "no .risk.json reports under {}",
            reports_dir.display()
        )));
    }
    let mut features = Vec::new();
    for file in files {
        let text = io::read_to_string(&file)?;
        let report: AppRiskReport = serde_json::from_str(&text)
            .map_err(|e| AppError::input(format!("{}: {e}", file.display())))?;
        features.push(extract_features(&report)?);
    }
    features.sort_by(|a, b| a.app_id.cmp(&b.app_id));
    Ok(features)
}

#[derive(Serialize)]
struct ClusterSummary {
    cluster: usize,
    apps: usize,
    centroid: Vec<f64>,
    top_labels: Vec<LabelStat>,
}

#[derive(Serialize)]
struct SummariesFile {
    summaries_version: u32,
    k: usize,
    seed: u64,
    nu_only: bool,
    dbi: f64,
    clusters: Vec<ClusterSummary>,
}

pub fn run(command: FleetSubcommand) -> Result<(), AppError> {
    match command {
        FleetSubcommand::Cluster(args) => run_cluster(args),
        FleetSubcommand::Mine(args) => run_mine(args),
    }
}

fn run_cluster(args: ClusterArgs) -> Result<(), AppError> {
    let features = load_features(&args.reports)?;
    let points: Vec<Vec<f64>> = features
        .iter()
        .map(|f| {
            if args.nu_only {
                f.values[MU_DIMS..].to_vec()
            } else {
                f.values.clone()
            }
        })
        .collect();

    let ks: Vec<usize> = match args.k {
        Some(k) => vec![k],
        None => {
            if args.k_min < 2 || args.k_min > args.k_max {
                return Err(AppError::input(format!(
                    "bad k range {}..={}",
                    args.k_min, args.k_max
                )));
            }
            (args.k_min..=args.k_max.min(points.len())).collect()
        }
    };
    if ks.is_empty() || ks[0] > points.len() {
        return Err(AppError::input(format!(
            "need at least k apps to cluster ({} apps available)",
            points.len()
        )));
    }

    std::fs::create_dir_all(&args.out)
        .map_err(|e| AppError::input(format!("creating {}: {e}", args.out.display())))?;

    let mut sweep = Vec::new();
    for &k in &ks {
        let result = kmeans(&points, k, args.seed).map_err(AppError::from)?;
        // A k that strands empty clusters (possible when the fleet has fewer
        // distinct feature vectors than k) has no Davies-Bouldin index; it is
        // recorded as NaN and never chosen.
        let index = if k >= 2 {
            dbi(&points, &result.assignments, k).unwrap_or(f64::NAN)
        } else {
            f64::NAN
        };
        if args.k.is_some() && !index.is_finite() && k >= 2 {
            return Err(AppError::input(format!(
                "k = {k} leaves empty or degenerate clusters on this fleet"
            )));
        }
        // Label-discrimination diagnostic: distinct top labels across clusters.
        let mut tops = BTreeSet::new();
        for cluster in 0..k {
            let members: Vec<&FeatureVector> = features
                .iter()
                .zip(&result.assignments)
                .filter(|(_, &a)| a == cluster)
                .map(|(f, _)| f)
                .collect();
            if let Some(top) = top_labels(&members, 1).first() {
                tops.insert((top.id, top.category));
            }
        }
        sweep.push((k, index, tops.len(), result));
    }

    let mut dbi_csv = String::from("k,dbi,distinct_top_labels\n");
    for (k, index, distinct, _) in &sweep {
        dbi_csv.push_str(&format!("{k},{index},{distinct}\n"));
    }
    io::atomic_write(&args.out.join("dbi_vs_k.csv"), &dbi_csv)?;

    let chosen = match args.k {
        Some(k) => k,
        None => sweep
            .iter()
            .filter(|(_, index, _, _)| index.is_finite())
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)))
            .map(|(k, _, _, _)| *k)
            .unwrap_or(ks[0]),
    };
    let (_, chosen_dbi, _, result) = sweep
        .into_iter()
        .find(|(k, _, _, _)| *k == chosen)
        .expect("chosen k came from the sweep");

    let mut clusters_csv = String::from("app_id,cluster\n");
    for (feature, assignment) in features.iter().zip(&result.assignments) {
        clusters_csv.push_str(&format!("{},{assignment}\n", feature.app_id));
    }
    io::atomic_write(&args.out.join("clusters.csv"), &clusters_csv)?;

    let mut clusters = Vec::new();
    for cluster in 0..chosen {
        let members: Vec<&FeatureVector> = features
            .iter()
            .zip(&result.assignments)
            .filter(|(_, &a)| a == cluster)
            .map(|(f, _)| f)
            .collect();
        clusters.push(ClusterSummary {
            cluster,
            apps: members.len(),
            centroid: result.centroids[cluster].clone(),
            top_labels: top_labels(&members, args.top_labels),
        });
    }
    let summaries = SummariesFile {
        summaries_version: 1,
        k: chosen,
        seed: args.seed,
        nu_only: args.nu_only,
        dbi: chosen_dbi,
        clusters,
    };
    let json = serde_json::to_string_pretty(&summaries).expect("summary serialization");
    io::atomic_write(&args.out.join("summaries.json"), &(json + "\n"))?;

    println!(
        "fleet cluster: k={chosen}, dbi={chosen_dbi:.6}, artifacts in {}",
        args.out.display()
    );
    Ok(())
}

fn run_mine(args: MineArgs) -> Result<(), AppError> {
    if args.min_support_apps < 1 {
        return Err(AppError::input(
            "--min-support-apps must be at least 1".to_string(),
        ));
    }
    if !(args.min_conf > 0.0 && args.min_conf <= 1.0) {
        return Err(AppError::input("--min-conf must be in (0, 1]".to_string()));
    }
    let features = load_features(&args.reports)?;
    let transactions: Vec<_> = features.iter().map(FeatureVector::labels).collect();
    let rules = mine_rules(&transactions, args.min_support_apps, args.min_conf);

    std::fs::create_dir_all(&args.out)
        .map_err(|e| AppError::input(format!("creating {}: {e}", args.out.display())))?;

    let mut csv = String::from(
        "antecedent_id,antecedent_sc,consequent_id,consequent_sc,antecedent_apps,joint_apps,confidence\n",
    );
    for rule in &rules {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            rule.antecedent.0,
            rule.antecedent.1,
            rule.consequent.0,
            rule.consequent.1,
            rule.antecedent_apps,
            rule.joint_apps,
            rule.confidence
        ));
    }
    io::atomic_write(&args.out.join("rules.csv"), &csv)?;

    println!(
        "fleet mine: {} rule(s) written to {}",
        rules.len(),
        args.out.display()
    );
    Ok(())
}
