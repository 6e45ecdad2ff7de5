//! File plumbing shared by the commands: atomic writes, deterministic
//! directory listings, and the on-disk tuple-stream framing.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use cryptorisk_core::misuse::{from_jsonl, to_jsonl, MisuseTuple};

use crate::AppError;

/// Writes via a temp file plus rename so readers never observe a partial
/// file and reruns are byte-stable.
pub fn atomic_write(path: &Path, content: &str) -> Result<(), AppError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, content)
        .map_err(|e| AppError::input(format!("writing {}: {e}", tmp.display())))?;
    fs::rename(&tmp, path)
        .map_err(|e| AppError::input(format!("renaming {}: {e}", path.display())))?;
    Ok(())
}

/// All files under `dir` whose name ends with `suffix`, sorted by name.
pub fn list_files(dir: &Path, suffix: &str) -> Result<Vec<PathBuf>, AppError> {
    let entries = fs::read_dir(dir)
        .map_err(|e| AppError::input(format!("reading directory {}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.ends_with(suffix))
        })
        .collect();
    files.sort();
    Ok(files)
}

pub fn read_to_string(path: &Path) -> Result<String, AppError> {
    fs::read_to_string(path).map_err(|e| AppError::input(format!("{}: {e}", path.display())))
}

/// App ids become file names; keep them to a safe alphabet.
pub fn check_app_id(app_id: &str) -> Result<(), AppError> {
    if app_id.is_empty()
        || !app_id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
    {
        return Err(AppError::input(format!(
            "app id {app_id:?} must match [A-Za-z0-9._-]+"
        )));
    }
    Ok(())
}

/// First line of a tuple stream: which detectors actually ran for the app.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuplesHeader {
    pub tuples_version: u32,
    pub app_id: String,
    pub detectors: Vec<String>,
}

pub fn write_tuples_file(
    path: &Path,
    header: &TuplesHeader,
    tuples: &[MisuseTuple],
) -> Result<(), AppError> {
    let mut out = serde_json::to_string(header).expect("header serialization cannot fail");
    out.push('\n');
    out.push_str(&to_jsonl(tuples));
    atomic_write(path, &out)
}

pub fn read_tuples_file(path: &Path) -> Result<(TuplesHeader, Vec<MisuseTuple>), AppError> {
    let text = read_to_string(path)?;
    let mut lines = text.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| AppError::input(format!("{}: empty tuples file", path.display())))?;
    let header: TuplesHeader = serde_json::from_str(header_line)
        .map_err(|e| AppError::input(format!("{}: bad header: {e}", path.display())))?;
    if header.tuples_version != 1 {
        return Err(AppError::input(format!(
            "{}: unsupported tuples_version {}",
            path.display(),
            header.tuples_version
        )));
    }
    let rest: String = lines.collect::<Vec<_>>().join("\n");
    let tuples =
        from_jsonl(&rest).map_err(|e| AppError::input(format!("{}: {e}", path.display())))?;
    Ok((header, tuples))
}
