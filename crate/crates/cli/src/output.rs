//! Atomic report files and the run manifest.

use std::fs;
use std::io;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::json;

use crate::commands::Outcome;
use crate::config::Config;

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

fn core_io(e: shiftconv::Error) -> io::Error {
    io::Error::other(e.to_string())
}

/// Every report as CSV and JSONL, then `manifest.json`.
pub fn write_all(
    dir: &Path,
    subcommand: &str,
    config_path: Option<&Path>,
    cfg: &Config,
    outcome: &Outcome,
    exit_code: i32,
) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let mut outputs = Vec::new();
    for r in &outcome.reports {
        let mut csv = Vec::new();
        r.write_csv(&mut csv).map_err(core_io)?;
        let mut jsonl = Vec::new();
        r.write_jsonl(&mut jsonl).map_err(core_io)?;
        for (ext, bytes) in [("csv", csv), ("jsonl", jsonl)] {
            let file = format!("{}.{ext}", r.name);
            write_atomic(&dir.join(&file), &bytes)?;
            outputs.push(file);
        }
    }
    let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let gates: Vec<_> = outcome
        .gates
        .iter()
        .map(|g| json!({ "name": g.name, "passed": g.passed, "detail": g.detail }))
        .collect();
    let manifest = json!({
        "subcommand": subcommand,
        "config_path": config_path.map(|p| p.display().to_string()),
        "config_hash": cfg.hash(),
        "outputs": outputs,
        "gates": gates,
        "exit_code": exit_code,
        "timestamp": timestamp,
    });
    let mut text = serde_json::to_string_pretty(&manifest).map_err(io::Error::other)?;
    text.push('\n');
    write_atomic(&dir.join("manifest.json"), text.as_bytes())
}
