//! Result persistence: CSV tables with fixed, documented columns and a
//! versioned JSON summary carrying the config echo and a content hash.

use crate::config::ExperimentConfig;
use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

/// Rows of profile-shaped tables: macroscopic time, lattice coordinate
/// x/N, value and standard error (0 for deterministic outputs).
#[derive(Debug, Serialize)]
pub struct ProfileRow {
    pub time: f64,
    pub x_over_n: f64,
    pub value: f64,
    pub se: f64,
}

pub fn write_profile_csv(path: &Path, rows: &[ProfileRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record(["time", "x_over_N", "value", "se"])?;
    for r in rows {
        w.write_record([
            r.time.to_string(),
            r.x_over_n.to_string(),
            r.value.to_string(),
            r.se.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_table_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// SHA-256 of the canonical JSON serialization of the resolved config.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let canon = serde_json::to_string(config).expect("config serializes");
    let mut h = Sha256::new();
    h.update(canon.as_bytes());
    hex_string(&h.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Write the versioned summary record next to the task's CSV output.
pub fn write_summary(
    config: &ExperimentConfig,
    payload: Value,
    columns: Value,
    wall_ms: u128,
) -> Result<PathBuf> {
    let record = json!({
        "schema_version": SCHEMA_VERSION,
        "task": config.task.name(),
        "config": serde_json::to_value(config)?,
        "config_sha256": config_hash(config),
        "units": {
            "time": "macroscopic (already divided by Theta(N))",
            "x_over_N": "lattice coordinate in (0,1)",
        },
        "columns": columns,
        "payload": payload,
        "wall_ms": wall_ms,
    });
    let path = config.out_dir.join(format!("{}_summary.json", config.task.name()));
    std::fs::write(&path, serde_json::to_string_pretty(&record)?)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}
