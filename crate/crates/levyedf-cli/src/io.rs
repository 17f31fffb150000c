//! CSV ingestion, CSV/JSON writers and run manifests.
//!
//! All floating-point CSV output uses 17 significant digits so values
//! round-trip losslessly through text.

use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// 17 significant digits: lossless f64 round-trip.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputFormat {
    Increments,
    Prices,
}

impl std::str::FromStr for InputFormat {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "increments" => Ok(InputFormat::Increments),
            "prices" => Ok(InputFormat::Prices),
            other => Err(CliError::Config(format!(
                "unknown input format '{other}' (expected increments or prices)"
            ))),
        }
    }
}

/// Relative tolerance for regular spacing of price timestamps.
const SPACING_TOL: f64 = 1e-9;

/// Read increments from CSV. `increments` files carry one `increment` column;
/// `prices` files carry `timestamp,price` rows which are differenced, with
/// the mesh width inferred from the (regular) timestamps.
pub fn ingest_csv(path: &Path, format: InputFormat) -> Result<(Vec<f64>, Option<f64>), CliError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize, CliError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Data(format!("missing '{name}' column in {}", path.display())))
    };
    let parse = |field: &str, row: usize| -> Result<f64, CliError> {
        let v: f64 = field
            .parse()
            .map_err(|_| CliError::Data(format!("row {row}: '{field}' is not a number")))?;
        if !v.is_finite() {
            return Err(CliError::Data(format!("row {row}: non-finite value {v}")));
        }
        Ok(v)
    };

    match format {
        InputFormat::Increments => {
            let idx = col("increment")?;
            let mut increments = Vec::new();
            for (i, record) in reader.records().enumerate() {
                let record = record?;
                increments.push(parse(&record[idx], i + 1)?);
            }
            if increments.is_empty() {
                return Err(CliError::Data("no increments in input".into()));
            }
            Ok((increments, None))
        }
        InputFormat::Prices => {
            let t_idx = col("timestamp")?;
            let p_idx = col("price")?;
            let mut timestamps = Vec::new();
            let mut prices = Vec::new();
            for (i, record) in reader.records().enumerate() {
                let record = record?;
                timestamps.push(parse(&record[t_idx], i + 1)?);
                prices.push(parse(&record[p_idx], i + 1)?);
            }
            if prices.len() < 2 {
                return Err(CliError::Data("need at least 2 price rows".into()));
            }
            let dt = timestamps[1] - timestamps[0];
            if !(dt > 0.0) {
                return Err(CliError::Data("non-increasing timestamps".into()));
            }
            let mut max_dev = 0.0f64;
            for w in timestamps.windows(2) {
                let step = w[1] - w[0];
                if !(step > 0.0) {
                    return Err(CliError::Data("non-increasing timestamps".into()));
                }
                max_dev = max_dev.max((step - dt).abs());
            }
            if max_dev > SPACING_TOL * dt {
                return Err(CliError::Data(format!(
                    "irregular spacing: max deviation {max_dev:.3e} exceeds {SPACING_TOL:.0e} relative to dt = {dt}"
                )));
            }
            let increments = prices.windows(2).map(|w| w[1] - w[0]).collect();
            Ok((increments, Some(dt)))
        }
    }
}

/// Canonical JSON (sorted keys via `serde_json::Value`) and its SHA-256 hex.
pub fn config_hash<T: Serialize>(config: &T) -> Result<(serde_json::Value, String), CliError> {
    let value = serde_json::to_value(config)?;
    let canonical = serde_json::to_string(&value)?;
    let digest = Sha256::digest(canonical.as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    Ok((value, hex))
}

/// Every run writes this first; a run is reproducible from the manifest
/// alone.
pub fn write_manifest<T: Serialize>(
    out_dir: &Path,
    command: &str,
    config: &T,
    seed: Option<u64>,
) -> Result<(), CliError> {
    fs::create_dir_all(out_dir)?;
    let (config_value, hash) = config_hash(config)?;
    let manifest = serde_json::json!({
        "tool": "levyedf",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config_hash": hash,
        "seed": seed,
        "config": config_value,
    });
    fs::write(out_dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// Write one CSV with pre-formatted string fields.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(row)?;
    }
    writer.flush()?;
    Ok(())
}
