//! File I/O: JSON-lines traces, atomic writes, and GeoJSON export.
//!
//! All writers go through a write-to-temp-then-rename step so a failed run
//! never leaves a partial output file behind.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::evaluation::TruthSample;
use crate::pipeline::{EstimateRecord, TargetEstimate};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
}

fn file_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::File {
        path: path.display().to_string(),
        source,
    }
}

/// Reads a JSON-lines file, one value per non-empty line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, IoError> {
    let text = fs::read_to_string(path).map_err(|e| file_err(path, e))?;
    let mut items = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(line).map_err(|e| IoError::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message: e.to_string(),
        })?;
        items.push(item);
    }
    Ok(items)
}

/// Serializes items as JSON-lines and writes them atomically.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), IoError> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("serialization"));
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// Writes bytes to a temporary sibling file, then renames into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| file_err(path, e))?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    fs::write(tmp, bytes).map_err(|e| file_err(tmp, e))?;
    fs::rename(tmp, path).map_err(|e| file_err(path, e))
}

pub fn read_to_string(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|e| file_err(path, e))
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, IoError> {
    fs::read(path).map_err(|e| file_err(path, e))
}

/// Estimate records in wire form, ready for [`write_jsonl`].
pub fn estimate_records(estimates: &[TargetEstimate]) -> Vec<EstimateRecord> {
    estimates.iter().map(EstimateRecord::from).collect()
}

/// GeoJSON FeatureCollection for estimate trajectories: one LineString per
/// (target, approach) plus one Point per sample carrying `t`, `d_m`, and
/// `alpha_deg`. Coordinates are `[lon, lat]` per the interchange
/// convention.
pub fn geojson_from_estimates(estimates: &[TargetEstimate]) -> Value {
    let mut groups: BTreeMap<(String, String), Vec<&TargetEstimate>> = BTreeMap::new();
    for e in estimates {
        groups
            .entry((e.target_id.clone(), e.approach.to_string()))
            .or_default()
            .push(e);
    }
    let mut features = Vec::new();
    for ((target_id, approach), group) in groups {
        let coordinates: Vec<Value> = group
            .iter()
            .map(|e| json!([e.position.lon_deg(), e.position.lat_deg()]))
            .collect();
        features.push(json!({
            "type": "Feature",
            "geometry": {"type": "LineString", "coordinates": coordinates},
            "properties": {"target_id": target_id, "approach": approach},
        }));
        for e in group {
            features.push(json!({
                "type": "Feature",
                "geometry": {
                    "type": "Point",
                    "coordinates": [e.position.lon_deg(), e.position.lat_deg()],
                },
                "properties": {
                    "target_id": e.target_id,
                    "approach": e.approach.to_string(),
                    "t": e.t,
                    "d_m": e.distance_m,
                    "alpha_deg": e.bearing_rad.to_degrees(),
                },
            }));
        }
    }
    json!({"type": "FeatureCollection", "features": features})
}

/// GeoJSON FeatureCollection for ground-truth traces: one LineString per
/// target plus per-sample Points with `t`.
pub fn geojson_from_truth(truth: &[TruthSample]) -> Value {
    let mut groups: BTreeMap<String, Vec<&TruthSample>> = BTreeMap::new();
    for s in truth {
        groups
            .entry(s.target_id.clone().unwrap_or_default())
            .or_default()
            .push(s);
    }
    let mut features = Vec::new();
    for (target_id, group) in groups {
        let coordinates: Vec<Value> = group
            .iter()
            .map(|s| json!([s.position.lon_deg(), s.position.lat_deg()]))
            .collect();
        features.push(json!({
            "type": "Feature",
            "geometry": {"type": "LineString", "coordinates": coordinates},
            "properties": {"target_id": target_id, "approach": "truth"},
        }));
        for s in group {
            features.push(json!({
                "type": "Feature",
                "geometry": {
                    "type": "Point",
                    "coordinates": [s.position.lon_deg(), s.position.lat_deg()],
                },
                "properties": {
                    "target_id": s.target_id.clone().unwrap_or_default(),
                    "approach": "truth",
                    "t": s.t,
                },
            }));
        }
    }
    json!({"type": "FeatureCollection", "features": features})
}
