//! Ingestion adapter: maps the public PoseIt release layout into the local
//! dataset schema.
//!
//! The adapter accepts a source tree in either of two forms:
//!
//! 1. an index file at the root (`index.json` / `labels.json` /
//!    `annotations.json`) holding a JSON array of per-trial records, or
//! 2. one directory per trial, each containing a JSON metadata file
//!    (`meta.json`, `labels.json`, or `info.json`).
//!
//! Record fields are matched against a list of known aliases
//! (`object`/`object_id`/`object_name`, `force`/`grip_force`/`grip_force_n`,
//! `pose`/`pose_id`/`pose_index`, per-phase labels either nested under
//! `labels` or as flat `grasp_label`-style keys). Anything the mapping does
//! not recognize is preserved verbatim in the cycle's `raw` sub-record, so
//! no information from the release is lost.
//!
//! Ingested cycles are metadata-only unless stream arrays are converted
//! separately; the statistics reporter and split protocols only need the
//! metadata records.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{Error, Result};

use super::store::{read_json, write_json, DATASET_FILE};
use super::{CycleMeta, Phase, PhaseLabel, PhaseMap};

const INDEX_NAMES: [&str; 3] = ["index.json", "labels.json", "annotations.json"];
const TRIAL_META_NAMES: [&str; 3] = ["meta.json", "labels.json", "info.json"];

/// Ingest `src` and write a schema-conformant dataset directory at `dest`.
/// Returns the ingested metadata records in cycle-id order.
pub fn ingest(src: &Path, dest: &Path) -> Result<Vec<CycleMeta>> {
    let records = collect_records(src)?;
    if records.is_empty() {
        return Err(Error::Invalid(format!(
            "no ingestable records found under {}",
            src.display()
        )));
    }

    let mut metas = Vec::with_capacity(records.len());
    let mut seen = BTreeSet::new();
    for (origin, record) in records {
        let meta = map_record(&origin, record)?;
        if !seen.insert(meta.cycle_id.clone()) {
            return Err(Error::Invalid(format!("duplicate cycle_id `{}`", meta.cycle_id)));
        }
        metas.push(meta);
    }
    metas.sort_by(|a, b| a.cycle_id.cmp(&b.cycle_id));

    fs::create_dir_all(dest.join("cycles")).map_err(|e| Error::io(dest, e))?;
    write_json(
        &dest.join(DATASET_FILE),
        &serde_json::json!({
            "provenance": "ingested",
            "n_cycles": metas.len(),
            "config": { "source": src.display().to_string() },
        }),
    )?;
    for meta in &metas {
        let dir = dest.join("cycles").join(&meta.cycle_id);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_json(&dir.join("meta.json"), meta)?;
    }
    Ok(metas)
}

fn collect_records(src: &Path) -> Result<Vec<(String, Map<String, Value>)>> {
    for name in INDEX_NAMES {
        let index = src.join(name);
        if index.is_file() {
            let value: Value = read_json(&index)?;
            let array = value.as_array().ok_or_else(|| Error::Metadata {
                path: index.clone(),
                message: "index file must hold a JSON array of records".into(),
            })?;
            let mut out = Vec::new();
            for (i, item) in array.iter().enumerate() {
                let obj = item.as_object().ok_or_else(|| Error::Metadata {
                    path: index.clone(),
                    message: format!("record {i} is not an object"),
                })?;
                out.push((format!("{}#{}", name, i), obj.clone()));
            }
            return Ok(out);
        }
    }

    // Per-trial directories.
    let mut out = Vec::new();
    let mut dirs: Vec<_> = fs::read_dir(src)
        .map_err(|e| Error::io(src, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    for dir in dirs {
        for name in TRIAL_META_NAMES {
            let meta_path = dir.join(name);
            if meta_path.is_file() {
                let value: Value = read_json(&meta_path)?;
                if let Some(obj) = value.as_object() {
                    let mut obj = obj.clone();
                    // The directory name doubles as the trial id if absent.
                    if !obj.contains_key("cycle_id") && !obj.contains_key("id") {
                        if let Some(stem) = dir.file_name() {
                            obj.insert(
                                "cycle_id".into(),
                                Value::String(stem.to_string_lossy().into_owned()),
                            );
                        }
                    }
                    out.push((dir.display().to_string(), obj));
                }
                break;
            }
        }
    }
    Ok(out)
}

fn take_first(record: &mut Map<String, Value>, aliases: &[&str]) -> Option<Value> {
    for alias in aliases {
        if let Some(v) = record.remove(*alias) {
            return Some(v);
        }
    }
    None
}

fn as_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().parse().ok(),
        _ => None,
    }
}

fn parse_label(origin: &str, v: &Value) -> Result<PhaseLabel> {
    let text = as_string(v)
        .ok_or_else(|| Error::Invalid(format!("{origin}: label is not a string: {v}")))?;
    let norm: String = text
        .trim()
        .to_ascii_lowercase()
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect();
    match norm.as_str() {
        "pass" | "stable" | "0" => Ok(PhaseLabel::Pass),
        "slip" | "1" => Ok(PhaseLabel::Slip),
        "drop" | "dropped" | "fall" | "2" => Ok(PhaseLabel::Drop),
        "notpresent" | "absent" | "none" | "na" | "3" => Ok(PhaseLabel::NotPresent),
        _ => Err(Error::Invalid(format!("{origin}: unknown label `{text}`"))),
    }
}

fn map_record(origin: &str, mut record: Map<String, Value>) -> Result<CycleMeta> {
    let cycle_id = take_first(&mut record, &["cycle_id", "id", "trial_id", "datapoint_id"])
        .and_then(|v| as_string(&v))
        .ok_or_else(|| Error::Invalid(format!("{origin}: missing cycle id")))?;
    let object_id = take_first(&mut record, &["object_id", "object", "object_name"])
        .and_then(|v| as_string(&v))
        .ok_or_else(|| Error::Invalid(format!("{origin}: missing object id")))?;
    let grasp_point_id = take_first(
        &mut record,
        &["grasp_point_id", "grasp_point", "grasp_location", "grasp_id"],
    )
    .and_then(|v| as_string(&v))
    .unwrap_or_else(|| "gp0".to_string());
    let grip_force_n = take_first(
        &mut record,
        &["grip_force_n", "grip_force", "force", "force_n", "gripper_force"],
    )
    .and_then(|v| as_f64(&v))
    .ok_or_else(|| Error::Invalid(format!("{origin}: missing grip force")))?;
    let pose_id = take_first(&mut record, &["pose_id", "pose", "pose_index", "holding_pose"])
        .and_then(|v| as_f64(&v))
        .ok_or_else(|| Error::Invalid(format!("{origin}: missing pose id")))?
        as u8;

    // Labels: nested object or flat per-phase keys.
    let nested = take_first(&mut record, &["labels", "stability", "annotations"]);
    let mut label_for = |phase: Phase| -> Result<PhaseLabel> {
        if let Some(Value::Object(obj)) = &nested {
            if let Some(v) = obj.get(phase.name()) {
                return parse_label(origin, v);
            }
        }
        let flat_keys = [
            format!("{}_label", phase.name()),
            format!("label_{}", phase.name()),
            phase.name().to_string(),
        ];
        for key in &flat_keys {
            if let Some(v) = record.remove(key) {
                return parse_label(origin, &v);
            }
        }
        Err(Error::Invalid(format!(
            "{origin}: missing label for phase `{}`",
            phase.name()
        )))
    };
    let phase_labels = PhaseMap {
        grasp: label_for(Phase::Grasp)?,
        pose: label_for(Phase::Pose)?,
        shake: label_for(Phase::Shake)?,
        retract: label_for(Phase::Retract)?,
    };

    let phase_boundaries = match take_first(&mut record, &["phase_boundaries", "phases"]) {
        Some(v) => parse_boundaries(origin, &v)?,
        // The release's label tables carry no timing; default to a unit
        // timeline so metadata-only records stay schema-valid.
        None => PhaseMap {
            grasp: (1.0, 2.0),
            pose: (2.0, 3.0),
            shake: (3.0, 4.0),
            retract: (4.0, 5.0),
        },
    };

    let raw = if record.is_empty() {
        None
    } else {
        Some(Value::Object(record))
    };

    Ok(CycleMeta {
        cycle_id,
        object_id,
        grasp_point_id,
        grip_force_n,
        pose_id,
        phase_labels,
        phase_boundaries,
        raw,
    })
}

fn parse_boundaries(origin: &str, v: &Value) -> Result<PhaseMap<(f64, f64)>> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::Invalid(format!("{origin}: phase_boundaries is not an object")))?;
    let get = |phase: Phase| -> Result<(f64, f64)> {
        let arr = obj
            .get(phase.name())
            .and_then(|x| x.as_array())
            .ok_or_else(|| {
                Error::Invalid(format!("{origin}: missing boundary for `{}`", phase.name()))
            })?;
        if arr.len() != 2 {
            return Err(Error::Invalid(format!(
                "{origin}: boundary for `{}` must be [start, end]",
                phase.name()
            )));
        }
        let s = as_f64(&arr[0]).ok_or_else(|| Error::Invalid(format!("{origin}: bad start")))?;
        let e = as_f64(&arr[1]).ok_or_else(|| Error::Invalid(format!("{origin}: bad end")))?;
        Ok((s, e))
    };
    Ok(PhaseMap {
        grasp: get(Phase::Grasp)?,
        pose: get(Phase::Pose)?,
        shake: get(Phase::Shake)?,
        retract: get(Phase::Retract)?,
    })
}
