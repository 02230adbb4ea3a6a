//! On-disk dataset layout.
//!
//! ```text
//! <root>/
//!   dataset.json            provenance, cycle count, generator config echo
//!   poses.json              pose-space table (written by the generator/CLI)
//!   catalog.json            object catalog (synthetic datasets)
//!   cycles/<cycle_id>/
//!     meta.json             CycleMeta record
//!     tactile.npy           T×H×W  f32
//!     tactile_t.npy         T      f64
//!     rgb.npy               T×H×W×3 f32
//!     rgb_t.npy             T      f64
//!     wrench.npy            T×6    f64
//!     wrench_t.npy          T      f64
//!     pre_contact.npy       H×W    f32
//! ```
//!
//! Metadata-only cycles (ingested label records without recordings) simply
//! omit the array files; [`load_metas`] never touches them.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::npy;

use super::{CycleMeta, CycleStreams, Dataset, GraspCycle, Provenance, TimeSeries};

pub const DATASET_FILE: &str = "dataset.json";
const CYCLES_DIR: &str = "cycles";

#[derive(Debug, Serialize, Deserialize)]
struct DatasetRecord {
    provenance: Provenance,
    n_cycles: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config: Option<serde_json::Value>,
}

fn cycle_dir(root: &Path, cycle_id: &str) -> PathBuf {
    root.join(CYCLES_DIR).join(cycle_id)
}

/// Write a dataset directory. `config` is echoed verbatim into
/// `dataset.json` so a run can be replayed from its outputs.
pub fn save_dataset(dataset: &Dataset, root: &Path, config: Option<serde_json::Value>) -> Result<()> {
    fs::create_dir_all(root.join(CYCLES_DIR)).map_err(|e| Error::io(root, e))?;

    let record = DatasetRecord {
        provenance: dataset.provenance,
        n_cycles: dataset.cycles.len(),
        config,
    };
    write_json(&root.join(DATASET_FILE), &record)?;

    for cycle in &dataset.cycles {
        save_cycle(cycle, root)?;
    }
    Ok(())
}

/// Write one cycle's directory under an existing dataset root.
pub fn save_cycle_to(root: &Path, cycle: &GraspCycle) -> Result<()> {
    save_cycle(cycle, root)
}

/// Write (or rewrite) the top-level `dataset.json` record.
pub fn write_dataset_record(
    root: &Path,
    provenance: Provenance,
    n_cycles: usize,
    config: Option<serde_json::Value>,
) -> Result<()> {
    write_json(
        &root.join(DATASET_FILE),
        &DatasetRecord {
            provenance,
            n_cycles,
            config,
        },
    )
}

/// [`CycleSource`](super::CycleSource) over an on-disk dataset directory:
/// metadata is loaded up front, streams on demand.
pub struct DiskSource {
    root: PathBuf,
    metas: Vec<CycleMeta>,
}

impl DiskSource {
    pub fn open(root: &Path) -> Result<Self> {
        let metas = load_metas(root)?;
        Ok(DiskSource {
            root: root.to_path_buf(),
            metas,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
}

impl super::CycleSource for DiskSource {
    fn metas(&self) -> &[CycleMeta] {
        &self.metas
    }

    fn load_cycle(&self, cycle_id: &str) -> Result<GraspCycle> {
        load_cycle(&self.root, cycle_id)
    }
}

pub(crate) fn save_cycle(cycle: &GraspCycle, root: &Path) -> Result<()> {
    let dir = cycle_dir(root, &cycle.meta.cycle_id);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    write_json(&dir.join("meta.json"), &cycle.meta)?;

    let s = &cycle.streams;
    let (t_frames, th, tw) = image_stack_dims(&s.tactile.values);
    npy::write(
        &dir.join("tactile.npy"),
        &[t_frames, th, tw],
        &flatten_gray(&s.tactile.values),
    )?;
    npy::write(&dir.join("tactile_t.npy"), &[s.tactile.len()], &s.tactile.timestamps)?;

    let (r_frames, rh, rw) = rgb_stack_dims(&s.rgb.values);
    npy::write(
        &dir.join("rgb.npy"),
        &[r_frames, rh, rw, 3],
        &flatten_rgb(&s.rgb.values),
    )?;
    npy::write(&dir.join("rgb_t.npy"), &[s.rgb.len()], &s.rgb.timestamps)?;

    let wrench_flat: Vec<f64> = s.wrench.values.iter().flatten().copied().collect();
    npy::write(&dir.join("wrench.npy"), &[s.wrench.len(), 6], &wrench_flat)?;
    npy::write(&dir.join("wrench_t.npy"), &[s.wrench.len()], &s.wrench.timestamps)?;

    let pc = &s.pre_contact_tactile;
    let pc_contig = pc.as_standard_layout();
    npy::write(
        &dir.join("pre_contact.npy"),
        &[pc.nrows(), pc.ncols()],
        pc_contig.as_slice().expect("standard layout"),
    )?;
    Ok(())
}

/// Cycle ids present under `<root>/cycles`, sorted for determinism.
pub fn list_cycle_ids(root: &Path) -> Result<Vec<String>> {
    let dir = root.join(CYCLES_DIR);
    let mut ids = Vec::new();
    for entry in fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))? {
        let entry = entry.map_err(|e| Error::io(&dir, e))?;
        if entry.path().is_dir() {
            ids.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    ids.sort();
    Ok(ids)
}

/// Load every cycle's metadata record (sorted by cycle id). Does not read
/// stream arrays.
pub fn load_metas(root: &Path) -> Result<Vec<CycleMeta>> {
    let mut metas = Vec::new();
    for id in list_cycle_ids(root)? {
        let path = cycle_dir(root, &id).join("meta.json");
        let meta: CycleMeta = read_json(&path)?;
        if meta.cycle_id != id {
            return Err(Error::Metadata {
                path,
                message: format!("cycle_id `{}` does not match directory `{}`", meta.cycle_id, id),
            });
        }
        metas.push(meta);
    }
    Ok(metas)
}

/// Load one cycle with all of its streams.
pub fn load_cycle(root: &Path, cycle_id: &str) -> Result<GraspCycle> {
    let dir = cycle_dir(root, cycle_id);
    let meta: CycleMeta = read_json(&dir.join("meta.json"))?;

    let (tshape, tdata) = npy::read::<f32>(&dir.join("tactile.npy"))?;
    let tactile_frames = unstack_gray(&dir.join("tactile.npy"), &tshape, tdata)?;
    let (_, tactile_t) = npy::read::<f64>(&dir.join("tactile_t.npy"))?;

    let (rshape, rdata) = npy::read::<f32>(&dir.join("rgb.npy"))?;
    let rgb_frames = unstack_rgb(&dir.join("rgb.npy"), &rshape, rdata)?;
    let (_, rgb_t) = npy::read::<f64>(&dir.join("rgb_t.npy"))?;

    let (wshape, wdata) = npy::read::<f64>(&dir.join("wrench.npy"))?;
    if wshape.len() != 2 || wshape[1] != 6 {
        return Err(Error::ArrayFormat {
            path: dir.join("wrench.npy"),
            message: format!("expected T×6, got {:?}", wshape),
        });
    }
    let wrench: Vec<[f64; 6]> = wdata
        .chunks_exact(6)
        .map(|c| [c[0], c[1], c[2], c[3], c[4], c[5]])
        .collect();
    let (_, wrench_t) = npy::read::<f64>(&dir.join("wrench_t.npy"))?;

    let (pshape, pdata) = npy::read::<f32>(&dir.join("pre_contact.npy"))?;
    if pshape.len() != 2 {
        return Err(Error::ArrayFormat {
            path: dir.join("pre_contact.npy"),
            message: format!("expected H×W, got {:?}", pshape),
        });
    }
    let pre_contact =
        Array2::from_shape_vec((pshape[0], pshape[1]), pdata).map_err(|e| Error::ArrayFormat {
            path: dir.join("pre_contact.npy"),
            message: e.to_string(),
        })?;

    Ok(GraspCycle {
        meta,
        streams: CycleStreams {
            tactile: TimeSeries::new(tactile_t, tactile_frames),
            rgb: TimeSeries::new(rgb_t, rgb_frames),
            wrench: TimeSeries::new(wrench_t, wrench),
            pre_contact_tactile: pre_contact,
        },
    })
}

/// Load a full dataset into memory.
pub fn load_dataset(root: &Path) -> Result<Dataset> {
    let record: DatasetRecord = read_json(&root.join(DATASET_FILE))?;
    let mut cycles = Vec::new();
    for id in list_cycle_ids(root)? {
        cycles.push(load_cycle(root, &id)?);
    }
    Ok(Dataset {
        cycles,
        provenance: record.provenance,
    })
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Metadata {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Metadata {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn image_stack_dims(frames: &[Array2<f32>]) -> (usize, usize, usize) {
    match frames.first() {
        Some(f) => (frames.len(), f.nrows(), f.ncols()),
        None => (0, 0, 0),
    }
}

fn rgb_stack_dims(frames: &[Array3<f32>]) -> (usize, usize, usize) {
    match frames.first() {
        Some(f) => (frames.len(), f.shape()[0], f.shape()[1]),
        None => (0, 0, 0),
    }
}

fn flatten_gray(frames: &[Array2<f32>]) -> Vec<f32> {
    let mut out = Vec::new();
    for f in frames {
        out.extend(f.as_standard_layout().iter().copied());
    }
    out
}

fn flatten_rgb(frames: &[Array3<f32>]) -> Vec<f32> {
    let mut out = Vec::new();
    for f in frames {
        out.extend(f.as_standard_layout().iter().copied());
    }
    out
}

fn unstack_gray(path: &Path, shape: &[usize], data: Vec<f32>) -> Result<Vec<Array2<f32>>> {
    if shape.len() != 3 {
        return Err(Error::ArrayFormat {
            path: path.to_path_buf(),
            message: format!("expected T×H×W, got {:?}", shape),
        });
    }
    let (t, h, w) = (shape[0], shape[1], shape[2]);
    let mut frames = Vec::with_capacity(t);
    for chunk in data.chunks_exact(h * w) {
        frames.push(
            Array2::from_shape_vec((h, w), chunk.to_vec()).expect("chunked shape is consistent"),
        );
    }
    Ok(frames)
}

fn unstack_rgb(path: &Path, shape: &[usize], data: Vec<f32>) -> Result<Vec<Array3<f32>>> {
    if shape.len() != 4 || shape[3] != 3 {
        return Err(Error::ArrayFormat {
            path: path.to_path_buf(),
            message: format!("expected T×H×W×3, got {:?}", shape),
        });
    }
    let (t, h, w) = (shape[0], shape[1], shape[2]);
    let mut frames = Vec::with_capacity(t);
    for chunk in data.chunks_exact(h * w * 3) {
        frames.push(
            Array3::from_shape_vec((h, w, 3), chunk.to_vec()).expect("chunked shape is consistent"),
        );
    }
    Ok(frames)
}
