//! Pluggable frame embedders.
//!
//! The classifiers never see raw pixels; they see fixed-dimensional
//! embeddings from a frozen encoder. The default is a seeded random
//! projection of a pooled image — deterministic, dependency-free, and never
//! trained, preserving the frozen-backbone contract. Users who extract
//! features with a real pretrained vision backbone can load them through
//! [`FileEmbedder`] instead.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2, ArrayView3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_for;

/// Identifies the frame being embedded; keyed lookups (precomputed
/// embeddings) need it, synthesized embedders ignore it.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameKey<'a> {
    pub cycle_id: &'a str,
    pub stream: &'a str,
    pub timestamp: f64,
}

/// Borrowed image content.
#[derive(Debug, Clone, Copy)]
pub enum ImageData<'a> {
    Gray(ArrayView2<'a, f32>),
    Rgb(ArrayView3<'a, f32>),
}

/// A frozen image → vector encoder.
pub trait ImageEmbedder {
    fn dimension(&self) -> usize;
    fn deterministic(&self) -> bool;
    fn embed(&self, key: &FrameKey<'_>, image: &ImageData<'_>) -> Result<Vec<f64>>;
}

/// Average-pool `image` onto a `pool×pool` grid, one block per channel,
/// flattened channel-last.
fn pool_image(image: &ImageData<'_>, pool: usize, channels: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0f64; pool * pool * channels];
    let mut counts = vec![0usize; pool * pool];

    let (h, w) = match image {
        ImageData::Gray(img) => {
            if channels != 1 {
                return Err(Error::ShapeMismatch(format!(
                    "embedder expects {channels}-channel input, got a grayscale frame"
                )));
            }
            (img.nrows(), img.ncols())
        }
        ImageData::Rgb(img) => {
            if channels != 3 {
                return Err(Error::ShapeMismatch(
                    "embedder expects grayscale input, got an RGB frame".into(),
                ));
            }
            (img.shape()[0], img.shape()[1])
        }
    };
    if h == 0 || w == 0 {
        return Err(Error::ShapeMismatch("empty image".into()));
    }

    for r in 0..h {
        let br = r * pool / h;
        for c in 0..w {
            let bc = c * pool / w;
            let bin = br * pool + bc;
            counts[bin] += 1;
            match image {
                ImageData::Gray(img) => out[bin] += img[(r, c)] as f64,
                ImageData::Rgb(img) => {
                    for ch in 0..3 {
                        out[bin * 3 + ch] += img[(r, c, ch)] as f64;
                    }
                }
            }
        }
    }
    for bin in 0..pool * pool {
        let n = counts[bin].max(1) as f64;
        for ch in 0..channels {
            out[bin * channels + ch] /= n;
        }
    }
    Ok(out)
}

/// Frozen seeded Gaussian projection of the pooled image.
pub struct RandomProjectionEmbedder {
    projection: Array2<f64>,
    pool: usize,
    channels: usize,
}

impl RandomProjectionEmbedder {
    fn new(dim: usize, channels: usize, seed: u64, tag: &str) -> Self {
        let pool = 8;
        let input = pool * pool * channels;
        let mut rng = rng_for(seed, tag);
        let scale = 1.0 / (input as f64).sqrt();
        // Box-Muller over seeded uniforms keeps the projection reproducible.
        let projection = Array2::from_shape_fn((dim, input), |_| {
            let u1: f64 = rng.random::<f64>().max(1e-12);
            let u2: f64 = rng.random::<f64>();
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos() * scale
        });
        RandomProjectionEmbedder {
            projection,
            pool,
            channels,
        }
    }

    /// Embedder for single-channel (tactile-delta) frames.
    pub fn for_tactile(dim: usize, seed: u64) -> Self {
        Self::new(dim, 1, seed, "embed/tactile")
    }

    /// Embedder for RGB frames.
    pub fn for_rgb(dim: usize, seed: u64) -> Self {
        Self::new(dim, 3, seed, "embed/rgb")
    }
}

impl ImageEmbedder for RandomProjectionEmbedder {
    fn dimension(&self) -> usize {
        self.projection.nrows()
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn embed(&self, _key: &FrameKey<'_>, image: &ImageData<'_>) -> Result<Vec<f64>> {
        let pooled = pool_image(image, self.pool, self.channels)?;
        let mut out = vec![0.0; self.dimension()];
        for (row, o) in self.projection.rows().into_iter().zip(out.iter_mut()) {
            *o = row.iter().zip(&pooled).map(|(a, b)| a * b).sum();
        }
        Ok(out)
    }
}

/// One precomputed-embedding record: `(cycle_id, stream, timestamp)` → d-vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub cycle_id: String,
    pub stream: String,
    pub t: f64,
    pub v: Vec<f64>,
}

/// Reads embeddings produced by an external (real) backbone from a JSONL
/// file, one [`EmbeddingRecord`] per line. Lookups resolve to the record
/// nearest in time for the frame's `(cycle_id, stream)`.
pub struct FileEmbedder {
    dim: usize,
    by_key: HashMap<(String, String), Vec<(f64, Vec<f64>)>>,
}

impl FileEmbedder {
    pub fn load(path: &Path) -> Result<Self> {
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut by_key: HashMap<(String, String), Vec<(f64, Vec<f64>)>> = HashMap::new();
        let mut dim = None;
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: EmbeddingRecord = serde_json::from_str(&line).map_err(|e| Error::Metadata {
                path: path.to_path_buf(),
                message: format!("line {}: {e}", lineno + 1),
            })?;
            match dim {
                None => dim = Some(rec.v.len()),
                Some(d) if d != rec.v.len() => {
                    return Err(Error::Metadata {
                        path: path.to_path_buf(),
                        message: format!(
                            "line {}: dimension {} differs from {}",
                            lineno + 1,
                            rec.v.len(),
                            d
                        ),
                    });
                }
                _ => {}
            }
            by_key
                .entry((rec.cycle_id, rec.stream))
                .or_default()
                .push((rec.t, rec.v));
        }
        let dim = dim.ok_or_else(|| Error::Metadata {
            path: path.to_path_buf(),
            message: "no embedding records".into(),
        })?;
        for list in by_key.values_mut() {
            list.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        Ok(FileEmbedder { dim, by_key })
    }
}

impl ImageEmbedder for FileEmbedder {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn embed(&self, key: &FrameKey<'_>, _image: &ImageData<'_>) -> Result<Vec<f64>> {
        let list = self
            .by_key
            .get(&(key.cycle_id.to_string(), key.stream.to_string()))
            .ok_or_else(|| {
                Error::Invalid(format!(
                    "no precomputed embeddings for cycle `{}` stream `{}`",
                    key.cycle_id, key.stream
                ))
            })?;
        let idx = list
            .partition_point(|(t, _)| *t < key.timestamp)
            .min(list.len() - 1);
        let best = if idx > 0
            && (key.timestamp - list[idx - 1].0) <= (list[idx].0 - key.timestamp)
        {
            &list[idx - 1]
        } else {
            &list[idx]
        };
        Ok(best.1.clone())
    }
}

/// Write embedding records as JSONL (the [`FileEmbedder`] input format).
pub fn write_embeddings(path: &Path, records: &[EmbeddingRecord]) -> Result<()> {
    let mut out = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for rec in records {
        let line = serde_json::to_string(rec).map_err(|e| Error::Metadata {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
