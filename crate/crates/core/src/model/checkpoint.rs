//! Versioned binary checkpoint container.
//!
//! Layout: 8-byte magic, u32 version, u64 JSON-header length, the header
//! (kind, dtype, architecture, caller config such as the training seed, and
//! the tensor directory), then the raw little-endian tensor data in
//! directory order. Floats round-trip bit-exactly.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

use super::lstm::{CellParams, HeadMode, LstmParams, LstmTensors};
use super::{LinearParams, Scalar};

const MAGIC: &[u8; 8] = b"GSCKPT\0\0";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    kind: String,
    dtype: String,
    #[serde(default)]
    arch: Value,
    /// Opaque caller configuration (training hyperparameters, seed, ...).
    #[serde(default)]
    config: Value,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

fn write_container<F: Scalar>(
    path: &Path,
    header: &Header,
    tensor_data: &[(String, Vec<F>)],
) -> Result<()> {
    let header_json = serde_json::to_vec(header).map_err(|e| Error::Metadata {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&header_json);
    for (_, data) in tensor_data {
        for &v in data {
            v.write_le(&mut buf);
        }
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

fn read_container<F: Scalar>(path: &Path) -> Result<(Header, Vec<Vec<F>>)> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.len() < 20 || &raw[..8] != MAGIC {
        return Err(Error::Metadata {
            path: path.to_path_buf(),
            message: "not a checkpoint file".into(),
        });
    }
    let version = u32::from_le_bytes(raw[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(Error::Metadata {
            path: path.to_path_buf(),
            message: format!("unsupported checkpoint version {version}"),
        });
    }
    let hlen = u64::from_le_bytes(raw[12..20].try_into().unwrap()) as usize;
    let header: Header = serde_json::from_slice(&raw[20..20 + hlen]).map_err(|e| {
        Error::Metadata {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    })?;
    if header.dtype != F::DTYPE {
        return Err(Error::Metadata {
            path: path.to_path_buf(),
            message: format!("checkpoint dtype {} but {} requested", header.dtype, F::DTYPE),
        });
    }
    let mut offset = 20 + hlen;
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for entry in &header.tensors {
        let count: usize = entry.shape.iter().product();
        let bytes = count * F::BYTES;
        if raw.len() < offset + bytes {
            return Err(Error::Metadata {
                path: path.to_path_buf(),
                message: format!("truncated tensor `{}`", entry.name),
            });
        }
        let mut data = Vec::with_capacity(count);
        for i in 0..count {
            data.push(F::read_le(&raw[offset + i * F::BYTES..]));
        }
        tensors.push(data);
        offset += bytes;
    }
    Ok((header, tensors))
}

/// Identify a checkpoint's kind and dtype without loading tensors.
pub fn peek_kind(path: &Path) -> Result<(String, String)> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    if raw.len() < 20 || &raw[..8] != MAGIC {
        return Err(Error::Metadata {
            path: path.to_path_buf(),
            message: "not a checkpoint file".into(),
        });
    }
    let hlen = u64::from_le_bytes(raw[12..20].try_into().unwrap()) as usize;
    let header: Header = serde_json::from_slice(&raw[20..20 + hlen]).map_err(|e| {
        Error::Metadata {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    })?;
    Ok((header.kind, header.dtype))
}

pub fn save_lstm<F: Scalar>(path: &Path, params: &LstmParams<F>, config: Value) -> Result<()> {
    let mut tensor_data: Vec<(String, Vec<F>)> = Vec::new();
    let mut clone = params.tensors.clone();
    clone.visit_mut(&mut |name, slice| {
        tensor_data.push((name, slice.to_vec()));
    });
    let entries = params
        .tensors
        .tensor_shapes()
        .into_iter()
        .map(|(name, shape)| TensorEntry { name, shape })
        .collect();
    let header = Header {
        kind: "lstm".into(),
        dtype: F::DTYPE.into(),
        arch: serde_json::json!({
            "input_dim": params.input_dim,
            "hidden": params.hidden,
            "layers": params.num_layers(),
            "head_mode": params.head_mode,
        }),
        config,
        tensors: entries,
    };
    write_container(path, &header, &tensor_data)
}

pub fn load_lstm<F: Scalar>(path: &Path) -> Result<(LstmParams<F>, Value)> {
    let (header, data) = read_container::<F>(path)?;
    if header.kind != "lstm" {
        return Err(Error::Metadata {
            path: path.to_path_buf(),
            message: format!("checkpoint kind `{}`, expected lstm", header.kind),
        });
    }
    let meta_err = |m: &str| Error::Metadata {
        path: path.to_path_buf(),
        message: m.into(),
    };
    let input_dim = header.arch["input_dim"].as_u64().ok_or_else(|| meta_err("missing input_dim"))? as usize;
    let hidden = header.arch["hidden"].as_u64().ok_or_else(|| meta_err("missing hidden"))? as usize;
    let n_layers = header.arch["layers"].as_u64().ok_or_else(|| meta_err("missing layers"))? as usize;
    let head_mode: HeadMode = serde_json::from_value(header.arch["head_mode"].clone())
        .map_err(|e| meta_err(&format!("bad head_mode: {e}")))?;

    // Tensors appear in visit order: per layer fwd/bwd (w_input, w_recur,
    // bias), then head.w, head.b.
    let expected = n_layers * 6 + 2;
    if header.tensors.len() != expected || data.len() != expected {
        return Err(meta_err(&format!(
            "expected {expected} tensors, found {}",
            header.tensors.len()
        )));
    }
    fn take2<F: Scalar>(
        header: &Header,
        data: &mut [Vec<F>],
        idx: &mut usize,
        path: &Path,
    ) -> Result<Array2<F>> {
        let shape = &header.tensors[*idx].shape;
        let flat = std::mem::take(&mut data[*idx]);
        *idx += 1;
        Array2::from_shape_vec((shape[0], shape[1]), flat).map_err(|e| Error::Metadata {
            path: path.to_path_buf(),
            message: format!("tensor shape: {e}"),
        })
    }

    let mut data = data;
    let mut idx = 0;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let mut pair = Vec::with_capacity(2);
        for _ in 0..2 {
            let w_input = take2(&header, &mut data, &mut idx, path)?;
            let w_recur = take2(&header, &mut data, &mut idx, path)?;
            let bias = Array1::from_vec(std::mem::take(&mut data[idx]));
            idx += 1;
            pair.push(CellParams {
                w_input,
                w_recur,
                bias,
            });
        }
        let pair: [CellParams<F>; 2] = pair.try_into().expect("two directions");
        layers.push(pair);
    }
    let head_w = take2(&header, &mut data, &mut idx, path)?;
    let head_b = Array1::from_vec(std::mem::take(&mut data[idx]));

    Ok((
        LstmParams {
            input_dim,
            hidden,
            head_mode,
            tensors: LstmTensors {
                layers,
                head_w,
                head_b,
            },
        },
        header.config,
    ))
}

pub fn save_linear<F: Scalar>(path: &Path, params: &LinearParams<F>, config: Value) -> Result<()> {
    let mut tensor_data: Vec<(String, Vec<F>)> = Vec::new();
    let mut clone = params.clone();
    clone.visit_mut(&mut |name, slice| {
        tensor_data.push((name, slice.to_vec()));
    });
    let entries = params
        .tensor_shapes()
        .into_iter()
        .map(|(name, shape)| TensorEntry { name, shape })
        .collect();
    let header = Header {
        kind: "linear".into(),
        dtype: F::DTYPE.into(),
        arch: serde_json::json!({ "rows": params.rows, "cols": params.cols }),
        config,
        tensors: entries,
    };
    write_container(path, &header, &tensor_data)
}

pub fn load_linear<F: Scalar>(path: &Path) -> Result<(LinearParams<F>, Value)> {
    let (header, mut data) = read_container::<F>(path)?;
    if header.kind != "linear" {
        return Err(Error::Metadata {
            path: path.to_path_buf(),
            message: format!("checkpoint kind `{}`, expected linear", header.kind),
        });
    }
    let meta_err = |m: &str| Error::Metadata {
        path: path.to_path_buf(),
        message: m.into(),
    };
    let rows = header.arch["rows"].as_u64().ok_or_else(|| meta_err("missing rows"))? as usize;
    let cols = header.arch["cols"].as_u64().ok_or_else(|| meta_err("missing cols"))? as usize;
    if header.tensors.len() != 2 {
        return Err(meta_err("expected 2 tensors"));
    }
    let wshape = header.tensors[0].shape.clone();
    let weight = Array2::from_shape_vec((wshape[0], wshape[1]), std::mem::take(&mut data[0]))
        .map_err(|e| meta_err(&format!("tensor shape: {e}")))?;
    let bias = Array1::from_vec(std::mem::take(&mut data[1]));
    Ok((
        LinearParams {
            rows,
            cols,
            weight,
            bias,
        },
        header.config,
    ))
}
