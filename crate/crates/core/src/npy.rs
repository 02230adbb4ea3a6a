//! Minimal reader/writer for NPY v1.0 array files.
//!
//! Per-stream sensor data is stored as little-endian C-order arrays so that
//! cycles stay language-neutral (any numpy-compatible tool can open them).
//! Only the subset the dataset schema needs is supported: `<f4` / `<f8`,
//! 1 to 4 dimensions.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 6] = b"\x93NUMPY";

/// Element types storable in stream array files.
pub trait NpyScalar: Copy + Default {
    const DESCR: &'static str;
    const SIZE: usize;
    fn write_le(&self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;
}

impl NpyScalar for f32 {
    const DESCR: &'static str = "<f4";
    const SIZE: usize = 4;
    fn write_le(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]])
    }
}

impl NpyScalar for f64 {
    const DESCR: &'static str = "<f8";
    const SIZE: usize = 8;
    fn write_le(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        let mut b = [0u8; 8];
        b.copy_from_slice(&bytes[..8]);
        f64::from_le_bytes(b)
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::ArrayFormat {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Write a C-order array to `path`. `data.len()` must equal the product of `shape`.
pub fn write<T: NpyScalar>(path: &Path, shape: &[usize], data: &[T]) -> Result<()> {
    let count: usize = shape.iter().product();
    if count != data.len() {
        return Err(format_err(
            path,
            format!("shape {:?} does not match {} elements", shape, data.len()),
        ));
    }
    if shape.is_empty() || shape.len() > 4 {
        return Err(format_err(path, format!("unsupported rank {}", shape.len())));
    }

    let shape_str = match shape.len() {
        1 => format!("({},)", shape[0]),
        _ => format!(
            "({})",
            shape
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ),
    };
    let mut header = format!(
        "{{'descr': '{}', 'fortran_order': False, 'shape': {}, }}",
        T::DESCR,
        shape_str
    );
    // Pad so that data starts on a 64-byte boundary; header ends with '\n'.
    let unpadded = MAGIC.len() + 4 + header.len() + 1;
    let pad = (64 - unpadded % 64) % 64;
    header.push_str(&" ".repeat(pad));
    header.push('\n');

    let mut buf = Vec::with_capacity(unpadded + pad + count * T::SIZE);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&[0x01, 0x00]);
    buf.extend_from_slice(&(header.len() as u16).to_le_bytes());
    buf.extend_from_slice(header.as_bytes());
    for v in data {
        v.write_le(&mut buf);
    }

    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Read an array written by [`write`]. Returns `(shape, data)`.
pub fn read<T: NpyScalar>(path: &Path) -> Result<(Vec<usize>, Vec<T>)> {
    let mut raw = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut raw))
        .map_err(|e| Error::io(path, e))?;

    if raw.len() < 10 || &raw[..6] != MAGIC {
        return Err(format_err(path, "not an NPY file"));
    }
    if raw[6] != 1 {
        return Err(format_err(path, format!("unsupported version {}.{}", raw[6], raw[7])));
    }
    let header_len = u16::from_le_bytes([raw[8], raw[9]]) as usize;
    let body_start = 10 + header_len;
    if raw.len() < body_start {
        return Err(format_err(path, "truncated header"));
    }
    let header = std::str::from_utf8(&raw[10..body_start])
        .map_err(|_| format_err(path, "header is not utf-8"))?;

    let descr = dict_value(header, "descr")
        .ok_or_else(|| format_err(path, "missing descr"))?
        .trim_matches(|c| c == '\'' || c == '"')
        .to_string();
    if descr != T::DESCR {
        return Err(format_err(
            path,
            format!("dtype {} found, {} expected", descr, T::DESCR),
        ));
    }
    let fortran = dict_value(header, "fortran_order")
        .ok_or_else(|| format_err(path, "missing fortran_order"))?;
    if fortran.trim() != "False" {
        return Err(format_err(path, "fortran-order arrays are not supported"));
    }
    let shape_str = dict_value(header, "shape").ok_or_else(|| format_err(path, "missing shape"))?;
    let shape = parse_shape(&shape_str).ok_or_else(|| format_err(path, "malformed shape"))?;

    let count: usize = shape.iter().product();
    let body = &raw[body_start..];
    if body.len() < count * T::SIZE {
        return Err(format_err(
            path,
            format!("expected {} elements, file has {} bytes", count, body.len()),
        ));
    }
    let mut data = Vec::with_capacity(count);
    for i in 0..count {
        data.push(T::read_le(&body[i * T::SIZE..]));
    }
    Ok((shape, data))
}

/// Extract the value substring for `key` from the python-dict-literal header.
fn dict_value(header: &str, key: &str) -> Option<String> {
    let pat = format!("'{}':", key);
    let start = header.find(&pat)? + pat.len();
    let rest = &header[start..];
    // Value ends at the next top-level comma or closing brace.
    let mut depth = 0usize;
    let mut end = rest.len();
    for (i, c) in rest.char_indices() {
        match c {
            '(' | '[' => depth += 1,
            ')' | ']' => depth = depth.saturating_sub(1),
            ',' | '}' if depth == 0 => {
                end = i;
                break;
            }
            _ => {}
        }
    }
    Some(rest[..end].trim().to_string())
}

fn parse_shape(s: &str) -> Option<Vec<usize>> {
    let inner = s.trim().strip_prefix('(')?.strip_suffix(')')?;
    let mut dims = Vec::new();
    for part in inner.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        dims.push(part.parse().ok()?);
    }
    if dims.is_empty() {
        None
    } else {
        Some(dims)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_shape_data_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.npy");
        let err = write::<f32>(&path, &[2, 3], &[0.0; 5]).unwrap_err();
        assert!(err.to_string().contains("does not match"));
    }

    #[test]
    fn rejects_wrong_dtype_on_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f32.npy");
        write::<f32>(&path, &[4], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(read::<f64>(&path).is_err());
    }

    #[test]
    fn header_is_64_byte_aligned() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.npy");
        write::<f64>(&path, &[3, 2], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let header_len = u16::from_le_bytes([bytes[8], bytes[9]]) as usize;
        assert_eq!((10 + header_len) % 64, 0);
    }

    proptest! {
        #[test]
        fn roundtrip_f64(data in proptest::collection::vec(-1e6f64..1e6, 1..64), split in 1usize..4) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("rt.npy");
            // Carve the flat buffer into a rank-1 or rank-2 shape.
            let n = data.len();
            let shape = if n % split == 0 && split > 1 {
                vec![split, n / split]
            } else {
                vec![n]
            };
            write::<f64>(&path, &shape, &data).unwrap();
            let (rshape, rdata) = read::<f64>(&path).unwrap();
            prop_assert_eq!(rshape, shape);
            prop_assert_eq!(rdata, data);
        }
    }
}
