//! T5DF tensor files.
//!
//! Layout (little-endian, no padding, no footer):
//!
//! | offset | size | field                          |
//! |--------|------|--------------------------------|
//! | 0      | 4    | magic `b"T5DF"`                |
//! | 4      | 2    | format version, `1`            |
//! | 6      | 2    | dtype code (1 = f32, 2 = f64)  |
//! | 8      | 20   | five extents, `u32` each       |
//! | 28     | ...  | elements in flat row-major order |

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::{numel, DType, Dims, Element, Tensor5};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"T5DF";
const VERSION: u16 = 1;
const HEADER_LEN: usize = 28;

/// A tensor whose dtype is known only at runtime.
#[derive(Debug, Clone, PartialEq)]
pub enum DynTensor {
    F32(Tensor5<f32>),
    F64(Tensor5<f64>),
}

impl DynTensor {
    pub fn dtype(&self) -> DType {
        match self {
            DynTensor::F32(_) => DType::F32,
            DynTensor::F64(_) => DType::F64,
        }
    }

    pub fn dims(&self) -> Dims {
        match self {
            DynTensor::F32(t) => t.dims(),
            DynTensor::F64(t) => t.dims(),
        }
    }
}

impl From<Tensor5<f32>> for DynTensor {
    fn from(t: Tensor5<f32>) -> Self {
        DynTensor::F32(t)
    }
}

impl From<Tensor5<f64>> for DynTensor {
    fn from(t: Tensor5<f64>) -> Self {
        DynTensor::F64(t)
    }
}

pub fn write_t5df_to<T: Element, W: Write>(t: &Tensor5<T>, mut out: W) -> Result<()> {
    let mut buf = Vec::with_capacity(HEADER_LEN + t.len() * T::DTYPE.size());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&T::DTYPE.code().to_le_bytes());
    for d in t.dims() {
        let d = u32::try_from(d).map_err(|_| Error::Size { dims: t.dims().to_vec() })?;
        buf.extend_from_slice(&d.to_le_bytes());
    }
    for &v in t.data() {
        v.write_le(&mut buf);
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn write_t5df<T: Element>(t: &Tensor5<T>, path: impl AsRef<Path>) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_t5df_to(t, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_t5df_from<R: Read>(mut input: R) -> Result<DynTensor> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    decode(&bytes)
}

pub fn read_t5df(path: impl AsRef<Path>) -> Result<DynTensor> {
    decode(&fs::read(path)?)
}

fn format_err<T>(offset: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Format { offset: offset as u64, msg: msg.into() })
}

fn decode(bytes: &[u8]) -> Result<DynTensor> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return format_err(0, "missing T5DF magic");
    }
    if bytes.len() < HEADER_LEN {
        return format_err(bytes.len(), format!("header truncated ({} of {HEADER_LEN} bytes)", bytes.len()));
    }
    let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
    let version = u16_at(4);
    if version != VERSION {
        return format_err(4, format!("unsupported format version {version}"));
    }
    let code = u16_at(6);
    let dtype = match DType::from_code(code) {
        Some(d) => d,
        None => return format_err(6, format!("unknown dtype code {code}")),
    };
    let mut dims = [0usize; 5];
    for (i, d) in dims.iter_mut().enumerate() {
        let o = 8 + 4 * i;
        *d = u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    }
    let n = numel(dims)?;
    let payload = n.checked_mul(dtype.size()).ok_or_else(|| Error::Size { dims: dims.to_vec() })?;
    let body = &bytes[HEADER_LEN..];
    if body.len() < payload {
        return format_err(bytes.len(), format!("payload truncated: {} of {payload} bytes", body.len()));
    }
    if body.len() > payload {
        return format_err(HEADER_LEN + payload, "trailing bytes after payload");
    }
    Ok(match dtype {
        DType::F32 => DynTensor::F32(decode_data(dims, body)?),
        DType::F64 => DynTensor::F64(decode_data(dims, body)?),
    })
}

fn decode_data<T: Element>(dims: Dims, body: &[u8]) -> Result<Tensor5<T>> {
    let data = body.chunks_exact(T::DTYPE.size()).map(T::read_le).collect();
    Tensor5::from_vec(dims, data)
}
