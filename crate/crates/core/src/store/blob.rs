//! Binary dense tensor files.
//!
//! Layout: the 8 ASCII bytes `FRTENSOR`, a `u8` dtype code, a `u8` rank,
//! `rank` little-endian `u32` dimensions, then the row-major payload in
//! little-endian order. Code 0 is `f32`; code 1 (`f64`) is used for
//! parameter checkpoints.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"FRTENSOR";
const FIXED_HEADER: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum DType {
    F32 = 0,
    F64 = 1,
}

impl DType {
    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(DType::F32),
            1 => Some(DType::F64),
            _ => None,
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl Payload {
    pub fn len(&self) -> usize {
        match self {
            Payload::F32(v) => v.len(),
            Payload::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorBlob {
    dims: Vec<usize>,
    payload: Payload,
}

/// Shape information read from a file header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlobHeader {
    pub dtype: DType,
    pub dims: Vec<usize>,
}

fn check_dims(dims: &[usize], len: usize) -> Result<()> {
    if dims.is_empty() || dims.len() > u8::MAX as usize {
        return Err(Error::InvalidTensor(format!("rank {} outside 1..=255", dims.len())));
    }
    if let Some(d) = dims.iter().find(|&&d| d == 0 || d > u32::MAX as usize) {
        return Err(Error::InvalidTensor(format!("dimension {d} outside 1..=u32::MAX")));
    }
    let expected: usize = dims.iter().product();
    if expected != len {
        return Err(Error::InvalidTensor(format!(
            "payload length {len} does not match dims {dims:?}"
        )));
    }
    Ok(())
}

impl TensorBlob {
    pub fn from_f32(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        check_dims(&dims, data.len())?;
        Ok(Self {
            dims,
            payload: Payload::F32(data),
        })
    }

    pub fn from_f64(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        check_dims(&dims, data.len())?;
        Ok(Self {
            dims,
            payload: Payload::F64(data),
        })
    }

    /// Stores a matrix as a rank-2 `f32` blob (values are rounded).
    pub fn from_array_f32(a: &Array2<f64>) -> Self {
        let (r, c) = a.dim();
        let data = a.iter().map(|&v| v as f32).collect();
        Self::from_f32(vec![r, c], data).expect("matrix shapes are valid")
    }

    pub fn from_array_f64(a: &Array2<f64>) -> Self {
        let (r, c) = a.dim();
        Self::from_f64(vec![r, c], a.iter().copied().collect()).expect("matrix shapes are valid")
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn dtype(&self) -> DType {
        match self.payload {
            Payload::F32(_) => DType::F32,
            Payload::F64(_) => DType::F64,
        }
    }

    pub fn payload(&self) -> &Payload {
        &self.payload
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        match &self.payload {
            Payload::F32(v) => v.iter().map(|&x| x as f64).collect(),
            Payload::F64(v) => v.clone(),
        }
    }

    /// Views the blob as a matrix, folding all leading axes into rows.
    pub fn to_array2(&self) -> Array2<f64> {
        let cols = *self.dims.last().expect("rank >= 1");
        let rows = self.payload.len() / cols;
        Array2::from_shape_vec((rows, cols), self.to_f64_vec()).expect("length checked")
    }

    fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(FIXED_HEADER + 4 * self.rank() + self.payload.len() * self.dtype().size());
        out.extend_from_slice(MAGIC);
        out.push(self.dtype() as u8);
        out.push(self.rank() as u8);
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        match &self.payload {
            Payload::F32(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            Payload::F64(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        }
        out
    }
}

fn parse_header(path: &Path, bytes: &[u8]) -> Result<(BlobHeader, usize)> {
    if bytes.len() < FIXED_HEADER || &bytes[..8] != MAGIC {
        return Err(Error::BadMagic { path: path.into() });
    }
    let dtype = DType::from_code(bytes[8]).ok_or(Error::UnsupportedDtype {
        path: path.into(),
        code: bytes[8],
    })?;
    let rank = bytes[9] as usize;
    if rank == 0 {
        return Err(Error::InvalidTensor(format!("{}: rank 0", path.display())));
    }
    let header_len = FIXED_HEADER + 4 * rank;
    if bytes.len() < header_len {
        return Err(Error::TruncatedPayload {
            path: path.into(),
            expected: header_len,
            found: bytes.len(),
        });
    }
    let dims: Vec<usize> = bytes[FIXED_HEADER..header_len]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")) as usize)
        .collect();
    if dims.contains(&0) {
        return Err(Error::InvalidTensor(format!("{}: zero dimension", path.display())));
    }
    Ok((BlobHeader { dtype, dims }, header_len))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<TensorBlob> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (header, offset) = parse_header(path, &bytes)?;
    let count: usize = header.dims.iter().product();
    let expected = offset + count * header.dtype.size();
    if bytes.len() < expected {
        return Err(Error::TruncatedPayload {
            path: path.into(),
            expected,
            found: bytes.len(),
        });
    }
    let body = &bytes[offset..expected];
    let payload = match header.dtype {
        DType::F32 => Payload::F32(
            body.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
                .collect(),
        ),
        DType::F64 => Payload::F64(
            body.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect(),
        ),
    };
    Ok(TensorBlob {
        dims: header.dims,
        payload,
    })
}

/// Reads only the header and checks that the file is long enough to hold
/// the declared payload.
pub fn probe_tensor(path: impl AsRef<Path>) -> Result<BlobHeader> {
    let path = path.as_ref();
    let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let file_len = file.metadata().map_err(|e| Error::io(path, e))?.len() as usize;
    let mut head = vec![0u8; FIXED_HEADER.min(file_len)];
    file.read_exact(&mut head).map_err(|e| Error::io(path, e))?;
    if head.len() == FIXED_HEADER && &head[..8] == MAGIC {
        let rank = head[9] as usize;
        let mut dims = vec![0u8; (4 * rank).min(file_len - FIXED_HEADER)];
        file.read_exact(&mut dims).map_err(|e| Error::io(path, e))?;
        head.extend_from_slice(&dims);
    }
    let (header, offset) = parse_header(path, &head)?;
    let expected = offset + header.dims.iter().product::<usize>() * header.dtype.size();
    if file_len < expected {
        return Err(Error::TruncatedPayload {
            path: path.into(),
            expected,
            found: file_len,
        });
    }
    Ok(header)
}

pub fn write_tensor(blob: &TensorBlob, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&blob.encode()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
