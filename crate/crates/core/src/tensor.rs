//! Raw tensor file format and dense semantic logits.
//!
//! The tensor format is deliberately minimal: magic `PTNS`, version byte,
//! dtype byte (1 = f32 little-endian, 2 = u32 little-endian), ndim byte,
//! dims as u32 little-endian, then the row-major payload. Semantic logits
//! are stored as a `(C, H, W)` f32 tensor plus a JSON sidecar
//! (`<file>.json`) naming the class id of each channel and which channels
//! are stuff.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::fs_util::atomic_write;

pub const TENSOR_MAGIC: [u8; 4] = *b"PTNS";
pub const TENSOR_VERSION: u8 = 1;

const DTYPE_F32: u8 = 1;
const DTYPE_U32: u8 = 2;

/// Cap on total element count, guarding against corrupt headers.
const MAX_ELEMENTS: u64 = 1 << 32;

#[derive(Debug, thiserror::Error)]
pub enum TensorError {
    #[error("bad magic {0:?}, expected \"PTNS\"")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),
    #[error("unsupported dtype code {0}")]
    UnsupportedDtype(u8),
    #[error("truncated header")]
    TruncatedHeader,
    #[error("payload is {actual} bytes, expected {expected}")]
    PayloadLength { expected: u64, actual: u64 },
    #[error("tensor has a zero-sized dimension")]
    ZeroDim,
    #[error("tensor of {0} elements exceeds the supported size")]
    Oversized(u64),
    #[error("tensor rank {0} exceeds the 255 supported by the header")]
    TooManyDims(usize),
    #[error("data length {actual} does not match dims product {expected}")]
    DataLength { expected: u64, actual: u64 },
    #[error("expected a rank-{expected} tensor, found rank {actual}")]
    WrongRank { expected: usize, actual: usize },
    #[error("expected dtype {expected}, found {actual}")]
    WrongDtype {
        expected: &'static str,
        actual: &'static str,
    },
    #[error("channel metadata sidecar missing: {0}")]
    MissingChannelMeta(String),
    #[error("channel metadata invalid: {0}")]
    ChannelMeta(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl TensorError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        TensorError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Vec<f32>),
    U32(Vec<u32>),
}

impl TensorData {
    pub fn len(&self) -> usize {
        match self {
            TensorData::F32(v) => v.len(),
            TensorData::U32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype_name(&self) -> &'static str {
        match self {
            TensorData::F32(_) => "f32",
            TensorData::U32(_) => "u32",
        }
    }
}

/// A dense row-major tensor as stored in a `.ptns` file.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<u32>,
    pub data: TensorData,
}

impl Tensor {
    pub fn new(dims: Vec<u32>, data: TensorData) -> Result<Self, TensorError> {
        let expected = checked_len(&dims)?;
        if data.len() as u64 != expected {
            return Err(TensorError::DataLength {
                expected,
                actual: data.len() as u64,
            });
        }
        Ok(Tensor { dims, data })
    }
}

fn checked_len(dims: &[u32]) -> Result<u64, TensorError> {
    if dims.is_empty() {
        return Err(TensorError::ZeroDim);
    }
    if dims.len() > 255 {
        return Err(TensorError::TooManyDims(dims.len()));
    }
    let mut product: u64 = 1;
    for &d in dims {
        if d == 0 {
            return Err(TensorError::ZeroDim);
        }
        product = product
            .checked_mul(d as u64)
            .ok_or(TensorError::Oversized(u64::MAX))?;
        if product > MAX_ELEMENTS {
            return Err(TensorError::Oversized(product));
        }
    }
    Ok(product)
}

/// Decode a tensor from raw bytes.
pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor, TensorError> {
    if bytes.len() < 7 {
        return Err(TensorError::TruncatedHeader);
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != TENSOR_MAGIC {
        return Err(TensorError::BadMagic(magic));
    }
    if bytes[4] != TENSOR_VERSION {
        return Err(TensorError::UnsupportedVersion(bytes[4]));
    }
    let dtype = bytes[5];
    if dtype != DTYPE_F32 && dtype != DTYPE_U32 {
        return Err(TensorError::UnsupportedDtype(dtype));
    }
    let ndim = bytes[6] as usize;
    let header_len = 7 + ndim * 4;
    if bytes.len() < header_len {
        return Err(TensorError::TruncatedHeader);
    }
    let dims: Vec<u32> = (0..ndim)
        .map(|i| {
            let off = 7 + i * 4;
            u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap())
        })
        .collect();
    let count = checked_len(&dims)?;
    let expected = count * 4;
    let payload = &bytes[header_len..];
    if payload.len() as u64 != expected {
        return Err(TensorError::PayloadLength {
            expected,
            actual: payload.len() as u64,
        });
    }
    let data = match dtype {
        DTYPE_F32 => TensorData::F32(
            payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
        _ => TensorData::U32(
            payload
                .chunks_exact(4)
                .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        ),
    };
    Ok(Tensor { dims, data })
}

/// Encode a tensor into the raw byte layout.
pub fn encode_tensor(tensor: &Tensor) -> Result<Vec<u8>, TensorError> {
    let count = checked_len(&tensor.dims)?;
    if tensor.data.len() as u64 != count {
        return Err(TensorError::DataLength {
            expected: count,
            actual: tensor.data.len() as u64,
        });
    }
    let mut out = Vec::with_capacity(7 + tensor.dims.len() * 4 + tensor.data.len() * 4);
    out.extend_from_slice(&TENSOR_MAGIC);
    out.push(TENSOR_VERSION);
    out.push(match tensor.data {
        TensorData::F32(_) => DTYPE_F32,
        TensorData::U32(_) => DTYPE_U32,
    });
    out.push(tensor.dims.len() as u8);
    for &d in &tensor.dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    match &tensor.data {
        TensorData::F32(v) => {
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        TensorData::U32(v) => {
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn read_tensor(path: &Path) -> Result<Tensor, TensorError> {
    let bytes = std::fs::read(path).map_err(|e| TensorError::io(path, e))?;
    decode_tensor(&bytes)
}

pub fn write_tensor(path: &Path, tensor: &Tensor) -> Result<(), TensorError> {
    let bytes = encode_tensor(tensor)?;
    atomic_write(path, &bytes).map_err(|e| TensorError::io(path, e))
}

/// Dense per-class semantic scores for one image, `(C, H, W)` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticLogits {
    width: u32,
    height: u32,
    channel_classes: Vec<u32>,
    stuff_channels: Vec<usize>,
    data: Vec<f32>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ChannelMeta {
    channel_classes: Vec<u32>,
    stuff_channels: Vec<usize>,
}

impl SemanticLogits {
    pub fn new(
        width: u32,
        height: u32,
        channel_classes: Vec<u32>,
        mut stuff_channels: Vec<usize>,
        data: Vec<f32>,
    ) -> Result<Self, TensorError> {
        let channels = channel_classes.len();
        let expected = channels * width as usize * height as usize;
        if data.len() != expected {
            return Err(TensorError::DataLength {
                expected: expected as u64,
                actual: data.len() as u64,
            });
        }
        if width == 0 || height == 0 || channels == 0 {
            return Err(TensorError::ZeroDim);
        }
        let mut seen = std::collections::BTreeSet::new();
        for &c in &channel_classes {
            if !seen.insert(c) {
                return Err(TensorError::ChannelMeta(format!(
                    "duplicate channel class {c}"
                )));
            }
        }
        stuff_channels.sort_unstable();
        stuff_channels.dedup();
        if let Some(&bad) = stuff_channels.iter().find(|&&i| i >= channels) {
            return Err(TensorError::ChannelMeta(format!(
                "stuff channel index {bad} out of range for {channels} channels"
            )));
        }
        Ok(SemanticLogits {
            width,
            height,
            channel_classes,
            stuff_channels,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channel_classes.len()
    }

    pub fn channel_classes(&self) -> &[u32] {
        &self.channel_classes
    }

    /// Sorted indices of the channels holding stuff classes.
    pub fn stuff_channels(&self) -> &[usize] {
        &self.stuff_channels
    }

    /// One `(H, W)` row-major plane.
    pub fn plane(&self, channel: usize) -> &[f32] {
        let plane = self.width as usize * self.height as usize;
        &self.data[channel * plane..(channel + 1) * plane]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Channel index carrying the given class, if any.
    pub fn class_channel(&self, class_id: u32) -> Option<usize> {
        self.channel_classes.iter().position(|&c| c == class_id)
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".json");
    PathBuf::from(name)
}

/// Read semantic logits: the `(C, H, W)` f32 tensor plus its channel sidecar.
pub fn read_logits(path: &Path) -> Result<SemanticLogits, TensorError> {
    let tensor = read_tensor(path)?;
    if tensor.dims.len() != 3 {
        return Err(TensorError::WrongRank {
            expected: 3,
            actual: tensor.dims.len(),
        });
    }
    let data = match tensor.data {
        TensorData::F32(v) => v,
        other => {
            return Err(TensorError::WrongDtype {
                expected: "f32",
                actual: other.dtype_name(),
            })
        }
    };
    let (c, h, w) = (tensor.dims[0], tensor.dims[1], tensor.dims[2]);
    let sidecar = sidecar_path(path);
    let text = std::fs::read_to_string(&sidecar)
        .map_err(|_| TensorError::MissingChannelMeta(sidecar.display().to_string()))?;
    let meta: ChannelMeta = serde_json::from_str(&text)?;
    if meta.channel_classes.len() != c as usize {
        return Err(TensorError::ChannelMeta(format!(
            "sidecar lists {} channel classes, tensor has {} channels",
            meta.channel_classes.len(),
            c
        )));
    }
    SemanticLogits::new(w, h, meta.channel_classes, meta.stuff_channels, data)
}

/// Write semantic logits as `(C, H, W)` f32 tensor plus channel sidecar.
pub fn write_logits(path: &Path, logits: &SemanticLogits) -> Result<(), TensorError> {
    let tensor = Tensor::new(
        vec![logits.channels() as u32, logits.height(), logits.width()],
        TensorData::F32(logits.data().to_vec()),
    )?;
    write_tensor(path, &tensor)?;
    let meta = ChannelMeta {
        channel_classes: logits.channel_classes().to_vec(),
        stuff_channels: logits.stuff_channels().to_vec(),
    };
    let mut text = serde_json::to_string_pretty(&meta)?;
    text.push('\n');
    let sidecar = sidecar_path(path);
    atomic_write(&sidecar, text.as_bytes()).map_err(|e| TensorError::io(&sidecar, e))
}
