//! Data textures: analysis results packed into engine-readable 2D texel
//! arrays, with CPU reference decoders and samplers.
//!
//! Texel `(u, v)` lives at index `v * width + u`, with `v = 0` the top image
//! row.

mod colormap;
mod isolines;
mod streamtex;
mod zfold;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io;

pub use colormap::{apply_colormap, blend_over_base, Colormap, ColorStop, RgbaImage};
pub use isolines::{pack_isolines, PackedIsolines};
pub use streamtex::{
    decode_streamlines_texture, encode_streamlines_texture, merge_f32, split_f32, StreamlineLayout, StreamlineTextures,
    PADDING_BITS,
};
pub use zfold::{spawn_particles, zfold_encode, Particle, Volume3D, ZFoldLayout, ZFoldSampler};

#[derive(Debug, Error)]
pub enum DataTexError {
    #[error("z-fold grid {tiles_x}x{tiles_y} holds {capacity} slices, volume has {nz}")]
    Capacity {
        tiles_x: usize,
        tiles_y: usize,
        capacity: usize,
        nz: usize,
    },
    #[error("volume dimensions must be at least 1, got {0:?}")]
    BadDimensions([usize; 3]),
    #[error("volume has {actual} values, expected {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("feature {0} has no finite value")]
    MissingValue(String),
    #[error("streamline {index} has {points} points, need at least 2")]
    ShortStreamline { index: usize, points: usize },
    #[error("streamline {index} has {scalars} scalars for {points} points")]
    ScalarCount { index: usize, points: usize, scalars: usize },
    #[error("no streamlines to encode")]
    NoStreamlines,
    #[error("invalid colormap: {0}")]
    BadColormap(String),
    #[error("image dimensions differ: {0:?} vs {1:?}")]
    DimensionMismatch((u32, u32), (u32, u32)),
    #[error("texture layout does not match: {0}")]
    Layout(String),
    #[error(transparent)]
    Raster(#[from] crate::raster::RasterError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    U8(Vec<u8>),
    U16(Vec<u16>),
    /// Upper and lower halves of 32-bit patterns in two equally sized planes.
    U16Pair { hi: Vec<u16>, lo: Vec<u16> },
}

impl Payload {
    pub fn format_name(&self) -> &'static str {
        match self {
            Payload::U8(_) => "u8",
            Payload::U16(_) => "u16",
            Payload::U16Pair { .. } => "u16-pair",
        }
    }

    fn len(&self) -> usize {
        match self {
            Payload::U8(v) => v.len(),
            Payload::U16(v) => v.len(),
            Payload::U16Pair { hi, .. } => hi.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layout {
    Plain,
    ZFold(ZFoldLayout),
    Streamline(StreamlineLayout),
}

/// Linear value range stored alongside a normalized payload.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub min: f64,
    pub max: f64,
    /// min == max; every texel encodes 0.
    pub degenerate: bool,
}

impl Normalization {
    pub fn from_range(min: f64, max: f64) -> Self {
        Normalization {
            min,
            max,
            degenerate: min == max,
        }
    }

    pub fn encode_u16(&self, v: f64) -> u16 {
        if self.degenerate || !v.is_finite() {
            return 0;
        }
        ((v - self.min) / (self.max - self.min) * 65535.0)
            .round_ties_even()
            .clamp(0.0, 65535.0) as u16
    }

    pub fn decode_u16(&self, q: u16) -> f64 {
        self.min + q as f64 / 65535.0 * (self.max - self.min)
    }

    /// One u16 quantization step in value units.
    pub fn step(&self) -> f64 {
        (self.max - self.min) / 65535.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataTexture {
    pub width: usize,
    pub height: usize,
    pub payload: Payload,
    pub normalization: Option<Normalization>,
    pub layout: Layout,
}

impl DataTexture {
    pub fn new(width: usize, height: usize, payload: Payload, normalization: Option<Normalization>, layout: Layout) -> Self {
        assert_eq!(payload.len(), width * height, "payload length must match dimensions");
        if let Payload::U16Pair { hi, lo } = &payload {
            assert_eq!(hi.len(), lo.len(), "u16 pair planes must match");
        }
        DataTexture {
            width,
            height,
            payload,
            normalization,
            layout,
        }
    }

    /// Texel value scaled to `[0, 1]` for u8 and u16 payloads.
    pub fn unit_value(&self, index: usize) -> Option<f64> {
        match &self.payload {
            Payload::U8(v) => Some(v[index] as f64 / 255.0),
            Payload::U16(v) => Some(v[index] as f64 / 65535.0),
            Payload::U16Pair { .. } => None,
        }
    }
}

/// A file emitted for a texture, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextureFile {
    pub path: String,
    pub role: String,
    pub format: String,
    pub sha256: String,
    pub bytes: usize,
}

/// JSON document written next to every texture payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextureSidecar {
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub format: String,
    pub layout: Layout,
    pub normalization: Option<Normalization>,
    pub provenance: String,
    pub files: Vec<TextureFile>,
}

fn write_bytes(dir: &Path, rel: &str, bytes: &[u8]) -> Result<(), DataTexError> {
    let path = dir.join(rel);
    std::fs::write(&path, bytes).map_err(|e| DataTexError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Encodes a payload: PNG for u8/u16, raw little-endian hi plane followed
/// by lo plane for u16 pairs.
pub fn encode_payload(tex: &DataTexture) -> Result<(Vec<u8>, &'static str), DataTexError> {
    let (w, h) = (tex.width as u32, tex.height as u32);
    let to_io = |e: io::ImageError| DataTexError::Io {
        path: "<png>".into(),
        message: e.to_string(),
    };
    Ok(match &tex.payload {
        Payload::U8(v) => (io::encode_gray8(w, h, v).map_err(to_io)?, "png"),
        Payload::U16(v) => (io::encode_gray16(w, h, v).map_err(to_io)?, "png"),
        Payload::U16Pair { hi, lo } => {
            let mut out = Vec::with_capacity(4 * hi.len());
            out.extend(hi.iter().flat_map(|x| x.to_le_bytes()));
            out.extend(lo.iter().flat_map(|x| x.to_le_bytes()));
            (out, "bin")
        }
    })
}

/// Writes the payload of `tex` as `{name}.{png|bin}` and returns its entry.
pub fn write_texture_file(tex: &DataTexture, dir: &Path, name: &str, role: &str) -> Result<TextureFile, DataTexError> {
    let (bytes, ext) = encode_payload(tex)?;
    let rel = format!("{name}.{ext}");
    write_bytes(dir, &rel, &bytes)?;
    Ok(TextureFile {
        path: rel,
        role: role.to_string(),
        format: tex.payload.format_name().to_string(),
        sha256: io::sha256_hex(&bytes),
        bytes: bytes.len(),
    })
}

/// Writes a sidecar as `{name}.json` and returns its bytes' checksum entry.
pub fn write_sidecar(sidecar: &TextureSidecar, dir: &Path) -> Result<TextureFile, DataTexError> {
    let bytes = serde_json::to_vec_pretty(sidecar).expect("sidecar serializes");
    let rel = format!("{}.json", sidecar.name);
    write_bytes(dir, &rel, &bytes)?;
    Ok(TextureFile {
        path: rel,
        role: "sidecar".into(),
        format: "json".into(),
        sha256: io::sha256_hex(&bytes),
        bytes: bytes.len(),
    })
}
