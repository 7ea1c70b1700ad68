//! PNG encoding and decoding for grayscale and RGBA payloads, plus content
//! checksums.

use std::io::Cursor;

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("PNG encode failed: {0}")]
    Encode(#[from] png::EncodingError),
    #[error("PNG decode failed: {0}")]
    Decode(#[from] png::DecodingError),
    #[error("unexpected PNG layout: {0}")]
    Layout(String),
}

/// Decoded grayscale image; 8-bit images are widened to u16 samples.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: u32,
    pub height: u32,
    pub bit_depth: u8,
    /// Row-major, top row first.
    pub samples: Vec<u16>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn encode(width: u32, height: u32, color: png::ColorType, depth: png::BitDepth, data: &[u8]) -> Result<Vec<u8>, ImageError> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(Cursor::new(&mut out), width, height);
        enc.set_color(color);
        enc.set_depth(depth);
        enc.set_compression(png::Compression::Balanced);
        let mut writer = enc.write_header()?;
        writer.write_image_data(data)?;
        writer.finish()?;
    }
    Ok(out)
}

/// 8-bit grayscale, rows top-first.
pub fn encode_gray8(width: u32, height: u32, pixels: &[u8]) -> Result<Vec<u8>, ImageError> {
    encode(width, height, png::ColorType::Grayscale, png::BitDepth::Eight, pixels)
}

/// 16-bit grayscale, rows top-first. PNG stores samples big-endian.
pub fn encode_gray16(width: u32, height: u32, pixels: &[u16]) -> Result<Vec<u8>, ImageError> {
    let bytes: Vec<u8> = pixels.iter().flat_map(|p| p.to_be_bytes()).collect();
    encode(width, height, png::ColorType::Grayscale, png::BitDepth::Sixteen, &bytes)
}

pub fn encode_rgba8(width: u32, height: u32, pixels: &[[u8; 4]]) -> Result<Vec<u8>, ImageError> {
    let bytes: Vec<u8> = pixels.iter().flatten().copied().collect();
    encode(width, height, png::ColorType::Rgba, png::BitDepth::Eight, &bytes)
}

pub fn decode_gray(bytes: &[u8]) -> Result<GrayImage, ImageError> {
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder.read_info()?;
    let mut buf = vec![0; reader.output_buffer_size().ok_or_else(|| ImageError::Layout("image too large".into()))?];
    let info = reader.next_frame(&mut buf)?;
    if info.color_type != png::ColorType::Grayscale {
        return Err(ImageError::Layout(format!("expected grayscale, got {:?}", info.color_type)));
    }
    let data = &buf[..info.buffer_size()];
    let samples = match info.bit_depth {
        png::BitDepth::Eight => data.iter().map(|&b| b as u16).collect(),
        png::BitDepth::Sixteen => data.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect(),
        other => return Err(ImageError::Layout(format!("unsupported bit depth {other:?}"))),
    };
    Ok(GrayImage {
        width: info.width,
        height: info.height,
        bit_depth: info.bit_depth as u8,
        samples,
    })
}
