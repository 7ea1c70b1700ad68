//! Streamline positions as 32-bit floats split across pairs of 16-bit
//! planes: row `i` holds line `i`, texel `j` its point `j`.

use serde::{Deserialize, Serialize};

use super::{DataTexError, DataTexture, Layout, Payload};
use crate::tubes::Streamline;

/// Quiet NaN written into texels past a row's valid count.
pub const PADDING_BITS: u32 = 0x7FC0_0000;

/// Upper and lower 16 bits of the binary32 pattern of `v`.
#[inline]
pub fn split_f32(v: f32) -> (u16, u16) {
    let bits = v.to_bits();
    ((bits >> 16) as u16, bits as u16)
}

#[inline]
pub fn merge_f32(hi: u16, lo: u16) -> f32 {
    f32::from_bits(((hi as u32) << 16) | lo as u32)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamlineLayout {
    /// Texels per row.
    pub max_points: usize,
    /// Rows.
    pub line_count: usize,
    /// Valid points in each row.
    pub counts: Vec<usize>,
    /// Planes present, in order; always x, y, z, plus scalar when every line
    /// carries one.
    pub channels: Vec<String>,
}

impl StreamlineLayout {
    pub fn segment_count(&self) -> usize {
        self.counts.iter().map(|c| c - 1).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamlineTextures {
    pub layout: StreamlineLayout,
    /// One u16-pair texture per channel, in `layout.channels` order.
    pub planes: Vec<DataTexture>,
}

/// Encodes every line's coordinates (and scalars, when all lines have them).
pub fn encode_streamlines_texture(lines: &[Streamline]) -> Result<StreamlineTextures, DataTexError> {
    if lines.is_empty() {
        return Err(DataTexError::NoStreamlines);
    }
    for (index, l) in lines.iter().enumerate() {
        if l.points.len() < 2 {
            return Err(DataTexError::ShortStreamline {
                index,
                points: l.points.len(),
            });
        }
        if let Some(s) = &l.scalars {
            if s.len() != l.points.len() {
                return Err(DataTexError::ScalarCount {
                    index,
                    points: l.points.len(),
                    scalars: s.len(),
                });
            }
        }
    }
    let with_scalars = lines.iter().all(|l| l.scalars.is_some());
    let max_points = lines.iter().map(|l| l.points.len()).max().unwrap_or(0);
    let rows = lines.len();
    let mut channels = vec!["x".to_string(), "y".into(), "z".into()];
    if with_scalars {
        channels.push("scalar".into());
    }
    let layout = StreamlineLayout {
        max_points,
        line_count: rows,
        counts: lines.iter().map(|l| l.points.len()).collect(),
        channels,
    };
    let (pad_hi, pad_lo) = ((PADDING_BITS >> 16) as u16, PADDING_BITS as u16);
    let planes = (0..layout.channels.len())
        .map(|c| {
            let mut hi = vec![pad_hi; rows * max_points];
            let mut lo = vec![pad_lo; rows * max_points];
            for (i, l) in lines.iter().enumerate() {
                for j in 0..l.points.len() {
                    let v = if c < 3 {
                        l.points[j][c]
                    } else {
                        l.scalars.as_ref().expect("checked above")[j]
                    };
                    let (h, w) = split_f32(v);
                    hi[i * max_points + j] = h;
                    lo[i * max_points + j] = w;
                }
            }
            DataTexture::new(
                max_points,
                rows,
                Payload::U16Pair { hi, lo },
                None,
                Layout::Streamline(layout.clone()),
            )
        })
        .collect();
    Ok(StreamlineTextures { layout, planes })
}

/// Reconstructs the lines from their texture planes.
pub fn decode_streamlines_texture(tex: &StreamlineTextures) -> Result<Vec<Streamline>, DataTexError> {
    let l = &tex.layout;
    if tex.planes.len() != l.channels.len() || l.counts.len() != l.line_count {
        return Err(DataTexError::Layout("plane or row count disagrees with layout".into()));
    }
    let mut planes = Vec::with_capacity(tex.planes.len());
    for p in &tex.planes {
        match &p.payload {
            Payload::U16Pair { hi, lo } if p.width == l.max_points && p.height == l.line_count => planes.push((hi, lo)),
            _ => return Err(DataTexError::Layout("streamline plane must be a u16 pair of layout size".into())),
        }
    }
    if l.counts.iter().any(|&c| c > l.max_points) {
        return Err(DataTexError::Layout("row count exceeds max_points".into()));
    }
    let value = |c: usize, at: usize| merge_f32(planes[c].0[at], planes[c].1[at]);
    Ok(l.counts
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let base = i * l.max_points;
            let points = (0..n).map(|j| [value(0, base + j), value(1, base + j), value(2, base + j)]).collect();
            let scalars = (l.channels.len() > 3).then(|| (0..n).map(|j| value(3, base + j)).collect());
            Streamline { points, scalars }
        })
        .collect())
}
