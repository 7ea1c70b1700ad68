use super::{DataTexError, DataTexture, Layout, Normalization, Payload};
use crate::geom;
use crate::grid::GridSpec;
use crate::ingest::{LayerKind, VectorLayer};
use crate::raster::{self, RasterError};

/// Isoline polygons painted onto a grid and min-max packed into u16.
#[derive(Debug, Clone, PartialEq)]
pub struct PackedIsolines {
    /// Normalized values; 0 where uncovered.
    pub texture: DataTexture,
    /// 255 where some feature covers the texel, else 0.
    pub mask: DataTexture,
    pub normalization: Normalization,
}

/// Paints features largest-area-first so that nested, inner isolines
/// overwrite the outer ones, then normalizes covered cells to u16.
/// Texture row 0 is the grid's northernmost row.
pub fn pack_isolines(layer: &VectorLayer, spec: &GridSpec) -> Result<PackedIsolines, DataTexError> {
    if layer.kind != LayerKind::Polygon {
        return Err(RasterError::WrongKind {
            expected: LayerKind::Polygon,
            found: layer.kind,
        }
        .into());
    }
    let mut order = Vec::with_capacity(layer.features.len());
    for f in &layer.features {
        let value = f
            .value
            .filter(|v| v.is_finite())
            .ok_or_else(|| DataTexError::MissingValue(f.feature_id.clone()))?;
        let area = f.rings().first().map_or(0.0, |r| geom::ring_signed_area(r).abs());
        order.push((area, f, value));
    }
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.feature_id.cmp(&b.1.feature_id)));

    let n = spec.len();
    let mut values: Vec<Option<f64>> = vec![None; n];
    for (_, f, value) in &order {
        let single = VectorLayer {
            features: vec![(*f).clone()],
            crs_id: layer.crs_id.clone(),
            kind: LayerKind::Polygon,
        };
        let cover = raster::rasterize_polygons_binary(&single, spec)?;
        for (slot, &c) in values.iter_mut().zip(&cover.values) {
            if c == 1.0 {
                *slot = Some(*value);
            }
        }
    }
    let (min, max) = values.iter().flatten().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let normalization = if min.is_finite() {
        Normalization::from_range(min, max)
    } else {
        Normalization::from_range(0.0, 0.0)
    };
    let (w, h) = (spec.width, spec.height);
    let mut texels = vec![0u16; n];
    let mut mask = vec![0u8; n];
    for row in 0..h {
        let v = h - 1 - row;
        for col in 0..w {
            if let Some(x) = values[row * w + col] {
                texels[v * w + col] = normalization.encode_u16(x);
                mask[v * w + col] = 255;
            }
        }
    }
    Ok(PackedIsolines {
        texture: DataTexture::new(w, h, Payload::U16(texels), Some(normalization), Layout::Plain),
        mask: DataTexture::new(w, h, Payload::U8(mask), None, Layout::Plain),
        normalization,
    })
}
