use serde::{Deserialize, Serialize};

use super::{DataTexError, DataTexture};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorStop {
    pub position: f64,
    pub rgba: [u8; 4],
}

/// Piecewise-linear RGBA ramp over `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ColorStop>", into = "Vec<ColorStop>")]
pub struct Colormap {
    stops: Vec<ColorStop>,
}

impl Colormap {
    pub fn new(stops: Vec<ColorStop>) -> Result<Self, DataTexError> {
        if stops.len() < 2 {
            return Err(DataTexError::BadColormap("need at least two stops".into()));
        }
        if stops[0].position != 0.0 || stops[stops.len() - 1].position != 1.0 {
            return Err(DataTexError::BadColormap("stops must start at 0 and end at 1".into()));
        }
        if stops.windows(2).any(|w| !(w[0].position < w[1].position)) {
            return Err(DataTexError::BadColormap("positions must increase strictly".into()));
        }
        Ok(Colormap { stops })
    }

    /// Five-stop perceptual ramp from dark purple to yellow.
    pub fn viridis() -> Self {
        let s = |position, rgba| ColorStop { position, rgba };
        Colormap::new(vec![
            s(0.0, [68, 1, 84, 255]),
            s(0.25, [59, 82, 139, 255]),
            s(0.5, [33, 145, 140, 255]),
            s(0.75, [94, 201, 98, 255]),
            s(1.0, [253, 231, 37, 255]),
        ])
        .expect("static stops are valid")
    }

    pub fn stops(&self) -> &[ColorStop] {
        &self.stops
    }

    /// Color at `t` (clamped to `[0, 1]`), channels rounded half to even.
    pub fn color_at(&self, t: f64) -> [u8; 4] {
        let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
        let k = self.stops.partition_point(|s| s.position <= t).clamp(1, self.stops.len() - 1);
        let (a, b) = (self.stops[k - 1], self.stops[k]);
        let f = (t - a.position) / (b.position - a.position);
        let mut out = [0u8; 4];
        for c in 0..4 {
            let (x, y) = (a.rgba[c] as f64, b.rgba[c] as f64);
            out[c] = (x + (y - x) * f).round_ties_even().clamp(0.0, 255.0) as u8;
        }
        out
    }
}

impl TryFrom<Vec<ColorStop>> for Colormap {
    type Error = DataTexError;
    fn try_from(v: Vec<ColorStop>) -> Result<Self, Self::Error> {
        Colormap::new(v)
    }
}

impl From<Colormap> for Vec<ColorStop> {
    fn from(c: Colormap) -> Self {
        c.stops
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RgbaImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<[u8; 4]>,
}

/// Maps each normalized texel through `map`. Texels whose `mask` entry is 0
/// become fully transparent.
pub fn apply_colormap(tex: &DataTexture, mask: Option<&DataTexture>, map: &Colormap) -> Result<RgbaImage, DataTexError> {
    if let Some(m) = mask {
        if (m.width, m.height) != (tex.width, tex.height) {
            return Err(DataTexError::DimensionMismatch(
                (tex.width as u32, tex.height as u32),
                (m.width as u32, m.height as u32),
            ));
        }
    }
    let pixels = (0..tex.width * tex.height)
        .map(|i| {
            let visible = mask.is_none_or(|m| m.unit_value(i).unwrap_or(1.0) > 0.0);
            match tex.unit_value(i) {
                Some(t) if visible => Ok(map.color_at(t)),
                Some(_) => Ok([0, 0, 0, 0]),
                None => Err(DataTexError::Layout("colormaps apply to u8/u16 payloads".into())),
            }
        })
        .collect::<Result<_, _>>()?;
    Ok(RgbaImage {
        width: tex.width as u32,
        height: tex.height as u32,
        pixels,
    })
}

/// `(1 − w)·base + w·data` per channel with `w = data alpha × opacity`.
pub fn blend_over_base(base: &RgbaImage, data: &RgbaImage, opacity: f64) -> Result<RgbaImage, DataTexError> {
    if (base.width, base.height) != (data.width, data.height) {
        return Err(DataTexError::DimensionMismatch((base.width, base.height), (data.width, data.height)));
    }
    let opacity = opacity.clamp(0.0, 1.0);
    let pixels = base
        .pixels
        .iter()
        .zip(&data.pixels)
        .map(|(b, d)| {
            let w = d[3] as f64 / 255.0 * opacity;
            let mut out = [0u8; 4];
            for c in 0..4 {
                out[c] = ((1.0 - w) * b[c] as f64 + w * d[c] as f64).round_ties_even().clamp(0.0, 255.0) as u8;
            }
            out
        })
        .collect();
    Ok(RgbaImage {
        width: base.width,
        height: base.height,
        pixels,
    })
}
