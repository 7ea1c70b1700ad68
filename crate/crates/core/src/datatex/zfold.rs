//! Z-fold packing: the slices of a volume laid out as a grid of tiles in one
//! 2D texture, slice `z` at tile column `z % tiles_x`, tile row
//! `z / tiles_x` (left to right, then top to bottom).

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataTexError, DataTexture, Layout, Normalization, Payload};
use crate::grid::lerp_indices;
use crate::par;

/// Scalar volume with x varying fastest, then y, then z. Voxel `(i, j, k)`
/// sits at `origin + (i, j, k) * cell_size`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Volume3D {
    pub dims: [usize; 3],
    pub origin: [f64; 3],
    pub cell_size: f64,
    pub values: Vec<f32>,
}

impl Volume3D {
    pub fn new(dims: [usize; 3], origin: [f64; 3], cell_size: f64, values: Vec<f32>) -> Result<Self, DataTexError> {
        let v = Volume3D {
            dims,
            origin,
            cell_size,
            values,
        };
        v.validate()?;
        Ok(v)
    }

    pub fn validate(&self) -> Result<(), DataTexError> {
        if self.dims.contains(&0) {
            return Err(DataTexError::BadDimensions(self.dims));
        }
        let expected = self.dims.iter().product();
        if self.values.len() != expected {
            return Err(DataTexError::LengthMismatch {
                expected,
                actual: self.values.len(),
            });
        }
        Ok(())
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.values[(z * self.dims[1] + y) * self.dims[0] + x] as f64
    }

    /// Finite min and max, if any.
    pub fn range(&self) -> Option<(f64, f64)> {
        self.values
            .iter()
            .filter(|v| v.is_finite())
            .fold(None, |acc, &v| {
                let v = v as f64;
                Some(match acc {
                    None => (v, v),
                    Some((lo, hi)) => (lo.min(v), hi.max(v)),
                })
            })
    }

    /// Two bilinear slice samples blended linearly in z, in continuous voxel
    /// coordinates. Same semantics as [`ZFoldSampler::sample`] without
    /// quantization.
    pub fn sample(&self, x: f64, y: f64, z: f64) -> f64 {
        interpolate(self.dims, |i, j, k| self.get(i, j, k), x, y, z)
    }
}

/// Bilinear within slices `⌊z⌋` and `⌈z⌉` (clamped), then linear in z.
fn interpolate(dims: [usize; 3], fetch: impl Fn(usize, usize, usize) -> f64, x: f64, y: f64, z: f64) -> f64 {
    let (x0, x1, tx) = lerp_indices(x, dims[0]);
    let (y0, y1, ty) = lerp_indices(y, dims[1]);
    let (z0, z1, tz) = lerp_indices(z, dims[2]);
    let slice = |k: usize| {
        let a = fetch(x0, y0, k);
        let b = fetch(x1, y0, k);
        let c = fetch(x0, y1, k);
        let d = fetch(x1, y1, k);
        let lo = a + (b - a) * tx;
        let hi = c + (d - c) * tx;
        lo + (hi - lo) * ty
    };
    let s0 = slice(z0);
    if tz == 0.0 {
        return s0;
    }
    let s1 = slice(z1);
    s0 + (s1 - s0) * tz
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZFoldLayout {
    pub tiles_x: usize,
    pub tiles_y: usize,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl ZFoldLayout {
    pub fn new(tiles_x: usize, tiles_y: usize, dims: [usize; 3]) -> Result<Self, DataTexError> {
        let capacity = tiles_x * tiles_y;
        if capacity < dims[2] {
            return Err(DataTexError::Capacity {
                tiles_x,
                tiles_y,
                capacity,
                nz: dims[2],
            });
        }
        Ok(ZFoldLayout {
            tiles_x,
            tiles_y,
            nx: dims[0],
            ny: dims[1],
            nz: dims[2],
        })
    }

    /// Smallest near-square tile grid holding `nz` slices.
    pub fn square_for(dims: [usize; 3]) -> Self {
        let tiles_x = (dims[2] as f64).sqrt().ceil().max(1.0) as usize;
        let tiles_y = dims[2].div_ceil(tiles_x).max(1);
        ZFoldLayout::new(tiles_x, tiles_y, dims).expect("capacity covers nz by construction")
    }

    pub fn texture_dims(&self) -> (usize, usize) {
        (self.tiles_x * self.nx, self.tiles_y * self.ny)
    }

    #[inline]
    pub fn texel_of(&self, x: usize, y: usize, z: usize) -> (usize, usize) {
        ((z % self.tiles_x) * self.nx + x, (z / self.tiles_x) * self.ny + y)
    }

    /// Inverse of [`ZFoldLayout::texel_of`]; `None` for texels of unused
    /// tiles.
    pub fn voxel_of(&self, u: usize, v: usize) -> Option<(usize, usize, usize)> {
        let (tx, x) = (u / self.nx, u % self.nx);
        let (ty, y) = (v / self.ny, v % self.ny);
        if tx >= self.tiles_x || ty >= self.tiles_y {
            return None;
        }
        let z = ty * self.tiles_x + tx;
        (z < self.nz).then_some((x, y, z))
    }
}

/// Packs `vol` into a u16 texture normalized to the volume's finite range.
/// Unused tiles and non-finite voxels encode 0.
pub fn zfold_encode(vol: &Volume3D, tiles_x: usize, tiles_y: usize) -> Result<DataTexture, DataTexError> {
    vol.validate()?;
    let layout = ZFoldLayout::new(tiles_x, tiles_y, vol.dims)?;
    let (min, max) = vol.range().unwrap_or((0.0, 0.0));
    let norm = Normalization::from_range(min, max);
    let (w, h) = layout.texture_dims();
    let mut texels = vec![0u16; w * h];
    par::for_each_row(&mut texels, w, |v, row| {
        for (u, t) in row.iter_mut().enumerate() {
            if let Some((x, y, z)) = layout.voxel_of(u, v) {
                *t = norm.encode_u16(vol.get(x, y, z));
            }
        }
    });
    Ok(DataTexture::new(w, h, Payload::U16(texels), Some(norm), Layout::ZFold(layout)))
}

/// Reference sampler for a z-folded texture. Counts clamped lookups.
#[derive(Debug)]
pub struct ZFoldSampler<'a> {
    texels: &'a [u16],
    width: usize,
    layout: ZFoldLayout,
    norm: Normalization,
    clamped: AtomicU64,
}

impl<'a> ZFoldSampler<'a> {
    pub fn new(tex: &'a DataTexture) -> Result<Self, DataTexError> {
        let layout = match &tex.layout {
            Layout::ZFold(l) => *l,
            _ => return Err(DataTexError::Layout("not a z-fold texture".into())),
        };
        let texels = match &tex.payload {
            Payload::U16(v) => v.as_slice(),
            _ => return Err(DataTexError::Layout("z-fold payload must be u16".into())),
        };
        let norm = tex
            .normalization
            .ok_or_else(|| DataTexError::Layout("z-fold texture lacks normalization".into()))?;
        Ok(ZFoldSampler {
            texels,
            width: tex.width,
            layout,
            norm,
            clamped: AtomicU64::new(0),
        })
    }

    /// Denormalized voxel value at integer coordinates.
    pub fn voxel(&self, x: usize, y: usize, z: usize) -> f64 {
        let (u, v) = self.layout.texel_of(x, y, z);
        self.norm.decode_u16(self.texels[v * self.width + u])
    }

    /// Value at continuous voxel coordinates: bilinear in slices `⌊z⌋` and
    /// `⌈z⌉`, blended by the fractional part of `z`.
    pub fn sample(&self, x: f64, y: f64, z: f64) -> f64 {
        let l = &self.layout;
        let inside = |c: f64, n: usize| c >= 0.0 && c <= (n - 1) as f64;
        if !(inside(x, l.nx) && inside(y, l.ny) && inside(z, l.nz)) {
            self.clamped.fetch_add(1, Ordering::Relaxed);
        }
        interpolate([l.nx, l.ny, l.nz], |i, j, k| self.voxel(i, j, k), x, y, z)
    }

    /// Lookups whose coordinates had to be clamped into the volume.
    pub fn clamped_lookups(&self) -> u64 {
        self.clamped.load(Ordering::Relaxed)
    }

    pub fn quantization_step(&self) -> f64 {
        self.norm.step()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub position: [f64; 3],
    pub value: f64,
}

/// Draws `n` uniform candidates in the volume's box with ChaCha8 seeded by
/// `seed` (three `f64` draws per candidate, x then y then z), samples each
/// and keeps those with value ≥ `threshold`, in draw order.
pub fn spawn_particles(vol: &Volume3D, n: usize, threshold: f64, seed: u64) -> Vec<Particle> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let extent = vol.dims.map(|d| (d - 1) as f64);
    let candidates: Vec<[f64; 3]> = (0..n)
        .map(|_| {
            let ux: f64 = rng.random();
            let uy: f64 = rng.random();
            let uz: f64 = rng.random();
            [ux * extent[0], uy * extent[1], uz * extent[2]]
        })
        .collect();
    par::map(&candidates, |c| {
        let value = vol.sample(c[0], c[1], c[2]);
        (value >= threshold).then(|| Particle {
            position: [
                vol.origin[0] + c[0] * vol.cell_size,
                vol.origin[1] + c[1] * vol.cell_size,
                vol.origin[2] + c[2] * vol.cell_size,
            ],
            value,
        })
    })
    .into_iter()
    .flatten()
    .collect()
}
