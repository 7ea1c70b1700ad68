//! GIS-to-game-engine asset generation.
//!
//! The crate turns vector footprints, road centerlines, land-use polygons,
//! elevation rasters, point clouds, isolines, volumes and streamlines into
//! tiled heightmaps and weightmasks, LoD1 building meshes, data textures and
//! streamline geometry. Every stage is deterministic: identical inputs and
//! seed produce identical bytes regardless of thread count.

pub mod buildings;
pub mod datatex;
pub mod geom;
pub mod grid;
pub mod ingest;
pub mod io;
pub mod mesh;
pub mod par;
pub mod pipeline;
pub mod raster;
pub mod tiler;
pub mod tubes;

pub use grid::{GridSpec, RasterGrid};
pub use mesh::TriangleMesh;
