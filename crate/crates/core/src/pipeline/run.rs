use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Deserialize;
use serde_json::json;

use super::config::{map_labels, PipelineConfig, LANDUSE_CLASSES};
use super::manifest::{Manifest, ManifestFile, MeshEntry, RunStatus, StageTiming};
use super::PipelineError;
use crate::buildings::{self, HeightOptions};
use crate::datatex::{
    self, Colormap, DataTexture, Layout, TextureFile, TextureSidecar, Volume3D, ZFoldLayout,
};
use crate::grid::{GridSpec, RasterGrid};
use crate::ingest::{self, Feature, GeoJsonOptions, LayerKind, PointFormat, VectorLayer};
use crate::mesh::TriangleMesh;
use crate::raster::{self, ResampleMethod};
use crate::tiler::{self, NamingScheme, QuantSpec, TileRole, TileSetEntry};
use crate::io;
use crate::tubes::{self, SegmentInstance, Streamline};

/// A failed run: the error and the manifest of the stages that completed,
/// which has also been written to the output directory when possible.
#[derive(Debug)]
pub struct RunFailure {
    pub error: PipelineError,
    pub manifest: Manifest,
}

/// Binary masks after road subtraction and before smoothing.
#[derive(Debug, Clone, Default)]
pub struct MaskSet {
    pub road: Option<RasterGrid>,
    /// One grid per class in [`LANDUSE_CLASSES`] when a land-use input exists.
    pub landuse: BTreeMap<String, RasterGrid>,
}

impl MaskSet {
    /// Cells where the road mask plus some land-use mask exceeds 1.
    pub fn overlap_violations(&self) -> usize {
        let Some(road) = &self.road else { return 0 };
        (0..road.values.len())
            .filter(|&i| self.landuse.values().any(|m| road.values[i] + m.values[i] > 1.0))
            .count()
    }
}

#[derive(Deserialize)]
struct StreamlineDocument {
    streamlines: Vec<Streamline>,
}

struct Ctx<'a> {
    cfg: &'a PipelineConfig,
    out: PathBuf,
    m: Manifest,
    terrain: Option<RasterGrid>,
    road_raw: Option<RasterGrid>,
}

type Stage = fn(&mut Ctx) -> Result<(), PipelineError>;

/// Runs every stage whose input is configured, in the fixed order terrain,
/// roads, land-use, buildings, isolines, volume, streamlines, and writes
/// `manifest.json` into the output directory.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Manifest, RunFailure> {
    let mut ctx = Ctx {
        cfg,
        out: cfg.resolved_output_dir(),
        m: Manifest::new(&cfg.crs, cfg.seed, cfg.grid),
        terrain: None,
        road_raw: None,
    };
    let i = &cfg.inputs;
    let stages: [(&str, bool, Stage); 7] = [
        ("terrain", !i.elevation.is_empty(), stage_terrain),
        ("roads", i.roads.is_some(), stage_roads),
        ("landuse", i.landuse.is_some(), stage_landuse),
        ("buildings", i.buildings.is_some(), stage_buildings),
        ("isolines", i.isolines.is_some(), stage_isolines),
        ("volume", i.volume.is_some(), stage_volume),
        ("streamlines", i.streamlines.is_some(), stage_streamlines),
    ];
    if let Err(error) = std::fs::create_dir_all(&ctx.out).map_err(|e| PipelineError::io(&ctx.out, e)) {
        ctx.m.status = RunStatus::Partial;
        ctx.m.error = Some(error.to_string());
        return Err(RunFailure { error, manifest: ctx.m });
    }
    if cfg.unusual_tile_size() {
        ctx.m.warnings.push(format!(
            "tile_size {} is not one of the engine-recommended sizes {:?}",
            cfg.tile_size,
            tiler::RECOMMENDED_TILE_SIZES
        ));
    }
    if i.pointcloud.is_some() && i.buildings.is_none() {
        ctx.m.warnings.push("pointcloud input is unused without a buildings input".into());
    }
    for (name, enabled, stage) in stages {
        if !enabled {
            continue;
        }
        log::info!("stage {name}");
        let marks = (ctx.m.files.len(), ctx.m.tile_sets.len(), ctx.m.meshes.len(), ctx.m.textures.len());
        let start = Instant::now();
        if let Err(error) = stage(&mut ctx) {
            ctx.m.files.truncate(marks.0);
            ctx.m.tile_sets.truncate(marks.1);
            ctx.m.meshes.truncate(marks.2);
            ctx.m.textures.truncate(marks.3);
            ctx.m.status = RunStatus::Partial;
            ctx.m.error = Some(format!("stage {name}: {error}"));
            if let Err(e) = ctx.m.save(&ctx.out) {
                log::error!("could not write partial manifest: {e}");
            }
            return Err(RunFailure { error, manifest: ctx.m });
        }
        ctx.m.timings.push(StageTiming {
            stage: name.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    if let Err(error) = ctx.m.save(&ctx.out) {
        return Err(RunFailure { error, manifest: ctx.m });
    }
    Ok(ctx.m)
}

impl Ctx<'_> {
    fn write(&mut self, rel: &str, bytes: &[u8], role: &str, format: &str) -> Result<ManifestFile, PipelineError> {
        let path = self.out.join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| PipelineError::io(&path, e))?;
        let f = ManifestFile {
            path: rel.to_string(),
            role: role.to_string(),
            format: format.to_string(),
            sha256: io::sha256_hex(bytes),
            bytes: bytes.len(),
            quantization: None,
            layout: None,
        };
        self.m.files.push(f.clone());
        Ok(f)
    }

    fn write_tile_set(&mut self, grid: &RasterGrid, basename: &str, role: TileRole, quant: QuantSpec, dir: &str) -> Result<(), PipelineError> {
        let set = tiler::retile(grid, self.cfg.tile_size, NamingScheme::new(basename), role)
            .map_err(|e| PipelineError::stage(basename, e))?;
        let entry = tiler::write_tiles(&set, quant, &self.out.join(dir), dir).map_err(|e| PipelineError::stage(basename, e))?;
        self.record_tiles(&entry, basename);
        self.m.tile_sets.push(entry);
        Ok(())
    }

    fn record_tiles(&mut self, entry: &TileSetEntry, role: &str) {
        let format = format!("png-gray{}", entry.bit_depth);
        for t in &entry.files {
            if t.clamped > 0 {
                self.m.warnings.push(format!("{}: {} cells clamped or nodata", t.path, t.clamped));
            }
            self.m.files.push(ManifestFile {
                path: t.path.clone(),
                role: role.to_string(),
                format: format.clone(),
                sha256: t.sha256.clone(),
                bytes: t.bytes,
                quantization: Some(entry.quantization),
                layout: Some(json!({"tile_set": entry.basename, "col": t.col, "row": t.row})),
            });
        }
    }

    /// Writes a texture payload under `dir` and returns its sidecar entry.
    fn write_texture(&mut self, tex: &DataTexture, dir: &str, name: &str, role: &str) -> Result<TextureFile, PipelineError> {
        let (bytes, ext) = datatex::encode_payload(tex).map_err(|e| PipelineError::stage(role, e))?;
        let rel = format!("{dir}/{name}.{ext}");
        let format = format!("{}-{}", ext, tex.payload.format_name());
        let f = self.write(&rel, &bytes, role, &format)?;
        let layout = serde_json::to_value(&tex.layout).expect("layout serializes");
        let last = self.m.files.last_mut().expect("just written");
        last.layout = Some(layout);
        Ok(TextureFile {
            path: f.path,
            role: f.role,
            format: f.format,
            sha256: f.sha256,
            bytes: f.bytes,
        })
    }

    fn write_sidecar(&mut self, dir: &str, sidecar: TextureSidecar) -> Result<(), PipelineError> {
        let bytes = serde_json::to_vec_pretty(&sidecar).expect("sidecar serializes");
        self.write(&format!("{dir}/{}.json", sidecar.name), &bytes, "sidecar", "json")?;
        self.m.textures.push(sidecar);
        Ok(())
    }

    fn write_obj(&mut self, rel: &str, role: &str, meshes: &[(String, TriangleMesh)]) -> Result<(), PipelineError> {
        let text = buildings::export_obj(meshes);
        self.write(rel, text.as_bytes(), role, "obj")?;
        self.m.meshes.push(MeshEntry {
            path: rel.to_string(),
            role: role.to_string(),
            objects: meshes.len(),
            vertices: meshes.iter().map(|(_, m)| m.vertices.len()).sum(),
            triangles: meshes.iter().map(|(_, m)| m.triangles.len()).sum(),
        });
        Ok(())
    }
}

fn read_input(cfg: &PipelineConfig, p: &Path) -> Result<Vec<u8>, PipelineError> {
    let path = cfg.resolve(p);
    std::fs::read(&path).map_err(|e| PipelineError::io(&path, e))
}

fn read_layer(
    cfg: &PipelineConfig,
    p: &Path,
    kind: LayerKind,
    default_class: Option<&str>,
    warnings: &mut Vec<String>,
) -> Result<VectorLayer, PipelineError> {
    let bytes = read_input(cfg, p)?;
    let opts = GeoJsonOptions {
        class_key: cfg.properties.class_key.clone(),
        value_key: cfg.properties.value_key.clone(),
        default_class: default_class.map(str::to_string),
        default_crs: cfg.crs.clone(),
    };
    let parsed = ingest::parse_geojson_layer(&bytes, kind, &opts).map_err(|e| PipelineError::input(p, e))?;
    for w in parsed.warnings {
        warnings.push(format!("{}: feature {}: {}", p.display(), w.feature_id, w.message));
    }
    if parsed.layer.crs_id != cfg.crs {
        warnings.push(format!(
            "{}: CRS {} differs from configured {}; coordinates are used as-is",
            p.display(),
            parsed.layer.crs_id,
            cfg.crs
        ));
    }
    Ok(parsed.layer)
}

/// Replaces every feature's label through `mapping`.
fn relabel(layer: &mut VectorLayer, mapping: &BTreeMap<String, String>) {
    for f in &mut layer.features {
        f.class_label = mapping[&f.class_label].clone();
    }
}

fn road_mask(cfg: &PipelineConfig, warnings: &mut Vec<String>) -> Result<Option<RasterGrid>, PipelineError> {
    let Some(path) = &cfg.inputs.roads else { return Ok(None) };
    let widths = cfg
        .road_widths
        .as_ref()
        .ok_or_else(|| PipelineError::Config("roads input requires road_widths".into()))?;
    let mut layer = read_layer(cfg, path, LayerKind::Polyline, None, warnings)?;
    let targets: Vec<&str> = widths.classes().collect();
    let mapping = map_labels(layer.features.iter().map(|f| f.class_label.as_str()), &cfg.road_classes, &targets, "road")?;
    relabel(&mut layer, &mapping);
    raster::rasterize_buffered_polylines(&layer, widths, &cfg.grid)
        .map(Some)
        .map_err(|e| PipelineError::stage("roads", e))
}

fn landuse_masks(
    cfg: &PipelineConfig,
    road: Option<&RasterGrid>,
    warnings: &mut Vec<String>,
) -> Result<BTreeMap<String, RasterGrid>, PipelineError> {
    let Some(path) = &cfg.inputs.landuse else { return Ok(BTreeMap::new()) };
    let mut layer = read_layer(cfg, path, LayerKind::Polygon, None, warnings)?;
    let mapping = map_labels(
        layer.features.iter().map(|f| f.class_label.as_str()),
        &cfg.landuse_classes,
        &LANDUSE_CLASSES,
        "land-use",
    )?;
    relabel(&mut layer, &mapping);
    let mut out = BTreeMap::new();
    for class in LANDUSE_CLASSES {
        let sub = VectorLayer {
            features: layer.features.iter().filter(|f| f.class_label == class).cloned().collect(),
            crs_id: layer.crs_id.clone(),
            kind: LayerKind::Polygon,
        };
        let stage = |e| PipelineError::stage("landuse", e);
        let mut mask = raster::rasterize_polygons_binary(&sub, &cfg.grid).map_err(stage)?;
        if let Some(r) = road {
            mask = raster::subtract_clamp(&mask, r).map_err(stage)?;
        }
        out.insert(class.to_string(), mask);
    }
    Ok(out)
}

/// Road and land-use masks exactly as the pipeline produces them before
/// Gaussian smoothing, plus any ingestion warnings.
pub fn build_masks(cfg: &PipelineConfig) -> Result<(MaskSet, Vec<String>), PipelineError> {
    let mut warnings = Vec::new();
    let road = road_mask(cfg, &mut warnings)?;
    let landuse = landuse_masks(cfg, road.as_ref(), &mut warnings)?;
    Ok((MaskSet { road, landuse }, warnings))
}

/// Copies `src` onto `spec` by nearest cell; cells outside `src` are nodata.
fn place_onto(src: &RasterGrid, spec: &GridSpec) -> RasterGrid {
    let mut out = RasterGrid::filled(*spec, src.nodata, src.nodata);
    let [x1, y1] = src.spec().max_corner();
    for row in 0..spec.height {
        for col in 0..spec.width {
            let p = spec.cell_center(col, row);
            if p[0] < src.origin[0] || p[1] < src.origin[1] || p[0] >= x1 || p[1] >= y1 {
                continue;
            }
            let [fx, fy] = src.spec().to_cell_coords(p);
            if let Some(v) = src.sample_nearest_cells(fx, fy) {
                out.set(col, row, v);
            }
        }
    }
    out
}

fn stage_terrain(ctx: &mut Ctx) -> Result<(), PipelineError> {
    let cfg = ctx.cfg;
    let mut grids = Vec::new();
    for p in &cfg.inputs.elevation {
        let bytes = read_input(cfg, p)?;
        grids.push(ingest::parse_esri_ascii_grid(&bytes).map_err(|e| PipelineError::input(p, e))?);
    }
    let stage = |e| PipelineError::stage("terrain", e);
    let merged = raster::mosaic(&grids).map_err(stage)?;
    let resampled = raster::resample(&merged, cfg.grid.cell_spacing, ResampleMethod::Bilinear).map_err(stage)?;
    let terrain = place_onto(&resampled, &cfg.grid);
    let (z_min, z_max) = terrain
        .data_values()
        .fold(None, |acc: Option<(f64, f64)>, v| Some(acc.map_or((v, v), |(a, b)| (a.min(v), b.max(v)))))
        .ok_or_else(|| PipelineError::stage("terrain", "elevation does not overlap the configured grid"))?;
    let missing = terrain.values.len() - terrain.data_values().count();
    if missing > 0 {
        ctx.m.warnings.push(format!("terrain: {missing} grid cells have no elevation data"));
    }
    ctx.write_tile_set(&terrain, "heightmap", TileRole::Heightmap, QuantSpec::Height16 { z_min, z_max }, "terrain")?;
    ctx.terrain = Some(terrain);
    Ok(())
}

fn smooth_and_write(ctx: &mut Ctx, name: &str, mask: &RasterGrid) -> Result<(), PipelineError> {
    let smooth = raster::gaussian_convolve(mask, ctx.cfg.sigma.params(name)).map_err(|e| PipelineError::stage(name, e))?;
    ctx.write_tile_set(&smooth, name, TileRole::Mask, QuantSpec::Mask8, &format!("masks/{name}"))
}

fn stage_roads(ctx: &mut Ctx) -> Result<(), PipelineError> {
    let mask = road_mask(ctx.cfg, &mut ctx.m.warnings)?.expect("stage runs only with a roads input");
    smooth_and_write(ctx, "road", &mask)?;
    ctx.road_raw = Some(mask);
    Ok(())
}

fn stage_landuse(ctx: &mut Ctx) -> Result<(), PipelineError> {
    let road = ctx.road_raw.take();
    let masks = landuse_masks(ctx.cfg, road.as_ref(), &mut ctx.m.warnings)?;
    let set = MaskSet { road, landuse: masks };
    let violations = set.overlap_violations();
    ctx.m.overlap_violations = Some(violations);
    if violations > 0 {
        return Err(PipelineError::stage("landuse", format!("{violations} cells overlap the road mask after subtraction")));
    }
    for (class, mask) in &set.landuse {
        smooth_and_write(ctx, class, mask)?;
    }
    ctx.road_raw = set.road;
    Ok(())
}

fn stage_buildings(ctx: &mut Ctx) -> Result<(), PipelineError> {
    let cfg = ctx.cfg;
    let path = cfg.inputs.buildings.as_ref().expect("stage runs only with a buildings input");
    let layer = read_layer(cfg, path, LayerKind::Polygon, Some("building"), &mut ctx.m.warnings)?;
    let cloud = match &cfg.inputs.pointcloud {
        Some(p) => {
            let bytes = read_input(cfg, p)?;
            let is_las = p.extension().is_some_and(|e| e.eq_ignore_ascii_case("las") || e.eq_ignore_ascii_case("laz"));
            let format = if is_las { PointFormat::Las } else { PointFormat::XyzText };
            Some(ingest::parse_point_cloud(&bytes, format).map_err(|e| PipelineError::input(p, e))?)
        }
        None => None,
    };
    let opts: &HeightOptions = &cfg.buildings;
    let features: Vec<Feature> = layer.features;
    let built = buildings::build_all(&features, cloud.as_ref(), ctx.terrain.as_ref(), opts);
    for w in &built.warnings {
        ctx.m.warnings.push(format!("building {}: {}", w.feature_id, w.message));
    }
    ctx.write_obj("buildings/buildings.obj", "buildings", &built.meshes)?;
    let records = serde_json::to_vec_pretty(&built.records).expect("records serialize");
    ctx.write("buildings/buildings.json", &records, "building_records", "json")?;
    Ok(())
}

fn stage_isolines(ctx: &mut Ctx) -> Result<(), PipelineError> {
    let cfg = ctx.cfg;
    let path = cfg.inputs.isolines.as_ref().expect("stage runs only with an isolines input");
    let layer = read_layer(cfg, path, LayerKind::Polygon, Some("isoline"), &mut ctx.m.warnings)?;
    let stage = |e| PipelineError::stage("isolines", e);
    let packed = datatex::pack_isolines(&layer, &cfg.grid).map_err(|e| match e {
        datatex::DataTexError::MissingValue(id) => PipelineError::input(path, format!("feature {id} has no value")),
        e => stage(e),
    })?;
    if packed.normalization.degenerate {
        ctx.m.warnings.push("isolines: all values equal; texture is uniformly 0".into());
    }
    let cmap = match &cfg.colormap {
        Some(stops) => Colormap::new(stops.clone()).map_err(|e| PipelineError::Config(e.to_string()))?,
        None => Colormap::viridis(),
    };
    let rgba = datatex::apply_colormap(&packed.texture, Some(&packed.mask), &cmap).map_err(stage)?;
    let files = vec![
        ctx.write_texture(&packed.texture, "isolines", "isolines", "isoline_values")?,
        ctx.write_texture(&packed.mask, "isolines", "isolines_mask", "isoline_mask")?,
        {
            let png = io::encode_rgba8(rgba.width, rgba.height, &rgba.pixels).map_err(|e| PipelineError::stage("isolines", e))?;
            let f = ctx.write("isolines/isolines_colormap.png", &png, "colormap_reference", "png-rgba8")?;
            TextureFile {
                path: f.path,
                role: f.role,
                format: f.format,
                sha256: f.sha256,
                bytes: f.bytes,
            }
        },
    ];
    ctx.write_sidecar(
        "isolines",
        TextureSidecar {
            name: "isolines".into(),
            width: packed.texture.width,
            height: packed.texture.height,
            format: "u16".into(),
            layout: Layout::Plain,
            normalization: Some(packed.normalization),
            provenance: format!("isoline polygons from {}", path.display()),
            files,
        },
    )
}

fn stage_volume(ctx: &mut Ctx) -> Result<(), PipelineError> {
    let cfg = ctx.cfg;
    let path = cfg.inputs.volume.as_ref().expect("stage runs only with a volume input");
    let bytes = read_input(cfg, path)?;
    let vol: Volume3D = serde_json::from_slice(&bytes).map_err(|e| PipelineError::input(path, e))?;
    vol.validate().map_err(|e| PipelineError::input(path, e))?;
    let layout = match (cfg.volume.tiles_x, cfg.volume.tiles_y) {
        (Some(tx), Some(ty)) => ZFoldLayout::new(tx, ty, vol.dims).map_err(|e| PipelineError::Config(e.to_string()))?,
        _ => ZFoldLayout::square_for(vol.dims),
    };
    let tex = datatex::zfold_encode(&vol, layout.tiles_x, layout.tiles_y).map_err(|e| PipelineError::stage("volume", e))?;
    let files = vec![ctx.write_texture(&tex, "volume", "volume", "zfold_volume")?];
    ctx.write_sidecar(
        "volume",
        TextureSidecar {
            name: "volume".into(),
            width: tex.width,
            height: tex.height,
            format: "u16".into(),
            layout: tex.layout.clone(),
            normalization: tex.normalization,
            provenance: format!(
                "{}x{}x{} volume from {}, origin {:?}, cell size {} m",
                vol.dims[0],
                vol.dims[1],
                vol.dims[2],
                path.display(),
                vol.origin,
                vol.cell_size
            ),
            files,
        },
    )?;
    if cfg.volume.particles > 0 {
        let particles = datatex::spawn_particles(&vol, cfg.volume.particles, cfg.volume.particle_threshold, cfg.seed);
        let bytes = serde_json::to_vec(&particles).expect("particles serialize");
        ctx.write("volume/particles.json", &bytes, "particles", "json")?;
    }
    Ok(())
}

fn stage_streamlines(ctx: &mut Ctx) -> Result<(), PipelineError> {
    let cfg = ctx.cfg;
    let path = cfg.inputs.streamlines.as_ref().expect("stage runs only with a streamlines input");
    let lines = read_streamlines(cfg, path)?;
    let tex = datatex::encode_streamlines_texture(&lines).map_err(|e| PipelineError::input(path, e))?;
    let mut files = Vec::new();
    for (channel, plane) in tex.layout.channels.iter().zip(&tex.planes) {
        files.push(ctx.write_texture(plane, "streamlines", &format!("streamlines_{channel}"), &format!("streamline_{channel}"))?);
    }
    ctx.write_sidecar(
        "streamlines",
        TextureSidecar {
            name: "streamlines".into(),
            width: tex.layout.max_points,
            height: tex.layout.line_count,
            format: "u16-pair".into(),
            layout: Layout::Streamline(tex.layout.clone()),
            normalization: None,
            provenance: format!("{} streamlines from {}", lines.len(), path.display()),
            files,
        },
    )?;
    let instances = tubes::segment_instances(&lines);
    let mut bytes = Vec::with_capacity(instances.len() * SegmentInstance::RECORD_BYTES);
    for s in &instances {
        s.write_le(&mut bytes);
    }
    ctx.write("streamlines/segments.bin", &bytes, "segment_instances", "f32le-midpoint-direction-length-scalar")?;

    let n = cfg.tubes.sample_lines.min(lines.len());
    let meshes = tubes::tube_meshes(&lines[..n], cfg.tubes.cap_vertices, cfg.tubes.radius);
    let mut named = Vec::new();
    for (i, r) in meshes.into_iter().enumerate() {
        match r {
            Ok(m) => named.push((format!("line_{i:05}"), m)),
            Err(e) => ctx.m.warnings.push(format!("streamline {i}: tube skipped: {e}")),
        }
    }
    ctx.write_obj("streamlines/tubes_sample.obj", "tube_sample", &named)
}

pub(crate) fn read_streamlines(cfg: &PipelineConfig, path: &Path) -> Result<Vec<Streamline>, PipelineError> {
    let bytes = read_input(cfg, path)?;
    let doc: StreamlineDocument = serde_json::from_slice(&bytes).map_err(|e| PipelineError::input(path, e))?;
    Ok(doc.streamlines)
}
