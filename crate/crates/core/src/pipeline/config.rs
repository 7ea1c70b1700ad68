//! Versioned JSON configuration for a pipeline run.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::buildings::HeightOptions;
use crate::datatex::ColorStop;
use crate::grid::GridSpec;
use crate::raster::{GaussianParams, RoadClassWidths};
use crate::tiler::{DEFAULT_TILE_SIZE, RECOMMENDED_TILE_SIZES};
use crate::tubes::{DEFAULT_CAP_VERTICES, DEFAULT_RADIUS};

pub const CONFIG_VERSION: u32 = 1;

/// The five reduced land-use classes, each written as its own mask.
pub const LANDUSE_CLASSES: [&str; 5] = ["water", "forest", "farm", "urban", "open"];

/// Input files; every entry is optional. Relative paths resolve against the
/// directory holding the config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    /// GeoJSON polygons.
    pub buildings: Option<PathBuf>,
    /// GeoJSON line strings.
    pub roads: Option<PathBuf>,
    /// GeoJSON polygons.
    pub landuse: Option<PathBuf>,
    /// ESRI ASCII grids, mosaicked in order.
    pub elevation: Vec<PathBuf>,
    /// `.las` or whitespace-separated XYZ text.
    pub pointcloud: Option<PathBuf>,
    /// GeoJSON polygons with a numeric value property.
    pub isolines: Option<PathBuf>,
    /// JSON volume document (see [`crate::datatex::Volume3D`]).
    pub volume: Option<PathBuf>,
    /// JSON streamline document: `{"streamlines": [{"points": [...], "scalars": [...]}]}`.
    pub streamlines: Option<PathBuf>,
}

impl Inputs {
    pub fn any(&self) -> bool {
        self.buildings.is_some()
            || self.roads.is_some()
            || self.landuse.is_some()
            || !self.elevation.is_empty()
            || self.pointcloud.is_some()
            || self.isolines.is_some()
            || self.volume.is_some()
            || self.streamlines.is_some()
    }
}

/// Gaussian sigma in cells per mask layer; the radius is `ceil(3σ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SigmaConfig {
    pub default: f64,
    /// Overrides keyed by mask name (`road` or a land-use class).
    pub layers: BTreeMap<String, f64>,
}

impl Default for SigmaConfig {
    fn default() -> Self {
        SigmaConfig {
            default: 2.0,
            layers: BTreeMap::new(),
        }
    }
}

impl SigmaConfig {
    pub fn params(&self, layer: &str) -> GaussianParams {
        GaussianParams::with_sigma(self.layers.get(layer).copied().unwrap_or(self.default))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropertyKeys {
    pub class_key: String,
    pub value_key: String,
}

impl Default for PropertyKeys {
    fn default() -> Self {
        PropertyKeys {
            class_key: "class".into(),
            value_key: "value".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TubeConfig {
    pub cap_vertices: usize,
    pub radius: f64,
    /// Number of leading streamlines meshed into the sample OBJ.
    pub sample_lines: usize,
    /// Streamline counts used by `bench` when none are given.
    pub bench_counts: Vec<usize>,
    pub bench_runs: usize,
}

impl Default for TubeConfig {
    fn default() -> Self {
        TubeConfig {
            cap_vertices: DEFAULT_CAP_VERTICES,
            radius: DEFAULT_RADIUS,
            sample_lines: 10,
            bench_counts: vec![1003, 4158, 8316, 12474],
            bench_runs: 5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VolumeConfig {
    /// Tile grid of the z-fold; both absent picks the smallest square fold.
    pub tiles_x: Option<usize>,
    pub tiles_y: Option<usize>,
    /// Candidate particles drawn with the run seed; 0 disables spawning.
    pub particles: usize,
    pub particle_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    #[serde(default)]
    pub inputs: Inputs,
    /// Output raster geometry shared by every grid stage.
    pub grid: GridSpec,
    #[serde(default = "default_tile_size")]
    pub tile_size: usize,
    #[serde(default = "default_crs")]
    pub crs: String,
    /// Required when a roads input is present.
    #[serde(default)]
    pub road_widths: Option<RoadClassWidths>,
    /// Source road label → one of the `road_widths` classes.
    #[serde(default)]
    pub road_classes: BTreeMap<String, String>,
    /// Source land-use label → one of [`LANDUSE_CLASSES`].
    #[serde(default)]
    pub landuse_classes: BTreeMap<String, String>,
    #[serde(default)]
    pub sigma: SigmaConfig,
    #[serde(default)]
    pub properties: PropertyKeys,
    #[serde(default)]
    pub buildings: HeightOptions,
    #[serde(default)]
    pub tubes: TubeConfig,
    #[serde(default)]
    pub volume: VolumeConfig,
    /// Colormap for the isoline reference image; viridis when absent.
    #[serde(default)]
    pub colormap: Option<Vec<ColorStop>>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Directory relative input paths resolve against; set by [`PipelineConfig::load`].
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_tile_size() -> usize {
    DEFAULT_TILE_SIZE
}

fn default_crs() -> String {
    "EPSG:3006".into()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl PipelineConfig {
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, PipelineError> {
        let mut cfg: PipelineConfig =
            serde_json::from_str(text).map_err(|e| PipelineError::Config(format!("invalid config JSON: {e}")))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
        Self::from_json(&text, &base)
    }

    /// Static checks that need no input data.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.version != CONFIG_VERSION {
            return bad(format!("unsupported config version {} (expected {CONFIG_VERSION})", self.version));
        }
        if !self.inputs.any() {
            return bad("no inputs configured".into());
        }
        if let Err(e) = self.grid.validate() {
            return bad(format!("grid: {e}"));
        }
        if self.tile_size == 0 {
            return bad("tile_size must be positive".into());
        }
        if self.inputs.roads.is_some() && self.road_widths.is_none() {
            return bad("roads input requires road_widths".into());
        }
        if let Some(w) = &self.road_widths {
            let unknown: Vec<&str> = self
                .road_classes
                .values()
                .filter(|c| w.get(c).is_none())
                .map(String::as_str)
                .collect();
            if !unknown.is_empty() {
                return bad(format!("road_classes map to unknown width classes: {}", unknown.join(", ")));
            }
        }
        let unknown: BTreeSet<&str> = self
            .landuse_classes
            .values()
            .map(String::as_str)
            .filter(|c| !LANDUSE_CLASSES.contains(c))
            .collect();
        if !unknown.is_empty() {
            return bad(format!(
                "landuse_classes targets must be one of {LANDUSE_CLASSES:?}; got {}",
                unknown.into_iter().collect::<Vec<_>>().join(", ")
            ));
        }
        for (layer, &s) in std::iter::once(("default", &self.sigma.default)).chain(self.sigma.layers.iter().map(|(k, v)| (k.as_str(), v))) {
            if !(s > 0.0 && s.is_finite()) {
                return bad(format!("sigma for {layer} must be positive, got {s}"));
            }
        }
        if let Some(stops) = &self.colormap {
            crate::datatex::Colormap::new(stops.clone()).map_err(|e| PipelineError::Config(e.to_string()))?;
        }
        if self.tubes.cap_vertices < 3 || !(self.tubes.radius > 0.0) {
            return bad("tubes need cap_vertices >= 3 and a positive radius".into());
        }
        if self.volume.tiles_x.is_some() != self.volume.tiles_y.is_some() {
            return bad("volume.tiles_x and volume.tiles_y must be given together".into());
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn resolved_output_dir(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    /// True when the tile size is not one of the engine's recommended sizes.
    pub fn unusual_tile_size(&self) -> bool {
        !RECOMMENDED_TILE_SIZES.contains(&self.tile_size)
    }
}

/// Maps every source label through `mapping`. Labels that already name a
/// target class map to themselves. All unmapped labels are reported at once.
pub fn map_labels<'a>(
    labels: impl IntoIterator<Item = &'a str>,
    mapping: &BTreeMap<String, String>,
    targets: &[&str],
    what: &str,
) -> Result<BTreeMap<String, String>, PipelineError> {
    let mut out = BTreeMap::new();
    let mut missing = BTreeSet::new();
    for l in labels {
        if let Some(t) = mapping.get(l) {
            out.insert(l.to_string(), t.clone());
        } else if targets.contains(&l) {
            out.insert(l.to_string(), l.to_string());
        } else {
            missing.insert(l.to_string());
        }
    }
    if missing.is_empty() {
        Ok(out)
    } else {
        Err(PipelineError::Config(format!(
            "unmapped {what} labels: {}",
            missing.into_iter().collect::<Vec<_>>().join(", ")
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        r#"{"version": 1, "inputs": {"elevation": ["dem.asc"]},
            "grid": {"origin": [0, 0], "cell_spacing": 1, "width": 4, "height": 4}}"#
    }

    #[test]
    fn defaults_fill_in() {
        let c = PipelineConfig::from_json(minimal(), Path::new("/data")).unwrap();
        assert_eq!(c.tile_size, DEFAULT_TILE_SIZE);
        assert_eq!(c.sigma.params("road").sigma, 2.0);
        assert_eq!(c.resolve(Path::new("dem.asc")), PathBuf::from("/data/dem.asc"));
        assert_eq!(c.resolved_output_dir(), PathBuf::from("/data/out"));
    }

    #[test]
    fn empty_inputs_rejected() {
        let text = r#"{"version": 1, "grid": {"origin": [0, 0], "cell_spacing": 1, "width": 4, "height": 4}}"#;
        assert!(matches!(PipelineConfig::from_json(text, Path::new(".")), Err(PipelineError::Config(_))));
    }

    #[test]
    fn wrong_version_and_unknown_fields_rejected() {
        let v2 = minimal().replace("\"version\": 1", "\"version\": 2");
        assert!(PipelineConfig::from_json(&v2, Path::new(".")).is_err());
        let extra = minimal().replace("\"version\": 1", "\"version\": 1, \"bogus\": 3");
        assert!(PipelineConfig::from_json(&extra, Path::new(".")).is_err());
    }

    #[test]
    fn landuse_targets_checked() {
        let t = minimal().replace("\"version\": 1", "\"version\": 1, \"landuse_classes\": {\"lake\": \"lava\"}");
        let e = PipelineConfig::from_json(&t, Path::new(".")).unwrap_err();
        assert!(e.to_string().contains("lava"));
    }

    #[test]
    fn unmapped_labels_are_listed_together() {
        let mapping = BTreeMap::from([("lake".to_string(), "water".to_string())]);
        let e = map_labels(["lake", "bog", "water", "mine"], &mapping, &LANDUSE_CLASSES, "land-use").unwrap_err();
        assert_eq!(e.to_string(), "config: unmapped land-use labels: bog, mine");
        let ok = map_labels(["lake", "water"], &mapping, &LANDUSE_CLASSES, "land-use").unwrap();
        assert_eq!(ok["water"], "water");
    }
}
