use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::datatex::TextureSidecar;
use crate::grid::GridSpec;
use crate::tiler::{QuantSpec, TileSetEntry};

pub const MANIFEST_NAME: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Complete,
    /// A stage failed; only earlier stages' outputs are listed.
    Partial,
}

/// One written file. Paths are relative to the output directory and use `/`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub path: String,
    pub role: String,
    pub format: String,
    pub sha256: String,
    pub bytes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantization: Option<QuantSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshEntry {
    pub path: String,
    pub role: String,
    pub objects: usize,
    pub vertices: usize,
    pub triangles: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub generator: String,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub crs: String,
    pub seed: u64,
    pub grid: GridSpec,
    pub files: Vec<ManifestFile>,
    pub tile_sets: Vec<TileSetEntry>,
    pub meshes: Vec<MeshEntry>,
    pub textures: Vec<TextureSidecar>,
    /// Cells where road and a land-use mask were both set after subtraction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overlap_violations: Option<usize>,
    pub warnings: Vec<String>,
    /// Wall time per completed stage, in run order. Not part of any checksum.
    pub timings: Vec<StageTiming>,
}

impl Manifest {
    pub fn new(crs: &str, seed: u64, grid: GridSpec) -> Self {
        Manifest {
            manifest_version: MANIFEST_VERSION,
            generator: format!("worldgen {}", env!("CARGO_PKG_VERSION")),
            status: RunStatus::Complete,
            error: None,
            crs: crs.to_string(),
            seed,
            grid,
            files: Vec::new(),
            tile_sets: Vec::new(),
            meshes: Vec::new(),
            textures: Vec::new(),
            overlap_violations: None,
            warnings: Vec::new(),
            timings: Vec::new(),
        }
    }

    pub fn load(out_dir: &Path) -> Result<Self, PipelineError> {
        let path = out_dir.join(MANIFEST_NAME);
        let text = std::fs::read_to_string(&path).map_err(|e| PipelineError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Validation(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, out_dir: &Path) -> Result<(), PipelineError> {
        let path = out_dir.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text).map_err(|e| PipelineError::io(&path, e))
    }

    pub fn file(&self, path: &str) -> Option<&ManifestFile> {
        self.files.iter().find(|f| f.path == path)
    }

    /// Path → checksum for every listed file, sorted by path.
    pub fn checksums(&self) -> Vec<(String, String)> {
        let mut v: Vec<_> = self.files.iter().map(|f| (f.path.clone(), f.sha256.clone())).collect();
        v.sort();
        v
    }

    /// Markdown-style stage timing table.
    pub fn timing_table(&self) -> String {
        let mut s = String::from("| stage | seconds |\n|---|---|\n");
        for t in &self.timings {
            s.push_str(&format!("| {} | {:.3} |\n", t.stage, t.seconds));
        }
        let total: f64 = self.timings.iter().map(|t| t.seconds).sum();
        s.push_str(&format!("| total | {total:.3} |\n"));
        s
    }
}
