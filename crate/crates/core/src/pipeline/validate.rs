use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use super::manifest::{Manifest, RunStatus};
use super::PipelineError;
use crate::io;
use crate::mesh;
use crate::tiler::{self, QuantSpec, TileSetEntry};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub ok: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    fn push(&mut self, name: impl Into<String>, result: Result<String, String>) {
        let (ok, detail) = match result {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        self.checks.push(Check {
            name: name.into(),
            ok,
            detail,
        });
    }

    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.ok)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let _ = writeln!(s, "{} {}: {}", if c.ok { "ok  " } else { "FAIL" }, c.name, c.detail);
        }
        let failed = self.failures().count();
        let _ = writeln!(s, "{} checks, {} failed", self.checks.len(), failed);
        s
    }
}

/// Re-reads every output listed in `out_dir/manifest.json` and re-checks
/// checksums, tile-set completeness and geometry, and mesh manifoldness.
/// Only an unreadable manifest is an `Err`; every other problem is a failed
/// check in the report.
pub fn cmd_validate(out_dir: &Path) -> Result<ValidationReport, PipelineError> {
    let m = Manifest::load(out_dir)?;
    let mut r = ValidationReport::default();
    r.push(
        "manifest status",
        match m.status {
            RunStatus::Complete => Ok("complete".into()),
            RunStatus::Partial => Err(format!("partial run: {}", m.error.as_deref().unwrap_or("unknown error"))),
        },
    );

    let mut seen = BTreeSet::new();
    let dups: Vec<&str> = m.files.iter().filter(|f| !seen.insert(f.path.as_str())).map(|f| f.path.as_str()).collect();
    r.push(
        "unique file entries",
        if dups.is_empty() {
            Ok(format!("{} files", m.files.len()))
        } else {
            Err(format!("listed more than once: {}", dups.join(", ")))
        },
    );

    for f in &m.files {
        let path = out_dir.join(&f.path);
        let result = match std::fs::read(&path) {
            Err(e) => Err(format!("cannot read: {e}")),
            Ok(bytes) if bytes.len() != f.bytes => Err(format!("size {} != manifest {}", bytes.len(), f.bytes)),
            Ok(bytes) => {
                let sum = io::sha256_hex(&bytes);
                if sum == f.sha256 {
                    Ok("sha256 matches".into())
                } else {
                    Err(format!("checksum mismatch: {sum} != {}", f.sha256))
                }
            }
        };
        r.push(format!("checksum {}", f.path), result);
    }

    for set in &m.tile_sets {
        check_tile_set(&mut r, &m, set, out_dir);
    }

    for entry in &m.meshes {
        let result = std::fs::read_to_string(out_dir.join(&entry.path))
            .map_err(|e| format!("cannot read: {e}"))
            .and_then(|text| mesh::parse_obj(&text).map_err(|e| e.to_string()))
            .and_then(|objects| {
                if objects.len() != entry.objects {
                    return Err(format!("{} objects, manifest lists {}", objects.len(), entry.objects));
                }
                let bad: Vec<String> = objects
                    .iter()
                    .filter_map(|(name, mesh)| mesh.check_closed_manifold().err().map(|e| format!("{name}: {e}")))
                    .collect();
                if bad.is_empty() {
                    Ok(format!("{} closed manifold objects", objects.len()))
                } else {
                    Err(bad.join("; "))
                }
            });
        r.push(format!("mesh {}", entry.path), result);
    }

    for tex in &m.textures {
        let mut problems = Vec::new();
        for f in &tex.files {
            if m.file(&f.path).is_none_or(|mf| mf.sha256 != f.sha256) {
                problems.push(format!("{} not in manifest with the same checksum", f.path));
            }
            if f.format == "bin-u16-pair" && f.bytes != 4 * tex.width * tex.height {
                problems.push(format!("{} has {} bytes, expected {}", f.path, f.bytes, 4 * tex.width * tex.height));
            }
            if f.format.starts_with("png-u") {
                match std::fs::read(out_dir.join(&f.path)).map_err(|e| e.to_string()).and_then(|b| io::decode_gray(&b).map_err(|e| e.to_string())) {
                    Ok(img) if (img.width as usize, img.height as usize) == (tex.width, tex.height) => {}
                    Ok(img) => problems.push(format!("{} is {}x{}, sidecar says {}x{}", f.path, img.width, img.height, tex.width, tex.height)),
                    Err(e) => problems.push(format!("{}: {e}", f.path)),
                }
            }
        }
        r.push(
            format!("texture {}", tex.name),
            if problems.is_empty() {
                Ok(format!("{} files consistent", tex.files.len()))
            } else {
                Err(problems.join("; "))
            },
        );
    }
    Ok(r)
}

fn check_tile_set(r: &mut ValidationReport, m: &Manifest, set: &TileSetEntry, out_dir: &Path) {
    let name = format!("tile set {}", set.basename);
    let naming = set.naming();
    let listed: BTreeMap<(usize, usize), &str> = set.files.iter().map(|f| ((f.col, f.row), f.path.as_str())).collect();
    let mut missing = Vec::new();
    for row in 0..set.rows {
        for col in 0..set.cols {
            match listed.get(&(col, row)) {
                Some(p) if out_dir.join(p).is_file() && m.file(p).is_some() => {}
                _ => missing.push(naming.name(col, row)),
            }
        }
    }
    let misnamed: Vec<&str> = set
        .files
        .iter()
        .filter(|f| naming.parse(&f.name) != Some((f.col, f.row)) || f.col >= set.cols || f.row >= set.rows)
        .map(|f| f.name.as_str())
        .collect();
    let dense = if !missing.is_empty() {
        Err(format!("dense rectangle {}x{} is missing {}", set.cols, set.rows, missing.join(", ")))
    } else if !misnamed.is_empty() || listed.len() != set.files.len() {
        Err(format!("tile names do not match their indices: {}", misnamed.join(", ")))
    } else {
        Ok(format!("{}x{} tiles present", set.cols, set.rows))
    };
    let dense_ok = dense.is_ok();
    r.push(format!("{name} dense rectangle"), dense);
    if !dense_ok {
        return;
    }
    let result = tiler::read_tiles(set, out_dir)
        .and_then(|tiles| tiler::reassemble(&tiles))
        .map_err(|e| e.to_string())
        .and_then(|g| {
            if (g.width, g.height) != (set.valid_width, set.valid_height) || g.origin != set.origin {
                return Err(format!("reassembled {}x{} at {:?}, expected {}x{} at {:?}", g.width, g.height, g.origin, set.valid_width, set.valid_height, set.origin));
            }
            if (g.width, g.height, g.origin, g.cell_spacing) != (m.grid.width, m.grid.height, m.grid.origin, m.grid.cell_spacing) {
                return Err("reassembled grid differs from the manifest grid".into());
            }
            let (lo, hi) = match set.quantization {
                QuantSpec::Height16 { z_min, z_max } => (z_min, z_max),
                QuantSpec::Mask8 => (0.0, 1.0),
            };
            let tol = set.quantization.step();
            match g.values.iter().find(|&&v| !(v >= lo - tol && v <= hi + tol)) {
                Some(v) => Err(format!("value {v} outside [{lo}, {hi}]")),
                None => Ok(format!("reassembled {}x{} within [{lo}, {hi}]", g.width, g.height)),
            }
        });
    r.push(format!("{name} round trip"), result);
}
