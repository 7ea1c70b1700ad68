use std::path::Path;

use super::config::PipelineConfig;
use super::run::read_streamlines;
use super::PipelineError;
use crate::tubes::{self, BenchReport, TubeError};

pub const REPORT_JSON: &str = "bench_report.json";
pub const REPORT_TABLE: &str = "bench_report.md";

/// Benchmarks tube meshing against segment instances on the configured
/// streamlines and writes the report (JSON and a table) into `out_dir`.
/// Without explicit `counts` the config's `tubes.bench_counts` are used.
pub fn cmd_bench(cfg: &PipelineConfig, counts: Option<&[usize]>, out_dir: &Path) -> Result<BenchReport, PipelineError> {
    let path = cfg
        .inputs
        .streamlines
        .as_ref()
        .ok_or_else(|| PipelineError::Config("bench needs a streamlines input".into()))?;
    let lines = read_streamlines(cfg, path)?;
    let counts = counts.unwrap_or(&cfg.tubes.bench_counts);
    let report = tubes::benchmark_generation(&lines, counts, cfg.tubes.cap_vertices, cfg.tubes.radius, cfg.tubes.bench_runs)
        .map_err(|e| match e {
            TubeError::CountTooLarge { .. } | TubeError::NoRuns | TubeError::TooFewCapVertices(_) | TubeError::BadRadius(_) => {
                PipelineError::Config(e.to_string())
            }
            e => PipelineError::stage("bench", e),
        })?;
    std::fs::create_dir_all(out_dir).map_err(|e| PipelineError::io(out_dir, e))?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    let p = out_dir.join(REPORT_JSON);
    std::fs::write(&p, json).map_err(|e| PipelineError::io(&p, e))?;
    let p = out_dir.join(REPORT_TABLE);
    std::fs::write(&p, report.to_table()).map_err(|e| PipelineError::io(&p, e))?;
    Ok(report)
}
