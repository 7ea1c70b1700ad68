use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use worldgen::par;
use worldgen::pipeline::{self, PipelineConfig, PipelineError};

/// GIS inputs to engine-ready tiles, meshes and data textures.
#[derive(Parser)]
#[command(name = "worldgen", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Pipeline config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed; overrides the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured stage and write the manifest.
    Run,
    /// Time tube meshing against segment instances on the streamline input.
    Bench {
        /// Streamline counts, comma separated (default: from the config).
        #[arg(long, value_delimiter = ',')]
        counts: Option<Vec<usize>>,
    },
    /// Re-check an output directory against its manifest.
    Validate,
    /// Write the synthetic sample dataset and its config.
    Sample,
}

fn config(g: &Global) -> Result<PipelineConfig, PipelineError> {
    let path = g
        .config
        .as_deref()
        .ok_or_else(|| PipelineError::Config("--config is required".into()))?;
    let mut cfg = PipelineConfig::load(path)?;
    if let Some(out) = &g.out {
        cfg.output_dir = std::path::absolute(out).unwrap_or_else(|_| out.clone());
    }
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(g: &Global) -> Result<PathBuf, PipelineError> {
    match (&g.out, &g.config) {
        (Some(o), _) => Ok(o.clone()),
        (None, Some(_)) => Ok(config(g)?.resolved_output_dir()),
        (None, None) => Err(PipelineError::Config("--out or --config is required".into())),
    }
}

fn execute(cli: &Cli) -> Result<(), PipelineError> {
    let g = &cli.global;
    match &cli.command {
        Command::Run => {
            let cfg = config(g)?;
            match pipeline::run_pipeline(&cfg) {
                Ok(m) => {
                    for w in &m.warnings {
                        log::warn!("{w}");
                    }
                    println!("{}", m.timing_table());
                    println!(
                        "wrote {} files ({} tile sets, {} meshes, {} textures), {} warnings, manifest in {}",
                        m.files.len(),
                        m.tile_sets.len(),
                        m.meshes.len(),
                        m.textures.len(),
                        m.warnings.len(),
                        cfg.resolved_output_dir().join(pipeline::MANIFEST_NAME).display()
                    );
                    Ok(())
                }
                Err(f) => {
                    eprintln!("partial manifest lists {} files from completed stages", f.manifest.files.len());
                    Err(f.error)
                }
            }
        }
        Command::Bench { counts } => {
            let cfg = config(g)?;
            let dir = cfg.resolved_output_dir();
            let report = pipeline::cmd_bench(&cfg, counts.as_deref(), &dir)?;
            println!("{}", report.to_table());
            println!("report written to {}", dir.join(pipeline::bench::REPORT_JSON).display());
            Ok(())
        }
        Command::Validate => {
            let dir = out_dir(g)?;
            let report = pipeline::cmd_validate(&dir)?;
            print!("{}", report.to_text());
            if report.ok() {
                Ok(())
            } else {
                let names: Vec<&str> = report.failures().map(|c| c.name.as_str()).collect();
                Err(PipelineError::Validation(names.join(", ")))
            }
        }
        Command::Sample => {
            let dir = g.out.clone().unwrap_or_else(|| PathBuf::from("sample"));
            let path = pipeline::write_sample_dataset(&dir, g.seed.unwrap_or(7))?;
            println!("sample dataset written; run with: worldgen run --config {}", path.display());
            Ok(())
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.global.verbose);
    if let Some(n) = cli.global.threads {
        if let Err(e) = par::set_threads(n)
            .map_err(anyhow::Error::msg)
            .context("configuring the thread pool") {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    }
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

