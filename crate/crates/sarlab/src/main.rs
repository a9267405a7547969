use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context as _};
use clap::{Parser, Subcommand};
use sarlab::service::{serve, ServiceConfig};
use sarlab_core::config::{from_json, PipelineConfig};
use sarlab_core::dataset::{generate_dataset, DatasetSpec, GenerateOptions};
use sarlab_core::engine::{self, Context};
use sarlab_core::recon::{Algorithm, Interp, RmaOptions};
use sarlab_core::sarb::{read_sarb, write_sarb, SarbReader};
use sarlab_core::scene::{GridSpec, StlUnits};

#[derive(Parser)]
#[command(name = "sarlab", version, about = "Near-field SAR simulation, reconstruction and datasets")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

fn parse_units(s: &str) -> Result<StlUnits, String> {
    match s {
        "mm" => Ok(StlUnits::Mm),
        "m" => Ok(StlUnits::M),
        _ => Err(format!("expected `m` or `mm`, got `{s}`")),
    }
}

fn parse_interp(s: &str) -> Result<Interp, String> {
    match s {
        "linear" => Ok(Interp::Linear),
        "cubic" => Ok(Interp::Cubic),
        _ => Err(format!("expected `linear` or `cubic`, got `{s}`")),
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate the echo of a pipeline config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Units of STL coordinates [default: mm].
        #[arg(long, value_parser = parse_units)]
        stl_units: Option<StlUnits>,
    },
    /// Reconstruct an image from an echo container.
    Reconstruct {
        #[arg(long, value_parser = |s: &str| s.parse::<Algorithm>().map_err(|e| e.to_string()))]
        algo: Algorithm,
        #[arg(long)]
        echo: PathBuf,
        /// Grid JSON: {"axes": [{"min", "max", "count"}, ...]}.
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also store every intermediate k-space stage.
        #[arg(long)]
        keep_kspace: bool,
        #[arg(long, default_value_t = 2)]
        pad_factor: usize,
        #[arg(long, value_parser = parse_interp, default_value = "linear")]
        interp: Interp,
    },
    /// Generate an LR/HR dataset.
    Dataset {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Overrides the spec's base seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, value_parser = parse_units)]
        stl_units: Option<StlUnits>,
    },
    /// Measure the point-spread function of a single-point config.
    Psf {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long, value_parser = parse_units)]
        stl_units: Option<StlUnits>,
    },
    /// List the arrays of a container.
    Info { file: PathBuf },
    /// Run the HTTP job service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Overrides SARLAB_DATA_DIR.
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// Overrides SARLAB_WORKERS.
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn base_of(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn load_pipeline(config: &Path, stl_units: Option<StlUnits>) -> anyhow::Result<engine::Prepared> {
    let cfg = PipelineConfig::from_file(config)?;
    let ctx = Context {
        base_dir: base_of(config),
        stl_units,
    };
    Ok(engine::prepare(&cfg, &ctx)?)
}

fn run(cmd: Cmd) -> anyhow::Result<()> {
    match cmd {
        Cmd::Simulate { config, out, stl_units } => {
            let p = load_pipeline(&config, stl_units)?;
            for w in p.aperture.spacing_warnings(p.config.waveform.lambda_c()?) {
                log::warn!("{w}");
            }
            let echo = engine::simulate(&p, None)?;
            write_sarb(&out, &engine::echo_arrays(&echo))?;
        }
        Cmd::Reconstruct {
            algo,
            echo,
            grid,
            out,
            keep_kspace,
            pad_factor,
            interp,
        } => {
            let text = std::fs::read_to_string(&grid).with_context(|| format!("reading {}", grid.display()))?;
            let grid: GridSpec = from_json(&text)?;
            grid.validate()?;
            let echo = engine::echo_from_arrays(&read_sarb(&echo)?)?;
            let opts = RmaOptions {
                pad_factor,
                interp,
                keep_stages: keep_kspace,
                ..Default::default()
            };
            write_sarb(&out, &engine::reconstruct_echo(&echo, algo, &grid, &opts)?)?;
        }
        Cmd::Dataset {
            spec,
            out_dir,
            seed,
            workers,
            stl_units,
        } => {
            let mut s = DatasetSpec::from_file(&spec)?;
            if let Some(seed) = seed {
                s.base_seed = seed;
            }
            let opts = GenerateOptions {
                workers,
                base_dir: base_of(&spec),
                stl_units,
                progress: None,
            };
            let m = generate_dataset(&s, &out_dir, &opts)?;
            println!(
                "{} samples written to {} ({} failed)",
                m.samples.len(),
                out_dir.display(),
                m.failed.len()
            );
            if !m.failed.is_empty() {
                for f in &m.failed {
                    eprintln!("sample {}: {}", f.index, f.error);
                }
                bail!("{} sample(s) failed", m.failed.len());
            }
        }
        Cmd::Psf { config, report, stl_units } => {
            let p = load_pipeline(&config, stl_units)?;
            let r = engine::psf_report(&p)?;
            std::fs::write(&report, serde_json::to_string_pretty(&r)?)
                .with_context(|| format!("writing {}", report.display()))?;
        }
        Cmd::Info { file } => {
            let reader = SarbReader::open(&file)?;
            for e in reader.entries() {
                let dtype = serde_json::to_value(e.dtype)?;
                println!("{}\t{}\t{:?}", e.name, dtype.as_str().unwrap_or("?"), e.shape);
            }
        }
        Cmd::Serve { addr, data_dir, workers } => {
            let mut cfg = ServiceConfig::from_env();
            if let Some(d) = data_dir {
                cfg.data_dir = d;
            }
            if let Some(w) = workers {
                cfg.workers = w.max(1);
            }
            tokio::runtime::Runtime::new()?.block_on(serve(cfg, addr))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
