use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use geosurv::geo::{self, DesignMatrix, GeoMap};
use geosurv::pipeline::{
    emit_outputs, generate_synthetic, run_experiment, write_atomic, ExperimentConfig, PipelineError,
    SyntheticSpec, Variant,
};
use geosurv::spectral::{self, SpectralEmbedding};

#[derive(Parser)]
#[command(name = "geosurv", version, about = "Survival curve prediction with spectral geographic features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cross-validate the configured variants and write curve/ABC CSVs.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Generate a synthetic cohort: patients.csv, map.json and design.csv.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a spectral embedding as `key,c1,...,ck`.
    Embed {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        design: Option<PathBuf>,
        #[arg(long, default_value = "rr_sa")]
        variant: String,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Spectral clustering of map entities, written as `key,label`.
    Clusters {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        design: Option<PathBuf>,
        #[arg(long, default_value = "rr_sa")]
        variant: String,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn read(path: &Path) -> Result<String, PipelineError> {
    std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_map(path: &Path) -> Result<GeoMap, PipelineError> {
    let map = geo::parse_map(&read(path)?)?;
    if map.is_empty() {
        return Err(geo::GeoError::EmptyMap.into());
    }
    Ok(map)
}

fn embedding(
    map: &GeoMap,
    design: Option<&Path>,
    variant: &str,
    k: usize,
) -> Result<SpectralEmbedding, PipelineError> {
    let variant: Variant = variant.parse()?;
    match (variant, variant.ssa_rep()) {
        (Variant::RrSa, _) => Ok(spectral::rr_sa_embedding(map, k)?),
        (_, Some(rep)) => {
            let path = design.ok_or_else(|| {
                PipelineError::Config(format!("variant {variant} needs --design"))
            })?;
            let design: DesignMatrix = geo::load_design_matrix(&read(path)?, map)?;
            Ok(spectral::rr_ssa_embedding(map, &design, rep, k)?)
        }
        _ => Err(PipelineError::Config(format!("variant {variant} has no embedding"))),
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Run { config } => {
            let config = ExperimentConfig::load(&config)?;
            let report = run_experiment(&config)?;
            emit_outputs(&report, &report.clusters(), &config.output_dir)?;
            println!("variant,k,abc");
            for v in &report.variants {
                let k = v.k.map(|k| k.to_string()).unwrap_or_default();
                println!("{},{k},{}", v.variant, v.abc);
            }
        }
        Command::Synth { spec, out } => {
            let spec: SyntheticSpec = serde_json::from_str(&read(&spec)?)
                .map_err(|e| PipelineError::Config(format!("{}: {e}", spec.display())))?;
            let data = generate_synthetic(&spec)?;
            write_atomic(&out.join("patients.csv"), &data.dataset.to_csv())?;
            write_atomic(&out.join("map.json"), &data.map.to_json())?;
            write_atomic(&out.join("design.csv"), &data.design.to_csv(&data.map))?;
        }
        Command::Embed {
            map,
            design,
            variant,
            k,
            out,
        } => {
            let map = load_map(&map)?;
            let e = embedding(&map, design.as_deref(), &variant, k)?;
            write_atomic(&out, &e.to_csv(&map))?;
        }
        Command::Clusters {
            map,
            design,
            variant,
            k,
            seed,
            out,
        } => {
            let map = load_map(&map)?;
            let e = embedding(&map, design.as_deref(), &variant, k)?;
            let labels = spectral::kmeans(&e, k, seed)?;
            write_atomic(&out, &labels.to_csv(&map))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
