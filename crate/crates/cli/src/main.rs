use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use bemtrans::harness::{self, AcceptanceOptions, BenchmarkConfig, CellStatus};
use bemtrans::mesh::{export_msh, icosphere, refine_for_frequency, MeshSpec};
use bemtrans::{AssemblyOptions, Material};

/// Thread-count override for the assembly and field kernels.
const THREADS_VAR: &str = "BEMTRANS_THREADS";

#[derive(Parser)]
#[command(name = "bemtrans", version, about = "Boundary element benchmarks for acoustic transmission")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the benchmark sweep described by a TOML config.
    Run {
        config: PathBuf,
        /// Overrides `output.dir` from the config.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run the acceptance checks and print a pass/fail table.
    Verify {
        /// Comma-separated criterion numbers; all when omitted.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
        /// Also write the table as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// List feasible formulation and preconditioner cells with their operator counts.
    List {
        /// Number of objects.
        #[arg(long, default_value_t = 1)]
        objects: usize,
        #[arg(long)]
        json: bool,
    },
    /// Write a sphere mesh in MSH 2.2 format.
    ExportMesh(ExportMesh),
}

#[derive(Args)]
struct ExportMesh {
    /// Output file.
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = 5e-3)]
    radius: f64,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.0, 0.0])]
    center: Vec<f64>,
    /// Icosphere subdivision level.
    #[arg(long, conflicts_with = "frequency")]
    subdivisions: Option<u32>,
    /// Mesh for this frequency in Hz instead.
    #[arg(long)]
    frequency: Option<f64>,
    #[arg(long, default_value = "fat")]
    material: String,
    #[arg(long, default_value = "water")]
    exterior: String,
    /// Elements per wavelength.
    #[arg(long, default_value_t = 4.0)]
    n_h: f64,
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = v.trim().parse().with_context(|| format!("{THREADS_VAR}={v} is not a thread count"))?;
    if n == 0 {
        bail!("{THREADS_VAR} must be positive");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    log::debug!("using {n} threads");
    Ok(())
}

fn material(name: &str) -> Result<Material> {
    Material::builtin(name).with_context(|| format!("unknown material '{name}', known: {:?}", Material::builtin_names()))
}

fn run(config: PathBuf, out_dir: Option<PathBuf>) -> Result<bool> {
    let mut cfg = BenchmarkConfig::load(&config).with_context(|| format!("reading {}", config.display()))?;
    if let Some(d) = out_dir {
        cfg.output.dir = d;
    }
    let records = harness::run_benchmark(&cfg, &AssemblyOptions::default())?;
    let (csv, json) = harness::write_reports(&cfg, &records)?;
    let s = harness::summary(&cfg, &records);
    println!(
        "{} cells: {} ok, {} skipped, {} errors, {} excluded",
        s.cells, s.ok, s.skipped, s.errors, s.excluded
    );
    for r in records.iter().filter(|r| r.status == CellStatus::Error) {
        eprintln!("error in {} {} {}: {}", r.scene, r.formulation_id(), r.preconditioner, r.reason);
    }
    println!("wrote {} and {}", csv.display(), json.display());
    Ok(true)
}

fn verify(only: Vec<u32>, json: Option<PathBuf>) -> Result<bool> {
    if let Some(bad) = only.iter().find(|&&i| !(1..=10).contains(&i)) {
        bail!("criterion {bad} does not exist (1-10)");
    }
    let results = harness::run_acceptance(&AcceptanceOptions { only, ..Default::default() });
    for r in &results {
        println!("{r}");
    }
    let passed = results.iter().filter(|r| r.passed).count();
    println!("{passed}/{} criteria passed", results.len());
    if let Some(path) = json {
        serde_json::to_writer_pretty(File::create(&path)?, &results)?;
    }
    Ok(passed == results.len())
}

fn list(objects: usize, json: bool) -> Result<bool> {
    if objects == 0 {
        bail!("need at least one object");
    }
    let cells = harness::catalogue(objects);
    let mut out = std::io::stdout().lock();
    if json {
        serde_json::to_writer_pretty(&mut out, &cells)?;
        writeln!(out)?;
    } else {
        writeln!(out, "{:<20} {:<14} {:>4} {:>4} {:>4}", "formulation", "preconditioner", "#sp", "#BIO", "#mv")?;
        for c in &cells {
            writeln!(out, "{:<20} {:<14} {:>4} {:>4} {:>4}", c.formulation, c.preconditioner, c.sp, c.bio, c.mv)?;
        }
    }
    Ok(true)
}

fn export_mesh(a: ExportMesh) -> Result<bool> {
    let [x, y, z] = a.center[..] else {
        bail!("--center takes three comma-separated values");
    };
    let center = [x, y, z];
    let mesh = match (a.subdivisions, a.frequency) {
        (Some(s), _) => icosphere(a.radius, center, s)?,
        (None, Some(f)) => {
            let lambda_min = material(&a.exterior)?.wavelength(f).min(material(&a.material)?.wavelength(f));
            refine_for_frequency(&MeshSpec { radius: a.radius, center, n_h: a.n_h, lambda_min })?
        }
        (None, None) => bail!("give --subdivisions or --frequency"),
    };
    let mut w = BufWriter::new(File::create(&a.output).with_context(|| format!("creating {}", a.output.display()))?);
    export_msh(&mesh, &mut w)?;
    w.flush()?;
    println!("{} nodes, {} triangles -> {}", mesh.vertex_count(), mesh.triangle_count(), a.output.display());
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| match cli.command {
        Command::Run { config, out_dir } => run(config, out_dir),
        Command::Verify { only, json } => verify(only, json),
        Command::List { objects, json } => list(objects, json),
        Command::ExportMesh(a) => export_mesh(a),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
