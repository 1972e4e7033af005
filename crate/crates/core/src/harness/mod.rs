//! Benchmark configuration, records, sweep driver and reports.
//!
//! Configuration schema (TOML):
//!
//! ```toml
//! seed = 1
//! formulations = ["pmchwt", "muller", "mpf:sl-dtn-ad"]
//! preconditioners = ["mass", "osrc"]
//!
//! [solver]
//! tol = 1e-5
//! maxit = 1000
//!
//! [grid]
//! center = [0.0, 0.0, 0.0]
//! side = 0.03
//! n = 51
//!
//! [output]
//! dir = "out"
//! fields = false
//!
//! [[scenes]]
//! name = "water-fat"
//! exterior = "water"
//! frequencies = [5e5]
//! n_h = 4.0
//! direction = [0.0, 0.0, 1.0]
//! objects = [{ material = "fat", radius = 5e-3, center = [0.0, 0.0, 0.0] }]
//! ```

mod acceptance;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assembly::AssemblyOptions;
use crate::field::{evaluate_field, grid_psnr, FieldGrid, GridSpec};
use crate::formulation::{build, recover_traces, Context, OperatorCache, OperatorKey};
use crate::linalg::{gmres, GmresOptions};
use crate::mesh::{refine_for_frequency, MeshSpec};
use crate::model::{Material, Scene, SceneObject};
use crate::oracle::{evaluate_exact, solve_sphere, SphereProblem};
use crate::precond::{attach_preconditioner, PreconditionerKind, PreconditionerSpec};
use crate::{CombinedCoefficients, Error, FormulationSpec, Result, SolutionTraces, C64};

pub use acceptance::{run_acceptance, AcceptanceOptions, CriterionResult};

/// Version of the record CSV column set.
pub const RECORD_SCHEMA_VERSION: u32 = 1;

/// PSNR below which a cell is excluded from analysis.
pub const EXCLUSION_DB: f64 = 20.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectConfig {
    pub material: String,
    pub radius: f64,
    #[serde(default)]
    pub center: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub name: String,
    #[serde(default = "default_exterior")]
    pub exterior: String,
    pub objects: Vec<ObjectConfig>,
    pub frequencies: Vec<f64>,
    #[serde(default = "default_n_h")]
    pub n_h: f64,
    #[serde(default = "default_direction")]
    pub direction: [f64; 3],
}

fn default_exterior() -> String {
    "water".into()
}
fn default_n_h() -> f64 {
    4.0
}
fn default_direction() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    pub maxit: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let g = GmresOptions::default();
        SolverConfig { tol: g.tol, maxit: g.maxit }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub records_csv: String,
    pub summary_json: String,
    /// Write one field CSV per cell with an oracle.
    pub fields: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: "bench-out".into(), records_csv: "records.csv".into(), summary_json: "summary.json".into(), fields: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub scenes: Vec<SceneConfig>,
    pub formulations: Vec<String>,
    #[serde(default = "default_preconditioners")]
    pub preconditioners: Vec<String>,
    /// Coefficients for the combined families; defaults when absent.
    #[serde(default)]
    pub combined: Option<CombinedCoefficients>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
}

fn default_preconditioners() -> Vec<String> {
    vec!["mass".into()]
}

impl BenchmarkConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: BenchmarkConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenes.is_empty() {
            return Err(Error::Config("no scenes".into()));
        }
        for s in &self.scenes {
            if s.objects.is_empty() || s.frequencies.is_empty() {
                return Err(Error::Config(format!("scene '{}' needs objects and frequencies", s.name)));
            }
            for m in std::iter::once(&s.exterior).chain(s.objects.iter().map(|o| &o.material)) {
                if Material::builtin(m).is_none() {
                    return Err(Error::Config(format!("unknown material '{m}'")));
                }
            }
        }
        self.formulation_specs()?;
        self.preconditioner_specs()?;
        if !(self.solver.tol > 0.0) || self.solver.maxit == 0 {
            return Err(Error::Config("solver needs tol > 0 and maxit > 0".into()));
        }
        Ok(())
    }

    pub fn formulation_specs(&self) -> Result<Vec<FormulationSpec>> {
        self.formulations
            .iter()
            .map(|id| {
                let s: FormulationSpec = id.parse()?;
                match self.combined {
                    Some(c) if s.family.is_combined() => s.with_coupling(c),
                    _ => Ok(s),
                }
            })
            .collect()
    }

    pub fn preconditioner_specs(&self) -> Result<Vec<PreconditionerSpec>> {
        self.preconditioners.iter().map(|id| Ok(PreconditionerSpec::new(id.parse()?))).collect()
    }
}

/// Builds the scene of `cfg` at frequency `f`, meshing every sphere for the
/// smaller of its interior and exterior wavelengths.
pub fn build_scene(cfg: &SceneConfig, f: f64) -> Result<Scene> {
    let material = |name: &str| Material::builtin(name).ok_or_else(|| Error::Config(format!("unknown material '{name}'")));
    let exterior = material(&cfg.exterior)?;
    let objects = cfg
        .objects
        .iter()
        .map(|o| {
            let m = material(&o.material)?;
            let lambda_min = exterior.wavelength(f).min(m.wavelength(f));
            let mesh = refine_for_frequency(&MeshSpec { radius: o.radius, center: o.center, n_h: cfg.n_h, lambda_min })?;
            Ok(SceneObject { mesh: Arc::new(mesh), material: m })
        })
        .collect::<Result<Vec<_>>>()?;
    let d = crate::mesh::geom::normalize(cfg.direction);
    Scene::new(exterior, objects, f, d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Skipped,
    Error,
}

/// One cell of the sweep. Column order is the CSV schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub scene: String,
    pub formulation: String,
    pub variant: String,
    pub preconditioner: String,
    pub frequency_hz: f64,
    pub materials: String,
    pub nodes: usize,
    pub d_over_lambda: f64,
    pub sp: usize,
    pub bio: usize,
    pub mv: usize,
    pub assembly_seconds: f64,
    pub iterations: usize,
    pub converged: bool,
    pub solve_seconds: f64,
    pub seconds_per_iteration: f64,
    pub psnr_db: Option<f64>,
    pub excluded: bool,
    pub status: CellStatus,
    pub reason: String,
}

impl BenchmarkRecord {
    fn blank(scene: &SceneConfig, s: &Scene, spec: &FormulationSpec, p: &PreconditionerSpec) -> Self {
        let variant = spec.id().split_once(':').map(|(_, v)| v.to_string()).unwrap_or_default();
        let materials = std::iter::once(scene.exterior.clone())
            .chain(scene.objects.iter().map(|o| o.material.clone()))
            .collect::<Vec<_>>()
            .join("-");
        BenchmarkRecord {
            scene: scene.name.clone(),
            formulation: spec.family.id().into(),
            variant,
            preconditioner: p.kind.id().into(),
            frequency_hz: s.frequency,
            materials,
            nodes: s.objects.iter().map(|o| o.mesh.vertex_count()).sum(),
            d_over_lambda: s.size_over_wavelength(),
            sp: 0,
            bio: 0,
            mv: 0,
            assembly_seconds: 0.0,
            iterations: 0,
            converged: false,
            solve_seconds: 0.0,
            seconds_per_iteration: 0.0,
            psnr_db: None,
            excluded: false,
            status: CellStatus::Ok,
            reason: String::new(),
        }
    }

    /// Formulation id with its variant, e.g. `mpf:sl-dtn-ad`.
    pub fn formulation_id(&self) -> String {
        if self.variant.is_empty() {
            self.formulation.clone()
        } else {
            format!("{}:{}", self.formulation, self.variant)
        }
    }
}

/// Sum of the assembly times of the operators in `keys`.
pub fn assembly_seconds(ctx: &Context, keys: &BTreeSet<OperatorKey>) -> f64 {
    keys.iter()
        .filter_map(|k| ctx.operator(k.domain, k.kind, k.test, k.trial).ok())
        .map(|op| op.assembly_seconds)
        .sum()
}

/// Oracle data for single-sphere scenes: grid and exact field on it.
struct Reference {
    grid: FieldGrid,
    exact: Vec<C64>,
}

fn reference(scene: &Scene, grid: &GridSpec) -> Result<Option<Reference>> {
    let Some(p) = SphereProblem::from_scene(scene) else {
        return Ok(None);
    };
    let sol = solve_sphere(&p)?;
    let mut g = FieldGrid::square(grid)?;
    g.tag(scene, None);
    let exact = evaluate_exact(&p, &sol, &g.points)?;
    Ok(Some(Reference { grid: g, exact }))
}

/// Solves one cell and fills the record; errors go to the caller.
#[allow(clippy::too_many_arguments)]
fn run_cell(
    ctx: &Context,
    spec: &FormulationSpec,
    pre: &PreconditionerSpec,
    solver: &SolverConfig,
    reference: Option<&Reference>,
    rec: &mut BenchmarkRecord,
    field_path: Option<PathBuf>,
) -> Result<SolutionTraces> {
    let system = build(spec, ctx)?;
    let (sp, bio, mv) = system.counts();
    rec.sp = sp;
    rec.bio = bio;
    rec.mv = mv;
    rec.assembly_seconds = assembly_seconds(ctx, &system.operators);
    let p = attach_preconditioner(&system, ctx, pre)?;
    let report = gmres(p.operator.as_ref(), &p.rhs, &GmresOptions { tol: solver.tol, maxit: solver.maxit })?;
    rec.iterations = report.iterations;
    rec.converged = report.converged;
    rec.solve_seconds = report.time_total;
    rec.seconds_per_iteration = report.time_per_iteration;
    let traces = recover_traces(ctx, &system, &report.solution)?;
    if let Some(r) = reference {
        let field = evaluate_field(&traces, ctx.scene, &r.grid)?;
        let db = grid_psnr(&field, &r.exact)?;
        rec.psnr_db = Some(db);
        rec.excluded = db < EXCLUSION_DB;
        if let Some(path) = field_path {
            field.write_csv(fs::File::create(path)?)?;
        }
    }
    Ok(traces)
}

/// Runs every (scene, frequency, formulation, preconditioner) cell.
/// Infeasible cells are skipped with a reason and failing cells are
/// recorded; neither stops the sweep.
pub fn run_benchmark(config: &BenchmarkConfig, assembly: &AssemblyOptions) -> Result<Vec<BenchmarkRecord>> {
    config.validate()?;
    let specs = config.formulation_specs()?;
    let pres = config.preconditioner_specs()?;
    let mut out = Vec::new();
    if config.output.fields {
        fs::create_dir_all(&config.output.dir)?;
    }
    for sc in &config.scenes {
        for &f in &sc.frequencies {
            let scene = build_scene(sc, f)?;
            let cache = OperatorCache::new(assembly.clone());
            let ctx = Context::new(&scene, &cache)?;
            let reference = reference(&scene, &config.grid)?;
            for spec in &specs {
                for pre in &pres {
                    let mut rec = BenchmarkRecord::blank(sc, &scene, spec, pre);
                    if let Err(e) = pre.check(spec.family) {
                        rec.status = CellStatus::Skipped;
                        rec.reason = format!("{}: {e}", e.category());
                        out.push(rec);
                        continue;
                    }
                    let field_path = (config.output.fields && reference.is_some()).then(|| {
                        let id = spec.id().replace(':', "_");
                        config.output.dir.join(format!("field_{}_{}_{}_{}.csv", sc.name, f, id, pre.kind.id().replace(':', "_")))
                    });
                    let t = Instant::now();
                    if let Err(e) = run_cell(&ctx, spec, pre, &config.solver, reference.as_ref(), &mut rec, field_path) {
                        rec.status = CellStatus::Error;
                        rec.reason = format!("{}: {e}", e.category());
                    }
                    log::info!(
                        "{} {} {} {:.0} Hz: {} iterations, {:.2} s",
                        sc.name,
                        spec.id(),
                        pre.kind.id(),
                        f,
                        rec.iterations,
                        t.elapsed().as_secs_f64()
                    );
                    out.push(rec);
                }
            }
        }
    }
    Ok(out)
}

pub fn write_records_csv<W: std::io::Write>(records: &[BenchmarkRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary<'a> {
    pub schema_version: u32,
    pub cells: usize,
    pub ok: usize,
    pub skipped: usize,
    pub errors: usize,
    pub excluded: usize,
    pub config: &'a BenchmarkConfig,
    pub records: &'a [BenchmarkRecord],
}

pub fn summary<'a>(config: &'a BenchmarkConfig, records: &'a [BenchmarkRecord]) -> Summary<'a> {
    let count = |s: CellStatus| records.iter().filter(|r| r.status == s).count();
    Summary {
        schema_version: RECORD_SCHEMA_VERSION,
        cells: records.len(),
        ok: count(CellStatus::Ok),
        skipped: count(CellStatus::Skipped),
        errors: count(CellStatus::Error),
        excluded: records.iter().filter(|r| r.excluded).count(),
        config,
        records,
    }
}

/// Writes the records CSV and summary JSON into the configured directory.
pub fn write_reports(config: &BenchmarkConfig, records: &[BenchmarkRecord]) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(&config.output.dir)?;
    let csv_path = config.output.dir.join(&config.output.records_csv);
    let json_path = config.output.dir.join(&config.output.summary_json);
    write_records_csv(records, fs::File::create(&csv_path)?)?;
    let json = serde_json::to_string_pretty(&summary(config, records))?;
    fs::write(&json_path, json)?;
    Ok((csv_path, json_path))
}

/// One feasible (formulation, preconditioner) pair with its table counts.
#[derive(Debug, Clone, Serialize)]
pub struct CatalogueEntry {
    pub formulation: String,
    pub preconditioner: String,
    pub sp: usize,
    pub bio: usize,
    pub mv: usize,
}

/// Every feasible cell for `l` objects.
pub fn catalogue(l: usize) -> Vec<CatalogueEntry> {
    let mut out = Vec::new();
    for spec in FormulationSpec::catalogue() {
        let (sp, bio, mv) = spec.family.table1(l);
        for kind in PreconditionerKind::ALL.into_iter().filter(|k| k.feasible(spec.family)) {
            out.push(CatalogueEntry { formulation: spec.id(), preconditioner: kind.id().into(), sp, bio, mv });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
        formulations = ["pmchwt", "muller"]
        preconditioners = ["mass", "osrc"]
        [grid]
        n = 11
        [[scenes]]
        name = "tiny"
        frequencies = [1e5]
        objects = [{ material = "fat", radius = 5e-3 }]
    "#;

    #[test]
    fn parses_and_validates() {
        let c = BenchmarkConfig::from_toml(SMALL).unwrap();
        assert_eq!(c.solver, SolverConfig { tol: 1e-5, maxit: 1000 });
        assert_eq!(c.scenes[0].exterior, "water");
        assert!(BenchmarkConfig::from_toml(&SMALL.replace("muller", "mueller")).is_err());
        assert!(BenchmarkConfig::from_toml(&SMALL.replace("\"fat\"", "\"lead\"")).is_err());
        assert!(BenchmarkConfig::from_toml(&SMALL.replace("[grid]", "[grid]\nbogus = 1")).is_err());
    }

    #[test]
    fn sweep_shares_operators_and_skips_infeasible_cells() {
        let c = BenchmarkConfig::from_toml(SMALL).unwrap();
        let recs = run_benchmark(&c, &AssemblyOptions::default()).unwrap();
        assert_eq!(recs.len(), 4);
        let get = |f: &str, p: &str| recs.iter().find(|r| r.formulation == f && r.preconditioner == p).unwrap();
        let (pm, mu) = (get("pmchwt", "mass"), get("muller", "mass"));
        assert_eq!((pm.bio, mu.bio), (8, 8));
        assert!(pm.converged && mu.converged);
        assert!(pm.psnr_db.unwrap() > 20.0 && !pm.excluded);
        let skipped = get("muller", "osrc");
        assert_eq!(skipped.status, CellStatus::Skipped);
        assert!(skipped.reason.contains("muller"));
        let mut buf = Vec::new();
        write_records_csv(&recs, &mut buf).unwrap();
        let header = String::from_utf8(buf).unwrap().lines().next().unwrap().to_string();
        assert!(header.starts_with("scene,formulation,variant,preconditioner,frequency_hz"));
        // same seed and config: identical iteration counts and PSNR
        let again = run_benchmark(&c, &AssemblyOptions::default()).unwrap();
        for (a, b) in recs.iter().zip(&again) {
            assert_eq!((a.iterations, a.psnr_db), (b.iterations, b.psnr_db));
        }
    }

    #[test]
    fn catalogue_lists_feasible_cells() {
        let c = catalogue(1);
        assert!(c.iter().all(|e| !(e.formulation == "muller" && e.preconditioner != "mass")));
        assert_eq!(c.iter().filter(|e| e.formulation == "pmchwt").count(), 5);
    }
}
