//! Pressure reconstruction from solved densities and the PSNR metric.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::kernel::{green, green_dn_y};
use crate::assembly::quadrature::{shape_ref, FAR3, RULE6};
use crate::formulation::SolutionTraces;
use crate::mesh::geom::{self, Point};
use crate::model::Scene;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Exterior,
    /// Inside object `m` (zero-based).
    Interior(usize),
    /// Too close to an interface; excluded from metrics.
    Buffer,
}

impl Region {
    pub fn label(self) -> String {
        match self {
            Region::Exterior => "exterior".into(),
            Region::Interior(m) => format!("interior:{m}"),
            Region::Buffer => "buffer".into(),
        }
    }
}

/// Square sampling grid with region tags and field values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldGrid {
    pub points: Vec<Point>,
    pub regions: Vec<Region>,
    pub values: Vec<C64>,
}

/// Grid spec: `n x n` points on a square of side `side` centred at `center`,
/// spanned by the x and z axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub center: Point,
    pub side: f64,
    pub n: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { center: [0.0; 3], side: 0.03, n: 51 }
    }
}

impl FieldGrid {
    pub fn square(spec: &GridSpec) -> Result<Self> {
        if spec.n < 2 || !(spec.side > 0.0) {
            return Err(Error::InvalidInput("grid needs n >= 2 and a positive side".into()));
        }
        let step = spec.side / (spec.n - 1) as f64;
        let mut points = Vec::with_capacity(spec.n * spec.n);
        for i in 0..spec.n {
            for j in 0..spec.n {
                let a = -0.5 * spec.side + i as f64 * step;
                let b = -0.5 * spec.side + j as f64 * step;
                points.push([spec.center[0] + a, spec.center[1], spec.center[2] + b]);
            }
        }
        Ok(Self::from_points(points))
    }

    pub fn from_points(points: Vec<Point>) -> Self {
        let n = points.len();
        FieldGrid { points, regions: vec![Region::Exterior; n], values: vec![C64::new(0.0, 0.0); n] }
    }

    /// Tags every point; `buffer` defaults to half the largest mesh width.
    pub fn tag(&mut self, scene: &Scene, buffer: Option<f64>) {
        let h = scene.objects.iter().map(|o| o.mesh.max_edge_length()).fold(0.0, f64::max);
        let buffer = buffer.unwrap_or(0.5 * h);
        self.regions = self
            .points
            .par_iter()
            .map(|&p| {
                for (m, o) in scene.objects.iter().enumerate() {
                    let mesh = &o.mesh;
                    let near = mesh.triangles.iter().any(|t| {
                        let [a, b, c] = mesh.corners(t);
                        geom::point_triangle_distance(p, a, b, c) < buffer
                    });
                    if near {
                        return Region::Buffer;
                    }
                    if mesh.contains_point(p) {
                        return Region::Interior(m);
                    }
                }
                Region::Exterior
            })
            .collect();
    }

    pub fn count(&self, region: Region) -> usize {
        self.regions.iter().filter(|&&r| r == region).count()
    }

    /// Writes `x,y,z,region,re,im` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "z", "region", "re", "im"]).map_err(csv_error)?;
        for ((p, r), v) in self.points.iter().zip(&self.regions).zip(&self.values) {
            w.write_record([
                p[0].to_string(),
                p[1].to_string(),
                p[2].to_string(),
                r.label(),
                v.re.to_string(),
                v.im.to_string(),
            ])
            .map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// `sum V a - K b` at `x` over one mesh, with P1 densities.
fn potentials(mesh: &crate::mesh::TriangleMesh, k: C64, a: Option<&[C64]>, b: Option<&[C64]>, x: Point, near: f64) -> C64 {
    let mut total = C64::new(0.0, 0.0);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let p = mesh.corners(tri);
        let rule: &[([f64; 2], f64)] = if geom::dist(x, mesh.centroid(t)) < near { &RULE6 } else { &FAR3 };
        let (e1, e2) = (geom::sub(p[1], p[0]), geom::sub(p[2], p[0]));
        let n = mesh.normals[t];
        for &(uv, w) in rule {
            let y = geom::add(p[0], geom::add(geom::scale(e1, uv[0]), geom::scale(e2, uv[1])));
            let s = shape_ref(uv);
            let wa = w * mesh.areas[t];
            if let Some(a) = a {
                let av: C64 = (0..3).map(|i| a[tri[i]] * s[i]).sum();
                total += green(k, x, y) * av * wa;
            }
            if let Some(b) = b {
                let bv: C64 = (0..3).map(|i| b[tri[i]] * s[i]).sum();
                total -= green_dn_y(k, x, y, n) * bv * wa;
            }
        }
    }
    total
}

/// Evaluates the total pressure at every tagged point; buffer points get zero.
pub fn evaluate_field(traces: &SolutionTraces, scene: &Scene, grid: &FieldGrid) -> Result<FieldGrid> {
    if traces.interfaces.len() != scene.object_count() {
        return Err(Error::InvalidInput("traces and scene have different object counts".into()));
    }
    for (m, (t, o)) in traces.interfaces.iter().zip(&scene.objects).enumerate() {
        let n = o.mesh.vertex_count();
        let all = [&t.exterior_single, &t.exterior_double, &t.interior_single, &t.interior_double];
        if all.iter().any(|v| v.as_ref().is_some_and(|v| v.len() != n)) {
            return Err(Error::InvalidInput(format!("densities on interface {m} do not match its mesh")));
        }
    }
    let near: Vec<f64> = scene.objects.iter().map(|o| 2.0 * o.mesh.max_edge_length()).collect();
    let k0 = scene.exterior_wavenumber().k;
    let values = grid
        .points
        .par_iter()
        .zip(&grid.regions)
        .map(|(&x, r)| match *r {
            Region::Buffer => C64::new(0.0, 0.0),
            Region::Exterior => {
                let mut v = scene.incident(x);
                for (m, t) in traces.interfaces.iter().enumerate() {
                    let mesh = &scene.objects[m].mesh;
                    v += potentials(mesh, k0, t.exterior_single.as_deref(), t.exterior_double.as_deref(), x, near[m]);
                }
                v
            }
            Region::Interior(m) => {
                let t = &traces.interfaces[m];
                let k = scene.interior_wavenumber(m).k;
                potentials(&scene.objects[m].mesh, k, t.interior_single.as_deref(), t.interior_double.as_deref(), x, near[m])
            }
        })
        .collect();
    Ok(FieldGrid { points: grid.points.clone(), regions: grid.regions.clone(), values })
}

/// `-10 log10(mean |exact - computed|^2 / max |exact|^2)`; `+inf` when equal.
pub fn psnr(exact: &[C64], computed: &[C64]) -> Result<f64> {
    if exact.is_empty() || exact.len() != computed.len() {
        return Err(Error::InvalidInput("PSNR needs two non-empty fields of equal length".into()));
    }
    let peak = exact.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::InvalidInput("reference field is identically zero".into()));
    }
    let mse = exact.iter().zip(computed).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() / exact.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-10.0 * (mse / peak).log10())
}

/// PSNR over the points of `grid` that are not in the buffer.
pub fn grid_psnr(grid: &FieldGrid, exact: &[C64]) -> Result<f64> {
    let (a, b): (Vec<C64>, Vec<C64>) = grid
        .regions
        .iter()
        .zip(exact.iter().zip(&grid.values))
        .filter(|(r, _)| **r != Region::Buffer)
        .map(|(_, (e, v))| (*e, *v))
        .unzip();
    psnr(&a, &b)
}
