//! Galerkin assembly of boundary integral operators on P1 spaces.

mod dump;
pub mod kernel;
mod local;
pub mod quadrature;

use std::sync::{Arc, OnceLock};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::DenseMatrix;
use crate::mesh::geom::{self, Point};
use crate::mesh::TriangleMesh;
use crate::{Error, Result, C64};
use quadrature::{shape_ref, shape_ss, Adjacency, SingularRule, TriRule};

pub use dump::{read_matrix_dump, write_matrix_dump, MatrixDump};
pub use kernel::{green, green_dn_x, green_dn_y};
pub use local::{assemble_laplace_beltrami, assemble_mass, SparseKind, SparseLocalOperator};

/// Continuous piecewise-linear space on a mesh; one dof per vertex.
#[derive(Debug, Clone)]
pub struct P1Space {
    pub mesh: Arc<TriangleMesh>,
}

impl P1Space {
    pub fn new(mesh: Arc<TriangleMesh>) -> Self {
        P1Space { mesh }
    }

    pub fn dof_count(&self) -> usize {
        self.mesh.vertex_count()
    }

    pub fn same_as(&self, other: &P1Space) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh)
    }
}

/// Single-layer V, double-layer K, adjoint double-layer T, hypersingular D.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OperatorKind {
    V,
    K,
    T,
    D,
}

impl OperatorKind {
    pub const ALL: [OperatorKind; 4] = [OperatorKind::V, OperatorKind::K, OperatorKind::T, OperatorKind::D];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Self::ALL.get(c as usize).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            OperatorKind::V => "V",
            OperatorKind::K => "K",
            OperatorKind::T => "T",
            OperatorKind::D => "D",
        }
    }
}

impl std::fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssemblyOptions {
    /// Gauss points per direction of the Sauter–Schwab tensor rules.
    pub singular_order: usize,
    /// Pairs with centroid distance below `near_factor * max(h_row, h_col)` use `near_rule`.
    pub near_factor: f64,
    pub far_rule: TriRule,
    pub near_rule: TriRule,
    /// Build T on identical spaces as the transpose of K.
    pub adjoint_by_transpose: bool,
    /// Test hook: multiplies every singular-pair contribution. Leave at 1.
    pub singular_scale: f64,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions {
            singular_order: 4,
            near_factor: 2.0,
            far_rule: TriRule::Three,
            near_rule: TriRule::Five,
            adjoint_by_transpose: true,
            singular_scale: 1.0,
        }
    }
}

/// Assembled Galerkin matrix, rows indexed by test dofs.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    pub kind: OperatorKind,
    pub k: C64,
    pub row: P1Space,
    pub col: P1Space,
    pub matrix: Arc<DenseMatrix>,
    pub assembly_seconds: f64,
}

impl DenseOperator {
    /// T on the transposed pair of spaces, from K.
    pub fn adjoint_of(k_op: &DenseOperator) -> DenseOperator {
        assert_eq!(k_op.kind, OperatorKind::K);
        let start = Instant::now();
        let matrix = Arc::new(k_op.matrix.transpose());
        DenseOperator {
            kind: OperatorKind::T,
            k: k_op.k,
            row: k_op.col.clone(),
            col: k_op.row.clone(),
            matrix,
            assembly_seconds: start.elapsed().as_secs_f64(),
        }
    }
}

struct Element {
    p: [Point; 3],
    n: Point,
    area: f64,
    centroid: Point,
    curl: [Point; 3],
}

fn elements(mesh: &TriangleMesh) -> Vec<Element> {
    (0..mesh.triangle_count())
        .map(|i| {
            let p = mesh.triangle_corners(i);
            let area = mesh.areas[i];
            // surface curl of phi_a: (p_{a+1} - p_{a+2}) / 2A
            let curl = [0, 1, 2].map(|a| geom::scale(geom::sub(p[(a + 1) % 3], p[(a + 2) % 3]), 0.5 / area));
            Element { p, n: mesh.normals[i], area, centroid: mesh.centroid(i), curl }
        })
        .collect()
}

struct QPoints {
    x: Vec<Point>,
    w: Vec<f64>,
    shape: Vec<[f64; 3]>,
}

fn qpoints(el: &Element, rule: TriRule) -> QPoints {
    let mut q = QPoints { x: Vec::new(), w: Vec::new(), shape: Vec::new() };
    for &(uv, w) in rule.points() {
        let s = shape_ref(uv);
        let mut x = [0.0; 3];
        for a in 0..3 {
            x = geom::add(x, geom::scale(el.p[a], s[a]));
        }
        q.x.push(x);
        q.w.push(w * el.area);
        q.shape.push(s);
    }
    q
}

fn singular_rule(adj: Adjacency, order: usize) -> &'static SingularRule {
    static CACHE: OnceLock<std::sync::Mutex<Vec<((Adjacency, usize), &'static SingularRule)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    if let Some((_, r)) = guard.iter().find(|(key, _)| *key == (adj, order)) {
        return r;
    }
    let r: &'static SingularRule = Box::leak(Box::new(SingularRule::new(adj, order)));
    guard.push(((adj, order), r));
    r
}

#[inline]
fn kernel(kind: OperatorKind, k: C64, x: Point, y: Point, nx: Point, ny: Point) -> C64 {
    match kind {
        OperatorKind::V | OperatorKind::D => green(k, x, y),
        OperatorKind::K => green_dn_y(k, x, y, ny),
        OperatorKind::T => green_dn_x(k, x, y, nx),
    }
}

/// Converts accumulated `S0 = sum w kappa` and `S_ab = sum w kappa phi_a phi_b`
/// into the local 3x3 block.
#[inline]
fn finish_local(kind: OperatorKind, k: C64, s0: C64, s: [[C64; 3]; 3], tx: &Element, ty: &Element) -> [[C64; 3]; 3] {
    if kind != OperatorKind::D {
        return s;
    }
    let k2nn = k * k * geom::dot(tx.n, ty.n);
    let mut out = [[C64::new(0.0, 0.0); 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            out[a][b] = s0 * geom::dot(tx.curl[a], ty.curl[b]) - k2nn * s[a][b];
        }
    }
    out
}

fn regular_pair(kind: OperatorKind, k: C64, qx: &QPoints, qy: &QPoints, tx: &Element, ty: &Element) -> [[C64; 3]; 3] {
    let zero = C64::new(0.0, 0.0);
    let mut s0 = zero;
    let mut s = [[zero; 3]; 3];
    for i in 0..qx.x.len() {
        let mut inner = [zero; 3];
        let mut inner0 = zero;
        for j in 0..qy.x.len() {
            let v = kernel(kind, k, qx.x[i], qy.x[j], tx.n, ty.n) * qy.w[j];
            inner0 += v;
            for b in 0..3 {
                inner[b] += v * qy.shape[j][b];
            }
        }
        let wx = qx.w[i];
        s0 += inner0 * wx;
        for a in 0..3 {
            let f = wx * qx.shape[i][a];
            for b in 0..3 {
                s[a][b] += inner[b] * f;
            }
        }
    }
    finish_local(kind, k, s0, s, tx, ty)
}

type Local = [[C64; 3]; 3];

/// Both local blocks of an unordered singular pair `(x on tx, y on ty)`.
///
/// Returns `(L_xy, L_yx)` where `L_yx` has test functions on `ty`. The
/// exponential is shared between the two orientations.
#[allow(clippy::too_many_arguments)]
fn singular_pair(
    kind: OperatorKind,
    k: C64,
    adj: Adjacency,
    rule: &SingularRule,
    tx: &Element,
    ty: &Element,
    px: [usize; 3],
    py: [usize; 3],
) -> (Local, Local) {
    let zero = C64::new(0.0, 0.0);
    let mut s0 = [zero; 2];
    let mut s = [[[zero; 3]; 3]; 2];
    let symmetric = matches!(kind, OperatorKind::V | OperatorKind::D);
    // flat panels: (x - y).n vanishes on coincident pairs
    if adj == Adjacency::Coincident && !symmetric {
        return ([[zero; 3]; 3], [[zero; 3]; 3]);
    }
    let (a, b, c) = (tx.p[px[0]], tx.p[px[1]], tx.p[px[2]]);
    let (a2, b2, c2) = (ty.p[py[0]], ty.p[py[1]], ty.p[py[2]]);
    let (ex1, ex2) = (geom::sub(b, a), geom::sub(c, b));
    let (ey1, ey2) = (geom::sub(b2, a2), geom::sub(c2, b2));
    let jac = 4.0 * tx.area * ty.area;
    // coincident rule points come in swapped pairs with equal weights
    let step = if adj == Adjacency::Coincident { 2 } else { 1 };
    let ik = C64::i() * k;
    for q in (0..rule.w.len()).step_by(step) {
        let (sx, sy) = (rule.x[q], rule.y[q]);
        let x = geom::add(a, geom::add(geom::scale(ex1, sx[0]), geom::scale(ex2, sx[1])));
        let y = geom::add(a2, geom::add(geom::scale(ey1, sy[0]), geom::scale(ey2, sy[1])));
        let d = geom::sub(x, y);
        let r2 = geom::dot(d, d);
        let r = r2.sqrt();
        let e = (ik * r).exp() * (rule.w[q] * jac / (4.0 * std::f64::consts::PI * r));
        let (vxy, vyx) = match kind {
            OperatorKind::V | OperatorKind::D => (e, e),
            OperatorKind::K | OperatorKind::T => {
                let f = e * (C64::new(1.0, 0.0) - ik * r) / r2;
                let (dny, dnx) = (geom::dot(d, ty.n), geom::dot(d, tx.n));
                if kind == OperatorKind::K {
                    (f * dny, -f * dnx)
                } else {
                    (-f * dnx, f * dny)
                }
            }
        };
        let (fx, fy) = (shape_ss(sx), shape_ss(sy));
        s0[0] += vxy;
        s0[1] += vyx;
        for i in 0..3 {
            let wx = vxy * fx[i];
            for j in 0..3 {
                s[0][px[i]][py[j]] += wx * fy[j];
            }
        }
        if !symmetric {
            for i in 0..3 {
                let wx = vyx * fx[i];
                for j in 0..3 {
                    s[1][py[j]][px[i]] += wx * fy[j];
                }
            }
        }
    }
    if symmetric {
        for i in 0..3 {
            for j in 0..3 {
                s[1][j][i] = s[0][i][j];
            }
        }
    }
    if step == 2 {
        // add the swapped partner of every point pair
        for o in 0..2 {
            s0[o] += s0[o];
        }
        let (m0, m1) = (s[0], s[1]);
        for i in 0..3 {
            for j in 0..3 {
                s[0][i][j] = m0[i][j] + m1[i][j];
                s[1][i][j] = s[0][i][j];
            }
        }
    }
    (finish_local(kind, k, s0[0], s[0], tx, ty), finish_local(kind, k, s0[1], s[1], ty, tx))
}

/// Local orderings that put shared vertices first in both triangles, in
/// increasing global index.
fn shared_ordering(t: &[usize; 3], u: &[usize; 3]) -> Option<(Adjacency, [usize; 3], [usize; 3])> {
    let mut shared: Vec<(usize, usize)> = (0..3)
        .filter_map(|i| (0..3).find(|&j| u[j] == t[i]).map(|j| (i, j)))
        .collect();
    shared.sort_by_key(|&(i, _)| t[i]);
    let rest = |used: &[usize]| (0..3).find(|i| !used.contains(i)).unwrap();
    match shared.len() {
        3 => Some((Adjacency::Coincident, [0, 1, 2], [0, 1, 2])),
        2 => {
            let (i0, j0) = shared[0];
            let (i1, j1) = shared[1];
            Some((Adjacency::Edge, [i0, i1, rest(&[i0, i1])], [j0, j1, rest(&[j0, j1])]))
        }
        1 => {
            let (i, j) = shared[0];
            Some((Adjacency::Vertex, [i, (i + 1) % 3, (i + 2) % 3], [j, (j + 1) % 3, (j + 2) % 3]))
        }
        _ => None,
    }
}

/// Assembles the Galerkin matrix of `kind` with test space `row` and trial space `col`.
pub fn assemble_boundary_operator(
    kind: OperatorKind,
    k: C64,
    row: &P1Space,
    col: &P1Space,
    opts: &AssemblyOptions,
) -> Result<DenseOperator> {
    if !k.is_finite() {
        return Err(Error::InvalidInput(format!("wavenumber {k} is not finite")));
    }
    let same = row.same_as(col);
    if kind == OperatorKind::T && same && opts.adjoint_by_transpose {
        let start = Instant::now();
        let kop = assemble_boundary_operator(OperatorKind::K, k, row, col, opts)?;
        let mut t = DenseOperator::adjoint_of(&kop);
        t.assembly_seconds = start.elapsed().as_secs_f64();
        return Ok(t);
    }
    let start = Instant::now();
    let (mx, my) = (&row.mesh, &col.mesh);
    let (ex, ey) = (elements(mx), elements(my));
    let near_far: Vec<(QPoints, QPoints)> =
        ey.iter().map(|e| (qpoints(e, opts.far_rule), qpoints(e, opts.near_rule))).collect();
    let near_radius = opts.near_factor * mx.max_edge_length().max(my.max_edge_length());
    let star = if same { my.vertex_triangles() } else { Vec::new() };
    let rules = [Adjacency::Coincident, Adjacency::Edge, Adjacency::Vertex]
        .map(|a| singular_rule(a, opts.singular_order));
    let ncols = col.dof_count();
    let mut matrix = DenseMatrix::zeros(row.dof_count(), ncols);

    let neighbours = |ti: usize| -> Vec<usize> {
        let mut nb: Vec<usize> = Vec::new();
        if same {
            for &v in &mx.triangles[ti] {
                nb.extend(&star[v]);
            }
            nb.sort_unstable();
            nb.dedup();
        }
        nb
    };

    let test_rows = |ti: usize| -> Result<Vec<C64>> {
        let tx = &ex[ti];
        let (qfar, qnear) = (qpoints(tx, opts.far_rule), qpoints(tx, opts.near_rule));
        let mut rows = vec![C64::new(0.0, 0.0); 3 * ncols];
        let nb = neighbours(ti);
        for (tj, ty) in ey.iter().enumerate() {
            if nb.binary_search(&tj).is_ok() {
                continue;
            }
            let ut = &my.triangles[tj];
            let near = geom::dist(tx.centroid, ty.centroid) < near_radius;
            let (qx, qy) = if near { (&qnear, &near_far[tj].1) } else { (&qfar, &near_far[tj].0) };
            let loc = regular_pair(kind, k, qx, qy, tx, ty);
            if loc.iter().flatten().any(|z| !z.is_finite()) {
                return Err(Error::Assembly { test: ti, trial: tj, reason: "non-finite quadrature result".into() });
            }
            for a in 0..3 {
                for b in 0..3 {
                    rows[a * ncols + ut[b]] += loc[a][b];
                }
            }
        }
        Ok(rows)
    };

    let ntri = mx.triangle_count();
    let chunk = (rayon::current_num_threads() * 8).max(32);
    let mut first = 0;
    while first < ntri {
        let last = (first + chunk).min(ntri);
        let blocks: Vec<Result<Vec<C64>>> = (first..last).into_par_iter().map(test_rows).collect();
        // fixed accumulation order keeps the result independent of scheduling
        for (ti, rows) in (first..last).zip(blocks) {
            let rows = rows?;
            let tri = &mx.triangles[ti];
            for a in 0..3 {
                let dst = &mut matrix.data[tri[a] * ncols..(tri[a] + 1) * ncols];
                for (d, s) in dst.iter_mut().zip(&rows[a * ncols..(a + 1) * ncols]) {
                    *d += s;
                }
            }
        }
        first = last;
    }

    if same {
        let pairs: Vec<(usize, usize)> = (0..ntri)
            .flat_map(|i| neighbours(i).into_iter().filter(move |&j| j >= i).map(move |j| (i, j)))
            .collect();
        let locals: Vec<(Local, Local)> = pairs
            .par_iter()
            .map(|&(i, j)| {
                let (adj, px, py) = shared_ordering(&mx.triangles[i], &mx.triangles[j]).expect("adjacent pair");
                singular_pair(kind, k, adj, rules[adj as usize], &ex[i], &ex[j], px, py)
            })
            .collect();
        for (&(i, j), (lij, lji)) in pairs.iter().zip(&locals) {
            if lij.iter().chain(lji).flatten().any(|z| !z.is_finite()) {
                return Err(Error::Assembly { test: i, trial: j, reason: "non-finite singular quadrature".into() });
            }
            let (ti, tj) = (&mx.triangles[i], &mx.triangles[j]);
            let scale = opts.singular_scale;
            for a in 0..3 {
                for b in 0..3 {
                    matrix.data[ti[a] * ncols + tj[b]] += lij[a][b] * scale;
                    if i != j {
                        matrix.data[tj[a] * ncols + ti[b]] += lji[a][b] * scale;
                    }
                }
            }
        }
    }

    Ok(DenseOperator {
        kind,
        k,
        row: row.clone(),
        col: col.clone(),
        matrix: Arc::new(matrix),
        assembly_seconds: start.elapsed().as_secs_f64(),
    })
}
