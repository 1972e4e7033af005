//! Block systems for the five formulation families and trace recovery.
//!
//! Every system is Galerkin: rows are tested with P1 functions, so identity
//! terms appear as mass matrices and operator products carry an inverse mass
//! in between. Unknowns are P1 coefficient vectors.

mod cache;
mod direct;
mod indirect;
mod traces;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assembly::quadrature::{shape_ref, RULE6};
use crate::linalg::{self, Action};
use crate::mesh::geom;
use crate::model::{plane_wave, plane_wave_gradient};
use crate::precond::{build_osrc_actions, OsrcParams, WavenumberChoice};
use crate::{Error, Result, C64};

pub use cache::{Context, LocalOperators, OperatorCache, OperatorKey};
pub use traces::{recover_traces, InterfaceTraces, SolutionTraces};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Dirichlet,
    Neumann,
    Pmchwt,
    Muller,
    CombinedTrace,
    CombinedDomain,
    CombinedMixed,
    Mtf,
    Aff,
    Spf,
    Mpf,
}

impl Family {
    pub const ALL: [Family; 11] = [
        Family::Dirichlet,
        Family::Neumann,
        Family::Pmchwt,
        Family::Muller,
        Family::CombinedTrace,
        Family::CombinedDomain,
        Family::CombinedMixed,
        Family::Mtf,
        Family::Aff,
        Family::Spf,
        Family::Mpf,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Family::Dirichlet => "dirichlet",
            Family::Neumann => "neumann",
            Family::Pmchwt => "pmchwt",
            Family::Muller => "muller",
            Family::CombinedTrace => "combined-trace",
            Family::CombinedDomain => "combined-domain",
            Family::CombinedMixed => "combined-mixed",
            Family::Mtf => "mtf",
            Family::Aff => "aff",
            Family::Spf => "spf",
            Family::Mpf => "mpf",
        }
    }

    pub fn is_combined(self) -> bool {
        matches!(self, Family::CombinedTrace | Family::CombinedDomain | Family::CombinedMixed)
    }

    /// Table 1 counts `(#sp, #BIO, #mv)` for `l` objects.
    pub fn table1(self, l: usize) -> (usize, usize, usize) {
        let (a, b) = (l, l * l);
        match self {
            Family::Dirichlet | Family::Neumann | Family::Spf => (2 * a, 2 * a + 2 * b, 2 * a + 2 * b),
            Family::Pmchwt | Family::Muller | Family::CombinedTrace | Family::CombinedDomain | Family::CombinedMixed => {
                (2 * a, 4 * a + 4 * b, 4 * a + 4 * b)
            }
            Family::Mtf => (4 * a, 4 * a + 4 * b, 4 * a + 4 * b),
            Family::Aff => (a, 2 * a + 2 * b, a + 3 * b),
            Family::Mpf => (2 * a, 2 * a + 2 * b, a + 3 * b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AuxPotential {
    Psi,
    Phi,
}

/// Auxiliary-field variant: weights of the Dirichlet-trace and Neumann-trace forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffVariant {
    pub potential: AuxPotential,
    pub dirichlet: C64,
    pub neumann: C64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Layer {
    Single,
    Double,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpfVariant {
    pub exterior: Layer,
    pub interior: Layer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Elimination {
    /// Keep the Dirichlet trace, eliminate the Neumann trace.
    Dtn,
    /// Keep the Neumann trace, eliminate the Dirichlet trace.
    Ntd,
}

/// Left multiplier that removes the interior map: `Ad` leads to the
/// `D_m`/`T_m` pair, `Sl` to the `V_m`/`K_m` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Multiplier {
    Ad,
    Sl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MpfVariant {
    pub exterior: Layer,
    pub elimination: Elimination,
    pub multiplier: Multiplier,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Variant {
    Plain,
    Aff(AffVariant),
    Spf(SpfVariant),
    Mpf(MpfVariant),
}

/// A combination weight: a scalar or an OSRC map of the interface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coupling {
    Scalar(C64),
    Ntd,
    Dtn,
}

impl Coupling {
    pub fn real(x: f64) -> Self {
        Coupling::Scalar(C64::new(x, 0.0))
    }

    fn is_zero(&self) -> bool {
        matches!(self, Coupling::Scalar(c) if c.norm() == 0.0)
    }
}

/// `(eta+, eta-, nu+, nu-)` of the combined single-trace formulations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CombinedCoefficients {
    pub eta_plus: Coupling,
    pub eta_minus: Coupling,
    pub nu_plus: Coupling,
    pub nu_minus: Coupling,
}

impl CombinedCoefficients {
    pub fn scalars(eta_plus: f64, eta_minus: f64, nu_plus: f64, nu_minus: f64) -> Self {
        CombinedCoefficients {
            eta_plus: Coupling::real(eta_plus),
            eta_minus: Coupling::real(eta_minus),
            nu_plus: Coupling::real(nu_plus),
            nu_minus: Coupling::real(nu_minus),
        }
    }
}

impl Default for CombinedCoefficients {
    fn default() -> Self {
        Self::scalars(1.0, -1.0, 1.0, -1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormulationSpec {
    pub family: Family,
    pub variant: Variant,
    /// Only for combined families; `None` means the default coefficients.
    pub coupling: Option<CombinedCoefficients>,
    /// Parameters of operator-valued couplings.
    pub osrc: OsrcParams,
}

impl FormulationSpec {
    pub fn new(family: Family, variant: Variant) -> Result<Self> {
        let s = FormulationSpec { family, variant, coupling: None, osrc: OsrcParams::default() };
        s.validate()?;
        Ok(s)
    }

    pub fn plain(family: Family) -> Self {
        Self::new(family, Variant::Plain).expect("family without variants")
    }

    pub fn with_coupling(mut self, c: CombinedCoefficients) -> Result<Self> {
        self.coupling = Some(c);
        self.validate()?;
        Ok(self)
    }

    pub fn coefficients(&self) -> CombinedCoefficients {
        self.coupling.unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        let ok = matches!(
            (self.family, &self.variant),
            (Family::Aff, Variant::Aff(_)) | (Family::Spf, Variant::Spf(_)) | (Family::Mpf, Variant::Mpf(_))
        ) || (!matches!(self.family, Family::Aff | Family::Spf | Family::Mpf) && self.variant == Variant::Plain);
        if !ok {
            return Err(Error::InvalidInput(format!("variant {:?} does not belong to {}", self.variant, self.family.id())));
        }
        if self.coupling.is_some() && !self.family.is_combined() {
            return Err(Error::InvalidInput(format!("{} takes no combination coefficients", self.family.id())));
        }
        if let Some(c) = &self.coupling {
            let (a, b) = match self.family {
                Family::CombinedTrace => ((&c.eta_plus, &c.eta_minus), (&c.nu_plus, &c.nu_minus)),
                Family::CombinedDomain => ((&c.eta_plus, &c.nu_plus), (&c.eta_minus, &c.nu_minus)),
                _ => ((&c.eta_plus, &c.nu_minus), (&c.nu_plus, &c.eta_minus)),
            };
            if (a.0.is_zero() && a.1.is_zero()) || (b.0.is_zero() && b.1.is_zero()) {
                return Err(Error::InvalidInput("combination leaves an equation row empty".into()));
            }
        }
        if let Variant::Aff(v) = &self.variant {
            if v.dirichlet.norm() == 0.0 && v.neumann.norm() == 0.0 {
                return Err(Error::InvalidInput("auxiliary-field weights are both zero".into()));
            }
        }
        self.osrc.validate()
    }

    /// Stable identifier, e.g. `pmchwt`, `aff:neu-phi`, `mpf:sl-dtn-ad`.
    pub fn id(&self) -> String {
        let layer = |l: Layer| if l == Layer::Single { "sl" } else { "dl" };
        match &self.variant {
            Variant::Plain => self.family.id().to_string(),
            Variant::Aff(v) => {
                let p = if v.potential == AuxPotential::Psi { "psi" } else { "phi" };
                let one = C64::new(1.0, 0.0);
                let zero = C64::new(0.0, 0.0);
                if v.dirichlet == one && v.neumann == zero {
                    format!("aff:dir-{p}")
                } else if v.dirichlet == zero && v.neumann == one {
                    format!("aff:neu-{p}")
                } else {
                    format!("aff:mix-{p}")
                }
            }
            Variant::Spf(v) => format!("spf:{}-{}", layer(v.exterior), layer(v.interior)),
            Variant::Mpf(v) => format!(
                "mpf:{}-{}-{}",
                layer(v.exterior),
                if v.elimination == Elimination::Dtn { "dtn" } else { "ntd" },
                if v.multiplier == Multiplier::Ad { "ad" } else { "sl" }
            ),
        }
    }

    /// Every named formulation: plain families and all tagged variants.
    pub fn catalogue() -> Vec<FormulationSpec> {
        let mut out: Vec<FormulationSpec> = [
            Family::Dirichlet,
            Family::Neumann,
            Family::Pmchwt,
            Family::Muller,
            Family::CombinedTrace,
            Family::CombinedDomain,
            Family::CombinedMixed,
            Family::Mtf,
        ]
        .into_iter()
        .map(Self::plain)
        .collect();
        for id in [
            "aff:dir-psi",
            "aff:neu-psi",
            "aff:dir-phi",
            "aff:neu-phi",
            "spf:sl-sl",
            "spf:dl-dl",
            "spf:sl-dl",
            "spf:dl-sl",
        ] {
            out.push(id.parse().expect("catalogue id"));
        }
        for ext in ["sl", "dl"] {
            for el in ["dtn", "ntd"] {
                for mu in ["ad", "sl"] {
                    out.push(format!("mpf:{ext}-{el}-{mu}").parse().expect("catalogue id"));
                }
            }
        }
        out
    }
}

impl fmt::Display for FormulationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl FromStr for FormulationSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("unknown formulation id '{s}'"));
        let (fam, var) = match s.split_once(':') {
            Some((a, b)) => (a, Some(b)),
            None => (s, None),
        };
        let family = Family::ALL.into_iter().find(|f| f.id() == fam).ok_or_else(bad)?;
        let layer = |t: &str| match t {
            "sl" => Ok(Layer::Single),
            "dl" => Ok(Layer::Double),
            _ => Err(bad()),
        };
        let variant = match (family, var) {
            (Family::Aff, Some(v)) => {
                let (form, pot) = v.split_once('-').ok_or_else(bad)?;
                let potential = match pot {
                    "psi" => AuxPotential::Psi,
                    "phi" => AuxPotential::Phi,
                    _ => return Err(bad()),
                };
                let (d, n) = match form {
                    "dir" => (1.0, 0.0),
                    "neu" => (0.0, 1.0),
                    _ => return Err(bad()),
                };
                Variant::Aff(AffVariant { potential, dirichlet: C64::new(d, 0.0), neumann: C64::new(n, 0.0) })
            }
            (Family::Spf, Some(v)) => {
                let (e, i) = v.split_once('-').ok_or_else(bad)?;
                Variant::Spf(SpfVariant { exterior: layer(e)?, interior: layer(i)? })
            }
            (Family::Mpf, Some(v)) => {
                let parts: Vec<&str> = v.split('-').collect();
                if parts.len() != 3 {
                    return Err(bad());
                }
                let elimination = match parts[1] {
                    "dtn" => Elimination::Dtn,
                    "ntd" => Elimination::Ntd,
                    _ => return Err(bad()),
                };
                let multiplier = match parts[2] {
                    "ad" => Multiplier::Ad,
                    "sl" => Multiplier::Sl,
                    _ => return Err(bad()),
                };
                Variant::Mpf(MpfVariant { exterior: layer(parts[0])?, elimination, multiplier })
            }
            (Family::Aff | Family::Spf | Family::Mpf, None) => return Err(bad()),
            (_, None) => Variant::Plain,
            (_, Some(_)) => return Err(bad()),
        };
        FormulationSpec::new(family, variant)
    }
}

/// What an unknown block holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Unknown {
    /// Exterior Dirichlet trace shared by both sides.
    Dirichlet,
    /// Exterior Neumann trace.
    Neumann,
    ExteriorDirichlet,
    ExteriorNeumann,
    InteriorDirichlet,
    InteriorNeumann,
    AuxPsi,
    AuxPhi,
    InteriorSingleLayer,
    InteriorDoubleLayer,
    ExteriorSingleLayer,
    ExteriorDoubleLayer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BlockInfo {
    pub interface: usize,
    pub unknown: Unknown,
    pub offset: usize,
    pub size: usize,
}

/// Leading part of an equation row: second kind, or first kind with a
/// single-layer-like or hypersingular-like operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Order {
    Identity,
    SingleLayer,
    Hypersingular,
}

/// Where an equation row goes under opposite-order preconditioning: the
/// unknown block its leading part acts on, the sign of that part and the
/// domain whose operators pair with it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RowInfo {
    pub interface: usize,
    pub slot: usize,
    pub order: Order,
    pub sign: f64,
    pub domain: usize,
}

/// A built formulation: Galerkin operator, right-hand side and layout.
pub struct BlockSystem {
    pub spec: FormulationSpec,
    pub operator: Action,
    pub rhs: Vec<C64>,
    pub blocks: Vec<BlockInfo>,
    pub rows: Vec<RowInfo>,
    /// Distinct dense operators the system applies.
    pub operators: BTreeSet<OperatorKey>,
    /// Galerkin incident traces `(g_D, g_N)` per interface.
    pub incident: Vec<(Vec<C64>, Vec<C64>)>,
    pub interfaces: usize,
}

impl BlockSystem {
    pub fn dim(&self) -> usize {
        self.rhs.len()
    }

    pub fn block(&self, x: &[C64], b: usize) -> Vec<C64> {
        let i = &self.blocks[b];
        x[i.offset..i.offset + i.size].to_vec()
    }

    pub fn find(&self, interface: usize, unknown: Unknown) -> Option<usize> {
        self.blocks.iter().position(|b| b.interface == interface && b.unknown == unknown)
    }

    /// `(#sp, #BIO, #mv)` as built.
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.blocks.len(), self.operators.len(), self.operator.dense_products())
    }
}

/// Galerkin projections `(int p_inc phi_i, int dn p_inc phi_i)` on interface `m`.
pub fn incident_traces(ctx: &Context, m: usize) -> (Vec<C64>, Vec<C64>) {
    let mesh = &ctx.spaces[m].mesh;
    let k0 = ctx.k(0);
    let d = ctx.scene.direction;
    let n = mesh.vertex_count();
    let mut gd = vec![C64::new(0.0, 0.0); n];
    let mut gn = vec![C64::new(0.0, 0.0); n];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let p = mesh.corners(tri);
        let (e1, e2) = (geom::sub(p[1], p[0]), geom::sub(p[2], p[0]));
        let nrm = mesh.normals[t];
        for &(uv, w) in RULE6.iter() {
            let x = geom::add(p[0], geom::add(geom::scale(e1, uv[0]), geom::scale(e2, uv[1])));
            let f = plane_wave(d, k0, x);
            let g = plane_wave_gradient(d, k0, x);
            let dn = g[0] * nrm[0] + g[1] * nrm[1] + g[2] * nrm[2];
            let s = shape_ref(uv);
            for a in 0..3 {
                let wa = w * mesh.areas[t] * s[a];
                gd[tri[a]] += f * wa;
                gn[tri[a]] += dn * wa;
            }
        }
    }
    (gd, gn)
}

/// Accumulates the terms of one equation row, block by block.
pub(crate) struct Row {
    terms: Vec<Vec<Action>>,
}

impl Row {
    pub(crate) fn new(blocks: usize) -> Self {
        Row { terms: vec![Vec::new(); blocks] }
    }

    pub(crate) fn add(&mut self, block: usize, a: Action) {
        self.terms[block].push(a);
    }

    pub(crate) fn into_action(self, rows: usize, cols: &[usize]) -> Action {
        let blocks = vec![self
            .terms
            .into_iter()
            .map(|t| match t.len() {
                0 => None,
                1 => t.into_iter().next(),
                _ => Some(linalg::sum(t)),
            })
            .collect()];
        linalg::block(vec![rows], cols.to_vec(), blocks)
    }
}

pub(crate) fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Applies a coupling weight to a residual-valued row and its right-hand side.
pub(crate) fn weigh(ctx: &Context, m: usize, c: &Coupling, params: &OsrcParams, row: Action, rhs: &[C64]) -> Result<(Action, Vec<C64>)> {
    match c {
        Coupling::Scalar(s) => Ok((linalg::scaled(*s, row), rhs.iter().map(|v| v * s).collect())),
        Coupling::Ntd | Coupling::Dtn => {
            let k = match params.wavenumber {
                WavenumberChoice::Interior => ctx.k(m + 1),
                WavenumberChoice::Exterior => ctx.k(0),
            };
            let (ntd, dtn) = build_osrc_actions(&ctx.locals[m], k, params)?;
            let l = if *c == Coupling::Ntd { ntd } else { dtn };
            let r = ctx.mass(m).apply_vec(&l.apply_vec(rhs));
            Ok((linalg::product(vec![ctx.mass(m), l, row]), r))
        }
    }
}

/// Stacks full-width rows into the system operator.
pub(crate) fn stack(rows: Vec<Action>, sizes: &[usize], cols: usize) -> Action {
    let blocks = rows.into_iter().map(|r| vec![Some(r)]).collect();
    linalg::block(sizes.to_vec(), vec![cols], blocks)
}

/// Builds the block system of `spec` for the scene bound to `ctx`.
pub fn build(spec: &FormulationSpec, ctx: &Context) -> Result<BlockSystem> {
    spec.validate()?;
    ctx.clear_used();
    let incident: Vec<_> = (0..ctx.count()).map(|m| incident_traces(ctx, m)).collect();
    let parts = match spec.family {
        Family::Mtf => direct::mtf(ctx, &incident)?,
        Family::Aff => direct::aff(spec, ctx, &incident)?,
        Family::Spf => indirect::spf(spec, ctx, &incident)?,
        Family::Mpf => indirect::mpf(spec, ctx, &incident)?,
        _ => direct::single_trace(spec, ctx, &incident)?,
    };
    let Parts { blocks, rows, right } = parts;
    let sizes: Vec<usize> = rows.iter().map(|r| ctx.dofs(r.0.interface)).collect();
    let n: usize = blocks.iter().map(|b| b.size).sum();
    let width = right.as_ref().map_or(n, |r| r.rows());
    if sizes.iter().sum::<usize>() != n {
        return Err(Error::Internal("row and unknown layouts differ in size".into()));
    }
    let mut rhs = Vec::with_capacity(n);
    let mut infos = Vec::with_capacity(rows.len());
    let mut actions = Vec::with_capacity(rows.len());
    for (info, a, r) in rows {
        infos.push(info);
        actions.push(a);
        rhs.extend(r);
    }
    Ok(BlockSystem {
        spec: spec.clone(),
        operator: match right {
            Some(r) => linalg::product(vec![stack(actions, &sizes, width), r]),
            None => stack(actions, &sizes, width),
        },
        rhs,
        blocks,
        rows: infos,
        operators: ctx.used(),
        incident,
        interfaces: ctx.count(),
    })
}

pub(crate) struct Parts {
    pub blocks: Vec<BlockInfo>,
    pub rows: Vec<(RowInfo, Action, Vec<C64>)>,
    /// Shared first stage applied to the unknowns before the rows.
    pub right: Option<Action>,
}

pub(crate) fn layout(ctx: &Context, per_interface: &[Unknown]) -> Vec<BlockInfo> {
    let mut out = Vec::new();
    let mut offset = 0;
    for m in 0..ctx.count() {
        for &u in per_interface {
            let size = ctx.dofs(m);
            out.push(BlockInfo { interface: m, unknown: u, offset, size });
            offset += size;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        let all = FormulationSpec::catalogue();
        assert_eq!(all.len(), 8 + 4 + 4 + 8);
        for s in &all {
            let back: FormulationSpec = s.id().parse().unwrap();
            assert_eq!(&back, s);
        }
        assert_eq!("aff:neu-phi".parse::<FormulationSpec>().unwrap().id(), "aff:neu-phi");
        assert_eq!("mpf:sl-dtn-ad".parse::<FormulationSpec>().unwrap().id(), "mpf:sl-dtn-ad");
        for bad in ["pmchwt:x", "aff", "aff:dir-chi", "mpf:sl-dtn", "spf:sl", "nope"] {
            assert!(bad.parse::<FormulationSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn coupling_rules() {
        let pm = FormulationSpec::plain(Family::Pmchwt);
        assert!(pm.with_coupling(CombinedCoefficients::default()).is_err());
        let ct = FormulationSpec::plain(Family::CombinedTrace);
        assert!(ct.clone().with_coupling(CombinedCoefficients::scalars(0.0, 0.0, 1.0, 1.0)).is_err());
        assert!(ct.with_coupling(CombinedCoefficients::scalars(1.0, 0.0, 0.0, 1.0)).is_ok());
    }

    #[test]
    fn table_formulas() {
        assert_eq!(Family::Pmchwt.table1(1), (2, 8, 8));
        assert_eq!(Family::Aff.table1(2), (2, 12, 14));
        assert_eq!(Family::Mpf.table1(1), (2, 4, 4));
        assert_eq!(Family::Mtf.table1(2), (8, 24, 24));
    }
}
