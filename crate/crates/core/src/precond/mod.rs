//! Preconditioners as residual-to-coefficient maps, applied from the left.
//!
//! Every system is Galerkin, so a row residual lives in the dual of the P1
//! space; each preconditioner first maps it back with an inverse mass matrix
//! (directly or inside an OSRC solve).

pub mod osrc;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assembly::OperatorKind::{D, K, T, V};
use crate::formulation::{BlockSystem, Context, Family, Order};
use crate::linalg::{self, Action};
use crate::{Error, Result, C64};

pub use osrc::{build_osrc_actions, OsrcAction, OsrcParams, PartialFractions, WavenumberChoice};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PreconditionerKind {
    Mass,
    CalderonDiagonal,
    CalderonFull,
    OppositeOrder,
    Osrc,
}

impl PreconditionerKind {
    pub const ALL: [PreconditionerKind; 5] = [
        PreconditionerKind::Mass,
        PreconditionerKind::CalderonDiagonal,
        PreconditionerKind::CalderonFull,
        PreconditionerKind::OppositeOrder,
        PreconditionerKind::Osrc,
    ];

    pub fn id(self) -> &'static str {
        match self {
            PreconditionerKind::Mass => "mass",
            PreconditionerKind::CalderonDiagonal => "calderon:diag",
            PreconditionerKind::CalderonFull => "calderon:full",
            PreconditionerKind::OppositeOrder => "oo",
            PreconditionerKind::Osrc => "osrc",
        }
    }

    /// Whether the kind can be combined with `family`.
    pub fn feasible(self, family: Family) -> bool {
        match self {
            PreconditionerKind::Mass => true,
            PreconditionerKind::CalderonDiagonal | PreconditionerKind::CalderonFull => {
                matches!(family, Family::Pmchwt | Family::Mtf)
            }
            PreconditionerKind::OppositeOrder | PreconditionerKind::Osrc => family != Family::Muller,
        }
    }
}

impl fmt::Display for PreconditionerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for PreconditionerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown preconditioner id '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreconditionerSpec {
    pub kind: PreconditionerKind,
    #[serde(default)]
    pub osrc: OsrcParams,
}

impl PreconditionerSpec {
    pub fn new(kind: PreconditionerKind) -> Self {
        PreconditionerSpec { kind, osrc: OsrcParams::default() }
    }

    pub fn check(&self, family: Family) -> Result<()> {
        if !self.kind.feasible(family) {
            return Err(Error::Feasibility(format!(
                "preconditioner {} is not available for {}",
                self.kind.id(),
                family.id()
            )));
        }
        if self.kind == PreconditionerKind::Osrc {
            self.osrc.validate()?;
        }
        Ok(())
    }
}

/// `P A x = P b` with `P` the preconditioner.
pub struct PreconditionedSystem {
    pub operator: Action,
    pub rhs: Vec<C64>,
    pub preconditioner: Action,
    pub kind: PreconditionerKind,
    /// Calderón block applies per preconditioner application.
    pub calderon_blocks: usize,
}

/// Block-diagonal inverse mass over the unknown blocks.
pub fn build_mass_preconditioner(system: &BlockSystem, ctx: &Context) -> Action {
    let blocks = system.blocks.iter().map(|b| ctx.mass_inverse(b.interface)).collect();
    std::sync::Arc::new(linalg::BlockAction::diagonal(blocks))
}

fn calderon_block(ctx: &Context, domain: usize, m: usize, n: usize) -> Result<[Action; 4]> {
    Ok([
        linalg::scaled(C64::new(-1.0, 0.0), ctx.operator_action(domain, K, m, n)?),
        ctx.operator_action(domain, V, m, n)?,
        ctx.operator_action(domain, D, m, n)?,
        ctx.operator_action(domain, T, m, n)?,
    ])
}

/// `M^-1 C M^-1` with `C` the Calderón operator of the system.
pub fn build_calderon_preconditioner(system: &BlockSystem, ctx: &Context, full: bool) -> Result<Action> {
    let family = system.spec.family;
    if !matches!(family, Family::Pmchwt | Family::Mtf) {
        return Err(Error::Feasibility(format!("Calderón preconditioning is not available for {}", family.id())));
    }
    let l = ctx.count();
    let sizes: Vec<usize> = system.blocks.iter().map(|b| b.size).collect();
    let mut grid: Vec<Vec<Option<Action>>> = vec![vec![None; sizes.len()]; sizes.len()];
    let stride = if family == Family::Pmchwt { 2 } else { 4 };
    let place = |grid: &mut Vec<Vec<Option<Action>>>, r: usize, c: usize, b: [Action; 4]| {
        let [a, bb, cc, d] = b;
        grid[r][c] = Some(a);
        grid[r][c + 1] = Some(bb);
        grid[r + 1][c] = Some(cc);
        grid[r + 1][c + 1] = Some(d);
    };
    for m in 0..l {
        for n in 0..l {
            if full || m == n {
                place(&mut grid, stride * m, stride * n, calderon_block(ctx, 0, m, n)?);
            }
        }
        let int = calderon_block(ctx, m + 1, m, m)?;
        if family == Family::Mtf {
            place(&mut grid, 4 * m + 2, 4 * m + 2, int);
        } else if full {
            // interior part of the PMCHWT operator: -K_m, V_m/s; s D_m, T_m
            let s = ctx.sigma(m);
            let [a, b, c, d] = int;
            let add = |slot: &mut Option<Action>, x: Action| {
                *slot = Some(match slot.take() {
                    Some(y) => linalg::sum(vec![y, x]),
                    None => x,
                });
            };
            let r = 2 * m;
            add(&mut grid[r][r], a);
            add(&mut grid[r][r + 1], linalg::scaled(C64::new(1.0 / s, 0.0), b));
            add(&mut grid[r + 1][r], linalg::scaled(C64::new(s, 0.0), c));
            add(&mut grid[r + 1][r + 1], d);
        }
    }
    let c = linalg::block(sizes.clone(), sizes, grid);
    let minv = build_mass_preconditioner(system, ctx);
    Ok(linalg::product(vec![minv.clone(), c, minv]))
}

/// Per-row blocks of the opposite-order or OSRC preconditioner.
fn placed(system: &BlockSystem, ctx: &Context, spec: &PreconditionerSpec) -> Result<Action> {
    let nb = system.blocks.len();
    if system.rows.len() != nb {
        return Err(Error::Internal("row and block counts differ".into()));
    }
    let mut grid: Vec<Vec<Option<Action>>> = vec![vec![None; nb]; nb];
    let mut osrc_maps: Vec<Option<(Action, Action)>> = vec![None; ctx.count()];
    for (r, info) in system.rows.iter().enumerate() {
        let m = info.interface;
        if grid[info.slot].iter().any(|b| b.is_some()) {
            return Err(Error::Internal(format!("block {} receives two rows", info.slot)));
        }
        let minv = ctx.mass_inverse(m);
        let osrc = spec.kind == PreconditionerKind::Osrc;
        let block = match info.order {
            Order::Identity => minv,
            _ if osrc => {
                if osrc_maps[m].is_none() {
                    let k = match spec.osrc.wavenumber {
                        WavenumberChoice::Interior => ctx.k(m + 1),
                        WavenumberChoice::Exterior => ctx.k(0),
                    };
                    osrc_maps[m] = Some(build_osrc_actions(&ctx.locals[m], k, &spec.osrc)?);
                }
                let (ntd, dtn) = osrc_maps[m].clone().expect("built above");
                // the maps approximate minus the inverses of V and D
                let map = if info.order == Order::SingleLayer { dtn } else { ntd };
                linalg::scaled(C64::new(-1.0, 0.0), map)
            }
            order => {
                let kind = if order == Order::SingleLayer { D } else { V };
                linalg::product(vec![minv.clone(), ctx.operator_action(info.domain, kind, m, m)?, minv])
            }
        };
        grid[info.slot][r] = Some(linalg::scaled(C64::new(info.sign, 0.0), block));
    }
    let sizes: Vec<usize> = system.blocks.iter().map(|b| b.size).collect();
    Ok(linalg::block(sizes.clone(), sizes, grid))
}

/// Composes `spec` with the system: `(P A, P b)`.
pub fn attach_preconditioner(system: &BlockSystem, ctx: &Context, spec: &PreconditionerSpec) -> Result<PreconditionedSystem> {
    spec.check(system.spec.family)?;
    let p = match spec.kind {
        PreconditionerKind::Mass => build_mass_preconditioner(system, ctx),
        PreconditionerKind::CalderonDiagonal => build_calderon_preconditioner(system, ctx, false)?,
        PreconditionerKind::CalderonFull => build_calderon_preconditioner(system, ctx, true)?,
        PreconditionerKind::OppositeOrder | PreconditionerKind::Osrc => placed(system, ctx, spec)?,
    };
    let calderon_blocks = match spec.kind {
        PreconditionerKind::CalderonDiagonal | PreconditionerKind::CalderonFull => p.dense_products() / 4,
        _ => 0,
    };
    Ok(PreconditionedSystem {
        operator: linalg::product(vec![p.clone(), system.operator.clone()]),
        rhs: p.apply_vec(&system.rhs),
        preconditioner: p,
        kind: spec.kind,
        calderon_blocks,
    })
}
