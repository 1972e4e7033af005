use crate::assembly::OperatorKind::{D, K, T, V};
use crate::linalg::{self, Action};
use crate::{Error, Result, C64};

use super::{
    layout, real, Context, Elimination, FormulationSpec, Layer, Multiplier, Order, Parts, Row, RowInfo, Unknown,
    Variant,
};

type Incident = [(Vec<C64>, Vec<C64>)];

fn info(m: usize, slot: usize, order: Order, sign: f64, domain: usize) -> RowInfo {
    RowInfo { interface: m, slot, order, sign, domain }
}

fn neg(a: Action) -> Action {
    linalg::scaled(real(-1.0), a)
}

/// `c M` on interface `m`.
fn mass(ctx: &Context, m: usize, c: f64) -> Action {
    linalg::scaled(real(c), ctx.mass(m))
}

/// Dirichlet and Neumann jumps of the exterior potential with density on
/// interface `n`, seen from interface `m`: the part of the exterior trace
/// rows that the density contributes, with the sign of `interior - exterior`.
fn exterior_parts(ctx: &Context, layer: Layer, m: usize, n: usize) -> Result<(Action, Action)> {
    let own = m == n;
    Ok(match layer {
        // -V0 psi ; M/2 psi - T0 psi
        Layer::Single => {
            let d = neg(ctx.ext(V, m, n)?);
            let t = neg(ctx.ext(T, m, n)?);
            (d, if own { linalg::sum(vec![mass(ctx, m, 0.5), t]) } else { t })
        }
        // M/2 phi + K0 phi ; -D0 phi
        Layer::Double => {
            let k = ctx.ext(K, m, n)?;
            (if own { linalg::sum(vec![mass(ctx, m, 0.5), k]) } else { k }, neg(ctx.ext(D, m, n)?))
        }
    })
}

fn exterior_unknown(layer: Layer) -> Unknown {
    if layer == Layer::Single {
        Unknown::ExteriorSingleLayer
    } else {
        Unknown::ExteriorDoubleLayer
    }
}

/// Single-potential formulations: one interior and one exterior density per
/// interface, coupled by the two transmission conditions.
pub(super) fn spf(spec: &FormulationSpec, ctx: &Context, inc: &Incident) -> Result<Parts> {
    let Variant::Spf(v) = spec.variant else {
        return Err(Error::Internal("single-potential builder without its variant".into()));
    };
    let l = ctx.count();
    let interior = if v.interior == Layer::Single { Unknown::InteriorSingleLayer } else { Unknown::InteriorDoubleLayer };
    let blocks = layout(ctx, &[interior, exterior_unknown(v.exterior)]);
    let cols: Vec<usize> = blocks.iter().map(|b| b.size).collect();
    let mut rows = Vec::new();
    for m in 0..l {
        let nm = ctx.dofs(m);
        let s = ctx.sigma(m);
        let mut dr = Row::new(2 * l);
        let mut nr = Row::new(2 * l);
        match v.interior {
            Layer::Single => {
                dr.add(2 * m, ctx.int(V, m)?);
                nr.add(2 * m, linalg::scaled(real(s), linalg::sum(vec![mass(ctx, m, 0.5), ctx.int(T, m)?])));
            }
            Layer::Double => {
                dr.add(2 * m, linalg::sum(vec![mass(ctx, m, 0.5), neg(ctx.int(K, m)?)]));
                nr.add(2 * m, linalg::scaled(real(s), ctx.int(D, m)?));
            }
        }
        for n in 0..l {
            let (d, nn) = exterior_parts(ctx, v.exterior, m, n)?;
            dr.add(2 * n + 1, d);
            nr.add(2 * n + 1, nn);
        }
        let d_info = match v.interior {
            Layer::Single => info(m, 2 * m, Order::SingleLayer, 1.0, m + 1),
            Layer::Double => info(m, 2 * m, Order::Identity, 1.0, 0),
        };
        let n_info = match v.exterior {
            Layer::Single => info(m, 2 * m + 1, Order::Identity, 1.0, 0),
            Layer::Double => info(m, 2 * m + 1, Order::Hypersingular, -1.0, 0),
        };
        rows.push((d_info, dr.into_action(nm, &cols), inc[m].0.clone()));
        rows.push((n_info, nr.into_action(nm, &cols), inc[m].1.clone()));
    }
    Ok(Parts { blocks, rows, right: None })
}

/// Mixed-potential formulations: an exterior density and one retained
/// interior trace per interface; the other trace is eliminated with an
/// interior Calderón identity applied blockwise.
pub(super) fn mpf(spec: &FormulationSpec, ctx: &Context, inc: &Incident) -> Result<Parts> {
    let Variant::Mpf(v) = spec.variant else {
        return Err(Error::Internal("mixed-potential builder without its variant".into()));
    };
    let l = ctx.count();
    let kept = if v.elimination == Elimination::Dtn { Unknown::Dirichlet } else { Unknown::Neumann };
    let blocks = layout(ctx, &[exterior_unknown(v.exterior), kept]);
    let cols: Vec<usize> = blocks.iter().map(|b| b.size).collect();
    let mut rows = Vec::new();
    for m in 0..l {
        let nm = ctx.dofs(m);
        let s = ctx.sigma(m);
        let (gd, gn) = (&inc[m].0, &inc[m].1);
        let half_plus_k = || -> Result<Action> { Ok(linalg::sum(vec![mass(ctx, m, 0.5), ctx.int(K, m)?])) };
        let half_minus_t = || -> Result<Action> { Ok(linalg::sum(vec![mass(ctx, m, 0.5), neg(ctx.int(T, m)?)])) };
        // the multiplier applied to the eliminated row and to its data
        let multiplier = || -> Result<Action> {
            Ok(match (v.elimination, v.multiplier) {
                (Elimination::Dtn, Multiplier::Ad) => half_minus_t()?,
                (Elimination::Dtn, Multiplier::Sl) => ctx.int(V, m)?,
                (Elimination::Ntd, Multiplier::Ad) => ctx.int(D, m)?,
                (Elimination::Ntd, Multiplier::Sl) => half_plus_k()?,
            })
        };
        let mut direct_row = Row::new(2 * l);
        let mut eliminated_row = Row::new(2 * l);
        for n in 0..l {
            let (d, nn) = exterior_parts(ctx, v.exterior, m, n)?;
            let (keep, elim) = if v.elimination == Elimination::Dtn { (d, nn) } else { (nn, d) };
            direct_row.add(2 * n, keep);
            eliminated_row.add(
                2 * n,
                linalg::product(vec![multiplier()?, ctx.mass_inverse(m), elim]),
            );
        }
        let kept_eliminated = match (v.elimination, v.multiplier) {
            (Elimination::Dtn, Multiplier::Ad) => linalg::scaled(real(s), ctx.int(D, m)?),
            (Elimination::Dtn, Multiplier::Sl) => linalg::scaled(real(s), half_plus_k()?),
            (Elimination::Ntd, Multiplier::Ad) => linalg::scaled(real(1.0 / s), half_minus_t()?),
            (Elimination::Ntd, Multiplier::Sl) => linalg::scaled(real(1.0 / s), ctx.int(V, m)?),
        };
        direct_row.add(2 * m + 1, ctx.mass(m));
        eliminated_row.add(2 * m + 1, kept_eliminated);
        let (direct_rhs, g_elim) = if v.elimination == Elimination::Dtn { (gd.clone(), gn) } else { (gn.clone(), gd) };
        let elim_rhs = multiplier()?.apply_vec(&ctx.mass_inverse(m).apply_vec(g_elim));
        let (i0, i1) = principal(v.exterior, v.elimination, v.multiplier, m);
        let (r_direct, r_elim) = (direct_row.into_action(nm, &cols), eliminated_row.into_action(nm, &cols));
        if v.elimination == Elimination::Dtn {
            rows.push((i0, r_direct, direct_rhs));
            rows.push((i1, r_elim, elim_rhs));
        } else {
            rows.push((i0, r_elim, elim_rhs));
            rows.push((i1, r_direct, direct_rhs));
        }
    }
    Ok(Parts { blocks, rows, right: None })
}

/// Leading parts of the two rows of interface `m`: the first row goes to
/// the exterior density, the second to the retained trace.
fn principal(ext: Layer, el: Elimination, mu: Multiplier, m: usize) -> (RowInfo, RowInfo) {
    use Layer::*;
    use Order::*;
    let (a, b) = (2 * m, 2 * m + 1);
    let id = |slot, sign| info(m, slot, Identity, sign, 0);
    match (ext, el, mu) {
        (Single, Elimination::Dtn, Multiplier::Ad) => (info(m, a, SingleLayer, -1.0, 0), info(m, b, Hypersingular, 1.0, m + 1)),
        (Single, Elimination::Dtn, Multiplier::Sl) => (info(m, a, SingleLayer, -1.0, 0), id(b, 1.0)),
        (Single, Elimination::Ntd, Multiplier::Ad) => (id(a, -1.0), id(b, 1.0)),
        (Single, Elimination::Ntd, Multiplier::Sl) => (info(m, a, SingleLayer, -1.0, 0), id(b, 1.0)),
        (Double, Elimination::Dtn, Multiplier::Ad) => (id(a, 1.0), info(m, b, Hypersingular, 1.0, m + 1)),
        (Double, Elimination::Dtn, Multiplier::Sl) => (id(a, 1.0), id(b, 1.0)),
        (Double, Elimination::Ntd, Multiplier::Ad) => (info(m, a, Hypersingular, 1.0, m + 1), id(b, 1.0)),
        (Double, Elimination::Ntd, Multiplier::Sl) => (id(a, 1.0), id(b, 1.0)),
    }
}
