use crate::assembly::OperatorKind::{D, K, T, V};
use crate::linalg::{self, Action};
use crate::{Error, Result, C64};

use super::{
    layout, real, weigh, AuxPotential, Context, Coupling, Family, FormulationSpec, Order, Parts, Row, RowInfo, Unknown, Variant,
};

type Incident = [(Vec<C64>, Vec<C64>)];

fn zero(n: usize) -> Vec<C64> {
    vec![C64::new(0.0, 0.0); n]
}

/// The four Calderón rows of interface `m` on the (phi, psi) layout.
struct TraceRows {
    ext_d: Action,
    ext_n: Action,
    int_d: Action,
    int_n: Action,
}

fn trace_rows(ctx: &Context, m: usize, need: [bool; 4]) -> Result<TraceRows> {
    let l = ctx.count();
    let cols: Vec<usize> = (0..l).flat_map(|n| [ctx.dofs(n); 2]).collect();
    let rows = ctx.dofs(m);
    let half_mass = || linalg::scaled(real(0.5), ctx.mass(m));
    let s = ctx.sigma(m);
    let empty = || linalg::block(vec![rows], cols.clone(), vec![vec![None; 2 * l]]);
    let mut out = TraceRows { ext_d: empty(), ext_n: empty(), int_d: empty(), int_n: empty() };
    if need[0] {
        let mut r = Row::new(2 * l);
        r.add(2 * m, half_mass());
        for n in 0..l {
            r.add(2 * n, linalg::scaled(real(-1.0), ctx.ext(K, m, n)?));
            r.add(2 * n + 1, ctx.ext(V, m, n)?);
        }
        out.ext_d = r.into_action(rows, &cols);
    }
    if need[1] {
        let mut r = Row::new(2 * l);
        r.add(2 * m + 1, half_mass());
        for n in 0..l {
            r.add(2 * n, ctx.ext(D, m, n)?);
            r.add(2 * n + 1, ctx.ext(T, m, n)?);
        }
        out.ext_n = r.into_action(rows, &cols);
    }
    if need[2] {
        let mut r = Row::new(2 * l);
        r.add(2 * m, half_mass());
        r.add(2 * m, ctx.int(K, m)?);
        r.add(2 * m + 1, linalg::scaled(real(-1.0 / s), ctx.int(V, m)?));
        out.int_d = r.into_action(rows, &cols);
    }
    if need[3] {
        let mut r = Row::new(2 * l);
        r.add(2 * m + 1, half_mass());
        r.add(2 * m, linalg::scaled(real(-s), ctx.int(D, m)?));
        r.add(2 * m + 1, linalg::scaled(real(-1.0), ctx.int(T, m)?));
        out.int_n = r.into_action(rows, &cols);
    }
    Ok(out)
}

fn info(m: usize, slot: usize, order: Order, sign: f64, domain: usize) -> RowInfo {
    RowInfo { interface: m, slot, order, sign, domain }
}

/// Dirichlet, Neumann, PMCHWT, Müller and the combined families.
pub(super) fn single_trace(spec: &FormulationSpec, ctx: &Context, inc: &Incident) -> Result<Parts> {
    let blocks = layout(ctx, &[Unknown::Dirichlet, Unknown::Neumann]);
    let mut rows = Vec::new();
    let c = spec.coefficients();
    for m in 0..ctx.count() {
        let n = ctx.dofs(m);
        let (gd, gn) = (&inc[m].0, &inc[m].1);
        let (phi, psi) = (2 * m, 2 * m + 1);
        let need = match spec.family {
            Family::Dirichlet => [true, false, true, false],
            Family::Neumann => [false, true, false, true],
            f if f.is_combined() => {
                let z = |x: &Coupling| x.is_zero();
                [!z(&c.eta_plus), !z(&c.nu_plus), !z(&c.eta_minus), !z(&c.nu_minus)]
            }
            _ => [true; 4],
        };
        let tr = trace_rows(ctx, m, need)?;
        let sl = info(m, psi, Order::SingleLayer, 1.0, 0);
        let hs = info(m, phi, Order::Hypersingular, 1.0, 0);
        match spec.family {
            Family::Dirichlet => {
                rows.push((info(m, phi, Order::Identity, 1.0, 0), tr.ext_d, gd.clone()));
                rows.push((info(m, psi, Order::SingleLayer, -1.0, m + 1), tr.int_d, zero(n)));
            }
            Family::Neumann => {
                rows.push((hs, tr.ext_n, gn.clone()));
                rows.push((info(m, psi, Order::Identity, 1.0, 0), tr.int_n, zero(n)));
            }
            Family::Pmchwt | Family::Muller => {
                let sign = if spec.family == Family::Pmchwt { -1.0 } else { 1.0 };
                let d = linalg::lin_comb(vec![(real(1.0), tr.ext_d), (real(sign), tr.int_d)]);
                let nn = linalg::lin_comb(vec![(real(1.0), tr.ext_n), (real(sign), tr.int_n)]);
                if spec.family == Family::Pmchwt {
                    rows.push((sl, d, gd.clone()));
                    rows.push((hs, nn, gn.clone()));
                } else {
                    rows.push((info(m, phi, Order::Identity, 1.0, 0), d, gd.clone()));
                    rows.push((info(m, psi, Order::Identity, 1.0, 0), nn, gn.clone()));
                }
            }
            Family::CombinedTrace | Family::CombinedDomain | Family::CombinedMixed => {
                let z = zero(n);
                let pairs = match spec.family {
                    Family::CombinedTrace => [
                        [(&c.eta_plus, &tr.ext_d, gd), (&c.eta_minus, &tr.int_d, &z)],
                        [(&c.nu_plus, &tr.ext_n, gn), (&c.nu_minus, &tr.int_n, &z)],
                    ],
                    Family::CombinedDomain => [
                        [(&c.eta_plus, &tr.ext_d, gd), (&c.nu_plus, &tr.ext_n, gn)],
                        [(&c.eta_minus, &tr.int_d, &z), (&c.nu_minus, &tr.int_n, &z)],
                    ],
                    _ => [
                        [(&c.eta_plus, &tr.ext_d, gd), (&c.nu_minus, &tr.int_n, &z)],
                        [(&c.nu_plus, &tr.ext_n, gn), (&c.eta_minus, &tr.int_d, &z)],
                    ],
                };
                for (pair, ri) in pairs.into_iter().zip([sl, hs]) {
                    let mut acts = Vec::new();
                    let mut rhs = zero(n);
                    for (coef, row, g) in pair {
                        if coef.is_zero() {
                            continue;
                        }
                        let (a, r) = weigh(ctx, m, coef, &spec.osrc, row.clone(), g)?;
                        acts.push(a);
                        for (x, y) in rhs.iter_mut().zip(r) {
                            *x += y;
                        }
                    }
                    rows.push((ri, linalg::sum(acts), rhs));
                }
            }
            _ => return Err(Error::Internal(format!("{} is not a single-trace family", spec.family.id()))),
        }
    }
    Ok(Parts { blocks, rows, right: None })
}

/// Multiple-traces formulation on (phi+, psi+, phi-, psi-) per interface.
pub(super) fn mtf(ctx: &Context, inc: &Incident) -> Result<Parts> {
    let l = ctx.count();
    let blocks = layout(
        ctx,
        &[Unknown::ExteriorDirichlet, Unknown::ExteriorNeumann, Unknown::InteriorDirichlet, Unknown::InteriorNeumann],
    );
    let cols: Vec<usize> = blocks.iter().map(|b| b.size).collect();
    let mut rows = Vec::new();
    for m in 0..l {
        let n = ctx.dofs(m);
        let s = ctx.sigma(m);
        let b = 4 * m;
        let mass = |c: f64| linalg::scaled(real(c), ctx.mass(m));

        let mut ed = Row::new(4 * l);
        ed.add(b + 2, mass(0.5));
        let mut en = Row::new(4 * l);
        en.add(b + 3, mass(0.5 * s));
        for j in 0..l {
            ed.add(4 * j, linalg::scaled(real(-1.0), ctx.ext(K, m, j)?));
            ed.add(4 * j + 1, ctx.ext(V, m, j)?);
            en.add(4 * j, ctx.ext(D, m, j)?);
            en.add(4 * j + 1, ctx.ext(T, m, j)?);
        }
        let mut id = Row::new(4 * l);
        id.add(b, mass(-0.5));
        id.add(b + 2, linalg::scaled(real(-1.0), ctx.int(K, m)?));
        id.add(b + 3, ctx.int(V, m)?);
        let mut inn = Row::new(4 * l);
        inn.add(b + 1, mass(-0.5 / s));
        inn.add(b + 2, ctx.int(D, m)?);
        inn.add(b + 3, ctx.int(T, m)?);

        rows.push((info(m, b + 1, Order::SingleLayer, 1.0, 0), ed.into_action(n, &cols), inc[m].0.clone()));
        rows.push((info(m, b, Order::Hypersingular, 1.0, 0), en.into_action(n, &cols), inc[m].1.clone()));
        rows.push((info(m, b + 3, Order::SingleLayer, 1.0, m + 1), id.into_action(n, &cols), zero(n)));
        rows.push((info(m, b + 2, Order::Hypersingular, 1.0, m + 1), inn.into_action(n, &cols), zero(n)));
    }
    Ok(Parts { blocks, rows, right: None })
}

/// Auxiliary-field formulations.
///
/// The trace built from one interior operator (`V_n psi^` or `D_n phi^`) is
/// computed once per interface and shared by all rows; the other one is
/// formed inside each block.
pub(super) fn aff(spec: &FormulationSpec, ctx: &Context, inc: &Incident) -> Result<Parts> {
    let Variant::Aff(v) = spec.variant else {
        return Err(Error::Internal("auxiliary-field builder without its variant".into()));
    };
    let l = ctx.count();
    let aux = if v.potential == AuxPotential::Psi { Unknown::AuxPsi } else { Unknown::AuxPhi };
    let blocks = layout(ctx, &[aux]);
    let sizes: Vec<usize> = blocks.iter().map(|b| b.size).collect();

    // stage one: x -> (shared_1..shared_l, x_1..x_l), shared traces as residuals
    let shared_op = |n: usize| if v.potential == AuxPotential::Psi { ctx.int(V, n) } else { ctx.int(D, n) };
    let mut stage = vec![vec![None; l]; 2 * l];
    for n in 0..l {
        stage[n][n] = Some(shared_op(n)?);
        stage[l + n][n] = Some(linalg::identity(sizes[n]));
    }
    let mut mid = sizes.clone();
    mid.extend(sizes.iter().copied());
    let stage = linalg::block(mid.clone(), sizes.clone(), stage);

    // per-block trace built from the auxiliary unknown, as coefficients
    let other = |n: usize| -> Result<Action> {
        let s = ctx.sigma(n);
        Ok(if v.potential == AuxPotential::Psi {
            // psi_n = s M^-1 (M/2 + T_n) psi^
            linalg::scaled(
                real(s),
                linalg::product(vec![
                    ctx.mass_inverse(n),
                    linalg::sum(vec![linalg::scaled(real(0.5), ctx.mass(n)), ctx.int(T, n)?]),
                ]),
            )
        } else {
            // phi_n = M^-1 (M/2 - K_n) phi^
            linalg::product(vec![
                ctx.mass_inverse(n),
                linalg::sum(vec![linalg::scaled(real(0.5), ctx.mass(n)), linalg::scaled(real(-1.0), ctx.int(K, n)?)]),
            ])
        })
    };
    // shared residual -> trace coefficients
    let from_shared = |n: usize| -> Action {
        if v.potential == AuxPotential::Psi {
            ctx.mass_inverse(n)
        } else {
            linalg::scaled(real(ctx.sigma(n)), ctx.mass_inverse(n))
        }
    };

    let mut rows = Vec::new();
    for m in 0..l {
        let nm = ctx.dofs(m);
        let mut row = Row::new(2 * l);
        let mut rhs = zero(nm);
        for (w, dir) in [(v.dirichlet, true), (v.neumann, false)] {
            if w.norm() == 0.0 {
                continue;
            }
            let g = if dir { &inc[m].0 } else { &inc[m].1 };
            for (r, gi) in rhs.iter_mut().zip(g) {
                *r += w * gi;
            }
            for n in 0..l {
                // Dirichlet row: M/2 phi_m - K0 phi_n + V0 psi_n; Neumann row: M/2 psi_m + D0 phi_n + T0 psi_n
                let (phi_op, psi_op) = if dir {
                    (linalg::scaled(real(-1.0), ctx.ext(K, m, n)?), ctx.ext(V, m, n)?)
                } else {
                    (ctx.ext(D, m, n)?, ctx.ext(T, m, n)?)
                };
                let half = |n: usize| linalg::scaled(real(0.5), ctx.mass(n));
                let (phi_op, psi_op) = match (m == n, dir) {
                    (true, true) => (linalg::sum(vec![half(n), phi_op]), psi_op),
                    (true, false) => (phi_op, linalg::sum(vec![half(n), psi_op])),
                    _ => (phi_op, psi_op),
                };
                let (shared_side, other_side) =
                    if v.potential == AuxPotential::Psi { (phi_op, psi_op) } else { (psi_op, phi_op) };
                row.add(n, linalg::scaled(w, linalg::product(vec![shared_side, from_shared(n)])));
                row.add(l + n, linalg::scaled(w, linalg::product(vec![other_side, other(n)?])));
            }
        }
        let order = match (v.potential, v.dirichlet.norm() > 0.0, v.neumann.norm() > 0.0) {
            (AuxPotential::Psi, true, false) => Order::SingleLayer,
            (AuxPotential::Phi, false, true) => Order::Hypersingular,
            _ => Order::Identity,
        };
        rows.push((info(m, m, order, 1.0, 0), row.into_action(nm, &mid), rhs));
    }
    Ok(Parts { blocks, rows, right: Some(stage) })
}
