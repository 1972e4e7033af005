use crate::assembly::OperatorKind::{D, K, T, V};
use crate::{Error, Result, C64};

use super::{AuxPotential, BlockSystem, Context, Elimination, Family, FormulationSpec, Layer, Unknown, Variant};

/// Solution on one interface.
///
/// `dirichlet` and `neumann` are the exterior traces of the total field.
/// The scattered field is `sum_n V0 a_n - K0 b_n` with `a = exterior_single`,
/// `b = exterior_double`; inside object `m` the field is
/// `V_m c - K_m d` with `c = interior_single`, `d = interior_double`.
#[derive(Debug, Clone)]
pub struct InterfaceTraces {
    pub dirichlet: Vec<C64>,
    pub neumann: Vec<C64>,
    pub exterior_single: Option<Vec<C64>>,
    pub exterior_double: Option<Vec<C64>>,
    pub interior_single: Option<Vec<C64>>,
    pub interior_double: Option<Vec<C64>>,
}

#[derive(Debug, Clone)]
pub struct SolutionTraces {
    pub spec: FormulationSpec,
    pub interfaces: Vec<InterfaceTraces>,
}

fn neg(x: &[C64]) -> Vec<C64> {
    x.iter().map(|v| -v).collect()
}

fn scale(x: &[C64], c: f64) -> Vec<C64> {
    x.iter().map(|v| v * c).collect()
}

fn axpy(y: &mut [C64], a: C64, x: &[C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Turns a solution vector of `system` into traces and potential densities.
pub fn recover_traces(ctx: &Context, system: &BlockSystem, x: &[C64]) -> Result<SolutionTraces> {
    if x.len() != system.dim() {
        return Err(Error::InvalidInput(format!("solution has {} entries, system has {}", x.len(), system.dim())));
    }
    let l = ctx.count();
    let get = |m: usize, u: Unknown| -> Result<Vec<C64>> {
        let b = system
            .find(m, u)
            .ok_or_else(|| Error::Internal(format!("block {u:?} of interface {m} is missing")))?;
        Ok(system.block(x, b))
    };
    let spec = &system.spec;
    let mut out = Vec::with_capacity(l);
    match (spec.family, &spec.variant) {
        (Family::Mtf, _) => {
            for m in 0..l {
                let (pd, pn) = (get(m, Unknown::ExteriorDirichlet)?, get(m, Unknown::ExteriorNeumann)?);
                out.push(InterfaceTraces {
                    exterior_single: Some(neg(&pn)),
                    exterior_double: Some(neg(&pd)),
                    interior_single: Some(get(m, Unknown::InteriorNeumann)?),
                    interior_double: Some(get(m, Unknown::InteriorDirichlet)?),
                    dirichlet: pd,
                    neumann: pn,
                });
            }
        }
        (Family::Aff, Variant::Aff(v)) => {
            for m in 0..l {
                let s = ctx.sigma(m);
                let minv = ctx.mass_inverse(m);
                let (t, interior_single, interior_double) = if v.potential == AuxPotential::Psi {
                    let a = get(m, Unknown::AuxPsi)?;
                    let phi = minv.apply_vec(&ctx.int(V, m)?.apply_vec(&a));
                    let mut r = ctx.int(T, m)?.apply_vec(&a);
                    axpy(&mut r, C64::new(0.5, 0.0), &ctx.mass(m).apply_vec(&a));
                    let psi = scale(&minv.apply_vec(&r), s);
                    ((phi, psi), Some(a), None)
                } else {
                    let a = get(m, Unknown::AuxPhi)?;
                    let psi = scale(&minv.apply_vec(&ctx.int(D, m)?.apply_vec(&a)), s);
                    let mut r = ctx.int(K, m)?.apply_vec(&a);
                    r = neg(&r);
                    axpy(&mut r, C64::new(0.5, 0.0), &ctx.mass(m).apply_vec(&a));
                    let phi = minv.apply_vec(&r);
                    ((phi, psi), None, Some(a))
                };
                out.push(InterfaceTraces {
                    exterior_single: Some(neg(&t.1)),
                    exterior_double: Some(neg(&t.0)),
                    interior_single,
                    interior_double,
                    dirichlet: t.0,
                    neumann: t.1,
                });
            }
        }
        (Family::Spf, Variant::Spf(v)) => {
            let (ext_u, int_u) = (
                if v.exterior == Layer::Single { Unknown::ExteriorSingleLayer } else { Unknown::ExteriorDoubleLayer },
                if v.interior == Layer::Single { Unknown::InteriorSingleLayer } else { Unknown::InteriorDoubleLayer },
            );
            let dens: Vec<Vec<C64>> = (0..l).map(|m| get(m, ext_u)).collect::<Result<_>>()?;
            for m in 0..l {
                let (phi, psi) = exterior_traces(ctx, system, m, v.exterior, &dens)?;
                let inner = get(m, int_u)?;
                let (is, id) = if v.interior == Layer::Single { (Some(inner), None) } else { (None, Some(inner)) };
                out.push(pack(phi, psi, v.exterior, dens[m].clone(), is, id));
            }
        }
        (Family::Mpf, Variant::Mpf(v)) => {
            let ext_u =
                if v.exterior == Layer::Single { Unknown::ExteriorSingleLayer } else { Unknown::ExteriorDoubleLayer };
            let dens: Vec<Vec<C64>> = (0..l).map(|m| get(m, ext_u)).collect::<Result<_>>()?;
            for m in 0..l {
                let s = ctx.sigma(m);
                let (phi, psi) = exterior_traces(ctx, system, m, v.exterior, &dens)?;
                // interior traces: phi- = phi, psi- = psi / s
                let (d, c) = match v.elimination {
                    Elimination::Dtn => (get(m, Unknown::Dirichlet)?, scale(&psi, 1.0 / s)),
                    Elimination::Ntd => (phi.clone(), scale(&get(m, Unknown::Neumann)?, 1.0 / s)),
                };
                out.push(pack(phi, psi, v.exterior, dens[m].clone(), Some(c), Some(d)));
            }
        }
        _ => {
            for m in 0..l {
                let s = ctx.sigma(m);
                let (phi, psi) = (get(m, Unknown::Dirichlet)?, get(m, Unknown::Neumann)?);
                out.push(InterfaceTraces {
                    exterior_single: Some(neg(&psi)),
                    exterior_double: Some(neg(&phi)),
                    interior_single: Some(scale(&psi, 1.0 / s)),
                    interior_double: Some(phi.clone()),
                    dirichlet: phi,
                    neumann: psi,
                });
            }
        }
    }
    Ok(SolutionTraces { spec: spec.clone(), interfaces: out })
}

fn pack(
    phi: Vec<C64>,
    psi: Vec<C64>,
    layer: Layer,
    density: Vec<C64>,
    interior_single: Option<Vec<C64>>,
    interior_double: Option<Vec<C64>>,
) -> InterfaceTraces {
    let (es, ed) = if layer == Layer::Single { (Some(density), None) } else { (None, Some(density)) };
    InterfaceTraces {
        dirichlet: phi,
        neumann: psi,
        exterior_single: es,
        exterior_double: ed,
        interior_single,
        interior_double,
    }
}

/// Exterior total traces on interface `m` from exterior-potential densities.
fn exterior_traces(
    ctx: &Context,
    system: &BlockSystem,
    m: usize,
    layer: Layer,
    dens: &[Vec<C64>],
) -> Result<(Vec<C64>, Vec<C64>)> {
    let (mut rd, mut rn) = system.incident[m].clone();
    let half = C64::new(0.5, 0.0);
    let one = C64::new(1.0, 0.0);
    for (n, a) in dens.iter().enumerate() {
        match layer {
            Layer::Single => {
                axpy(&mut rd, one, &ctx.ext(V, m, n)?.apply_vec(a));
                axpy(&mut rn, one, &ctx.ext(T, m, n)?.apply_vec(a));
                if n == m {
                    axpy(&mut rn, -half, &ctx.mass(m).apply_vec(a));
                }
            }
            Layer::Double => {
                axpy(&mut rd, -one, &ctx.ext(K, m, n)?.apply_vec(a));
                axpy(&mut rn, one, &ctx.ext(D, m, n)?.apply_vec(a));
                if n == m {
                    axpy(&mut rd, -half, &ctx.mass(m).apply_vec(a));
                }
            }
        }
    }
    let minv = ctx.mass_inverse(m);
    Ok((minv.apply_vec(&rd), minv.apply_vec(&rn)))
}
