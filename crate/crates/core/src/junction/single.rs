//! Junctions with a single incoming road: 1-to-1 and 1-to-m diverge.

use super::boundary::{reconstruct_boundary_state, BranchSide};
use super::{tol_flux, validate_alphas, JunctionSolution};
use crate::error::{Error, Result};
use crate::fundamental::{RoadParams, TrafficState};

/// Density on an outgoing road after the contact wave that carries `w_in`
/// into it at the unchanged speed `v_out`: `p^-1(max(0, w_in - v_out))`.
pub fn modified_density(out_road: &RoadParams, w_in: f64, v_out: f64) -> f64 {
    out_road.p_inv((w_in - v_out).max(0.0))
}

/// Flux maximisation across a single interface.
pub fn solve_one_to_one(
    incoming: (&RoadParams, TrafficState),
    outgoing: (&RoadParams, TrafficState),
) -> Result<JunctionSolution> {
    let (p1, s1) = incoming;
    let (p2, s2) = outgoing;
    let w1 = s1.attribute(p1);
    let demand = p1.demand(s1.rho, w1);
    let rho_mod = modified_density(p2, w1, s2.v);
    let supply = p2.supply(rho_mod, w1);
    let q = demand.min(supply);

    let tol = tol_flux(demand.max(supply));
    let b1 = reconstruct_boundary_state(p1, w1, q, BranchSide::Incoming, s1, q >= demand - tol)?;
    let b2 = reconstruct_boundary_state(p2, w1, q, BranchSide::Outgoing, s2, q >= supply - tol)?;

    Ok(JunctionSolution {
        q: vec![q, q],
        w_in: vec![w1],
        w_out: vec![w1],
        boundary_states: vec![b1, b2],
        ratio: None,
        case: None,
    })
}

/// Split `total` by `alphas` so that summing the parts left to right gives
/// `total` exactly. All but the last part are rounded to multiples of the ulp
/// of `total`, which makes every partial sum and the remainder exact.
fn split_exact(total: f64, alphas: &[f64]) -> Vec<f64> {
    if total <= 0.0 {
        return vec![0.0; alphas.len()];
    }
    let ulp = total.next_up() - total;
    let mut parts = Vec::with_capacity(alphas.len());
    let mut assigned = 0.0;
    for a in &alphas[..alphas.len() - 1] {
        let part = ((a * total / ulp).round() * ulp).min(total - assigned);
        assigned += part;
        parts.push(part);
    }
    parts.push(total - assigned);
    parts
}

/// 1-to-m diverge with fixed assignment rates.
///
/// The incoming flux is the largest value allowed by the demand and by every
/// scaled supply `Sigma_j / alpha_j`; all outgoing roads inherit the incoming
/// attribute. Outgoing fluxes balance the incoming one to the last bit.
pub fn solve_diverge(
    incoming: (&RoadParams, TrafficState),
    outgoing: &[(RoadParams, TrafficState)],
    alphas: &[f64],
) -> Result<JunctionSolution> {
    validate_alphas(alphas, outgoing.len())?;
    let (p1, s1) = incoming;
    let w1 = s1.attribute(p1);
    let demand = p1.demand(s1.rho, w1);

    let supplies: Vec<f64> = outgoing
        .iter()
        .map(|(p, s)| p.supply(modified_density(p, w1, s.v), w1))
        .collect();
    let q1 = supplies
        .iter()
        .zip(alphas)
        .map(|(sup, a)| sup / a)
        .fold(demand, f64::min);

    let m = outgoing.len();
    let mut q = Vec::with_capacity(m + 1);
    q.push(q1);
    q.extend(split_exact(q1, alphas));

    let scale = supplies.iter().copied().fold(demand, f64::max);
    let tol = tol_flux(scale);
    let mut boundary_states = Vec::with_capacity(m + 1);
    boundary_states.push(reconstruct_boundary_state(
        p1,
        w1,
        q1,
        BranchSide::Incoming,
        s1,
        q1 >= demand - tol,
    )?);
    for (j, ((p, s), sup)) in outgoing.iter().zip(&supplies).enumerate() {
        let qj = q[j + 1];
        if qj > sup + tol {
            return Err(Error::Numerical {
                context: "solve_diverge",
                detail: format!("branch {j} flux {qj} exceeds supply {sup}"),
            });
        }
        boundary_states.push(reconstruct_boundary_state(
            p,
            w1,
            qj.min(*sup),
            BranchSide::Outgoing,
            *s,
            qj >= sup - tol,
        )?);
    }

    Ok(JunctionSolution {
        q,
        w_in: vec![w1],
        w_out: vec![w1; m],
        boundary_states,
        ratio: None,
        case: None,
    })
}
