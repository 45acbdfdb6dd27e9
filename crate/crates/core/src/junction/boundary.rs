//! Boundary states at a junction and their admissibility.
//!
//! A boundary state on branch `i` carries the branch flux `q_i` on the curve
//! of the attribute entering or leaving the junction through that branch.
//! It is admissible when every wave it generates against the branch's
//! initial state travels away from the junction: non-positive speeds on
//! incoming roads, non-negative speeds on outgoing roads.

use serde::{Deserialize, Serialize};

use super::single::modified_density;
use super::{solve, tol_flux, JunctionInput, JunctionSolution, JunctionSpec};
use crate::error::{Error, Result};
use crate::fundamental::{RoadParams, TrafficState, VACUUM_DENSITY};
use crate::numerics::bisect_root;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BranchSide {
    Incoming,
    Outgoing,
}

/// Solve `rho (w - p(rho)) = q` on the branch that keeps all waves outward.
///
/// Incoming roads take the congested root unless the demand bound is active,
/// in which case a free-flow initial state is kept as is and a congested one
/// opens to the sonic point. Outgoing roads take the free-flow root unless the
/// supply bound is active, in which case the state is the modified density
/// when that is congested and the sonic point otherwise.
pub fn reconstruct_boundary_state(
    params: &RoadParams,
    w: f64,
    q: f64,
    side: BranchSide,
    ref_state: TrafficState,
    bound_active: bool,
) -> Result<TrafficState> {
    let w = w.max(0.0);
    let capacity = params.capacity(w);
    let tol = tol_flux(capacity);
    if !(q <= capacity + tol) {
        return Err(Error::Infeasible {
            flux: q,
            capacity,
            w,
        });
    }
    let q = q.clamp(0.0, capacity);
    let sigma = params.sigma(w);
    let residual = |rho: f64| params.flux_on_curve(rho, w) - q;

    let rho = match side {
        BranchSide::Incoming if bound_active => {
            if ref_state.rho <= sigma {
                return Ok(ref_state);
            }
            sigma
        }
        BranchSide::Incoming => {
            if q >= capacity {
                sigma
            } else {
                bisect_root(residual, sigma, params.p_inv(w))
            }
        }
        BranchSide::Outgoing if bound_active => {
            let rho_mod = modified_density(params, w, ref_state.v);
            if rho_mod > sigma {
                rho_mod
            } else {
                sigma
            }
        }
        BranchSide::Outgoing => {
            if q >= capacity {
                sigma
            } else if q <= 0.0 {
                0.0
            } else {
                bisect_root(residual, 0.0, sigma)
            }
        }
    };
    let v = (w - params.p(rho)).max(0.0);
    Ok(TrafficState { rho, v })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Wave {
    /// First-family shock.
    Shock { speed: f64 },
    /// First-family rarefaction fan between two characteristic speeds.
    Rarefaction { tail: f64, head: f64 },
    /// Contact discontinuity travelling with the traffic.
    Contact { speed: f64 },
}

impl Wave {
    pub fn min_speed(&self) -> f64 {
        match *self {
            Wave::Shock { speed } | Wave::Contact { speed } => speed,
            Wave::Rarefaction { tail, head } => tail.min(head),
        }
    }

    pub fn max_speed(&self) -> f64 {
        match *self {
            Wave::Shock { speed } | Wave::Contact { speed } => speed,
            Wave::Rarefaction { tail, head } => tail.max(head),
        }
    }
}

/// Waves of the Riemann problem `(left, right)` on a single road.
///
/// The left state is joined along its own attribute curve to the
/// intermediate state `(p^-1(w_L - v_R), v_R)`, which is joined to the right
/// state by a contact.
pub fn riemann_waves(params: &RoadParams, left: TrafficState, right: TrafficState) -> Vec<Wave> {
    let w_left = left.attribute(params);
    let rho_mid = modified_density(params, w_left, right.v);
    let mut waves = Vec::with_capacity(2);

    // The 1-wave is trivial exactly when the speed does not change across it.
    // Comparing densities instead would amplify the roundoff of `w - v` when
    // the pressure is tiny next to the speed.
    let (rl, rm) = (left.rho, rho_mid);
    if (left.v - right.v).abs() > 1e-9 * w_left.max(1.0) && rl != rm {
        if rl < rm {
            let flux = |rho: f64| params.flux_on_curve(rho, w_left);
            let speed = (flux(rm) - flux(rl)) / (rm - rl);
            waves.push(Wave::Shock { speed });
        } else {
            waves.push(Wave::Rarefaction {
                tail: params.lambda1_on_curve(rl, w_left),
                head: params.lambda1_on_curve(rm, w_left),
            });
        }
    }

    if right.rho > VACUUM_DENSITY {
        let w_right = right.attribute(params);
        if (w_left - w_right).abs() > 1e-12 * w_left.max(w_right).max(1.0) {
            waves.push(Wave::Contact { speed: right.v });
        }
    }
    waves
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub branch: usize,
    pub side: BranchSide,
    pub wave: Wave,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub violations: Vec<Violation>,
}

impl AdmissibilityReport {
    pub fn is_admissible(&self) -> bool {
        self.violations.is_empty()
    }
}

fn speed_tol(params: &RoadParams) -> f64 {
    1e-7 * params.v_ref.max(1.0)
}

/// Check the wave-direction conditions on every branch of a solution.
pub fn check_admissibility(
    spec: &JunctionSpec,
    input: &JunctionInput,
    solution: &JunctionSolution,
) -> AdmissibilityReport {
    let n = spec.incoming.len();
    let mut violations = Vec::new();
    for (i, params) in spec.params().enumerate() {
        let initial = input.states[i];
        let boundary = solution.boundary_states[i];
        let tol = speed_tol(params);
        if i < n {
            for wave in riemann_waves(params, initial, boundary) {
                if wave.max_speed() > tol {
                    violations.push(Violation {
                        branch: i,
                        side: BranchSide::Incoming,
                        wave,
                    });
                }
            }
        } else {
            for wave in riemann_waves(params, boundary, initial) {
                if wave.min_speed() < -tol {
                    violations.push(Violation {
                        branch: i,
                        side: BranchSide::Outgoing,
                        wave,
                    });
                }
            }
        }
    }
    AdmissibilityReport { violations }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub first: JunctionSolution,
    pub second: JunctionSolution,
    /// Largest branch-flux change when the solver is applied to its own boundary states.
    pub max_deviation: f64,
}

/// Re-solve the junction from its own boundary states and report the flux drift.
pub fn check_consistency(spec: &JunctionSpec, input: &JunctionInput) -> Result<ConsistencyReport> {
    let first = solve(spec, input)?;
    let again = JunctionInput::new(first.boundary_states.clone());
    let second = solve(spec, &again)?;
    let max_deviation = first
        .q
        .iter()
        .zip(&second.q)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(ConsistencyReport {
        first,
        second,
        max_deviation,
    })
}
