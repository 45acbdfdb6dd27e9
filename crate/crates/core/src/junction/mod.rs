//! Riemann solvers at junctions.
//!
//! Three junction types are supported: a 1-to-1 interface (bottleneck or a
//! plain cell boundary), a 1-to-m diverge with fixed assignment rates, and a
//! 2-to-1 merge driven by a priority parameter. Every solver returns the
//! branch fluxes, the attribute carried into each outgoing road and the
//! boundary states whose waves all leave the junction.
//!
//! Branch order in inputs and solutions is always incoming roads first, then
//! outgoing roads.

mod boundary;
mod merge;
mod single;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fundamental::{RoadParams, TrafficState};

pub use boundary::{
    check_admissibility, check_consistency, reconstruct_boundary_state, riemann_waves,
    AdmissibilityReport, BranchSide, ConsistencyReport, Violation, Wave,
};
pub use merge::{
    analyze_merge, fixed_point_ratio, merge_geometry, solve_merge, CaseTag, MergeAnalysis,
    Limiter, MergeBounds, MergeCase, MergeGeometry, SupplyBranch,
};
pub use single::{modified_density, solve_diverge, solve_one_to_one};

/// Flux tolerance used by root-finders and feasibility checks.
pub fn tol_flux(scale: f64) -> f64 {
    1e-9 * scale.abs().max(1.0)
}

/// Tolerance on assignment rates summing to one.
pub const ALPHA_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RoadId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub road: RoadId,
    pub params: RoadParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum JunctionKind {
    OneToOne,
    /// Assignment rates, one per outgoing road.
    Diverge { alphas: Vec<f64> },
    /// Share of the merge outflow granted to the first incoming road.
    Merge { priority: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JunctionSpec {
    pub incoming: Vec<Branch>,
    pub outgoing: Vec<Branch>,
    pub kind: JunctionKind,
}

impl JunctionSpec {
    pub fn new(incoming: Vec<Branch>, outgoing: Vec<Branch>, kind: JunctionKind) -> Result<Self> {
        let spec = Self {
            incoming,
            outgoing,
            kind,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn arity(&self) -> usize {
        self.incoming.len() + self.outgoing.len()
    }

    pub fn params(&self) -> impl Iterator<Item = &RoadParams> {
        self.incoming.iter().chain(&self.outgoing).map(|b| &b.params)
    }

    pub fn validate(&self) -> Result<()> {
        for p in self.params() {
            p.validate()?;
        }
        let (n, m) = (self.incoming.len(), self.outgoing.len());
        match &self.kind {
            JunctionKind::OneToOne => {
                if (n, m) != (1, 1) {
                    return Err(Error::InvalidJunction(format!(
                        "1-to-1 junction needs 1 incoming and 1 outgoing road, got {n}x{m}"
                    )));
                }
            }
            JunctionKind::Diverge { alphas } => {
                if n != 1 || m < 1 {
                    return Err(Error::InvalidJunction(format!(
                        "diverge needs 1 incoming and at least 1 outgoing road, got {n}x{m}"
                    )));
                }
                validate_alphas(alphas, m)?;
            }
            JunctionKind::Merge { priority } => {
                if (n, m) != (2, 1) {
                    return Err(Error::InvalidJunction(format!(
                        "merge needs 2 incoming and 1 outgoing road, got {n}x{m}"
                    )));
                }
                validate_priority(*priority)?;
            }
        }
        Ok(())
    }
}

pub(crate) fn validate_priority(priority: f64) -> Result<()> {
    if !(priority > 0.0 && priority < 1.0) {
        return Err(Error::InvalidJunction(format!(
            "merge priority must lie in ]0,1[, got {priority}"
        )));
    }
    Ok(())
}

/// Rates in `]0,1[` summing to one. A single outgoing road takes the rate 1,
/// which is the 1-to-1 junction.
pub(crate) fn validate_alphas(alphas: &[f64], outgoing: usize) -> Result<()> {
    if alphas.len() != outgoing {
        return Err(Error::InvalidJunction(format!(
            "expected {outgoing} assignment rates, got {}",
            alphas.len()
        )));
    }
    if outgoing == 1 {
        if (alphas[0] - 1.0).abs() > ALPHA_SUM_TOL {
            return Err(Error::InvalidJunction(format!(
                "single outgoing road needs rate 1, got {}",
                alphas[0]
            )));
        }
        return Ok(());
    }
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(Error::InvalidJunction(format!(
            "assignment rate {a} outside ]0,1[; drop the road and use fewer branches"
        )));
    }
    let sum: f64 = alphas.iter().sum();
    if (sum - 1.0).abs() > ALPHA_SUM_TOL {
        return Err(Error::InvalidJunction(format!(
            "assignment rates sum to {sum}, expected 1"
        )));
    }
    Ok(())
}

/// Riemann data: one constant state per branch, incoming first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JunctionInput {
    pub states: Vec<TrafficState>,
}

impl JunctionInput {
    pub fn new(states: Vec<TrafficState>) -> Self {
        Self { states }
    }

    pub fn validate(&self, spec: &JunctionSpec) -> Result<()> {
        if self.states.len() != spec.arity() {
            return Err(Error::InvalidJunction(format!(
                "junction has {} branches but {} states were given",
                spec.arity(),
                self.states.len()
            )));
        }
        self.states.iter().try_for_each(TrafficState::validate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JunctionSolution {
    /// Flux per branch, incoming first.
    pub q: Vec<f64>,
    /// Attribute of each incoming road.
    pub w_in: Vec<f64>,
    /// Mixed attribute entering each outgoing road.
    pub w_out: Vec<f64>,
    /// Boundary state per branch, incoming first.
    pub boundary_states: Vec<TrafficState>,
    /// Realised share `q1 / (q1 + q2)` of a merge.
    pub ratio: Option<f64>,
    pub case: Option<CaseTag>,
}

impl JunctionSolution {
    pub fn incoming_flux(&self) -> f64 {
        self.q[..self.w_in.len()].iter().sum()
    }

    pub fn outgoing_flux(&self) -> f64 {
        self.q[self.w_in.len()..].iter().sum()
    }

    /// Attribute carried by branch `i` (incoming attribute or outgoing mixture).
    pub fn attribute(&self, i: usize) -> f64 {
        let n = self.w_in.len();
        if i < n {
            self.w_in[i]
        } else {
            self.w_out[i - n]
        }
    }

    pub fn momentum_in(&self) -> f64 {
        self.w_in.iter().zip(&self.q).map(|(w, q)| w * q).sum()
    }

    pub fn momentum_out(&self) -> f64 {
        let n = self.w_in.len();
        self.w_out.iter().zip(&self.q[n..]).map(|(w, q)| w * q).sum()
    }
}

/// Solve the Riemann problem at a junction.
pub fn solve(spec: &JunctionSpec, input: &JunctionInput) -> Result<JunctionSolution> {
    spec.validate()?;
    input.validate(spec)?;
    let s = &input.states;
    match &spec.kind {
        JunctionKind::OneToOne => solve_one_to_one(
            (&spec.incoming[0].params, s[0]),
            (&spec.outgoing[0].params, s[1]),
        ),
        JunctionKind::Diverge { alphas } => {
            let outs: Vec<_> = spec
                .outgoing
                .iter()
                .zip(&s[1..])
                .map(|(b, st)| (b.params, *st))
                .collect();
            solve_diverge((&spec.incoming[0].params, s[0]), &outs, alphas)
        }
        JunctionKind::Merge { priority } => solve_merge(
            (&spec.incoming[0].params, s[0]),
            (&spec.incoming[1].params, s[1]),
            (&spec.outgoing[0].params, s[2]),
            *priority,
        ),
    }
}
