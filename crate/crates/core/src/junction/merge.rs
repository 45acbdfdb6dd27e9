//! 2-to-1 merge with a priority parameter.
//!
//! The outgoing supply depends on the mixture of the two incoming attributes,
//! hence on the flux ratio `p = q1 / (q1 + q2)` only. Along the ratio the
//! supply is `K (w2 + p dw + delta)^e`, with one coefficient set on the
//! free-flow side of the outgoing road's sonic point and another on the
//! congested side. The solver first enforces the priority, then slides the
//! ratio towards the Pareto front of the admissible set when the priority
//! point is not itself Pareto optimal.
//!
//! Hard cases with `dw > 0` are solved by swapping the two incoming roads,
//! which turns them into the `dw < 0` cases.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::boundary::{reconstruct_boundary_state, BranchSide};
use super::single::modified_density;
use super::{tol_flux, validate_priority, JunctionSolution};
use crate::error::{Error, Result};
use crate::fundamental::{RoadParams, TrafficState};
use crate::numerics::bisect_decreasing;

/// `K (w + delta)^exponent`, one side of the supply-versus-attribute curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupplyBranch {
    pub k: f64,
    pub delta: f64,
    pub exponent: f64,
}

impl SupplyBranch {
    #[inline]
    pub fn eval(&self, w: f64) -> f64 {
        self.k * (w + self.delta).max(0.0).powf(self.exponent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeGeometry {
    pub w1: f64,
    pub w2: f64,
    /// `w1 - w2`.
    pub dw: f64,
    /// Speed of the initial state on the outgoing road.
    pub v3: f64,
    pub outgoing: RoadParams,
    /// Attribute at which the modified density reaches the sonic point.
    pub w_split: f64,
    /// Coefficients used while `w(p) <= w_split`.
    pub free: SupplyBranch,
    /// Coefficients used while `w(p) > w_split`.
    pub congested: SupplyBranch,
    /// Ratio at which `w(p) = w_split`; absent without mixing dependence.
    pub p_hat: Option<f64>,
    /// Stationary point of `q1(p) = p Sigma(p)`.
    pub p_star: Option<f64>,
    /// Stationary point of `q2(p) = (1 - p) Sigma(p)`.
    pub p_star2: Option<f64>,
}

impl MergeGeometry {
    pub fn new(w1: f64, w2: f64, outgoing: &RoadParams, v3: f64) -> Self {
        let RoadParams {
            rho_max,
            v_ref,
            gamma,
        } = *outgoing;
        let w_split = (gamma + 1.0) / gamma * v3;
        let free = SupplyBranch {
            k: (gamma / (gamma + 1.0)).powf((gamma + 1.0) / gamma) * rho_max
                / v_ref.powf(1.0 / gamma),
            delta: 0.0,
            exponent: (gamma + 1.0) / gamma,
        };
        let congested = SupplyBranch {
            k: v3 * rho_max * (gamma / v_ref).powf(1.0 / gamma),
            delta: -v3,
            exponent: 1.0 / gamma,
        };
        let dw = w1 - w2;
        let mut geometry = Self {
            w1,
            w2,
            dw,
            v3,
            outgoing: *outgoing,
            w_split,
            free,
            congested,
            p_hat: None,
            p_star: None,
            p_star2: None,
        };
        if !geometry.is_mixing_free() {
            let threshold = (2.0 * gamma + 1.0) / gamma * v3;
            geometry.p_hat = Some((w_split - w2) / dw);
            geometry.p_star = Some(if w2 <= threshold {
                -gamma / (2.0 * gamma + 1.0) * w2 / dw
            } else {
                -gamma / (gamma + 1.0) * (w2 - v3) / dw
            });
            geometry.p_star2 = Some(if w1 <= threshold {
                (1.0 - gamma * (2.0 * w2 - w1) / dw) / (2.0 * gamma + 1.0)
            } else {
                (1.0 - gamma * (w2 - v3) / dw) / (gamma + 1.0)
            });
        }
        geometry
    }

    /// Geometry with the two incoming roads swapped.
    pub fn mirrored(&self) -> Self {
        Self::new(self.w2, self.w1, &self.outgoing, self.v3)
    }

    /// `|dw|` too small for the supply to depend on the ratio.
    pub fn is_mixing_free(&self) -> bool {
        self.dw.abs() < 1e-12 * self.w1.max(self.w2).max(1.0)
    }

    /// Mixed attribute `w(p) = w2 + p dw`.
    #[inline]
    pub fn mixed_attribute(&self, p: f64) -> f64 {
        self.w2 + p * self.dw
    }

    pub fn branch_at(&self, p: f64) -> &SupplyBranch {
        if self.mixed_attribute(p) <= self.w_split {
            &self.free
        } else {
            &self.congested
        }
    }

    /// Outgoing supply when the incoming fluxes mix in ratio `p`.
    #[inline]
    pub fn sigma_tilde(&self, p: f64) -> f64 {
        let w = self.mixed_attribute(p);
        self.branch_at(p).eval(w)
    }

    /// Supply for a flux pair; `fallback_ratio` is used at `(0, 0)`.
    #[inline]
    pub fn supply_for(&self, q1: f64, q2: f64, fallback_ratio: f64) -> f64 {
        let total = q1 + q2;
        if total > 0.0 {
            self.sigma_tilde(q1 / total)
        } else {
            self.sigma_tilde(fallback_ratio)
        }
    }

    /// Boundary point of the supply constraint at ratio `p`.
    pub fn boundary_point(&self, p: f64) -> (f64, f64) {
        let s = self.sigma_tilde(p);
        (p * s, (1.0 - p) * s)
    }
}

/// Supply geometry of a merge from its three initial states.
pub fn merge_geometry(
    in1: (&RoadParams, TrafficState),
    in2: (&RoadParams, TrafficState),
    out: (&RoadParams, TrafficState),
) -> MergeGeometry {
    let w1 = in1.1.attribute(in1.0);
    let w2 = in2.1.attribute(in2.0);
    MergeGeometry::new(w1, w2, out.0, out.1.v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MergeCase {
    /// Supply binds at the priority ratio.
    E1,
    /// Road 1 demand binds; road 2 takes what is left.
    E2,
    /// Road 2 demand binds; road 1 takes what is left.
    E3,
    /// The stationary point of `q1` is feasible and reached.
    H1a,
    /// Road 1 demand binds below the stationary point.
    H1b,
    H2a,
    H2b,
    H2c,
}

/// Merge case and whether it was solved with the incoming roads swapped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CaseTag {
    pub case: MergeCase,
    pub mirrored: bool,
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}{}", self.case, if self.mirrored { "'" } else { "" })
    }
}

/// Which term of `min{D1/P, D2/(1-P), Sigma(P)}` is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Limiter {
    Supply,
    Demand1,
    Demand2,
}

/// Caps and reference points handed to the fixed-point solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeBounds {
    pub demand1: f64,
    pub demand2: f64,
    pub priority: f64,
    /// Fluxes `(P F(P), (1-P) F(P))` that enforce the priority.
    pub desired: (f64, f64),
    /// Boundary point at the stationary ratio, for the hard cases.
    pub star: Option<(f64, f64)>,
}

impl MergeBounds {
    fn mirrored(&self) -> Self {
        Self {
            demand1: self.demand2,
            demand2: self.demand1,
            priority: 1.0 - self.priority,
            desired: (self.desired.1, self.desired.0),
            star: self.star.map(|(a, b)| (b, a)),
        }
    }
}

/// Everything decided before the fixed-point solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeAnalysis {
    pub geometry: MergeGeometry,
    pub bounds: MergeBounds,
    /// Flux the outgoing road could take if the priority were enforced.
    pub priority_flux: f64,
    pub limiter: Limiter,
    pub tag: CaseTag,
}

fn limiter_of(geometry: &MergeGeometry, d1: f64, d2: f64, priority: f64) -> (Limiter, f64) {
    let supply = geometry.sigma_tilde(priority);
    let by1 = d1 / priority;
    let by2 = d2 / (1.0 - priority);
    if supply <= by1 && supply <= by2 {
        (Limiter::Supply, supply)
    } else if by1 <= by2 {
        (Limiter::Demand1, by1)
    } else {
        (Limiter::Demand2, by2)
    }
}

/// Step 1 of the merge solver and the case dispatch of step 2.
pub fn analyze_merge(
    in1: (&RoadParams, TrafficState),
    in2: (&RoadParams, TrafficState),
    out: (&RoadParams, TrafficState),
    priority: f64,
) -> Result<MergeAnalysis> {
    validate_priority(priority)?;
    for (p, s) in [in1, in2, out] {
        p.validate()?;
        s.validate()?;
    }
    let geometry = merge_geometry(in1, in2, out);
    let d1 = in1.0.demand(in1.1.rho, geometry.w1);
    let d2 = in2.0.demand(in2.1.rho, geometry.w2);
    let (limiter, priority_flux) = limiter_of(&geometry, d1, d2, priority);
    let desired = (priority * priority_flux, (1.0 - priority) * priority_flux);

    let easy = geometry.is_mixing_free()
        || (geometry.dw < 0.0 && geometry.p_star.is_some_and(|ps| priority <= ps))
        || (geometry.dw > 0.0 && geometry.p_star2.is_some_and(|ps| priority >= ps));

    let mut bounds = MergeBounds {
        demand1: d1,
        demand2: d2,
        priority,
        desired,
        star: None,
    };

    let tag = if easy {
        let case = match limiter {
            Limiter::Supply => MergeCase::E1,
            Limiter::Demand1 => MergeCase::E2,
            Limiter::Demand2 => MergeCase::E3,
        };
        CaseTag {
            case,
            mirrored: false,
        }
    } else {
        let mirrored = geometry.dw > 0.0;
        let (cgeom, cbounds, climiter) = if mirrored {
            let swapped = match limiter {
                Limiter::Supply => Limiter::Supply,
                Limiter::Demand1 => Limiter::Demand2,
                Limiter::Demand2 => Limiter::Demand1,
            };
            (geometry.mirrored(), bounds.mirrored(), swapped)
        } else {
            (geometry, bounds, limiter)
        };
        let p_star = cgeom.p_star.ok_or_else(|| Error::Numerical {
            context: "analyze_merge",
            detail: "stationary ratio missing in a hard case".into(),
        })?;
        let star = cgeom.boundary_point(p_star);
        let case = match climiter {
            Limiter::Supply if star.1 <= cbounds.demand2 => {
                if star.0 <= cbounds.demand1 {
                    MergeCase::H1a
                } else {
                    MergeCase::H1b
                }
            }
            Limiter::Supply => MergeCase::H2a,
            Limiter::Demand1 => MergeCase::H2b,
            Limiter::Demand2 => MergeCase::H2c,
        };
        bounds.star = Some(if mirrored { (star.1, star.0) } else { star });
        CaseTag { case, mirrored }
    };

    Ok(MergeAnalysis {
        geometry,
        bounds,
        priority_flux,
        limiter,
        tag,
    })
}

#[derive(Clone, Copy)]
enum Fixed {
    Q1(f64),
    Q2(f64),
}

/// Scalar fixed point along a line where one flux is held fixed:
/// `x = min{cap, max{lower, Sigma(pair) - fixed}}`.
fn solve_line(
    geometry: &MergeGeometry,
    fixed: Fixed,
    lower: f64,
    cap: f64,
    priority: f64,
    tol: f64,
) -> Result<f64> {
    let lower = lower.min(cap).max(0.0);
    let residual = |x: f64| {
        let (q1, q2, value) = match fixed {
            Fixed::Q1(v) => (v, x, v),
            Fixed::Q2(v) => (x, v, v),
        };
        let room = geometry.supply_for(q1, q2, priority) - value;
        cap.min(lower.max(room)) - x
    };
    bisect_decreasing(residual, lower, cap, 0.25 * tol, tol, "merge fixed point")
}

/// Unique solution of the min/max fixed-point system selected by `tag`.
pub fn fixed_point_ratio(
    geometry: &MergeGeometry,
    tag: CaseTag,
    bounds: &MergeBounds,
) -> Result<(f64, f64)> {
    if tag.mirrored {
        let (a, b) = solve_canonical(&geometry.mirrored(), tag.case, &bounds.mirrored())?;
        Ok((b, a))
    } else {
        solve_canonical(geometry, tag.case, bounds)
    }
}

fn solve_canonical(geometry: &MergeGeometry, case: MergeCase, b: &MergeBounds) -> Result<(f64, f64)> {
    let (d1, d2, prio) = (b.demand1, b.demand2, b.priority);
    let scale = d1.max(d2).max(b.desired.0 + b.desired.1);
    let tol = tol_flux(scale);
    let star = || {
        b.star.ok_or(Error::InvalidArgument(format!(
            "merge case {case:?} needs the stationary boundary point"
        )))
    };
    let fill_q2 = |lower: f64| solve_line(geometry, Fixed::Q1(d1), lower, d2, prio, tol);
    let fill_q1 = |lower: f64| solve_line(geometry, Fixed::Q2(d2), lower, d1, prio, tol);
    let (q1, q2) = match case {
        MergeCase::E1 => b.desired,
        MergeCase::E2 => (d1, fill_q2(b.desired.1)?),
        MergeCase::E3 | MergeCase::H2a | MergeCase::H2c => (fill_q1(b.desired.0)?, d2),
        MergeCase::H1a => star()?,
        MergeCase::H1b => (d1, fill_q2(star()?.1)?),
        MergeCase::H2b => {
            let (_, q2_star) = star()?;
            if q2_star >= d2 {
                (d1, d2)
            } else {
                (d1, fill_q2(q2_star)?)
            }
        }
    };
    Ok((q1.clamp(0.0, d1), q2.clamp(0.0, d2)))
}

/// Pareto-optimal priority-based solver for a 2-to-1 merge.
pub fn solve_merge(
    in1: (&RoadParams, TrafficState),
    in2: (&RoadParams, TrafficState),
    out: (&RoadParams, TrafficState),
    priority: f64,
) -> Result<JunctionSolution> {
    let analysis = analyze_merge(in1, in2, out, priority)?;
    let geometry = &analysis.geometry;
    let bounds = &analysis.bounds;
    let (q1, q2) = fixed_point_ratio(geometry, analysis.tag, bounds)?;
    let q3 = q1 + q2;
    let (w1, w2) = (geometry.w1, geometry.w2);
    let w_mix = if q3 > 0.0 {
        (q1 * w1 + q2 * w2) / q3
    } else {
        geometry.mixed_attribute(priority)
    };
    let ratio = if q3 > 0.0 { q1 / q3 } else { priority };

    let (p3, s3) = out;
    let supply = p3.supply(modified_density(p3, w_mix, s3.v), w_mix);
    let tol = tol_flux(bounds.demand1.max(bounds.demand2).max(supply));
    if q3 > supply + tol {
        return Err(Error::Numerical {
            context: "solve_merge",
            detail: format!(
                "outflow {q3} exceeds supply {supply} (case {}, q = ({q1}, {q2}))",
                analysis.tag
            ),
        });
    }

    let boundary_states = vec![
        reconstruct_boundary_state(
            in1.0,
            w1,
            q1,
            BranchSide::Incoming,
            in1.1,
            q1 >= bounds.demand1 - tol,
        )?,
        reconstruct_boundary_state(
            in2.0,
            w2,
            q2,
            BranchSide::Incoming,
            in2.1,
            q2 >= bounds.demand2 - tol,
        )?,
        reconstruct_boundary_state(p3, w_mix, q3, BranchSide::Outgoing, s3, q3 >= supply - tol)?,
    ];

    Ok(JunctionSolution {
        q: vec![q1, q2, q3],
        w_in: vec![w1, w2],
        w_out: vec![w_mix],
        boundary_states,
        ratio: Some(ratio),
        case: Some(analysis.tag),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn inflow_road() -> RoadParams {
        RoadParams::new(180.0, 100.0, 1.2).unwrap()
    }

    fn outflow_road() -> RoadParams {
        RoadParams::new(90.0, 100.0, 1.7).unwrap()
    }

    fn scenario(desired2: f64) -> [(RoadParams, TrafficState); 3] {
        let p = inflow_road();
        let p3 = outflow_road();
        let rho2 = p.equilibrium_density_for_flux(desired2).unwrap();
        [
            (p, TrafficState::equilibrium(&p, 30.0).unwrap()),
            (p, TrafficState::equilibrium(&p, rho2).unwrap()),
            (p3, TrafficState::equilibrium(&p3, 10.0).unwrap()),
        ]
    }

    fn solve_row(desired2: f64) -> JunctionSolution {
        let [a, b, c] = scenario(desired2);
        solve_merge((&a.0, a.1), (&b.0, b.1), (&c.0, c.1), 0.5).unwrap()
    }

    #[test]
    fn sigma_tilde_matches_supply_composition_at_ends() {
        let [a, b, c] = scenario(1750.0);
        let g = merge_geometry((&a.0, a.1), (&b.0, b.1), (&c.0, c.1));
        let p3 = c.0;
        for (p, w) in [(0.0, g.w2), (1.0, g.w1)] {
            let direct = p3.supply(modified_density(&p3, w, c.1.v), w);
            assert_relative_eq!(g.sigma_tilde(p), direct, max_relative = 1e-12);
        }
    }

    #[test]
    fn sigma_tilde_at_even_split_of_table_row() {
        let [a, b, c] = scenario(2000.0);
        let g = merge_geometry((&a.0, a.1), (&b.0, b.1), (&c.0, c.1));
        assert!((g.sigma_tilde(0.5) - 3890.6).abs() < 0.05);
    }

    #[test]
    fn no_mixing_dependence_without_attribute_gap() {
        let g = MergeGeometry::new(90.0, 90.0, &outflow_road(), 80.0);
        assert!(g.is_mixing_free());
        assert!(g.p_star.is_none() && g.p_star2.is_none() && g.p_hat.is_none());
        assert_eq!(g.sigma_tilde(0.1), g.sigma_tilde(0.9));
    }

    #[test]
    fn mirrored_stationary_points_swap() {
        for (w1, w2, v3) in [(90.0, 96.0, 88.0), (95.0, 80.0, 40.0), (60.0, 130.0, 20.0)] {
            let g = MergeGeometry::new(w1, w2, &outflow_road(), v3);
            let m = g.mirrored();
            assert_relative_eq!(m.p_star.unwrap(), 1.0 - g.p_star2.unwrap(), max_relative = 1e-12);
            assert_relative_eq!(m.p_star2.unwrap(), 1.0 - g.p_star.unwrap(), max_relative = 1e-12);
            assert_relative_eq!(m.p_hat.unwrap(), 1.0 - g.p_hat.unwrap(), max_relative = 1e-12);
        }
    }

    #[test]
    fn first_table_row_passes_both_demands() {
        let sol = solve_row(1000.0);
        assert_relative_eq!(sol.q[0], 2500.0, max_relative = 1e-9);
        assert_relative_eq!(sol.q[1], 1000.0, max_relative = 1e-9);
        assert_relative_eq!(sol.q[2], 3500.0, max_relative = 1e-9);
        assert!((sol.ratio.unwrap() - 0.714).abs() < 5e-4);
    }

    #[test]
    fn drop_onset_row() {
        let sol = solve_row(1500.0);
        assert!((sol.q[0] - 2413.1).abs() < 0.05, "{:?}", sol.q);
        assert_relative_eq!(sol.q[1], 1500.0, max_relative = 1e-9);
    }

    #[test]
    fn even_split_row() {
        let sol = solve_row(2000.0);
        assert!((sol.q[0] - 1945.3).abs() < 0.05);
        assert!((sol.q[1] - 1945.3).abs() < 0.05);
        assert_eq!(sol.case.unwrap().case, MergeCase::E1);
        assert_relative_eq!(sol.ratio.unwrap(), 0.5, max_relative = 1e-12);
    }

    #[test]
    fn symmetric_inputs_split_evenly() {
        let p = inflow_road();
        let p3 = outflow_road();
        let s = TrafficState::equilibrium(&p, 50.0).unwrap();
        let s3 = TrafficState::equilibrium(&p3, 40.0).unwrap();
        let sol = solve_merge((&p, s), (&p, s), (&p3, s3), 0.5).unwrap();
        assert_eq!(sol.q[0], sol.q[1]);
        assert_eq!(sol.q[0] + sol.q[1], sol.q[2]);
    }

    #[test]
    fn unconstrained_priority_is_enforced_when_supply_binds() {
        let p = inflow_road();
        let p3 = outflow_road();
        let s = TrafficState::equilibrium(&p, 60.0).unwrap();
        let s3 = TrafficState::equilibrium(&p3, 10.0).unwrap();
        let sol = solve_merge((&p, s), (&p, s), (&p3, s3), 0.7).unwrap();
        assert_eq!(sol.case.unwrap().case, MergeCase::E1);
        assert_relative_eq!(sol.ratio.unwrap(), 0.7, max_relative = 1e-12);
    }

    #[test]
    fn e1_returns_priority_point_without_iteration() {
        let g = MergeGeometry::new(93.0, 93.0, &outflow_road(), 88.0);
        let s = g.sigma_tilde(0.4);
        let bounds = MergeBounds {
            demand1: 1e4,
            demand2: 1e4,
            priority: 0.4,
            desired: (0.4 * s, 0.6 * s),
            star: None,
        };
        let tag = CaseTag {
            case: MergeCase::E1,
            mirrored: false,
        };
        assert_eq!(fixed_point_ratio(&g, tag, &bounds).unwrap(), bounds.desired);
    }

    #[test]
    fn e2_without_level_set_intersection_fills_road_two() {
        // supply far above both demands: the line q1 = D1 never meets the supply curve
        let g = MergeGeometry::new(93.0, 96.0, &outflow_road(), 88.0);
        let (d1, d2) = (500.0, 800.0);
        let prio = 0.5;
        assert!(g.supply_for(d1, d2, prio) - d1 > d2);
        let f = d1 / prio;
        let bounds = MergeBounds {
            demand1: d1,
            demand2: d2,
            priority: prio,
            desired: (prio * f, (1.0 - prio) * f),
            star: None,
        };
        let tag = CaseTag {
            case: MergeCase::E2,
            mirrored: false,
        };
        assert_eq!(fixed_point_ratio(&g, tag, &bounds).unwrap(), (d1, d2));
    }

    #[test]
    fn hard_case_without_star_point_is_rejected() {
        let g = MergeGeometry::new(90.0, 96.0, &outflow_road(), 88.0);
        let bounds = MergeBounds {
            demand1: 100.0,
            demand2: 100.0,
            priority: 0.5,
            desired: (50.0, 50.0),
            star: None,
        };
        let tag = CaseTag {
            case: MergeCase::H1a,
            mirrored: false,
        };
        assert!(fixed_point_ratio(&g, tag, &bounds).is_err());
    }
}
