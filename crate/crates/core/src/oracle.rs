//! Brute-force references for the junction solvers.
//!
//! Nothing here goes through the closed-form supply coefficients or the case
//! analysis of the merge solver: the outgoing supply of a flux pair is
//! recomputed from the mixed attribute, the modified density and the supply
//! function, and optimality is judged on a plain grid.

use std::io::{self, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fundamental::{RoadParams, TrafficState};
use crate::junction::tol_flux;

/// Initial data of a 2-to-1 merge plus the quantities the oracle needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeContext {
    pub roads: [RoadParams; 3],
    pub states: [TrafficState; 3],
    pub w1: f64,
    pub w2: f64,
    pub demand1: f64,
    pub demand2: f64,
}

impl MergeContext {
    pub fn new(roads: [RoadParams; 3], states: [TrafficState; 3]) -> Self {
        let w1 = states[0].attribute(&roads[0]);
        let w2 = states[1].attribute(&roads[1]);
        Self {
            roads,
            states,
            w1,
            w2,
            demand1: roads[0].demand(states[0].rho, w1),
            demand2: roads[1].demand(states[1].rho, w2),
        }
    }

    /// Supply of the outgoing road for a given mixed attribute.
    pub fn supply_at_attribute(&self, w: f64) -> f64 {
        let out = &self.roads[2];
        let excess = (w - self.states[2].v).max(0.0);
        let rho_mod = out.pressure_inv(excess).unwrap_or(0.0);
        out.supply(rho_mod, w)
    }

    /// Supply for the pair `(q1, q2)` through the flux-weighted attribute mixture.
    pub fn supply(&self, q1: f64, q2: f64) -> f64 {
        let total = q1 + q2;
        let w = (q1 * self.w1 + q2 * self.w2) / total;
        self.supply_at_attribute(w)
    }

    pub fn supply_at_ratio(&self, ratio: f64) -> f64 {
        self.supply_at_attribute(ratio * self.w1 + (1.0 - ratio) * self.w2)
    }

    pub fn tol(&self) -> f64 {
        let cap = self.roads[2].capacity(self.w1.max(self.w2));
        tol_flux(self.demand1.max(self.demand2).max(cap))
    }
}

/// Membership in the admissible set of the merge, with `tol` slack.
pub fn feasible_with_tol(ctx: &MergeContext, q1: f64, q2: f64, tol: f64) -> bool {
    if q1 < -tol || q2 < -tol || q1 > ctx.demand1 + tol || q2 > ctx.demand2 + tol {
        return false;
    }
    let total = q1.max(0.0) + q2.max(0.0);
    if total == 0.0 {
        return true;
    }
    total <= ctx.supply(q1.max(0.0), q2.max(0.0)) + tol
}

pub fn feasible(ctx: &MergeContext, q1: f64, q2: f64) -> bool {
    feasible_with_tol(ctx, q1, q2, ctx.tol())
}

/// Feasibility and Pareto flags on a regular grid over `[0, D1] x [0, D2]`.
///
/// The grid has `n + 1` nodes per axis, so the spacing is `D/n`. Points are
/// stored column by column: index `i * (n + 1) + k` holds `(i h1, k h2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleSample {
    pub n: usize,
    pub grid: Vec<(f64, f64)>,
    pub feasible: Vec<bool>,
    pub pareto: Vec<bool>,
    pub resolution: (f64, f64),
    /// Flux tolerance used for membership.
    pub tol: f64,
}

impl FeasibleSample {
    pub fn pareto_points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid
            .iter()
            .zip(&self.pareto)
            .filter(|(_, p)| **p)
            .map(|(q, _)| *q)
    }

    pub fn feasible_points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid
            .iter()
            .zip(&self.feasible)
            .filter(|(_, f)| **f)
            .map(|(q, _)| *q)
    }

    /// Feasible grid points that beat `(q1, q2)` by a full cell, and by more
    /// than the membership tolerance, in one flux without losing anything in
    /// the other.
    pub fn dominating(&self, q1: f64, q2: f64) -> Vec<(f64, f64)> {
        let (h1, h2) = self.resolution;
        let (m1, m2) = (h1.max(self.tol), h2.max(self.tol));
        self.feasible_points()
            .filter(|&(g1, g2)| {
                (h1 > 0.0 && g1 >= q1 + m1 && g2 >= q2) || (h2 > 0.0 && g2 >= q2 + m2 && g1 >= q1)
            })
            .collect()
    }

    /// CSV with header `q1,q2,feasible,pareto`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "q1,q2,feasible,pareto")?;
        for ((q1, q2), (f, p)) in self.grid.iter().zip(self.feasible.iter().zip(&self.pareto)) {
            writeln!(out, "{q1},{q2},{},{}", *f as u8, *p as u8)?;
        }
        Ok(())
    }
}

/// Default grid for acceptance runs.
pub const ACCEPTANCE_GRID: usize = 512;
/// Default grid for property sweeps.
pub const SWEEP_GRID: usize = 128;

/// Sample the admissible set and its Pareto front on an `(n+1) x (n+1)` grid.
///
/// `threads` is a parallelism hint; results do not depend on it.
pub fn sample_pareto(ctx: &MergeContext, n: usize, threads: Option<usize>) -> Result<FeasibleSample> {
    if n < 100 {
        return Err(Error::InvalidArgument(format!(
            "grid resolution must be at least 100, got {n}"
        )));
    }
    let (h1, h2) = (ctx.demand1 / n as f64, ctx.demand2 / n as f64);
    let tol = ctx.tol();
    let column = |i: usize| -> Vec<bool> {
        let q1 = i as f64 * h1;
        (0..=n)
            .map(|k| feasible_with_tol(ctx, q1, k as f64 * h2, tol))
            .collect()
    };
    let columns: Vec<Vec<bool>> = match threads {
        Some(t) if t > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(|| (0..=n).into_par_iter().map(column).collect()),
        _ => (0..=n).into_par_iter().map(column).collect(),
    };

    // Standard dominance on the grid: a point is Pareto iff it tops its own
    // column and every column to its right tops out strictly lower.
    let tops: Vec<Option<usize>> = columns
        .iter()
        .map(|c| c.iter().rposition(|f| *f))
        .collect();
    let mut pareto_top = vec![None; n + 1];
    let mut best_right: Option<usize> = None;
    for i in (0..=n).rev() {
        if let Some(k) = tops[i] {
            if best_right.is_none_or(|b| k > b) {
                pareto_top[i] = Some(k);
            }
            best_right = Some(best_right.map_or(k, |b| b.max(k)));
        }
    }

    let mut grid = Vec::with_capacity((n + 1) * (n + 1));
    let mut feasible = Vec::with_capacity(grid.capacity());
    let mut pareto = Vec::with_capacity(grid.capacity());
    for (i, col) in columns.iter().enumerate() {
        for (k, f) in col.iter().enumerate() {
            grid.push((i as f64 * h1, k as f64 * h2));
            feasible.push(*f);
            pareto.push(pareto_top[i] == Some(k));
        }
    }
    Ok(FeasibleSample {
        n,
        grid,
        feasible,
        pareto,
        resolution: (h1, h2),
        tol,
    })
}

/// Point on the boundary of the admissible set in direction `ratio`.
pub fn boundary_point(ctx: &MergeContext, ratio: f64) -> (f64, f64) {
    let s = ctx.supply_at_ratio(ratio);
    let (a, b) = (ratio * s, (1.0 - ratio) * s);
    let mut t: f64 = 1.0;
    if a > ctx.demand1 {
        t = t.min(ctx.demand1 / a);
    }
    if b > ctx.demand2 {
        t = t.min(ctx.demand2 / b);
    }
    (t * a, t * b)
}

fn random_feasible<R: Rng>(ctx: &MergeContext, rng: &mut R) -> (f64, f64) {
    if rng.gen_bool(0.5) {
        return boundary_point(ctx, rng.gen::<f64>());
    }
    for _ in 0..64 {
        let q = (rng.gen::<f64>() * ctx.demand1, rng.gen::<f64>() * ctx.demand2);
        if feasible(ctx, q.0, q.1) {
            return q;
        }
    }
    (0.0, 0.0)
}

/// Draw `trials` pairs of admissible points (half of them on the boundary)
/// and count segment points that fall outside the set.
pub fn convexity_probe<R: Rng>(
    ctx: &MergeContext,
    trials: usize,
    segment_points: usize,
    rng: &mut R,
) -> usize {
    let tol = ctx.tol();
    let mut violations = 0;
    for _ in 0..trials.max(1) {
        let a = random_feasible(ctx, rng);
        let b = random_feasible(ctx, rng);
        for s in 1..=segment_points {
            let t = s as f64 / (segment_points + 1) as f64;
            let q1 = a.0 + t * (b.0 - a.0);
            let q2 = a.1 + t * (b.1 - a.1);
            if !feasible_with_tol(ctx, q1, q2, tol) {
                violations += 1;
            }
        }
    }
    violations
}

/// Largest grid flux through a junction with one incoming road.
///
/// `outgoing` holds each outgoing road with its initial state and rate.
/// Returns the maximum and the grid spacing.
pub fn max_single_incoming_flux(
    incoming: (&RoadParams, TrafficState),
    outgoing: &[(RoadParams, TrafficState, f64)],
    n: usize,
) -> (f64, f64) {
    let (p1, s1) = incoming;
    let w1 = s1.attribute(p1);
    let demand = p1.demand(s1.rho, w1);
    let supplies: Vec<(f64, f64)> = outgoing
        .iter()
        .map(|(p, s, alpha)| {
            let rho_mod = p.pressure_inv((w1 - s.v).max(0.0)).unwrap_or(0.0);
            (p.supply(rho_mod, w1), *alpha)
        })
        .collect();
    let h = demand / n as f64;
    let best = (0..=n)
        .map(|i| i as f64 * h)
        .filter(|q| supplies.iter().all(|(sup, a)| a * q <= *sup))
        .fold(0.0, f64::max);
    (best, h)
}

/// Random road parameters spanning a broad but realistic range.
pub fn random_road<R: Rng>(rng: &mut R) -> RoadParams {
    RoadParams {
        rho_max: rng.gen_range(60.0..250.0),
        v_ref: rng.gen_range(40.0..140.0),
        gamma: rng.gen_range(0.5..3.0),
    }
}

/// Random state, mixing equilibrium, off-equilibrium, stopped and empty traffic.
pub fn random_state<R: Rng>(road: &RoadParams, rng: &mut R) -> TrafficState {
    let rho = rng.gen_range(0.0..0.95) * road.rho_max;
    match rng.gen_range(0..10) {
        0 => TrafficState {
            rho: 0.0,
            v: road.v_ref,
        },
        1 => TrafficState { rho, v: 0.0 },
        2..=4 => TrafficState {
            rho,
            v: road.equilibrium_speed(rho),
        },
        _ => TrafficState {
            rho,
            v: rng.gen_range(0.0..1.3) * road.v_ref,
        },
    }
}

/// Random merge initial data.
pub fn random_merge<R: Rng>(rng: &mut R) -> MergeContext {
    let roads = [random_road(rng), random_road(rng), random_road(rng)];
    let states = [
        random_state(&roads[0], rng),
        random_state(&roads[1], rng),
        random_state(&roads[2], rng),
    ];
    MergeContext::new(roads, states)
}
