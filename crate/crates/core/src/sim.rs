//! First-order Godunov scheme on a road network.
//!
//! Interior interfaces are 1-to-1 junctions between identical roads; nodes
//! of the network use the junction solvers on the cells adjacent to them.
//! Road ends that are not attached to a junction see a ghost cell frozen at
//! the road's initial state at that end.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fundamental::{Conserved, RoadParams, TrafficState};
use crate::junction::{modified_density, solve, JunctionInput, JunctionSolution, JunctionSpec};

/// Steps over which the junction fluxes must stay put to call the run steady.
pub const STEADY_WINDOW: usize = 100;

/// Courant numbers above one by more than this are rejected.
const COURANT_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedRoad {
    pub label: String,
    pub params: RoadParams,
    pub length: f64,
    pub cells: usize,
    pub dx: f64,
    pub states: Vec<Conserved>,
}

impl DiscretizedRoad {
    /// Road of `cells` equal cells all holding `initial`.
    pub fn uniform(params: RoadParams, length: f64, cells: usize, initial: TrafficState) -> Result<Self> {
        Self::from_states(params, length, vec![initial; cells])
    }

    pub fn from_states(params: RoadParams, length: f64, states: Vec<TrafficState>) -> Result<Self> {
        params.validate()?;
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidNetwork(format!("road length must be positive, got {length}")));
        }
        if states.is_empty() {
            return Err(Error::InvalidNetwork("road needs at least one cell".into()));
        }
        for s in &states {
            s.validate()?;
        }
        let cells = states.len();
        Ok(Self {
            label: String::new(),
            params,
            length,
            cells,
            dx: length / cells as f64,
            states: states.iter().map(|s| s.conserved(&params)).collect(),
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn state(&self, i: usize) -> TrafficState {
        self.states[i].to_state(&self.params)
    }

    pub fn profile(&self) -> Vec<TrafficState> {
        (0..self.cells).map(|i| self.state(i)).collect()
    }

    /// Total `(rho, y)` content of the road.
    pub fn totals(&self) -> (f64, f64) {
        let (r, y) = self
            .states
            .iter()
            .fold((0.0, 0.0), |(r, y), c| (r + c.rho, y + c.y));
        (r * self.dx, y * self.dx)
    }

    fn max_speed_with(&self, extra: &[TrafficState]) -> f64 {
        self.profile()
            .into_iter()
            .chain(extra.iter().copied())
            .map(|s| {
                let (l1, l2) = self.params.eigenvalues(s);
                l1.abs().max(l2)
            })
            .fold(0.0, f64::max)
    }
}

/// Godunov flux `(rho, y)` across an interface between two cells of one road.
pub fn interface_flux(
    left: (&RoadParams, TrafficState),
    right: (&RoadParams, TrafficState),
) -> (f64, f64) {
    let (pl, sl) = left;
    let (pr, sr) = right;
    let w = sl.attribute(pl);
    let demand = pl.demand(sl.rho, w);
    if demand <= 0.0 {
        return (0.0, 0.0);
    }
    let supply = pr.supply(modified_density(pr, w, sr.v), w);
    let q = demand.min(supply);
    (q, q * w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum End {
    Ghost,
    Junction(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub roads: Vec<DiscretizedRoad>,
    pub junctions: Vec<JunctionSpec>,
    upstream: Vec<End>,
    downstream: Vec<End>,
    ghosts: Vec<(TrafficState, TrafficState)>,
}

/// Fluxes through the two ends of every road during one step.
#[derive(Debug, Clone, PartialEq)]
struct EndFluxes {
    inflow: (f64, f64),
    outflow: (f64, f64),
}

impl Network {
    /// Junction branches refer to roads by index into `roads`. Every road end
    /// is attached to at most one junction.
    pub fn new(roads: Vec<DiscretizedRoad>, junctions: Vec<JunctionSpec>) -> Result<Self> {
        let n = roads.len();
        let mut upstream = vec![End::Ghost; n];
        let mut downstream = vec![End::Ghost; n];
        for (k, spec) in junctions.iter().enumerate() {
            spec.validate()?;
            for (branch, incoming) in spec
                .incoming
                .iter()
                .map(|b| (b, true))
                .chain(spec.outgoing.iter().map(|b| (b, false)))
            {
                let r = branch.road.0;
                let road = roads.get(r).ok_or_else(|| {
                    Error::InvalidNetwork(format!("junction {k} refers to missing road {r}"))
                })?;
                if road.params != branch.params {
                    return Err(Error::InvalidNetwork(format!(
                        "junction {k} uses parameters for road {r} that differ from the road's"
                    )));
                }
                let slot = if incoming { &mut downstream[r] } else { &mut upstream[r] };
                if *slot != End::Ghost {
                    return Err(Error::InvalidNetwork(format!(
                        "road {r} end attached to more than one junction"
                    )));
                }
                *slot = End::Junction(k);
            }
        }
        let ghosts = roads
            .iter()
            .map(|r| (r.state(0), r.state(r.cells - 1)))
            .collect();
        Ok(Self {
            roads,
            junctions,
            upstream,
            downstream,
            ghosts,
        })
    }

    /// Total `(rho, y)` content of the network.
    pub fn totals(&self) -> (f64, f64) {
        self.roads.iter().map(DiscretizedRoad::totals).fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1))
    }

    /// Largest time step allowed by the Courant number `cfl`.
    pub fn max_stable_dt(&self, cfl: f64) -> f64 {
        self.roads
            .iter()
            .zip(&self.ghosts)
            .map(|(r, g)| {
                let speed = r.max_speed_with(&[g.0, g.1]);
                if speed > 0.0 {
                    cfl * r.dx / speed
                } else {
                    f64::INFINITY
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn junction_input(&self, spec: &JunctionSpec) -> JunctionInput {
        let incoming = spec.incoming.iter().map(|b| {
            let r = &self.roads[b.road.0];
            r.state(r.cells - 1)
        });
        let outgoing = spec.outgoing.iter().map(|b| self.roads[b.road.0].state(0));
        JunctionInput::new(incoming.chain(outgoing).collect())
    }

    /// Junction solutions for the current cell states.
    pub fn solve_junctions(&self) -> Result<Vec<JunctionSolution>> {
        self.junctions
            .iter()
            .map(|spec| solve(spec, &self.junction_input(spec)))
            .collect()
    }

    fn end_fluxes(&self, solutions: &[JunctionSolution]) -> Vec<EndFluxes> {
        let mut ends: Vec<EndFluxes> = self
            .roads
            .iter()
            .zip(&self.ghosts)
            .map(|(r, g)| EndFluxes {
                inflow: interface_flux((&r.params, g.0), (&r.params, r.state(0))),
                outflow: interface_flux((&r.params, r.state(r.cells - 1)), (&r.params, g.1)),
            })
            .collect();
        for (spec, sol) in self.junctions.iter().zip(solutions) {
            let n = spec.incoming.len();
            for (i, b) in spec.incoming.iter().enumerate() {
                ends[b.road.0].outflow = (sol.q[i], sol.q[i] * sol.w_in[i]);
            }
            for (j, b) in spec.outgoing.iter().enumerate() {
                let q = sol.q[n + j];
                ends[b.road.0].inflow = (q, q * sol.w_out[j]);
            }
        }
        ends
    }

    fn check_courant(&self, dt: f64) -> Result<()> {
        for (k, (r, g)) in self.roads.iter().zip(&self.ghosts).enumerate() {
            let speed = r.max_speed_with(&[g.0, g.1]);
            if dt * speed > r.dx * (1.0 + COURANT_SLACK) {
                return Err(Error::Cfl {
                    dt,
                    dt_max: r.dx / speed,
                    road: k,
                });
            }
        }
        Ok(())
    }

    /// Advance by `dt`. Returns the junction solutions used for the step and
    /// the `(rho, y)` exchanged with the ghost cells: inflow, then outflow.
    fn advance(&mut self, dt: f64) -> Result<(Vec<JunctionSolution>, (f64, f64), (f64, f64))> {
        if !(dt >= 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step must be finite and non-negative, got {dt}")));
        }
        self.check_courant(dt)?;
        let solutions = self.solve_junctions()?;
        let ends = self.end_fluxes(&solutions);

        let mut inflow = (0.0, 0.0);
        let mut outflow = (0.0, 0.0);
        for (k, e) in ends.iter().enumerate() {
            if self.upstream[k] == End::Ghost {
                inflow.0 += e.inflow.0 * dt;
                inflow.1 += e.inflow.1 * dt;
            }
            if self.downstream[k] == End::Ghost {
                outflow.0 += e.outflow.0 * dt;
                outflow.1 += e.outflow.1 * dt;
            }
        }

        self.roads
            .par_iter_mut()
            .zip(ends.par_iter())
            .enumerate()
            .try_for_each(|(k, (road, e))| update_road(k, road, e, dt))?;
        Ok((solutions, inflow, outflow))
    }

    /// Advance by `dt`; fails if the Courant number exceeds one.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        self.advance(dt).map(|_| ())
    }

    /// Run until `config.t_end` or until the junction fluxes settle.
    pub fn run(&mut self, config: &SimConfig) -> Result<SimResult> {
        config.validate()?;
        let initial = self.totals();
        let mut ledger = LedgerEntry {
            t: 0.0,
            initial,
            inflow: (0.0, 0.0),
            outflow: (0.0, 0.0),
            content: initial,
        };
        let mut result = SimResult::default();

        let mut solutions = self.solve_junctions()?;
        result.record(self, 0.0, &solutions);
        result.ledger.push(ledger);

        let mut t = 0.0;
        let mut steps = 0usize;
        let mut calm = 0usize;
        let mut previous = flux_vector(&solutions, self);
        while t < config.t_end {
            let dt = self.max_stable_dt(config.cfl).min(config.t_end - t);
            if !(dt > 0.0) {
                break;
            }
            let (used, inflow, outflow) = self.advance(dt)?;
            t += dt;
            steps += 1;
            ledger.inflow.0 += inflow.0;
            ledger.inflow.1 += inflow.1;
            ledger.outflow.0 += outflow.0;
            ledger.outflow.1 += outflow.1;
            solutions = used;

            let current = flux_vector(&solutions, self);
            if relative_change(&previous, &current) < config.steady_tol {
                calm += 1;
            } else {
                calm = 0;
            }
            previous = current;

            let steady = calm >= STEADY_WINDOW;
            let done = steady || t >= config.t_end;
            if steps.is_multiple_of(config.stride) || done {
                ledger.t = t;
                ledger.content = self.totals();
                result.record(self, t, &solutions);
                result.ledger.push(ledger);
            }
            if steady {
                result.steady_at = Some(t);
                break;
            }
        }
        result.steps = steps;
        result.t_final = t;
        result.final_solutions = solutions;
        result.profiles = self
            .roads
            .iter()
            .map(|r| RoadProfile {
                label: r.label.clone(),
                states: r.profile(),
            })
            .collect();
        Ok(result)
    }
}

fn update_road(k: usize, road: &mut DiscretizedRoad, ends: &EndFluxes, dt: f64) -> Result<()> {
    let params = road.params;
    let states: Vec<TrafficState> = road.profile();
    let mut flux = Vec::with_capacity(road.cells + 1);
    flux.push(ends.inflow);
    for pair in states.windows(2) {
        flux.push(interface_flux((&params, pair[0]), (&params, pair[1])));
    }
    flux.push(ends.outflow);

    let lambda = dt / road.dx;
    for (i, cell) in road.states.iter_mut().enumerate() {
        cell.rho += lambda * (flux[i].0 - flux[i + 1].0);
        cell.y += lambda * (flux[i].1 - flux[i + 1].1);
        let floor = -1e-12 * params.rho_max;
        if cell.rho < floor || cell.y < floor * params.v_ref {
            return Err(Error::Numerical {
                context: "sim::step",
                detail: format!(
                    "positivity lost on road {k} cell {i}: rho = {}, y = {}",
                    cell.rho, cell.y
                ),
            });
        }
    }
    Ok(())
}

/// Junction fluxes per branch, or the ghost fluxes when there is no junction.
fn flux_vector(solutions: &[JunctionSolution], net: &Network) -> Vec<f64> {
    if !solutions.is_empty() {
        return solutions.iter().flat_map(|s| s.q.iter().copied()).collect();
    }
    net.end_fluxes(solutions)
        .iter()
        .flat_map(|e| [e.inflow.0, e.outflow.0])
        .collect()
}

fn relative_change(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().chain(b).fold(1.0_f64, |m, q| m.max(q.abs()));
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
        / scale
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub cfl: f64,
    /// Horizon in hours.
    pub t_end: f64,
    /// Record every `stride` steps.
    pub stride: usize,
    /// Relative junction-flux change below which a step counts as steady.
    pub steady_tol: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            cfl: 0.5,
            t_end: 1.0,
            stride: 50,
            steady_tol: 1e-9,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::InvalidArgument(format!("cfl must lie in ]0,1], got {}", self.cfl)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidArgument(format!("t_end must be finite and non-negative, got {}", self.t_end)));
        }
        if self.stride == 0 {
            return Err(Error::InvalidArgument("output stride must be at least 1".into()));
        }
        if !(self.steady_tol >= 0.0) {
            return Err(Error::InvalidArgument(format!("steady tolerance must be non-negative, got {}", self.steady_tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxSample {
    pub t: f64,
    pub junction: usize,
    /// Branch index within the junction, incoming first.
    pub branch: usize,
    pub road: usize,
    pub q: f64,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoadProfile {
    pub label: String,
    pub states: Vec<TrafficState>,
}

/// Conservation audit at one output time. Pairs are `(rho, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub t: f64,
    pub initial: (f64, f64),
    pub inflow: (f64, f64),
    pub outflow: (f64, f64),
    pub content: (f64, f64),
}

impl LedgerEntry {
    /// Relative imbalance of `(rho, y)`, scaled by everything that ever entered.
    pub fn imbalance(&self) -> (f64, f64) {
        let rel = |init: f64, inn: f64, out: f64, now: f64| {
            (now - (init + inn - out)).abs() / (init + inn).abs().max(f64::MIN_POSITIVE)
        };
        (
            rel(self.initial.0, self.inflow.0, self.outflow.0, self.content.0),
            rel(self.initial.1, self.inflow.1, self.outflow.1, self.content.1),
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub series: Vec<FluxSample>,
    pub profiles: Vec<RoadProfile>,
    pub ledger: Vec<LedgerEntry>,
    pub final_solutions: Vec<JunctionSolution>,
    pub steady_at: Option<f64>,
    pub steps: usize,
    pub t_final: f64,
}

impl SimResult {
    fn record(&mut self, net: &Network, t: f64, solutions: &[JunctionSolution]) {
        for (k, (spec, sol)) in net.junctions.iter().zip(solutions).enumerate() {
            let roads = spec.incoming.iter().chain(&spec.outgoing);
            for (b, branch) in roads.enumerate() {
                self.series.push(FluxSample {
                    t,
                    junction: k,
                    branch: b,
                    road: branch.road.0,
                    q: sol.q[b],
                    w: sol.attribute(b),
                });
            }
        }
    }

    /// Worst relative ledger imbalance over all output times, `(rho, y)`.
    pub fn max_imbalance(&self) -> (f64, f64) {
        self.ledger.iter().map(LedgerEntry::imbalance).fold((0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)))
    }

    /// CSV `t,branch_id,q,w`; `branch_id` is `j<junction>:<road label>`.
    pub fn write_series_csv<W: Write>(&self, mut out: W, labels: &[String]) -> io::Result<()> {
        writeln!(out, "t,branch_id,q,w")?;
        for s in &self.series {
            writeln!(out, "{},j{}:{},{},{}", s.t, s.junction, labels[s.road], s.q, s.w)?;
        }
        Ok(())
    }

    /// CSV `branch_id,cell,rho,v`.
    pub fn write_profiles_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "branch_id,cell,rho,v")?;
        for p in &self.profiles {
            for (i, s) in p.states.iter().enumerate() {
                writeln!(out, "{},{},{},{}", p.label, i, s.rho, s.v)?;
            }
        }
        Ok(())
    }

    /// CSV `t,rho_content,rho_in,rho_out,rho_imbalance,y_content,y_in,y_out,y_imbalance`.
    pub fn write_ledger_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(
            out,
            "t,rho_initial,rho_in,rho_out,rho_content,rho_imbalance,y_initial,y_in,y_out,y_content,y_imbalance"
        )?;
        for e in &self.ledger {
            let (ir, iy) = e.imbalance();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                e.t,
                e.initial.0,
                e.inflow.0,
                e.outflow.0,
                e.content.0,
                ir,
                e.initial.1,
                e.inflow.1,
                e.outflow.1,
                e.content.1,
                iy
            )?;
        }
        Ok(())
    }
}
