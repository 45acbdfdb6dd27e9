use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use arznet::junction::{analyze_merge, solve, JunctionKind, JunctionSolution};
use arznet::oracle::{sample_pareto, MergeContext};
use arznet::sim::SimConfig;

use crate::error::{CliError, CliResult};
use crate::scenario::ScenarioFile;

/// Desired inflows of the second merge road in the capacity-drop sweep.
pub const CAPACITY_DROP_SWEEP: [f64; 8] = [1000.0, 1400.0, 1500.0, 1750.0, 2000.0, 2500.0, 3000.0, 3500.0];

/// Overrides from the command line.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimOverrides {
    pub cfl: Option<f64>,
    pub t_end: Option<f64>,
}

impl SimOverrides {
    pub fn apply(&self, mut cfg: SimConfig) -> CliResult<SimConfig> {
        if let Some(c) = self.cfl {
            cfg.cfl = c;
        }
        if let Some(t) = self.t_end {
            cfg.t_end = t;
        }
        cfg.validate().map_err(|e| CliError::invalid("--cfl/--t-end", e))?;
        Ok(cfg)
    }
}

fn create(dir: &Path, name: &str) -> CliResult<BufWriter<File>> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn finish(dir: &Path, name: &str, result: std::io::Result<()>) -> CliResult<()> {
    result.map_err(|e| CliError::io(dir.join(name), e))
}

fn single_junction(scenario: &ScenarioFile) -> CliResult<()> {
    if scenario.junctions.len() != 1 {
        return Err(CliError::invalid(
            "junctions",
            format!("expected exactly one junction, found {}", scenario.junctions.len()),
        ));
    }
    Ok(())
}

/// Solve the single junction of a scenario from the initial road states.
pub fn solve_scenario(scenario: &ScenarioFile) -> CliResult<JunctionSolution> {
    single_junction(scenario)?;
    let (spec, input) = scenario.junction_problem(0)?;
    solve(&spec, &input).map_err(|e| CliError::from_core("junctions[0]", e))
}

/// Text report of a junction solution.
pub fn cmd_solve(scenario: &ScenarioFile) -> CliResult<String> {
    let sol = solve_scenario(scenario)?;
    let spec = scenario.junction_spec(0)?;
    let labels = scenario.labels();
    let mut out = String::new();
    writeln!(out, "branch,side,q,w,rho_boundary,v_boundary").unwrap();
    let n = spec.incoming.len();
    for (i, b) in spec.incoming.iter().chain(&spec.outgoing).enumerate() {
        let side = if i < n { "in" } else { "out" };
        let s = sol.boundary_states[i];
        writeln!(
            out,
            "{},{side},{},{},{},{}",
            labels[b.road.0],
            sol.q[i],
            sol.attribute(i),
            s.rho,
            s.v
        )
        .unwrap();
    }
    if let Some(r) = sol.ratio {
        writeln!(out, "ratio,{r}").unwrap();
    }
    if let Some(c) = sol.case {
        writeln!(out, "case,{c}").unwrap();
    }
    Ok(out)
}

/// Run a scenario and write `flux_series.csv`, `profiles.csv` and `ledger.csv`.
/// Returns the steady junction fluxes as text.
pub fn cmd_simulate(scenario: &ScenarioFile, out: &Path, overrides: SimOverrides) -> CliResult<String> {
    let cfg = overrides.apply(scenario.sim_config()?)?;
    let mut net = scenario.network()?;
    let res = net.run(&cfg).map_err(|e| CliError::from_core("sim", e))?;
    let labels = scenario.labels();

    let mut f = create(out, "flux_series.csv")?;
    finish(out, "flux_series.csv", res.write_series_csv(&mut f, &labels).and_then(|_| f.flush()))?;
    let mut f = create(out, "profiles.csv")?;
    finish(out, "profiles.csv", res.write_profiles_csv(&mut f).and_then(|_| f.flush()))?;
    let mut f = create(out, "ledger.csv")?;
    finish(out, "ledger.csv", res.write_ledger_csv(&mut f).and_then(|_| f.flush()))?;

    let mut text = String::new();
    match res.steady_at {
        Some(t) => writeln!(text, "steady at t = {t} h after {} steps", res.steps).unwrap(),
        None => writeln!(text, "not steady at t = {} h after {} steps", res.t_final, res.steps).unwrap(),
    }
    for (k, (spec, sol)) in net.junctions.iter().zip(&res.final_solutions).enumerate() {
        for (b, branch) in spec.incoming.iter().chain(&spec.outgoing).enumerate() {
            writeln!(text, "j{k}:{} q = {}", labels[branch.road.0], sol.q[b]).unwrap();
        }
    }
    let (ir, iy) = res.max_imbalance();
    writeln!(text, "ledger imbalance rho = {ir:e}, y = {iy:e}").unwrap();
    Ok(text)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityDropRow {
    pub desired_1: f64,
    pub actual_1: f64,
    pub desired_2: f64,
    pub actual_2: f64,
    pub outflow: f64,
    pub ratio_1: f64,
    pub ratio_2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropMode {
    /// Junction solver on the initial data.
    Direct,
    /// Steady state of the Godunov simulation.
    Simulated,
}

/// Sweep the desired inflow of the second incoming road of the merge in `base`.
pub fn capacity_drop(
    base: &ScenarioFile,
    sweep: &[f64],
    mode: DropMode,
    overrides: SimOverrides,
) -> CliResult<Vec<CapacityDropRow>> {
    single_junction(base)?;
    let spec = base.junction_spec(0)?;
    if !matches!(spec.kind, JunctionKind::Merge { .. }) {
        return Err(CliError::invalid("junctions[0].kind", "capacity-drop needs a merge"));
    }
    let (r1, r2) = (spec.incoming[0].road.0, spec.incoming[1].road.0);
    let cap2 = base.roads[r2].params.equilibrium_capacity();
    let desired_1 = base.initial_state(r1)?.flux();

    sweep
        .iter()
        .enumerate()
        .map(|(i, &desired_2)| {
            if !(0.0..=cap2).contains(&desired_2) {
                return Err(CliError::invalid(
                    format!("--sweep[{i}]"),
                    format!("{desired_2} outside [0, {cap2}]"),
                ));
            }
            let mut scenario = base.clone();
            let road = &mut scenario.roads[r2];
            road.rho0 = None;
            road.v0 = None;
            road.q_desired = Some(desired_2);
            let q = match mode {
                DropMode::Direct => solve_scenario(&scenario)?.q,
                DropMode::Simulated => {
                    let cfg = overrides.apply(scenario.sim_config()?)?;
                    let mut net = scenario.network()?;
                    let res = net.run(&cfg).map_err(|e| CliError::from_core("sim", e))?;
                    res.final_solutions[0].q.clone()
                }
            };
            let outflow = q[2];
            let ratio = |x: f64| if outflow > 0.0 { x / outflow } else { 0.0 };
            Ok(CapacityDropRow {
                desired_1,
                actual_1: q[0],
                desired_2,
                actual_2: q[1],
                outflow,
                ratio_1: ratio(q[0]),
                ratio_2: ratio(q[1]),
            })
        })
        .collect()
}

const DROP_HEADER: &str = "desired_1,actual_1,desired_2,actual_2,outflow,ratio_1,ratio_2";

pub fn write_capacity_drop_csv<W: Write>(rows: &[CapacityDropRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{DROP_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.desired_1, r.actual_1, r.desired_2, r.actual_2, r.outflow, r.ratio_1, r.ratio_2
        )?;
    }
    Ok(())
}

/// Table rounded to one decimal for fluxes and three for ratios.
pub fn format_capacity_drop(rows: &[CapacityDropRow]) -> String {
    let mut out = String::new();
    writeln!(out, "{DROP_HEADER}").unwrap();
    for r in rows {
        writeln!(
            out,
            "{:.1},{:.1},{:.1},{:.1},{:.1},{:.3},{:.3}",
            r.desired_1, r.actual_1, r.desired_2, r.actual_2, r.outflow, r.ratio_1, r.ratio_2
        )
        .unwrap();
    }
    out
}

/// Write `capacity_drop.csv` and return the rounded table.
pub fn cmd_capacity_drop(
    base: &ScenarioFile,
    sweep: &[f64],
    mode: DropMode,
    out: &Path,
    overrides: SimOverrides,
) -> CliResult<String> {
    let rows = capacity_drop(base, sweep, mode, overrides)?;
    let mut f = create(out, "capacity_drop.csv")?;
    finish(out, "capacity_drop.csv", write_capacity_drop_csv(&rows, &mut f).and_then(|_| f.flush()))?;
    Ok(format_capacity_drop(&rows))
}

/// Write `pareto.csv` (the sampled admissible set) and `markers.csv` (solver
/// output, the priority point and the stationary point when one is used).
pub fn cmd_pareto_dump(scenario: &ScenarioFile, n: usize, out: &Path, threads: Option<usize>) -> CliResult<String> {
    single_junction(scenario)?;
    let (spec, input) = scenario.junction_problem(0)?;
    let JunctionKind::Merge { priority } = spec.kind else {
        return Err(CliError::invalid("junctions[0].kind", "pareto-dump needs a merge"));
    };
    let p: Vec<_> = spec.params().copied().collect();
    let s = &input.states;
    let ctx = MergeContext::new([p[0], p[1], p[2]], [s[0], s[1], s[2]]);
    let sample = sample_pareto(&ctx, n, threads).map_err(|e| CliError::invalid("--grid", e))?;

    let analysis = analyze_merge((&p[0], s[0]), (&p[1], s[1]), (&p[2], s[2]), priority)
        .map_err(|e| CliError::from_core("junctions[0]", e))?;
    let sol = solve(&spec, &input).map_err(|e| CliError::from_core("junctions[0]", e))?;

    let mut markers = vec![
        ("solver", (sol.q[0], sol.q[1])),
        ("priority", analysis.bounds.desired),
    ];
    if let Some(star) = analysis.bounds.star {
        markers.push(("stationary", star));
    }

    let mut f = create(out, "pareto.csv")?;
    finish(out, "pareto.csv", sample.write_csv(&mut f).and_then(|_| f.flush()))?;
    let mut f = create(out, "markers.csv")?;
    let mut text = String::from("marker,q1,q2\n");
    for (name, (a, b)) in &markers {
        writeln!(text, "{name},{a},{b}").unwrap();
    }
    finish(out, "markers.csv", f.write_all(text.as_bytes()).and_then(|_| f.flush()))?;
    Ok(text)
}
