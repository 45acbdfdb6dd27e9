//! Scenario files.
//!
//! A scenario is a JSON document with three top-level keys:
//!
//! ```json
//! {
//!   "roads": [
//!     { "id": "in1", "params": { "rho_max": 180, "v_ref": 100, "gamma": 1.2 }, "rho0": 30 },
//!     { "id": "in2", "params": { "rho_max": 180, "v_ref": 100, "gamma": 1.2 }, "q_desired": 2000 },
//!     { "id": "out", "params": { "rho_max": 90, "v_ref": 100, "gamma": 1.7 }, "rho0": 10 }
//!   ],
//!   "junctions": [
//!     { "kind": "merge", "incoming": ["in1", "in2"], "outgoing": ["out"], "priority": 0.5 }
//!   ],
//!   "sim": { "cfl": 0.5, "t_end": 1.0 }
//! }
//! ```
//!
//! Densities are in veh/km, speeds in km/h, fluxes in veh/h and lengths in km.
//! Each road gives either `rho0` or `q_desired`; the latter is turned into a
//! density through the free-flow root of the equilibrium flux. The initial
//! speed defaults to the equilibrium speed and can be set with `v0`.

use std::collections::HashMap;
use std::path::Path;

use arznet::junction::{Branch, JunctionInput, JunctionKind, JunctionSpec, RoadId};
use arznet::sim::{DiscretizedRoad, Network, SimConfig};
use arznet::{RoadParams, TrafficState};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_LENGTH: f64 = 1.0;
pub const DEFAULT_CELLS: usize = 100;

fn default_length() -> f64 {
    DEFAULT_LENGTH
}

fn default_cells() -> usize {
    DEFAULT_CELLS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadEntry {
    pub id: String,
    pub params: RoadParams,
    #[serde(default = "default_length")]
    pub length: f64,
    #[serde(default = "default_cells")]
    pub cells: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_desired: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JunctionKindEntry {
    OneToOne,
    Diverge { alphas: Vec<f64> },
    Merge { priority: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JunctionEntry {
    #[serde(flatten)]
    pub kind: JunctionKindEntry,
    pub incoming: Vec<String>,
    pub outgoing: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cfl: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steady_tol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub roads: Vec<RoadEntry>,
    #[serde(default)]
    pub junctions: Vec<JunctionEntry>,
    #[serde(default)]
    pub sim: SimEntry,
}

impl ScenarioFile {
    /// Parse JSON text; errors carry the line, column and field path.
    pub fn parse(text: &str, origin: &str) -> CliResult<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            let inner = e.into_inner();
            CliError::Parse {
                path: origin.to_string(),
                line: inner.line(),
                column: inner.column(),
                field: if field.is_empty() { ".".into() } else { field },
                message: inner.to_string(),
            }
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }

    pub fn road_index(&self, id: &str) -> Option<usize> {
        self.roads.iter().position(|r| r.id == id)
    }

    pub fn labels(&self) -> Vec<String> {
        self.roads.iter().map(|r| r.id.clone()).collect()
    }

    /// Check ids, arities and initial states.
    pub fn validate(&self) -> CliResult<()> {
        if self.roads.is_empty() {
            return Err(CliError::invalid("roads", "at least one road is required"));
        }
        let mut seen = HashMap::new();
        for (i, r) in self.roads.iter().enumerate() {
            if let Some(j) = seen.insert(r.id.as_str(), i) {
                return Err(CliError::invalid(
                    format!("roads[{i}].id"),
                    format!("duplicate id `{}` (also roads[{j}])", r.id),
                ));
            }
            self.initial_state(i)?;
            if !(r.length > 0.0 && r.length.is_finite()) {
                return Err(CliError::invalid(format!("roads[{i}].length"), "must be positive"));
            }
            if r.cells == 0 {
                return Err(CliError::invalid(format!("roads[{i}].cells"), "must be at least 1"));
            }
        }
        for k in 0..self.junctions.len() {
            self.junction_spec(k)?;
        }
        self.sim_config()?;
        Ok(())
    }

    /// Initial state of road `i`.
    pub fn initial_state(&self, i: usize) -> CliResult<TrafficState> {
        let r = &self.roads[i];
        let field = |name: &str| format!("roads[{i}].{name}");
        r.params
            .validate()
            .map_err(|e| CliError::invalid(field("params"), e))?;
        let rho = match (r.rho0, r.q_desired) {
            (Some(rho), None) => rho,
            (None, Some(q)) => {
                let cap = r.params.equilibrium_capacity();
                if !(0.0..=cap).contains(&q) {
                    return Err(CliError::invalid(
                        field("q_desired"),
                        format!("{q} outside [0, {cap}]"),
                    ));
                }
                r.params
                    .equilibrium_density_for_flux(q)
                    .map_err(|e| CliError::invalid(field("q_desired"), e))?
            }
            (Some(_), Some(_)) => {
                return Err(CliError::invalid(field("rho0"), "give either rho0 or q_desired, not both"))
            }
            (None, None) => return Err(CliError::invalid(field("rho0"), "rho0 or q_desired is required")),
        };
        let v = r.v0.unwrap_or_else(|| r.params.equilibrium_speed(rho));
        TrafficState::new(rho, v).map_err(|e| CliError::invalid(field("v0"), e))
    }

    pub fn junction_spec(&self, k: usize) -> CliResult<JunctionSpec> {
        let j = &self.junctions[k];
        let resolve = |side: &str, ids: &[String]| -> CliResult<Vec<Branch>> {
            ids.iter()
                .enumerate()
                .map(|(n, id)| {
                    let i = self.road_index(id).ok_or_else(|| {
                        CliError::invalid(format!("junctions[{k}].{side}[{n}]"), format!("unknown road id `{id}`"))
                    })?;
                    Ok(Branch {
                        road: RoadId(i),
                        params: self.roads[i].params,
                    })
                })
                .collect()
        };
        let kind = match &j.kind {
            JunctionKindEntry::OneToOne => JunctionKind::OneToOne,
            JunctionKindEntry::Diverge { alphas } => JunctionKind::Diverge { alphas: alphas.clone() },
            JunctionKindEntry::Merge { priority } => JunctionKind::Merge { priority: *priority },
        };
        JunctionSpec::new(resolve("incoming", &j.incoming)?, resolve("outgoing", &j.outgoing)?, kind)
            .map_err(|e| CliError::invalid(format!("junctions[{k}]"), e))
    }

    /// Riemann data of junction `k` from the initial road states.
    pub fn junction_problem(&self, k: usize) -> CliResult<(JunctionSpec, JunctionInput)> {
        let spec = self.junction_spec(k)?;
        let states = spec
            .incoming
            .iter()
            .chain(&spec.outgoing)
            .map(|b| self.initial_state(b.road.0))
            .collect::<CliResult<Vec<_>>>()?;
        Ok((spec, JunctionInput::new(states)))
    }

    pub fn sim_config(&self) -> CliResult<SimConfig> {
        let d = SimConfig::default();
        let cfg = SimConfig {
            cfl: self.sim.cfl.unwrap_or(d.cfl),
            t_end: self.sim.t_end.unwrap_or(d.t_end),
            stride: self.sim.stride.unwrap_or(d.stride),
            steady_tol: self.sim.steady_tol.unwrap_or(d.steady_tol),
        };
        cfg.validate().map_err(|e| CliError::invalid("sim", e))?;
        Ok(cfg)
    }

    pub fn network(&self) -> CliResult<Network> {
        let roads = self
            .roads
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let s = self.initial_state(i)?;
                DiscretizedRoad::uniform(r.params, r.length, r.cells, s)
                    .map(|d| d.with_label(r.id.clone()))
                    .map_err(|e| CliError::invalid(format!("roads[{i}]"), e))
            })
            .collect::<CliResult<Vec<_>>>()?;
        let specs = (0..self.junctions.len())
            .map(|k| self.junction_spec(k))
            .collect::<CliResult<Vec<_>>>()?;
        Network::new(roads, specs).map_err(|e| CliError::invalid("junctions", e))
    }
}

/// Roads and merge of the capacity-drop experiment with road 2 at `q_desired`.
pub fn capacity_drop_scenario(q_desired: f64) -> ScenarioFile {
    let inflow = RoadParams {
        rho_max: 180.0,
        v_ref: 100.0,
        gamma: 1.2,
    };
    let road = |id: &str, params, rho0, q| RoadEntry {
        id: id.into(),
        params,
        length: DEFAULT_LENGTH,
        cells: DEFAULT_CELLS,
        rho0,
        q_desired: q,
        v0: None,
    };
    ScenarioFile {
        roads: vec![
            road("in1", inflow, Some(30.0), None),
            road("in2", inflow, None, Some(q_desired)),
            road(
                "out",
                RoadParams {
                    rho_max: 90.0,
                    v_ref: 100.0,
                    gamma: 1.7,
                },
                Some(10.0),
                None,
            ),
        ],
        junctions: vec![JunctionEntry {
            kind: JunctionKindEntry::Merge { priority: 0.5 },
            incoming: vec!["in1".into(), "in2".into()],
            outgoing: vec!["out".into()],
        }],
        sim: SimEntry {
            t_end: Some(2.0),
            ..SimEntry::default()
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let s = capacity_drop_scenario(1500.0);
        let again = ScenarioFile::parse(&s.to_json(), "mem").unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn missing_field_reports_path_and_line() {
        let text = "{\n  \"roads\": [\n    { \"id\": \"a\", \"params\": { \"rho_max\": 1, \"v_ref\": 1 } }\n  ]\n}";
        match ScenarioFile::parse(text, "x.json") {
            Err(CliError::Parse { line, field, .. }) => {
                assert_eq!(line, 3);
                assert!(field.starts_with("roads[0].params"), "{field}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_road_in_junction() {
        let mut s = capacity_drop_scenario(1000.0);
        s.junctions[0].incoming[1] = "nope".into();
        let err = ScenarioFile::parse(&s.to_json(), "mem").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("junctions[0].incoming[1]"));
    }

    #[test]
    fn both_initial_forms_rejected() {
        let mut s = capacity_drop_scenario(1000.0);
        s.roads[0].q_desired = Some(100.0);
        assert!(ScenarioFile::parse(&s.to_json(), "mem").is_err());
    }
}
