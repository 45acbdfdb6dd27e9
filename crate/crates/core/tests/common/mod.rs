#![allow(dead_code)]

use arznet::junction::{Branch, JunctionKind, JunctionSpec, RoadId};
use arznet::{RoadParams, TrafficState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn inflow_road() -> RoadParams {
    RoadParams::new(180.0, 100.0, 1.2).unwrap()
}

pub fn outflow_road() -> RoadParams {
    RoadParams::new(90.0, 100.0, 1.7).unwrap()
}

/// Merge states for a desired flux on the second incoming road.
pub fn capacity_drop_states(desired2: f64) -> [TrafficState; 3] {
    let (p, p3) = (inflow_road(), outflow_road());
    let rho2 = p.equilibrium_density_for_flux(desired2).unwrap();
    [
        TrafficState::equilibrium(&p, 30.0).unwrap(),
        TrafficState::equilibrium(&p, rho2).unwrap(),
        TrafficState::equilibrium(&p3, 10.0).unwrap(),
    ]
}

pub fn merge_spec(params: [RoadParams; 3], priority: f64) -> JunctionSpec {
    let b = |i: usize| Branch {
        road: RoadId(i),
        params: params[i],
    };
    JunctionSpec::new(vec![b(0), b(1)], vec![b(2)], JunctionKind::Merge { priority }).unwrap()
}

/// `(desired_2, actual_1, actual_2, outflow)`.
pub const CAPACITY_DROP: [(f64, f64, f64, f64); 8] = [
    (1000.0, 2500.0, 1000.0, 3500.0),
    (1400.0, 2500.0, 1400.0, 3900.0),
    (1500.0, 2413.1, 1500.0, 3913.1),
    (1750.0, 2155.0, 1750.0, 3905.0),
    (2000.0, 1945.3, 1945.3, 3890.6),
    (2500.0, 1924.6, 1924.6, 3849.3),
    (3000.0, 1903.9, 1903.9, 3807.7),
    (3500.0, 1881.9, 1881.9, 3763.8),
];

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
