mod common;

use arznet::junction::{
    analyze_merge, check_admissibility, check_consistency, merge_geometry, modified_density, solve,
    solve_merge, tol_flux, Branch, JunctionInput, JunctionKind, JunctionSpec, MergeCase, RoadId,
};
use arznet::oracle::{random_road, random_state};
use arznet::{RoadParams, TrafficState};
use common::*;
use rand::Rng;

fn branches(params: &[RoadParams], offset: usize) -> Vec<Branch> {
    params
        .iter()
        .enumerate()
        .map(|(i, p)| Branch {
            road: RoadId(offset + i),
            params: *p,
        })
        .collect()
}

fn random_instance<R: Rng>(rng: &mut R, kind: usize) -> (JunctionSpec, JunctionInput) {
    let (n, m, kind) = match kind {
        0 => (1, 1, JunctionKind::OneToOne),
        1 => {
            let m = rng.gen_range(2..=4);
            let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.05..1.0)).collect();
            let sum: f64 = raw.iter().sum();
            let mut alphas: Vec<f64> = raw.iter().map(|a| a / sum).collect();
            let head: f64 = alphas[..m - 1].iter().sum();
            alphas[m - 1] = 1.0 - head;
            (1, m, JunctionKind::Diverge { alphas })
        }
        _ => (2, 1, JunctionKind::Merge { priority: rng.gen_range(0.01..0.99) }),
    };
    let params: Vec<RoadParams> = (0..n + m).map(|_| random_road(rng)).collect();
    let states = params.iter().map(|p| random_state(p, rng)).collect();
    let spec = JunctionSpec::new(branches(&params[..n], 0), branches(&params[n..], n), kind).unwrap();
    (spec, JunctionInput::new(states))
}

#[test]
fn capacity_drop_rows_direct() {
    let (p, p3) = (inflow_road(), outflow_road());
    for (desired, a1, a2, out) in CAPACITY_DROP {
        let s = capacity_drop_states(desired);
        let sol = solve_merge((&p, s[0]), (&p, s[1]), (&p3, s[2]), 0.5).unwrap();
        assert!(rel(sol.q[0], a1) < 5e-3, "row {desired}: q1 {}", sol.q[0]);
        assert!(rel(sol.q[1], a2) < 5e-3, "row {desired}: q2 {}", sol.q[1]);
        assert!(rel(sol.q[2], out) < 5e-3, "row {desired}: q3 {}", sol.q[2]);
    }
}

#[test]
fn capacity_drop_cases() {
    let (p, p3) = (inflow_road(), outflow_road());
    for (desired, ..) in CAPACITY_DROP {
        let s = capacity_drop_states(desired);
        let a = analyze_merge((&p, s[0]), (&p, s[1]), (&p3, s[2]), 0.5).unwrap();
        let expected = if desired < 2000.0 { MergeCase::E3 } else { MergeCase::E1 };
        assert_eq!(a.tag.case, expected, "row {desired}");
    }
}

#[test]
fn mass_balances_exactly() {
    let mut rng = rng(11);
    for kind in 0..3 {
        for _ in 0..1000 {
            let (spec, input) = random_instance(&mut rng, kind);
            let sol = solve(&spec, &input).unwrap();
            let n = spec.incoming.len();
            let inn: f64 = sol.q[..n].iter().sum();
            let out: f64 = sol.q[n..].iter().sum();
            assert_eq!(inn, out, "{spec:?} {input:?}");
            let (mi, mo) = (sol.momentum_in(), sol.momentum_out());
            assert!((mi - mo).abs() <= 1e-9 * mi.abs().max(1.0), "momentum {mi} vs {mo}");
        }
    }
}

#[test]
fn fluxes_respect_demand_and_supply() {
    let mut rng = rng(12);
    for kind in 0..3 {
        for _ in 0..1000 {
            let (spec, input) = random_instance(&mut rng, kind);
            let sol = solve(&spec, &input).unwrap();
            let params: Vec<_> = spec.params().copied().collect();
            let n = spec.incoming.len();
            for i in 0..n {
                let s = input.states[i];
                let d = params[i].demand(s.rho, s.attribute(&params[i]));
                assert!(sol.q[i] <= d + tol_flux(d));
            }
            for j in n..params.len() {
                let w = sol.attribute(j);
                let sup = params[j].supply(modified_density(&params[j], w, input.states[j].v), w);
                assert!(sol.q[j] <= sup + tol_flux(sup));
            }
        }
    }
}

#[test]
fn boundary_states_are_admissible() {
    let mut rng = rng(13);
    for kind in 0..3 {
        for _ in 0..1000 {
            let (spec, input) = random_instance(&mut rng, kind);
            let sol = solve(&spec, &input).unwrap();
            let report = check_admissibility(&spec, &input, &sol);
            assert!(report.is_admissible(), "{spec:?}\n{input:?}\n{report:?}");
            for (i, b) in sol.boundary_states.iter().enumerate() {
                assert!((b.flux() - sol.q[i]).abs() <= 1e-7 * sol.q[i].max(1.0));
            }
        }
    }
}

#[test]
fn resolving_boundary_states_reproduces_fluxes() {
    let mut rng = rng(14);
    for kind in 0..3 {
        for _ in 0..300 {
            let (spec, input) = random_instance(&mut rng, kind);
            let report = check_consistency(&spec, &input).unwrap();
            let scale = report.first.q.iter().fold(1.0_f64, |m, q| m.max(*q));
            assert!(
                report.max_deviation <= 1e-6 * scale,
                "{spec:?}\n{input:?}\n{:?}\n{:?}",
                report.first.q,
                report.second.q
            );
        }
    }
}

/// Largest flux change left on `[a, b]` after halving towards the steepest
/// half 40 times. A continuous map shrinks this to roundoff.
fn residual_jump(f: &dyn Fn(f64) -> [f64; 3], mut a: f64, mut b: f64) -> f64 {
    let diff = |x: [f64; 3], y: [f64; 3]| (0..3).map(|i| (x[i] - y[i]).abs()).fold(0.0, f64::max);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..40 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if diff(fa, fm) >= diff(fm, fb) {
            b = m;
            fb = fm;
        } else {
            a = m;
            fa = fm;
        }
    }
    diff(fa, fb)
}

fn sweep_jumps(f: &dyn Fn(f64) -> [f64; 3], grid: &[f64], threshold: f64) -> Vec<(f64, f64)> {
    let values: Vec<[f64; 3]> = grid.iter().map(|x| f(*x)).collect();
    let mut jumps = Vec::new();
    for k in 0..grid.len() - 1 {
        let d = (0..3).map(|i| (values[k + 1][i] - values[k][i]).abs()).fold(0.0, f64::max);
        if d > threshold {
            let left = residual_jump(f, grid[k], grid[k + 1]);
            if left > threshold {
                jumps.push((grid[k], left));
            }
        }
    }
    jumps
}

#[test]
fn merge_continuous_in_priority() {
    let mut rng = rng(15);
    let grid: Vec<f64> = (1..10_000).map(|k| k as f64 * 1e-4).collect();
    for _ in 0..20 {
        let ctx = arznet::oracle::random_merge(&mut rng);
        let [p1, p2, p3] = ctx.roads;
        let [s1, s2, s3] = ctx.states;
        let f = |prio: f64| {
            let q = solve_merge((&p1, s1), (&p2, s2), (&p3, s3), prio).unwrap().q;
            [q[0], q[1], q[2]]
        };
        let threshold = 10.0 * ctx.tol();
        let jumps = sweep_jumps(&f, &grid, threshold);
        assert!(jumps.is_empty(), "{ctx:?}: {jumps:?}");
    }
}

#[test]
fn merge_continuous_across_equal_attributes() {
    let mut rng = rng(16);
    for _ in 0..40 {
        let (p1, p2, p3) = (random_road(&mut rng), random_road(&mut rng), random_road(&mut rng));
        let rho1 = rng.gen_range(0.05..0.9) * p1.rho_max;
        let s2 = TrafficState::new(rng.gen_range(0.05..0.9) * p2.rho_max, rng.gen_range(5.0..100.0)).unwrap();
        let s3 = random_state(&p3, &mut rng);
        let w2 = s2.attribute(&p2);
        let base = w2 - p1.pressure(rho1).unwrap();
        let width = 0.5f64.min(base.max(0.0));
        if width < 1e-3 {
            continue;
        }
        let priority = rng.gen_range(0.05..0.95);
        let f = |eps: f64| {
            let s1 = TrafficState::new(rho1, base + eps).unwrap();
            let q = solve_merge((&p1, s1), (&p2, s2), (&p3, s3), priority).unwrap().q;
            [q[0], q[1], q[2]]
        };
        let grid: Vec<f64> = (-1000..=1000).map(|k| k as f64 * width / 1000.0).collect();
        let d = p1.capacity(w2).max(p2.capacity(w2));
        let jumps = sweep_jumps(&f, &grid, 10.0 * tol_flux(d));
        assert!(jumps.is_empty(), "{jumps:?}");
    }
}

#[test]
fn merge_supply_matches_composition() {
    let mut rng = rng(17);
    for _ in 0..2000 {
        let ctx = arznet::oracle::random_merge(&mut rng);
        let [p1, p2, p3] = ctx.roads;
        let [s1, s2, s3] = ctx.states;
        let g = merge_geometry((&p1, s1), (&p2, s2), (&p3, s3));
        for k in 0..=20 {
            let prio = k as f64 / 20.0;
            let w = g.mixed_attribute(prio);
            let direct = p3.supply(modified_density(&p3, w, s3.v), w);
            let closed = g.sigma_tilde(prio);
            assert!(
                (direct - closed).abs() <= 1e-10 * direct.abs().max(1.0),
                "{direct} vs {closed}"
            );
        }
    }
}

#[test]
fn supply_is_c1_but_not_c2_at_split() {
    let mut rng = rng(18);
    let mut checked = 0;
    while checked < 500 {
        let ctx = arznet::oracle::random_merge(&mut rng);
        let [p1, p2, p3] = ctx.roads;
        let [s1, s2, s3] = ctx.states;
        let g = merge_geometry((&p1, s1), (&p2, s2), (&p3, s3));
        let Some(p_hat) = g.p_hat.filter(|p| (0.0..=1.0).contains(p)) else {
            continue;
        };
        if g.v3 <= 0.0 {
            continue;
        }
        checked += 1;
        let w = g.mixed_attribute(p_hat);
        let d = |b: &arznet::junction::SupplyBranch, order: i32| {
            let e = b.exponent;
            let base = w + b.delta;
            match order {
                1 => b.k * e * base.powf(e - 1.0) * g.dw,
                _ => b.k * e * (e - 1.0) * base.powf(e - 2.0) * g.dw * g.dw,
            }
        };
        assert!((g.free.eval(w) - g.congested.eval(w)).abs() <= 1e-10 * g.free.eval(w));
        let (a, b) = (d(&g.free, 1), d(&g.congested, 1));
        assert!((a - b).abs() <= 1e-8 * a.abs().max(b.abs()), "{a} vs {b}");
        let (a2, b2) = (d(&g.free, 2), d(&g.congested, 2));
        assert!((a2 - b2).abs() > 1e-3 * a2.abs().max(b2.abs()));
    }
}

#[test]
fn stationary_points_are_stationary() {
    let mut rng = rng(19);
    let (mut checked1, mut checked2) = (0, 0);
    for _ in 0..20_000 {
        let ctx = arznet::oracle::random_merge(&mut rng);
        let [p1, p2, p3] = ctx.roads;
        let [s1, s2, s3] = ctx.states;
        let g = merge_geometry((&p1, s1), (&p2, s2), (&p3, s3));
        let h = 1e-5;
        let valid = |p: f64| {
            (0.0..=1.0).contains(&p)
                && g.p_hat.is_none_or(|ph| (p - ph).abs() > 100.0 * h)
                && g.mixed_attribute(p) > 0.0
        };
        if let Some(ps) = g.p_star.filter(|p| valid(*p)) {
            let q1 = |p: f64| p * g.sigma_tilde(p);
            let slope = (q1(ps + h) - q1(ps - h)) / (2.0 * h);
            assert!(slope.abs() <= 1e-6 * g.sigma_tilde(ps).max(1.0), "q1'(P*) = {slope}");
            checked1 += 1;
        }
        if let Some(ps) = g.p_star2.filter(|p| valid(*p)) {
            let q2 = |p: f64| (1.0 - p) * g.sigma_tilde(p);
            let slope = (q2(ps + h) - q2(ps - h)) / (2.0 * h);
            assert!(slope.abs() <= 1e-6 * g.sigma_tilde(ps).max(1.0), "q2'(P**) = {slope}");
            checked2 += 1;
        }
    }
    assert!(checked1 > 100 && checked2 > 100, "{checked1} {checked2}");
}

#[test]
fn priority_enforced_when_nothing_binds() {
    let p = inflow_road();
    let p3 = RoadParams::new(400.0, 150.0, 1.0).unwrap();
    let s = TrafficState::equilibrium(&p, 20.0).unwrap();
    let s3 = TrafficState::equilibrium(&p3, 5.0).unwrap();
    let sol = solve_merge((&p, s), (&p, s), (&p3, s3), 0.7).unwrap();
    assert!((sol.ratio.unwrap() - 0.7).abs() < 1e-12 || sol.q[..2] == [s.flux(), s.flux()]);
}

#[test]
fn invalid_inputs_rejected() {
    let p = inflow_road();
    let s = TrafficState::equilibrium(&p, 20.0).unwrap();
    assert!(solve_merge((&p, s), (&p, s), (&p, s), 1.0).is_err());
    assert!(TrafficState::new(-1.0, 0.0).is_err());
    let spec = merge_spec([p, p, p], 0.5);
    assert!(solve(&spec, &JunctionInput::new(vec![s, s])).is_err());
}
