//! Acceptance suite. Each test prints one PASS/FAIL line and then asserts.

mod common;

use std::time::Instant;

use common::*;
use gasmix::convergence::{convergence_study, Observable};
use gasmix::eos::{Eos, EosMode, GasSpecies};
use gasmix::junction::{boundary_flux, nodal_mixture, nodal_pressure, EndData, MixInputs};
use gasmix::monitoring::{max_injection, max_withdrawal, theta_upsilon};
use gasmix::network::{Composition, SpeciesDef};
use gasmix::pipe::solve_friction_quadratic;
use gasmix::scenario::SpeciesOverride;
use gasmix::schedule::Schedule;
use gasmix::steady::check_tables;
use gasmix::{History, Network, SimConfig, Simulation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NETWORK: &str = "five_node.json";

fn node_series(h: &History, q: usize, f: impl Fn(&gasmix::engine::NodeSample) -> f64) -> Vec<f64> {
    h.samples.iter().map(|s| f(&s.nodes[q])).collect()
}

fn pipe_series(h: &History, k: usize, f: impl Fn(&gasmix::engine::PipeSample) -> f64) -> Vec<f64> {
    h.samples.iter().map(|s| f(&s.pipes[k])).collect()
}

/// Every recorded scalar of a run, in a fixed order.
fn flatten(h: &History) -> Vec<f64> {
    let mut v = Vec::new();
    for s in &h.samples {
        for n in &s.nodes {
            v.push(n.pressure);
            v.push(n.injection);
            v.extend(&n.fractions);
        }
        for p in &s.pipes {
            v.extend([p.flux_in, p.flux_out, p.pressure_in, p.pressure_out]);
            v.extend(&p.dens_in);
            v.extend(&p.dens_out);
        }
    }
    v
}

fn criterion_1_table_cross_checks() {
    let start = Instant::now();
    let net = network(NETWORK);
    let mu1: f64 = 1.5290113;
    let p1 = 3.447378645e6;
    let inlet = 5.2710811e6;
    let compressor_residual = (mu1 * p1 - inlet).abs() / inlet;
    // Initial-data flows: (inflow, outflow) per node.
    let balances = [
        ("N2", 233.3 + 66.66, 300.0),
        ("N3", 233.3 - 83.33, 150.0),
        ("N4", 83.33 + 66.66, 150.0),
    ];
    let balance_residual = balances
        .iter()
        .map(|(_, a, b): &(&str, f64, f64)| (a - b).abs() / b.abs().max(a.abs()))
        .fold(0.0, f64::max);
    let eos = Eos::new(net.gas_species().unwrap(), net.temperature, EosMode::Ideal).unwrap();
    let report = check_tables(&net, &eos, 0.0).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let ok = compressor_residual <= 1e-6 && balance_residual <= 1e-3 && report.ok() && elapsed < 1.0;
    verdict(
        1,
        "table cross-checks",
        ok,
        &format!(
            "mu1*p1 rel {compressor_residual:.3e} (tol 1e-6), balances rel {balance_residual:.3e} (tol 1e-3), \
             {} library checks ok={}, {elapsed:.3} s (limit 1 s)",
            report.checks.len(),
            report.ok()
        ),
    );
    assert!(ok, "{:?}", report.failures());
}

fn criterion_2_steady_hold() {
    let mut sim = build(NETWORK, "steady_hold.scenario.json");
    assert_eq!(sim.plan().steps, 1000);
    let before = sim.state();
    sim.run().unwrap();
    let after = sim.state();
    let mut worst: f64 = 0.0;
    for (a, b) in before.pipes.iter().zip(&after.pipes) {
        let ns = a.ns;
        for k in 0..ns {
            let scale = (0..a.cells()).map(|i| a.dens[i * ns + k].abs()).fold(0.0, f64::max);
            for i in 0..a.cells() {
                let d = (a.dens[i * ns + k] - b.dens[i * ns + k]).abs();
                if scale == 0.0 {
                    assert_eq!(d, 0.0);
                } else {
                    worst = worst.max(d / scale);
                }
            }
        }
        let scale = a.flux.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        for (x, y) in a.flux.iter().zip(&b.flux) {
            worst = worst.max((x - y).abs() / scale);
        }
    }
    for (a, b) in before.nodes.iter().zip(&after.nodes) {
        worst = worst.max((a.pressure - b.pressure).abs() / a.pressure);
        for (x, y) in a.fractions.iter().zip(&b.fractions) {
            worst = worst.max((x - y).abs());
        }
    }
    let ok = worst < 1e-6;
    verdict(
        2,
        "steady hold",
        ok,
        &format!("max relative drift over 1000 steps {worst:.3e} (tol 1e-6)"),
    );
    assert!(ok);
}

fn criterion_3_mass_conservation() {
    // Desk-scale window with hydrogen entering at N4.
    let mut desk = scenario("monitoring.scenario.json");
    desk.duration = Some(3600.0);
    desk.dt = Some(0.1);
    let mut sim = desk.build(&network(NETWORK), SimConfig::default()).unwrap();
    sim.run().unwrap();
    let desk_residual = sim.history().mass_balance_residual().max_species_relative();

    // Full 24 h single-gas transient at the small step.
    let mut sim = build(NETWORK, "single_gas.scenario.json");
    assert_eq!(sim.plan().steps, 4_320_000);
    sim.run().unwrap();
    let mb = sim.history().mass_balance_residual();
    let full_residual = mb.max_species_relative();
    let ok = desk_residual <= 1e-9 && full_residual <= 1e-9;
    verdict(
        3,
        "mass conservation",
        ok,
        &format!("per-species residual / linepack: 1 h {desk_residual:.3e}, 24 h {full_residual:.3e} (tol 1e-9)"),
    );
    assert!(ok);
}

fn criterion_4_convergence_order() {
    let net = network("single_pipe_ng.json");
    let cfg = scenario("single_pipe.scenario.json").apply_config(SimConfig::default());
    let r = convergence_study(&net, &cfg, 3, 108.0, &Observable::PressuresAndFluxes).unwrap();
    let order = r.observed_order();
    let ok = (order - 2.0).abs() <= 0.2;
    verdict(
        4,
        "convergence order",
        ok,
        &format!(
            "cells {:?}, successive differences {:.3e} {:.3e}, observed order {order:.3} (2.0 +/- 0.2)",
            r.levels.iter().map(|l| l.cells[0]).collect::<Vec<_>>(),
            r.differences[0],
            r.differences[1]
        ),
    );
    assert!(ok);
}

fn criterion_5_diffusion_negligible() {
    let net = network("single_pipe_blend.json");
    let base = scenario("single_pipe_blend.scenario.json");
    let mut diffusive = base.clone();
    diffusive.species = ["NG", "H2"]
        .iter()
        .map(|s| SpeciesOverride {
            name: s.to_string(),
            compressibility: None,
            diffusion: Some(0.1),
        })
        .collect();
    let run = |s: &gasmix::Scenario| {
        let mut sim = s.build(&net, SimConfig::default()).unwrap();
        sim.run().unwrap();
        sim.into_history()
    };
    let h0 = run(&base);
    let h1 = run(&diffusive);
    let series = |h: &History| {
        [
            pipe_series(h, 0, |p| p.flux_in),
            pipe_series(h, 0, |p| p.dens_out[0]),
            pipe_series(h, 0, |p| p.dens_out[1]),
        ]
    };
    let (a, b) = (series(&h1), series(&h0));
    let diffs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| relative_l2(x, y)).collect();
    let ok = diffs.iter().all(|&d| d < 1e-3);
    verdict(
        5,
        "diffusion negligibility",
        ok,
        &format!(
            "relative L2 differences eps=0.1 vs 0: inlet flux {:.3e}, outlet NG {:.3e}, outlet H2 {:.3e} (tol 1e-3)",
            diffs[0], diffs[1], diffs[2]
        ),
    );
    assert!(ok);
}

fn criterion_6_eos_consistency() {
    let net = network(NETWORK);
    let s = scenario("linear_z.scenario.json");
    let run = |s: &gasmix::Scenario| {
        let mut sim = s.build(&net, SimConfig::default()).unwrap();
        sim.run().unwrap();
        sim.into_history()
    };
    let mut ideal = s.clone();
    ideal.eos = Some(EosMode::Ideal);
    let mut flat = s.clone();
    flat.species = ["NG", "H2"]
        .iter()
        .map(|n| SpeciesOverride {
            name: n.to_string(),
            compressibility: Some(0.0),
            diffusion: None,
        })
        .collect();
    let h_ideal = run(&ideal);
    let h_flat = run(&flat);
    let h_real = run(&s);
    let zero_slope = max_relative_diff(&flatten(&h_flat), &flatten(&h_ideal));
    let n5 = net.node_index("N5").unwrap();
    let deviation = max_relative_diff(
        &node_series(&h_real, n5, |n| n.pressure),
        &node_series(&h_ideal, n5, |n| n.pressure),
    );
    let ok = zero_slope <= 1e-12 && deviation > 1e-3;
    verdict(
        6,
        "EOS consistency",
        ok,
        &format!("a=0 vs ideal max rel diff {zero_slope:.3e} (tol 1e-12); default slopes vs ideal N5 pressure max rel deviation {deviation:.4} (needs > 1e-3)"),
    );
    assert!(ok);
}

fn random_end(rng: &mut ChaCha8Rng, eos: &Eos) -> (EndData, f64) {
    let p = rng.gen_range(2.0e6..6.0e6);
    let c_h2 = rng.gen_range(0.0..0.03);
    let density = eos.mixture_density(p, &[1.0 - c_h2, c_h2]).unwrap();
    let lambda = rng.gen_range(0.008..0.016);
    let diameter = rng.gen_range(0.4..1.0);
    let dx = rng.gen_range(100.0..2000.0);
    let end = EndData {
        area: std::f64::consts::PI * diameter * diameter / 4.0,
        friction: lambda / (2.0 * diameter),
        spacing: 0.5 * dx,
        flux: rng.gen_range(-300.0..300.0),
        density,
        pressure: p,
        ratio: if rng.gen_bool(0.3) {
            rng.gen_range(1.0..1.5)
        } else {
            1.0
        },
    };
    (end, c_h2)
}

fn criterion_7_monitoring_guarantee() {
    let net = network(NETWORK);
    let n4 = net.node_index("N4").unwrap();
    let s = scenario("monitoring.scenario.json");
    let run = |on: bool| {
        let mut s = s.clone();
        s.monitoring = Some(on);
        let mut sim = s.build(&net, SimConfig::default()).unwrap();
        sim.run().unwrap();
        let k = sim.eos().index_of("H2").unwrap();
        let h = sim.into_history();
        (node_series(&h, n4, |n| n.fractions[k]), h)
    };
    let (on, h_on) = run(true);
    let (off, _) = run(false);
    let peak_on = on.iter().copied().fold(0.0, f64::max);
    let peak_off = off.iter().copied().fold(0.0, f64::max);
    // Recorded steps where the cap bit without curtailing fully sit on it.
    let mut on_cap: f64 = 0.0;
    for ev in h_on.events.iter().filter(|e| e.node == "N4" && e.applied > 0.0) {
        if let Some(i) = h_on.samples.iter().position(|s| s.time == ev.time) {
            on_cap = on_cap.max((on[i] - 0.033).abs());
        }
    }

    // One-step properties on random nodal states.
    let t = 298.15;
    let eos = Eos::new(
        vec![GasSpecies::natural_gas(t), GasSpecies::hydrogen(t)],
        t,
        EosMode::Ideal,
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut states, mut cap_err, mut inv_err): (usize, f64, f64) = (0, 0.0, 0.0);
    while states < 500 {
        let n_ends = rng.gen_range(2..=4);
        let (ends, fr): (Vec<EndData>, Vec<f64>) = (0..n_ends).map(|_| random_end(&mut rng, &eos)).unzip();
        let dt = rng.gen_range(0.01..0.5);
        let c_max = rng.gen_range(0.031..0.1);
        let dec = theta_upsilon(&ends, dt).unwrap();
        let f = max_injection(&dec, &fr, c_max, 1.0).unwrap();
        if f <= 0.0 {
            continue;
        }
        states += 1;
        let p = nodal_pressure(&ends, f, 0.0, dt).unwrap();
        let mut inflow = [0.0; 2];
        let mut outflow = 0.0;
        for (e, &c) in ends.iter().zip(&fr) {
            let q = e.area * boundary_flux(e, p, dt);
            if q < 0.0 {
                inflow[0] -= q * (1.0 - c);
                inflow[1] -= q * c;
            } else {
                outflow += q;
            }
        }
        let mix = MixInputs {
            inflow: &inflow,
            outflow,
            supply: f,
            supply_fractions: &[0.0, 1.0],
            withdrawal: 0.0,
        };
        let node = nodal_mixture(&eos, &mix, p, &[1.0, 0.0], 1e-10).unwrap();
        cap_err = cap_err.max((node.fractions[1] - c_max).abs());

        let p_min = dec.upsilon - rng.gen_range(1.0e4..1.0e6);
        let fd = max_withdrawal(&dec, p_min);
        let p_back = nodal_pressure(&ends, 0.0, fd, dt).unwrap();
        inv_err = inv_err.max((p_back - p_min).abs() / p_min);
    }

    let ok = peak_on <= 0.033 + 1e-6 && peak_off > 0.033 && on_cap <= 1e-8 && cap_err <= 1e-8 && inv_err <= 1e-10;
    verdict(
        7,
        "monitoring guarantee",
        ok,
        &format!(
            "N4 H2 peak on {peak_on:.6} (<= 0.033+1e-6), off {peak_off:.6} (> 0.033), clamped steps {on_cap:.1e}; \
             500 states: fraction err {cap_err:.1e} (tol 1e-8), pressure inversion err {inv_err:.1e} (tol 1e-10)"
        ),
    );
    assert!(ok);
}

fn criterion_8_quadratic_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut worst, mut sign_ok) = (0.0f64, true);
    for _ in 0..100_000 {
        let a = 10f64.powf(rng.gen_range(-12.0..6.0));
        let c = 10f64.powf(rng.gen_range(-8.0..6.0)) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let phi = solve_friction_quadratic(a, c);
        let r = (a * phi * phi.abs() + phi - c).abs() / c.abs().max(1.0);
        worst = worst.max(r);
        sign_ok &= phi.signum() == c.signum();
    }
    sign_ok &= solve_friction_quadratic(3.0, 0.0) == 0.0;
    let elapsed = start.elapsed().as_secs_f64();
    let ok = worst <= 1e-10 && sign_ok && elapsed < 1.0;
    verdict(
        8,
        "quadratic solve",
        ok,
        &format!(
            "1e5 pairs: max scaled residual {worst:.3e} (tol 1e-10), signs ok={sign_ok}, {elapsed:.3} s (limit 1 s)"
        ),
    );
    assert!(ok);
}

fn criterion_9_homogeneous_reduction() {
    let mut single: Network = network(NETWORK);
    single.species.retain(|s| s.name == "NG");
    single.initial.as_mut().unwrap().composition.remove("H2");

    let mut twin = single.clone();
    let ng = twin.species[0].clone();
    twin.species.push(SpeciesDef {
        name: "NGb".into(),
        ..ng
    });
    let mut comp = Composition::pure("NG");
    comp.fractions.insert("NGb".into(), Schedule::constant(0.3));
    twin.nodes[0].composition = Some(comp);
    let init = twin.initial.as_mut().unwrap();
    init.composition.insert("NG".into(), 0.7);
    init.composition.insert("NGb".into(), 0.3);

    let mut cfg = scenario("single_gas.scenario.json").apply_config(SimConfig::default());
    cfg.duration = 3600.0;
    cfg.dt = Some(0.1);
    cfg.output_every = 50;
    let run = |net: Network| {
        let mut sim = Simulation::new(net, cfg.clone()).unwrap();
        sim.run().unwrap();
        sim.into_history()
    };
    let h1 = run(single);
    let h2 = run(twin);
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut fraction_err: f64 = 0.0;
    for (s1, s2) in h1.samples.iter().zip(&h2.samples) {
        for (n1, n2) in s1.nodes.iter().zip(&s2.nodes) {
            a.extend([n1.pressure, n1.injection]);
            b.extend([n2.pressure, n2.injection]);
            fraction_err = fraction_err.max((n2.fractions[1] - 0.3).abs());
        }
        for (p1, p2) in s1.pipes.iter().zip(&s2.pipes) {
            a.extend([p1.flux_in, p1.flux_out, p1.dens_in[0], p1.dens_out[0]]);
            b.extend([
                p2.flux_in,
                p2.flux_out,
                p2.dens_in.iter().sum(),
                p2.dens_out.iter().sum(),
            ]);
            fraction_err = fraction_err.max((p2.dens_out[1] / (p2.dens_out[0] + p2.dens_out[1]) - 0.3).abs());
        }
    }
    let diff = max_relative_diff(&b, &a);
    let ok = diff <= 1e-12 && fraction_err <= 1e-12 && !a.is_empty();
    verdict(
        9,
        "homogeneous reduction",
        ok,
        &format!("two identical species vs one: max rel diff {diff:.3e} (tol 1e-12), fraction drift {fraction_err:.3e} (tol 1e-12)"),
    );
    assert!(ok);
}

/// Runs every criterion, one PASS/FAIL line each, and fails if any did.
fn main() {
    let criteria: [(u32, &str, fn()); 9] = [
        (1, "table cross-checks", criterion_1_table_cross_checks),
        (2, "steady hold", criterion_2_steady_hold),
        (3, "mass conservation", criterion_3_mass_conservation),
        (4, "convergence order", criterion_4_convergence_order),
        (5, "diffusion negligible", criterion_5_diffusion_negligible),
        (6, "eos consistency", criterion_6_eos_consistency),
        (7, "monitoring guarantee", criterion_7_monitoring_guarantee),
        (8, "quadratic oracle", criterion_8_quadratic_oracle),
        (9, "homogeneous reduction", criterion_9_homogeneous_reduction),
    ];
    let mut failed = Vec::new();
    for (n, title, run) in criteria {
        let start = Instant::now();
        if std::panic::catch_unwind(run).is_err() {
            // A criterion that panicked before its verdict still gets a line.
            println!("FAIL criterion {n} ({title}): aborted, see panic message above");
            failed.push(n);
        }
        println!("      criterion {n} took {:.1} s", start.elapsed().as_secs_f64());
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed.len(),
        criteria.len()
    );
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
