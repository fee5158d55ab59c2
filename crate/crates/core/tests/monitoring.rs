mod common;

use common::*;
use gasmix::junction::nodal_pressure;
use gasmix::monitoring::{max_injection, max_withdrawal, theta_upsilon};
use gasmix::network::Limits;
use gasmix::{SimConfig, Simulation};
use proptest::prelude::*;

proptest! {
    #[test]
    fn hydrogen_fraction_grows_with_hydrogen_supply(
        specs in proptest::collection::vec(end_spec(), 1..5),
        f1 in 0.0f64..40.0,
        df in 0.0f64..40.0,
        dt in 0.01f64..1.0,
    ) {
        let eos = ng_h2();
        let ends: Vec<_> = specs.iter().map(|s| s.end(&eos)).collect();
        let (_, a, ..) = mix_after(&eos, &specs, &ends, f1, 0.0, dt);
        let (_, b, ..) = mix_after(&eos, &specs, &ends, f1 + df, 0.0, dt);
        prop_assert!(b[1] >= a[1] - 1e-15, "{} then {}", a[1], b[1]);
    }

    #[test]
    fn capped_injection_meets_the_limit_in_one_step(
        specs in proptest::collection::vec(end_spec(), 1..5),
        c_max in 0.005f64..0.2,
        dt in 0.01f64..1.0,
    ) {
        let eos = ng_h2();
        let ends: Vec<_> = specs.iter().map(|s| s.end(&eos)).collect();
        let dec = theta_upsilon(&ends, dt).unwrap();
        let fr: Vec<f64> = specs.iter().map(|s| s.h2).collect();
        let cap = max_injection(&dec, &fr, c_max, 1.0).unwrap();
        let (_, c, inflow, _) = mix_after(&eos, &specs, &ends, cap, 0.0, dt);
        let through = inflow[0] + inflow[1] + cap;
        prop_assume!(through > 1e-3);
        if cap > 0.0 {
            prop_assert!((c[1] - c_max).abs() <= 1e-10, "{} vs {}", c[1], c_max);
        } else {
            prop_assert!(c[1] >= c_max - 1e-10);
        }
    }

    #[test]
    fn capped_withdrawal_lands_on_the_pressure_floor(
        specs in proptest::collection::vec(end_spec(), 1..5),
        drop in 1.0e3f64..2.0e5,
        dt in 0.01f64..1.0,
    ) {
        let eos = ng_h2();
        let ends: Vec<_> = specs.iter().map(|s| s.end(&eos)).collect();
        let dec = theta_upsilon(&ends, dt).unwrap();
        let p_min = dec.upsilon - drop;
        let fd = max_withdrawal(&dec, p_min);
        prop_assert!(fd > 0.0);
        let p = nodal_pressure(&ends, 0.0, fd, dt).unwrap();
        prop_assert!((p - p_min).abs() <= 1e-9 * p_min.abs(), "{p} {p_min} {fd}");
        // Above the zero-injection pressure nothing may be withdrawn.
        prop_assert_eq!(max_withdrawal(&dec, dec.upsilon + drop), 0.0);
    }
}

#[test]
fn pressure_floor_curtails_withdrawal_in_simulation() {
    let mut net = network("five_node.json");
    let cfg = SimConfig {
        duration: 100.0,
        dt: Some(0.1),
        output_every: 10,
        monitoring: true,
        ..SimConfig::default()
    };
    let p0 = Simulation::new(net.clone(), cfg.clone()).unwrap().nodes()[4].pressure;
    let p_min = p0 + 2000.0;
    net.nodes[4].limits = Some(Limits {
        min_pressure: Some(p_min),
        ..Limits::default()
    });
    let mut sim = Simulation::new(net, cfg).unwrap();
    sim.run().unwrap();
    let h = sim.history();
    assert!(!h.events.is_empty());
    assert!(h
        .events
        .iter()
        .all(|e| e.node == "N5" && e.policy == "min_pressure" && !e.violated));
    assert!(h.events.iter().all(|e| e.applied < e.planned));
    for s in h.samples.iter().skip(1) {
        let n5 = &s.nodes[4];
        assert!((n5.pressure - p_min).abs() <= 1e-9 * p_min, "{}", n5.pressure);
        assert!(-n5.injection < -n5.planned);
    }
}

#[test]
fn policies_are_inactive_when_monitoring_is_off() {
    let mut s = scenario("monitoring.scenario.json");
    s.duration = Some(50.0);
    s.monitoring = Some(false);
    let mut sim = s.build(&network("five_node.json"), SimConfig::default()).unwrap();
    sim.run().unwrap();
    assert!(sim.history().events.is_empty());
    for smp in &sim.history().samples {
        assert_eq!(smp.nodes[3].injection, smp.nodes[3].planned);
    }
}
