#![allow(dead_code)]

use gasmix::{Network, Scenario, SimConfig, Simulation};

pub fn fixture(name: &str) -> String {
    let path = format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

pub fn network(name: &str) -> Network {
    Network::from_json(&fixture(name)).unwrap()
}

pub fn scenario(name: &str) -> Scenario {
    Scenario::from_json(&fixture(name)).unwrap()
}

pub fn build(net: &str, scen: &str) -> Simulation {
    scenario(scen).build(&network(net), SimConfig::default()).unwrap()
}

/// `sqrt(Σ (a − b)²) / sqrt(Σ b²)`.
pub fn relative_l2(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let n: f64 = b.iter().map(|y| y * y).sum();
    (d / n).sqrt()
}

pub fn max_relative_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let s = x.abs().max(y.abs());
            if s == 0.0 {
                0.0
            } else {
                (x - y).abs() / s
            }
        })
        .fold(0.0, f64::max)
}

pub fn verdict(criterion: u32, title: &str, ok: bool, detail: &str) {
    println!(
        "{} criterion {criterion} ({title}): {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
}

use gasmix::junction::EndData;
use gasmix::Eos;
use proptest::prelude::*;

/// Raw parameters of one pipe end at a node.
#[derive(Debug, Clone, Copy)]
pub struct EndSpec {
    pub pressure: f64,
    pub h2: f64,
    pub lambda: f64,
    pub diameter: f64,
    pub dx: f64,
    pub flux: f64,
    pub ratio: f64,
}

pub fn end_spec() -> impl Strategy<Value = EndSpec> {
    (
        2.0e6f64..6.0e6,
        0.0f64..0.03,
        0.008f64..0.016,
        0.4f64..1.0,
        100.0f64..2000.0,
        -300.0f64..300.0,
        prop_oneof![Just(1.0), 1.0f64..1.5],
    )
        .prop_map(|(pressure, h2, lambda, diameter, dx, flux, ratio)| EndSpec {
            pressure,
            h2,
            lambda,
            diameter,
            dx,
            flux,
            ratio,
        })
}

impl EndSpec {
    pub fn end(&self, eos: &Eos) -> EndData {
        EndData {
            area: std::f64::consts::PI * self.diameter * self.diameter / 4.0,
            friction: self.lambda / (2.0 * self.diameter),
            spacing: 0.5 * self.dx,
            flux: self.flux,
            density: eos.mixture_density(self.pressure, &[1.0 - self.h2, self.h2]).unwrap(),
            pressure: self.pressure,
            ratio: self.ratio,
        }
    }
}

pub fn ng_h2() -> Eos {
    let t = 298.15;
    Eos::new(
        vec![gasmix::GasSpecies::natural_gas(t), gasmix::GasSpecies::hydrogen(t)],
        t,
        gasmix::EosMode::Ideal,
    )
    .unwrap()
}

/// Mixed nodal state one step on, for supply `fs` of pure hydrogen and
/// withdrawal `fd`.
pub fn mix_after(
    eos: &Eos,
    specs: &[EndSpec],
    ends: &[EndData],
    fs: f64,
    fd: f64,
    dt: f64,
) -> (f64, Vec<f64>, [f64; 2], f64) {
    use gasmix::junction::{boundary_flux, nodal_mixture, nodal_pressure, MixInputs};
    let p = nodal_pressure(ends, fs, fd, dt).unwrap();
    let mut inflow = [0.0; 2];
    let mut outflow = 0.0;
    let mut net = 0.0;
    for (e, s) in ends.iter().zip(specs) {
        let q = e.area * boundary_flux(e, p, dt);
        net += q;
        if q < 0.0 {
            inflow[0] -= q * (1.0 - s.h2);
            inflow[1] -= q * s.h2;
        } else {
            outflow += q;
        }
    }
    let mix = MixInputs {
        inflow: &inflow,
        outflow,
        supply: fs,
        supply_fractions: &[0.0, 1.0],
        withdrawal: fd,
    };
    let node = nodal_mixture(eos, &mix, p, &[1.0, 0.0], 1e-10).unwrap();
    (p, node.fractions, inflow, net)
}
