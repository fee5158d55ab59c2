mod common;

use gasmix::eos::{fit_linear_compressibility, mass_fractions, H2_COMPRESSIBILITY, NG_COMPRESSIBILITY};
use gasmix::{Eos, EosMode, GasSpecies};
use proptest::prelude::*;
use serde::Deserialize;

const T: f64 = 298.15;

fn species(a_ng: f64, a_h: f64) -> Vec<GasSpecies> {
    let mut ng = GasSpecies::natural_gas(T);
    let mut h2 = GasSpecies::hydrogen(T);
    ng.compressibility = a_ng;
    h2.compressibility = a_h;
    vec![ng, h2]
}

fn sloped_eos() -> Eos {
    Eos::new(species(NG_COMPRESSIBILITY, H2_COMPRESSIBILITY), T, EosMode::LinearZ).unwrap()
}

/// Partial densities with pressure below 10 MPa for the default slopes.
fn admissible() -> impl Strategy<Value = [f64; 2]> {
    (0.5f64..60.0, 0.0f64..0.3).prop_map(|(rho, c)| [rho * (1.0 - c), rho * c])
}

proptest! {
    #[test]
    fn pressure_increases_in_each_partial_density(d in admissible()) {
        let eos = sloped_eos();
        let p = eos.pressure(&d).unwrap();
        for k in 0..2 {
            let mut e = d;
            let h = 1e-6 * (d[0] + d[1]);
            e[k] += h;
            prop_assert!(eos.pressure(&e).unwrap() > p);
        }
    }

    #[test]
    fn zero_slopes_match_ideal(d in admissible()) {
        let ideal = Eos::new(species(0.0, 0.0), T, EosMode::Ideal).unwrap();
        let flat = Eos::new(species(0.0, 0.0), T, EosMode::LinearZ).unwrap();
        let a = ideal.pressure(&d).unwrap();
        let b = flat.pressure(&d).unwrap();
        prop_assert!((a - b).abs() <= 1e-14 * a);
    }

    #[test]
    fn pressure_solves_the_implicit_mixture_equation(d in admissible()) {
        let eos = sloped_eos();
        let p = eos.pressure(&d).unwrap();
        let s: f64 = (0..2).map(|k| d[k] / eos.individual_density(p, k).unwrap()).sum();
        prop_assert!((s - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn mass_fractions_sum_to_one(d in admissible()) {
        let mut c = [0.0; 2];
        mass_fractions(&d, &mut c).unwrap();
        prop_assert!((c[0] + c[1] - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn nodal_densities_round_trip(p in 1.0e5f64..9.0e6, c in 0.0f64..0.3) {
        let eos = sloped_eos();
        let mut d = [0.0; 2];
        eos.densities_at_pressure(p, &[1.0 - c, c], &mut d).unwrap();
        let back = eos.pressure(&d).unwrap();
        prop_assert!((back - p).abs() <= 1e-12 * p);
        let mut cc = [0.0; 2];
        mass_fractions(&d, &mut cc).unwrap();
        prop_assert!((cc[1] - c).abs() <= 1e-14);
    }
}

#[derive(Deserialize)]
struct Sample {
    pressure: f64,
    z: f64,
}

#[derive(Deserialize)]
struct ZTable {
    pressure_unit: String,
    samples: Vec<Sample>,
}

fn hydrogen_table() -> Vec<(f64, f64)> {
    let t: ZTable = serde_json::from_str(&common::fixture("hydrogen_z_298K.json")).unwrap();
    assert_eq!(t.pressure_unit, "atm");
    t.samples.iter().map(|s| (s.pressure * 101_325.0, s.z)).collect()
}

#[test]
fn hydrogen_fit_from_tabulated_data() {
    let rows = hydrogen_table();
    assert_eq!(rows.len(), 15);
    let a = fit_linear_compressibility(&rows).unwrap();
    // Independent oracle: the mean of (Z - 1) / p with p in Pa.
    let oracle = rows.iter().map(|(p, z)| (z - 1.0) / p).sum::<f64>() / 15.0;
    assert!((a - oracle).abs() <= 1e-15 * oracle);
    // The smallest-pressure row alone: (1.0021 - 1) / (3.5129 atm).
    assert!(((0.0021f64 / (3.5129 * 101_325.0)) - 5.8997e-9).abs() < 1e-12);
    assert!((a - 5.7964e-9).abs() < 1e-13, "fit {a:e}");
    // Within 2% of the default hydrogen slope.
    assert!((a - H2_COMPRESSIBILITY).abs() / H2_COMPRESSIBILITY < 0.02);
}

#[test]
fn default_hydrogen_slope_reproduces_tabulated_z() {
    for (p, z) in hydrogen_table() {
        let model = 1.0 + H2_COMPRESSIBILITY * p;
        assert!((model - z).abs() / z < 0.01, "p {p} Z {z} model {model}");
    }
}

#[test]
fn tenfold_slope_overshoots_tabulated_z() {
    // A slope ten times larger, 5.865e-8 per Pa, gives Z near 1.3 at 5 MPa.
    let z: f64 = 1.0 + 5.865e-8 * 5.0e6;
    assert!((z - 1.293).abs() < 1e-3);
}

#[test]
fn natural_gas_slope_from_pseudo_reduced_fit() {
    let p_pc_psi: f64 = 756.8 - 131.07 * 0.7 - 3.6 * 0.49;
    assert!((p_pc_psi - 663.287).abs() < 1e-9);
    let a1 = (0.7666 - 1.0) / 2.0;
    let a_ng = a1 / p_pc_psi * 0.000145;
    assert!(
        (a_ng - NG_COMPRESSIBILITY).abs() / NG_COMPRESSIBILITY.abs() < 0.03,
        "{a_ng:e}"
    );
}

#[test]
fn single_pipe_reference_pressure() {
    let eos = Eos::new(vec![GasSpecies::natural_gas(T)], T, EosMode::Ideal).unwrap();
    let p = eos.pressure(&[45.4990786148]).unwrap();
    assert!((p - 45.4990786148 * 377.9683f64.powi(2)).abs() < 1e-6);
}
