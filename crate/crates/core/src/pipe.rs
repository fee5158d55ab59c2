//! Staggered-grid updates inside one pipe.
//!
//! Partial densities live at cell centres on integer time levels, the total
//! mass flux at cell edges on half levels. Cell storage is cell-major:
//! `dens[i * ns + α]`.

use crate::eos::Eos;
use crate::error::{Error, Result};

/// Lower bound on total density for upwind mass-fraction ratios, kg/m³.
pub const DENSITY_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct PipeState {
    pub ns: usize,
    /// Partial densities, `cells × ns`.
    pub dens: Vec<f64>,
    /// Total mass flux at the `cells + 1` edges.
    pub flux: Vec<f64>,
    pub dx: f64,
}

impl PipeState {
    pub fn uniform(cells: usize, dx: f64, d: &[f64], flux: f64) -> Self {
        PipeState {
            ns: d.len(),
            dens: d.iter().copied().cycle().take(cells * d.len()).collect(),
            flux: vec![flux; cells + 1],
            dx,
        }
    }

    pub fn cells(&self) -> usize {
        self.flux.len() - 1
    }

    pub fn cell(&self, i: usize) -> &[f64] {
        &self.dens[i * self.ns..(i + 1) * self.ns]
    }

    pub fn total(&self, i: usize) -> f64 {
        self.cell(i).iter().sum()
    }

    /// Linepack per unit area of each species, kg/m².
    pub fn species_mass(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.ns];
        for cell in self.dens.chunks_exact(self.ns) {
            for (mk, &dk) in m.iter_mut().zip(cell) {
                *mk += dk;
            }
        }
        m.iter_mut().for_each(|x| *x *= self.dx);
        m
    }
}

/// Friction data of a pipe: `λ / (2 D)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Friction {
    pub lambda: f64,
    pub diameter: f64,
}

impl Friction {
    pub fn coefficient(&self) -> f64 {
        self.lambda / (2.0 * self.diameter)
    }
}

/// Component flux `φ c_α` with `c` taken from the upstream state.
pub fn upwind_species_flux(phi: f64, left: &[f64], right: &[f64], k: usize, floor: f64) -> Result<f64> {
    if phi == 0.0 {
        return Ok(0.0);
    }
    let up = if phi >= 0.0 { left } else { right };
    let total: f64 = up.iter().sum();
    if !(total >= floor) {
        return Err(Error::Degenerate(format!(
            "upstream density {total:e} below floor {floor:e}"
        )));
    }
    Ok(phi * (up[k] / total))
}

/// All component fluxes at one edge, written into `out`.
pub fn upwind_fluxes(phi: f64, left: &[f64], right: &[f64], floor: f64, out: &mut [f64]) -> Result<()> {
    if phi == 0.0 {
        out.iter_mut().for_each(|x| *x = 0.0);
        return Ok(());
    }
    let up = if phi >= 0.0 { left } else { right };
    let total: f64 = up.iter().sum();
    if !(total >= floor) {
        return Err(Error::Degenerate(format!(
            "upstream density {total:e} below floor {floor:e}"
        )));
    }
    for (o, &d) in out.iter_mut().zip(up) {
        *o = phi * (d / total);
    }
    Ok(())
}

/// Root `φ` of `a·sign(φ)·φ² + φ = c` with `sign(φ) = sign(c)`, for `a ≥ 0`.
///
/// Written as `2c / (1 + √(1 + 4a|c|))`, which equals
/// `sign(c)(−1 + √(1 + 4a|c|)) / (2a)` without the cancellation for small
/// `a|c|`.
pub fn solve_friction_quadratic(a: f64, c: f64) -> f64 {
    2.0 * c / (1.0 + (1.0 + 4.0 * a * c.abs()).sqrt())
}

/// Mass update for every cell from component fluxes at all edges.
///
/// `comp_flux` is edge-major, `(cells + 1) × ns`. `diffusion` holds `ε_α`;
/// the diffusive flux through the two pipe ends is zero.
pub fn update_densities(state: &mut PipeState, comp_flux: &[f64], dt: f64, diffusion: &[f64]) -> Result<()> {
    let ns = state.ns;
    let n = state.cells();
    let r = dt / state.dx;
    debug_assert_eq!(comp_flux.len(), (n + 1) * ns);
    let diffusive = diffusion.iter().any(|&e| e > 0.0);
    let old = if diffusive { Some(state.dens.clone()) } else { None };
    for i in 0..n {
        for k in 0..ns {
            let idx = i * ns + k;
            let mut d = state.dens[idx] - r * (comp_flux[(i + 1) * ns + k] - comp_flux[i * ns + k]);
            if let Some(old) = &old {
                let eps = diffusion[k];
                if eps > 0.0 {
                    let c = old[idx];
                    let l = if i > 0 { old[idx - ns] } else { c };
                    let rr = if i + 1 < n { old[idx + ns] } else { c };
                    d += eps * dt / (state.dx * state.dx) * (rr - 2.0 * c + l);
                }
            }
            if d < 0.0 {
                if d < -1e-12 {
                    return Err(Error::NegativeDensity {
                        cell: i,
                        species: k,
                        value: d,
                    });
                }
                d = 0.0;
            }
            state.dens[idx] = d;
        }
    }
    Ok(())
}

/// Total density and pressure of every cell.
pub fn cell_pressures(state: &PipeState, eos: &Eos, rho: &mut [f64], p: &mut [f64]) -> Result<()> {
    for (i, cell) in state.dens.chunks_exact(state.ns).enumerate() {
        rho[i] = cell.iter().sum();
        p[i] = eos.pressure(cell).map_err(|e| e.in_cell(i))?;
    }
    Ok(())
}

/// Advance the interior edge fluxes one half level, friction semi-implicit.
///
/// `rho` and `p` are the total densities and pressures of the cells at the
/// density level between the old and new flux levels.
pub fn update_fluxes(flux: &mut [f64], rho: &[f64], p: &[f64], fr: Friction, dx: f64, dt: f64) {
    let k = dt * fr.coefficient();
    let r = dt / dx;
    for j in 1..flux.len() - 1 {
        let phi = flux[j];
        let sum = rho[j - 1] + rho[j];
        let a = k / sum;
        let c = phi - r * (p[j] - p[j - 1]) - a * phi * phi.abs();
        flux[j] = solve_friction_quadratic(a, c);
    }
}
