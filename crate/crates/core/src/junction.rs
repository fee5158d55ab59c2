//! Nodal coupling: explicit nodal pressure, boundary fluxes and mixing.
//!
//! Every pipe end at a node is seen in local orientation, with positive flux
//! leaving the node. For a pipe end that is the pipe's start this is the
//! pipe's own flux at edge 0; for a pipe's end it is minus the flux at the
//! last edge. The boundary flux is explicit in the nodal pressure,
//!
//! ```text
//! φ_new = Θ + w p,   Θ = φ_old − Δt λ/(2D) φ_old|φ_old| / d_first − (Δt/h) p_first,
//! w = μ Δt / h,
//! ```
//!
//! where `h` is the distance from the node to the first cell centre used by
//! the stencil. Imposing `Σ S φ_new = F^s − F^d` gives the nodal pressure.

use crate::eos::Eos;
use crate::error::{Error, Result};
use crate::schedule::Schedule;

/// One pipe end at a node, local orientation, data at the old levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndData {
    pub area: f64,
    /// `λ / (2 D)`.
    pub friction: f64,
    /// Node-to-first-cell spacing used in the boundary stencil, m.
    pub spacing: f64,
    /// Flux leaving the node through this end at the previous half level.
    pub flux: f64,
    /// Total density of the first cell.
    pub density: f64,
    /// Pressure of the first cell.
    pub pressure: f64,
    /// Compression ratio, 1 unless a compressor sits at this end.
    pub ratio: f64,
}

impl EndData {
    pub fn theta(&self, dt: f64) -> f64 {
        self.flux - dt * self.friction * self.flux * self.flux.abs() / self.density - dt / self.spacing * self.pressure
    }

    /// Coefficient of the nodal pressure in the boundary flux.
    pub fn weight(&self, dt: f64) -> f64 {
        self.ratio * dt / self.spacing
    }
}

/// Explicit nodal pressure for net injection `fs − fd`.
pub fn nodal_pressure(ends: &[EndData], fs: f64, fd: f64, dt: f64) -> Result<f64> {
    let mut st = 0.0;
    let mut sw = 0.0;
    for e in ends {
        st += e.area * e.theta(dt);
        sw += e.area * e.weight(dt);
    }
    if !(sw > 0.0) {
        return Err(Error::Degenerate("node without adjacent pipes".into()));
    }
    Ok((fs - fd - st) / sw)
}

/// Flux leaving the node through `end` at the new half level.
pub fn boundary_flux(end: &EndData, p_node: f64, dt: f64) -> f64 {
    end.theta(dt) + end.weight(dt) * p_node
}

/// Inputs of `boundary_flux` evaluated through the EOS for a first-cell
/// mixture given by partial densities.
pub fn end_data(
    eos: &Eos,
    first_cell: &[f64],
    flux: f64,
    area: f64,
    friction: f64,
    spacing: f64,
    ratio: f64,
) -> Result<EndData> {
    Ok(EndData {
        area,
        friction,
        spacing,
        flux,
        density: first_cell.iter().sum(),
        pressure: eos.pressure(first_cell)?,
        ratio,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub pressure: f64,
    /// Partial densities after mixing.
    pub dens: Vec<f64>,
    /// Mass fractions after mixing.
    pub fractions: Vec<f64>,
}

/// Flow-weighted mass balance inputs for mixing at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct MixInputs<'a> {
    /// Component mass flows arriving from pipes, kg/s.
    pub inflow: &'a [f64],
    /// Total mass flow leaving the node into pipes, kg/s.
    pub outflow: f64,
    pub supply: f64,
    pub supply_fractions: &'a [f64],
    pub withdrawal: f64,
}

/// Mix the gas arriving at a node. When the throughflow is below `floor`,
/// the previous fractions are kept.
pub fn nodal_mixture(eos: &Eos, m: &MixInputs<'_>, p_node: f64, previous: &[f64], floor: f64) -> Result<NodeState> {
    let ns = m.inflow.len();
    let mut num: Vec<f64> = m
        .inflow
        .iter()
        .zip(m.supply_fractions)
        .map(|(&q, &c)| q + m.supply * c)
        .collect();
    let through = m.withdrawal + m.outflow;
    let total: f64 = num.iter().sum();
    if !(through >= floor) || !(total > 0.0) {
        num.copy_from_slice(previous);
    } else {
        num.iter_mut().for_each(|x| *x /= total);
    }
    let fractions = num;
    let mut dens = vec![0.0; ns];
    eos.densities_at_pressure(p_node, &fractions, &mut dens)?;
    Ok(NodeState {
        pressure: p_node,
        dens,
        fractions,
    })
}

/// Species split of a nodal withdrawal by the mixed composition.
pub fn split_withdrawal(fd: f64, node: &NodeState) -> Result<Vec<f64>> {
    let total: f64 = node.dens.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("withdrawal from an empty node".into()));
    }
    Ok(node.dens.iter().map(|&d| fd * (d / total)).collect())
}

/// Densities of the cell next to a node one level later, local orientation:
/// `flux_node` is the flux leaving the node, `flux_inner` the flux at the
/// cell's other face pointing away from the node.
pub fn update_boundary_densities(
    node: &NodeState,
    first_cell: &[f64],
    second_cell: &[f64],
    flux_node: f64,
    flux_inner: f64,
    dt: f64,
    dx: f64,
    floor: f64,
) -> Result<Vec<f64>> {
    let ns = first_cell.len();
    let mut f0 = vec![0.0; ns];
    let mut f1 = vec![0.0; ns];
    crate::pipe::upwind_fluxes(flux_node, &node.dens, first_cell, floor, &mut f0)?;
    crate::pipe::upwind_fluxes(flux_inner, first_cell, second_cell, floor, &mut f1)?;
    let mut out = Vec::with_capacity(ns);
    for k in 0..ns {
        let mut d = first_cell[k] - dt / dx * (f1[k] - f0[k]);
        if d < 0.0 {
            if d < -1e-12 {
                return Err(Error::NegativeDensity {
                    cell: 0,
                    species: k,
                    value: d,
                });
            }
            d = 0.0;
        }
        out.push(d);
    }
    Ok(out)
}

/// Boosted pipe-inlet pressure `μ(t) p`.
pub fn apply_compressor(ratio: &Schedule, id: &str, p_node: f64, t: f64) -> Result<f64> {
    let mu = ratio.eval(t);
    if mu < 1.0 {
        return Err(Error::RatioBelowOne {
            compressor: id.to_string(),
            ratio: mu,
        });
    }
    Ok(mu * p_node)
}
