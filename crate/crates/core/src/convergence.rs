//! Grid refinement study: rerun with Δx and Δt halved per level and compare
//! recorded quantities at common sample times.

use serde::Serialize;

use crate::engine::{History, SimConfig, Simulation};
use crate::eos::Eos;
use crate::error::{Error, Result};
use crate::grid::{plan_grids, GridRequest};
use crate::network::Network;

/// Which recorded series enter the error norm.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Observable {
    /// Pressures at every non-slack node.
    NodePressures,
    /// Time-centred fluxes at both ends of every pipe.
    EndpointFluxes,
    /// Pressures and fluxes together.
    PressuresAndFluxes,
    /// Mass fraction of one species at every non-slack node.
    NodeFractions(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelInfo {
    pub dx: f64,
    pub dt: f64,
    pub steps: u64,
    pub cells: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub levels: Vec<LevelInfo>,
    /// Sample times shared by every level.
    pub times: Vec<f64>,
    /// Relative L2 difference between consecutive levels.
    pub differences: Vec<f64>,
    /// Relative L2 error of each coarser level against the finest.
    pub errors_vs_finest: Vec<f64>,
    /// `log2` of consecutive difference ratios.
    pub orders: Vec<f64>,
}

impl ConvergenceReport {
    /// Order from the two finest difference ratios.
    pub fn observed_order(&self) -> f64 {
        *self.orders.last().unwrap_or(&f64::NAN)
    }
}

/// Run `levels` grids, each halving Δx and Δt of the previous one, and
/// report observed orders. `sample_interval` (s) must be a multiple of the
/// coarsest time step.
pub fn convergence_study(
    net: &Network,
    cfg: &SimConfig,
    levels: usize,
    sample_interval: f64,
    observable: &Observable,
) -> Result<ConvergenceReport> {
    if levels < 3 {
        return Err(Error::InvalidArgument(format!(
            "an order estimate needs at least 3 grid levels, got {levels}"
        )));
    }
    let species: Vec<_> = net.gas_species()?;
    let eos = Eos::new(species, net.temperature, cfg.eos)?;
    let coarse = plan_grids(
        net,
        &eos,
        &GridRequest {
            duration: cfg.duration,
            dx_target: cfg.dx,
            dt: cfg.dt,
            cfl_safety: cfg.cfl_safety,
            p_max: cfg.p_max,
            allow_unsafe_dt: cfg.allow_unsafe_dt,
        },
    )?;
    let stride = sample_interval / coarse.dt;
    if !(stride >= 1.0) || (stride - stride.round()).abs() > 1e-9 * stride {
        return Err(Error::InvalidArgument(format!(
            "sample interval {sample_interval} s is not a multiple of the time step {} s",
            coarse.dt
        )));
    }
    let stride = stride.round() as u64;

    let mut infos = Vec::with_capacity(levels);
    let mut series = Vec::with_capacity(levels);
    for l in 0..levels {
        let scale = 1u64 << l;
        let mut net_l = net.clone();
        for (p, &n) in net_l.pipes.iter_mut().zip(&coarse.cells) {
            p.cells = Some(n * scale as usize);
        }
        let mut cfg_l = cfg.clone();
        cfg_l.dt = Some(coarse.dt / scale as f64);
        cfg_l.output_every = stride * scale;
        let mut sim = Simulation::new(net_l, cfg_l)?;
        infos.push(LevelInfo {
            dx: sim.plan().dx.iter().copied().fold(f64::INFINITY, f64::min),
            dt: sim.plan().dt,
            steps: sim.plan().steps,
            cells: sim.plan().cells.clone(),
        });
        sim.run()?;
        let flow_nodes: Vec<usize> = (0..net.nodes.len())
            .filter(|&q| net.nodes[q].kind != crate::network::NodeKind::Slack)
            .collect();
        let k = match observable {
            Observable::NodeFractions(name) => Some(
                sim.eos()
                    .index_of(name)
                    .ok_or_else(|| Error::InvalidArgument(format!("unknown species {name}")))?,
            ),
            _ => None,
        };
        series.push(extract(sim.history(), &flow_nodes, observable, k));
    }

    let n_times = series.iter().map(|s| s.len()).min().unwrap_or(0);
    if n_times == 0 {
        return Err(Error::InvalidArgument("no common sample times".into()));
    }
    let times: Vec<f64> = (0..n_times).map(|i| i as f64 * sample_interval).collect();

    let diff = |a: &Vec<Vec<f64>>, b: &Vec<Vec<f64>>| {
        relative_l2(&a[..n_times], &b[..n_times], &series[levels - 1][..n_times])
    };
    let differences: Vec<f64> = (0..levels - 1).map(|l| diff(&series[l], &series[l + 1])).collect();
    let errors_vs_finest: Vec<f64> = (0..levels - 1).map(|l| diff(&series[l], &series[levels - 1])).collect();
    let orders = differences.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Ok(ConvergenceReport {
        levels: infos,
        times,
        differences,
        errors_vs_finest,
        orders,
    })
}

/// One row per sample time, one column per scalar series.
fn extract(h: &History, flow_nodes: &[usize], obs: &Observable, species: Option<usize>) -> Vec<Vec<f64>> {
    h.samples
        .iter()
        .map(|s| {
            let mut row = Vec::new();
            let pressures = |row: &mut Vec<f64>| row.extend(flow_nodes.iter().map(|&q| s.nodes[q].pressure));
            let fluxes = |row: &mut Vec<f64>| {
                for p in &s.pipes {
                    row.push(p.flux_in);
                    row.push(p.flux_out);
                }
            };
            match obs {
                Observable::NodePressures => pressures(&mut row),
                Observable::EndpointFluxes => fluxes(&mut row),
                Observable::PressuresAndFluxes => {
                    pressures(&mut row);
                    fluxes(&mut row);
                }
                Observable::NodeFractions(_) => {
                    let k = species.expect("species index resolved");
                    row.extend(flow_nodes.iter().map(|&q| s.nodes[q].fractions[k]));
                }
            }
            row
        })
        .collect()
}

/// Each column is scaled by its RMS on the reference run so that pressures
/// and fluxes weigh alike; the result is the RMS of the scaled difference.
fn relative_l2(a: &[Vec<f64>], b: &[Vec<f64>], reference: &[Vec<f64>]) -> f64 {
    let cols = reference.first().map_or(0, |r| r.len());
    let rows = reference.len() as f64;
    let mut total = 0.0;
    for j in 0..cols {
        let scale = (reference.iter().map(|r| r[j] * r[j]).sum::<f64>() / rows).sqrt();
        let d: f64 = a.iter().zip(b).map(|(x, y)| (x[j] - y[j]).powi(2)).sum::<f64>() / rows;
        if scale > 0.0 {
            total += d / (scale * scale);
        }
    }
    (total / cols.max(1) as f64).sqrt()
}
