//! Per-pipe discretisation and global time step.

use serde::{Deserialize, Serialize};

use crate::eos::Eos;
use crate::error::{Error, Result};
use crate::network::Network;

/// Placement of the nodal pressure relative to the first cell centre in the
/// boundary momentum balance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryStencil {
    /// Node and first cell centre are `Δx/2` apart, as laid out on the grid.
    #[default]
    HalfCell,
    /// Pressure difference divided by a full `Δx`.
    FullCell,
}

impl BoundaryStencil {
    pub fn spacing(self, dx: f64) -> f64 {
        match self {
            BoundaryStencil::HalfCell => 0.5 * dx,
            BoundaryStencil::FullCell => dx,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridPlan {
    pub cells: Vec<usize>,
    pub dx: Vec<f64>,
    pub dt: f64,
    pub steps: u64,
    pub wave_speed: f64,
    /// Largest stable step, `min Δx / wave speed`.
    pub dt_limit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRequest {
    pub duration: f64,
    pub dx_target: f64,
    pub dt: Option<f64>,
    pub cfl_safety: f64,
    pub p_max: f64,
    pub allow_unsafe_dt: bool,
}

/// Cell counts from the target size (explicit per-pipe counts win) and a
/// time step that is either sized from the wave-speed bound or an override
/// checked against it.
pub fn plan_grids(net: &Network, eos: &Eos, req: &GridRequest) -> Result<GridPlan> {
    if !(req.duration >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "duration {} must be non-negative",
            req.duration
        )));
    }
    if !(req.dx_target > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "cell size {} must be positive",
            req.dx_target
        )));
    }
    let mut cells = Vec::with_capacity(net.pipes.len());
    let mut dx = Vec::with_capacity(net.pipes.len());
    for p in &net.pipes {
        let n = p
            .cells
            .unwrap_or_else(|| ((p.length / req.dx_target) * (1.0 - 1e-12)).ceil() as usize)
            .max(2);
        cells.push(n);
        dx.push(p.length / n as f64);
    }
    let wave_speed = eos.wave_speed_bound(req.p_max);
    let dx_min = dx.iter().copied().fold(f64::INFINITY, f64::min);
    let dt_limit = dx_min / wave_speed;
    let dt = match req.dt {
        Some(dt) => {
            if !(dt > 0.0) {
                return Err(Error::InvalidArgument(format!("time step {dt} must be positive")));
            }
            if dt > dt_limit && !req.allow_unsafe_dt {
                return Err(Error::Stability { dt, limit: dt_limit });
            }
            dt
        }
        None => {
            let dt = req.cfl_safety * dt_limit;
            if req.duration > 0.0 {
                req.duration / (req.duration / dt).ceil()
            } else {
                dt
            }
        }
    };
    let ratio = req.duration / dt;
    let steps = if (ratio - ratio.round()).abs() < 1e-9 * ratio.max(1.0) {
        ratio.round()
    } else {
        ratio.ceil()
    } as u64;
    Ok(GridPlan {
        cells,
        dx,
        dt,
        steps,
        wave_speed,
        dt_limit,
    })
}
