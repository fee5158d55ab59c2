//! Network time stepping.
//!
//! State at step `n`: partial densities at `t_n`, fluxes at `t_n − Δt/2`.
//! One step evaluates schedules, applies monitoring clamps, solves nodal
//! pressures, advances boundary and interior fluxes to `t_n + Δt/2`, mixes
//! at the nodes and advances densities to `t_{n+1}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eos::{Eos, EosMode, DEFAULT_P_MAX};
use crate::error::{Error, Location, Result};
use crate::grid::{plan_grids, BoundaryStencil, GridPlan, GridRequest};
use crate::junction::{self, EndData, MixInputs, NodeState};
use crate::monitoring::{self, Limit, PolicyEvent};
use crate::network::{Network, NodeKind, ResolvedComposition, Side, Topology};
use crate::pipe::{self, Friction, PipeState, DENSITY_FLOOR};
use crate::schedule::Schedule;
use crate::steady::{self, InitialState, SteadyReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Simulated time, s.
    pub duration: f64,
    /// Explicit time step; sized from the CFL bound when absent.
    pub dt: Option<f64>,
    /// Target cell size, m.
    pub dx: f64,
    pub cfl_safety: f64,
    pub eos: EosMode,
    pub monitoring: bool,
    /// Record every k-th step.
    pub output_every: u64,
    pub permissive_reversals: bool,
    pub allow_unsafe_dt: bool,
    /// Evaluate every schedule at `t = 0`.
    pub freeze_schedules: bool,
    /// Pressure bounding `Z` in the wave-speed estimate, Pa.
    pub p_max: f64,
    pub boundary: BoundaryStencil,
    pub density_floor: f64,
    /// Nodal throughflow below which mixed fractions are held, kg/s.
    pub flow_floor: f64,
    /// Run pipe stages on the rayon pool.
    pub parallel: bool,
    #[serde(skip)]
    pub fault: Option<Fault>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            duration: 86_400.0,
            dt: None,
            dx: 1000.0,
            cfl_safety: 0.8,
            eos: EosMode::Ideal,
            monitoring: true,
            output_every: 100,
            permissive_reversals: false,
            allow_unsafe_dt: false,
            freeze_schedules: false,
            p_max: DEFAULT_P_MAX,
            boundary: BoundaryStencil::HalfCell,
            density_floor: DENSITY_FLOOR,
            flow_floor: 1e-10,
            parallel: false,
            fault: None,
        }
    }
}

/// Deliberate corruption of one pipe's inlet component fluxes in the
/// density update, for exercising the mass-balance diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fault {
    pub pipe: usize,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeSample {
    pub pressure: f64,
    pub fractions: Vec<f64>,
    /// Applied net injection `F^s − F^d`, kg/s. For slack nodes the implied
    /// supply.
    pub injection: f64,
    /// Scheduled net injection before policies, kg/s.
    pub planned: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipeSample {
    /// Inlet and outlet flux time-centred on the density level, kg/(m² s).
    pub flux_in: f64,
    pub flux_out: f64,
    pub dens_in: Vec<f64>,
    pub dens_out: Vec<f64>,
    pub pressure_in: f64,
    pub pressure_out: f64,
}

/// Network snapshot at a density level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub time: f64,
    pub nodes: Vec<NodeSample>,
    pub pipes: Vec<PipeSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassSample {
    pub time: f64,
    /// Linepack per species, kg.
    pub linepack: Vec<f64>,
    /// Cumulative external inflow per species since `t = 0`, kg.
    pub external: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct History {
    pub samples: Vec<Sample>,
    pub mass: Vec<MassSample>,
    pub events: Vec<PolicyEvent>,
    pub reversal_warnings: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MassBalance {
    pub times: Vec<f64>,
    /// `M_α(t) − M_α(0) − ∫ inflow_α`, kg, per time then species.
    pub species: Vec<Vec<f64>>,
    pub total: Vec<f64>,
    /// Total linepack, kg.
    pub linepack: Vec<f64>,
    /// `|total| / linepack`.
    pub relative: Vec<f64>,
}

impl MassBalance {
    pub fn max_relative(&self) -> f64 {
        self.relative.iter().fold(0.0, |m: f64, &r| m.max(r))
    }

    /// Largest species residual relative to the total linepack at the
    /// same time.
    pub fn max_species_relative(&self) -> f64 {
        self.species
            .iter()
            .zip(&self.linepack)
            .flat_map(|(s, &l)| s.iter().map(move |r| r.abs() / l))
            .fold(0.0, f64::max)
    }
}

impl History {
    pub fn mass_balance_residual(&self) -> MassBalance {
        let Some(first) = self.mass.first() else {
            return MassBalance {
                times: vec![],
                species: vec![],
                total: vec![],
                linepack: vec![],
                relative: vec![],
            };
        };
        let mut mb = MassBalance {
            times: Vec::new(),
            species: Vec::new(),
            total: Vec::new(),
            linepack: Vec::new(),
            relative: Vec::new(),
        };
        for m in &self.mass {
            let r: Vec<f64> = (0..m.linepack.len())
                .map(|a| m.linepack[a] - first.linepack[a] - m.external[a])
                .collect();
            let total: f64 = r.iter().sum();
            let lp: f64 = m.linepack.iter().sum();
            mb.times.push(m.time);
            mb.relative.push(total.abs() / lp);
            mb.total.push(total);
            mb.linepack.push(lp);
            mb.species.push(r);
        }
        mb
    }
}

#[derive(Debug, Clone)]
struct NodeRt {
    kind: NodeKind,
    pressure: Option<Schedule>,
    density: Option<Schedule>,
    withdrawal: Option<Schedule>,
    injection: Option<Schedule>,
    composition: Option<ResolvedComposition>,
    limits: Vec<Limit>,
}

#[derive(Debug, Clone)]
struct PipeGeo {
    area: f64,
    friction: Friction,
    spacing: f64,
}

#[derive(Debug, Clone, Default)]
struct Scratch {
    rho: Vec<f64>,
    p: Vec<f64>,
    comp: Vec<f64>,
    /// Boundary fluxes at the new level (edge 0, edge N).
    bflux: (f64, f64),
    /// Boundary fluxes at the old level.
    old: (f64, f64),
}

/// Per-node results of the nodal stage of a step.
#[derive(Debug, Clone, Default)]
struct NodeStep {
    pressure: f64,
    supply: f64,
    withdrawal: f64,
    planned: f64,
    supply_fractions: Vec<f64>,
}

pub struct Simulation {
    net: Network,
    cfg: SimConfig,
    eos: Eos,
    topo: Topology,
    plan: GridPlan,
    geo: Vec<PipeGeo>,
    diffusion: Vec<f64>,
    rt: Vec<NodeRt>,
    pipes: Vec<PipeState>,
    nodes: Vec<NodeState>,
    scratch: Vec<Scratch>,
    node_step: Vec<NodeStep>,
    n: u64,
    external: Vec<f64>,
    history: History,
    steady: Option<SteadyReport>,
}

impl Simulation {
    /// Validate, plan the grids and start from the reconciled steady state.
    pub fn new(net: Network, cfg: SimConfig) -> Result<Self> {
        let mut sim = Self::prepare(net, cfg)?;
        let (state, report) = steady::init_network_steady(&sim.net, &sim.eos, &sim.plan, sim.cfg.boundary, 0.0)?;
        sim.install(state)?;
        sim.steady = Some(report);
        Ok(sim)
    }

    /// Start from a given state; grids must match `plan_grids` for `cfg`.
    pub fn with_state(net: Network, cfg: SimConfig, state: InitialState) -> Result<Self> {
        let mut sim = Self::prepare(net, cfg)?;
        sim.install(state)?;
        Ok(sim)
    }

    fn prepare(net: Network, cfg: SimConfig) -> Result<Self> {
        net.validate_over(cfg.duration.max(1.0)).into_result()?;
        if cfg.output_every == 0 {
            return Err(Error::InvalidArgument("output cadence must be at least 1".into()));
        }
        let species = net.gas_species()?;
        let diffusion = species.iter().map(|s| s.diffusion).collect();
        let eos = Eos::new(species, net.temperature, cfg.eos)?;
        let topo = net.topology()?;
        let plan = plan_grids(
            &net,
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
        let geo = net
            .pipes
            .iter()
            .enumerate()
            .map(|(k, p)| PipeGeo {
                area: p.area(),
                friction: Friction {
                    lambda: p.friction,
                    diameter: p.diameter,
                },
                spacing: cfg.boundary.spacing(plan.dx[k]),
            })
            .collect();
        let mut rt = Vec::with_capacity(net.nodes.len());
        for n in &net.nodes {
            let composition = n
                .composition
                .as_ref()
                .map(|c| ResolvedComposition::new(c, &net))
                .transpose()?;
            let mut limits = Vec::new();
            if let Some(l) = &n.limits {
                for (name, &c_max) in &l.max_fraction {
                    let species = net.species_index(name).expect("validated");
                    limits.push(Limit::MaxFraction {
                        species,
                        name: name.clone(),
                        c_max,
                    });
                }
                if let Some(p_min) = l.min_pressure {
                    limits.push(Limit::MinPressure { p_min });
                }
            }
            rt.push(NodeRt {
                kind: n.kind,
                pressure: n.pressure.clone(),
                density: n.density.clone(),
                withdrawal: n.withdrawal.clone(),
                injection: n.injection.clone(),
                composition,
                limits,
            });
        }
        let ns = eos.len();
        let scratch = plan
            .cells
            .iter()
            .map(|&c| Scratch {
                rho: vec![0.0; c],
                p: vec![0.0; c],
                comp: vec![0.0; (c + 1) * ns],
                ..Default::default()
            })
            .collect();
        let nn = net.nodes.len();
        Ok(Simulation {
            net,
            cfg,
            eos,
            topo,
            plan,
            geo,
            diffusion,
            rt,
            pipes: Vec::new(),
            nodes: Vec::new(),
            scratch,
            node_step: vec![NodeStep::default(); nn],
            n: 0,
            external: vec![0.0; ns],
            history: History::default(),
            steady: None,
        })
    }

    fn install(&mut self, state: InitialState) -> Result<()> {
        if state.pipes.len() != self.net.pipes.len() || state.nodes.len() != self.net.nodes.len() {
            return Err(Error::InvalidArgument(
                "initial state does not match the network".into(),
            ));
        }
        for (k, p) in state.pipes.iter().enumerate() {
            if p.cells() != self.plan.cells[k] || p.ns != self.eos.len() {
                return Err(Error::InvalidArgument(format!(
                    "initial state of pipe {} has the wrong shape",
                    self.net.pipes[k].id
                )));
            }
        }
        self.pipes = state.pipes;
        self.nodes = state.nodes;
        Ok(())
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn eos(&self) -> &Eos {
        &self.eos
    }

    pub fn plan(&self) -> &GridPlan {
        &self.plan
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn pipes(&self) -> &[PipeState] {
        &self.pipes
    }

    pub fn nodes(&self) -> &[NodeState] {
        &self.nodes
    }

    pub fn time(&self) -> f64 {
        self.n as f64 * self.plan.dt
    }

    pub fn step_index(&self) -> u64 {
        self.n
    }

    pub fn history(&self) -> &History {
        &self.history
    }

    pub fn into_history(self) -> History {
        self.history
    }

    pub fn steady_report(&self) -> Option<&SteadyReport> {
        self.steady.as_ref()
    }

    /// Current state as an initial state.
    pub fn state(&self) -> InitialState {
        InitialState {
            pipes: self.pipes.clone(),
            nodes: self.nodes.clone(),
        }
    }

    /// Linepack per species, kg.
    pub fn linepack(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.eos.len()];
        for (k, p) in self.pipes.iter().enumerate() {
            for (mk, v) in m.iter_mut().zip(p.species_mass()) {
                *mk += self.geo[k].area * v;
            }
        }
        m
    }

    /// Advance through the configured duration.
    pub fn run(&mut self) -> Result<()> {
        while self.n < self.plan.steps {
            self.step()?;
        }
        self.record_mass();
        Ok(())
    }

    fn record_mass(&mut self) {
        let s = MassSample {
            time: self.time(),
            linepack: self.linepack(),
            external: self.external.clone(),
        };
        if self.history.mass.last().map(|m| m.time) != Some(s.time) {
            self.history.mass.push(s);
        }
    }

    fn ratio(&self, k: usize, t: f64) -> Result<f64> {
        match self.topo.compressor[k] {
            Some(c) => {
                let comp = &self.net.compressors[c];
                let mu = comp.ratio.eval(t);
                if mu < 1.0 {
                    return Err(Error::RatioBelowOne {
                        compressor: comp.id.clone(),
                        ratio: mu,
                    });
                }
                Ok(mu)
            }
            None => Ok(1.0),
        }
    }

    fn end_data(&self, k: usize, side: Side, t: f64) -> Result<EndData> {
        let s = &self.scratch[k];
        let pipe = &self.pipes[k];
        let last = pipe.cells() - 1;
        let (flux, i, ratio) = match side {
            Side::Start => (pipe.flux[0], 0, self.ratio(k, t)?),
            Side::End => (-pipe.flux[last + 1], last, 1.0),
        };
        Ok(EndData {
            area: self.geo[k].area,
            friction: self.geo[k].friction.coefficient(),
            spacing: self.geo[k].spacing,
            flux,
            density: s.rho[i],
            pressure: s.p[i],
            ratio,
        })
    }

    fn pipe_loc(&self, k: usize) -> Location {
        Location::Pipe {
            pipe: self.net.pipes[k].id.clone(),
            cell: None,
        }
    }

    fn node_loc(&self, q: usize) -> Location {
        Location::Node {
            node: self.net.nodes[q].id.clone(),
        }
    }

    pub fn step(&mut self) -> Result<()> {
        let dt = self.plan.dt;
        let t = self.time();
        let (t_now, t_half) = if self.cfg.freeze_schedules {
            (0.0, 0.0)
        } else {
            (t, t + 0.5 * dt)
        };
        let ns = self.eos.len();
        let record = self.n.is_multiple_of(self.cfg.output_every);
        if record {
            self.record_mass();
        }

        // Cell totals and pressures at t_n.
        {
            let eos = &self.eos;
            let work = |(pipe, s): (&PipeState, &mut Scratch)| pipe::cell_pressures(pipe, eos, &mut s.rho, &mut s.p);
            let results: Vec<Result<()>> = if self.cfg.parallel {
                self.pipes
                    .par_iter()
                    .zip(self.scratch.par_iter_mut())
                    .map(work)
                    .collect()
            } else {
                self.pipes.iter().zip(self.scratch.iter_mut()).map(work).collect()
            };
            for (k, r) in results.into_iter().enumerate() {
                r.map_err(|e| e.at(t, self.pipe_loc(k)))?;
            }
        }

        // Nodal stage: schedules, policies, pressures, boundary fluxes.
        for (k, p) in self.pipes.iter().enumerate() {
            let n = p.cells();
            self.scratch[k].old = (p.flux[0], p.flux[n]);
        }
        let mut events = Vec::new();
        for q in 0..self.net.nodes.len() {
            let adj = self.topo.adjacency[q].clone();
            let ends = adj
                .iter()
                .map(|e| self.end_data(e.pipe, e.side, t_now))
                .collect::<Result<Vec<_>>>()
                .map_err(|e| e.at(t, self.node_loc(q)))?;
            let rt = &self.rt[q];
            let mut cs = vec![0.0; ns];
            if let Some(c) = &rt.composition {
                c.eval(t_half, &mut cs);
            }
            let (pressure, supply, withdrawal, planned) = match rt.kind {
                NodeKind::Slack => {
                    let p = match (&rt.pressure, &rt.density) {
                        (Some(s), _) => s.eval(t_now),
                        (None, Some(s)) => {
                            let mut c = vec![0.0; ns];
                            if let Some(comp) = &rt.composition {
                                comp.eval(t_now, &mut c);
                            }
                            let rho = s.eval(t_now);
                            let d: Vec<f64> = c.iter().map(|&x| x * rho).collect();
                            self.eos.pressure(&d).map_err(|e| e.at(t, self.node_loc(q)))?
                        }
                        (None, None) => unreachable!("validated"),
                    };
                    (p, 0.0, 0.0, 0.0)
                }
                NodeKind::Flow => {
                    let fs0 = rt.injection.as_ref().map_or(0.0, |s| s.eval(t_half));
                    let fd0 = rt.withdrawal.as_ref().map_or(0.0, |s| s.eval(t_half));
                    let (fs, fd) = if self.cfg.monitoring && !rt.limits.is_empty() {
                        let dec = monitoring::theta_upsilon(&ends, dt).map_err(|e| e.at(t, self.node_loc(q)))?;
                        let pipes = &self.pipes;
                        let scratch = &self.scratch;
                        let end_fractions = |a: usize| -> Vec<f64> {
                            adj.iter()
                                .map(|e| {
                                    let p = &pipes[e.pipe];
                                    let i = match e.side {
                                        Side::Start => 0,
                                        Side::End => p.cells() - 1,
                                    };
                                    p.cell(i)[a] / scratch[e.pipe].rho[i]
                                })
                                .collect()
                        };
                        let (fs, fd, ev) = monitoring::apply_policies(
                            t,
                            &self.net.nodes[q].id,
                            fs0,
                            fd0,
                            &rt.limits,
                            &dec,
                            &end_fractions,
                            &cs,
                        );
                        events.extend(ev);
                        (fs, fd)
                    } else {
                        (fs0, fd0)
                    };
                    let p = junction::nodal_pressure(&ends, fs, fd, dt).map_err(|e| e.at(t, self.node_loc(q)))?;
                    (p, fs, fd, fs0 - fd0)
                }
            };
            if !(pressure > 0.0) {
                return Err(Error::Degenerate(format!("nodal pressure {pressure:e} Pa")).at(t, self.node_loc(q)));
            }
            for (e, d) in adj.iter().zip(&ends) {
                let local = junction::boundary_flux(d, pressure, dt);
                let s = &mut self.scratch[e.pipe];
                match e.side {
                    Side::Start => s.bflux.0 = local,
                    Side::End => s.bflux.1 = -local,
                }
            }
            let st = &mut self.node_step[q];
            st.pressure = pressure;
            st.supply = supply;
            st.withdrawal = withdrawal;
            st.planned = planned;
            st.supply_fractions = cs;
        }
        self.history.events.extend(events);

        // Reversal guard on junction-adjacent edges.
        for k in 0..self.pipes.len() {
            let s = &self.scratch[k];
            for (before, after, q) in [
                (s.old.0, s.bflux.0, self.topo.from[k]),
                (s.old.1, s.bflux.1, self.topo.to[k]),
            ] {
                if before * after < 0.0 {
                    if self.cfg.permissive_reversals {
                        self.history.reversal_warnings += 1;
                        if self.history.reversal_warnings == 1 {
                            log::warn!(
                                "flow reversal at node {} on pipe {} at t = {t}",
                                self.net.nodes[q].id,
                                self.net.pipes[k].id
                            );
                        }
                    } else {
                        return Err(Error::Reversal {
                            node: self.net.nodes[q].id.clone(),
                            pipe: self.net.pipes[k].id.clone(),
                            before,
                            after,
                        }
                        .at(t, self.pipe_loc(k)));
                    }
                }
            }
        }

        // Interior fluxes, then the boundary edges.
        {
            let geo = &self.geo;
            let work = |(k, (pipe, s)): (usize, (&mut PipeState, &mut Scratch))| {
                let dx = pipe.dx;
                pipe::update_fluxes(&mut pipe.flux, &s.rho, &s.p, geo[k].friction, dx, dt);
                let n = pipe.cells();
                pipe.flux[0] = s.bflux.0;
                pipe.flux[n] = s.bflux.1;
            };
            if self.cfg.parallel {
                self.pipes
                    .par_iter_mut()
                    .zip(self.scratch.par_iter_mut())
                    .enumerate()
                    .for_each(work);
            } else {
                self.pipes
                    .iter_mut()
                    .zip(self.scratch.iter_mut())
                    .enumerate()
                    .for_each(work);
            }
        }

        // Mixing at t_n + Δt/2.
        let mut inflow = vec![0.0; ns];
        let mut ext = vec![0.0; ns];
        for q in 0..self.net.nodes.len() {
            inflow.iter_mut().for_each(|x| *x = 0.0);
            let mut outflow = 0.0;
            let mut net_out = 0.0;
            for e in &self.topo.adjacency[q] {
                let pipe = &self.pipes[e.pipe];
                let area = self.geo[e.pipe].area;
                let n = pipe.cells();
                let (local, i) = match e.side {
                    Side::Start => (pipe.flux[0], 0),
                    Side::End => (-pipe.flux[n], n - 1),
                };
                net_out += area * local;
                if local < 0.0 {
                    let cell = pipe.cell(i);
                    let rho = self.scratch[e.pipe].rho[i];
                    for (x, &d) in inflow.iter_mut().zip(cell) {
                        *x -= area * local * (d / rho);
                    }
                } else {
                    outflow += area * local;
                }
            }
            let st = &mut self.node_step[q];
            if self.rt[q].kind == NodeKind::Slack {
                st.supply = net_out.max(0.0);
                st.withdrawal = (-net_out).max(0.0);
            }
            let mix = MixInputs {
                inflow: &inflow,
                outflow,
                supply: st.supply,
                supply_fractions: &st.supply_fractions,
                withdrawal: st.withdrawal,
            };
            let state = junction::nodal_mixture(
                &self.eos,
                &mix,
                st.pressure,
                &self.nodes[q].fractions,
                self.cfg.flow_floor,
            )
            .map_err(|e| {
                e.at(
                    t,
                    Location::Node {
                        node: self.net.nodes[q].id.clone(),
                    },
                )
            })?;
            for a in 0..ns {
                ext[a] += st.supply * st.supply_fractions[a] - st.withdrawal * state.fractions[a];
            }
            self.nodes[q] = state;
        }

        if record {
            self.record_sample(t);
        }

        // Component fluxes and density update to t_{n+1}.
        {
            let nodes = &self.nodes;
            let from = &self.topo.from;
            let to = &self.topo.to;
            let floor = self.cfg.density_floor;
            let diffusion = &self.diffusion;
            let fault = self.cfg.fault;
            let work = |(k, (pipe, s)): (usize, (&mut PipeState, &mut Scratch))| -> Result<()> {
                let n = pipe.cells();
                let left = &nodes[from[k]].dens;
                let right = &nodes[to[k]].dens;
                for j in 0..=n {
                    let l = if j == 0 { left.as_slice() } else { pipe.cell(j - 1) };
                    let r = if j == n { right.as_slice() } else { pipe.cell(j) };
                    pipe::upwind_fluxes(pipe.flux[j], l, r, floor, &mut s.comp[j * ns..(j + 1) * ns])
                        .map_err(|e| e.in_cell(j.min(n - 1)))?;
                }
                if let Some(f) = fault {
                    if f.pipe == k {
                        s.comp[..ns].iter_mut().for_each(|x| *x *= f.factor);
                    }
                }
                pipe::update_densities(pipe, &s.comp, dt, diffusion)
            };
            let results: Vec<Result<()>> = if self.cfg.parallel {
                self.pipes
                    .par_iter_mut()
                    .zip(self.scratch.par_iter_mut())
                    .enumerate()
                    .map(work)
                    .collect()
            } else {
                self.pipes
                    .iter_mut()
                    .zip(self.scratch.iter_mut())
                    .enumerate()
                    .map(work)
                    .collect()
            };
            for (k, r) in results.into_iter().enumerate() {
                r.map_err(|e| e.at(t, self.pipe_loc(k)))?;
            }
        }
        for (e, x) in self.external.iter_mut().zip(&ext) {
            *e += dt * x;
        }
        self.n += 1;
        Ok(())
    }

    /// Snapshot at `t_n`, taken mid-step: fluxes hold the new half level,
    /// densities are still at `t_n`, `old` holds the previous boundary fluxes.
    fn record_sample(&mut self, t: f64) {
        let nodes = self
            .nodes
            .iter()
            .zip(&self.node_step)
            .zip(&self.rt)
            .map(|((s, st), rt)| {
                let injection = st.supply - st.withdrawal;
                NodeSample {
                    pressure: st.pressure,
                    fractions: s.fractions.clone(),
                    injection,
                    planned: if rt.kind == NodeKind::Slack {
                        injection
                    } else {
                        st.planned
                    },
                }
            })
            .collect();
        let pipes = self
            .pipes
            .iter()
            .zip(&self.scratch)
            .map(|(p, s)| {
                let n = p.cells();
                PipeSample {
                    flux_in: 0.5 * (s.old.0 + p.flux[0]),
                    flux_out: 0.5 * (s.old.1 + p.flux[n]),
                    dens_in: p.cell(0).to_vec(),
                    dens_out: p.cell(n - 1).to_vec(),
                    pressure_in: s.p[0],
                    pressure_out: s.p[n - 1],
                }
            })
            .collect();
        self.history.samples.push(Sample { time: t, nodes, pipes });
    }
}
