//! Steady initial states.
//!
//! Tabulated endpoint data are first checked for internal consistency, then
//! reconciled into an exact steady state of the discrete scheme: nodal
//! balances plus, per pipe, the cell-by-cell pressure march implied by the
//! boundary and interior momentum stencils with `∂φ/∂t = 0`. Starting from
//! that state the solver stays put to rounding.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::eos::Eos;
use crate::error::{Error, Result};
use crate::grid::{BoundaryStencil, GridPlan};
use crate::junction::NodeState;
use crate::network::{Network, NodeKind, ResolvedComposition, Side, Topology};
use crate::pipe::PipeState;

/// Continuous isothermal ideal-gas profile `d(x) = √(d0² − λ φ|φ| x / (R T D))`
/// sampled at the `cells` centres.
pub fn steady_pipe_profile(
    inlet_density: f64,
    flux: f64,
    length: f64,
    cells: usize,
    lambda: f64,
    diameter: f64,
    rt: f64,
) -> Result<Vec<f64>> {
    let k = lambda * flux * flux.abs() / (rt * diameter);
    let end = inlet_density * inlet_density - k * length;
    if !(end > 0.0) {
        return Err(Error::PressureCollapse {
            x: length,
            radicand: end,
        });
    }
    let dx = length / cells as f64;
    Ok((0..cells)
        .map(|i| {
            let x = (i as f64 + 0.5) * dx;
            (inlet_density * inlet_density - k * x).sqrt()
        })
        .collect())
}

/// One pipe's discrete steady march.
#[derive(Debug, Clone, Copy)]
pub struct MarchGeometry {
    pub cells: usize,
    pub dx: f64,
    pub spacing: f64,
    /// `λ / (2 D)`.
    pub friction: f64,
}

#[derive(Debug, Clone)]
pub struct March {
    /// Total density per cell.
    pub density: Vec<f64>,
    pub pressure: Vec<f64>,
    /// Pressure at the downstream node.
    pub p_out: f64,
}

/// Pressures along a pipe at rest in the discrete boundary and interior
/// momentum balances, from the boosted inlet pressure `p_in` and flux `phi`,
/// for a uniform composition `c`.
pub fn march(eos: &Eos, c: &[f64], p_in: f64, phi: f64, g: &MarchGeometry) -> Result<March> {
    let mut density = Vec::with_capacity(g.cells);
    let mut pressure = Vec::with_capacity(g.cells);
    let mut buf = vec![0.0; c.len()];
    let kb = g.spacing * g.friction * phi * phi.abs();
    let ki = g.dx * g.friction * phi * phi.abs();
    let mut p_of = |x: f64| -> Result<f64> {
        buf.iter_mut().zip(c).for_each(|(b, &ck)| *b = ck * x);
        eos.pressure(&buf)
    };
    // First cell: p_in − p_1 = kb / d_1.
    let d1 = solve_density(&mut p_of, eos, c, p_in, |x| kb / x, |x| -kb / (x * x))?;
    density.push(d1);
    pressure.push(p_of(d1)?);
    // Interior: p_i − p_{i+1} = 2 ki / (d_i + d_{i+1}).
    for i in 1..g.cells {
        let dp = density[i - 1];
        let target = pressure[i - 1];
        let d = solve_density(
            &mut p_of,
            eos,
            c,
            target,
            |x| 2.0 * ki / (dp + x),
            |x| -2.0 * ki / ((dp + x) * (dp + x)),
        )?;
        density.push(d);
        pressure.push(p_of(d)?);
    }
    let last = g.cells - 1;
    let p_out = pressure[last] - kb / density[last];
    if !(p_out > 0.0) {
        return Err(Error::PressureCollapse {
            x: g.dx * g.cells as f64,
            radicand: p_out,
        });
    }
    Ok(March {
        density,
        pressure,
        p_out,
    })
}

/// Total density `x` with `P(x c) + extra(x) = target`; the physical root is
/// the largest one.
fn solve_density(
    p_of: &mut dyn FnMut(f64) -> Result<f64>,
    eos: &Eos,
    c: &[f64],
    target: f64,
    extra: impl Fn(f64) -> f64,
    dextra: impl Fn(f64) -> f64,
) -> Result<f64> {
    let x0 = eos.mixture_density(target, c)?;
    let (s, sa) = c
        .iter()
        .zip(eos.rt())
        .zip(eos.slopes())
        .fold((0.0, 0.0), |(s, sa), ((&ck, &rt), &a)| (s + ck * rt, sa + ck * rt * a));
    let dp = |x: f64| s / ((1.0 - x * sa) * (1.0 - x * sa));
    let mut f = |x: f64| -> f64 {
        match p_of(x) {
            Ok(p) => p + extra(x) - target,
            Err(_) => f64::INFINITY,
        }
    };
    let df = |x: f64| dp(x) + dextra(x);
    let collapse = |x: f64| Error::PressureCollapse { x: 0.0, radicand: x };

    let f0 = f(x0);
    let (mut lo, mut hi) = if f0 >= 0.0 {
        // Largest root lies below x0. Its left bracket is the minimiser of f.
        if df(x0) <= 0.0 {
            return Err(collapse(f0));
        }
        let (mut a, mut b) = (x0 * 1e-9, x0);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if df(m) > 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        if f(b) > 0.0 {
            return Err(collapse(f(b)));
        }
        (b, x0)
    } else {
        let mut hi = 2.0 * x0;
        let mut n = 0;
        while f(hi) < 0.0 {
            hi *= 2.0;
            n += 1;
            if n > 200 {
                return Err(collapse(f0));
            }
        }
        (x0, hi)
    };
    let mut x = hi;
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let mut next = x - fx / df(x);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub reference: f64,
    /// Relative residual.
    pub residual: f64,
    pub tolerance: f64,
    pub ok: bool,
}

impl Check {
    fn new(name: String, value: f64, reference: f64, scale: f64, tolerance: f64) -> Check {
        let residual = (value - reference).abs() / scale.abs().max(f64::MIN_POSITIVE);
        Check {
            name,
            value,
            reference,
            residual,
            tolerance,
            ok: residual <= tolerance,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Report {
    pub checks: Vec<Check>,
}

impl Report {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }

    pub fn failures(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.ok)
            .map(|c| {
                format!(
                    "{}: {} vs {} (relative residual {:.3e}, tolerance {:.1e})",
                    c.name, c.value, c.reference, c.residual, c.tolerance
                )
            })
            .collect()
    }
}

/// Relative tolerance on pressure continuity and compressor relations.
pub const PRESSURE_TOLERANCE: f64 = 1e-6;
/// Relative tolerance on tabulated nodal balances (table rounding).
pub const BALANCE_TOLERANCE: f64 = 1e-3;

/// Boundary pressure of a slack node at `t`.
pub fn slack_pressure(eos: &Eos, net: &Network, q: usize, t: f64) -> Result<f64> {
    let node = &net.nodes[q];
    if let Some(p) = &node.pressure {
        return Ok(p.eval(t));
    }
    let rho = node
        .density
        .as_ref()
        .ok_or_else(|| Error::Invalid(vec![format!("slack node {} has no boundary value", node.id)]))?
        .eval(t);
    let comp = ResolvedComposition::new(node.composition.as_ref().unwrap_or(&Default::default()), net)?;
    let mut c = vec![0.0; eos.len()];
    comp.eval(t, &mut c);
    let d: Vec<f64> = c.iter().map(|&ck| ck * rho).collect();
    eos.pressure(&d)
}

fn planned_net_injection(net: &Network, q: usize, t: f64) -> f64 {
    let n = &net.nodes[q];
    n.injection.as_ref().map_or(0.0, |s| s.eval(t)) - n.withdrawal.as_ref().map_or(0.0, |s| s.eval(t))
}

fn ratio(net: &Network, topo: &Topology, k: usize, t: f64) -> f64 {
    topo.compressor[k].map_or(1.0, |c| net.compressors[c].ratio.eval(t))
}

/// Endpoint pressures and flow of each pipe from the tabulated data, SI.
#[derive(Debug, Clone, Copy, Default)]
struct Tab {
    p_in: Option<f64>,
    p_out: Option<f64>,
    flow: Option<f64>,
}

fn tabulated(net: &Network, eos: &Eos, c: &[f64]) -> Result<Vec<Tab>> {
    let mut tabs = vec![Tab::default(); net.pipes.len()];
    if let Some(init) = &net.initial {
        for pi in &init.pipes {
            let k = net
                .pipe_index(&pi.pipe)
                .ok_or_else(|| Error::Invalid(vec![format!("initial data for unknown pipe {}", pi.pipe)]))?;
            let area = net.pipes[k].area();
            let p_in = match (pi.pressure_in, pi.inlet_density) {
                (Some(p), _) => Some(p),
                (None, Some(rho)) => {
                    let d: Vec<f64> = c.iter().map(|&ck| ck * rho).collect();
                    Some(eos.pressure(&d)?)
                }
                _ => None,
            };
            tabs[k] = Tab {
                p_in,
                p_out: pi.pressure_out,
                flow: pi.flow.or(pi.flux.map(|f| f * area)),
            };
        }
    }
    Ok(tabs)
}

/// Consistency of the tabulated initial data with the schedules at `t0`.
pub fn check_tables(net: &Network, eos: &Eos, t0: f64) -> Result<Report> {
    let topo = net.topology()?;
    let c = initial_fractions(net)?;
    let tabs = tabulated(net, eos, &c)?;
    let mut checks = Vec::new();
    for (q, node) in net.nodes.iter().enumerate() {
        // Reference nodal pressure: slack value, else first available end.
        let mut ends_p: Vec<(String, f64, f64)> = Vec::new();
        for end in &topo.adjacency[q] {
            let k = end.pipe;
            let pid = &net.pipes[k].id;
            match end.side {
                Side::End => {
                    if let Some(p) = tabs[k].p_out {
                        ends_p.push((format!("{pid} outlet"), p, 1.0));
                    }
                }
                Side::Start => {
                    if let Some(p) = tabs[k].p_in {
                        ends_p.push((format!("{pid} inlet"), p, ratio(net, &topo, k, t0)));
                    }
                }
            }
        }
        let reference = if node.kind == NodeKind::Slack {
            Some(slack_pressure(eos, net, q, t0)?)
        } else {
            ends_p.first().map(|(_, p, mu)| p / mu)
        };
        if let Some(pn) = reference {
            for (name, p, mu) in &ends_p {
                let label = if *mu != 1.0 {
                    format!("{name} pressure = ratio x {} pressure", node.id)
                } else {
                    format!("{name} pressure = {} pressure", node.id)
                };
                checks.push(Check::new(label, *p, mu * pn, *p, PRESSURE_TOLERANCE));
            }
        }
        if node.kind == NodeKind::Flow {
            let mut inflow = 0.0;
            let mut outflow = 0.0;
            let mut complete = true;
            for end in &topo.adjacency[q] {
                match (tabs[end.pipe].flow, end.side) {
                    (Some(f), Side::End) => inflow += f,
                    (Some(f), Side::Start) => outflow += f,
                    (None, _) => complete = false,
                }
            }
            if complete {
                let net_inj = planned_net_injection(net, q, t0);
                let scale = inflow.max(outflow).max(net_inj.abs()).max(f64::MIN_POSITIVE);
                checks.push(Check::new(
                    format!("{} balance (in - out + injection)", node.id),
                    inflow - outflow + net_inj,
                    0.0,
                    scale,
                    BALANCE_TOLERANCE,
                ));
            }
        }
    }
    Ok(Report { checks })
}

/// Uniform initial mass fractions, in species order.
pub fn initial_fractions(net: &Network) -> Result<Vec<f64>> {
    let mut c = vec![0.0; net.species.len()];
    match &net.initial {
        Some(init) if !init.composition.is_empty() => {
            for (name, &x) in &init.composition {
                let k = net
                    .species_index(name)
                    .ok_or_else(|| Error::Invalid(vec![format!("unknown species {name}")]))?;
                c[k] = x;
            }
        }
        _ => {
            // Fall back on the first slack node's supply at t = 0.
            let q = net
                .nodes
                .iter()
                .position(|n| n.kind == NodeKind::Slack)
                .ok_or_else(|| Error::Invalid(vec!["missing slack node".into()]))?;
            let comp = ResolvedComposition::new(net.nodes[q].composition.as_ref().unwrap_or(&Default::default()), net)?;
            comp.eval(0.0, &mut c);
        }
    }
    Ok(c)
}

#[derive(Debug, Clone)]
pub struct InitialState {
    pub pipes: Vec<PipeState>,
    pub nodes: Vec<NodeState>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SteadyReport {
    pub tables: Report,
    /// Relative change of each tabulated quantity made by reconciliation.
    pub adjustments: Vec<Check>,
    pub newton_iterations: usize,
    pub residual: f64,
}

/// Steady state of the discrete scheme at `t0`, seeded from the tabulated
/// data. Table inconsistencies beyond tolerance are an error.
pub fn init_network_steady(
    net: &Network,
    eos: &Eos,
    plan: &GridPlan,
    stencil: BoundaryStencil,
    t0: f64,
) -> Result<(InitialState, SteadyReport)> {
    let topo = net.topology()?;
    let c = initial_fractions(net)?;
    let tables = check_tables(net, eos, t0)?;
    if !tables.ok() {
        return Err(Error::Inconsistent(tables.failures()));
    }
    let tabs = tabulated(net, eos, &c)?;
    let geoms: Vec<MarchGeometry> = net
        .pipes
        .iter()
        .enumerate()
        .map(|(k, p)| MarchGeometry {
            cells: plan.cells[k],
            dx: plan.dx[k],
            spacing: stencil.spacing(plan.dx[k]),
            friction: p.friction / (2.0 * p.diameter),
        })
        .collect();

    let nn = net.nodes.len();
    let np = net.pipes.len();
    let mut fixed = vec![None; nn];
    for q in 0..nn {
        if net.nodes[q].kind == NodeKind::Slack {
            fixed[q] = Some(slack_pressure(eos, net, q, t0)?);
        }
    }
    let free: Vec<usize> = (0..nn).filter(|&q| fixed[q].is_none()).collect();
    let p_scale = fixed.iter().flatten().copied().fold(0.0, f64::max).max(1.0);

    // Seed: tabulated nodal pressures and flows.
    let mut p_seed = fixed.clone();
    for k in 0..np {
        if let Some(p) = tabs[k].p_out {
            p_seed[topo.to[k]].get_or_insert(p);
        }
        if let Some(p) = tabs[k].p_in {
            p_seed[topo.from[k]].get_or_insert(p / ratio(net, &topo, k, t0));
        }
    }
    let mut x: Vec<f64> = free.iter().map(|&q| p_seed[q].unwrap_or(p_scale)).collect();
    let q_scale = tabs
        .iter()
        .filter_map(|t| t.flow)
        .fold(0.0, |m: f64, f| m.max(f.abs()))
        .max(
            (0..nn)
                .map(|q| planned_net_injection(net, q, t0).abs())
                .fold(0.0, f64::max),
        )
        .max(1.0);
    x.extend((0..np).map(|k| tabs[k].flow.unwrap_or(0.0)));
    let x_table = x.clone();
    let scale: Vec<f64> = (0..x.len())
        .map(|i| if i < free.len() { p_scale } else { q_scale })
        .collect();

    let pressures = |x: &[f64]| -> Vec<f64> {
        let mut p: Vec<f64> = fixed.iter().map(|v| v.unwrap_or(0.0)).collect();
        for (i, &q) in free.iter().enumerate() {
            p[q] = x[i];
        }
        p
    };
    let residual = |x: &[f64]| -> Result<Vec<f64>> {
        let p = pressures(x);
        let flows = &x[free.len()..];
        let mut r = Vec::with_capacity(x.len());
        for &q in &free {
            let mut bal = planned_net_injection(net, q, t0);
            for end in &topo.adjacency[q] {
                match end.side {
                    Side::End => bal += flows[end.pipe],
                    Side::Start => bal -= flows[end.pipe],
                }
            }
            r.push(bal / q_scale);
        }
        for k in 0..np {
            let area = net.pipes[k].area();
            let p_in = ratio(net, &topo, k, t0) * p[topo.from[k]];
            let m = march(eos, &c, p_in, flows[k] / area, &geoms[k])?;
            r.push((m.p_out - p[topo.to[k]]) / p_scale);
        }
        Ok(r)
    };

    let n = x.len();
    let mut r = residual(&x)?;
    let norm = |r: &[f64]| r.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let mut iterations = 0;
    while norm(&r) > 1e-15 && iterations < 60 {
        iterations += 1;
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            let h = 1e-7 * scale[j];
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let rp = residual(&xp)?;
            let rm = residual(&xm)?;
            for i in 0..n {
                jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
        let rhs = DVector::from_vec(r.iter().map(|v| -v).collect());
        let dx = jac
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Inconsistent(vec!["steady reconciliation: singular Jacobian".into()]))?;
        let mut step = 1.0;
        let before = norm(&r);
        loop {
            let trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a + step * d).collect();
            match residual(&trial) {
                Ok(rt) if norm(&rt) < before || step < 1e-3 => {
                    x = trial;
                    r = rt;
                    break;
                }
                _ => step *= 0.5,
            }
            if step < 1e-6 {
                return Err(Error::Inconsistent(vec![
                    "steady reconciliation failed to reduce the residual".into(),
                ]));
            }
        }
        let rel = dx
            .iter()
            .zip(&scale)
            .fold(0.0, |m: f64, (d, s)| m.max((step * d / s).abs()));
        if rel < 1e-15 {
            break;
        }
    }
    let final_residual = norm(&r);
    if final_residual > 1e-10 {
        return Err(Error::Inconsistent(vec![format!(
            "steady reconciliation did not converge (residual {final_residual:e})"
        )]));
    }

    let mut adjustments = Vec::new();
    for (i, &q) in free.iter().enumerate() {
        if p_seed[q].is_some() {
            adjustments.push(Check::new(
                format!("{} pressure", net.nodes[q].id),
                x[i],
                x_table[i],
                x_table[i],
                f64::INFINITY,
            ));
        }
    }
    for k in 0..np {
        if tabs[k].flow.is_some() {
            let i = free.len() + k;
            adjustments.push(Check::new(
                format!("{} flow", net.pipes[k].id),
                x[i],
                x_table[i],
                x_table[i],
                f64::INFINITY,
            ));
        }
    }

    let p = pressures(&x);
    let flows = &x[free.len()..];
    let mut pipes = Vec::with_capacity(np);
    for k in 0..np {
        let area = net.pipes[k].area();
        let phi = flows[k] / area;
        let p_in = ratio(net, &topo, k, t0) * p[topo.from[k]];
        let m = march(eos, &c, p_in, phi, &geoms[k])?;
        let dens = m
            .density
            .iter()
            .flat_map(|&d| c.iter().map(move |&ck| ck * d))
            .collect();
        pipes.push(PipeState {
            ns: c.len(),
            dens,
            flux: vec![phi; plan.cells[k] + 1],
            dx: plan.dx[k],
        });
    }
    let mut nodes = Vec::with_capacity(nn);
    for q in 0..nn {
        let mut d = vec![0.0; c.len()];
        eos.densities_at_pressure(p[q], &c, &mut d)?;
        nodes.push(NodeState {
            pressure: p[q],
            dens: d,
            fractions: c.clone(),
        });
    }
    Ok((
        InitialState { pipes, nodes },
        SteadyReport {
            tables,
            adjustments,
            newton_iterations: iterations,
            residual: final_residual,
        },
    ))
}

/// Compatibility of an assembled state with the network at `t`: boundary
/// concentrations continuous with nodal ones where gas enters a pipe, and
/// nodal pressures (slack values, compressor boosts) consistent with the
/// adjacent boundary cells through the boundary momentum balance at rest.
pub fn check_compatibility(
    state: &InitialState,
    net: &Network,
    eos: &Eos,
    stencil: BoundaryStencil,
    t: f64,
) -> Result<Report> {
    let topo = net.topology()?;
    let mut checks = Vec::new();
    for (q, node) in net.nodes.iter().enumerate() {
        let ns = &state.nodes[q];
        let sum: f64 = ns.fractions.iter().sum();
        checks.push(Check::new(format!("{} fractions sum", node.id), sum, 1.0, 1.0, 1e-12));
        if node.kind == NodeKind::Slack {
            let p = slack_pressure(eos, net, q, t)?;
            checks.push(Check::new(
                format!("{} slack pressure", node.id),
                ns.pressure,
                p,
                p,
                1e-12,
            ));
        }
        for end in &topo.adjacency[q] {
            let k = end.pipe;
            let pipe = &state.pipes[k];
            let pid = &net.pipes[k].id;
            let (cell, local_flux) = match end.side {
                Side::Start => (pipe.cell(0), pipe.flux[0]),
                Side::End => (pipe.cell(pipe.cells() - 1), -pipe.flux[pipe.cells()]),
            };
            let rho: f64 = cell.iter().sum();
            let fr = net.pipes[k].friction / (2.0 * net.pipes[k].diameter);
            let h = stencil.spacing(pipe.dx);
            let p_cell = eos.pressure(cell)?;
            let mu = if end.side == Side::Start {
                ratio(net, &topo, k, t)
            } else {
                1.0
            };
            // Node-side pressure implied by the boundary momentum balance.
            let implied = (p_cell + h * fr * local_flux * local_flux.abs() / rho) / mu;
            checks.push(Check::new(
                format!("{} pressure continuity on {pid}", node.id),
                implied,
                ns.pressure,
                ns.pressure,
                PRESSURE_TOLERANCE,
            ));
            if local_flux > 0.0 {
                for (a, (&d, &cq)) in cell.iter().zip(&ns.fractions).enumerate() {
                    checks.push(Check::new(
                        format!("{} {} fraction entering {pid}", node.id, net.species[a].name),
                        d / rho,
                        cq,
                        1.0,
                        1e-9,
                    ));
                }
            }
        }
    }
    Ok(Report { checks })
}
