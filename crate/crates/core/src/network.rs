//! Network data model, file format and well-posedness checks.
//!
//! Nodes are either slack (pressure or density prescribed, with a supply
//! composition) or flow nodes (withdrawal or injection prescribed). Pipes are
//! oriented `from → to`; a compressor boosts the pressure at a pipe's start.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::eos::{GasSpecies, DEFAULT_TEMPERATURE};
use crate::error::{Error, Result};
use crate::schedule::Schedule;
use crate::units::{self, Density, Length, MassFlow, Pressure};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesDef {
    pub name: String,
    /// Specific gas constant, J/(kg K). Alternatively give `sound_speed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gas_constant: Option<f64>,
    /// Isothermal sound speed `√(R T)`, m/s.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sound_speed: Option<f64>,
    #[serde(default)]
    pub compressibility: f64,
    #[serde(default)]
    pub diffusion: f64,
}

impl SpeciesDef {
    pub fn resolve(&self, temperature: f64) -> Result<GasSpecies> {
        let r = match (self.gas_constant, self.sound_speed) {
            (Some(r), None) => r,
            (None, Some(c)) => c * c / temperature,
            _ => {
                return Err(Error::Invalid(vec![format!(
                    "species {}: give exactly one of gas_constant, sound_speed",
                    self.name
                )]))
            }
        };
        Ok(GasSpecies {
            name: self.name.clone(),
            gas_constant: r,
            compressibility: self.compressibility,
            diffusion: self.diffusion,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Slack,
    Flow,
}

/// Supply composition: per-species fraction schedules, with an optional
/// `balance` species taking the remainder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Composition {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub balance: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub fractions: BTreeMap<String, Schedule>,
}

impl Composition {
    pub fn pure(species: &str) -> Self {
        Composition {
            balance: Some(species.to_string()),
            fractions: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Limits {
    /// Upper bound on nodal mass fraction, per species.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub max_fraction: BTreeMap<String, f64>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        deserialize_with = "units::opt_quantity::<Pressure, _>"
    )]
    pub min_pressure: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub kind: NodeKind,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        deserialize_with = "units::opt_schedule::<Pressure, _>"
    )]
    pub pressure: Option<Schedule>,
    /// Prescribed total density at a slack node (converted to pressure with
    /// the supply composition).
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        deserialize_with = "units::opt_schedule::<Density, _>"
    )]
    pub density: Option<Schedule>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        deserialize_with = "units::opt_schedule::<MassFlow, _>"
    )]
    pub withdrawal: Option<Schedule>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        deserialize_with = "units::opt_schedule::<MassFlow, _>"
    )]
    pub injection: Option<Schedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub composition: Option<Composition>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limits: Option<Limits>,
}

impl Node {
    pub fn slack(id: &str, pressure: Schedule, composition: Composition) -> Self {
        Node {
            id: id.to_string(),
            kind: NodeKind::Slack,
            pressure: Some(pressure),
            density: None,
            withdrawal: None,
            injection: None,
            composition: Some(composition),
            limits: None,
        }
    }

    pub fn withdrawal(id: &str, withdrawal: Schedule) -> Self {
        Node {
            id: id.to_string(),
            kind: NodeKind::Flow,
            pressure: None,
            density: None,
            withdrawal: Some(withdrawal),
            injection: None,
            composition: None,
            limits: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipe {
    pub id: String,
    pub from: String,
    pub to: String,
    #[serde(deserialize_with = "units::quantity::<Length, _>")]
    pub diameter: f64,
    #[serde(deserialize_with = "units::quantity::<Length, _>")]
    pub length: f64,
    pub friction: f64,
    /// Cell count; derived from the target cell size when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cells: Option<usize>,
}

impl Pipe {
    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.diameter * self.diameter / 4.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Compressor {
    pub id: String,
    pub pipe: String,
    pub ratio: Schedule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PipeInit {
    pub pipe: String,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        deserialize_with = "units::opt_quantity::<Pressure, _>"
    )]
    pub pressure_in: Option<f64>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        deserialize_with = "units::opt_quantity::<Pressure, _>"
    )]
    pub pressure_out: Option<f64>,
    /// Mass flow, kg/s.
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        deserialize_with = "units::opt_quantity::<MassFlow, _>"
    )]
    pub flow: Option<f64>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        deserialize_with = "units::opt_quantity::<Density, _>"
    )]
    pub inlet_density: Option<f64>,
    /// Mass flux, kg/(m² s).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flux: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct InitialData {
    /// Uniform initial mass fractions.
    pub composition: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pipes: Vec<PipeInit>,
}

fn default_temperature() -> f64 {
    DEFAULT_TEMPERATURE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    pub species: Vec<SpeciesDef>,
    pub nodes: Vec<Node>,
    pub pipes: Vec<Pipe>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub compressors: Vec<Compressor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialData>,
}

/// Which end of a pipe touches a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Start,
    End,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipeEnd {
    pub pipe: usize,
    pub side: Side,
}

/// Index-based view of the graph, with a fixed adjacency order.
#[derive(Debug, Clone)]
pub struct Topology {
    pub from: Vec<usize>,
    pub to: Vec<usize>,
    pub adjacency: Vec<Vec<PipeEnd>>,
    /// Compressor index per pipe.
    pub compressor: Vec<Option<usize>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::Invalid(self.violations))
        }
    }
}

/// Horizon over which schedules are probed during validation.
pub const VALIDATION_HORIZON: f64 = 86_400.0;

impl Network {
    pub fn from_json(text: &str) -> Result<Network> {
        serde_json::from_str(text).map_err(|e| Error::Input(format!("network file: {e}")))
    }

    /// Canonical SI serialization.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("network serializes");
        s.push('\n');
        s
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn pipe_index(&self, id: &str) -> Option<usize> {
        self.pipes.iter().position(|p| p.id == id)
    }

    pub fn gas_species(&self) -> Result<Vec<GasSpecies>> {
        self.species.iter().map(|s| s.resolve(self.temperature)).collect()
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s.name == name)
    }

    /// Index view; fails on dangling references.
    pub fn topology(&self) -> Result<Topology> {
        let mut errors = Vec::new();
        let mut from = Vec::new();
        let mut to = Vec::new();
        let mut adjacency = vec![Vec::new(); self.nodes.len()];
        for (k, p) in self.pipes.iter().enumerate() {
            match (self.node_index(&p.from), self.node_index(&p.to)) {
                (Some(a), Some(b)) => {
                    from.push(a);
                    to.push(b);
                    adjacency[a].push(PipeEnd {
                        pipe: k,
                        side: Side::Start,
                    });
                    adjacency[b].push(PipeEnd {
                        pipe: k,
                        side: Side::End,
                    });
                }
                _ => errors.push(format!("pipe {} references an unknown node", p.id)),
            }
        }
        let mut compressor = vec![None; self.pipes.len()];
        for (c, comp) in self.compressors.iter().enumerate() {
            match self.pipe_index(&comp.pipe) {
                Some(k) if compressor[k].is_none() => compressor[k] = Some(c),
                Some(_) => errors.push(format!("pipe {} has more than one compressor", comp.pipe)),
                None => errors.push(format!("compressor {} is on nonexistent pipe {}", comp.id, comp.pipe)),
            }
        }
        if !errors.is_empty() {
            return Err(Error::Invalid(errors));
        }
        Ok(Topology {
            from,
            to,
            adjacency,
            compressor,
        })
    }

    pub fn validate(&self) -> ValidationReport {
        self.validate_over(VALIDATION_HORIZON)
    }

    /// Full well-posedness check, probing schedules on `[0, horizon]`.
    pub fn validate_over(&self, horizon: f64) -> ValidationReport {
        let mut v = Vec::new();
        let names: BTreeSet<&str> = self.species.iter().map(|s| s.name.as_str()).collect();

        if self.species.is_empty() {
            v.push("no species defined".to_string());
        }
        if names.len() != self.species.len() {
            v.push("duplicate species names".to_string());
        }
        if !(self.temperature > 0.0) {
            v.push(format!("temperature {} must be positive", self.temperature));
        }
        for s in &self.species {
            match s.resolve(self.temperature.max(f64::MIN_POSITIVE)) {
                Ok(g) => v.extend(g.validate()),
                Err(Error::Invalid(e)) => v.extend(e),
                Err(e) => v.push(e.to_string()),
            }
        }
        unique_ids(self.nodes.iter().map(|n| n.id.as_str()), "node", &mut v);
        unique_ids(self.pipes.iter().map(|p| p.id.as_str()), "pipe", &mut v);
        unique_ids(self.compressors.iter().map(|c| c.id.as_str()), "compressor", &mut v);

        for p in &self.pipes {
            if !(p.diameter > 0.0) {
                v.push(format!("pipe {}: diameter must be positive", p.id));
            }
            if !(p.length > 0.0) {
                v.push(format!("pipe {}: length must be positive", p.id));
            }
            if !(p.friction > 0.0) {
                v.push(format!("pipe {}: friction must be positive", p.id));
            }
            if matches!(p.cells, Some(n) if n < 2) {
                v.push(format!("pipe {}: at least two cells required", p.id));
            }
            if p.from == p.to {
                v.push(format!("pipe {}: both ends on node {}", p.id, p.from));
            }
        }

        let times = probe_times(self, horizon);
        for n in &self.nodes {
            check_node(n, &names, &times, &mut v);
        }

        for c in &self.compressors {
            v.extend(
                c.ratio
                    .validate()
                    .into_iter()
                    .map(|e| format!("compressor {}: {e}", c.id)),
            );
            if let Some(t) = times.iter().find(|&&t| c.ratio.eval(t) < 1.0) {
                v.push(format!(
                    "compressor {}: ratio {} below one at t = {t}",
                    c.id,
                    c.ratio.eval(*t)
                ));
            }
        }

        match self.topology() {
            Ok(topo) => check_connectivity(self, &topo, &mut v),
            Err(Error::Invalid(e)) => v.extend(e),
            Err(e) => v.push(e.to_string()),
        }
        if !self.nodes.iter().any(|n| n.kind == NodeKind::Slack) {
            v.push("missing slack node".to_string());
        }

        if let Some(init) = &self.initial {
            let sum: f64 = init.composition.values().sum();
            if (sum - 1.0).abs() > 1e-9 || init.composition.values().any(|&c| c < 0.0) {
                v.push(format!("initial composition sums to {sum}, not 1"));
            }
            for name in init.composition.keys() {
                if !names.contains(name.as_str()) {
                    v.push(format!("initial composition names unknown species {name}"));
                }
            }
            for pi in &init.pipes {
                if self.pipe_index(&pi.pipe).is_none() {
                    v.push(format!("initial data for unknown pipe {}", pi.pipe));
                }
            }
        }
        ValidationReport { violations: v }
    }
}

fn unique_ids<'a>(ids: impl Iterator<Item = &'a str>, what: &str, v: &mut Vec<String>) {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            v.push(format!("duplicate {what} id {id}"));
        }
    }
}

fn probe_times(net: &Network, horizon: f64) -> Vec<f64> {
    let mut times: Vec<f64> = (0..=288).map(|i| horizon * i as f64 / 288.0).collect();
    let mut schedules: Vec<&Schedule> = Vec::new();
    for n in &net.nodes {
        schedules.extend(
            n.pressure
                .iter()
                .chain(&n.density)
                .chain(&n.withdrawal)
                .chain(&n.injection),
        );
        if let Some(c) = &n.composition {
            schedules.extend(c.fractions.values());
        }
    }
    schedules.extend(net.compressors.iter().map(|c| &c.ratio));
    for s in schedules {
        times.extend(s.breakpoints().into_iter().filter(|t| (0.0..=horizon).contains(t)));
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
}

fn check_node(n: &Node, names: &BTreeSet<&str>, times: &[f64], v: &mut Vec<String>) {
    let id = &n.id;
    let scheds = n
        .pressure
        .iter()
        .chain(&n.density)
        .chain(&n.withdrawal)
        .chain(&n.injection);
    for s in scheds {
        v.extend(s.validate().into_iter().map(|e| format!("node {id}: {e}")));
    }
    match n.kind {
        NodeKind::Slack => {
            if n.pressure.is_some() == n.density.is_some() {
                v.push(format!("slack node {id}: give exactly one of pressure, density"));
            }
            if n.withdrawal.is_some() || n.injection.is_some() {
                v.push(format!("slack node {id}: flows are outputs, not inputs"));
            }
            if n.composition.is_none() {
                v.push(format!("slack node {id}: supply composition required"));
            }
            if let Some(p) = &n.pressure {
                if let Some(t) = times.iter().find(|&&t| !(p.eval(t) > 0.0)) {
                    v.push(format!("slack node {id}: non-positive pressure at t = {t}"));
                }
            }
            if let Some(d) = &n.density {
                if let Some(t) = times.iter().find(|&&t| !(d.eval(t) > 0.0)) {
                    v.push(format!("slack node {id}: non-positive density at t = {t}"));
                }
            }
        }
        NodeKind::Flow => {
            if n.pressure.is_some() || n.density.is_some() {
                v.push(format!("flow node {id}: pressure is an output, not an input"));
            }
            let fs = |t: f64| n.injection.as_ref().map_or(0.0, |s| s.eval(t));
            let fd = |t: f64| n.withdrawal.as_ref().map_or(0.0, |s| s.eval(t));
            if let Some(t) = times.iter().find(|&&t| fs(t) > 0.0 && fd(t) > 0.0) {
                v.push(format!(
                    "node {id}: complementarity violation, injection and withdrawal both positive at t = {t}"
                ));
            }
            if let Some(t) = times.iter().find(|&&t| fs(t) < 0.0 || fd(t) < 0.0) {
                v.push(format!("node {id}: negative injection or withdrawal at t = {t}"));
            }
            if n.injection.is_some() && n.composition.is_none() {
                v.push(format!("node {id}: injection needs a composition"));
            }
        }
    }
    if let Some(c) = &n.composition {
        check_composition(id, c, names, times, v);
    }
    if let Some(l) = &n.limits {
        for (s, &c) in &l.max_fraction {
            if !names.contains(s.as_str()) {
                v.push(format!("node {id}: limit on unknown species {s}"));
            }
            if !(c > 0.0 && c <= 1.0) {
                v.push(format!("node {id}: fraction limit {c} outside (0, 1]"));
            }
        }
        if matches!(l.min_pressure, Some(p) if !(p > 0.0)) {
            v.push(format!("node {id}: minimum pressure must be positive"));
        }
        if !l.max_fraction.is_empty() && n.withdrawal.is_some() {
            v.push(format!("node {id}: fraction limits apply to injection nodes"));
        }
        if l.min_pressure.is_some() && n.injection.is_some() {
            v.push(format!("node {id}: pressure limits apply to withdrawal nodes"));
        }
        if n.kind == NodeKind::Slack {
            v.push(format!("slack node {id}: monitoring limits apply to flow nodes"));
        }
    }
}

fn check_composition(id: &str, c: &Composition, names: &BTreeSet<&str>, times: &[f64], v: &mut Vec<String>) {
    for name in c.fractions.keys().chain(&c.balance) {
        if !names.contains(name.as_str()) {
            v.push(format!("node {id}: composition names unknown species {name}"));
        }
    }
    if let Some(b) = &c.balance {
        if c.fractions.contains_key(b) {
            v.push(format!("node {id}: balance species {b} also has a schedule"));
        }
    }
    for s in c.fractions.values() {
        v.extend(s.validate().into_iter().map(|e| format!("node {id}: {e}")));
    }
    for &t in times {
        let parts: Vec<f64> = c.fractions.values().map(|s| s.eval(t)).collect();
        let sum: f64 = parts.iter().sum();
        let bad_part = parts.iter().any(|&x| !(0.0..=1.0).contains(&x));
        let bad_sum = match c.balance {
            Some(_) => sum > 1.0 + 1e-12,
            None => (sum - 1.0).abs() > 1e-9,
        };
        if bad_part || bad_sum {
            v.push(format!(
                "node {id}: composition does not sum to 1 at t = {t} (sum {sum})"
            ));
            break;
        }
    }
}

fn check_connectivity(net: &Network, topo: &Topology, v: &mut Vec<String>) {
    let n = net.nodes.len();
    let mut component = vec![usize::MAX; n];
    let mut count = 0;
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        component[start] = count;
        while let Some(q) = stack.pop() {
            for end in &topo.adjacency[q] {
                let other = match end.side {
                    Side::Start => topo.to[end.pipe],
                    Side::End => topo.from[end.pipe],
                };
                if component[other] == usize::MAX {
                    component[other] = count;
                    stack.push(other);
                }
            }
        }
        count += 1;
    }
    if count > 1 {
        v.push(format!("disconnected graph: {count} components"));
        for c in 0..count {
            let has_slack = (0..n).any(|q| component[q] == c && net.nodes[q].kind == NodeKind::Slack);
            if !has_slack {
                v.push(format!(
                    "component containing node {} has no slack node",
                    net.nodes[component.iter().position(|&x| x == c).unwrap()].id
                ));
            }
        }
    }
    for (q, node) in net.nodes.iter().enumerate() {
        if topo.adjacency[q].is_empty() {
            v.push(format!("node {} has no pipes", node.id));
        }
    }
}

/// Composition with species names resolved to indices.
#[derive(Debug, Clone)]
pub struct ResolvedComposition {
    balance: Option<usize>,
    parts: Vec<(usize, Schedule)>,
}

impl ResolvedComposition {
    pub fn new(c: &Composition, net: &Network) -> Result<Self> {
        let idx = |name: &str| {
            net.species_index(name)
                .ok_or_else(|| Error::Invalid(vec![format!("unknown species {name}")]))
        };
        let balance = c.balance.as_deref().map(idx).transpose()?;
        let parts = c
            .fractions
            .iter()
            .map(|(k, s)| Ok((idx(k)?, s.clone())))
            .collect::<Result<_>>()?;
        Ok(ResolvedComposition { balance, parts })
    }

    pub fn eval(&self, t: f64, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        let mut sum = 0.0;
        for (k, s) in &self.parts {
            let x = s.eval(t);
            out[*k] = x;
            sum += x;
        }
        if let Some(b) = self.balance {
            out[b] = (1.0 - sum).max(0.0);
        }
    }
}
