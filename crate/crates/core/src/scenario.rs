//! Scenario files: run settings plus overrides applied on top of a network.

use serde::{Deserialize, Serialize};

use crate::engine::{SimConfig, Simulation};
use crate::eos::EosMode;
use crate::error::{Error, Result};
use crate::grid::BoundaryStencil;
use crate::network::{Compressor, Network, Node};
use crate::units::{self, Length, Pressure, Time};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesOverride {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compressibility: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffusion: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        deserialize_with = "units::opt_quantity::<Time, _>"
    )]
    pub duration: Option<f64>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        deserialize_with = "units::opt_quantity::<Time, _>"
    )]
    pub dt: Option<f64>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        deserialize_with = "units::opt_quantity::<Length, _>"
    )]
    pub dx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cfl_safety: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eos: Option<EosMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monitoring: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_every: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permissive_reversals: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allow_unsafe_dt: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freeze_schedules: Option<bool>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        deserialize_with = "units::opt_quantity::<Pressure, _>"
    )]
    pub p_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryStencil>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parallel: Option<bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub species: Vec<SpeciesOverride>,
    /// Node definitions replacing the network's nodes of the same id.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<Node>,
    /// Compressor definitions replacing those of the same id.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub compressors: Vec<Compressor>,
    /// Take the initial state from the unmodified network, so that
    /// overrides act as step changes at `t = 0`.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub init_from_base: bool,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario> {
        serde_json::from_str(text).map_err(|e| Error::Input(format!("scenario file: {e}")))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }

    /// Network with overrides applied.
    pub fn apply_network(&self, net: &Network) -> Result<Network> {
        let mut net = net.clone();
        for o in &self.species {
            let s = net
                .species
                .iter_mut()
                .find(|s| s.name == o.name)
                .ok_or_else(|| Error::Input(format!("scenario overrides unknown species {}", o.name)))?;
            if let Some(a) = o.compressibility {
                s.compressibility = a;
            }
            if let Some(e) = o.diffusion {
                s.diffusion = e;
            }
        }
        for n in &self.nodes {
            let slot = net
                .nodes
                .iter_mut()
                .find(|m| m.id == n.id)
                .ok_or_else(|| Error::Input(format!("scenario overrides unknown node {}", n.id)))?;
            *slot = n.clone();
        }
        for c in &self.compressors {
            let slot = net
                .compressors
                .iter_mut()
                .find(|m| m.id == c.id)
                .ok_or_else(|| Error::Input(format!("scenario overrides unknown compressor {}", c.id)))?;
            *slot = c.clone();
        }
        Ok(net)
    }

    /// Run settings layered over `base`.
    pub fn apply_config(&self, mut cfg: SimConfig) -> SimConfig {
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = self.$f { cfg.$f = v; }
            )*};
        }
        set!(
            duration,
            dx,
            cfl_safety,
            eos,
            monitoring,
            output_every,
            permissive_reversals,
            allow_unsafe_dt,
            freeze_schedules,
            p_max,
            boundary,
            parallel
        );
        if self.dt.is_some() {
            cfg.dt = self.dt;
        }
        cfg
    }

    /// Simulation of `net` under this scenario.
    pub fn build(&self, net: &Network, base: SimConfig) -> Result<Simulation> {
        let cfg = self.apply_config(base);
        let modified = self.apply_network(net)?;
        if self.init_from_base {
            let initial = Simulation::new(net.clone(), cfg.clone())?.state();
            Simulation::with_state(modified, cfg, initial)
        } else {
            Simulation::new(modified, cfg)
        }
    }
}
