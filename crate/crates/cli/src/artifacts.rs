//! Run artifacts: CSV time series and the run manifest.
//!
//! Every CSV has a header row whose column names carry their SI unit and
//! time as the first column. The layout is versioned through
//! `CSV_SCHEMA` in the manifest.

use std::path::Path;

use anyhow::{bail, Context, Result};
use gasmix::{Network, Scenario, SimConfig, Simulation};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const CSV_SCHEMA: u32 = 1;
const FORMAT: &str = "gasmix-run";

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

fn num(x: f64) -> String {
    // Shortest representation that reads back to the same bits.
    format!("{x:e}")
}

/// Write every CSV for `sim`'s history into `dir`; returns the file names.
pub fn write_outputs(dir: &Path, sim: &Simulation) -> Result<Vec<String>> {
    let net = sim.network();
    let names: Vec<&str> = net.species.iter().map(|s| s.name.as_str()).collect();
    let h = sim.history();
    let mut files = Vec::new();

    for (q, node) in net.nodes.iter().enumerate() {
        let name = format!("node_{}.csv", node.id);
        let mut w = writer(&dir.join(&name))?;
        let mut head = vec!["time_s".to_string(), "pressure_Pa".to_string()];
        head.extend(names.iter().map(|s| format!("fraction_{s}_1")));
        head.push("injection_kg_s".into());
        head.push("planned_injection_kg_s".into());
        w.write_record(&head)?;
        for s in &h.samples {
            let n = &s.nodes[q];
            let mut row = vec![num(s.time), num(n.pressure)];
            row.extend(n.fractions.iter().map(|&c| num(c)));
            row.push(num(n.injection));
            row.push(num(n.planned));
            w.write_record(&row)?;
        }
        w.flush()?;
        files.push(name);
    }

    for (k, pipe) in net.pipes.iter().enumerate() {
        let name = format!("pipe_{}.csv", pipe.id);
        let mut w = writer(&dir.join(&name))?;
        let mut head: Vec<String> = [
            "time_s",
            "flux_in_kg_m2_s",
            "flux_out_kg_m2_s",
            "pressure_in_Pa",
            "pressure_out_Pa",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        head.extend(names.iter().map(|s| format!("density_in_{s}_kg_m3")));
        head.extend(names.iter().map(|s| format!("density_out_{s}_kg_m3")));
        w.write_record(&head)?;
        for s in &h.samples {
            let p = &s.pipes[k];
            let mut row = vec![
                num(s.time),
                num(p.flux_in),
                num(p.flux_out),
                num(p.pressure_in),
                num(p.pressure_out),
            ];
            row.extend(p.dens_in.iter().map(|&d| num(d)));
            row.extend(p.dens_out.iter().map(|&d| num(d)));
            w.write_record(&row)?;
        }
        w.flush()?;
        files.push(name);
    }

    {
        let name = "mass_balance.csv".to_string();
        let mut w = writer(&dir.join(&name))?;
        let mut head = vec![
            "time_s".to_string(),
            "linepack_kg".to_string(),
            "residual_kg".to_string(),
            "relative_residual_1".to_string(),
        ];
        head.extend(names.iter().map(|s| format!("residual_{s}_kg")));
        w.write_record(&head)?;
        let mb = h.mass_balance_residual();
        for i in 0..mb.times.len() {
            let mut row = vec![
                num(mb.times[i]),
                num(mb.linepack[i]),
                num(mb.total[i]),
                num(mb.relative[i]),
            ];
            row.extend(mb.species[i].iter().map(|&r| num(r)));
            w.write_record(&row)?;
        }
        w.flush()?;
        files.push(name);
    }

    {
        let name = "events.csv".to_string();
        let mut w = writer(&dir.join(&name))?;
        w.write_record([
            "time_s",
            "node",
            "policy",
            "planned_kg_s",
            "applied_kg_s",
            "limit",
            "violated",
        ])?;
        for e in &h.events {
            w.write_record([
                num(e.time),
                e.node.clone(),
                e.policy.clone(),
                num(e.planned),
                num(e.applied),
                num(e.limit),
                e.violated.to_string(),
            ])?;
        }
        w.flush()?;
        files.push(name);
    }
    Ok(files)
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Versions {
    pub gasmix: String,
    pub cli: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PlanEcho {
    pub dt: f64,
    pub dt_limit: f64,
    pub steps: u64,
    pub cells: Vec<usize>,
    pub dx: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Summary {
    pub completed_steps: u64,
    pub final_time: f64,
    pub events: usize,
    pub reversal_warnings: u64,
    pub max_mass_residual: f64,
}

/// Everything needed to rerun a simulation bit for bit.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub csv_schema: u32,
    pub versions: Versions,
    /// Network as given, canonical SI form.
    pub network: Value,
    /// Scenario with command-line overrides folded in.
    pub scenario: Value,
    /// Resolved run settings.
    pub config: SimConfig,
    pub plan: PlanEcho,
    pub outputs: Vec<String>,
    pub summary: Summary,
}

impl Manifest {
    pub fn new(net: &Network, scen: &Scenario, sim: &Simulation, outputs: Vec<String>) -> Result<Self> {
        let plan = sim.plan();
        let h = sim.history();
        Ok(Manifest {
            format: FORMAT.into(),
            csv_schema: CSV_SCHEMA,
            versions: Versions {
                gasmix: gasmix::VERSION.into(),
                cli: env!("CARGO_PKG_VERSION").into(),
            },
            network: serde_json::from_str(&net.to_json())?,
            scenario: serde_json::from_str(&scen.to_json())?,
            config: sim.config().clone(),
            plan: PlanEcho {
                dt: plan.dt,
                dt_limit: plan.dt_limit,
                steps: plan.steps,
                cells: plan.cells.clone(),
                dx: plan.dx.clone(),
            },
            outputs,
            summary: Summary {
                completed_steps: sim.step_index(),
                final_time: sim.time(),
                events: h.events.len(),
                reversal_warnings: h.reversal_warnings,
                max_mass_residual: h.mass_balance_residual().max_relative(),
            },
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| gasmix::Error::Input(format!("cannot read {}: {e}", path.display())))?;
        let m: Manifest =
            serde_json::from_str(&text).map_err(|e| gasmix::Error::Input(format!("{}: {e}", path.display())))?;
        if m.format != FORMAT {
            bail!(gasmix::Error::Input(format!(
                "{} is not a run manifest",
                path.display()
            )));
        }
        Ok(m)
    }

    pub fn inputs(&self) -> Result<(Network, Scenario)> {
        let net = Network::from_json(&self.network.to_string())?;
        let scen = Scenario::from_json(&self.scenario.to_string())?;
        Ok((net, scen))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")
            .with_context(|| format!("writing {}", path.display()))
    }
}
