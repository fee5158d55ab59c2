mod artifacts;
mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gasmix::convergence::{convergence_study, Observable};
use gasmix::{EosMode, Network, Scenario, SimConfig};
use serde_json::json;

use crate::artifacts::Manifest;

#[derive(Parser)]
#[command(name = "gasmix", version, about = "Transient gas-mixture flow on pipeline networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a transient simulation and write CSV time series.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Rerun from a previous run manifest instead of input files.
        #[arg(long, conflicts_with_all = ["network", "scenario"])]
        manifest: Option<PathBuf>,
    },
    /// Initialize from the tables and hold the state with frozen schedules.
    SteadyCheck {
        #[command(flatten)]
        run: RunArgs,
        /// Hold steps.
        #[arg(long, default_value_t = 1000)]
        steps: u64,
        /// Largest admissible relative drift.
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
    },
    /// Grid refinement study on the given case.
    Converge {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        /// Spacing of compared samples, s.
        #[arg(long)]
        sample_interval: f64,
        /// pressures, fluxes, both, or fraction:<species>.
        #[arg(long, default_value = "both")]
        observable: String,
    },
    /// Check input files without running.
    Validate {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Draw SVG charts from a run directory.
    Plot {
        /// Directory holding the CSV outputs.
        dir: PathBuf,
        /// Where to write charts; defaults to the run directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    #[arg(long)]
    network: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Simulated time, s.
    #[arg(long)]
    duration: Option<f64>,
    /// Time step, s.
    #[arg(long)]
    dt: Option<f64>,
    /// Target cell size, m.
    #[arg(long)]
    dx: Option<f64>,
    #[arg(long, value_enum)]
    eos: Option<EosArg>,
    #[arg(long, value_enum)]
    monitor: Option<Switch>,
    #[arg(long)]
    output_every: Option<u64>,
    #[arg(long)]
    permissive_reversals: bool,
    #[arg(long)]
    allow_unsafe_dt: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum EosArg {
    Ideal,
    LinearZ,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl RunArgs {
    fn inputs(&self) -> Result<(Network, Scenario)> {
        let path = self.network.as_ref().context("--network is required")?;
        let net = Network::from_json(&read_input(path)?)?;
        let mut s = match &self.scenario {
            Some(p) => Scenario::from_json(&read_input(p)?)?,
            None => Scenario::default(),
        };
        if self.duration.is_some() {
            s.duration = self.duration;
        }
        if self.dt.is_some() {
            s.dt = self.dt;
        }
        if self.dx.is_some() {
            s.dx = self.dx;
        }
        if let Some(e) = self.eos {
            s.eos = Some(match e {
                EosArg::Ideal => EosMode::Ideal,
                EosArg::LinearZ => EosMode::LinearZ,
            });
        }
        if let Some(m) = self.monitor {
            s.monitoring = Some(matches!(m, Switch::On));
        }
        if self.output_every.is_some() {
            s.output_every = self.output_every;
        }
        if self.permissive_reversals {
            s.permissive_reversals = Some(true);
        }
        if self.allow_unsafe_dt {
            s.allow_unsafe_dt = Some(true);
        }
        Ok((net, s))
    }
}

fn read_input(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| gasmix::Error::Input(format!("cannot read {}: {e}", path.display())).into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let out = match &cli.command {
        Command::Simulate { run, .. }
        | Command::SteadyCheck { run, .. }
        | Command::Converge { run, .. }
        | Command::Validate { run } => run.out.clone(),
        Command::Plot { .. } => None,
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => report_error(&e, out.as_deref()),
    }
}

/// Machine-readable error on stderr, and in the output directory if any.
fn report_error(e: &anyhow::Error, out: Option<&Path>) -> ExitCode {
    let (kind, code) = match e.downcast_ref::<gasmix::Error>() {
        Some(g) if g.is_validation() => (g.kind(), 1),
        Some(g) => (g.kind(), 2),
        None => ("runtime", 2),
    };
    let report = json!({
        "error": {
            "kind": kind,
            "message": format!("{e:#}"),
            "exit_code": code,
        }
    });
    let text = serde_json::to_string_pretty(&report).unwrap();
    eprintln!("{text}");
    if let Some(dir) = out {
        if dir.is_dir() {
            let _ = std::fs::write(dir.join("error.json"), text + "\n");
        }
    }
    ExitCode::from(code)
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).unwrap());
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Simulate { run, manifest } => simulate(&run, manifest.as_deref()),
        Command::SteadyCheck { run, steps, tolerance } => steady_check(&run, steps, tolerance),
        Command::Converge {
            run,
            levels,
            sample_interval,
            observable,
        } => converge(&run, levels, sample_interval, &observable),
        Command::Validate { run } => validate(&run),
        Command::Plot { dir, out } => {
            let n = plot::emit_plots(&dir, out.as_deref().unwrap_or(&dir))?;
            print_json(&json!({ "charts": n }));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn simulate(run: &RunArgs, manifest: Option<&Path>) -> Result<ExitCode> {
    let (net, scen) = match manifest {
        Some(p) => Manifest::read(p)?.inputs()?,
        None => run.inputs()?,
    };
    let out = run.out.as_ref().context("--out is required")?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut sim = scen.build(&net, SimConfig::default())?;
    let result = sim.run();
    // Partial output is still written when the run stops early.
    let files = artifacts::write_outputs(out, &sim)?;
    let m = Manifest::new(&net, &scen, &sim, files)?;
    m.write(&out.join("manifest.json"))?;
    result?;
    let h = sim.history();
    print_json(&json!({
        "steps": sim.step_index(),
        "time": sim.time(),
        "events": h.events.len(),
        "reversal_warnings": h.reversal_warnings,
        "max_mass_residual": h.mass_balance_residual().max_relative(),
    }));
    Ok(ExitCode::SUCCESS)
}

fn steady_check(run: &RunArgs, steps: u64, tolerance: f64) -> Result<ExitCode> {
    let (net, mut scen) = run.inputs()?;
    let dt = scen.dt.unwrap_or(0.02);
    scen.dt = Some(dt);
    scen.duration = Some(dt * steps as f64);
    scen.freeze_schedules = Some(true);
    scen.output_every = Some(steps.max(1));
    let mut sim = scen.build(&net, SimConfig::default())?;
    let report = sim.steady_report().cloned();
    let start = sim.state();
    sim.run()?;
    let end = sim.state();
    let mut drift: f64 = 0.0;
    for (a, b) in start.pipes.iter().zip(&end.pipes) {
        drift = drift.max(max_relative_change(&a.dens, &b.dens));
        drift = drift.max(max_relative_change(&a.flux, &b.flux));
    }
    let pa: Vec<f64> = start.nodes.iter().map(|n| n.pressure).collect();
    let pb: Vec<f64> = end.nodes.iter().map(|n| n.pressure).collect();
    drift = drift.max(max_relative_change(&pa, &pb));
    let tables_ok = report.as_ref().is_none_or(|r| r.tables.ok());
    let ok = tables_ok && drift < tolerance;
    print_json(&json!({
        "ok": ok,
        "steps": steps,
        "dt": dt,
        "drift": drift,
        "tolerance": tolerance,
        "steady": report,
    }));
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

/// `max |b − a| / max |a|` over one state array.
fn max_relative_change(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().fold(0.0, |m: f64, x| m.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    a.iter().zip(b).fold(0.0, |m: f64, (x, y)| m.max((y - x).abs() / scale))
}

fn converge(run: &RunArgs, levels: usize, interval: f64, observable: &str) -> Result<ExitCode> {
    let (net, scen) = run.inputs()?;
    let obs = match observable {
        "pressures" => Observable::NodePressures,
        "fluxes" => Observable::EndpointFluxes,
        "both" => Observable::PressuresAndFluxes,
        other => match other.strip_prefix("fraction:") {
            Some(s) => Observable::NodeFractions(s.to_string()),
            None => return Err(gasmix::Error::InvalidArgument(format!("unknown observable {other}")).into()),
        },
    };
    let net = scen.apply_network(&net)?;
    let cfg = scen.apply_config(SimConfig::default());
    let r = convergence_study(&net, &cfg, levels, interval, &obs)?;
    let v = json!({ "observed_order": r.observed_order(), "report": r });
    if let Some(out) = &run.out {
        std::fs::create_dir_all(out)?;
        std::fs::write(out.join("convergence.json"), serde_json::to_string_pretty(&v)? + "\n")?;
    }
    print_json(&v);
    Ok(ExitCode::SUCCESS)
}

fn validate(run: &RunArgs) -> Result<ExitCode> {
    let (net, scen) = run.inputs()?;
    let modified = scen.apply_network(&net)?;
    let cfg = scen.apply_config(SimConfig::default());
    let mut violations = modified.validate_over(cfg.duration.max(1.0)).violations;
    if violations.is_empty() {
        // Initialization covers the table checks and the time step bound.
        match scen.build(&net, SimConfig::default()) {
            Ok(_) => {}
            Err(gasmix::Error::Inconsistent(v)) => violations.extend(v),
            Err(e) if e.is_validation() => violations.push(e.to_string()),
            Err(e) => return Err(e.into()),
        }
    }
    let ok = violations.is_empty();
    print_json(&json!({ "ok": ok, "violations": violations }));
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
