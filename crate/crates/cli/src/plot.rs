//! Static SVG line charts from a run directory.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::warn;

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 15.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 45.0;
const MAX_POINTS: usize = 1500;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

struct Table {
    head: Vec<String>,
    cols: Vec<Vec<f64>>,
}

impl Table {
    fn read(path: &Path) -> Result<Option<Table>> {
        if !path.exists() {
            return Ok(None);
        }
        let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
        let head: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut cols = vec![Vec::new(); head.len()];
        for rec in r.records() {
            let rec = rec?;
            for (c, v) in cols.iter_mut().zip(rec.iter()) {
                c.push(v.parse().unwrap_or(f64::NAN));
            }
        }
        Ok(Some(Table { head, cols }))
    }

    fn col(&self, name: &str) -> Option<&[f64]> {
        self.head
            .iter()
            .position(|h| h == name)
            .map(|i| self.cols[i].as_slice())
    }

    fn time(&self) -> &[f64] {
        &self.cols[0]
    }

    fn series(&self, col: &str, label: &str, scale: f64) -> Option<Series> {
        let y = self.col(col)?;
        Some(Series {
            label: label.to_string(),
            points: self.time().iter().zip(y).map(|(&t, &v)| (t, v * scale)).collect(),
        })
    }

    fn is_empty(&self) -> bool {
        self.cols[0].is_empty()
    }
}

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

struct Panel {
    title: String,
    ylabel: String,
    series: Vec<Series>,
}

impl Panel {
    fn new(title: &str, ylabel: &str, series: Vec<Series>) -> Option<Panel> {
        if series.is_empty() {
            warn!("no data for panel '{title}'; skipped");
            return None;
        }
        Some(Panel {
            title: title.into(),
            ylabel: ylabel.into(),
            series,
        })
    }
}

fn nice_step(span: f64, target: usize) -> f64 {
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    mag * if f < 1.5 {
        1.0
    } else if f < 3.0 {
        2.0
    } else if f < 7.0 {
        5.0
    } else {
        10.0
    }
}

fn tick_label(v: f64, step: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if v.abs() >= 1e5 || v.abs() < 1e-3 {
        return format!("{v:.2e}");
    }
    let digits = (-step.log10().floor()).max(0.0) as usize;
    format!("{v:.digits$}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn thin(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let stride = points.len().div_ceil(MAX_POINTS).max(1);
    let mut out: Vec<_> = points.iter().step_by(stride).copied().collect();
    if let Some(&last) = points.last() {
        if out.last() != Some(&last) {
            out.push(last);
        }
    }
    out
}

fn draw_panel(svg: &mut String, p: &Panel, ox: f64, oy: f64) {
    let pts = p
        .series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return;
    }
    let hours = x1 > 7200.0;
    let tscale = if hours { 1.0 / 3600.0 } else { 1.0 };
    let (x0, x1) = (x0 * tscale, x1 * tscale);
    let (x0, x1) = if x1 > x0 { (x0, x1) } else { (x0 - 0.5, x0 + 0.5) };
    let (y0, y1) = if y1 > y0 {
        let pad = 0.05 * (y1 - y0);
        (y0 - pad, y1 + pad)
    } else {
        let pad = if y0 == 0.0 { 1.0 } else { 0.05 * y0.abs() };
        (y0 - pad, y1 + pad)
    };
    let w = PANEL_W - MARGIN_L - MARGIN_R;
    let h = PANEL_H - MARGIN_T - MARGIN_B;
    let px = |x: f64| ox + MARGIN_L + (x - x0) / (x1 - x0) * w;
    let py = |y: f64| oy + MARGIN_T + (1.0 - (y - y0) / (y1 - y0)) * h;

    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="13">{}</text>"#,
        ox + MARGIN_L + w / 2.0,
        oy + 18.0,
        escape(&p.title)
    );
    let _ = writeln!(
        svg,
        r##"<rect x="{:.1}" y="{:.1}" width="{w:.1}" height="{h:.1}" fill="none" stroke="#444"/>"##,
        ox + MARGIN_L,
        oy + MARGIN_T
    );
    let xs = nice_step(x1 - x0, 5);
    let mut t = (x0 / xs).ceil() * xs;
    while t <= x1 + 1e-9 * xs {
        let x = px(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="#ddd"/><text x="{x:.1}" y="{:.1}" text-anchor="middle" font-size="10">{}</text>"##,
            oy + MARGIN_T,
            oy + MARGIN_T + h,
            oy + MARGIN_T + h + 14.0,
            tick_label(t, xs)
        );
        t += xs;
    }
    let ys = nice_step(y1 - y0, 5);
    let mut v = (y0 / ys).ceil() * ys;
    while v <= y1 + 1e-9 * ys {
        let y = py(v);
        let _ = writeln!(
            svg,
            r##"<line x1="{:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end" font-size="10">{}</text>"##,
            ox + MARGIN_L,
            ox + MARGIN_L + w,
            ox + MARGIN_L - 4.0,
            y + 3.0,
            tick_label(v, ys)
        );
        v += ys;
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11">{}</text>"#,
        ox + MARGIN_L + w / 2.0,
        oy + PANEL_H - 10.0,
        if hours { "time (h)" } else { "time (s)" }
    );
    let (lx, ly) = (ox + 14.0, oy + MARGIN_T + h / 2.0);
    let _ = writeln!(
        svg,
        r#"<text x="{lx:.1}" y="{ly:.1}" text-anchor="middle" font-size="11" transform="rotate(-90 {lx:.1} {ly:.1})">{}</text>"#,
        escape(&p.ylabel)
    );
    for (i, s) in p.series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut d = String::new();
        for (x, y) in thin(&s.points) {
            if x.is_finite() && y.is_finite() {
                let _ = write!(d, "{:.2},{:.2} ", px(x * tscale), py(y));
            }
        }
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.3" points="{}"/>"#,
            d.trim_end()
        );
        if p.series.len() > 1 {
            let y = oy + MARGIN_T + 14.0 + 13.0 * i as f64;
            let x = ox + MARGIN_L + w - 8.0;
            let _ = writeln!(
                svg,
                r#"<text x="{x:.1}" y="{y:.1}" text-anchor="end" font-size="10" fill="{color}">{}</text>"#,
                escape(&s.label)
            );
        }
    }
}

fn render(title: &str, panels: &[Panel]) -> String {
    let cols = if panels.len() == 4 { 2 } else { panels.len().min(3) };
    let rows = panels.len().div_ceil(cols);
    let width = cols as f64 * PANEL_W;
    let height = rows as f64 * PANEL_H + 30.0;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="15">{}</text>"#,
        width / 2.0,
        escape(title)
    );
    for (i, p) in panels.iter().enumerate() {
        let ox = (i % cols) as f64 * PANEL_W;
        let oy = 30.0 + (i / cols) as f64 * PANEL_H;
        draw_panel(&mut svg, p, ox, oy);
    }
    svg.push_str("</svg>\n");
    svg
}

/// Entity ids of files named `<prefix><id>.csv`, sorted.
fn ids(dir: &Path, prefix: &str) -> Result<Vec<String>> {
    let mut v = BTreeSet::new();
    for e in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let name = e?.file_name().to_string_lossy().into_owned();
        if let Some(id) = name.strip_prefix(prefix).and_then(|r| r.strip_suffix(".csv")) {
            v.insert(id.to_string());
        }
    }
    Ok(v.into_iter().collect())
}

/// Node kinds from the run manifest, when there is one.
fn slack_nodes(dir: &Path) -> Option<Vec<String>> {
    let text = std::fs::read_to_string(dir.join("manifest.json")).ok()?;
    let v: serde_json::Value = serde_json::from_str(&text).ok()?;
    let nodes = v.get("network")?.get("nodes")?.as_array()?;
    Some(
        nodes
            .iter()
            .filter(|n| n.get("kind").and_then(|k| k.as_str()) == Some("slack"))
            .filter_map(|n| n.get("id")?.as_str().map(str::to_string))
            .collect(),
    )
}

/// Species names in CSV column order, taken from the fraction columns.
fn species(t: &Table) -> Vec<String> {
    t.head
        .iter()
        .filter_map(|h| h.strip_prefix("fraction_")?.strip_suffix("_1").map(str::to_string))
        .collect()
}

/// Write one chart per figure type into `out`; returns how many.
pub fn emit_plots(dir: &Path, out: &Path) -> Result<usize> {
    if !dir.is_dir() {
        return Err(gasmix::Error::Input(format!("{} is not a directory", dir.display())).into());
    }
    let load = |name: String| -> Result<Option<(String, Table)>> {
        Ok(Table::read(&dir.join(format!("{name}.csv")))?.map(|t| (name, t)))
    };
    let mut nodes = Vec::new();
    for id in ids(dir, "node_")? {
        if let Some((_, t)) = load(format!("node_{id}"))? {
            nodes.push((id, t));
        }
    }
    let mut pipes = Vec::new();
    for id in ids(dir, "pipe_")? {
        if let Some((_, t)) = load(format!("pipe_{id}"))? {
            pipes.push((id, t));
        }
    }
    let mass = load("mass_balance".into())?.map(|(_, t)| t);
    let events = load("events".into())?.map(|(_, t)| t);
    nodes.retain(|(id, t)| {
        let keep = !t.is_empty();
        if !keep {
            warn!("node {id}: empty series");
        }
        keep
    });
    pipes.retain(|(_, t)| !t.is_empty());
    if nodes.is_empty() && pipes.is_empty() && mass.is_none() {
        warn!("no run outputs in {}; no charts written", dir.display());
        return Ok(0);
    }
    std::fs::create_dir_all(out)?;
    let names = nodes.first().map(|(_, t)| species(t)).unwrap_or_default();
    let slack = slack_nodes(dir);
    if slack.is_none() {
        warn!("no manifest; slack nodes unknown, inflow series skipped");
    }
    let slack = slack.unwrap_or_default();
    let is_slack = |id: &str| slack.iter().any(|s| s == id);
    let inflow = || -> Vec<Series> {
        nodes
            .iter()
            .filter(|(id, _)| is_slack(id))
            .filter_map(|(id, t)| t.series("injection_kg_s", id, 1.0))
            .collect()
    };
    let flow_pressures = || -> Vec<Series> {
        nodes
            .iter()
            .filter(|(id, _)| !is_slack(id))
            .filter_map(|(id, t)| t.series("pressure_Pa", id, 1e-6))
            .collect()
    };
    let mut charts: Vec<(PathBuf, String)> = Vec::new();
    let mut emit = |file: &str, title: &str, panels: Vec<Option<Panel>>| {
        let panels: Vec<Panel> = panels.into_iter().flatten().collect();
        if panels.is_empty() {
            warn!("{file}: no series available; skipped");
        } else {
            charts.push((out.join(file), render(title, &panels)));
        }
    };

    emit(
        "inflow.svg",
        "Supply at slack nodes",
        vec![Panel::new("Inflow", "kg/s", inflow())],
    );
    emit(
        "pressure.svg",
        "Nodal pressure",
        vec![Panel::new("Pressure", "MPa", flow_pressures())],
    );

    let mut dens = vec![Panel::new(
        "Inlet flux",
        "kg/(m² s)",
        pipes
            .iter()
            .filter_map(|(id, t)| t.series("flux_in_kg_m2_s", id, 1.0))
            .collect(),
    )];
    for s in &names {
        let col = format!("density_out_{s}_kg_m3");
        dens.push(Panel::new(
            &format!("{s} partial density at outlet"),
            "kg/m³",
            pipes.iter().filter_map(|(id, t)| t.series(&col, id, 1.0)).collect(),
        ));
    }
    emit("densities.svg", "Pipe outlets", dens);

    if names.len() > 1 {
        let panels = names[1..]
            .iter()
            .map(|s| {
                let col = format!("fraction_{s}_1");
                Panel::new(
                    &format!("{s} mass fraction"),
                    "mass fraction",
                    nodes.iter().filter_map(|(id, t)| t.series(&col, id, 1.0)).collect(),
                )
            })
            .collect();
        emit("fractions.svg", "Nodal composition", panels);
    } else {
        warn!("single-species run; fraction chart skipped");
    }

    match &mass {
        Some(m) => {
            let mut per_species = Vec::new();
            for s in &names {
                per_species.extend(m.series(&format!("residual_{s}_kg"), s, 1.0));
            }
            emit(
                "residuals.svg",
                "Mass balance",
                vec![
                    Panel::new(
                        "Relative residual",
                        "residual / linepack",
                        m.series("relative_residual_1", "total", 1.0).into_iter().collect(),
                    ),
                    Panel::new("Residual per species", "kg", per_species),
                ],
            );
        }
        None => warn!("mass_balance.csv missing; residual chart skipped"),
    }

    monitoring_chart(&nodes, events.as_ref(), &names, inflow(), flow_pressures(), &mut emit);

    for (path, svg) in &charts {
        std::fs::write(path, svg).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(charts.len())
}

type Emit<'a> = dyn FnMut(&str, &str, Vec<Option<Panel>>) + 'a;

fn monitoring_chart(
    nodes: &[(String, Table)],
    events: Option<&Table>,
    names: &[String],
    inflow: Vec<Series>,
    pressures: Vec<Series>,
    emit: &mut Emit,
) {
    if events.is_none_or(|t| t.is_empty()) {
        warn!("no policy events; monitoring chart skipped");
        return;
    }
    // Curtailed nodes are those whose applied flow ever departed from plan.
    let monitored: BTreeSet<String> = nodes
        .iter()
        .filter(
            |(_, t)| match (t.col("injection_kg_s"), t.col("planned_injection_kg_s")) {
                (Some(a), Some(p)) => a.iter().zip(p).any(|(a, p)| a != p),
                _ => false,
            },
        )
        .map(|(id, _)| id.clone())
        .collect();
    let Some(tracer) = names.get(1) else {
        return;
    };
    let col = format!("fraction_{tracer}_1");
    let at = |inside: bool| -> Vec<Series> {
        nodes
            .iter()
            .filter(|(id, _)| monitored.contains(id) == inside)
            .filter_map(|(id, t)| t.series(&col, id, 1.0))
            .collect()
    };
    emit(
        "monitoring.svg",
        "Nodal monitoring",
        vec![
            Panel::new("Inflow at slack nodes", "kg/s", inflow),
            Panel::new("Pressure", "MPa", pressures),
            Panel::new(
                &format!("{tracer} fraction at curtailed nodes"),
                "mass fraction",
                at(true),
            ),
            Panel::new(&format!("{tracer} fraction elsewhere"), "mass fraction", at(false)),
        ],
    );
}
