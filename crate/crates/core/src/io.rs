//! Scenario files (TOML), series (CSV), diagnostics and run manifests (JSON).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coupled::{run_coupled, CoupledRun, Diagnostics};
use crate::diagnostics::ConvergenceTable;
use crate::error::{Error, Result};
use crate::evolution::{RunOutput, SlabRecord};
use crate::mesh::TurningPath;
use crate::model::Scenario;
use crate::riemann::RiemannSolution;

pub const SNAPSHOTS_CSV: &str = "snapshots.csv";
pub const XI_CSV: &str = "xi.csv";
pub const CONSTRAINTS_CSV: &str = "constraints.csv";
pub const DIAGNOSTICS_JSON: &str = "diagnostics.json";
pub const MANIFEST_JSON: &str = "manifest.json";
pub const SCENARIO_TOML: &str = "scenario.toml";

/// 17 significant digits: enough to read back the identical f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Top-level tables every scenario file must define.
pub const REQUIRED_SECTIONS: [&str; 6] = ["flux", "cost", "exit", "operator", "initial", "numerics"];

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    if let Some(missing) = REQUIRED_SECTIONS.iter().find(|k| !table.contains_key(**k)) {
        return Err(Error::Config(format!("missing [{missing}] section")));
    }
    table
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))
}

pub fn scenario_to_toml(s: &Scenario) -> Result<String> {
    toml::to_string(s).map_err(|e| Error::Config(e.to_string()))
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path)?;
    parse_scenario(&text).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// SHA-256 of the canonical TOML form.
pub fn scenario_hash(s: &Scenario) -> Result<String> {
    Ok(hex::encode(Sha256::digest(scenario_to_toml(s)?.as_bytes())))
}

pub fn write_snapshots(w: &mut impl Write, out: &RunOutput) -> Result<()> {
    writeln!(w, "t,x_left,x_right,rho")?;
    let g = &out.grid;
    for snap in &out.snapshots {
        let t = fmt_f64(snap.t);
        for (i, r) in snap.rho.iter().enumerate() {
            writeln!(
                w,
                "{t},{},{},{}",
                fmt_f64(g.node(i)),
                fmt_f64(g.node(i + 1)),
                fmt_f64(*r)
            )?;
        }
    }
    Ok(())
}

/// One row per time level; the slope column holds the slab starting there
/// (empty on the last level).
pub fn write_xi(w: &mut impl Write, path: &TurningPath) -> Result<()> {
    writeln!(w, "t,xi,slope")?;
    for (n, x) in path.xi.iter().enumerate() {
        let slope = path.slopes.get(n).map(|s| fmt_f64(*s)).unwrap_or_default();
        writeln!(w, "{},{},{slope}", fmt_f64(path.time(n)), fmt_f64(*x))?;
    }
    Ok(())
}

pub fn write_constraints(w: &mut impl Write, trace: &[SlabRecord]) -> Result<()> {
    writeln!(w, "t,q_left,q_right,exit_flux_left,exit_flux_right")?;
    for r in trace {
        if let Some(e) = r.exit {
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt_f64(r.t),
                fmt_f64(e.q_left),
                fmt_f64(e.q_right),
                fmt_f64(e.flux_left),
                fmt_f64(e.flux_right)
            )?;
        }
    }
    Ok(())
}

pub fn write_convergence(w: &mut impl Write, table: &ConvergenceTable) -> Result<()> {
    writeln!(w, "J,dx,error_L1,observed_order")?;
    for r in &table.rows {
        let order = r.observed_order.map(fmt_f64).unwrap_or_default();
        writeln!(w, "{},{},{},{order}", r.cells, fmt_f64(r.dx), fmt_f64(r.error_l1))?;
    }
    Ok(())
}

/// Exact Riemann profile at time `t` sampled at `xs`.
pub fn write_riemann_profile(w: &mut impl Write, sol: &RiemannSolution, t: f64, xs: &[f64]) -> Result<()> {
    writeln!(w, "x,rho")?;
    for &x in xs {
        writeln!(w, "{},{}", fmt_f64(x), fmt_f64(sol.eval(t, x)))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Conforming,
    NonConforming,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scenario_sha256: String,
    pub scenario_file: String,
    pub cells: usize,
    pub dx: f64,
    pub dt: Option<f64>,
    pub steps: Option<usize>,
    pub slope_bound: Option<f64>,
    pub clamp_events: Option<usize>,
    pub outputs: Vec<String>,
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<fs::File>) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Write every output of a finished run into `dir`.
pub fn write_outputs(dir: &Path, run: &CoupledRun) -> Result<Vec<String>> {
    let mut files = vec![SNAPSHOTS_CSV.to_string(), XI_CSV.to_string()];
    write_file(&dir.join(SNAPSHOTS_CSV), |w| write_snapshots(w, &run.output))?;
    write_file(&dir.join(XI_CSV), |w| write_xi(w, &run.output.path))?;
    if run.output.is_constrained() {
        write_file(&dir.join(CONSTRAINTS_CSV), |w| write_constraints(w, &run.output.trace))?;
        files.push(CONSTRAINTS_CSV.to_string());
    }
    write_json(&dir.join(DIAGNOSTICS_JSON), &run.diagnostics)?;
    files.push(DIAGNOSTICS_JSON.to_string());
    Ok(files)
}

#[derive(Debug, Clone)]
pub struct SimulationSummary {
    pub manifest: RunManifest,
    pub diagnostics: Diagnostics,
}

/// Run a scenario and write its outputs. The manifest is written first with
/// status `running` and finalised once the run ends.
pub fn simulate_to_dir(scenario: &Scenario, dir: &Path) -> Result<SimulationSummary> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(SCENARIO_TOML), scenario_to_toml(scenario)?)?;
    let mut manifest = RunManifest {
        scenario_sha256: scenario_hash(scenario)?,
        scenario_file: SCENARIO_TOML.to_string(),
        cells: scenario.numerics.cells,
        dx: scenario.numerics.dx(),
        dt: None,
        steps: None,
        slope_bound: None,
        clamp_events: None,
        outputs: Vec::new(),
        status: RunStatus::Running,
        error: None,
    };
    let manifest_path = dir.join(MANIFEST_JSON);
    write_json(&manifest_path, &manifest)?;

    let run = match run_coupled(scenario) {
        Ok(run) => run,
        Err(e) => {
            manifest.status = RunStatus::Failed;
            manifest.error = Some(e.to_string());
            write_json(&manifest_path, &manifest)?;
            return Err(e);
        }
    };
    manifest.outputs = write_outputs(dir, &run)?;
    let d = &run.diagnostics;
    manifest.dt = Some(d.dt);
    manifest.steps = Some(d.steps);
    manifest.slope_bound = Some(d.slope_bound);
    manifest.clamp_events = Some(d.clamp_events + d.range_clamps);
    manifest.status = if d.conforming {
        RunStatus::Conforming
    } else {
        RunStatus::NonConforming
    };
    write_json(&manifest_path, &manifest)?;
    Ok(SimulationSummary {
        manifest,
        diagnostics: run.diagnostics,
    })
}
