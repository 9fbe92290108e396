use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use hughes_core::diagnostics::convergence_study_on;
use hughes_core::io::{write_convergence, write_riemann_profile, write_xi};
use hughes_core::riemann::Wave;
use hughes_core::{exact_lwr_riemann, load_scenario, picard_iterate, simulate_to_dir, FluxModel, Scenario};

/// Crowd evacuation in a one-dimensional corridor with a moving turning point.
#[derive(Parser)]
#[command(name = "hughes", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write snapshots, path, constraints and diagnostics.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Override the cells per unit length.
        #[arg(long)]
        cells: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// L¹ errors over a list of resolutions (CSV on stdout or --out).
    Convergence {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        levels: Vec<usize>,
        /// Restrict the error to cells inside [a, b], e.g. `--window=-1.2,0.3`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        window: Option<Vec<f64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate the exact solution of a Riemann problem for f = ρ(1 − ρ).
    Riemann {
        #[arg(long, allow_hyphen_values = true)]
        left: f64,
        #[arg(long, allow_hyphen_values = true)]
        right: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
        to: f64,
        #[arg(long, default_value_t = 401)]
        points: usize,
    },
    /// Fixed-point iteration on the turning curve.
    Picard {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 20)]
        iters: usize,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long)]
        cells: Option<usize>,
        /// Write the last iterate as xi.csv into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn scenario(config: &Path, cells: Option<usize>) -> Result<Scenario> {
    let mut s = load_scenario(config)?;
    if let Some(c) = cells {
        s.numerics.cells = c;
    }
    Ok(s)
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Simulate { config, cells, out } => {
            let s = scenario(&config, cells)?;
            let summary = simulate_to_dir(&s, &out)?;
            let d = &summary.diagnostics;
            eprintln!(
                "{} slabs, dt={:.3e}, max slope {:.4} (bound {:.4}), clamps {}, mass drift {:.2e}",
                d.steps,
                d.dt,
                d.max_slope,
                d.slope_bound,
                d.clamp_events + d.range_clamps,
                d.mass_drift()
            );
            if d.conforming {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("run is non-conforming: the turning curve had to be clamped");
                Ok(ExitCode::from(2))
            }
        }
        Command::Convergence {
            config,
            levels,
            window,
            out,
        } => {
            let s = scenario(&config, None)?;
            let window = match window.as_deref() {
                None => None,
                Some([a, b]) if a < b => Some((*a, *b)),
                Some(_) => bail!("--window takes two increasing bounds a,b"),
            };
            let table = convergence_study_on(&s, &levels, window)?;
            eprintln!("reference: {:?}", table.reference);
            let mut buf = Vec::new();
            write_convergence(&mut buf, &table)?;
            emit(&buf, out)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Riemann {
            left,
            right,
            t,
            from,
            to,
            points,
        } => {
            if points < 2 || to.is_nan() || from.is_nan() || to <= from {
                bail!("need at least two points on a nonempty interval");
            }
            let sol = exact_lwr_riemann(left, right, &FluxModel::quadratic())?;
            match sol.wave {
                Wave::Constant => eprintln!("constant state"),
                Wave::Shock { speed } => eprintln!("shock, speed {speed}"),
                Wave::Rarefaction { tail, head } => eprintln!("rarefaction fan on x/t in [{tail}, {head}]"),
            }
            let xs: Vec<f64> = (0..points)
                .map(|i| from + (to - from) * i as f64 / (points - 1) as f64)
                .collect();
            let mut buf = Vec::new();
            write_riemann_profile(&mut buf, &sol, t, &xs)?;
            emit(&buf, None)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Picard {
            config,
            iters,
            tol,
            cells,
            out,
        } => {
            let s = scenario(&config, cells)?;
            let p = picard_iterate(&s, iters, tol)?;
            for (k, r) in p.residuals.iter().enumerate() {
                println!("{},{:e}", k + 1, r);
            }
            if p.converged {
                eprintln!("converged after {} iterations", p.residuals.len());
            } else {
                eprintln!("no convergence within {iters} iterations");
            }
            if let Some(dir) = out {
                fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                let mut buf = Vec::new();
                write_xi(&mut buf, &p.path)?;
                emit(&buf, Some(dir.join("xi.csv")))?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn emit(bytes: &[u8], out: Option<PathBuf>) -> Result<()> {
    match out {
        Some(path) => fs::write(&path, bytes).with_context(|| format!("writing {}", path.display())),
        None => std::io::stdout().write_all(bytes).context("writing to stdout"),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
