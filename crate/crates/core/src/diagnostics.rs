//! Accounting and verification helpers: masses, L¹ distances, measured
//! Lipschitz constants and the mesh-refinement study.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupled::run_coupled;
use crate::error::{invalid, Error, Result};
use crate::mesh::{TurningPath, UniformGrid};
use crate::model::{CorridorModel, ExitSpec, OperatorSpec, Scenario};
use crate::pwl::PiecewiseLinear;
use crate::riemann::WaveSuperposition;

/// Environment variable capping the worker threads of [`convergence_study`].
pub const THREADS_ENV: &str = "HUGHES_THREADS";

/// Gap required between a frozen curve and the waves for the exact reference.
pub const EXACT_MARGIN: f64 = 0.1;

pub fn total_mass(values: &[f64], dx: f64) -> f64 {
    values.iter().sum::<f64>() * dx
}

pub fn l1_distance(a: &[f64], b: &[f64], dx: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch(format!("{} vs {} cells", a.len(), b.len())));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() * dx)
}

/// ‖ρ − ρ(−·)‖_{L¹} for values on a mirror-symmetric grid.
pub fn mirror_l1(values: &[f64], dx: f64) -> f64 {
    let n = values.len();
    (0..n).map(|i| (values[i] - values[n - 1 - i]).abs()).sum::<f64>() * dx
}

/// max_n |ξⁿ⁺¹ − ξⁿ| / Δt.
pub fn measure_lipschitz(path: &TurningPath) -> Result<f64> {
    if path.xi.len() < 2 {
        return Err(invalid("path", "need at least two samples"));
    }
    Ok(path.max_abs_slope())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    /// Cell-averaged exact solution.
    Exact,
    /// Finest level of the study.
    Finest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub cells: usize,
    pub dx: f64,
    pub error_l1: f64,
    pub observed_order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub reference: ReferenceKind,
    pub rows: Vec<ConvergenceRow>,
}

/// Exact solution available when the curve is frozen strictly left of every
/// wave, the exits are open and no waves interact before `t_end`.
pub fn exact_reference(scenario: &Scenario) -> Result<Option<WaveSuperposition>> {
    let OperatorSpec::Frozen { path } = &scenario.operator else {
        return Ok(None);
    };
    if !matches!(scenario.exit, ExitSpec::Open) {
        return Ok(None);
    }
    let model = CorridorModel::from_scenario(scenario)?;
    let waves = WaveSuperposition::new(&model.initial, &model.flux)?;
    let t = scenario.numerics.t_end;
    let path = PiecewiseLinear::new(path)?;
    let xi_max = path.knots().map(|(_, x)| x).fold(f64::NEG_INFINITY, f64::max);
    let (lo, _) = waves.reach(t);
    if waves.interaction_time() > t && xi_max < lo.min(-1.0) - EXACT_MARGIN {
        Ok(Some(waves))
    } else {
        Ok(None)
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        b = b.num_threads(n.max(1));
    }
    b.build().map_err(|e| Error::Config(e.to_string()))
}

/// Cells lying entirely inside the window.
fn window_cells(grid: &UniformGrid, window: Option<(f64, f64)>) -> std::ops::Range<usize> {
    let n = grid.cell_count();
    match window {
        None => 0..n,
        Some((a, b)) => {
            let lo = (0..n).find(|&i| grid.node(i) >= a).unwrap_or(n);
            let hi = (lo..n).find(|&i| grid.node(i + 1) > b).unwrap_or(n);
            lo..hi
        }
    }
}

/// Coarse-grid averages of a finer uniform field.
fn restrict(fine: &[f64], factor: usize) -> Vec<f64> {
    fine.chunks(factor)
        .map(|c| c.iter().sum::<f64>() / factor as f64)
        .collect()
}

/// L¹ errors at T for each resolution. Levels run concurrently; with the
/// self-reference the finest level is the reference and gets no row.
pub fn convergence_study(scenario: &Scenario, levels: &[usize]) -> Result<ConvergenceTable> {
    convergence_study_on(scenario, levels, None)
}

/// As [`convergence_study`], with errors restricted to the cells inside
/// `window` (used to isolate a single wave).
pub fn convergence_study_on(
    scenario: &Scenario,
    levels: &[usize],
    window: Option<(f64, f64)>,
) -> Result<ConvergenceTable> {
    let mut levels = levels.to_vec();
    levels.sort_unstable();
    levels.dedup();
    if levels.len() < 2 {
        return Err(invalid("levels", "need at least two resolutions"));
    }
    let exact = exact_reference(scenario)?;
    let finest = *levels.last().unwrap();
    if exact.is_none() && levels.iter().any(|&j| !finest.is_multiple_of(j)) {
        return Err(invalid("levels", "every level must divide the finest one"));
    }

    let pool = thread_pool()?;
    let finals: Vec<(UniformGrid, Vec<f64>)> = pool.install(|| {
        levels
            .par_iter()
            .map(|&cells| {
                let mut s = scenario.clone();
                s.numerics.cells = cells;
                s.numerics.snapshots = 1;
                let run = run_coupled(&s)?;
                Ok((run.output.grid, run.output.final_density))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let t = scenario.numerics.t_end;
    let (reference, errors): (ReferenceKind, Vec<(usize, f64, f64)>) = match &exact {
        Some(waves) => {
            let errs = pool.install(|| {
                finals
                    .par_iter()
                    .zip(&levels)
                    .map(|((grid, rho), &j)| {
                        let exact = waves.cell_averages(t, grid);
                        let keep = window_cells(grid, window);
                        Ok((j, grid.dx(), l1_distance(&rho[keep.clone()], &exact[keep], grid.dx())?))
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            (ReferenceKind::Exact, errs)
        }
        None => {
            let fine = &finals.last().unwrap().1;
            let errs = finals[..finals.len() - 1]
                .iter()
                .zip(&levels)
                .map(|((grid, rho), &j)| {
                    let keep = window_cells(grid, window);
                    let reference = restrict(fine, finest / j);
                    Ok((
                        j,
                        grid.dx(),
                        l1_distance(&rho[keep.clone()], &reference[keep], grid.dx())?,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            (ReferenceKind::Finest, errs)
        }
    };

    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(errors.len());
    for (i, &(cells, dx, error_l1)) in errors.iter().enumerate() {
        let observed_order = (i > 0).then(|| {
            let (prev_cells, prev_err) = (errors[i - 1].0, errors[i - 1].2);
            (prev_err / error_l1).ln() / (cells as f64 / prev_cells as f64).ln()
        });
        rows.push(ConvergenceRow {
            cells,
            dx,
            error_l1,
            observed_order,
        });
    }
    Ok(ConvergenceTable { reference, rows })
}
