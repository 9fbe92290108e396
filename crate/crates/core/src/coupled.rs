//! Coupling of the density solver with a turning-curve operator: explicit
//! lagged splitting for production runs and the fixed-point iteration
//! ξ ← I(S(ξ)) for verification.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::evolution::{admissible_slope, resolve_numerics, run_driven, RunOutput, SlabRecord, Solver};
use crate::mesh::{TurningPath, UniformGrid};
use crate::model::{CorridorModel, InitialDatum, OperatorSpec, Scenario};
use crate::operators::{equilibrium_xi, relaxed_xi_init, relaxed_xi_step, xi_slope_bound, SubjectiveDensity};
use crate::pwl::PiecewiseLinear;

/// Factor by which the measured slope may exceed the a-priori bound.
pub const SLOPE_SLACK: f64 = 1.5;

/// Initial datum averaged over the uniform cells of [−1, 1].
pub fn initial_profile(initial: &InitialDatum, grid: &UniformGrid) -> Vec<f64> {
    grid.corridor_cells()
        .map(|i| {
            let (a, b) = (grid.node(i), grid.node(i + 1));
            (initial.integral(a, b) / (b - a)).clamp(0.0, 1.0)
        })
        .collect()
}

fn corridor(solver: &Solver<'_>) -> Vec<f64> {
    let mut u = solver.uniform_density();
    let r = solver.grid().corridor_cells();
    u.truncate(r.end);
    u.drain(..r.start);
    u
}

/// Operator state carried along a run.
#[derive(Debug, Clone)]
pub enum Driver {
    Equilibrium,
    Memory(SubjectiveDensity),
    Relaxed { epsilon: f64, restoring: bool },
    Frozen(PiecewiseLinear),
}

impl Driver {
    /// Driver for `op` together with ξ⁰.
    pub fn start(op: &OperatorSpec, model: &CorridorModel, profile0: &[f64]) -> Result<(Self, f64)> {
        Ok(match op {
            OperatorSpec::Equilibrium => (Self::Equilibrium, equilibrium_xi(profile0, &model.cost)?),
            OperatorSpec::Memory { delta } => {
                let r = SubjectiveDensity::new(profile0, *delta)?;
                let xi = equilibrium_xi(r.values(), &model.cost)?;
                (Self::Memory(r), xi)
            }
            OperatorSpec::Relaxed { epsilon, restoring } => (
                Self::Relaxed {
                    epsilon: *epsilon,
                    restoring: *restoring,
                },
                relaxed_xi_init(profile0, &model.cost)?,
            ),
            OperatorSpec::Frozen { path } => {
                let p = PiecewiseLinear::new(path)?;
                let xi = p.eval(0.0);
                (Self::Frozen(p), xi)
            }
        })
    }
}

/// Lagged coupling: ξⁿ⁺¹ from the slab-n density, slope clamped to the
/// admissible range.
#[derive(Debug, Clone)]
pub struct Coupling {
    pub driver: Driver,
    pub max_slope: f64,
    pub clamp_events: usize,
    pub range_clamps: usize,
}

impl Coupling {
    pub fn new(driver: Driver, max_slope: f64) -> Self {
        Self {
            driver,
            max_slope,
            clamp_events: 0,
            range_clamps: 0,
        }
    }

    /// ξⁿ⁺¹ for the solver sitting at slab n.
    pub fn target(&mut self, solver: &Solver<'_>) -> Result<f64> {
        let n = solver.slab();
        let dt = solver.dt();
        let xi = solver.xi();
        let proposed = match &mut self.driver {
            Driver::Equilibrium => equilibrium_xi(&corridor(solver), &solver.model().cost)?,
            Driver::Memory(r) => {
                if n > 0 {
                    r.update(&corridor(solver), dt);
                }
                equilibrium_xi(r.values(), &solver.model().cost)?
            }
            Driver::Relaxed { epsilon, restoring } => {
                let step = relaxed_xi_step(xi, &corridor(solver), &solver.model().cost, *epsilon, dt, *restoring)?;
                if step.clamped {
                    self.range_clamps += 1;
                }
                step.xi
            }
            Driver::Frozen(p) => p.eval((n + 1) as f64 * dt),
        };
        Ok(self.limit(xi, proposed, dt))
    }

    fn limit(&mut self, xi: f64, proposed: f64, dt: f64) -> f64 {
        let slope = (proposed - xi) / dt;
        if slope.abs() > self.max_slope {
            self.clamp_events += 1;
            xi + self.max_slope.copysign(slope) * dt
        } else {
            proposed
        }
    }
}

/// Advance one slab of the coupled problem.
pub fn step_coupled(solver: &mut Solver<'_>, coupling: &mut Coupling) -> Result<SlabRecord> {
    let target = coupling.target(solver)?;
    solver.step(target)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub dx: f64,
    pub dt: f64,
    pub steps: usize,
    pub mass_series: Vec<f64>,
    pub xi_series: Vec<f64>,
    pub max_slope: f64,
    pub slope_bound: f64,
    pub admissible_slope: f64,
    pub clamp_events: usize,
    pub range_clamps: usize,
    pub conforming: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub picard_residuals: Option<Vec<f64>>,
}

impl Diagnostics {
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.mass_series[0];
        self.mass_series.iter().map(|m| (m - m0).abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct CoupledRun {
    pub output: RunOutput,
    pub diagnostics: Diagnostics,
}

/// Model, bound and time grid shared by splitting and fixed-point runs.
struct Setup {
    model: CorridorModel,
    grid: UniformGrid,
    dt: f64,
    steps: usize,
    bound: f64,
    admissible: f64,
}

fn setup(scenario: &Scenario) -> Result<Setup> {
    let model = CorridorModel::from_scenario(scenario)?;
    let bound = xi_slope_bound(&scenario.operator, &model.flux, &model.cost)?;
    let (grid, dt, steps) = resolve_numerics(&model, &scenario.numerics, bound)?;
    let admissible = admissible_slope(&model.flux, bound, scenario.numerics.cfl_safety);
    Ok(Setup {
        model,
        grid,
        dt,
        steps,
        bound,
        admissible,
    })
}

fn diagnostics(output: &RunOutput, s: &Setup, coupling: &Coupling) -> Diagnostics {
    Diagnostics {
        dx: s.grid.dx(),
        dt: s.dt,
        steps: s.steps,
        mass_series: output.mass.clone(),
        xi_series: output.path.xi.clone(),
        max_slope: output.path.max_abs_slope(),
        slope_bound: s.bound,
        admissible_slope: s.admissible,
        clamp_events: coupling.clamp_events,
        range_clamps: coupling.range_clamps,
        conforming: coupling.clamp_events == 0 && coupling.range_clamps == 0,
        picard_residuals: None,
    }
}

/// Full coupled run with the scenario's operator.
pub fn run_coupled(scenario: &Scenario) -> Result<CoupledRun> {
    let s = setup(scenario)?;
    let profile0 = initial_profile(&s.model.initial, &s.grid);
    let (driver, xi0) = Driver::start(&scenario.operator, &s.model, &profile0)?;
    let mut coupling = Coupling::new(driver, s.admissible);
    let output = run_driven(
        &s.model,
        s.grid,
        s.dt,
        s.steps,
        scenario.numerics.snapshots,
        xi0,
        |solver| coupling.target(solver),
    )?;
    let diagnostics = diagnostics(&output, &s, &coupling);
    Ok(CoupledRun { output, diagnostics })
}

/// Operator re-evaluated on a stored uniform-grid history ρ⁰ … ρᴺ.
fn evaluate_operator(op: &OperatorSpec, model: &CorridorModel, history: &[Vec<f64>], dt: f64) -> Result<Vec<f64>> {
    let mut xi = Vec::with_capacity(history.len());
    match op {
        OperatorSpec::Equilibrium => {
            for p in history {
                xi.push(equilibrium_xi(p, &model.cost)?);
            }
        }
        OperatorSpec::Memory { delta } => {
            let mut r = SubjectiveDensity::new(&history[0], *delta)?;
            xi.push(equilibrium_xi(r.values(), &model.cost)?);
            for p in &history[1..] {
                r.update(p, dt);
                xi.push(equilibrium_xi(r.values(), &model.cost)?);
            }
        }
        OperatorSpec::Relaxed { epsilon, restoring } => {
            let mut x = relaxed_xi_init(&history[0], &model.cost)?;
            xi.push(x);
            for p in &history[..history.len() - 1] {
                x = relaxed_xi_step(x, p, &model.cost, *epsilon, dt, *restoring)?.xi;
                xi.push(x);
            }
        }
        OperatorSpec::Frozen { path } => {
            let p = PiecewiseLinear::new(path)?;
            xi.extend((0..history.len()).map(|n| p.eval(n as f64 * dt)));
        }
    }
    Ok(xi)
}

#[derive(Debug, Clone)]
pub struct PicardResult {
    /// Last iterate ξ_k.
    pub path: TurningPath,
    /// sup_n |ξ_{k+1}ⁿ − ξ_kⁿ| per iteration.
    pub residuals: Vec<f64>,
    pub converged: bool,
    /// Slope clamps applied while feeding iterates to the solver.
    pub clamp_events: usize,
    /// Density run on the last iterate.
    pub output: RunOutput,
}

/// Fixed-point iteration ξ_{k+1} = I(S(ξ_k)) from the constant guess ξ ≡ Ξ(ρ₀).
/// Non-convergence is reported through `converged`, not as an error.
pub fn picard_iterate(scenario: &Scenario, max_iters: usize, tol: f64) -> Result<PicardResult> {
    let s = setup(scenario)?;
    let profile0 = initial_profile(&s.model.initial, &s.grid);
    let (_, xi0) = Driver::start(&scenario.operator, &s.model, &profile0)?;
    let mut current = vec![xi0; s.steps + 1];
    let mut residuals = Vec::new();
    let mut clamp_events = 0;
    let mut converged = false;
    let mut last = None;

    for _ in 0..max_iters.max(1) {
        let mut history = Vec::with_capacity(s.steps + 1);
        let mut clamp = Coupling::new(Driver::Equilibrium, s.admissible);
        let samples = &current;
        let output = run_driven(
            &s.model,
            s.grid,
            s.dt,
            s.steps,
            scenario.numerics.snapshots,
            samples[0],
            |solver| {
                history.push(corridor(solver));
                Ok(clamp.limit(solver.xi(), samples[solver.slab() + 1], solver.dt()))
            },
        )?;
        clamp_events += clamp.clamp_events;
        // the fed path may differ from the iterate where slopes were clamped
        current = output.path.xi.clone();
        let r = s.grid.corridor_cells();
        history.push(output.final_density[r].to_vec());

        let next = evaluate_operator(&scenario.operator, &s.model, &history, s.dt)?;
        let res = next
            .iter()
            .zip(&current)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        residuals.push(res);
        last = Some(output);
        if res < tol {
            converged = true;
            break;
        }
        current = next;
    }

    let output = last.expect("at least one iteration");
    Ok(PicardResult {
        path: TurningPath::from_values(s.dt, current),
        residuals,
        converged,
        clamp_events,
        output,
    })
}
