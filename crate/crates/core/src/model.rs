//! Model ingredients (flux, cost, exit behaviour, initial datum), the scenario
//! file schema, and sampled checks of the hypotheses each ingredient must meet.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::pwl::PiecewiseLinear;

/// Default number of sample points for hypothesis checks.
pub const HYPOTHESIS_SAMPLES: usize = 1000;

// ---------------------------------------------------------------------------
// Scenario schema (TOML)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub flux: FluxSpec,
    pub cost: CostSpec,
    pub exit: ExitSpec,
    pub operator: OperatorSpec,
    pub initial: Vec<InitialPiece>,
    pub numerics: Numerics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxShape {
    /// f(ρ) = ρ(1 − ρ)
    Quadratic,
    /// f(ρ) = ρ(1 − ρ²)
    Cubic,
    /// Piecewise-linear through `points`.
    Tabulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxSpec {
    pub shape: FluxShape,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<[f64; 2]>>,
    #[serde(default = "one")]
    pub left_scale: f64,
    #[serde(default = "one")]
    pub right_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostSpec {
    Affine { alpha: f64 },
    Tabulated { points: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExitSpec {
    Open,
    Constrained {
        sigma: f64,
        limiter: LimiterSpec,
        weights: WeightSpec,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LimiterSpec {
    Constant {
        value: f64,
    },
    /// Piecewise-linear in the weighted density, flat beyond the last knot.
    Tabulated {
        points: Vec<[f64; 2]>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    Uniform,
    Tabulated { left: Vec<[f64; 2]>, right: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    /// Instantaneous cost balance.
    Equilibrium,
    /// Cost balance on the exponentially averaged density.
    Memory { delta: f64 },
    /// ODE relaxation of the turning point. `restoring = true` flips the sign
    /// of the right-hand side (experimental variant).
    Relaxed {
        epsilon: f64,
        #[serde(default, skip_serializing_if = "is_false")]
        restoring: bool,
    },
    /// Prescribed path, piecewise linear through `(t, ξ)` knots.
    Frozen { path: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialPiece {
    pub from: f64,
    pub to: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    pub t_end: f64,
    /// Cells per unit length; Δx = 1 / cells.
    pub cells: usize,
    #[serde(default = "default_safety")]
    pub cfl_safety: f64,
    /// Computational domain is [−half_width, half_width].
    pub half_width: f64,
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
}

fn one() -> f64 {
    1.0
}
fn default_safety() -> f64 {
    0.9
}
fn default_snapshots() -> usize {
    10
}
fn is_false(b: &bool) -> bool {
    !*b
}

impl Numerics {
    pub fn dx(&self) -> f64 {
        1.0 / self.cells as f64
    }
}

// ---------------------------------------------------------------------------
// Flux
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
enum FluxKind {
    Quadratic,
    Cubic,
    Tabulated(PiecewiseLinear),
}

/// Concave flux `f` on [0, 1] together with the left/right speed scales.
/// The left flux is `−v_L f`, the right flux `+v_R f`.
#[derive(Debug, Clone)]
pub struct FluxModel {
    kind: FluxKind,
    peak: f64,
    peak_value: f64,
    lipschitz: f64,
    pub left_scale: f64,
    pub right_scale: f64,
}

impl FluxModel {
    pub fn quadratic() -> Self {
        Self::with_scales(FluxShape::Quadratic, None, 1.0, 1.0).expect("quadratic flux")
    }

    pub fn from_spec(spec: &FluxSpec) -> Result<Self> {
        Self::with_scales(spec.shape, spec.points.as_deref(), spec.left_scale, spec.right_scale)
    }

    pub fn with_scales(
        shape: FluxShape,
        points: Option<&[[f64; 2]]>,
        left_scale: f64,
        right_scale: f64,
    ) -> Result<Self> {
        if !(left_scale > 0.0 && left_scale.is_finite()) {
            return Err(invalid("left_scale", "must be positive"));
        }
        if !(right_scale > 0.0 && right_scale.is_finite()) {
            return Err(invalid("right_scale", "must be positive"));
        }
        let (kind, peak, lipschitz) = match shape {
            FluxShape::Quadratic => (FluxKind::Quadratic, 0.5, 1.0),
            FluxShape::Cubic => (FluxKind::Cubic, (1.0f64 / 3.0).sqrt(), 2.0),
            FluxShape::Tabulated => {
                let pts = points.ok_or_else(|| invalid("points", "tabulated flux needs points"))?;
                let pwl = PiecewiseLinear::new(pts)?;
                let (lo, hi) = pwl.domain();
                if lo != 0.0 || hi != 1.0 {
                    return Err(invalid("points", "tabulated flux must span [0, 1]"));
                }
                let (peak, _) = pwl.knots().fold(
                    (0.0, f64::NEG_INFINITY),
                    |acc, (x, y)| if y > acc.1 { (x, y) } else { acc },
                );
                let lip = pwl.segment_slopes().map(f64::abs).fold(0.0, f64::max);
                (FluxKind::Tabulated(pwl), peak, lip)
            }
        };
        let mut model = Self {
            kind,
            peak,
            peak_value: 0.0,
            lipschitz,
            left_scale,
            right_scale,
        };
        model.peak_value = model.eval(peak);
        Ok(model)
    }

    /// Unscaled flux f(ρ).
    #[inline]
    pub fn eval(&self, rho: f64) -> f64 {
        match &self.kind {
            FluxKind::Quadratic => rho * (1.0 - rho),
            FluxKind::Cubic => rho * (1.0 - rho * rho),
            FluxKind::Tabulated(p) => p.eval(rho),
        }
    }

    /// f'(ρ); right derivative for tabulated fluxes.
    pub fn derivative(&self, rho: f64) -> f64 {
        match &self.kind {
            FluxKind::Quadratic => 1.0 - 2.0 * rho,
            FluxKind::Cubic => 1.0 - 3.0 * rho * rho,
            FluxKind::Tabulated(p) => p.slope(rho),
        }
    }

    /// Largest ρ ∈ [0, 1] with f'(ρ) ≥ `target` (monotone bisection, f' nonincreasing).
    /// This is the maximiser of the concave function `f(ρ) − target·ρ`.
    pub fn argmax_tilted(&self, target: f64) -> f64 {
        if self.derivative(0.0) <= target {
            return 0.0;
        }
        if self.derivative(1.0) >= target {
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.derivative(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// ρ̄, the maximiser of f.
    pub fn peak(&self) -> f64 {
        self.peak
    }

    /// f(ρ̄).
    pub fn peak_value(&self) -> f64 {
        self.peak_value
    }

    /// sup |f'| for the unscaled flux.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// Maximal wave speed L_f including the side scales.
    pub fn max_speed(&self) -> f64 {
        self.lipschitz * self.left_scale.max(self.right_scale)
    }

    /// sup of |flux| over both sides.
    pub fn sup_flux(&self) -> f64 {
        self.peak_value * self.left_scale.max(self.right_scale)
    }

    pub fn is_symmetric(&self) -> bool {
        self.left_scale == self.right_scale
    }
}

// ---------------------------------------------------------------------------
// Cost
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub enum CostKind {
    Affine { alpha: f64 },
    Tabulated(PiecewiseLinear),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostModel {
    pub kind: CostKind,
    /// ᾱ, the largest slope of c.
    pub deriv_sup: f64,
    /// α̲, the smallest slope of c.
    pub deriv_inf: f64,
}

/// c(p) = 1 + αp.
pub fn affine_cost(alpha: f64) -> Result<CostModel> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(invalid("alpha", format!("must be positive, got {alpha}")));
    }
    Ok(CostModel {
        kind: CostKind::Affine { alpha },
        deriv_sup: alpha,
        deriv_inf: alpha,
    })
}

impl CostModel {
    pub fn from_spec(spec: &CostSpec) -> Result<Self> {
        match spec {
            CostSpec::Affine { alpha } => affine_cost(*alpha),
            CostSpec::Tabulated { points } => {
                let pwl = PiecewiseLinear::new(points)?;
                let (lo, hi) = pwl.domain();
                if lo > 0.0 || hi < 1.0 {
                    return Err(invalid("points", "tabulated cost must cover [0, 1]"));
                }
                let slopes: Vec<f64> = pwl.segment_slopes().collect();
                Ok(Self {
                    deriv_sup: slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    deriv_inf: slopes.iter().copied().fold(f64::INFINITY, f64::min),
                    kind: CostKind::Tabulated(pwl),
                })
            }
        }
    }

    #[inline]
    pub fn eval(&self, rho: f64) -> f64 {
        match &self.kind {
            CostKind::Affine { alpha } => 1.0 + alpha * rho,
            CostKind::Tabulated(p) => p.eval(rho),
        }
    }

    /// ‖c‖_∞ on [0, 1].
    pub fn sup(&self) -> f64 {
        match &self.kind {
            CostKind::Affine { alpha } => 1.0 + alpha,
            CostKind::Tabulated(p) => p
                .knots()
                .filter(|(x, _)| (0.0..=1.0).contains(x))
                .map(|(_, y)| y)
                .fold(p.eval(0.0).max(p.eval(1.0)), f64::max),
        }
    }

    /// ‖c'‖_∞ on [0, 1].
    pub fn lipschitz(&self) -> f64 {
        self.deriv_sup.abs().max(self.deriv_inf.abs())
    }

    pub fn affine_alpha(&self) -> Option<f64> {
        match self.kind {
            CostKind::Affine { alpha } => Some(alpha),
            CostKind::Tabulated(_) => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Exit behaviour
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ExitConstraint {
    pub sigma: f64,
    /// g, nonincreasing in the weighted density.
    pub limiter: PiecewiseLinear,
    /// w₋₁ on [−1, −σ].
    pub w_left: PiecewiseLinear,
    /// w₁ on [σ, 1].
    pub w_right: PiecewiseLinear,
}

#[derive(Debug, Clone)]
pub enum ExitModel {
    Open,
    Constrained(ExitConstraint),
}

impl ExitModel {
    pub fn from_spec(spec: &ExitSpec) -> Result<Self> {
        match spec {
            ExitSpec::Open => Ok(Self::Open),
            ExitSpec::Constrained {
                sigma,
                limiter,
                weights,
            } => {
                let sigma = *sigma;
                if !(sigma > 0.0 && sigma < 1.0) {
                    return Err(invalid("sigma", "must lie in (0, 1)"));
                }
                let limiter = match limiter {
                    LimiterSpec::Constant { value } => PiecewiseLinear::constant(0.0, 1.0, *value),
                    LimiterSpec::Tabulated { points } => PiecewiseLinear::new(points)?,
                };
                let (w_left, w_right) = match weights {
                    WeightSpec::Uniform => {
                        let h = 1.0 / (1.0 - sigma);
                        (
                            PiecewiseLinear::constant(-1.0, -sigma, h),
                            PiecewiseLinear::constant(sigma, 1.0, h),
                        )
                    }
                    WeightSpec::Tabulated { left, right } => {
                        (PiecewiseLinear::new(left)?, PiecewiseLinear::new(right)?)
                    }
                };
                Ok(Self::Constrained(ExitConstraint {
                    sigma,
                    limiter,
                    w_left,
                    w_right,
                }))
            }
        }
    }

    pub fn constraint(&self) -> Option<&ExitConstraint> {
        match self {
            Self::Open => None,
            Self::Constrained(c) => Some(c),
        }
    }
}

impl ExitConstraint {
    /// ∫ w₋₁ over [a, b] ∩ [−1, −σ].
    pub fn left_weight_integral(&self, a: f64, b: f64) -> f64 {
        self.w_left.integral(a.max(-1.0), b.min(-self.sigma))
    }

    /// ∫ w₁ over [a, b] ∩ [σ, 1].
    pub fn right_weight_integral(&self, a: f64, b: f64) -> f64 {
        self.w_right.integral(a.max(self.sigma), b.min(1.0))
    }
}

// ---------------------------------------------------------------------------
// Initial datum
// ---------------------------------------------------------------------------

/// Piecewise-constant datum supported in [−1, 1], zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialDatum {
    pieces: Vec<InitialPiece>,
}

impl InitialDatum {
    pub fn new(pieces: &[InitialPiece]) -> Result<Self> {
        let mut pieces = pieces.to_vec();
        pieces.sort_by(|a, b| a.from.total_cmp(&b.from));
        for p in &pieces {
            if !(p.from < p.to) {
                return Err(invalid("initial", format!("empty piece [{}, {}]", p.from, p.to)));
            }
            if p.from < -1.0 || p.to > 1.0 {
                return Err(invalid(
                    "initial",
                    format!("piece [{}, {}] leaves [-1, 1]", p.from, p.to),
                ));
            }
            if !(0.0..=1.0).contains(&p.value) {
                return Err(invalid("initial", format!("value {} outside [0, 1]", p.value)));
            }
        }
        if pieces.windows(2).any(|w| w[1].from < w[0].to) {
            return Err(invalid("initial", "pieces overlap"));
        }
        Ok(Self { pieces })
    }

    pub fn pieces(&self) -> &[InitialPiece] {
        &self.pieces
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.pieces
            .iter()
            .find(|p| p.from <= x && x < p.to)
            .map_or(0.0, |p| p.value)
    }

    /// ∫_a^b ρ₀.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.pieces
            .iter()
            .map(|p| (b.min(p.to) - a.max(p.from)).max(0.0) * p.value)
            .sum()
    }

    pub fn mass(&self) -> f64 {
        self.pieces.iter().map(|p| (p.to - p.from) * p.value).sum()
    }
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub hypothesis: String,
    pub witness: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_accepted(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, hypothesis: impl Into<String>, witness: Option<f64>) {
        self.violations.push(Violation {
            hypothesis: hypothesis.into(),
            witness,
        });
    }

    pub fn mentions(&self, needle: &str) -> bool {
        self.violations.iter().any(|v| v.hypothesis.contains(needle))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            match v.witness {
                Some(w) => writeln!(f, "  - {} (witness {w})", v.hypothesis)?,
                None => writeln!(f, "  - {}", v.hypothesis)?,
            }
        }
        Ok(())
    }
}

fn grid(n: usize) -> impl Iterator<Item = f64> {
    (0..=n).map(move |i| i as f64 / n as f64)
}

/// Sampled checks of the flux hypotheses on an `n`-interval grid.
pub fn check_flux(flux: &FluxModel, n: usize, report: &mut ValidationReport) {
    let at0 = flux.eval(0.0);
    let at1 = flux.eval(1.0);
    if at0.abs() > 1e-14 {
        report.push("flux does not vanish at 0", Some(0.0));
    }
    if at1.abs() > 1e-14 {
        report.push("flux does not vanish at 1", Some(1.0));
    }
    let xs: Vec<f64> = grid(n).collect();
    let fs: Vec<f64> = xs.iter().map(|&x| flux.eval(x)).collect();
    if let Some(i) = (1..n).find(|&i| fs[i] <= 0.0) {
        report.push("flux not positive on (0, 1)", Some(xs[i]));
    }
    if let Some(i) = (1..n).find(|&i| fs[i - 1] + fs[i + 1] - 2.0 * fs[i] > 1e-12) {
        report.push("flux not concave", Some(xs[i]));
    }
    let peak = flux.peak();
    for i in 0..n {
        let d = fs[i + 1] - fs[i];
        if xs[i + 1] <= peak && d <= 0.0 {
            let msg = if d == 0.0 {
                "flux degenerate: derivative vanishes away from the peak"
            } else {
                "flux not increasing left of the peak"
            };
            report.push(msg, Some(xs[i]));
            break;
        }
        if xs[i] >= peak && d >= 0.0 {
            let msg = if d == 0.0 {
                "flux degenerate: derivative vanishes away from the peak"
            } else {
                "flux not decreasing right of the peak"
            };
            report.push(msg, Some(xs[i]));
            break;
        }
    }
}

/// Sampled checks of the cost hypotheses: c ≥ 1 and c strictly increasing.
pub fn check_cost(cost: &CostModel, n: usize, report: &mut ValidationReport) {
    let xs: Vec<f64> = grid(n).collect();
    let cs: Vec<f64> = xs.iter().map(|&x| cost.eval(x)).collect();
    if let Some(i) = (0..=n).find(|&i| cs[i] < 1.0) {
        report.push("cost below 1", Some(xs[i]));
    }
    if let Some(i) = (0..n).find(|&i| cs[i + 1] < cs[i]) {
        report.push("cost not nondecreasing", Some(xs[i]));
    } else if let Some(i) = (0..n).find(|&i| cs[i + 1] == cs[i]) {
        report.push(
            "cost not strictly increasing (derivative lower bound is 0)",
            Some(xs[i]),
        );
    }
}

/// Sampled checks of the exit constraint hypotheses.
pub fn check_exit(exit: &ExitConstraint, flux: &FluxModel, n: usize, report: &mut ValidationReport) {
    let left_mass = exit.left_weight_integral(-1.0, -exit.sigma);
    if (left_mass - 1.0).abs() > 1e-10 {
        report.push(format!("left weight integrates to {left_mass}, not 1"), None);
    }
    let right_mass = exit.right_weight_integral(exit.sigma, 1.0);
    if (right_mass - 1.0).abs() > 1e-10 {
        report.push(format!("right weight integrates to {right_mass}, not 1"), None);
    }
    let span = 1.0 - exit.sigma;
    for x in grid(n).map(|u| exit.sigma + span * u) {
        if exit.w_right.eval(x) < 0.0 {
            report.push("right weight negative", Some(x));
            break;
        }
        if exit.w_left.eval(-x) < 0.0 {
            report.push("left weight negative", Some(-x));
            break;
        }
    }
    // the weighted density lies in [0, 1]; sample a little beyond
    let us: Vec<f64> = grid(n).map(|u| 2.0 * u).collect();
    let gs: Vec<f64> = us.iter().map(|&u| exit.limiter.eval(u)).collect();
    if let Some(i) = (0..n).find(|&i| gs[i + 1] > gs[i]) {
        report.push("limiter g not nonincreasing", Some(us[i]));
    }
    if let Some(i) = (0..=n).find(|&i| gs[i] <= 0.0) {
        report.push("limiter g not positive", Some(us[i]));
    }
    if let Some(i) = (0..=n).find(|&i| gs[i] > flux.peak_value() + 1e-15) {
        report.push(format!("g exceeds f(peak) = {}", flux.peak_value()), Some(us[i]));
    }
}

/// Check every hypothesis on a scenario; the scenario is accepted iff the
/// returned report is empty.
pub fn validate_scenario(s: &Scenario) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = HYPOTHESIS_SAMPLES;

    let flux = match FluxModel::from_spec(&s.flux) {
        Ok(f) => {
            check_flux(&f, n, &mut report);
            Some(f)
        }
        Err(e) => {
            report.push(format!("flux: {e}"), None);
            None
        }
    };

    let cost = match CostModel::from_spec(&s.cost) {
        Ok(c) => {
            check_cost(&c, n, &mut report);
            Some(c)
        }
        Err(e) => {
            report.push(format!("cost: {e}"), None);
            None
        }
    };

    let exit = match ExitModel::from_spec(&s.exit) {
        Ok(e) => Some(e),
        Err(e) => {
            report.push(format!("exit: {e}"), None);
            None
        }
    };
    if let (Some(ExitModel::Constrained(c)), Some(f)) = (&exit, &flux) {
        check_exit(c, f, n, &mut report);
    }

    if let Err(e) = InitialDatum::new(&s.initial) {
        report.push(format!("initial datum: {e}"), None);
    }

    let num = &s.numerics;
    if !(num.t_end > 0.0 && num.t_end.is_finite()) {
        report.push("t_end must be positive", Some(num.t_end));
    }
    if num.cells < 8 {
        report.push("cells must be at least 8", Some(num.cells as f64));
    }
    if !(num.cfl_safety > 0.0 && num.cfl_safety <= 1.0) {
        report.push("cfl_safety must lie in (0, 1]", Some(num.cfl_safety));
    }
    if num.snapshots == 0 {
        report.push("snapshots must be at least 1", None);
    }
    if !(num.half_width > 1.0) {
        report.push("half_width must exceed 1", Some(num.half_width));
    } else {
        let nodes = num.half_width * num.cells as f64;
        if (nodes - nodes.round()).abs() > 1e-9 {
            report.push("half_width * cells must be an integer", Some(nodes));
        }
        if let Some(f) = &flux {
            let need = 1.0 + f.max_speed() * num.t_end;
            if num.half_width < need {
                report.push(
                    format!("half_width below 1 + L_f * t_end = {need}: waves reach the domain boundary"),
                    Some(num.half_width),
                );
            }
        }
    }

    let dx = if num.cells > 0 { num.dx() } else { 0.0 };
    match &s.operator {
        OperatorSpec::Equilibrium => {
            if let Some(c) = &cost {
                if c.affine_alpha().is_none() {
                    report.push(
                        "equilibrium operator needs an affine cost (no Lipschitz bound otherwise)",
                        None,
                    );
                }
            }
        }
        OperatorSpec::Memory { delta } => {
            if !(*delta > 0.0 && delta.is_finite()) {
                report.push("memory rate delta must be positive", Some(*delta));
            }
        }
        OperatorSpec::Relaxed { epsilon, .. } => {
            if !(*epsilon > 0.0 && epsilon.is_finite()) {
                report.push("relaxation epsilon must be positive", Some(*epsilon));
            }
        }
        OperatorSpec::Frozen { path } => match PiecewiseLinear::new(path) {
            Err(e) => report.push(format!("frozen path: {e}"), None),
            Ok(p) => {
                let limit = num.half_width - 2.0 * dx;
                let constrained = matches!(s.exit, ExitSpec::Constrained { .. });
                for (_, xi) in p.knots() {
                    if xi.abs() >= limit {
                        report.push("frozen path leaves the computational domain", Some(xi));
                        break;
                    }
                    if constrained && xi.abs() >= 1.0 - 2.0 * dx {
                        report.push("frozen path must stay inside (-1, 1) away from the exits", Some(xi));
                        break;
                    }
                }
            }
        },
    }

    report
}

/// Everything the engine needs, built from a validated scenario.
#[derive(Debug, Clone)]
pub struct CorridorModel {
    pub flux: FluxModel,
    pub cost: CostModel,
    pub exit: ExitModel,
    pub initial: InitialDatum,
}

impl CorridorModel {
    pub fn from_scenario(s: &Scenario) -> Result<Self> {
        let report = validate_scenario(s);
        if !report.is_accepted() {
            return Err(Error::Validation(report));
        }
        Ok(Self {
            flux: FluxModel::from_spec(&s.flux)?,
            cost: CostModel::from_spec(&s.cost)?,
            exit: ExitModel::from_spec(&s.exit)?,
            initial: InitialDatum::new(&s.initial)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn base_scenario() -> Scenario {
        Scenario {
            flux: FluxSpec {
                shape: FluxShape::Quadratic,
                points: None,
                left_scale: 1.0,
                right_scale: 1.0,
            },
            cost: CostSpec::Affine { alpha: 1.0 },
            exit: ExitSpec::Open,
            operator: OperatorSpec::Equilibrium,
            initial: vec![InitialPiece {
                from: -0.5,
                to: 0.5,
                value: 0.8,
            }],
            numerics: Numerics {
                t_end: 1.0,
                cells: 20,
                cfl_safety: 0.9,
                half_width: 3.0,
                snapshots: 4,
            },
        }
    }

    #[test]
    fn canonical_flux_is_accepted() {
        let report = validate_scenario(&base_scenario());
        assert!(report.is_accepted(), "{report}");
        let f = FluxModel::quadratic();
        assert_eq!(f.peak(), 0.5);
        assert_eq!(f.peak_value(), 0.25);
    }

    #[test]
    fn decreasing_cost_is_rejected_with_witness() {
        let mut s = base_scenario();
        s.cost = CostSpec::Tabulated {
            points: vec![[0.0, 2.0], [1.0, 1.0]],
        };
        let report = validate_scenario(&s);
        assert!(report.mentions("cost not nondecreasing"), "{report}");
        assert!(report.violations.iter().any(|v| v.witness.is_some()));
    }

    #[test]
    fn limiter_above_peak_flux_is_rejected() {
        let mut s = base_scenario();
        s.exit = ExitSpec::Constrained {
            sigma: 0.5,
            limiter: LimiterSpec::Constant { value: 0.3 },
            weights: WeightSpec::Uniform,
        };
        let report = validate_scenario(&s);
        assert!(report.mentions("g exceeds f(peak)"), "{report}");
    }

    #[test]
    fn affine_cost_values() {
        let c = affine_cost(1.0).unwrap();
        assert_eq!(c.eval(0.0), 1.0);
        assert_eq!(c.eval(1.0), 2.0);
        assert_eq!(c.deriv_sup, 1.0);
        assert_eq!(c.deriv_inf, 1.0);
        let c = affine_cost(0.5).unwrap();
        assert!((c.eval(0.4) - 1.2).abs() < 1e-15);
        assert!(affine_cost(0.0).is_err());
        assert!(affine_cost(-1.0).is_err());
    }

    #[test]
    fn initial_datum_zero_extension() {
        let d = InitialDatum::new(&base_scenario().initial).unwrap();
        assert_eq!(d.eval(1.5), 0.0);
        assert_eq!(d.eval(-1.0001), 0.0);
        assert_eq!(d.eval(0.0), 0.8);
        assert!((d.mass() - 0.8).abs() < 1e-15);
    }

    #[test]
    fn narrow_domain_is_rejected() {
        let mut s = base_scenario();
        s.numerics.half_width = 1.5;
        assert!(validate_scenario(&s).mentions("waves reach the domain boundary"));
    }

    #[test]
    fn non_concave_tabulated_flux_is_rejected() {
        let mut s = base_scenario();
        s.flux = FluxSpec {
            shape: FluxShape::Tabulated,
            points: Some(vec![[0.0, 0.0], [0.3, 0.05], [0.5, 0.25], [1.0, 0.0]]),
            left_scale: 1.0,
            right_scale: 1.0,
        };
        assert!(validate_scenario(&s).mentions("flux not concave"));
    }

    #[test]
    fn weights_must_integrate_to_one() {
        let mut s = base_scenario();
        s.exit = ExitSpec::Constrained {
            sigma: 0.5,
            limiter: LimiterSpec::Constant { value: 0.2 },
            weights: WeightSpec::Tabulated {
                left: vec![[-1.0, 1.0], [-0.5, 1.0]],
                right: vec![[0.5, 2.0], [1.0, 2.0]],
            },
        };
        let r = validate_scenario(&s);
        assert!(r.mentions("left weight integrates"), "{r}");
        assert!(!r.mentions("right weight integrates"), "{r}");
    }

    #[test]
    fn equilibrium_needs_affine_cost() {
        let mut s = base_scenario();
        s.cost = CostSpec::Tabulated {
            points: vec![[0.0, 1.0], [0.5, 1.2], [1.0, 2.0]],
        };
        assert!(validate_scenario(&s).mentions("affine cost"));
        s.operator = OperatorSpec::Memory { delta: 2.0 };
        assert!(validate_scenario(&s).is_accepted());
        s.operator = OperatorSpec::Memory { delta: 0.0 };
        assert!(validate_scenario(&s).mentions("delta"));
    }
}
