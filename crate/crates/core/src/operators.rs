//! Turning-curve operators. Each acts on a cell profile that covers [−1, 1]
//! with equal cells (the uniform-grid projection of the density).

use crate::error::{invalid, Result};
use crate::evolution::frozen_slope_bound;
use crate::model::{CostModel, FluxModel, OperatorSpec};
use crate::pwl::PiecewiseLinear;

/// Largest relaxation sub-step, as a fraction of ε / (2‖c‖∞).
pub const RELAXED_SUBSTEP: f64 = 0.5;

fn cell_width(profile: &[f64]) -> Result<f64> {
    if profile.is_empty() || !profile.len().is_multiple_of(2) {
        return Err(invalid("profile", "needs an even, nonzero number of cells on [-1, 1]"));
    }
    Ok(2.0 / profile.len() as f64)
}

#[inline]
fn node(k: usize, m: usize) -> f64 {
    (2.0 * k as f64 - m as f64) / m as f64
}

/// Φ(a) = ∫₋₁ᵃ c(ρ) − ∫ₐ¹ c(ρ), tabulated at the cell nodes.
///
/// The left integrals are accumulated from −1 and the right ones from +1, so a
/// mirror-symmetric profile gives an exactly zero balance at the midpoint.
#[derive(Debug, Clone)]
pub struct Balance {
    cost: Vec<f64>,
    at_node: Vec<f64>,
    dx: f64,
}

impl Balance {
    pub fn new(profile: &[f64], cost: &CostModel) -> Result<Self> {
        let dx = cell_width(profile)?;
        let c: Vec<f64> = profile.iter().map(|&r| cost.eval(r)).collect();
        let m = c.len();
        let mut left = vec![0.0; m + 1];
        for k in 0..m {
            left[k + 1] = left[k] + c[k];
        }
        let mut right = vec![0.0; m + 1];
        for k in (0..m).rev() {
            right[k] = right[k + 1] + c[k];
        }
        let at_node = (0..=m).map(|k| (left[k] - right[k]) * dx).collect();
        Ok(Self { cost: c, at_node, dx })
    }

    pub fn cells(&self) -> usize {
        self.cost.len()
    }

    /// Φ at an arbitrary point of [−1, 1].
    pub fn eval(&self, a: f64) -> f64 {
        let m = self.cells();
        let a = a.clamp(-1.0, 1.0);
        let k = (((a + 1.0) / self.dx).floor() as usize).min(m - 1);
        self.at_node[k] + 2.0 * self.cost[k] * (a - node(k, m))
    }

    /// Unique root of Φ: bracket by bisection over the nodes, then solve the
    /// affine piece in closed form.
    pub fn root(&self) -> f64 {
        let m = self.cells();
        // Φ(−1) < 0 < Φ(1) because c ≥ 1
        let (mut lo, mut hi) = (0usize, m);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.at_node[mid] <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x = node(lo, m) - self.at_node[lo] / (2.0 * self.cost[lo]);
        x.clamp(node(lo, m), node(lo + 1, m))
    }
}

/// Equilibrium turning point: the c-weighted distances to both exits agree.
pub fn equilibrium_xi(profile: &[f64], cost: &CostModel) -> Result<f64> {
    Ok(Balance::new(profile, cost)?.root())
}

/// One step of the exponential memory:
/// Rⁿ⁺¹ = e^{−δΔt} Rⁿ + (1 − e^{−δΔt}) ρⁿ⁺¹.
pub fn memory_update(r: &mut [f64], rho_next: &[f64], delta: f64, dt: f64) {
    let decay = (-delta * dt).exp();
    let gain = 1.0 - decay;
    for (ri, &p) in r.iter_mut().zip(rho_next) {
        *ri = (decay * *ri + gain * p).clamp(0.0, 1.0);
    }
}

/// Exponentially weighted past average of the density.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectiveDensity {
    values: Vec<f64>,
    delta: f64,
}

impl SubjectiveDensity {
    /// Starts from the initial profile (the density is taken constant before t = 0).
    pub fn new(initial: &[f64], delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(invalid("delta", "memory rate must be positive"));
        }
        Ok(Self {
            values: initial.to_vec(),
            delta,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn update(&mut self, rho_next: &[f64], dt: f64) {
        memory_update(&mut self.values, rho_next, self.delta, dt);
    }
}

/// Equilibrium balance evaluated on the subjective density.
pub fn memory_xi(r: &SubjectiveDensity, cost: &CostModel) -> Result<f64> {
    equilibrium_xi(r.values(), cost)
}

/// Starting point of the relaxed curve: the equilibrium of ρ₀.
pub fn relaxed_xi_init(profile: &[f64], cost: &CostModel) -> Result<f64> {
    equilibrium_xi(profile, cost)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxedStep {
    pub xi: f64,
    /// The step left (−1, 1) and was pulled back.
    pub clamped: bool,
    pub substeps: usize,
}

/// Explicit Euler for ε ξ̇ = Φ(ξ) (with `restoring`, ε ξ̇ = −Φ(ξ)), sub-stepped
/// when Δt · 2‖c‖∞ / ε exceeds [`RELAXED_SUBSTEP`].
pub fn relaxed_xi_step(
    xi: f64,
    profile: &[f64],
    cost: &CostModel,
    epsilon: f64,
    dt: f64,
    restoring: bool,
) -> Result<RelaxedStep> {
    if !(epsilon > 0.0) {
        return Err(invalid("epsilon", "must be positive"));
    }
    let balance = Balance::new(profile, cost)?;
    let stiffness = dt * 2.0 * cost.sup() / epsilon;
    let substeps = if stiffness > RELAXED_SUBSTEP {
        (stiffness / RELAXED_SUBSTEP).ceil() as usize
    } else {
        1
    };
    let h = dt / substeps as f64;
    let sign = if restoring { -1.0 } else { 1.0 };
    let limit = 1.0 - f64::EPSILON;
    let mut x = xi;
    let mut clamped = false;
    for _ in 0..substeps {
        x += sign * (h / epsilon) * balance.eval(x);
        if x.abs() > limit {
            x = x.clamp(-limit, limit);
            clamped = true;
        }
    }
    Ok(RelaxedStep {
        xi: x,
        clamped,
        substeps,
    })
}

/// A-priori Lipschitz constant of the turning curve for an operator.
pub fn xi_slope_bound(op: &OperatorSpec, flux: &FluxModel, cost: &CostModel) -> Result<f64> {
    match op {
        OperatorSpec::Equilibrium => {
            let alpha = cost
                .affine_alpha()
                .ok_or_else(|| invalid("cost", "the equilibrium operator needs an affine cost"))?;
            Ok(alpha * 2.0 * flux.sup_flux())
        }
        OperatorSpec::Memory { delta } => {
            if !(*delta > 0.0) {
                return Err(invalid("delta", "memory rate must be positive"));
            }
            Ok(cost.deriv_sup * delta)
        }
        OperatorSpec::Relaxed { epsilon, .. } => {
            if !(*epsilon > 0.0) {
                return Err(invalid("epsilon", "must be positive"));
            }
            Ok(2.0 * cost.sup() / epsilon)
        }
        OperatorSpec::Frozen { path } => Ok(frozen_slope_bound(&PiecewiseLinear::new(path)?)),
    }
}
