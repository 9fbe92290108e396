//! Godunov fluxes for the left/right fluxes, their shifted versions in the
//! frame of a moving edge, the turning-point coupling flux and the capped
//! exit fluxes.

use crate::error::{Error, Result};
use crate::model::FluxModel;

/// Flux-mismatch tolerance accepted for the coupling state `k`.
pub const INTERFACE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// x < ξ: flux −v_L f (convex, nonpositive).
    Left,
    /// x > ξ: flux +v_R f (concave, nonnegative).
    Right,
}

/// `±v f(ρ) − s ρ`, the side flux seen from an edge moving with slope `s`.
#[derive(Debug, Clone, Copy)]
pub struct ShiftedFlux<'a> {
    flux: &'a FluxModel,
    side: Side,
    scale: f64,
    shift: f64,
    /// Argmax (right side) or argmin (left side) of the shifted flux on [0, 1].
    extremum: f64,
}

impl<'a> ShiftedFlux<'a> {
    pub fn new(flux: &'a FluxModel, side: Side, shift: f64) -> Self {
        if shift == 0.0 {
            return Self::plain(flux, side);
        }
        let scale = match side {
            Side::Left => flux.left_scale,
            Side::Right => flux.right_scale,
        };
        // right: max of v f − sρ solves f' = s/v; left: min of −v f − sρ solves f' = −s/v
        let target = match side {
            Side::Left => -shift / scale,
            Side::Right => shift / scale,
        };
        Self {
            flux,
            side,
            scale,
            shift,
            extremum: flux.argmax_tilted(target),
        }
    }

    /// Unshifted side flux; the extremum is the flux peak.
    pub fn plain(flux: &'a FluxModel, side: Side) -> Self {
        let scale = match side {
            Side::Left => flux.left_scale,
            Side::Right => flux.right_scale,
        };
        Self {
            flux,
            side,
            scale,
            shift: 0.0,
            extremum: flux.peak(),
        }
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    #[inline]
    pub fn eval(&self, rho: f64) -> f64 {
        let base = self.scale * self.flux.eval(rho);
        let signed = match self.side {
            Side::Left => -base,
            Side::Right => base,
        };
        if self.shift == 0.0 {
            signed
        } else {
            signed - self.shift * rho
        }
    }

    /// Exact Godunov flux: min over [a, b] if a ≤ b, max over [b, a] otherwise.
    /// States are assumed to lie in [0, 1].
    #[inline]
    pub fn godunov_unchecked(&self, a: f64, b: f64) -> f64 {
        match self.side {
            // concave: minimum at an endpoint, maximum at the clamped argmax
            Side::Right => {
                if a <= b {
                    self.eval(a).min(self.eval(b))
                } else {
                    self.eval(self.extremum.clamp(b, a))
                }
            }
            // convex: minimum at the clamped argmin, maximum at an endpoint
            Side::Left => {
                if a <= b {
                    self.eval(self.extremum.clamp(a, b))
                } else {
                    self.eval(a).max(self.eval(b))
                }
            }
        }
    }
}

fn check_state(v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::StateOutOfRange { value: v })
    }
}

pub fn godunov(g: &ShiftedFlux<'_>, a: f64, b: f64) -> Result<f64> {
    check_state(a)?;
    check_state(b)?;
    Ok(g.godunov_unchecked(a, b))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceSolution {
    pub k: f64,
    pub flux: f64,
}

/// Intermediate state `k` with God_{f_L}(ρ_L, k) = God_{f_R}(k, ρ_R).
///
/// `k ↦ God_{f_R}(k, ρ_R) − God_{f_L}(ρ_L, k)` is nondecreasing, nonpositive at
/// 0 and nonnegative at 1. Both ends of its zero set are located by bisection;
/// when the zero set is an interval the point closest to the flux peak is kept.
pub fn interface_state(flux: &FluxModel, rho_l: f64, rho_r: f64, slope: f64) -> Result<InterfaceSolution> {
    check_state(rho_l)?;
    check_state(rho_r)?;
    let fl = ShiftedFlux::new(flux, Side::Left, slope);
    let fr = ShiftedFlux::new(flux, Side::Right, slope);
    interface_state_with(&fl, &fr, flux.peak(), rho_l, rho_r)
}

pub(crate) fn interface_state_with(
    fl: &ShiftedFlux<'_>,
    fr: &ShiftedFlux<'_>,
    peak: f64,
    rho_l: f64,
    rho_r: f64,
) -> Result<InterfaceSolution> {
    let mismatch = |k: f64| fr.godunov_unchecked(k, rho_r) - fl.godunov_unchecked(rho_l, k);

    let h0 = mismatch(0.0);
    let h1 = mismatch(1.0);
    if h0 > INTERFACE_TOL || h1 < -INTERFACE_TOL {
        return Err(Error::InterfaceNotBracketed {
            rho_l,
            rho_r,
            slope: fl.shift(),
            mismatch: if h0 > 0.0 { h0 } else { h1 },
        });
    }

    // lower end: sup { k : h(k) < 0 }
    let k_lo = if h0 >= 0.0 {
        0.0
    } else {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        while hi - lo > 0.0 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if mismatch(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    // upper end: inf { k : h(k) > 0 }
    let k_hi = if h1 <= 0.0 {
        1.0
    } else {
        let (mut lo, mut hi) = (k_lo, 1.0f64);
        while hi - lo > 0.0 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if mismatch(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    };
    let k = if k_lo <= k_hi {
        peak.clamp(k_lo, k_hi)
    } else {
        0.5 * (k_lo + k_hi)
    };
    let left = fl.godunov_unchecked(rho_l, k);
    let right = fr.godunov_unchecked(k, rho_r);
    if (left - right).abs() > INTERFACE_TOL {
        return Err(Error::InterfaceNotBracketed {
            rho_l,
            rho_r,
            slope: fl.shift(),
            mismatch: left - right,
        });
    }
    // normalise −0.0
    Ok(InterfaceSolution { k, flux: left + 0.0 })
}

/// The single conservative flux through the moving turning-point edge.
pub fn interface_flux(flux: &FluxModel, rho_l: f64, rho_r: f64, slope: f64) -> Result<f64> {
    interface_state(flux, rho_l, rho_r, slope).map(|s| s.flux)
}

/// Flux through x = 1, capped by the exit constraint `q1`.
pub fn exit_flux_right(flux: &FluxModel, rho_minus: f64, rho_plus: f64, q1: f64) -> Result<f64> {
    let g = godunov(&ShiftedFlux::plain(flux, Side::Right), rho_minus, rho_plus)?;
    Ok(cap_right(g, q1))
}

/// Flux through x = −1, capped from below by `−q_{−1}`.
pub fn exit_flux_left(flux: &FluxModel, rho_minus: f64, rho_plus: f64, q_left: f64) -> Result<f64> {
    let g = godunov(&ShiftedFlux::plain(flux, Side::Left), rho_minus, rho_plus)?;
    Ok(cap_left(g, q_left))
}

#[inline]
pub(crate) fn cap_right(godunov: f64, q1: f64) -> f64 {
    godunov.min(q1)
}

#[inline]
pub(crate) fn cap_left(godunov: f64, q_left: f64) -> f64 {
    godunov.max(-q_left)
}
