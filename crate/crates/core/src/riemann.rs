//! Exact entropy solutions of the right-side LWR equation ρ_t + (v f(ρ))_x = 0
//! for Riemann data and for non-interacting superpositions of them.

use crate::error::{invalid, Result};
use crate::mesh::UniformGrid;
use crate::model::{FluxModel, InitialDatum};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Wave {
    Constant,
    Shock {
        speed: f64,
    },
    /// Fan between the characteristic speeds of the left and right states.
    Rarefaction {
        tail: f64,
        head: f64,
    },
}

#[derive(Debug, Clone)]
pub struct RiemannSolution {
    flux: FluxModel,
    scale: f64,
    pub left: f64,
    pub right: f64,
    pub wave: Wave,
}

/// Exact solution for the concave right-side flux.
pub fn exact_lwr_riemann(left: f64, right: f64, flux: &FluxModel) -> Result<RiemannSolution> {
    if !(0.0..=1.0).contains(&left) || !(0.0..=1.0).contains(&right) {
        return Err(invalid("state", "Riemann states must lie in [0, 1]"));
    }
    let v = flux.right_scale;
    let wave = if left == right {
        Wave::Constant
    } else if left < right {
        Wave::Shock {
            speed: v * (flux.eval(right) - flux.eval(left)) / (right - left),
        }
    } else {
        Wave::Rarefaction {
            tail: v * flux.derivative(left),
            head: v * flux.derivative(right),
        }
    };
    Ok(RiemannSolution {
        flux: flux.clone(),
        scale: v,
        left,
        right,
        wave,
    })
}

impl RiemannSolution {
    /// Value along the ray x/t = z.
    pub fn at_speed(&self, z: f64) -> f64 {
        match self.wave {
            Wave::Constant => self.left,
            Wave::Shock { speed } => {
                if z < speed {
                    self.left
                } else {
                    self.right
                }
            }
            Wave::Rarefaction { tail, head } => {
                if z <= tail {
                    self.left
                } else if z >= head {
                    self.right
                } else {
                    // (f')⁻¹ by monotone bisection
                    self.flux.argmax_tilted(z / self.scale).clamp(self.right, self.left)
                }
            }
        }
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        if t <= 0.0 {
            return if x < 0.0 { self.left } else { self.right };
        }
        self.at_speed(x / t)
    }

    /// Slowest and fastest speed of the wave.
    pub fn speeds(&self) -> (f64, f64) {
        match self.wave {
            Wave::Constant => (0.0, 0.0),
            Wave::Shock { speed } => (speed, speed),
            Wave::Rarefaction { tail, head } => (tail, head),
        }
    }

    pub fn flux_value(&self, rho: f64) -> f64 {
        self.scale * self.flux.eval(rho)
    }
}

/// Piecewise-constant datum evolved as independent Riemann problems, valid
/// until neighbouring waves meet.
#[derive(Debug, Clone)]
pub struct WaveSuperposition {
    origins: Vec<f64>,
    waves: Vec<RiemannSolution>,
}

impl WaveSuperposition {
    pub fn new(initial: &InitialDatum, flux: &FluxModel) -> Result<Self> {
        let mut jumps: Vec<(f64, f64, f64)> = Vec::new();
        let mut state = 0.0;
        let mut x_prev = f64::NEG_INFINITY;
        for p in initial.pieces() {
            if p.from > x_prev && state != 0.0 {
                jumps.push((x_prev, state, 0.0));
                state = 0.0;
            }
            if p.value != state {
                jumps.push((p.from, state, p.value));
            }
            state = p.value;
            x_prev = p.to;
        }
        if state != 0.0 {
            jumps.push((x_prev, state, 0.0));
        }
        let mut origins = Vec::with_capacity(jumps.len());
        let mut waves = Vec::with_capacity(jumps.len());
        for (x, l, r) in jumps {
            origins.push(x);
            waves.push(exact_lwr_riemann(l, r, flux)?);
        }
        Ok(Self { origins, waves })
    }

    /// First time two neighbouring waves touch (∞ if never).
    pub fn interaction_time(&self) -> f64 {
        (1..self.waves.len())
            .map(|i| {
                let closing = self.waves[i - 1].speeds().1 - self.waves[i].speeds().0;
                let gap = self.origins[i] - self.origins[i - 1];
                if closing > 0.0 {
                    gap / closing
                } else {
                    f64::INFINITY
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        // waves are ordered and do not overlap before the interaction time
        for (x0, w) in self.origins.iter().zip(&self.waves) {
            let (_, fast) = w.speeds();
            if x < x0 + fast * t || (t <= 0.0 && x < *x0) {
                return w.eval(t, x - x0);
            }
        }
        self.waves.last().map_or(0.0, |w| w.right)
    }

    /// Average over [a, b]: split at every wave edge, Gauss–Legendre on each piece.
    pub fn cell_average(&self, t: f64, a: f64, b: f64) -> f64 {
        let mut cuts = vec![a];
        for (x0, w) in self.origins.iter().zip(&self.waves) {
            let (s0, s1) = w.speeds();
            for e in [x0 + s0 * t, x0 + s1 * t] {
                if e > a && e < b {
                    cuts.push(e);
                }
            }
        }
        cuts.push(b);
        cuts.sort_by(f64::total_cmp);
        let total: f64 = cuts.windows(2).map(|w| self.integrate(t, w[0], w[1])).sum();
        total / (b - a)
    }

    fn integrate(&self, t: f64, a: f64, b: f64) -> f64 {
        const NODES: [f64; 5] = [
            0.0,
            -0.538_469_310_105_683_1,
            0.538_469_310_105_683_1,
            -0.906_179_845_938_664,
            0.906_179_845_938_664,
        ];
        const WEIGHTS: [f64; 5] = [
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_5,
            0.478_628_670_499_366_5,
            0.236_926_885_056_189_1,
            0.236_926_885_056_189_1,
        ];
        const PIECES: usize = 4;
        let h = (b - a) / PIECES as f64;
        (0..PIECES)
            .map(|p| {
                let c = a + (p as f64 + 0.5) * h;
                NODES
                    .iter()
                    .zip(WEIGHTS)
                    .map(|(n, w)| w * self.eval(t, c + 0.5 * h * n))
                    .sum::<f64>()
                    * 0.5
                    * h
            })
            .sum()
    }

    /// Cell averages on every cell of the uniform grid.
    pub fn cell_averages(&self, t: f64, grid: &UniformGrid) -> Vec<f64> {
        (0..grid.cell_count())
            .map(|i| self.cell_average(t, grid.node(i), grid.node(i + 1)))
            .collect()
    }

    /// Region [lo, hi] that waves can reach by time t.
    pub fn reach(&self, t: f64) -> (f64, f64) {
        self.origins
            .iter()
            .zip(&self.waves)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (x0, w)| {
                let (s0, s1) = w.speeds();
                (lo.min(x0 + s0.min(0.0) * t), hi.max(x0 + s1.max(0.0) * t))
            })
    }

    pub fn flux_value(&self, rho: f64) -> f64 {
        self.waves.first().map_or(0.0, |w| w.flux_value(rho))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InitialPiece;

    #[test]
    fn riemann_examples() {
        let f = FluxModel::quadratic();
        let s = exact_lwr_riemann(0.0, 0.8, &f).unwrap();
        match s.wave {
            Wave::Shock { speed } => assert!((speed - 0.2).abs() < 1e-15),
            w => panic!("{w:?}"),
        }
        let r = exact_lwr_riemann(0.8, 0.0, &f).unwrap();
        match r.wave {
            Wave::Rarefaction { tail, head } => {
                assert!((tail + 0.6).abs() < 1e-15 && head == 1.0);
            }
            w => panic!("{w:?}"),
        }
        // inside the fan ρ = (1 − x/t)/2
        assert!((r.eval(2.0, 0.4) - 0.4).abs() < 1e-12);
        assert_eq!(exact_lwr_riemann(0.3, 0.3, &f).unwrap().wave, Wave::Constant);
        assert!(exact_lwr_riemann(1.2, 0.3, &f).is_err());
    }

    #[test]
    fn shock_speed_matches_rankine_hugoniot_for_cubic() {
        let spec = crate::model::FluxSpec {
            shape: crate::model::FluxShape::Cubic,
            points: None,
            left_scale: 1.0,
            right_scale: 2.0,
        };
        let f = FluxModel::from_spec(&spec).unwrap();
        let s = exact_lwr_riemann(0.1, 0.7, &f).unwrap();
        let expect = 2.0 * (f.eval(0.7) - f.eval(0.1)) / 0.6;
        assert_eq!(s.speeds(), (expect, expect));
    }

    #[test]
    fn fan_is_monotone_in_similarity_variable() {
        let f = FluxModel::quadratic();
        let r = exact_lwr_riemann(0.95, 0.05, &f).unwrap();
        let mut prev = f64::INFINITY;
        for i in 0..=400 {
            let z = -1.0 + i as f64 * 0.005;
            let v = r.at_speed(z);
            assert!(v <= prev);
            prev = v;
        }
    }

    fn pulse(from: f64, to: f64, v: f64) -> InitialDatum {
        InitialDatum::new(&[InitialPiece { from, to, value: v }]).unwrap()
    }

    #[test]
    fn superposition_interaction_time() {
        let f = FluxModel::quadratic();
        let w = WaveSuperposition::new(&pulse(-0.5, 0.0, 0.8), &f).unwrap();
        assert!((w.interaction_time() - 0.625).abs() < 1e-14);
        let w = WaveSuperposition::new(&pulse(-0.5, 1.0, 0.8), &f).unwrap();
        assert!((w.interaction_time() - 1.875).abs() < 1e-14);
    }

    fn space_integral(w: &WaveSuperposition, t: f64, a: f64, b: f64) -> f64 {
        w.cell_average(t, a, b) * (b - a)
    }

    fn time_integral(g: impl Fn(f64) -> f64, t0: f64, t1: f64, cuts: &[f64]) -> f64 {
        let mut pts = vec![t0];
        pts.extend(cuts.iter().copied().filter(|&c| c > t0 && c < t1));
        pts.push(t1);
        pts.windows(2)
            .map(|p| {
                // open midpoint rule: never samples a wave exactly at a cut
                let n = 20_000;
                let h = (p[1] - p[0]) / n as f64;
                (0..n).map(|i| g(p[0] + (i as f64 + 0.5) * h)).sum::<f64>() * h
            })
            .sum()
    }

    #[test]
    fn oracle_is_conservative_on_space_time_boxes() {
        let f = FluxModel::quadratic();
        let w = WaveSuperposition::new(&pulse(-0.5, 1.0, 0.8), &f).unwrap();
        let (t0, t1, a, b) = (0.2, 0.9, -0.45, 0.7);
        let lhs = space_integral(&w, t1, a, b) - space_integral(&w, t0, a, b);
        // the shock from −0.5 crosses x = a at t = 0.25; the fan edges reach b at other times
        let cuts = [0.25, (1.0 - b) / 0.6];
        let rhs = time_integral(
            |t| w.flux_value(w.eval(t, a)) - w.flux_value(w.eval(t, b)),
            t0,
            t1,
            &cuts,
        );
        assert!((lhs - rhs).abs() < 1e-8, "{lhs} vs {rhs}");

        let (a, b) = (0.6, 1.5);
        let lhs = space_integral(&w, t1, a, b) - space_integral(&w, t0, a, b);
        let cuts = [(1.0 - a) / 0.6];
        let rhs = time_integral(
            |t| w.flux_value(w.eval(t, a)) - w.flux_value(w.eval(t, b)),
            t0,
            t1,
            &cuts,
        );
        assert!((lhs - rhs).abs() < 1e-8, "{lhs} vs {rhs}");
    }

    #[test]
    fn cell_averages_keep_mass() {
        let f = FluxModel::quadratic();
        let d = pulse(-1.0, 0.0, 0.8);
        let w = WaveSuperposition::new(&d, &f).unwrap();
        let grid = UniformGrid::new(40, 3.0).unwrap();
        let avg = w.cell_averages(1.0, &grid);
        let mass: f64 = avg.iter().sum::<f64>() * grid.dx();
        assert!((mass - d.mass()).abs() < 1e-12);
    }
}
