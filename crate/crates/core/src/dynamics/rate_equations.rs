//! Direct integration of the level rate equations.
//!
//! This is the independent route used to check the closed forms: it builds
//! the full linear system from the transition rates and integrates it with
//! classic fourth-order Runge-Kutta, without using any of the analytic
//! solutions.

use nalgebra::{DMatrix, DVector};

use super::RegimeModel;
use crate::error::{Error, Result};
use crate::model::{BranchingRatios, PopulationState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEquationOptions {
    /// Equilibrium population of each ground sublevel. Defaults to the
    /// burn population `N`, so that 4g starts empty.
    pub ground_eq: Option<f64>,
    /// Base step is `min(T_opt, T_ff or T_S) / steps_per_timescale`.
    pub steps_per_timescale: f64,
    /// Accept once the step-halving difference is below `tol * N`.
    pub tol: f64,
    pub max_halvings: u32,
    /// Full branching matrix for the high-temperature system. When absent
    /// one is built from `beta14` and `beta_bar`.
    pub branching: Option<BranchingRatios>,
}

impl Default for RateEquationOptions {
    fn default() -> Self {
        RateEquationOptions {
            ground_eq: None,
            steps_per_timescale: 200.0,
            tol: 1e-9,
            max_halvings: 8,
            branching: None,
        }
    }
}

/// Linear autonomous system `dy/dt = M y`.
struct LinearSystem {
    m: DMatrix<f64>,
    y0: DVector<f64>,
}

impl LinearSystem {
    /// One classic RK4 step of size `h` for a linear autonomous system is the
    /// degree-4 Taylor polynomial of `exp(hM)`; build it once per step size.
    fn rk4_propagator(&self, h: f64) -> DMatrix<f64> {
        let n = self.m.nrows();
        let hm = &self.m * h;
        let mut term = DMatrix::<f64>::identity(n, n);
        let mut p = term.clone();
        for k in 1..=4 {
            term = &term * &hm / k as f64;
            p += &term;
        }
        p
    }

    fn integrate(&self, grid: &[f64], h_max: f64) -> Vec<DVector<f64>> {
        let mut out = Vec::with_capacity(grid.len());
        let mut y = self.y0.clone();
        out.push(y.clone());
        let mut cached: Option<(usize, f64, DMatrix<f64>)> = None;
        for w in grid.windows(2) {
            let span = w[1] - w[0];
            let steps = (span / h_max).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            let prop = match &cached {
                Some((s, hh, p)) if *s == steps && (*hh - h).abs() <= 1e-15 * h => p,
                _ => {
                    cached = Some((steps, h, self.rk4_propagator(h)));
                    &cached.as_ref().unwrap().2
                }
            };
            for _ in 0..steps {
                y = prop * &y;
            }
            out.push(y.clone());
        }
        out
    }
}

fn flip_flop_system(p: &crate::model::FFParams, n_eq: f64) -> LinearSystem {
    // State: [n1g + n2g, n3g, n4g, n1e]
    let g_opt = 1.0 / p.t_opt;
    let g_ff = 1.0 / p.t_ff;
    let b12 = p.beta11_plus_12;
    let b13 = 1.0 - p.beta11_plus_12 - p.beta14;
    let b14 = p.beta14;
    #[rustfmt::skip]
    let m = DMatrix::from_row_slice(4, 4, &[
        0.0, 0.0,   0.0,   b12 * g_opt,
        0.0, -g_ff, g_ff,  b13 * g_opt,
        0.0, g_ff,  -g_ff, b14 * g_opt,
        0.0, 0.0,   0.0,   -g_opt,
    ]);
    let y0 = DVector::from_vec(vec![2.0 * n_eq, n_eq, n_eq - p.n0, p.n0]);
    LinearSystem { m, y0 }
}

fn slr_system(p: &crate::model::SLRParams, beta: &BranchingRatios, n_eq: f64) -> LinearSystem {
    // State: [n1g..n4g, n1e..n4e]
    let g_opt = 1.0 / p.t_opt;
    let w = 1.0 / (3.0 * p.t_s);
    let mut m = DMatrix::<f64>::zeros(8, 8);
    for manifold in [0usize, 4] {
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    m[(manifold + j, manifold + i)] += w;
                    m[(manifold + i, manifold + i)] -= w;
                }
            }
        }
    }
    for i in 0..4 {
        m[(4 + i, 4 + i)] -= g_opt;
        for j in 0..4 {
            m[(j, 4 + i)] += beta.0[i][j] * g_opt;
        }
    }
    let mut y0 = DVector::from_element(8, 0.0);
    for j in 0..4 {
        y0[j] = n_eq;
    }
    y0[3] -= p.n0;
    y0[4] = p.n0;
    LinearSystem { m, y0 }
}

fn to_state(model: &RegimeModel, t: f64, y: &DVector<f64>) -> PopulationState {
    match model {
        RegimeModel::FlipFlopLT(_) => PopulationState {
            t,
            // The 1g/2g pair is one compartment; it is reported split evenly.
            n_g: [y[0] / 2.0, y[0] / 2.0, y[1], y[2]],
            n_e: [y[3], 0.0, 0.0, 0.0],
        },
        RegimeModel::SLRHT(_) => PopulationState {
            t,
            n_g: [y[0], y[1], y[2], y[3]],
            n_e: [y[4], y[5], y[6], y[7]],
        },
    }
}

/// Integrates the rate equations of `model` and reports the populations at
/// every point of `t_grid`, which must start at 0 and increase strictly.
pub fn integrate_rate_equations(
    model: &RegimeModel,
    t_grid: &[f64],
    opts: &RateEquationOptions,
) -> Result<Vec<PopulationState>> {
    model.validate()?;
    if t_grid.first() != Some(&0.0) {
        return Err(Error::InvalidParams("time grid must start at 0".into()));
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) || t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidParams(
            "time grid must increase strictly".into(),
        ));
    }
    let n0 = model.n0();
    let n_eq = opts.ground_eq.unwrap_or(n0);
    let system = match model {
        RegimeModel::FlipFlopLT(p) => flip_flop_system(p, n_eq),
        RegimeModel::SLRHT(p) => {
            let beta = opts
                .branching
                .unwrap_or_else(|| BranchingRatios::from_slr_scalars(p.beta14, p.beta_bar));
            slr_system(p, &beta, n_eq)
        }
    };
    let (fastest, _) = model.timescales();
    let mut h = fastest / opts.steps_per_timescale;
    let mut coarse = system.integrate(t_grid, h);
    let mut worst_time = 0.0;
    for _ in 0..opts.max_halvings {
        h /= 2.0;
        let fine = system.integrate(t_grid, h);
        let mut worst = (0.0f64, 0usize);
        for (k, (a, b)) in coarse.iter().zip(&fine).enumerate() {
            let d = (a - b).amax();
            if !(d <= worst.0) {
                worst = (d, k);
            }
        }
        worst_time = t_grid[worst.1];
        if worst.0 <= opts.tol * n0 {
            return Ok(t_grid
                .iter()
                .zip(&fine)
                .map(|(&t, y)| to_state(model, t, y))
                .collect());
        }
        if !worst.0.is_finite() {
            break;
        }
        coarse = fine;
    }
    Err(Error::StepSize { time: worst_time })
}
