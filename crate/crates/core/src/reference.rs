//! Unsplit reference solutions and the exact traveling wave.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{max_abs_diff, DirichletBC, Field, Grid1D, Profile};
use crate::integrators::{step_slice, Method};
use crate::operators::{laplacian_into, BoundaryPolicy};
use crate::splitting::{step_count, SplitProblem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSpec {
    pub method: Method,
    /// Fixed step for global references.
    pub step: f64,
    /// Local references over `[0, τ]` use step `τ / fine_factor`.
    pub fine_factor: usize,
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        Self {
            method: Method::Rk4,
            step: 0.01,
            fine_factor: 1000,
        }
    }
}

impl ReferenceSpec {
    pub fn with_step(step: f64) -> Self {
        Self {
            step,
            ..Self::default()
        }
    }
}

/// Solves the coupled (unsplit) system with a fixed step.
pub fn reference_solve(problem: &SplitProblem, f0: &Field, t_end: f64, spec: &ReferenceSpec) -> Result<Field> {
    let n = step_count(t_end, spec.step)?;
    fixed_step_solve(problem, f0, t_end, n, spec.method)
}

/// Reference over a single macro step `tau`, with step `tau / fine_factor`.
pub fn local_reference(problem: &SplitProblem, f0: &Field, tau: f64, spec: &ReferenceSpec) -> Result<Field> {
    if spec.fine_factor == 0 {
        return Err(Error::config("fine_factor", "must be positive"));
    }
    fixed_step_solve(problem, f0, tau, spec.fine_factor, spec.method)
}

fn fixed_step_solve(problem: &SplitProblem, f0: &Field, t_end: f64, n: usize, method: Method) -> Result<Field> {
    let tab = method.tableau();
    let rhs = problem.full_derivative(f0);
    let h = t_end / n as f64;
    let t0 = f0.time;
    let mut f = f0.clone();
    for k in 1..=n {
        f.values = step_slice(&tab, &rhs, f.time, &f.values, h)?;
        f.time = t0 + k as f64 * h;
        if problem.policy == BoundaryPolicy::Frozen {
            if let Some(bc) = &problem.bc {
                bc.apply(&mut f);
            }
        }
    }
    Ok(f)
}

/// Exact traveling wave `(1 + k exp(-5t/6 + dir·x/√6))^-2` of `u_t = u_xx + u(1-u)`.
pub fn wave_exact(x: f64, t: f64, k: f64, direction: f64) -> f64 {
    let e = (-5.0 / 6.0 * t + direction * x / 6f64.sqrt()).exp();
    (1.0 + k * e).powi(-2)
}

fn wave_time_derivative(x: f64, t: f64, k: f64, direction: f64) -> f64 {
    let ke = k * (-5.0 / 6.0 * t + direction * x / 6f64.sqrt()).exp();
    5.0 / 3.0 * ke * (1.0 + ke).powi(-3)
}

/// Solves the Fisher equation on `grid` from the sampled wave with Dirichlet
/// data taken from the exact wave, and returns the max-norm error at `t_end`.
pub fn wave_error(grid: Grid1D, k: f64, t_end: f64, spec: &ReferenceSpec) -> Result<f64> {
    if !(k > 0.0) {
        return Err(Error::config("k", format!("wave parameter must be positive, got {k}")));
    }
    let f0 = crate::grid::make_initial_field(grid, Profile::WaveFront { k });
    if t_end == 0.0 {
        return Ok(0.0);
    }
    let n = step_count(t_end, spec.step)?;
    let (xl, xr) = (grid.x_min(), grid.x_max());
    let bc = DirichletBC::time_dependent(move |t| (wave_exact(xl, t, k, 1.0), wave_exact(xr, t, k, 1.0)));
    let dx = grid.dx();
    // boundary rows carry the time derivative of the Dirichlet data
    let rhs = move |t: f64, u: &[f64], du: &mut [f64]| {
        laplacian_into(dx, 1.0, u, du);
        let last = u.len() - 1;
        for i in 1..last {
            du[i] += u[i] * (1.0 - u[i]);
        }
        du[0] = wave_time_derivative(xl, t, k, 1.0);
        du[last] = wave_time_derivative(xr, t, k, 1.0);
    };
    let tab = spec.method.tableau();
    let h = t_end / n as f64;
    let mut f = f0;
    for s in 1..=n {
        f.values = step_slice(&tab, &rhs, f.time, &f.values, h)?;
        f.time = s as f64 * h;
        bc.apply(&mut f);
    }
    let exact: Vec<f64> = grid.nodes().map(|x| wave_exact(x, t_end, k, 1.0)).collect();
    Ok(max_abs_diff(&f.values, &exact))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveReport {
    /// `(n_cells, max error)` for the base grid and two halvings of `dx`.
    pub levels: Vec<(usize, f64)>,
    /// Least-squares slope of `log error` against `log dx`.
    pub spatial_order: f64,
}

pub fn wave_validate(grid: Grid1D, k: f64, t_end: f64, spec: &ReferenceSpec) -> Result<WaveReport> {
    let mut levels = Vec::new();
    for factor in [1, 2, 4] {
        let g = Grid1D::new(grid.x_min(), grid.x_max(), grid.n_cells() * factor)?;
        levels.push((g.n_cells(), wave_error(g, k, t_end, spec)?));
    }
    let spatial_order = if levels.iter().all(|(_, e)| *e > 0.0) {
        let xs: Vec<f64> = levels.iter().map(|(n, _)| (1.0 / *n as f64).ln()).collect();
        let ys: Vec<f64> = levels.iter().map(|(_, e)| e.ln()).collect();
        crate::order::least_squares_slope(&xs, &ys)
    } else {
        f64::NAN
    };
    Ok(WaveReport { levels, spatial_order })
}
