//! Uniform 1-D grids, sampled fields and Dirichlet boundary data.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid on `[x_min, x_max]` with `n_cells` cells and `n_cells + 1` nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    n_cells: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, n_cells: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::config(
                "grid",
                format!("need finite x_max > x_min, got [{x_min}, {x_max}]"),
            ));
        }
        if n_cells < 2 {
            return Err(Error::config("grid-cells", format!("need at least 2 cells, got {n_cells}")));
        }
        Ok(Self { x_min, x_max, n_cells })
    }

    /// The test-problem grid: `[0, 4π]` split into 30 cells.
    pub fn standard() -> Self {
        Self::new(0.0, 4.0 * PI, 30).expect("valid default grid")
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.n_cells as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_nodes()).map(move |i| self.node(i))
    }
}

/// Named initial profiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// `1 + 0.9 sin(x)`.
    Sine,
    /// Traveling-wave front `(1 + k exp(x/√6))^-2` at `t = 0`.
    WaveFront { k: f64 },
    Constant(f64),
}

impl Profile {
    /// Parses `sine` (alias `paper-sine`), `wave-front[:k]` or `constant:<c>`.
    pub fn parse(name: &str) -> Result<Self> {
        let (head, arg) = match name.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (name, None),
        };
        let num = |a: Option<&str>, default: Option<f64>| -> Result<f64> {
            match a {
                Some(s) => s
                    .parse::<f64>()
                    .map_err(|_| Error::config("profile", format!("bad number `{s}`"))),
                None => default.ok_or_else(|| Error::config("profile", format!("`{head}` needs a value"))),
            }
        };
        match head {
            "sine" | "paper-sine" => Ok(Profile::Sine),
            "wave-front" => Ok(Profile::WaveFront { k: num(arg, Some(1.0))? }),
            "constant" => Ok(Profile::Constant(num(arg, None)?)),
            other => Err(Error::config("profile", format!("unknown profile `{other}`"))),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Profile::Sine => 1.0 + 0.9 * x.sin(),
            Profile::WaveFront { k } => crate::reference::wave_exact(x, 0.0, k, 1.0),
            Profile::Constant(c) => c,
        }
    }
}

/// Concentration samples at the grid nodes at a given time.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: Grid1D,
    pub values: Vec<f64>,
    pub time: f64,
}

impl Field {
    pub fn new(grid: Grid1D, values: Vec<f64>, time: f64) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::Dimension(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.n_nodes()
            )));
        }
        Ok(Self { grid, values, time })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn with_values(&self, values: Vec<f64>, time: f64) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            grid: self.grid,
            values,
            time,
        }
    }
}

/// Samples `profile` at the nodes of `grid` at time 0.
///
/// The sine profile `1 + 0.9 sin x` has `sin(0) = 0` at the left end but `sin(4π)` is only
/// zero up to rounding, so endpoints that fall on a multiple of π are snapped.
pub fn make_initial_field(grid: Grid1D, profile: Profile) -> Field {
    let values = grid
        .nodes()
        .map(|x| match profile {
            Profile::Sine if is_multiple_of_pi(x) => 1.0,
            p => p.eval(x),
        })
        .collect();
    Field {
        grid,
        values,
        time: 0.0,
    }
}

fn is_multiple_of_pi(x: f64) -> bool {
    let r = x / PI;
    (r - r.round()).abs() < 1e-12
}

/// Maximum norm of `a - b` over all nodes.
pub fn max_norm_diff(a: &Field, b: &Field) -> Result<f64> {
    if a.grid != b.grid || a.values.len() != b.values.len() {
        return Err(Error::Dimension(format!(
            "cannot compare fields of {} and {} nodes",
            a.values.len(),
            b.values.len()
        )));
    }
    Ok(max_abs_diff(&a.values, &b.values))
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

type BoundaryFn = Arc<dyn Fn(f64) -> (f64, f64) + Send + Sync>;

/// Dirichlet values for the two end nodes.
#[derive(Clone)]
pub enum DirichletBC {
    Constant { left: f64, right: f64 },
    /// `t -> (left, right)`.
    TimeDependent(BoundaryFn),
}

impl DirichletBC {
    pub fn constant(left: f64, right: f64) -> Self {
        DirichletBC::Constant { left, right }
    }

    pub fn time_dependent(f: impl Fn(f64) -> (f64, f64) + Send + Sync + 'static) -> Self {
        DirichletBC::TimeDependent(Arc::new(f))
    }

    pub fn values_at(&self, t: f64) -> (f64, f64) {
        match self {
            DirichletBC::Constant { left, right } => (*left, *right),
            DirichletBC::TimeDependent(f) => f(t),
        }
    }

    /// Overwrites both end nodes with the boundary values at `field.time`.
    pub fn apply(&self, field: &mut Field) {
        let (l, r) = self.values_at(field.time);
        let n = field.values.len();
        field.values[0] = l;
        field.values[n - 1] = r;
    }
}

impl fmt::Debug for DirichletBC {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DirichletBC::Constant { left, right } => write!(f, "Constant({left}, {right})"),
            DirichletBC::TimeDependent(_) => write!(f, "TimeDependent(..)"),
        }
    }
}
