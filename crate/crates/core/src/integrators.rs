//! Explicit Runge–Kutta methods of orders 1–4 driven by Butcher tableaus.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Field;

/// Right-hand side `du = F(t, u)` of an autonomous or time-dependent system.
pub trait Rhs {
    fn eval(&self, t: f64, u: &[f64], du: &mut [f64]);
}

impl<F> Rhs for F
where
    F: Fn(f64, &[f64], &mut [f64]),
{
    fn eval(&self, t: f64, u: &[f64], du: &mut [f64]) {
        self(t, u, du)
    }
}

/// Coefficients of an explicit one-step method.
///
/// `a` is stored row by row without the (zero) diagonal and upper part, so
/// row `i` has exactly `i` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    pub name: &'static str,
    pub order: u32,
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl ButcherTableau {
    pub fn new(
        name: &'static str,
        order: u32,
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        c: Vec<f64>,
    ) -> Result<Self> {
        let s = b.len();
        if s == 0 || a.len() != s || c.len() != s {
            return Err(Error::config("tableau", format!("{name}: inconsistent stage count")));
        }
        for (i, row) in a.iter().enumerate() {
            if row.len() != i {
                return Err(Error::config(
                    "tableau",
                    format!("{name}: row {i} must have {i} entries (explicit method)"),
                ));
            }
            let row_sum: f64 = row.iter().sum();
            if (row_sum - c[i]).abs() > 1e-14 {
                return Err(Error::config("tableau", format!("{name}: c[{i}] != sum of a[{i}]")));
            }
        }
        if (b.iter().sum::<f64>() - 1.0).abs() > 1e-14 {
            return Err(Error::config("tableau", format!("{name}: weights must sum to 1")));
        }
        if !(1..=4).contains(&order) {
            return Err(Error::config("tableau", format!("{name}: order {order} outside 1..=4")));
        }
        Ok(Self { name, order, a, b, c })
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    pub fn euler() -> Self {
        Self::new("euler", 1, vec![vec![]], vec![1.0], vec![0.0]).unwrap()
    }

    /// Improved Euler in its explicit-midpoint form `u + h F(u + h/2 F(u))`.
    pub fn midpoint() -> Self {
        Self::new("midpoint", 2, vec![vec![], vec![0.5]], vec![0.0, 1.0], vec![0.0, 0.5]).unwrap()
    }

    /// Heun's third-order method.
    pub fn heun3() -> Self {
        Self::new(
            "heun3",
            3,
            vec![vec![], vec![1.0 / 3.0], vec![0.0, 2.0 / 3.0]],
            vec![0.25, 0.0, 0.75],
            vec![0.0, 1.0 / 3.0, 2.0 / 3.0],
        )
        .unwrap()
    }

    /// Classical fourth-order Runge–Kutta.
    pub fn rk4() -> Self {
        Self::new(
            "rk4",
            4,
            vec![vec![], vec![0.5], vec![0.0, 0.5], vec![0.0, 0.0, 1.0]],
            vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
            vec![0.0, 0.5, 0.5, 1.0],
        )
        .unwrap()
    }
}

/// The four bundled methods, by CLI name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Euler,
    Midpoint,
    Heun3,
    Rk4,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Euler, Method::Midpoint, Method::Heun3, Method::Rk4];

    pub fn tableau(self) -> ButcherTableau {
        match self {
            Method::Euler => ButcherTableau::euler(),
            Method::Midpoint => ButcherTableau::midpoint(),
            Method::Heun3 => ButcherTableau::heun3(),
            Method::Rk4 => ButcherTableau::rk4(),
        }
    }

    pub fn order(self) -> u32 {
        self as u32 + 1
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Euler => "euler",
            Method::Midpoint => "midpoint",
            Method::Heun3 => "heun3",
            Method::Rk4 => "rk4",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Method::Euler),
            "midpoint" => Ok(Method::Midpoint),
            "heun3" => Ok(Method::Heun3),
            "rk4" => Ok(Method::Rk4),
            other => Err(Error::config(
                "integrator",
                format!("unknown integrator `{other}` (expected euler, midpoint, heun3, rk4)"),
            )),
        }
    }
}

/// One explicit step of size `h` on a raw state vector.
pub fn step_slice(tab: &ButcherTableau, rhs: &impl Rhs, t: f64, u: &[f64], h: f64) -> Result<Vec<f64>> {
    let n = u.len();
    let s = tab.stages();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(s);
    let mut stage = vec![0.0; n];
    for i in 0..s {
        stage.copy_from_slice(u);
        for (j, &aij) in tab.a[i].iter().enumerate() {
            if aij != 0.0 {
                for (y, kj) in stage.iter_mut().zip(&k[j]) {
                    *y += h * aij * kj;
                }
            }
        }
        let mut ki = vec![0.0; n];
        rhs.eval(t + tab.c[i] * h, &stage, &mut ki);
        if !ki.iter().all(|v| v.is_finite()) {
            return Err(Error::Overflow {
                method: tab.name.to_string(),
                stage: i,
            });
        }
        k.push(ki);
    }
    let mut out = u.to_vec();
    for (ki, &bi) in k.iter().zip(&tab.b) {
        if bi != 0.0 {
            for (y, kv) in out.iter_mut().zip(ki) {
                *y += h * bi * kv;
            }
        }
    }
    if !out.iter().all(|v| v.is_finite()) {
        return Err(Error::Overflow {
            method: tab.name.to_string(),
            stage: s,
        });
    }
    Ok(out)
}

/// `n_steps` equal steps covering `total`, starting at time `t0`.
pub fn integrate_slice(
    tab: &ButcherTableau,
    rhs: &impl Rhs,
    t0: f64,
    u: &[f64],
    total: f64,
    n_steps: usize,
) -> Result<Vec<f64>> {
    if n_steps == 0 {
        return Err(Error::config("n_substeps", "must be positive"));
    }
    let h = total / n_steps as f64;
    let mut state = u.to_vec();
    for k in 0..n_steps {
        state = step_slice(tab, rhs, t0 + k as f64 * h, &state, h)?;
    }
    Ok(state)
}

/// One step of size `h` on a field; the field time advances by `h`.
pub fn step(tab: &ButcherTableau, rhs: &impl Rhs, f: &Field, h: f64) -> Result<Field> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::config("h", format!("step must be positive, got {h}")));
    }
    let values = step_slice(tab, rhs, f.time, &f.values, h)?;
    Ok(f.with_values(values, f.time + h))
}

/// `n_substeps` equal steps of size `total / n_substeps`.
pub fn integrate(tab: &ButcherTableau, rhs: &impl Rhs, f: &Field, total: f64, n_substeps: usize) -> Result<Field> {
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::config("total", format!("duration must be positive, got {total}")));
    }
    let values = integrate_slice(tab, rhs, f.time, &f.values, total, n_substeps)?;
    Ok(f.with_values(values, f.time + total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_initial_field, Grid1D, Profile};

    fn growth(_t: f64, u: &[f64], du: &mut [f64]) {
        du.copy_from_slice(u);
    }

    fn scalar(u: f64) -> Vec<f64> {
        vec![u]
    }

    #[test]
    fn bundled_tableaus_are_consistent() {
        for m in Method::ALL {
            let t = m.tableau();
            assert_eq!(t.order, m.order());
            assert_eq!(t.name, m.name());
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("rk45".parse::<Method>().is_err());
    }

    #[test]
    fn implicit_tableau_rejected() {
        let bad = ButcherTableau::new("bad", 1, vec![vec![0.5]], vec![1.0], vec![0.5]);
        assert!(bad.is_err());
        let bad_weights = ButcherTableau::new("bad", 1, vec![vec![]], vec![0.9], vec![0.0]);
        assert!(bad_weights.is_err());
    }

    #[test]
    fn zero_rhs_leaves_field_unchanged() {
        let f = make_initial_field(Grid1D::standard(), Profile::Sine);
        let zero = |_t: f64, _u: &[f64], du: &mut [f64]| du.fill(0.0);
        for m in Method::ALL {
            let g = step(&m.tableau(), &zero, &f, 0.37).unwrap();
            assert_eq!(g.values, f.values);
            assert!((g.time - 0.37).abs() < 1e-16);
        }
    }

    #[test]
    fn euler_growth_one_step() {
        let u = step_slice(&ButcherTableau::euler(), &growth, 0.0, &scalar(1.0), 0.1).unwrap();
        assert!((u[0] - 1.1).abs() < 1e-15);
    }

    #[test]
    fn rk4_growth_one_step() {
        // truncated exponential series 1 + h + h²/2 + h³/6 + h⁴/24
        let h: f64 = 0.1;
        let taylor = 1.0 + h + h * h / 2.0 + h.powi(3) / 6.0 + h.powi(4) / 24.0;
        let u = step_slice(&ButcherTableau::rk4(), &growth, 0.0, &scalar(1.0), h).unwrap();
        assert!((u[0] - taylor).abs() < 1e-15);
        assert!((u[0] - h.exp()).abs() <= 2e-7);
    }

    #[test]
    fn integrate_compound_growth() {
        let u = integrate_slice(&ButcherTableau::euler(), &growth, 0.0, &scalar(1.0), 1.0, 100).unwrap();
        assert!((u[0] - 1.01f64.powi(100)).abs() < 1e-12);
        assert!((u[0] - 2.704813829).abs() < 1e-9);
        let u = integrate_slice(&ButcherTableau::rk4(), &growth, 0.0, &scalar(1.0), 1.0, 100).unwrap();
        assert!((u[0] - std::f64::consts::E).abs() < 1e-9);
    }

    #[test]
    fn integrate_single_substep_is_step() {
        let f = make_initial_field(Grid1D::standard(), Profile::Sine);
        let rhs = |_t: f64, u: &[f64], du: &mut [f64]| {
            for (d, v) in du.iter_mut().zip(u) {
                *d = v * (1.0 - v);
            }
        };
        for m in Method::ALL {
            let tab = m.tableau();
            assert_eq!(integrate(&tab, &rhs, &f, 0.2, 1).unwrap(), step(&tab, &rhs, &f, 0.2).unwrap());
        }
    }

    #[test]
    fn empirical_orders_match_declared() {
        let ns = [25usize, 50, 100, 200];
        for m in Method::ALL {
            let tab = m.tableau();
            let errs: Vec<f64> = ns
                .iter()
                .map(|&n| {
                    let u = integrate_slice(&tab, &growth, 0.0, &scalar(1.0), 1.0, n).unwrap();
                    (u[0] - std::f64::consts::E).abs()
                })
                .collect();
            let xs: Vec<f64> = ns.iter().map(|&n| (1.0 / n as f64).ln()).collect();
            let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
            let slope = crate::order::least_squares_slope(&xs, &ys);
            assert!((slope - m.order() as f64).abs() <= 0.1, "{m}: slope {slope}");
        }
    }

    #[test]
    fn linear_rhs_equivariance() {
        let lin = |_t: f64, u: &[f64], du: &mut [f64]| {
            du[0] = -2.0 * u[0] + u[1];
            du[1] = 0.5 * u[0] - u[1];
        };
        let u = [0.3, -1.2];
        let alpha = 2.5;
        let scaled = [alpha * u[0], alpha * u[1]];
        for m in Method::ALL {
            let a = step_slice(&m.tableau(), &lin, 0.0, &scaled, 0.05).unwrap();
            let b = step_slice(&m.tableau(), &lin, 0.0, &u, 0.05).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - alpha * y).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn overflow_is_reported() {
        let blow = |_t: f64, u: &[f64], du: &mut [f64]| du[0] = u[0] * 1e300;
        let err = step_slice(&ButcherTableau::rk4(), &blow, 0.0, &[1e10], 1.0).unwrap_err();
        assert!(matches!(err, Error::Overflow { .. }));
    }
}
