//! Split sub-operators of the reaction–diffusion right-hand side.
//!
//! The diffusion part is the three-point Laplacian; the reaction parts are
//! pointwise polynomials with closed-form flows.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid1D};
use crate::integrators::{integrate, Method};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    /// `D u_xx`
    Diffusion,
    /// `u (1 - u)`
    Logistic,
    /// `u`
    Linear,
    /// `-u²`
    Quadratic,
}

impl OperatorKind {
    pub fn is_reaction(self) -> bool {
        !matches!(self, OperatorKind::Diffusion)
    }

    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::Diffusion => "diffusion",
            OperatorKind::Logistic => "logistic",
            OperatorKind::Linear => "linear",
            OperatorKind::Quadratic => "quadratic",
        }
    }

    /// Pointwise reaction rate `R(u)`; zero for diffusion.
    pub fn rate(self, u: f64) -> f64 {
        match self {
            OperatorKind::Diffusion => 0.0,
            OperatorKind::Logistic => u * (1.0 - u),
            OperatorKind::Linear => u,
            OperatorKind::Quadratic => -u * u,
        }
    }

    /// `R''(u)`, constant for all supported reactions.
    pub fn second_derivative(self) -> Result<f64> {
        match self {
            OperatorKind::Diffusion => Err(Error::Kind("diffusion has no reaction polynomial".into())),
            OperatorKind::Logistic | OperatorKind::Quadratic => Ok(-2.0),
            OperatorKind::Linear => Ok(0.0),
        }
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OperatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diffusion" => Ok(OperatorKind::Diffusion),
            "logistic" => Ok(OperatorKind::Logistic),
            "linear" => Ok(OperatorKind::Linear),
            "quadratic" => Ok(OperatorKind::Quadratic),
            other => Err(Error::config("sequence", format!("unknown operator `{other}`"))),
        }
    }
}

/// How the two end nodes evolve inside a sub-flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryPolicy {
    /// Every derivative is zero on the end nodes; sub-flows leave them untouched.
    Frozen,
    /// Diffusion rows are zero on the end nodes, reaction terms act there as
    /// everywhere else. The Dirichlet data then follow the reaction ODE, which
    /// keeps pointwise reactions commuting with the discrete Laplacian.
    ReactionDriven,
}

impl BoundaryPolicy {
    fn reaction_on_boundary(self) -> bool {
        matches!(self, BoundaryPolicy::ReactionDriven)
    }
}

/// How a sub-problem is advanced over one of its stages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum FlowMode {
    Exact,
    /// Sub-steps of size `substep_ratio * tau`.
    Numerical { method: Method, substep_ratio: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubProblem {
    pub kind: OperatorKind,
    pub flow: FlowMode,
    pub diffusion_coefficient: f64,
}

impl SubProblem {
    pub fn new(kind: OperatorKind, flow: FlowMode) -> Result<Self> {
        if kind == OperatorKind::Diffusion && flow == FlowMode::Exact {
            return Err(Error::config("reaction-flow", "diffusion has no exact flow; use a numerical mode"));
        }
        if let FlowMode::Numerical { substep_ratio, .. } = flow {
            if !(substep_ratio > 0.0 && substep_ratio.is_finite()) {
                return Err(Error::config(
                    "substep-ratio",
                    format!("must be positive, got {substep_ratio}"),
                ));
            }
        }
        Ok(Self {
            kind,
            flow,
            diffusion_coefficient: 1.0,
        })
    }

    pub fn numerical(kind: OperatorKind, method: Method, substep_ratio: f64) -> Result<Self> {
        Self::new(kind, FlowMode::Numerical { method, substep_ratio })
    }

    pub fn exact(kind: OperatorKind) -> Result<Self> {
        Self::new(kind, FlowMode::Exact)
    }

    /// Writes the derivative of this sub-problem into `du`.
    pub fn derivative(&self, grid: &Grid1D, policy: BoundaryPolicy, u: &[f64], du: &mut [f64]) {
        match self.kind {
            OperatorKind::Diffusion => laplacian_into(grid.dx(), self.diffusion_coefficient, u, du),
            kind => reaction_into(kind, policy, u, du),
        }
    }

    /// Advances `f` by `duration` (one stage of a macro step of length `tau`).
    ///
    /// Numerical sub-flows take `max(1, round(duration / (ratio * tau)))` equal steps.
    pub fn advance(&self, f: &Field, duration: f64, tau: f64, policy: BoundaryPolicy) -> Result<Field> {
        match self.flow {
            FlowMode::Exact => exact_flow(self.kind, f, duration, policy),
            FlowMode::Numerical { method, substep_ratio } => {
                let n = ((duration / (substep_ratio * tau)).round() as usize).max(1);
                let grid = f.grid;
                let rhs = |_t: f64, u: &[f64], du: &mut [f64]| self.derivative(&grid, policy, u, du);
                integrate(&method.tableau(), &rhs, f, duration, n)
            }
        }
    }
}

pub(crate) fn laplacian_into(dx: f64, d: f64, u: &[f64], du: &mut [f64]) {
    let n = u.len();
    let scale = d / (dx * dx);
    du[0] = 0.0;
    du[n - 1] = 0.0;
    for i in 1..n - 1 {
        du[i] = scale * (u[i + 1] - 2.0 * u[i] + u[i - 1]);
    }
}

pub(crate) fn reaction_into(kind: OperatorKind, policy: BoundaryPolicy, u: &[f64], du: &mut [f64]) {
    for (d, &v) in du.iter_mut().zip(u) {
        *d = kind.rate(v);
    }
    if !policy.reaction_on_boundary() {
        let n = du.len();
        du[0] = 0.0;
        du[n - 1] = 0.0;
    }
}

/// `D (f[i+1] - 2 f[i] + f[i-1]) / dx²` at interior nodes, zero on the ends.
pub fn apply_diffusion(f: &Field, diffusion_coefficient: f64) -> Result<Vec<f64>> {
    if f.len() < 3 {
        return Err(Error::Dimension(format!("diffusion stencil needs 3 nodes, got {}", f.len())));
    }
    let mut du = vec![0.0; f.len()];
    laplacian_into(f.grid.dx(), diffusion_coefficient, &f.values, &mut du);
    Ok(du)
}

/// Pointwise reaction rate.
pub fn apply_reaction(kind: OperatorKind, f: &Field, policy: BoundaryPolicy) -> Result<Vec<f64>> {
    if !kind.is_reaction() {
        return Err(Error::Kind("apply_reaction called with diffusion".into()));
    }
    let mut du = vec![0.0; f.len()];
    reaction_into(kind, policy, &f.values, &mut du);
    Ok(du)
}

/// Closed-form flow of a reaction ODE over time `t`, node by node.
pub fn exact_flow(kind: OperatorKind, f: &Field, t: f64, policy: BoundaryPolicy) -> Result<Field> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::config("t", format!("flow time must be non-negative, got {t}")));
    }
    let n = f.len();
    let growth = t.exp();
    let mut values = Vec::with_capacity(n);
    for (i, &eta) in f.values.iter().enumerate() {
        if !policy.reaction_on_boundary() && (i == 0 || i == n - 1) {
            values.push(eta);
            continue;
        }
        let v = match kind {
            OperatorKind::Diffusion => return Err(Error::Kind("diffusion has no exact flow".into())),
            OperatorKind::Logistic => {
                let denom = 1.0 - eta + eta * growth;
                if denom <= 0.0 {
                    return Err(blow_up(kind, f, i, t));
                }
                eta * growth / denom
            }
            OperatorKind::Linear => eta * growth,
            OperatorKind::Quadratic => {
                let denom = 1.0 + eta * t;
                if denom <= 0.0 {
                    return Err(blow_up(kind, f, i, t));
                }
                eta / denom
            }
        };
        values.push(v);
    }
    Ok(f.with_values(values, f.time + t))
}

fn blow_up(kind: OperatorKind, f: &Field, node: usize, t: f64) -> Error {
    Error::BlowUp {
        kind: kind.name(),
        node,
        x: f.grid.node(node),
        time: f.time + t,
    }
}

/// Scalar 1-D form of the zero-splitting-error condition: `R''(φ) (∂ₓφ)²`,
/// with `∂ₓφ` from centered differences. End nodes are reported as zero.
pub fn commutation_residual(kind: OperatorKind, f: &Field) -> Result<Vec<f64>> {
    let r2 = kind.second_derivative()?;
    let n = f.len();
    if n < 3 {
        return Err(Error::Dimension(format!("residual needs 3 nodes, got {n}")));
    }
    let inv_2dx = 1.0 / (2.0 * f.grid.dx());
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        let slope = (f.values[i + 1] - f.values[i - 1]) * inv_2dx;
        out[i] = r2 * slope * slope;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_initial_field, Profile};
    use proptest::prelude::*;

    fn field_from(grid: Grid1D, f: impl Fn(f64) -> f64) -> Field {
        Field::new(grid, grid.nodes().map(f).collect(), 0.0).unwrap()
    }

    fn point(u: f64) -> Field {
        let g = Grid1D::new(0.0, 1.0, 2).unwrap();
        Field::new(g, vec![u; 3], 0.0).unwrap()
    }

    #[test]
    fn diffusion_annihilates_constants_and_linears() {
        let g = Grid1D::new(-2.0, 3.0, 17).unwrap();
        let c = apply_diffusion(&field_from(g, |_| 4.2), 1.0).unwrap();
        assert!(c.iter().all(|&v| v == 0.0));
        let l = apply_diffusion(&field_from(g, |x| x), 1.0).unwrap();
        assert!(l.iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn diffusion_exact_on_quadratics() {
        let g = Grid1D::new(0.0, 2.0, 8).unwrap();
        let q = apply_diffusion(&field_from(g, |x| x * x), 1.0).unwrap();
        assert_eq!(q[0], 0.0);
        assert_eq!(q[8], 0.0);
        for v in &q[1..8] {
            assert!((v - 2.0).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn diffusion_too_short() {
        let g = Grid1D::new(0.0, 1.0, 2).unwrap();
        let f = Field::new(g, vec![0.0; 3], 0.0).unwrap();
        assert!(apply_diffusion(&f, 1.0).is_ok());
        let mut short = f.clone();
        short.values.truncate(2);
        assert!(matches!(apply_diffusion(&short, 1.0), Err(Error::Dimension(_))));
    }

    #[test]
    fn reaction_values() {
        let p = BoundaryPolicy::ReactionDriven;
        assert_eq!(apply_reaction(OperatorKind::Logistic, &point(0.0), p).unwrap()[1], 0.0);
        assert_eq!(apply_reaction(OperatorKind::Logistic, &point(1.0), p).unwrap()[1], 0.0);
        assert_eq!(apply_reaction(OperatorKind::Linear, &point(3.0), p).unwrap()[1], 3.0);
        assert_eq!(apply_reaction(OperatorKind::Logistic, &point(0.5), p).unwrap()[1], 0.25);
        assert_eq!(apply_reaction(OperatorKind::Quadratic, &point(0.5), p).unwrap()[1], -0.25);
        let frozen = apply_reaction(OperatorKind::Linear, &point(3.0), BoundaryPolicy::Frozen).unwrap();
        assert_eq!(frozen, vec![0.0, 3.0, 0.0]);
        assert!(matches!(
            apply_reaction(OperatorKind::Diffusion, &point(1.0), p),
            Err(Error::Kind(_))
        ));
    }

    #[test]
    fn logistic_flow_examples() {
        let p = BoundaryPolicy::ReactionDriven;
        for t in [0.0, 0.3, 1.0, 7.5] {
            assert_eq!(exact_flow(OperatorKind::Logistic, &point(1.0), t, p).unwrap().values[1], 1.0);
            assert_eq!(exact_flow(OperatorKind::Logistic, &point(0.0), t, p).unwrap().values[1], 0.0);
        }
        let v = exact_flow(OperatorKind::Logistic, &point(0.5), 2f64.ln(), p).unwrap();
        assert!((v.values[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!((v.time - 2f64.ln()).abs() < 1e-16);
    }

    #[test]
    fn quadratic_and_linear_flows() {
        let p = BoundaryPolicy::ReactionDriven;
        let q = exact_flow(OperatorKind::Quadratic, &point(1.0), 1.0, p).unwrap();
        assert_eq!(q.values[1], 0.5);
        let l = exact_flow(OperatorKind::Linear, &point(2.0), 1.0, p).unwrap();
        assert!((l.values[1] - 2.0 * std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn closed_forms_agree_with_fine_rk4() {
        // separable-ODE closed forms against a fine RK4 solve of u' = R(u)
        let tab = Method::Rk4.tableau();
        for kind in [OperatorKind::Logistic, OperatorKind::Linear, OperatorKind::Quadratic] {
            for eta in [0.1, 0.5, 1.3, 1.9] {
                let rhs = |_t: f64, u: &[f64], du: &mut [f64]| du[0] = kind.rate(u[0]);
                let oracle = crate::integrators::integrate_slice(&tab, &rhs, 0.0, &[eta], 1.0, 2000).unwrap()[0];
                let exact = exact_flow(kind, &point(eta), 1.0, BoundaryPolicy::ReactionDriven).unwrap().values[1];
                assert!((oracle - exact).abs() < 1e-12, "{kind} eta={eta}: {oracle} vs {exact}");
            }
        }
    }

    #[test]
    fn blow_up_detected() {
        let err = exact_flow(OperatorKind::Quadratic, &point(-1.0), 2.0, BoundaryPolicy::ReactionDriven).unwrap_err();
        assert!(matches!(err, Error::BlowUp { kind: "quadratic", node: 0, .. }));
        let err = exact_flow(OperatorKind::Logistic, &point(-0.5), 3.0, BoundaryPolicy::Frozen).unwrap_err();
        match err {
            Error::BlowUp { node, time, .. } => {
                assert_eq!(node, 1);
                assert_eq!(time, 3.0);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn frozen_policy_keeps_end_nodes() {
        let f = make_initial_field(Grid1D::standard(), Profile::Constant(0.5));
        let g = exact_flow(OperatorKind::Linear, &f, 1.0, BoundaryPolicy::Frozen).unwrap();
        assert_eq!(g.values[0], 0.5);
        assert_eq!(g.values[30], 0.5);
        assert!(g.values[1] > 1.3);
    }

    #[test]
    fn diffusion_has_no_exact_mode() {
        assert!(SubProblem::exact(OperatorKind::Diffusion).is_err());
        assert!(SubProblem::exact(OperatorKind::Logistic).is_ok());
        assert!(SubProblem::numerical(OperatorKind::Diffusion, Method::Rk4, 0.0).is_err());
    }

    #[test]
    fn residual_linear_is_zero() {
        let f = make_initial_field(Grid1D::standard(), Profile::Sine);
        let r = commutation_residual(OperatorKind::Linear, &f).unwrap();
        assert!(r.iter().all(|&v| v == 0.0));
        let c = make_initial_field(Grid1D::standard(), Profile::Constant(0.7));
        let r = commutation_residual(OperatorKind::Logistic, &c).unwrap();
        assert!(r.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn residual_sine_hand_value() {
        let g = Grid1D::standard();
        let f = field_from(g, f64::sin);
        let r = commutation_residual(OperatorKind::Logistic, &f).unwrap();
        let dx = 4.0 * std::f64::consts::PI / 30.0;
        let i = 5;
        let slope = ((6.0 * dx).sin() - (4.0 * dx).sin()) / (2.0 * dx);
        assert!((r[i] - (-2.0 * slope * slope)).abs() < 1e-12);
        assert!(r[i] < 0.0);
    }

    proptest! {
        #[test]
        fn logistic_semigroup(eta in 0.1f64..1.9, t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
            let p = BoundaryPolicy::ReactionDriven;
            let once = exact_flow(OperatorKind::Logistic, &point(eta), t1 + t2, p).unwrap();
            let twice = exact_flow(
                OperatorKind::Logistic,
                &exact_flow(OperatorKind::Logistic, &point(eta), t1, p).unwrap(),
                t2,
                p,
            ).unwrap();
            prop_assert!((once.values[1] - twice.values[1]).abs() <= 1e-13);
        }

        #[test]
        fn logistic_monotone(a in 0.0f64..2.0, b in 0.0f64..2.0, t in 0.0f64..3.0) {
            let p = BoundaryPolicy::ReactionDriven;
            let fa = exact_flow(OperatorKind::Logistic, &point(a), t, p).unwrap().values[1];
            let fb = exact_flow(OperatorKind::Logistic, &point(b), t, p).unwrap().values[1];
            if a <= b { prop_assert!(fa <= fb); } else { prop_assert!(fa >= fb); }
        }

        #[test]
        fn diffusion_is_linear(
            xs in proptest::collection::vec(-5.0f64..5.0, 12),
            ys in proptest::collection::vec(-5.0f64..5.0, 12),
            alpha in -3.0f64..3.0,
            beta in -3.0f64..3.0,
        ) {
            let g = Grid1D::new(0.0, 1.0, 11).unwrap();
            let combo: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| alpha * x + beta * y).collect();
            let lhs = apply_diffusion(&Field::new(g, combo, 0.0).unwrap(), 1.0).unwrap();
            let a = apply_diffusion(&Field::new(g, xs, 0.0).unwrap(), 1.0).unwrap();
            let b = apply_diffusion(&Field::new(g, ys, 0.0).unwrap(), 1.0).unwrap();
            for i in 0..12 {
                let rhs = alpha * a[i] + beta * b[i];
                prop_assert!((lhs[i] - rhs).abs() <= 1e-13 * (1.0 + rhs.abs()));
            }
        }
    }
}
