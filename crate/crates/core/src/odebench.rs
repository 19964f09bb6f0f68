//! Finite-dimensional bench `U' = A U + R(U)` with a bounded linear part,
//! used to check the local orders of combined splitting/integrator methods
//! where the Taylor-expansion argument is rigorous.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::max_abs_diff;
use crate::integrators::{integrate_slice, step_slice, Method};
use crate::order::{OrderEstimate, TauLadder};
use crate::splitting::SplittingScheme;

/// Componentwise quadratic reaction `R_i(u) = c0 + c1 u_i + c2 u_i²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticReaction {
    pub coefficients: Vec<[f64; 3]>,
}

impl QuadraticReaction {
    pub fn logistic(n: usize) -> Self {
        Self {
            coefficients: vec![[0.0, 1.0, -1.0]; n],
        }
    }

    pub fn zero(n: usize) -> Self {
        Self {
            coefficients: vec![[0.0; 3]; n],
        }
    }

    pub fn eval(&self, u: &[f64], out: &mut [f64]) {
        for ((o, &x), c) in out.iter_mut().zip(u).zip(&self.coefficients) {
            *o = c[0] + c[1] * x + c[2] * x * x;
        }
    }

    /// Diagonal of the Jacobian `R'(u)`.
    pub fn jacobian_diag(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(&self.coefficients)
            .map(|(&x, c)| c[1] + 2.0 * c[2] * x)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchProblem {
    pub linear: DMatrix<f64>,
    pub reaction: QuadraticReaction,
    pub initial: Vec<f64>,
    pub ladder: TauLadder,
}

impl Default for BenchProblem {
    /// Rotation generator, componentwise logistic reaction, `U₀ = (0.3, 0.6)`.
    fn default() -> Self {
        Self {
            linear: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
            reaction: QuadraticReaction::logistic(2),
            initial: vec![0.3, 0.6],
            ladder: TauLadder::standard(),
        }
    }
}

impl BenchProblem {
    pub fn dim(&self) -> usize {
        self.initial.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 || self.linear.nrows() != n || self.linear.ncols() != n || self.reaction.coefficients.len() != n {
            return Err(Error::Dimension(format!("bench problem of dimension {n} is inconsistent")));
        }
        Ok(())
    }

    fn apply_linear(&self, u: &[f64], out: &mut [f64]) {
        let v = &self.linear * DVector::from_column_slice(u);
        out.copy_from_slice(v.as_slice());
    }

    fn full(&self, u: &[f64], out: &mut [f64]) {
        self.apply_linear(u, out);
        let mut r = vec![0.0; u.len()];
        self.reaction.eval(u, &mut r);
        for (o, x) in out.iter_mut().zip(&r) {
            *o += x;
        }
    }

    /// One macro step: operator 0 is the linear part, operator 1 the reaction,
    /// each stage advanced by a single step of `method`.
    pub fn split_step(&self, scheme: &SplittingScheme, method: Method, tau: f64) -> Result<Vec<f64>> {
        scheme.validate(2)?;
        let tab = method.tableau();
        let lin = |_t: f64, u: &[f64], du: &mut [f64]| self.apply_linear(u, du);
        let reac = |_t: f64, u: &[f64], du: &mut [f64]| self.reaction.eval(u, du);
        scheme.compose(tau, &self.initial, |op, u: &Vec<f64>, dt| match op {
            0 => step_slice(&tab, &lin, 0.0, u, dt),
            _ => step_slice(&tab, &reac, 0.0, u, dt),
        })
    }

    /// RK4 with `fine_steps` steps over `[0, tau]`.
    pub fn reference(&self, tau: f64, fine_steps: usize) -> Result<Vec<f64>> {
        let rhs = |_t: f64, u: &[f64], du: &mut [f64]| self.full(u, du);
        integrate_slice(&Method::Rk4.tableau(), &rhs, 0.0, &self.initial, tau, fine_steps)
    }

    /// Leading local-error vector `C` in `U(τ) - Ũ(τ) = C τ²/2 + o(τ²)` for the
    /// Euler-combined first-order schemes.
    pub fn euler_leading_term(&self, variant: EulerVariant) -> Vec<f64> {
        let n = self.dim();
        let u = &self.initial;
        let mut au = vec![0.0; n];
        self.apply_linear(u, &mut au);
        let mut aau = vec![0.0; n];
        self.apply_linear(&au, &mut aau);
        let mut ru = vec![0.0; n];
        self.reaction.eval(u, &mut ru);
        let mut aru = vec![0.0; n];
        self.apply_linear(&ru, &mut aru);
        let jac = self.reaction.jacobian_diag(u);
        (0..n)
            .map(|i| {
                let rpa = jac[i] * au[i];
                let rpr = jac[i] * ru[i];
                match variant {
                    EulerVariant::LinearFirst => aau[i] + aru[i] - rpa + rpr,
                    EulerVariant::ReactionFirst => aau[i] - aru[i] + rpa + rpr,
                    EulerVariant::SymmetricWeighted => aau[i] + rpr,
                }
            })
            .collect()
    }

    /// Measured `‖U(τ) - Ũ(τ)‖ / (τ²/2)` and the predicted `‖C‖`.
    pub fn euler_error_constant(&self, variant: EulerVariant, tau: f64) -> Result<(f64, f64)> {
        let scheme = variant.scheme();
        let split = self.split_step(&scheme, Method::Euler, tau)?;
        let exact = self.reference(tau, 1000)?;
        let measured = max_abs_diff(&exact, &split) / (0.5 * tau * tau);
        let predicted = self.euler_leading_term(variant).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok((measured, predicted))
    }
}

/// First-order Euler combinations with a closed-form leading error term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EulerVariant {
    /// Linear stage applied first, then the reaction.
    LinearFirst,
    /// Reaction stage applied first, then the linear part.
    ReactionFirst,
    /// Mean of both orders.
    SymmetricWeighted,
}

impl EulerVariant {
    pub fn scheme(self) -> SplittingScheme {
        match self {
            EulerVariant::LinearFirst => SplittingScheme::sequential(vec![0, 1]),
            EulerVariant::ReactionFirst => SplittingScheme::sequential(vec![1, 0]),
            EulerVariant::SymmetricWeighted => SplittingScheme::symmetric(vec![0, 1]),
        }
    }
}

/// Local order of `scheme` combined with `method` on the bench problem.
pub fn bench_local_order(scheme: &SplittingScheme, method: Method, problem: &BenchProblem) -> Result<OrderEstimate> {
    problem.validate()?;
    let errors = problem
        .ladder
        .taus()
        .iter()
        .map(|&tau| {
            let split = problem.split_step(scheme, method, tau)?;
            let exact = problem.reference(tau, 1000)?;
            if !split.iter().all(|v| v.is_finite()) {
                return Err(Error::Overflow {
                    method: method.to_string(),
                    stage: 0,
                });
            }
            Ok(max_abs_diff(&exact, &split))
        })
        .collect::<Result<Vec<_>>>()?;
    OrderEstimate::local_from_errors(problem.ladder.taus(), &errors)
}

/// Matrix exponential (Padé approximant with scaling and squaring).
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.exp()
}

/// Max-entry deviation between `exp(τA) exp(τB)` and `exp(τ(A+B))`.
pub fn commuting_exponential_check(a: &DMatrix<f64>, b: &DMatrix<f64>, tau: f64) -> f64 {
    let product = expm(&(a * tau)) * expm(&(b * tau));
    let joint = expm(&((a + b) * tau));
    (product - joint).iter().fold(0.0, |m: f64, v| m.max(v.abs()))
}

/// Max-entry norm of `AB - BA`.
pub fn commutator_norm(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a * b - b * a).iter().fold(0.0, |m: f64, v| m.max(v.abs()))
}
