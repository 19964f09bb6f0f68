//! Operator-splitting solvers for 1-D reaction–diffusion equations and a
//! harness for measuring the convergence order of splitting schemes combined
//! with explicit Runge–Kutta sub-solvers.
//!
//! The main pieces:
//! - [`grid`]: uniform grids, fields and Dirichlet data.
//! - [`operators`]: diffusion stencil, pointwise reactions and their exact flows.
//! - [`integrators`]: explicit methods of orders 1–4.
//! - [`splitting`]: sequential, Strang and weighted compositions.
//! - [`reference`]: unsplit reference solutions and the exact Fisher wave.
//! - [`order`]: local and global order estimation.
//! - [`odebench`]: bounded-operator bench for combined-method orders.
//! - [`experiment`]: table/figure reproductions, checks and CSV output.

pub mod error;
pub mod experiment;
pub mod grid;
pub mod integrators;
pub mod odebench;
pub mod operators;
pub mod order;
pub mod reference;
pub mod splitting;

pub use error::{Error, Result};
pub use grid::{make_initial_field, max_norm_diff, DirichletBC, Field, Grid1D, Profile};
pub use integrators::{ButcherTableau, Method};
pub use operators::{BoundaryPolicy, FlowMode, OperatorKind, SubProblem};
pub use order::{OrderEstimate, OrderKind, TauLadder};
pub use reference::ReferenceSpec;
pub use splitting::{split_solve, split_step, SchemeKind, SplitProblem, SplittingScheme};
