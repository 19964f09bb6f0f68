//! Composition of sub-flows over one macro step.
//!
//! Sequences are listed first-applied-first. `[0, 1]` under `Sequential`
//! means `S₀(τ)` then `S₁(τ)`, i.e. `S₁(τ)S₀(τ)` in right-to-left operator notation.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DirichletBC, Field};
use crate::operators::{BoundaryPolicy, SubProblem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    /// One full stage per operator (SEQ).
    Sequential,
    /// Palindromic composition with halved outer stages (MS).
    Strang,
    /// `ω · seq + (1-ω) · reversed seq`; two operators only.
    Weighted(f64),
    /// Mean over all application orders (SW).
    SymmetricWeighted,
}

impl SchemeKind {
    pub fn label(&self) -> String {
        match self {
            SchemeKind::Sequential => "seq".into(),
            SchemeKind::Strang => "strang".into(),
            SchemeKind::Weighted(w) => format!("weighted({w})"),
            SchemeKind::SymmetricWeighted => "sw".into(),
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "seq" => Ok(SchemeKind::Sequential),
            "strang" | "ms" => Ok(SchemeKind::Strang),
            "sw" => Ok(SchemeKind::SymmetricWeighted),
            _ => {
                let w = s
                    .strip_prefix("weighted(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| Error::config("scheme", format!("unknown scheme `{s}`")))?;
                let w: f64 = w
                    .trim()
                    .parse()
                    .map_err(|_| Error::config("scheme", format!("bad weight in `{s}`")))?;
                if !(0.0..=1.0).contains(&w) {
                    return Err(Error::config("scheme", format!("weight {w} outside [0, 1]")));
                }
                Ok(SchemeKind::Weighted(w))
            }
        }
    }
}

/// A splitting recipe: the scheme kind plus the operator application order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittingScheme {
    pub kind: SchemeKind,
    pub sequence: Vec<usize>,
}

/// One stage: operator index and its duration as a fraction of τ.
type Stage = (usize, f64);

impl SplittingScheme {
    pub fn new(kind: SchemeKind, sequence: Vec<usize>) -> Self {
        Self { kind, sequence }
    }

    pub fn sequential(sequence: Vec<usize>) -> Self {
        Self::new(SchemeKind::Sequential, sequence)
    }

    pub fn strang(sequence: Vec<usize>) -> Self {
        Self::new(SchemeKind::Strang, sequence)
    }

    pub fn symmetric(sequence: Vec<usize>) -> Self {
        Self::new(SchemeKind::SymmetricWeighted, sequence)
    }

    /// The same scheme with the operator list reversed.
    pub fn mirrored(&self) -> Self {
        let mut sequence = self.sequence.clone();
        sequence.reverse();
        Self::new(self.kind, sequence)
    }

    pub fn validate(&self, n_ops: usize) -> Result<()> {
        if !(1..=3).contains(&n_ops) {
            return Err(Error::config("sequence", format!("need 1 to 3 operators, got {n_ops}")));
        }
        let mut seen = vec![false; n_ops];
        for &i in &self.sequence {
            if i >= n_ops || seen[i] {
                return Err(Error::config(
                    "sequence",
                    format!("{:?} is not a permutation of 0..{n_ops}", self.sequence),
                ));
            }
            seen[i] = true;
        }
        if self.sequence.len() != n_ops {
            return Err(Error::config(
                "sequence",
                format!("{:?} must list all {n_ops} operators", self.sequence),
            ));
        }
        if let SchemeKind::Weighted(w) = self.kind {
            if n_ops != 2 {
                return Err(Error::config("scheme", "weighted splitting needs exactly 2 operators"));
            }
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::config("scheme", format!("weight {w} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Weighted branches of stages that make up one macro step.
    fn branches(&self) -> Vec<(f64, Vec<Stage>)> {
        let full = |seq: &[usize]| seq.iter().map(|&i| (i, 1.0)).collect::<Vec<_>>();
        match self.kind {
            SchemeKind::Sequential => vec![(1.0, full(&self.sequence))],
            SchemeKind::Strang => {
                let (inner, outer) = self.sequence.split_last().expect("validated non-empty");
                let mut stages: Vec<Stage> = outer.iter().map(|&i| (i, 0.5)).collect();
                stages.push((*inner, 1.0));
                stages.extend(outer.iter().rev().map(|&i| (i, 0.5)));
                vec![(1.0, stages)]
            }
            SchemeKind::Weighted(w) => {
                let rev: Vec<usize> = self.sequence.iter().rev().copied().collect();
                [(w, full(&self.sequence)), (1.0 - w, full(&rev))]
                    .into_iter()
                    .filter(|(weight, _)| *weight != 0.0)
                    .collect()
            }
            SchemeKind::SymmetricWeighted => {
                let perms = permutations(&self.sequence);
                let w = 1.0 / perms.len() as f64;
                perms.iter().map(|p| (w, full(p))).collect()
            }
        }
    }

    /// Right-to-left operator notation, e.g. `S2(τ/2)S1(τ)S2(τ/2)`, 1-based.
    pub fn operator_notation(&self) -> String {
        let stage = |(i, frac): &Stage| {
            if *frac == 1.0 {
                format!("S{}(τ)", i + 1)
            } else {
                format!("S{}(τ/2)", i + 1)
            }
        };
        let branches = self.branches();
        let terms: Vec<String> = branches
            .iter()
            .map(|(_, stages)| stages.iter().rev().map(stage).collect::<String>())
            .collect();
        match self.kind {
            SchemeKind::Sequential | SchemeKind::Strang => terms[0].clone(),
            SchemeKind::Weighted(w) if branches.len() == 2 => format!("{w}·{} + {}·{}", terms[0], 1.0 - w, terms[1]),
            SchemeKind::Weighted(_) => terms[0].clone(),
            SchemeKind::SymmetricWeighted => format!("({})/{}", terms.join(" + "), terms.len()),
        }
    }

    /// First-applied-first listing, 1-based, e.g. `S1,S2`.
    pub fn sequence_notation(&self) -> String {
        self.sequence
            .iter()
            .map(|i| format!("S{}", i + 1))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Runs one macro step over an arbitrary state type.
    ///
    /// `flow(op, state, duration)` advances `state` by one stage.
    pub fn compose<S, F>(&self, tau: f64, state: &S, flow: F) -> Result<S>
    where
        S: SplitState,
        F: Fn(usize, &S, f64) -> Result<S>,
    {
        let mut results = Vec::new();
        for (weight, stages) in self.branches() {
            let mut s = state.clone();
            for (op, frac) in stages {
                s = flow(op, &s, frac * tau)?;
            }
            results.push((weight, s));
        }
        if results.len() == 1 && results[0].0 == 1.0 {
            return Ok(results.pop().unwrap().1);
        }
        Ok(S::weighted_sum(&results))
    }
}

impl fmt::Display for SplittingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.kind, self.sequence_notation())
    }
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (i, &head) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// States that can be averaged across splitting branches.
pub trait SplitState: Clone {
    fn weighted_sum(parts: &[(f64, Self)]) -> Self;
}

fn weighted_values<'a>(n: usize, parts: impl Iterator<Item = (f64, &'a [f64])>) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (w, v) in parts {
        for (o, x) in out.iter_mut().zip(v) {
            *o += w * x;
        }
    }
    out
}

impl SplitState for Vec<f64> {
    fn weighted_sum(parts: &[(f64, Self)]) -> Self {
        weighted_values(parts[0].1.len(), parts.iter().map(|(w, v)| (*w, v.as_slice())))
    }
}

impl SplitState for Field {
    fn weighted_sum(parts: &[(f64, Self)]) -> Self {
        let first = &parts[0].1;
        let values = weighted_values(first.len(), parts.iter().map(|(w, f)| (*w, f.values.as_slice())));
        first.with_values(values, first.time)
    }
}

/// Sub-problems plus the boundary treatment shared by all of them.
#[derive(Debug, Clone)]
pub struct SplitProblem {
    pub subproblems: Vec<SubProblem>,
    pub policy: BoundaryPolicy,
    /// Re-imposed after every sub-flow under [`BoundaryPolicy::Frozen`].
    pub bc: Option<DirichletBC>,
}

impl SplitProblem {
    pub fn new(subproblems: Vec<SubProblem>, policy: BoundaryPolicy) -> Self {
        Self {
            subproblems,
            policy,
            bc: None,
        }
    }

    pub fn with_bc(mut self, bc: DirichletBC) -> Self {
        self.bc = Some(bc);
        self
    }

    pub fn n_ops(&self) -> usize {
        self.subproblems.len()
    }

    /// Sum of all sub-problem derivatives (the unsplit right-hand side).
    pub fn full_derivative(&self, f: &Field) -> impl Fn(f64, &[f64], &mut [f64]) + '_ {
        let grid = f.grid;
        move |_t, u, du| {
            du.fill(0.0);
            let mut part = vec![0.0; u.len()];
            for sp in &self.subproblems {
                sp.derivative(&grid, self.policy, u, &mut part);
                for (d, p) in du.iter_mut().zip(&part) {
                    *d += p;
                }
            }
        }
    }

    fn sub_flow(&self, op: usize, f: &Field, duration: f64, tau: f64) -> Result<Field> {
        let mut out = self.subproblems[op].advance(f, duration, tau, self.policy)?;
        if self.policy == BoundaryPolicy::Frozen {
            if let Some(bc) = &self.bc {
                bc.apply(&mut out);
            }
        }
        if !out.is_finite() {
            return Err(Error::Overflow {
                method: self.subproblems[op].kind.name().to_string(),
                stage: op,
            });
        }
        Ok(out)
    }
}

/// Advances `f` by one macro step `tau`.
pub fn split_step(scheme: &SplittingScheme, problem: &SplitProblem, f: &Field, tau: f64) -> Result<Field> {
    scheme.validate(problem.n_ops())?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::config("tau", format!("must be positive, got {tau}")));
    }
    let mut out = scheme.compose(tau, f, |op, s, dt| problem.sub_flow(op, s, dt, tau))?;
    out.time = f.time + tau;
    Ok(out)
}

/// Number of macro steps of size `tau` covering `t_end`.
pub fn step_count(t_end: f64, tau: f64) -> Result<usize> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::config("tau", format!("must be positive, got {tau}")));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::config("horizon", format!("must be positive, got {t_end}")));
    }
    let n = (t_end / tau).round();
    if n < 1.0 || (n * tau - t_end).abs() > 1e-12 * t_end {
        return Err(Error::config(
            "tau-ladder",
            format!("tau = {tau} does not divide the horizon {t_end}"),
        ));
    }
    Ok(n as usize)
}

/// Repeats [`split_step`] from `f0.time` up to `f0.time + t_end`.
pub fn split_solve(
    scheme: &SplittingScheme,
    problem: &SplitProblem,
    f0: &Field,
    t_end: f64,
    tau: f64,
) -> Result<Field> {
    let n = step_count(t_end, tau)?;
    let t0 = f0.time;
    let mut f = f0.clone();
    for k in 1..=n {
        f = split_step(scheme, problem, &f, tau)?;
        f.time = t0 + k as f64 * tau;
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_initial_field, Grid1D, Profile};
    use crate::integrators::Method;
    use crate::operators::OperatorKind;

    fn fisher(method: Method, ratio: f64) -> SplitProblem {
        SplitProblem::new(
            vec![
                SubProblem::numerical(OperatorKind::Diffusion, method, ratio).unwrap(),
                SubProblem::numerical(OperatorKind::Logistic, method, ratio).unwrap(),
            ],
            BoundaryPolicy::ReactionDriven,
        )
    }

    fn sine() -> Field {
        make_initial_field(Grid1D::standard(), Profile::Sine)
    }

    #[test]
    fn scheme_parsing() {
        assert_eq!("seq".parse::<SchemeKind>().unwrap(), SchemeKind::Sequential);
        assert_eq!("ms".parse::<SchemeKind>().unwrap(), SchemeKind::Strang);
        assert_eq!("weighted(0.25)".parse::<SchemeKind>().unwrap(), SchemeKind::Weighted(0.25));
        assert!("weighted(1.5)".parse::<SchemeKind>().is_err());
        assert!("lie".parse::<SchemeKind>().is_err());
    }

    #[test]
    fn strang_stage_patterns() {
        let s = SplittingScheme::strang(vec![0, 1]);
        assert_eq!(s.branches(), vec![(1.0, vec![(0, 0.5), (1, 1.0), (0, 0.5)])]);
        let s = SplittingScheme::strang(vec![2, 1, 0]);
        assert_eq!(
            s.branches(),
            vec![(1.0, vec![(2, 0.5), (1, 0.5), (0, 1.0), (1, 0.5), (2, 0.5)])]
        );
        assert_eq!(s.operator_notation(), "S3(τ/2)S2(τ/2)S1(τ)S2(τ/2)S3(τ/2)");
        assert_eq!(SplittingScheme::sequential(vec![0, 1]).operator_notation(), "S2(τ)S1(τ)");
    }

    #[test]
    fn symmetric_uses_all_permutations() {
        let b = SplittingScheme::symmetric(vec![0, 1, 2]).branches();
        assert_eq!(b.len(), 6);
        let mut orders: Vec<Vec<usize>> = b.iter().map(|(_, s)| s.iter().map(|x| x.0).collect()).collect();
        orders.sort();
        orders.dedup();
        assert_eq!(orders.len(), 6);
        assert!(b.iter().all(|(w, _)| (*w - 1.0 / 6.0).abs() < 1e-16));
    }

    #[test]
    fn validation() {
        assert!(SplittingScheme::sequential(vec![0, 0]).validate(2).is_err());
        assert!(SplittingScheme::sequential(vec![0]).validate(2).is_err());
        assert!(SplittingScheme::sequential(vec![0, 1, 2, 3]).validate(4).is_err());
        assert!(SplittingScheme::new(SchemeKind::Weighted(0.5), vec![0, 1, 2]).validate(3).is_err());
        assert!(SplittingScheme::strang(vec![1, 0]).validate(2).is_ok());
    }

    #[test]
    fn zero_second_operator_is_neutral() {
        let f = sine();
        let diffusion = SubProblem::numerical(OperatorKind::Diffusion, Method::Rk4, 0.1).unwrap();
        let alone = diffusion.advance(&f, 0.05, 0.05, BoundaryPolicy::Frozen).unwrap();
        let out = SplittingScheme::sequential(vec![0, 1])
            .compose(0.05, &f, |op, s, dt| match op {
                0 => diffusion.advance(s, dt, 0.05, BoundaryPolicy::Frozen),
                _ => Ok(s.clone()),
            })
            .unwrap();
        assert_eq!(out.values, alone.values);
    }

    #[test]
    fn commuting_linear_flows_add_exponents() {
        // u' = u twice, exact: η e^{2τ}
        let g = Grid1D::new(0.0, 1.0, 4).unwrap();
        let f = Field::new(g, vec![0.3, 0.7, 1.1, 1.5, 1.9], 0.0).unwrap();
        let lin = SubProblem::exact(OperatorKind::Linear).unwrap();
        let p = SplitProblem::new(vec![lin, lin], BoundaryPolicy::ReactionDriven);
        let tau = 0.3;
        for scheme in [
            SplittingScheme::sequential(vec![0, 1]),
            SplittingScheme::strang(vec![0, 1]),
            SplittingScheme::symmetric(vec![0, 1]),
        ] {
            let out = split_step(&scheme, &p, &f, tau).unwrap();
            for (o, e) in out.values.iter().zip(&f.values) {
                assert!((o - e * (2.0 * tau).exp()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn strang_of_identical_copies_equals_single_flow() {
        // oracle: the logistic closed form over 2τ, since S(τ/2)S(τ)S(τ/2) = S(2τ)
        let f = sine();
        let logistic = SubProblem::exact(OperatorKind::Logistic).unwrap();
        let p = SplitProblem::new(vec![logistic, logistic], BoundaryPolicy::ReactionDriven);
        let tau = 0.2;
        let out = split_step(&SplittingScheme::strang(vec![0, 1]), &p, &f, tau).unwrap();
        for (o, &eta) in out.values.iter().zip(&f.values) {
            let g = (2.0 * tau).exp();
            let exact = eta * g / (1.0 - eta + eta * g);
            assert!((o - exact).abs() < 1e-14);
        }
        assert!((out.time - tau).abs() < 1e-16);
    }

    #[test]
    fn logistic_only_solve_matches_closed_form() {
        let f = sine();
        let logistic = SubProblem::exact(OperatorKind::Logistic).unwrap();
        let p = SplitProblem::new(vec![logistic], BoundaryPolicy::ReactionDriven);
        let out = split_solve(&SplittingScheme::sequential(vec![0]), &p, &f, 1.0, 0.04).unwrap();
        for (o, &eta) in out.values.iter().zip(&f.values) {
            let e = std::f64::consts::E;
            assert!((o - eta * e / (1.0 - eta + eta * e)).abs() < 1e-13);
        }
        assert_eq!(out.time, 25.0 * 0.04);
    }

    #[test]
    fn weighted_endpoints_are_sequential_orders() {
        let f = sine();
        let p = fisher(Method::Heun3, 1.0);
        let seq = split_step(&SplittingScheme::sequential(vec![0, 1]), &p, &f, 0.05).unwrap();
        let rev = split_step(&SplittingScheme::sequential(vec![1, 0]), &p, &f, 0.05).unwrap();
        let w1 = split_step(&SplittingScheme::new(SchemeKind::Weighted(1.0), vec![0, 1]), &p, &f, 0.05).unwrap();
        let w0 = split_step(&SplittingScheme::new(SchemeKind::Weighted(0.0), vec![0, 1]), &p, &f, 0.05).unwrap();
        assert_eq!(w1.values, seq.values);
        assert_eq!(w0.values, rev.values);
        let half = split_step(&SplittingScheme::new(SchemeKind::Weighted(0.5), vec![0, 1]), &p, &f, 0.05).unwrap();
        let sw = split_step(&SplittingScheme::symmetric(vec![0, 1]), &p, &f, 0.05).unwrap();
        assert_eq!(half.values, sw.values);
    }

    #[test]
    fn strang_orientations_differ() {
        let f = sine();
        let p = fisher(Method::Rk4, 1.0);
        let a = split_solve(&SplittingScheme::strang(vec![0, 1]), &p, &f, 1.0, 0.1).unwrap();
        let b = split_solve(&SplittingScheme::strang(vec![0, 1]).mirrored(), &p, &f, 1.0, 0.1).unwrap();
        assert!(crate::grid::max_norm_diff(&a, &b).unwrap() > 1e-8);
    }

    #[test]
    fn time_is_not_accumulated() {
        let f = sine();
        let p = fisher(Method::Euler, 1.0);
        let out = split_solve(&SplittingScheme::sequential(vec![0, 1]), &p, &f, 1.0, 0.02).unwrap();
        assert_eq!(out.time, 50.0 * 0.02);
    }

    #[test]
    fn non_integral_step_count_rejected() {
        let f = sine();
        let p = fisher(Method::Euler, 1.0);
        let err = split_solve(&SplittingScheme::sequential(vec![0, 1]), &p, &f, 1.0, 0.3).unwrap_err();
        assert!(matches!(err, Error::Config { .. }));
        assert_eq!(step_count(1.0, 0.0625).unwrap(), 16);
        assert_eq!(step_count(1.0, 1.0).unwrap(), 1);
    }

    #[test]
    fn frozen_policy_reimposes_bc() {
        let f = sine();
        let lin = SubProblem::exact(OperatorKind::Linear).unwrap();
        let p = SplitProblem::new(vec![lin], BoundaryPolicy::ReactionDriven);
        let drift = split_step(&SplittingScheme::sequential(vec![0]), &p, &f, 0.1).unwrap();
        assert!(drift.values[0] > 1.1);
        let p = SplitProblem::new(vec![lin], BoundaryPolicy::Frozen).with_bc(DirichletBC::constant(1.0, 1.0));
        let held = split_step(&SplittingScheme::sequential(vec![0]), &p, &f, 0.1).unwrap();
        assert_eq!(held.values[0], 1.0);
        assert_eq!(held.values[30], 1.0);
    }
}
