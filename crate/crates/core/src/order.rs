//! Error measurement and convergence-order estimation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{max_norm_diff, Field};
use crate::reference::{local_reference, ReferenceSpec};
use crate::splitting::{split_solve, split_step, step_count, SplitProblem, SplittingScheme};

/// Errors at or below this are reference-limited and left out of fits.
pub const NOISE_FLOOR: f64 = 1e-12;

/// Strictly decreasing list of macro steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TauLadder(Vec<f64>);

impl TauLadder {
    pub const STANDARD: [f64; 7] = [0.2, 0.1, 0.0625, 0.05, 0.04, 0.025, 0.02];

    pub fn new(taus: Vec<f64>) -> Result<Self> {
        if taus.len() < 2 {
            return Err(Error::config("tau-ladder", "need at least two steps"));
        }
        if taus.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::config("tau-ladder", "steps must be positive and finite"));
        }
        if taus.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::config("tau-ladder", format!("{taus:?} is not strictly decreasing")));
        }
        Ok(Self(taus))
    }

    /// `0.2, 0.1, 0.0625, 0.05, 0.04, 0.025, 0.02`.
    pub fn standard() -> Self {
        Self(Self::STANDARD.to_vec())
    }

    /// The standard ladder without its largest step (the figure series).
    pub fn figures() -> Self {
        Self(Self::STANDARD[1..].to_vec())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|t| t * factor).collect())
    }

    /// Checks every step divides `horizon`.
    pub fn check_divides(&self, horizon: f64) -> Result<()> {
        for &tau in &self.0 {
            step_count(horizon, tau)?;
        }
        Ok(())
    }

    /// Parses a comma-separated list.
    pub fn parse(s: &str) -> Result<Self> {
        let taus = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::config("tau-ladder", format!("bad number `{p}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(taus)
    }

    pub fn taus(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderKind {
    /// `E(τ) = O(τ^{s+1})` for one macro step.
    Local,
    /// `E(τ) ≈ c τ^ρ` at a fixed horizon.
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderEstimate {
    pub kind: OrderKind,
    pub taus: Vec<f64>,
    pub errors: Vec<f64>,
    /// `log(E_i/E_{i+1}) / log(τ_i/τ_{i+1})`; `None` where a pair was excluded.
    pub pairwise: Vec<Option<f64>>,
    /// Least-squares slope of `log E` against `log τ` over usable points.
    pub slope: f64,
    /// Local: `slope - 1`. Global: mean of the usable pairwise ratios.
    pub order: f64,
}

impl OrderEstimate {
    pub fn local_from_errors(taus: &[f64], errors: &[f64]) -> Result<Self> {
        let (slope, pairwise) = fit(taus, errors)?;
        Ok(Self {
            kind: OrderKind::Local,
            taus: taus.to_vec(),
            errors: errors.to_vec(),
            pairwise,
            slope,
            order: slope - 1.0,
        })
    }

    pub fn global_from_errors(taus: &[f64], errors: &[f64]) -> Result<Self> {
        let (slope, pairwise) = fit(taus, errors)?;
        let usable: Vec<f64> = pairwise.iter().flatten().copied().collect();
        if usable.is_empty() {
            return Err(Error::InsufficientData { usable: 0, required: 1 });
        }
        let order = usable.iter().sum::<f64>() / usable.len() as f64;
        Ok(Self {
            kind: OrderKind::Global,
            taus: taus.to_vec(),
            errors: errors.to_vec(),
            pairwise,
            slope,
            order,
        })
    }

    /// Median of the usable pairwise ratios.
    pub fn median_pairwise(&self) -> f64 {
        let mut v: Vec<f64> = self.pairwise.iter().flatten().copied().collect();
        if v.is_empty() {
            return f64::NAN;
        }
        v.sort_by(f64::total_cmp);
        let m = v.len() / 2;
        if v.len() % 2 == 1 {
            v[m]
        } else {
            0.5 * (v[m - 1] + v[m])
        }
    }
}

fn fit(taus: &[f64], errors: &[f64]) -> Result<(f64, Vec<Option<f64>>)> {
    if taus.len() != errors.len() {
        return Err(Error::Dimension(format!(
            "{} steps but {} errors",
            taus.len(),
            errors.len()
        )));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = taus
        .iter()
        .zip(errors)
        .filter(|(_, e)| usable(**e))
        .map(|(t, e)| (t.ln(), e.ln()))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::InsufficientData {
            usable: xs.len(),
            required: 3,
        });
    }
    Ok((least_squares_slope(&xs, &ys), order_ratio_series(errors, taus)?))
}

fn usable(e: f64) -> bool {
    e.is_finite() && e > NOISE_FLOOR
}

/// Pairwise ratios `ρ_i` for consecutive ladder entries.
pub fn order_ratio_series(errors: &[f64], taus: &[f64]) -> Result<Vec<Option<f64>>> {
    if errors.len() != taus.len() || errors.len() < 2 {
        return Err(Error::Dimension(format!(
            "need matching series of length >= 2, got {} errors and {} steps",
            errors.len(),
            taus.len()
        )));
    }
    Ok(errors
        .windows(2)
        .zip(taus.windows(2))
        .map(|(e, t)| {
            (usable(e[0]) && usable(e[1])).then(|| (e[0] / e[1]).ln() / (t[0] / t[1]).ln())
        })
        .collect())
}

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

/// One-step errors against fine local references, one macro step per τ.
pub fn local_errors(
    scheme: &SplittingScheme,
    problem: &SplitProblem,
    f0: &Field,
    ladder: &TauLadder,
    reference: &ReferenceSpec,
) -> Result<Vec<f64>> {
    ladder
        .taus()
        .iter()
        .map(|&tau| {
            let split = split_step(scheme, problem, f0, tau)?;
            let exact = local_reference(problem, f0, tau, reference)?;
            max_norm_diff(&split, &exact)
        })
        .collect()
}

pub fn local_order(
    scheme: &SplittingScheme,
    problem: &SplitProblem,
    f0: &Field,
    ladder: &TauLadder,
    reference: &ReferenceSpec,
) -> Result<OrderEstimate> {
    let errors = local_errors(scheme, problem, f0, ladder, reference)?;
    OrderEstimate::local_from_errors(ladder.taus(), &errors)
}

/// Errors at `f0.time + horizon` against a precomputed reference field.
pub fn global_errors(
    scheme: &SplittingScheme,
    problem: &SplitProblem,
    f0: &Field,
    ladder: &TauLadder,
    horizon: f64,
    reference: &Field,
) -> Result<Vec<f64>> {
    ladder.check_divides(horizon)?;
    ladder
        .taus()
        .iter()
        .map(|&tau| max_norm_diff(&split_solve(scheme, problem, f0, horizon, tau)?, reference))
        .collect()
}

pub fn global_order(
    scheme: &SplittingScheme,
    problem: &SplitProblem,
    f0: &Field,
    ladder: &TauLadder,
    horizon: f64,
    reference: &Field,
) -> Result<OrderEstimate> {
    let errors = global_errors(scheme, problem, f0, ladder, horizon, reference)?;
    OrderEstimate::global_from_errors(ladder.taus(), &errors)
}
