//! Optimality certificates for labelings produced after pre-processing.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::energy::EnergyFunction;
use crate::error::{Error, Result};
use crate::preprocess::PreprocessResult;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatementKind {
    /// `E(x̂) ≤ E(x*) + ζ + Σ δ̄_i`
    PerInstanceAdditive,
    /// `E(x̂) ≤ E(x*) + ζ + |S| ε`
    WorstCaseAdditive,
    /// `E(x̂) ≤ β E(x*) + |S| ε`
    WorstCaseMultiplicative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub kind: StatementKind,
    /// `Σ δ̄_i` of the pre-processing run.
    pub additive_slack: f64,
    /// Additive bound of the solver used on the remaining variables; absent
    /// when no such bound is known.
    pub zeta: Option<f64>,
    pub beta: Option<f64>,
    pub epsilon: Option<f64>,
    pub fixed_count: usize,
    /// The additive term of the statement.
    pub bound_value: f64,
}

impl BoundCertificate {
    /// Largest energy the statement allows given the optimum.
    pub fn allowed(&self, optimum: f64) -> f64 {
        self.beta.unwrap_or(1.0) * optimum + self.bound_value
    }

    /// Whether `achieved` satisfies the statement against `optimum`.
    pub fn check(&self, achieved: f64, optimum: f64, tol: f64) -> bool {
        achieved <= self.allowed(optimum) + tol
    }
}

impl fmt::Display for BoundCertificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.beta {
            Some(b) => write!(f, "E(x̂) ≤ {b}·E(x*) + {}", self.bound_value),
            None => write!(f, "E(x̂) ≤ E(x*) + {}", self.bound_value),
        }
    }
}

fn finite_epsilon(result: &PreprocessResult, epsilon: f64) -> Result<f64> {
    if !result.epsilon.is_finite() || !epsilon.is_finite() {
        return Err(Error::NoCertificate("pre-processing ran without a finite epsilon gate".into()));
    }
    if result.delta_bars.iter().any(|&d| d > epsilon) {
        return Err(Error::NoCertificate(format!("some fixed variable has a loss bound above epsilon = {epsilon}")));
    }
    Ok(epsilon)
}

pub fn per_instance_additive(result: &PreprocessResult, zeta: f64) -> BoundCertificate {
    let slack = result.additive_slack();
    BoundCertificate {
        kind: StatementKind::PerInstanceAdditive,
        additive_slack: slack,
        zeta: Some(zeta),
        beta: None,
        epsilon: result.epsilon.is_finite().then_some(result.epsilon),
        fixed_count: result.num_fixed(),
        bound_value: zeta + slack,
    }
}

pub fn worst_case_additive(result: &PreprocessResult, zeta: f64, epsilon: f64) -> Result<BoundCertificate> {
    let eps = finite_epsilon(result, epsilon)?;
    Ok(BoundCertificate {
        kind: StatementKind::WorstCaseAdditive,
        additive_slack: result.additive_slack(),
        zeta: Some(zeta),
        beta: None,
        epsilon: Some(eps),
        fixed_count: result.num_fixed(),
        bound_value: zeta + result.num_fixed() as f64 * eps,
    })
}

/// For expansion moves on the remaining variables with factor `beta`.
pub fn worst_case_multiplicative(result: &PreprocessResult, beta: f64, epsilon: f64) -> Result<BoundCertificate> {
    let eps = finite_epsilon(result, epsilon)?;
    if !(beta >= 1.0 && beta.is_finite()) {
        return Err(Error::NoBeta(format!("beta must be finite and >= 1, got {beta}")));
    }
    Ok(BoundCertificate {
        kind: StatementKind::WorstCaseMultiplicative,
        additive_slack: result.additive_slack(),
        zeta: None,
        beta: Some(beta),
        epsilon: Some(eps),
        fixed_count: result.num_fixed(),
        bound_value: result.num_fixed() as f64 * eps,
    })
}

/// `2 · max_edges (max off-diagonal / min off-diagonal)` for metric pairwise
/// terms; `tol` absorbs rounding in the metric checks.
pub fn expansion_beta(e: &EnergyFunction, tol: f64) -> Result<f64> {
    let mut ratio: f64 = 1.0;
    for (k, &(u, v)) in e.edges().iter().enumerate() {
        let (lu, lv) = (e.label_count(u), e.label_count(v));
        if lu != lv {
            return Err(Error::NoBeta(format!("edge ({u}, {v}) joins label sets of different sizes")));
        }
        let t = e.table(k);
        let at = |a: usize, b: usize| t[a * lv + b];
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for a in 0..lu {
            if at(a, a).abs() > tol {
                return Err(Error::NoBeta(format!("edge ({u}, {v}) has a nonzero diagonal")));
            }
            for b in 0..lu {
                if a == b {
                    continue;
                }
                let w = at(a, b);
                if (w - at(b, a)).abs() > tol {
                    return Err(Error::NoBeta(format!("edge ({u}, {v}) is not symmetric")));
                }
                if w <= 0.0 {
                    return Err(Error::NoBeta(format!("edge ({u}, {v}) has a non-positive off-diagonal entry")));
                }
                for c in 0..lu {
                    if w > at(a, c) + at(c, b) + tol {
                        return Err(Error::NoBeta(format!("edge ({u}, {v}) violates the triangle inequality")));
                    }
                }
                lo = lo.min(w);
                hi = hi.max(w);
            }
        }
        if lo.is_finite() {
            ratio = ratio.max(hi / lo);
        }
    }
    Ok(2.0 * ratio)
}
