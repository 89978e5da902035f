//! Solvers: max-flow, roof duality for binary energies, and expansion moves
//! for multilabel energies with optional pre-processing of each move.

mod binary;
mod expansion;
mod maxflow;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use binary::{qpbo, solve_binary_submodular, BinaryPartialSolution};
pub use expansion::{
    alpha_expansion, bruteforce_solve, direct_multilabel_preprocess_solve, expansion_step, solve,
    solve_with_exact_remainder, ExpansionConfig, SolveConfig,
};
pub use maxflow::FlowNetwork;

use crate::bounds::BoundCertificate;
use crate::energy::{Labeling, PartialLabeling};
use crate::error::Error;
use crate::preprocess::PreprocessResult;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Plain expansion moves.
    Expansion,
    /// Expansion moves with pre-processing of every binary move.
    ExpansionPre,
    /// Pre-process the multilabel energy, then expansion on the rest.
    MultilabelPre,
    /// Pre-process the multilabel energy, then solve the rest exhaustively.
    PreExact,
    /// Exhaustive search.
    Bruteforce,
}

impl Method {
    pub const ALL: [Method; 5] =
        [Method::Expansion, Method::ExpansionPre, Method::MultilabelPre, Method::PreExact, Method::Bruteforce];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Expansion => "expansion",
            Method::ExpansionPre => "expansion-pre",
            Method::MultilabelPre => "multilabel-pre",
            Method::PreExact => "pre-exact",
            Method::Bruteforce => "bruteforce",
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

    fn from_str(s: &str) -> Result<Self, Error> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverUsed {
    None,
    MaxFlow,
    Qpbo,
}

/// One energy sample of a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub time_s: f64,
    pub energy: f64,
}

/// Comparison of pre-processing fixes with the move's optimal labels.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditCounts {
    /// Fixed variables whose optimal label is known.
    pub with_truth: usize,
    /// Of those, how many were fixed to it.
    pub correct: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub alpha: usize,
    pub solver: SolverUsed,
    /// Binary variables in the move.
    pub variables: usize,
    pub fixed_by_pre: usize,
    /// Variables roof duality left undecided.
    pub unlabeled: usize,
    pub energy_before: f64,
    /// Energy of the move's proposal, adopted or not.
    pub energy_proposed: f64,
    pub adopted: bool,
    pub audit: Option<AuditCounts>,
}

impl StepStats {
    pub fn preprocessed_fraction(&self) -> f64 {
        if self.variables == 0 {
            0.0
        } else {
            self.fixed_by_pre as f64 / self.variables as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceReport {
    pub method: Method,
    pub labeling: Labeling,
    pub energy: f64,
    pub trace: Vec<TracePoint>,
    pub epochs: usize,
    pub steps: Vec<StepStats>,
    pub certificates: Vec<BoundCertificate>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub preprocess: Option<PreprocessResult>,
    /// Fraction of variables fixed by pre-processing (pooled over moves).
    pub labeled_fraction: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub wall_time_s: f64,
}

/// `(precision, recall)` of `fixed` against `truth` on the same binary problem.
///
/// Recall is `|fixed| / |variables|`. Precision counts only fixed variables
/// whose optimal label is known and is absent when there are none.
pub fn precision_recall(truth: &BinaryPartialSolution, fixed: &PartialLabeling) -> (Option<f64>, f64) {
    let counts = audit(truth, fixed);
    let n = truth.states.len();
    let recall = if n == 0 { 0.0 } else { fixed.len() as f64 / n as f64 };
    let precision = (counts.with_truth > 0).then(|| counts.correct as f64 / counts.with_truth as f64);
    (precision, recall)
}

pub(crate) fn audit(truth: &BinaryPartialSolution, fixed: &PartialLabeling) -> AuditCounts {
    let mut c = AuditCounts::default();
    for (i, l) in fixed.iter() {
        if let Some(t) = truth.states[i] {
            c.with_truth += 1;
            if t == l {
                c.correct += 1;
            }
        }
    }
    c
}

/// Wall clock that can leave out bookkeeping work (such as audits).
#[derive(Clone, Copy, Debug)]
pub(crate) struct RunClock {
    start: Instant,
    excluded: Duration,
}

impl RunClock {
    pub(crate) fn start() -> Self {
        RunClock { start: Instant::now(), excluded: Duration::ZERO }
    }

    pub(crate) fn exclude(&mut self, d: Duration) {
        self.excluded += d;
    }

    pub(crate) fn elapsed_s(&self) -> f64 {
        self.start.elapsed().saturating_sub(self.excluded).as_secs_f64()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precision_and_recall() {
        let truth = BinaryPartialSolution { states: vec![Some(0), Some(1), None, Some(1)] };
        let (p, r) = precision_recall(&truth, &PartialLabeling::new());
        assert_eq!(p, None);
        assert_eq!(r, 0.0);
        let fixed: PartialLabeling = [(0, 0), (1, 0), (2, 1)].into_iter().collect();
        let (p, r) = precision_recall(&truth, &fixed);
        assert_eq!(p, Some(0.5));
        assert_eq!(r, 0.75);
        let all: PartialLabeling = [(0, 0), (1, 1), (3, 1)].into_iter().collect();
        assert_eq!(precision_recall(&BinaryPartialSolution { states: vec![Some(0), Some(1), Some(0), Some(1)] }, &all).0, Some(1.0));
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.name()));
        }
        assert!("graphcut".parse::<Method>().is_err());
    }
}
