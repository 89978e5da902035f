use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::binary::{qpbo, solve_binary_submodular, BinaryPartialSolution};
use super::{audit, AuditCounts, InferenceReport, Method, RunClock, SolverUsed, StepStats, TracePoint};
use crate::bounds::{expansion_beta, per_instance_additive, worst_case_additive, worst_case_multiplicative};
use crate::energy::{EnergyFunction, Labeling, PartialLabeling};
use crate::error::{Error, Result};
use crate::oracle::Oracle;
use crate::preprocess::{run_preprocess, PreprocessConfig};
use crate::DEFAULT_TOL;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpansionConfig {
    pub max_epochs: usize,
    /// Pre-processing applied to every binary move.
    pub pre: Option<PreprocessConfig>,
    /// Only adopt moves that lower the energy.
    pub reject_uphill: bool,
    /// After the first epoch, only test the keep-current label for persistency.
    pub keep_label_only_after_epoch1: bool,
    /// Compare each move's fixes with the move's optimum (excluded from timing).
    pub audit: bool,
    pub tol: f64,
}

impl Default for ExpansionConfig {
    fn default() -> Self {
        ExpansionConfig {
            max_epochs: 5,
            pre: None,
            reject_uphill: false,
            keep_label_only_after_epoch1: false,
            audit: false,
            tol: DEFAULT_TOL,
        }
    }
}

/// Solves a binary energy: exactly when submodular, otherwise by roof duality
/// with undecided variables at 0.
fn solve_binary(e: &EnergyFunction, tol: f64) -> Result<(Labeling, SolverUsed, usize)> {
    if e.num_nodes() == 0 {
        return Ok((Labeling::zeros(0), SolverUsed::None, 0));
    }
    if e.is_submodular(tol)? {
        Ok((solve_binary_submodular(e, tol)?, SolverUsed::MaxFlow, 0))
    } else {
        let p = qpbo(e)?;
        let unlabeled = p.states.len() - p.num_labeled();
        Ok((p.complete(0), SolverUsed::Qpbo, unlabeled))
    }
}

/// Optimal labels of a binary move: all of them when submodular, the roof
/// duality labels otherwise.
fn ground_truth(e: &EnergyFunction, tol: f64) -> Result<BinaryPartialSolution> {
    if e.is_submodular(tol)? {
        let x = solve_binary_submodular(e, tol)?;
        Ok(BinaryPartialSolution { states: x.iter().map(|&l| Some(l)).collect() })
    } else {
        qpbo(e)
    }
}

/// One expansion move towards `alpha`.
///
/// Returns the labeling to continue from (the proposal when adopted, else
/// `current`) and the move's statistics. A proposal is adopted when it lowers
/// the energy by more than `tol`; with pre-processing and without
/// `reject_uphill`, a proposal that raises the energy is adopted as well.
pub fn expansion_step(
    e: &EnergyFunction,
    current: &Labeling,
    alpha: usize,
    pre: Option<&PreprocessConfig>,
    config: &ExpansionConfig,
) -> Result<(Labeling, StepStats, f64)> {
    let sub = e.expansion_subproblem(current, alpha)?;
    let before = e.energy(current);
    let mut fixed = PartialLabeling::new();
    if let Some(p) = pre {
        fixed = run_preprocess(&sub.energy, p)?.fixed;
    }
    let (binary, solver, unlabeled) = if fixed.is_empty() {
        solve_binary(&sub.energy, config.tol)?
    } else {
        let cond = sub.energy.condition(&fixed)?;
        let (rest, solver, unlabeled) = solve_binary(&cond.energy, config.tol)?;
        (cond.complete(&rest), solver, unlabeled)
    };
    let proposal = sub.apply(&binary);
    let proposed = e.energy(&proposal);

    let mut audit_time = 0.0;
    let mut counts: Option<AuditCounts> = None;
    if config.audit && pre.is_some() {
        let t = Instant::now();
        counts = Some(audit(&ground_truth(&sub.energy, config.tol)?, &fixed));
        audit_time = t.elapsed().as_secs_f64();
    }

    let downhill = proposed < before - config.tol;
    let uphill = pre.is_some() && !config.reject_uphill && proposed > before + config.tol;
    let adopted = downhill || uphill;
    let stats = StepStats {
        alpha,
        solver,
        variables: sub.nodes.len(),
        fixed_by_pre: fixed.len(),
        unlabeled,
        energy_before: before,
        energy_proposed: proposed,
        adopted,
        audit: counts,
    };
    let next = if adopted { proposal } else { current.clone() };
    Ok((next, stats, audit_time))
}

/// Expansion moves from the unary argmin, visiting labels in ascending order
/// each epoch, until an epoch adopts nothing or `max_epochs` is reached.
pub fn alpha_expansion(e: &EnergyFunction, config: &ExpansionConfig) -> Result<InferenceReport> {
    let method = if config.pre.is_some() { Method::ExpansionPre } else { Method::Expansion };
    alpha_expansion_from(e, e.unary_argmin(), config, method)
}

fn alpha_expansion_from(
    e: &EnergyFunction,
    init: Labeling,
    config: &ExpansionConfig,
    method: Method,
) -> Result<InferenceReport> {
    if config.max_epochs == 0 {
        return Err(Error::Config("max_epochs must be at least 1".into()));
    }
    if let Some(p) = &config.pre {
        p.validate()?;
    }
    let mut clock = RunClock::start();
    let mut x = init;
    x.validate(e)?;
    let mut trace = vec![TracePoint { time_s: clock.elapsed_s(), energy: e.energy(&x) }];
    let mut steps = Vec::new();
    let mut epochs = 0;
    for epoch in 0..config.max_epochs {
        epochs += 1;
        let pre = config.pre.clone().map(|mut p| {
            if config.keep_label_only_after_epoch1 && epoch > 0 {
                p.only_label = Some(0);
            }
            p
        });
        let mut changed = false;
        for alpha in 0..e.max_labels() {
            let (next, stats, audit_time) = expansion_step(e, &x, alpha, pre.as_ref(), config)?;
            clock.exclude(std::time::Duration::from_secs_f64(audit_time));
            changed |= stats.adopted;
            x = next;
            trace.push(TracePoint { time_s: clock.elapsed_s(), energy: e.energy(&x) });
            steps.push(stats);
        }
        if !changed {
            break;
        }
    }

    let energy = e.evaluate(&x)?;
    let (mut labeled_fraction, mut precision, mut recall) = (None, None, None);
    if config.pre.is_some() {
        let vars: usize = steps.iter().map(|s| s.variables).sum();
        let fixed: usize = steps.iter().map(|s| s.fixed_by_pre).sum();
        let frac = if vars == 0 { 0.0 } else { fixed as f64 / vars as f64 };
        labeled_fraction = Some(frac);
        recall = Some(frac);
        if config.audit {
            let (with_truth, correct) = steps
                .iter()
                .filter_map(|s| s.audit)
                .fold((0, 0), |(w, c), a| (w + a.with_truth, c + a.correct));
            precision = (with_truth > 0).then(|| correct as f64 / with_truth as f64);
        }
    }
    Ok(InferenceReport {
        method,
        labeling: x,
        energy,
        trace,
        epochs,
        steps,
        certificates: Vec::new(),
        preprocess: None,
        labeled_fraction,
        precision,
        recall,
        wall_time_s: clock.elapsed_s(),
    })
}

/// Fraction of fixes agreeing with the unique minimizer, when the instance is
/// small enough to enumerate and its minimizer is unique.
fn oracle_precision(e: &EnergyFunction, fixed: &PartialLabeling) -> Option<f64> {
    if fixed.is_empty() || e.labeling_space().is_none_or(|s| s > 1 << 20) {
        return None;
    }
    let set = Oracle::new(1 << 20, DEFAULT_TOL).brute_force_minimize(e).ok()?;
    if set.minimizers.len() != 1 {
        return None;
    }
    let m = &set.minimizers[0];
    Some(fixed.iter().filter(|&(i, l)| m[i] == l).count() as f64 / fixed.len() as f64)
}

/// Pre-processes the multilabel energy, then runs plain expansion moves on
/// the remaining variables.
///
/// With a finite `ε` and metric pairwise terms the report carries the
/// multiplicative certificate.
pub fn direct_multilabel_preprocess_solve(
    e: &EnergyFunction,
    pre: &PreprocessConfig,
    expansion: &ExpansionConfig,
) -> Result<InferenceReport> {
    let mut clock = RunClock::start();
    let result = run_preprocess(e, pre)?;
    let cond = e.condition(&result.fixed)?;
    let plain = ExpansionConfig { pre: None, ..expansion.clone() };
    let inner = if cond.energy.num_nodes() == 0 {
        None
    } else {
        Some(alpha_expansion(&cond.energy, &plain)?)
    };
    let pre_time = result.wall_time_s;
    let (labeling, trace, epochs, steps) = match inner {
        Some(r) => {
            let trace = r
                .trace
                .iter()
                .map(|p| TracePoint { time_s: pre_time + p.time_s, energy: p.energy + cond.constant })
                .collect();
            (cond.complete(&r.labeling), trace, r.epochs, r.steps)
        }
        None => {
            let x = cond.complete(&[]);
            let energy = e.energy(&x);
            (x, vec![TracePoint { time_s: clock.elapsed_s(), energy }], 0, Vec::new())
        }
    };
    let energy = e.evaluate(&labeling)?;
    let mut certificates = Vec::new();
    if pre.epsilon.is_finite() {
        if let Ok(beta) = expansion_beta(e, pre.tol.max(DEFAULT_TOL)) {
            certificates.push(worst_case_multiplicative(&result, beta, pre.epsilon)?);
        }
    }
    let frac = if e.num_nodes() == 0 { 0.0 } else { result.num_fixed() as f64 / e.num_nodes() as f64 };
    let precision = if expansion.audit {
        let t = Instant::now();
        let p = oracle_precision(e, &result.fixed);
        clock.exclude(t.elapsed());
        p
    } else {
        None
    };
    Ok(InferenceReport {
        method: Method::MultilabelPre,
        labeling,
        energy,
        trace,
        epochs,
        steps,
        certificates,
        preprocess: Some(result),
        labeled_fraction: Some(frac),
        precision,
        recall: Some(frac),
        wall_time_s: clock.elapsed_s(),
    })
}

/// Pre-processes, then minimizes the remaining variables exhaustively, so the
/// solver's own additive bound is zero.
pub fn solve_with_exact_remainder(e: &EnergyFunction, pre: &PreprocessConfig, oracle: &Oracle) -> Result<InferenceReport> {
    let clock = RunClock::start();
    let result = run_preprocess(e, pre)?;
    let cond = e.condition(&result.fixed)?;
    let best = oracle.brute_force_minimize(&cond.energy)?;
    let labeling = cond.complete(&best.minimizers[0]);
    let energy = e.evaluate(&labeling)?;
    let mut certificates = vec![per_instance_additive(&result, 0.0)];
    if pre.epsilon.is_finite() {
        certificates.push(worst_case_additive(&result, 0.0, pre.epsilon)?);
    }
    let frac = if e.num_nodes() == 0 { 0.0 } else { result.num_fixed() as f64 / e.num_nodes() as f64 };
    let wall = clock.elapsed_s();
    Ok(InferenceReport {
        method: Method::PreExact,
        labeling,
        energy,
        trace: vec![TracePoint { time_s: wall, energy }],
        epochs: 0,
        steps: Vec::new(),
        certificates,
        preprocess: Some(result),
        labeled_fraction: Some(frac),
        precision: None,
        recall: Some(frac),
        wall_time_s: wall,
    })
}

pub fn bruteforce_solve(e: &EnergyFunction, oracle: &Oracle) -> Result<InferenceReport> {
    let clock = RunClock::start();
    let best = oracle.brute_force_minimize(e)?;
    let labeling = best.minimizers[0].clone();
    let energy = e.evaluate(&labeling)?;
    let wall = clock.elapsed_s();
    Ok(InferenceReport {
        method: Method::Bruteforce,
        labeling,
        energy,
        trace: vec![TracePoint { time_s: wall, energy }],
        epochs: 0,
        steps: Vec::new(),
        certificates: Vec::new(),
        preprocess: None,
        labeled_fraction: None,
        precision: None,
        recall: None,
        wall_time_s: wall,
    })
}

/// Everything needed to run any [`Method`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    pub method: Method,
    pub pre: PreprocessConfig,
    pub max_epochs: usize,
    pub reject_uphill: bool,
    pub keep_label_only_after_epoch1: bool,
    pub audit: bool,
    pub tol: f64,
    /// Enumeration cap for the exhaustive methods.
    #[serde(with = "cap_as_u64")]
    pub oracle_cap: u128,
}

// Manifests embed this struct under `flatten`, whose buffering cannot carry
// u128, so the cap travels as u64 (saturating).
mod cap_as_u64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u128, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(u64::try_from(*v).unwrap_or(u64::MAX))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u128, D::Error> {
        u64::deserialize(d).map(u128::from)
    }
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            method: Method::Expansion,
            pre: PreprocessConfig::default(),
            max_epochs: 5,
            reject_uphill: false,
            keep_label_only_after_epoch1: false,
            audit: false,
            tol: DEFAULT_TOL,
            oracle_cap: 1 << 24,
        }
    }
}

impl SolveConfig {
    fn expansion(&self, pre: Option<PreprocessConfig>) -> ExpansionConfig {
        ExpansionConfig {
            max_epochs: self.max_epochs,
            pre,
            reject_uphill: self.reject_uphill,
            keep_label_only_after_epoch1: self.keep_label_only_after_epoch1,
            audit: self.audit,
            tol: self.tol,
        }
    }
}

pub fn solve(e: &EnergyFunction, config: &SolveConfig) -> Result<InferenceReport> {
    let oracle = Oracle::new(config.oracle_cap, config.tol);
    match config.method {
        Method::Expansion => alpha_expansion(e, &config.expansion(None)),
        Method::ExpansionPre => alpha_expansion(e, &config.expansion(Some(config.pre.clone()))),
        Method::MultilabelPre => direct_multilabel_preprocess_solve(e, &config.pre, &config.expansion(None)),
        Method::PreExact => solve_with_exact_remainder(e, &config.pre, &oracle),
        Method::Bruteforce => bruteforce_solve(e, &oracle),
    }
}
