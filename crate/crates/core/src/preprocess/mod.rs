//! Discriminative pre-processing: decide per variable whether a label is
//! (probably) persistent, and fix it before inference.
//!
//! A candidate `x_i = ℓ` is accepted when a lower bound on the `q`-mass of the
//! neighbor configurations under which `ℓ` strictly wins reaches `κ`, and the
//! upper bound `δ̄_i` on the energy it can cost stays within `ε`.

mod tables;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use tables::MinTables;

use crate::energy::{EnergyFunction, PartialLabeling};
use crate::error::{Error, Result};
use crate::marginals::{MarginalSet, QMode};
use crate::oracle::Oracle;
use crate::DEFAULT_TOL;

/// Largest neighborhood the exact check will enumerate.
pub const EXACT_CHECK_CAP: u128 = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckMode {
    /// Enumerate the neighborhood and compute the criterion mass exactly.
    Exact,
    /// Use the factorized lower bound over admissible labels.
    Approx,
}

impl std::str::FromStr for CheckMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(CheckMode::Exact),
            "approx" => Ok(CheckMode::Approx),
            _ => Err(Error::Config(format!("unknown check mode '{s}' (exact|approx)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub kappa: f64,
    pub tau: usize,
    /// `f64::INFINITY` disables the gate; serialized as `"inf"`.
    #[serde(with = "crate::serde_inf")]
    pub epsilon: f64,
    pub q_mode: QMode,
    pub check_mode: CheckMode,
    pub tol: f64,
    /// Only consider this label as a candidate (used for the keep-label
    /// variant inside expansion moves).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub only_label: Option<usize>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            kappa: 0.8,
            tau: 3,
            epsilon: f64::INFINITY,
            q_mode: QMode::Unary,
            check_mode: CheckMode::Approx,
            tol: DEFAULT_TOL,
            only_label: None,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.kappa) {
            return Err(Error::Config(format!("kappa must lie in [0, 1], got {}", self.kappa)));
        }
        if self.tau == 0 {
            return Err(Error::Config("tau must be at least 1".into()));
        }
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return Err(Error::Config(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return Err(Error::Config(format!("tol must be finite and >= 0, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreprocessResult {
    /// `x̂_S`.
    pub fixed: PartialLabeling,
    /// `(node, label)` in the order the fixes were made.
    pub order: Vec<(usize, usize)>,
    /// `δ̄_i` per fix, aligned with `order`.
    pub delta_bars: Vec<f64>,
    /// Accepted criterion value per fix, aligned with `order`.
    pub lb_values: Vec<f64>,
    pub iterations_used: usize,
    pub candidates_tested: usize,
    /// Fixes where a later label of the same node would also have passed.
    pub multi_accept_events: usize,
    #[serde(with = "crate::serde_inf")]
    pub epsilon: f64,
    pub wall_time_s: f64,
}

impl PreprocessResult {
    pub fn additive_slack(&self) -> f64 {
        self.delta_bars.iter().sum()
    }

    pub fn num_fixed(&self) -> usize {
        self.fixed.len()
    }
}

/// Outcome of testing one candidate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub accept: bool,
    pub lower_bound: f64,
    pub delta_bar: f64,
}

pub fn build_min_tables(e: &EnergyFunction) -> MinTables {
    MinTables::build(e)
}

/// `γ_i(ℓ) + Σ_k μ_ik(ℓ)` over all neighbors.
fn local_total(e: &EnergyFunction, t: &MinTables, i: usize, ell: usize) -> f64 {
    let base = e.adjacency_offset(i);
    (0..e.degree(i)).fold(t.gamma(i, ell), |acc, k| acc + t.mu(base + k, ell))
}

/// Labels `λ` of each neighbor `j` (in adjacency order) such that every
/// neighbor configuration with `z_j = λ` makes `ℓ` a strict winner at `i`.
pub fn admissible_labels(e: &EnergyFunction, t: &MinTables, i: usize, ell: usize, tol: f64) -> Vec<Vec<usize>> {
    let base = e.adjacency_offset(i);
    let d = e.degree(i);
    let gamma = t.gamma(i, ell);
    e.neighbors(i)
        .iter()
        .enumerate()
        .map(|(k, nb)| {
            let h = base + k;
            let rest: f64 = (0..d).filter(|&m| m != k).map(|m| t.mu(base + m, ell)).sum();
            (0..e.label_count(nb.node))
                .filter(|&lambda| gamma + t.nu(h, ell, lambda) + rest > tol)
                .collect()
        })
        .collect()
}

/// `1 − Π_j (1 − Q_j)`, a lower bound on the criterion mass, where `Q_j` is the
/// `q_j`-mass of `j`'s admissible labels.
///
/// This equals the telescoped union bound `Σ_j Q_j Π_{k≺j} (1 − Q_k)` for any
/// neighbor order.
pub fn criterion_lower_bound(e: &EnergyFunction, t: &MinTables, i: usize, ell: usize, q: &MarginalSet, tol: f64) -> f64 {
    lower_bound_given_total(e, t, i, ell, q, tol, local_total(e, t, i, ell))
}

fn lower_bound_given_total(
    e: &EnergyFunction,
    t: &MinTables,
    i: usize,
    ell: usize,
    q: &MarginalSet,
    tol: f64,
    total: f64,
) -> f64 {
    if e.label_count(i) == 1 {
        return 1.0;
    }
    if e.degree(i) == 0 {
        return if t.gamma(i, ell) > tol { 1.0 } else { 0.0 };
    }
    let base = e.adjacency_offset(i);
    let mut miss = 1.0;
    for (k, nb) in e.neighbors(i).iter().enumerate() {
        let h = base + k;
        let without = total - t.mu(h, ell);
        let (mut inside, mut all) = (0.0, 0.0);
        for (&p, &nu) in q.node(nb.node).iter().zip(t.nu_row(h, ell)) {
            all += p;
            if without + nu > tol {
                inside += p;
            }
        }
        let qj = if all > 0.0 { inside / all } else { 0.0 };
        miss *= 1.0 - qj;
    }
    1.0 - miss
}

/// `δ̄_i = max(0, −(γ_i(ℓ) + Σ_j μ_ij(ℓ)))`, an upper bound on the worst-case
/// energy increase from committing `i` to `ℓ`.
pub fn delta_upper_bound(e: &EnergyFunction, t: &MinTables, i: usize, ell: usize) -> f64 {
    if e.label_count(i) == 1 {
        return 0.0;
    }
    (-local_total(e, t, i, ell)).max(0.0)
}

pub fn decide_persistent(
    e: &EnergyFunction,
    t: &MinTables,
    i: usize,
    ell: usize,
    q: &MarginalSet,
    config: &PreprocessConfig,
) -> Result<Decision> {
    let total = local_total(e, t, i, ell);
    let delta_bar = if e.label_count(i) == 1 { 0.0 } else { (-total).max(0.0) };
    let lower_bound = match config.check_mode {
        CheckMode::Approx => lower_bound_given_total(e, t, i, ell, q, config.tol, total),
        CheckMode::Exact => Oracle::new(EXACT_CHECK_CAP, config.tol).exact_criterion_mass(e, i, ell, q)?,
    };
    Ok(Decision { accept: lower_bound >= config.kappa && delta_bar <= config.epsilon, lower_bound, delta_bar })
}

/// Decisions for every candidate `(i, ℓ)` with nothing fixed, in scan order.
pub fn screen_candidates(e: &EnergyFunction, config: &PreprocessConfig) -> Result<Vec<((usize, usize), Decision)>> {
    config.validate()?;
    let t = MinTables::build(e);
    let q = config.q_mode.build(e);
    let mut out = Vec::new();
    for i in 0..e.num_nodes() {
        for ell in candidate_labels(e, i, config) {
            out.push(((i, ell), decide_persistent(e, &t, i, ell, &q, config)?));
        }
    }
    Ok(out)
}

fn candidate_labels(e: &EnergyFunction, i: usize, config: &PreprocessConfig) -> std::ops::Range<usize> {
    let l = e.label_count(i);
    match config.only_label {
        Some(a) if a < l => a..a + 1,
        Some(_) => 0..0,
        None => 0..l,
    }
}

/// The construction loop: up to `τ` passes over unfixed candidates in
/// ascending `(node, label)` order, fixing the first accepted label per node.
pub fn run_preprocess(e: &EnergyFunction, config: &PreprocessConfig) -> Result<PreprocessResult> {
    config.validate()?;
    let start = Instant::now();
    let mut tables = MinTables::build(e);
    let mut q = config.q_mode.build(e);
    let mut is_fixed = vec![false; e.num_nodes()];
    let mut order = Vec::new();
    let mut delta_bars = Vec::new();
    let mut lb_values = Vec::new();
    let mut candidates_tested = 0;
    let mut multi_accept_events = 0;
    let mut iterations_used = 0;

    for _ in 0..config.tau {
        iterations_used += 1;
        let mut progress = false;
        for i in 0..e.num_nodes() {
            if is_fixed[i] {
                continue;
            }
            let labels = candidate_labels(e, i, config);
            for ell in labels.clone() {
                candidates_tested += 1;
                let d = decide_persistent(e, &tables, i, ell, &q, config)?;
                if !d.accept {
                    continue;
                }
                for other in ell + 1..labels.end {
                    if decide_persistent(e, &tables, i, other, &q, config)?.accept {
                        multi_accept_events += 1;
                        break;
                    }
                }
                is_fixed[i] = true;
                order.push((i, ell));
                delta_bars.push(d.delta_bar);
                lb_values.push(d.lower_bound);
                tables.fix(e, i, ell);
                q.collapse(i, ell);
                progress = true;
                break;
            }
        }
        if !progress {
            break;
        }
    }

    Ok(PreprocessResult {
        fixed: order.iter().copied().collect(),
        order,
        delta_bars,
        lb_values,
        iterations_used,
        candidates_tested,
        multi_accept_events,
        epsilon: config.epsilon,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::fixtures::*;
    use crate::energy::{EnergyBuilder, Labeling};
    use crate::marginals::{lbp_q, uniform_q, unary_q};
    use crate::oracle::Odometer;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(kappa: f64, q_mode: QMode, check_mode: CheckMode) -> PreprocessConfig {
        PreprocessConfig { kappa, q_mode, check_mode, ..PreprocessConfig::default() }
    }

    #[test]
    fn admissible_on_t2() {
        let e = t2();
        let t = MinTables::build(&e);
        assert_eq!(admissible_labels(&e, &t, 0, 0, DEFAULT_TOL), vec![vec![0]]);
        assert_eq!(admissible_labels(&e, &t, 1, 0, DEFAULT_TOL), vec![vec![0, 1]]);
    }

    #[test]
    fn flat_node_admits_nothing() {
        let mut b = EnergyBuilder::new(vec![2, 3]);
        b.add_edge(0, 1, &[0.0; 6]).unwrap();
        let e = b.build().unwrap();
        let t = MinTables::build(&e);
        assert_eq!(admissible_labels(&e, &t, 0, 1, DEFAULT_TOL), vec![Vec::<usize>::new()]);
        assert_eq!(criterion_lower_bound(&e, &t, 0, 1, &uniform_q(&e), DEFAULT_TOL), 0.0);
    }

    #[test]
    fn lower_bound_on_t2_matches_exact_mass() {
        let e = t2();
        let t = MinTables::build(&e);
        let q = unary_q(&e);
        let lb = criterion_lower_bound(&e, &t, 0, 0, &q, DEFAULT_TOL);
        let a = 1.0 / (1.0 + (-2.0f64).exp());
        assert!((lb - a).abs() < 1e-12);
        let exact = Oracle::default().exact_criterion_mass(&e, 0, 0, &q).unwrap();
        assert!((lb - exact).abs() < 1e-12);
    }

    #[test]
    fn union_bound_arithmetic() {
        // star: centre 0 with two leaves; Q = (0.6, 0.5) via custom marginals
        let mut b = EnergyBuilder::new(vec![2, 2, 2]);
        b.add_edge(0, 1, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        b.add_edge(0, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        b.set_unary(0, &[0.0, 0.5]).unwrap();
        let e = b.build().unwrap();
        let t = MinTables::build(&e);
        // γ=0.5, μ=−1 each: A_j = {0} for both neighbors
        let q = MarginalSet::from_probs(vec![vec![0.5, 0.5], vec![0.6, 0.4], vec![0.5, 0.5]]).unwrap();
        let lb = criterion_lower_bound(&e, &t, 0, 0, &q, DEFAULT_TOL);
        assert!((lb - 0.8).abs() < 1e-12);
    }

    #[test]
    fn delta_bar_examples() {
        let e = t2();
        let t = MinTables::build(&e);
        assert_eq!(delta_upper_bound(&e, &t, 0, 0), 0.0);
        let iso = EnergyFunction::from_unaries(&[vec![3.0, 0.0]]).unwrap();
        let t = MinTables::build(&iso);
        assert_eq!(delta_upper_bound(&iso, &t, 0, 0), 3.0);
        assert_eq!(delta_upper_bound(&iso, &t, 0, 1), 0.0);
    }

    #[test]
    fn decisions_on_t2() {
        let e = t2();
        let t = MinTables::build(&e);
        let c = cfg(0.8, QMode::Unary, CheckMode::Approx);
        let d = decide_persistent(&e, &t, 0, 0, &unary_q(&e), &c).unwrap();
        assert!(d.accept);
        assert!((d.lower_bound - 0.8808).abs() < 1e-4);
        let d = decide_persistent(&e, &t, 0, 0, &uniform_q(&e), &c).unwrap();
        assert!(!d.accept);
        assert_eq!(d.lower_bound, 0.5);
        let c0 = cfg(0.0, QMode::Uniform, CheckMode::Approx);
        for i in 0..2 {
            for ell in 0..2 {
                assert!(decide_persistent(&e, &t, i, ell, &uniform_q(&e), &c0).unwrap().accept);
            }
        }
    }

    #[test]
    fn epsilon_gate_rejects_costly_fixes() {
        let iso = EnergyFunction::from_unaries(&[vec![3.0, 0.0]]).unwrap();
        let t = MinTables::build(&iso);
        let mut c = cfg(0.0, QMode::Uniform, CheckMode::Approx);
        c.epsilon = 1.0;
        assert!(!decide_persistent(&iso, &t, 0, 0, &uniform_q(&iso), &c).unwrap().accept);
        assert!(decide_persistent(&iso, &t, 0, 1, &uniform_q(&iso), &c).unwrap().accept);
    }

    #[test]
    fn run_on_t2_fixes_both_nodes() {
        let e = t2();
        let mut c = cfg(0.8, QMode::Unary, CheckMode::Approx);
        c.tau = 3;
        let r = run_preprocess(&e, &c).unwrap();
        assert_eq!(r.fixed, [(0, 0), (1, 0)].into_iter().collect());
        assert_eq!(r.delta_bars, vec![0.0, 0.0]);
        assert_eq!(r.delta_bars.len(), r.num_fixed());
        assert_eq!(r.iterations_used, 2);
    }

    #[test]
    fn zero_energy_fixes_nothing() {
        let mut b = EnergyBuilder::new(vec![2, 3, 2]);
        b.add_edge(0, 1, &[0.0; 6]).unwrap();
        b.add_edge(1, 2, &[0.0; 6]).unwrap();
        let e = b.build().unwrap();
        for mode in [CheckMode::Approx, CheckMode::Exact] {
            let r = run_preprocess(&e, &cfg(0.5, QMode::Uniform, mode)).unwrap();
            assert!(r.fixed.is_empty());
            assert_eq!(r.iterations_used, 1);
        }
    }

    #[test]
    fn single_label_nodes_are_fixed() {
        let mut b = EnergyBuilder::new(vec![1, 2]);
        b.add_edge(0, 1, &[1.0, -1.0]).unwrap();
        let e = b.build().unwrap();
        let r = run_preprocess(&e, &cfg(1.0, QMode::Uniform, CheckMode::Approx)).unwrap();
        assert_eq!(r.fixed.get(0), Some(0));
        assert_eq!(r.fixed.get(1), Some(1));
    }

    #[test]
    fn only_label_restricts_candidates() {
        let e = t2();
        let mut c = cfg(0.0, QMode::Uniform, CheckMode::Approx);
        c.only_label = Some(1);
        let r = run_preprocess(&e, &c).unwrap();
        assert_eq!(r.fixed, [(0, 1), (1, 1)].into_iter().collect());
        c.only_label = None;
        let r = run_preprocess(&e, &c).unwrap();
        assert_eq!(r.multi_accept_events, 2);
    }

    #[test]
    fn config_validation() {
        let mut c = PreprocessConfig::default();
        assert!(c.validate().is_ok());
        c.kappa = 1.5;
        assert!(c.validate().is_err());
        c = PreprocessConfig { tau: 0, ..PreprocessConfig::default() };
        assert!(c.validate().is_err());
        c = PreprocessConfig { epsilon: -1.0, ..PreprocessConfig::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let c = PreprocessConfig { q_mode: QMode::Lbp { iterations: 3 }, ..PreprocessConfig::default() };
        let s = serde_json::to_string(&c).unwrap();
        assert!(s.contains("\"inf\""));
        assert_eq!(serde_json::from_str::<PreprocessConfig>(&s).unwrap(), c);
        let c = PreprocessConfig { epsilon: 0.25, ..c };
        let back: PreprocessConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn exact_mode_refuses_huge_neighborhoods() {
        let n = 22;
        let mut b = EnergyBuilder::new(vec![2; n]);
        for j in 1..n {
            b.add_edge(0, j, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        }
        let e = b.build().unwrap();
        let r = run_preprocess(&e, &cfg(0.5, QMode::Uniform, CheckMode::Exact));
        assert!(matches!(r, Err(Error::TooLarge { .. })));
    }

    fn small_instance(rng: &mut ChaCha8Rng) -> EnergyFunction {
        let n = rng.gen_range(1..=7);
        random_energy(rng, n, 3, 0.5)
    }

    fn modes() -> [QMode; 3] {
        [QMode::Uniform, QMode::Unary, QMode::Lbp { iterations: 2 }]
    }

    proptest! {
        #[test]
        fn admissible_sets_lie_inside_hat_l(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = small_instance(&mut rng);
            let t = MinTables::build(&e);
            let oracle = Oracle::default();
            for i in 0..e.num_nodes() {
                for ell in 0..e.label_count(i) {
                    let hat: std::collections::BTreeSet<Vec<usize>> = oracle.exact_hat_l(&e, i, ell).unwrap().into_iter().collect();
                    let adm = admissible_labels(&e, &t, i, ell, DEFAULT_TOL);
                    let radices: Vec<usize> = e.neighbors(i).iter().map(|nb| e.label_count(nb.node)).collect();
                    let mut od = Odometer::new(radices);
                    while let Some(z) = od.advance() {
                        if adm.iter().zip(z).any(|(a, l)| a.contains(l)) {
                            prop_assert!(hat.contains(z), "node {} label {} config {:?}", i, ell, z);
                        }
                    }
                }
            }
        }

        #[test]
        fn lower_bound_never_exceeds_exact_mass(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = small_instance(&mut rng);
            let t = MinTables::build(&e);
            for mode in modes() {
                let q = mode.build(&e);
                for i in 0..e.num_nodes() {
                    for ell in 0..e.label_count(i) {
                        let lb = criterion_lower_bound(&e, &t, i, ell, &q, DEFAULT_TOL);
                        let m = Oracle::default().exact_criterion_mass(&e, i, ell, &q).unwrap();
                        prop_assert!((0.0..=1.0).contains(&lb));
                        prop_assert!(lb <= m + 1e-9, "lb {} > mass {}", lb, m);
                    }
                }
            }
        }

        #[test]
        fn delta_bar_bounds_exact_delta(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = small_instance(&mut rng);
            let t = MinTables::build(&e);
            for i in 0..e.num_nodes() {
                for ell in 0..e.label_count(i) {
                    let d = Oracle::default().exact_delta(&e, i, ell).unwrap();
                    let db = delta_upper_bound(&e, &t, i, ell);
                    prop_assert!(db >= 0.0);
                    prop_assert!(db + 1e-9 >= d);
                }
            }
        }

        #[test]
        fn accepted_sets_shrink_as_kappa_grows(seed in any::<u64>(), lo in 0.0f64..1.0, hi in 0.0f64..1.0) {
            let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = small_instance(&mut rng);
            for mode in modes() {
                let a = screen_candidates(&e, &cfg(lo, mode, CheckMode::Approx)).unwrap();
                let b = screen_candidates(&e, &cfg(hi, mode, CheckMode::Approx)).unwrap();
                for (x, y) in a.iter().zip(&b) {
                    prop_assert!(!y.1.accept || x.1.accept);
                }
            }
        }

        // switching the fixed variables in fix order costs at most δ̄ each
        #[test]
        fn fixed_part_costs_at_most_the_slack(seed in any::<u64>(), kappa in 0.3f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = small_instance(&mut rng);
            let mode = modes()[rng.gen_range(0..3)];
            let r = run_preprocess(&e, &cfg(kappa, mode, CheckMode::Approx)).unwrap();
            let slack = r.additive_slack();
            let mut od = Odometer::new(e.label_counts().to_vec());
            while let Some(x) = od.advance() {
                let hat = r.fixed.substitute_into(&Labeling::new(x.to_vec()));
                let base = e.energy(&hat);
                // x ranges over every (x'_S, y) pair
                prop_assert!(base <= e.energy(x) + slack + 1e-9);
            }
        }

        #[test]
        fn run_is_deterministic_and_never_refixes(seed in any::<u64>(), kappa in 0.0f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = small_instance(&mut rng);
            let c = PreprocessConfig { kappa, tau: 4, ..PreprocessConfig::default() };
            let a = run_preprocess(&e, &c).unwrap();
            let b = run_preprocess(&e, &c).unwrap();
            prop_assert_eq!(&a.fixed, &b.fixed);
            prop_assert_eq!(&a.delta_bars, &b.delta_bars);
            prop_assert_eq!(a.order.len(), a.fixed.len());
            prop_assert!(a.fixed.len() <= e.num_nodes());
            prop_assert!(a.delta_bars.iter().all(|&d| d >= 0.0));
        }

        #[test]
        fn finite_epsilon_caps_every_delta_bar(seed in any::<u64>(), eps in 0.0f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = small_instance(&mut rng);
            let c = PreprocessConfig { kappa: 0.5, epsilon: eps, ..PreprocessConfig::default() };
            let r = run_preprocess(&e, &c).unwrap();
            prop_assert!(r.delta_bars.iter().all(|&d| d <= eps));
        }

        #[test]
        fn exact_kappa_one_fixes_an_autarky(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = small_instance(&mut rng);
            let c = PreprocessConfig { kappa: 1.0, q_mode: QMode::Uniform, check_mode: CheckMode::Exact, tau: 10, ..PreprocessConfig::default() };
            let r = run_preprocess(&e, &c).unwrap();
            let o = Oracle::default();
            prop_assert!(o.is_autarky(&e, &r.fixed).unwrap());
            prop_assert!(o.is_persistent(&e, &r.fixed).unwrap());
        }

        #[test]
        fn lbp_marginals_keep_the_bound(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = small_instance(&mut rng);
            let t = MinTables::build(&e);
            let q = lbp_q(&e, 3, 0.3);
            for i in 0..e.num_nodes() {
                for ell in 0..e.label_count(i) {
                    let lb = criterion_lower_bound(&e, &t, i, ell, &q, DEFAULT_TOL);
                    prop_assert!(lb <= Oracle::default().exact_criterion_mass(&e, i, ell, &q).unwrap() + 1e-9);
                }
            }
        }
    }
}
