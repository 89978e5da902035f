//! Factorized approximations `q(z) = Π_i q_i(z_i)` of the distribution over
//! neighbor configurations.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::energy::{EnergyFunction, Neighbor};
use crate::error::{Error, Result};

/// Per-node categorical distributions, stored back to back.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalSet {
    probs: Vec<f64>,
    offsets: Vec<usize>,
}

impl MarginalSet {
    pub fn from_probs(probs: Vec<Vec<f64>>) -> Result<Self> {
        let mut q = MarginalSet::with_capacity(probs.len(), probs.iter().map(Vec::len).sum());
        for p in &probs {
            q.push(p);
        }
        if !q.is_normalized(1e-9) {
            return Err(Error::Domain("marginals must be non-negative and sum to one".into()));
        }
        Ok(q)
    }

    fn with_capacity(nodes: usize, entries: usize) -> Self {
        let mut offsets = Vec::with_capacity(nodes + 1);
        offsets.push(0);
        MarginalSet { probs: Vec::with_capacity(entries), offsets }
    }

    fn push(&mut self, p: &[f64]) {
        self.probs.extend_from_slice(p);
        self.offsets.push(self.probs.len());
    }

    /// Appends `∝ exp(−cost)`, shifted by the minimum cost so nothing overflows.
    fn push_softmin(&mut self, costs: &[f64]) {
        let lo = costs.iter().copied().fold(f64::INFINITY, f64::min);
        let start = self.probs.len();
        self.probs.extend(costs.iter().map(|&c| (lo - c).exp()));
        let z: f64 = self.probs[start..].iter().sum();
        self.probs[start..].iter_mut().for_each(|v| *v /= z);
        self.offsets.push(self.probs.len());
    }

    #[inline]
    pub fn prob(&self, node: usize, label: usize) -> f64 {
        self.node(node)[label]
    }

    #[inline]
    pub fn node(&self, node: usize) -> &[f64] {
        &self.probs[self.offsets[node]..self.offsets[node + 1]]
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    /// Replaces `q_node` by a point mass on `label`.
    pub fn collapse(&mut self, node: usize, label: usize) {
        let p = &mut self.probs[self.offsets[node]..self.offsets[node + 1]];
        p.iter_mut().for_each(|v| *v = 0.0);
        p[label] = 1.0;
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (0..self.num_nodes()).all(|i| {
            let p = self.node(i);
            p.iter().all(|&v| v >= 0.0 && v.is_finite()) && (p.iter().sum::<f64>() - 1.0).abs() <= tol
        })
    }
}

pub fn uniform_q(e: &EnergyFunction) -> MarginalSet {
    let mut q = MarginalSet::with_capacity(e.num_nodes(), e.label_counts().iter().sum());
    for &l in e.label_counts() {
        q.probs.extend(std::iter::repeat_n(1.0 / l as f64, l));
        q.offsets.push(q.probs.len());
    }
    q
}

/// The initialization of belief propagation: `q_i(ℓ) ∝ exp(−θ_i(ℓ))`.
pub fn unary_q(e: &EnergyFunction) -> MarginalSet {
    let mut q = MarginalSet::with_capacity(e.num_nodes(), e.label_counts().iter().sum());
    for i in 0..e.num_nodes() {
        q.push_softmin(e.unary(i));
    }
    q
}

/// Synchronous min-sum message passing for `iterations` rounds.
///
/// Messages are kept in negative-log form and shifted to a zero minimum after
/// every update; `damping` mixes in the previous round's message. Zero
/// iterations reproduce [`unary_q`] exactly.
pub fn lbp_q(e: &EnergyFunction, iterations: usize, damping: f64) -> MarginalSet {
    // message stored on half-edge h = (i → j) is m_{j→i}, indexed by i's labels
    let n = e.num_nodes();
    let mut offsets = Vec::with_capacity(e.num_half_edges() + 1);
    offsets.push(0);
    for i in 0..n {
        for _ in e.neighbors(i) {
            let last = *offsets.last().unwrap();
            offsets.push(last + e.label_count(i));
        }
    }
    let mut msgs = vec![0.0; *offsets.last().unwrap()];
    let mut next = msgs.clone();
    // reverse[h] = half-edge (j → i) for h = (i → j)
    let reverse: Vec<usize> = (0..n)
        .flat_map(|i| {
            e.neighbors(i).iter().map(move |nb| {
                e.adjacency_offset(nb.node) + e.neighbor_position(nb.node, i).unwrap()
            })
        })
        .collect();

    let belief = |msgs: &[f64], i: usize| -> Vec<f64> {
        let mut b = e.unary(i).to_vec();
        let base = e.adjacency_offset(i);
        for k in 0..e.degree(i) {
            let h = base + k;
            for (l, v) in b.iter_mut().enumerate() {
                *v += msgs[offsets[h] + l];
            }
        }
        b
    };

    for _ in 0..iterations {
        for j in 0..n {
            let bj = belief(&msgs, j);
            let base_j = e.adjacency_offset(j);
            for (k, &nb) in e.neighbors(j).iter().enumerate() {
                let i = nb.node;
                // h_out = (i → j) carries m_{j→i}; exclude m_{i→j} stored on (j → i)
                let h_in = base_j + k;
                let h_out = reverse[h_in];
                let li = e.label_count(i);
                let lj = e.label_count(j);
                let mut lo = f64::INFINITY;
                for zi in 0..li {
                    let mut best = f64::INFINITY;
                    for zj in 0..lj {
                        let c = bj[zj] - msgs[offsets[h_in] + zj] + e.pair_from(i, Neighbor { node: j, edge: nb.edge }, zi, zj);
                        best = best.min(c);
                    }
                    next[offsets[h_out] + zi] = best;
                    lo = lo.min(best);
                }
                for zi in 0..li {
                    let slot = offsets[h_out] + zi;
                    let fresh = next[slot] - lo;
                    next[slot] = (1.0 - damping) * fresh + damping * msgs[slot];
                }
            }
        }
        std::mem::swap(&mut msgs, &mut next);
    }

    let mut q = MarginalSet::with_capacity(n, e.label_counts().iter().sum());
    for i in 0..n {
        q.push_softmin(&belief(&msgs, i));
    }
    q
}

/// How to build `q`: `uniform`, `unary`, or `lbp:K` for `K` message-passing rounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QMode {
    Uniform,
    Unary,
    Lbp { iterations: usize },
}

impl QMode {
    pub fn build(&self, e: &EnergyFunction) -> MarginalSet {
        match *self {
            QMode::Uniform => uniform_q(e),
            QMode::Unary => unary_q(e),
            QMode::Lbp { iterations } => lbp_q(e, iterations, 0.0),
        }
    }
}

impl fmt::Display for QMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QMode::Uniform => write!(f, "uniform"),
            QMode::Unary => write!(f, "unary"),
            QMode::Lbp { iterations } => write!(f, "lbp:{iterations}"),
        }
    }
}

impl FromStr for QMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(QMode::Uniform),
            "unary" => Ok(QMode::Unary),
            _ => {
                let k = s
                    .strip_prefix("lbp:")
                    .and_then(|k| k.parse::<usize>().ok())
                    .ok_or_else(|| Error::Config(format!("unknown q mode '{s}' (uniform|unary|lbp:K)")))?;
                Ok(QMode::Lbp { iterations: k })
            }
        }
    }
}

impl Serialize for QMode {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for QMode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::fixtures::*;
    use crate::energy::EnergyBuilder;
    use crate::oracle::Oracle;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_values() {
        let e = EnergyFunction::from_unaries(&[vec![0.0; 2], vec![0.0; 4]]).unwrap();
        let q = uniform_q(&e);
        assert_eq!(q.node(0), &[0.5, 0.5]);
        assert_eq!(q.node(1), &[0.25; 4]);
        assert_eq!(uniform_q(&t2()).node(1), &[0.5, 0.5]);
    }

    #[test]
    fn unary_values() {
        let e = EnergyFunction::from_unaries(&[vec![0.0, 2.0], vec![3.0, 3.0], vec![0.0, 1000.0]]).unwrap();
        let q = unary_q(&e);
        let a = 1.0 / (1.0 + (-2.0f64).exp());
        assert!((q.prob(0, 0) - a).abs() < 1e-15);
        assert!((q.prob(0, 1) - (1.0 - a)).abs() < 1e-15);
        assert_eq!(q.node(1), &[0.5, 0.5]);
        assert_eq!(q.prob(2, 0), 1.0);
        assert_eq!(q.prob(2, 1), 0.0);
        assert!(q.is_normalized(1e-12));
    }

    #[test]
    fn lbp_zero_iterations_is_unary() {
        let e = t2();
        assert_eq!(lbp_q(&e, 0, 0.0), unary_q(&e));
        let free = EnergyFunction::from_unaries(&[vec![0.3, 1.0, -2.0]]).unwrap();
        assert_eq!(lbp_q(&free, 7, 0.5), unary_q(&free));
    }

    #[test]
    fn lbp_one_round_on_t2() {
        let q = lbp_q(&t2(), 1, 0.0);
        let a = 1.0 / (1.0 + (-2.0f64).exp());
        assert!((q.prob(0, 0) - a).abs() < 1e-12);
        assert!((q.prob(0, 1) - (1.0 - a)).abs() < 1e-12);
    }

    #[test]
    fn qmode_parses() {
        assert_eq!("uniform".parse::<QMode>().unwrap(), QMode::Uniform);
        assert_eq!("lbp:4".parse::<QMode>().unwrap(), QMode::Lbp { iterations: 4 });
        assert!("lbp:x".parse::<QMode>().is_err());
        assert_eq!(QMode::Lbp { iterations: 3 }.to_string(), "lbp:3");
    }

    fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> EnergyFunction {
        let counts: Vec<usize> = (0..n).map(|_| rng.gen_range(2..=3)).collect();
        let mut b = EnergyBuilder::new(counts.clone());
        for (i, &l) in counts.iter().enumerate() {
            let u: Vec<f64> = (0..l).map(|_| rng.gen_range(0.0..3.0)).collect();
            b.set_unary(i, &u).unwrap();
        }
        for v in 1..n {
            let u = rng.gen_range(0..v);
            let t: Vec<f64> = (0..counts[u] * counts[v]).map(|_| rng.gen_range(0.0..3.0)).collect();
            b.add_edge(u, v, &t).unwrap();
        }
        b.build().unwrap()
    }

    proptest! {
        #[test]
        fn all_modes_are_normalized(seed in any::<u64>(), iters in 0usize..6, damping in 0.0f64..0.9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e = random_energy(&mut rng, 7, 4, 0.5);
            prop_assert!(uniform_q(&e).is_normalized(1e-9));
            prop_assert!(unary_q(&e).is_normalized(1e-9));
            prop_assert!(lbp_q(&e, iters, damping).is_normalized(1e-9));
            prop_assert_eq!(lbp_q(&e, 0, damping), unary_q(&e));
        }

        // on a tree, min-sum beliefs after `n` rounds are exact min-marginals
        #[test]
        fn tree_beliefs_pick_a_minimizer_label(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(2..=7);
            let e = random_tree(&mut rng, n);
            let q = lbp_q(&e, n, 0.0);
            let mins = Oracle::default().brute_force_minimize(&e).unwrap();
            for i in 0..n {
                let p = q.node(i);
                let best = (0..p.len()).max_by(|&a, &b| p[a].partial_cmp(&p[b]).unwrap()).unwrap();
                prop_assert!(mins.minimizers.iter().any(|m| m[i] == best));
            }
        }
    }
}
