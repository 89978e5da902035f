use serde::{Deserialize, Serialize};

use super::maxflow::FlowNetwork;
use crate::energy::{EnergyFunction, Labeling};
use crate::error::{Error, Result};

/// Per-variable result of roof duality: a label or `None` when undecided.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryPartialSolution {
    pub states: Vec<Option<usize>>,
}

impl BinaryPartialSolution {
    pub fn labeled_fraction(&self) -> f64 {
        if self.states.is_empty() {
            return 1.0;
        }
        self.states.iter().filter(|s| s.is_some()).count() as f64 / self.states.len() as f64
    }

    pub fn num_labeled(&self) -> usize {
        self.states.iter().filter(|s| s.is_some()).count()
    }

    /// Labeled variables keep their label, the rest take `default`.
    pub fn complete(&self, default: usize) -> Labeling {
        self.states.iter().map(|s| s.unwrap_or(default)).collect::<Vec<_>>().into()
    }
}

fn check_binary(e: &EnergyFunction) -> Result<()> {
    if e.label_counts().iter().any(|&l| l != 2) {
        return Err(Error::Domain("expected every variable to be binary".into()));
    }
    Ok(())
}

/// Writes each edge as `A + (C−A)x_u + (D−C)x_v + w(1−x_u)x_v` with
/// `w = B + C − A − D`, folding the linear parts into per-node costs of label 1.
/// Returns `(unary cost of label 1 minus label 0, [(u, v, w)])`.
fn normal_form(e: &EnergyFunction) -> (Vec<f64>, Vec<(usize, usize, f64)>) {
    let mut c: Vec<f64> = (0..e.num_nodes()).map(|i| e.unary(i)[1] - e.unary(i)[0]).collect();
    let mut pairs = Vec::with_capacity(e.num_edges());
    for (k, &(u, v)) in e.edges().iter().enumerate() {
        let t = e.table(k);
        let (a, b, cc, d) = (t[0], t[1], t[2], t[3]);
        c[u] += cc - a;
        c[v] += d - cc;
        pairs.push((u, v, b + cc - a - d));
    }
    (c, pairs)
}

/// Exact minimizer of a submodular binary energy by one minimum cut.
///
/// Label 0 is the source side. Among minimizers, nodes are put on the source
/// side unless they are forced to the sink side, so a flat energy yields all 0.
pub fn solve_binary_submodular(e: &EnergyFunction, tol: f64) -> Result<Labeling> {
    check_binary(e)?;
    if !e.is_submodular(tol)? {
        return Err(Error::Domain("energy is not submodular".into()));
    }
    let n = e.num_nodes();
    let (s, t) = (n, n + 1);
    let mut g = FlowNetwork::new(n + 2, s, t)?;
    let (c, pairs) = normal_form(e);
    for (i, &ci) in c.iter().enumerate() {
        if ci > 0.0 {
            g.add_arc(s, i, ci, 0.0)?;
        } else if ci < 0.0 {
            g.add_arc(i, t, -ci, 0.0)?;
        }
    }
    for (u, v, w) in pairs {
        if w > 0.0 {
            g.add_arc(u, v, w, 0.0)?;
        }
    }
    g.max_flow();
    let to_sink = g.sink_reachable();
    Ok((0..n).map(|i| usize::from(to_sink[i])).collect::<Vec<_>>().into())
}

/// Roof duality on the doubled network.
///
/// Node `i` stands for `x_i` and node `n + i` for its complement; a variable
/// is labeled when every minimum cut puts its two copies on opposite sides,
/// which makes the labeled part agree with every global minimizer.
pub fn qpbo(e: &EnergyFunction) -> Result<BinaryPartialSolution> {
    check_binary(e)?;
    let n = e.num_nodes();
    let (s, t) = (2 * n, 2 * n + 1);
    let bar = |i: usize| n + i;
    let mut g = FlowNetwork::new(2 * n + 2, s, t)?;
    let (mut c, pairs) = normal_form(e);
    let mut arcs = Vec::new();
    for &(u, v, w) in &pairs {
        if w >= 0.0 {
            arcs.push((u, v, w / 2.0));
            arcs.push((bar(v), bar(u), w / 2.0));
        } else {
            // w(1−x_u)x_v = w·x_v − w·x_u·x_v
            c[v] += w;
            arcs.push((bar(u), v, -w / 2.0));
            arcs.push((bar(v), u, -w / 2.0));
        }
    }
    for (i, &ci) in c.iter().enumerate() {
        if ci > 0.0 {
            g.add_arc(s, i, ci / 2.0, 0.0)?;
            g.add_arc(bar(i), t, ci / 2.0, 0.0)?;
        } else if ci < 0.0 {
            g.add_arc(i, t, -ci / 2.0, 0.0)?;
            g.add_arc(s, bar(i), -ci / 2.0, 0.0)?;
        }
    }
    for (u, v, w) in arcs {
        if w > 0.0 {
            g.add_arc(u, v, w, 0.0)?;
        }
    }
    let (_, reach) = g.max_flow();
    let states = (0..n)
        .map(|i| match (reach[i], reach[bar(i)]) {
            (true, false) => Some(0),
            (false, true) => Some(1),
            _ => None,
        })
        .collect();
    Ok(BinaryPartialSolution { states })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::fixtures::*;
    use crate::energy::{EnergyBuilder, PartialLabeling};
    use crate::oracle::Oracle;
    use crate::DEFAULT_TOL;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_binary(rng: &mut ChaCha8Rng, n: usize, submodular: bool) -> EnergyFunction {
        let mut b = EnergyBuilder::new(vec![2; n]);
        for i in 0..n {
            b.set_unary(i, &[rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)]).unwrap();
        }
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen_bool(0.35) {
                    let mut t: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
                    if submodular && t[0] + t[3] > t[1] + t[2] {
                        t.swap(0, 1);
                        t.swap(2, 3);
                    }
                    b.add_edge(u, v, &t).unwrap();
                }
            }
        }
        b.build().unwrap()
    }

    #[test]
    fn t2_solutions() {
        let e = t2();
        let x = solve_binary_submodular(&e, DEFAULT_TOL).unwrap();
        assert_eq!(x.values(), &[0, 0]);
        assert_eq!(e.energy(&x), 0.0);
        let p = qpbo(&e).unwrap();
        assert_eq!(p.states, vec![Some(0), Some(0)]);
        assert_eq!(p.labeled_fraction(), 1.0);
    }

    #[test]
    fn flat_energy_gives_zeros() {
        let mut b = EnergyBuilder::new(vec![2; 3]);
        b.add_edge(0, 1, &[0.0; 4]).unwrap();
        let e = b.build().unwrap();
        assert_eq!(solve_binary_submodular(&e, DEFAULT_TOL).unwrap().values(), &[0, 0, 0]);
    }

    #[test]
    fn frustrated_edge_is_left_unlabeled() {
        let mut b = EnergyBuilder::new(vec![2; 2]);
        b.add_edge(0, 1, &[0.0, -1.0, -1.0, 0.0]).unwrap();
        let e = b.build().unwrap();
        let p = qpbo(&e).unwrap();
        assert_eq!(p.states, vec![None, None]);
        assert!(matches!(solve_binary_submodular(&e, DEFAULT_TOL), Err(Error::Domain(_))));
    }

    #[test]
    fn isolated_node() {
        let e = EnergyFunction::from_unaries(&[vec![0.0, 1.0]]).unwrap();
        assert_eq!(qpbo(&e).unwrap().states, vec![Some(0)]);
    }

    #[test]
    fn multilabel_input_is_rejected() {
        assert!(qpbo(&t3()).is_ok());
        let e = EnergyFunction::from_unaries(&[vec![0.0, 1.0, 2.0]]).unwrap();
        assert!(qpbo(&e).is_err());
    }

    proptest! {
        #[test]
        fn maxflow_solution_is_optimal(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..=12);
            let e = random_binary(&mut rng, n, true);
            let x = solve_binary_submodular(&e, DEFAULT_TOL).unwrap();
            let best = Oracle::default().brute_force_minimize(&e).unwrap();
            prop_assert!((e.energy(&x) - best.min_energy).abs() < 1e-9);
        }

        #[test]
        fn qpbo_labels_are_persistent(seed in any::<u64>(), submodular in any::<bool>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..=10);
            let e = random_binary(&mut rng, n, submodular);
            let p = qpbo(&e).unwrap();
            let fixed: PartialLabeling = p.states.iter().enumerate().filter_map(|(i, s)| s.map(|l| (i, l))).collect();
            let best = Oracle::default().brute_force_minimize(&e).unwrap();
            prop_assert!(Oracle::persistent_in(&best, &fixed));
            if submodular && best.minimizers.len() == 1 {
                prop_assert_eq!(p.labeled_fraction(), 1.0);
            }
        }
    }
}
