use super::{offsets, EnergyFunction, Labeling, PartialLabeling};
use crate::error::{Error, Result};

/// An energy over the free nodes `V \ S` after fixing `x̂_S`.
///
/// `energy.energy(y) + constant == original.energy(x̂_S ⊕ y)` for every `y`.
#[derive(Clone, Debug)]
pub struct Conditioned {
    pub energy: EnergyFunction,
    pub constant: f64,
    /// Original index of each node of the reduced energy.
    pub free_nodes: Vec<usize>,
    pub fixed: PartialLabeling,
}

impl Conditioned {
    /// `x̂_S ⊕ y` as a labeling of the original energy.
    pub fn complete(&self, reduced: &[usize]) -> Labeling {
        let n = self.free_nodes.len() + self.fixed.len();
        let mut out = vec![0; n];
        for (k, &node) in self.free_nodes.iter().enumerate() {
            out[node] = reduced[k];
        }
        for (node, label) in self.fixed.iter() {
            out[node] = label;
        }
        out.into()
    }
}

/// The binary keep-or-switch problem induced by an expansion move.
///
/// Binary label 0 keeps `current[i]`, label 1 switches to `alpha`. Nodes whose
/// label set lacks `alpha` are frozen and folded into unaries and `constant`.
#[derive(Clone, Debug)]
pub struct ExpansionSubproblem {
    pub energy: EnergyFunction,
    pub constant: f64,
    /// Original index of each binary variable.
    pub nodes: Vec<usize>,
    pub current: Labeling,
    pub alpha: usize,
}

impl ExpansionSubproblem {
    /// Maps a binary assignment back to a multilabel labeling.
    pub fn apply(&self, binary: &[usize]) -> Labeling {
        let mut out = self.current.clone();
        for (k, &node) in self.nodes.iter().enumerate() {
            if binary[k] == 1 {
                out.set(node, self.alpha);
            }
        }
        out
    }
}

impl EnergyFunction {
    /// Folds the fixed nodes into the remaining ones.
    pub fn condition(&self, fixed: &PartialLabeling) -> Result<Conditioned> {
        fixed.validate(self)?;
        let n = self.num_nodes();
        let mut dense = vec![None; n];
        for (i, l) in fixed.iter() {
            dense[i] = Some(l);
        }
        let mut new_index = vec![usize::MAX; n];
        let mut free_nodes = Vec::with_capacity(n - fixed.len());
        for i in 0..n {
            if dense[i].is_none() {
                new_index[i] = free_nodes.len();
                free_nodes.push(i);
            }
        }
        let label_counts: Vec<usize> = free_nodes.iter().map(|&i| self.label_count(i)).collect();
        let unary_offsets = offsets(label_counts.iter().copied());
        let mut unaries = Vec::with_capacity(*unary_offsets.last().unwrap());
        for &i in &free_nodes {
            unaries.extend_from_slice(self.unary(i));
        }
        let mut constant = 0.0;
        for (i, l) in fixed.iter() {
            constant += self.unary(i)[l];
        }

        let mut edges = Vec::new();
        let mut table_offsets = vec![0];
        let mut tables = Vec::new();
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            match (dense[u], dense[v]) {
                (Some(a), Some(b)) => constant += self.pair(e, a, b),
                (Some(a), None) => {
                    let start = unary_offsets[new_index[v]];
                    for b in 0..self.label_count(v) {
                        unaries[start + b] += self.pair(e, a, b);
                    }
                }
                (None, Some(b)) => {
                    let start = unary_offsets[new_index[u]];
                    for a in 0..self.label_count(u) {
                        unaries[start + a] += self.pair(e, a, b);
                    }
                }
                (None, None) => {
                    // index map is monotone, so orientation is preserved
                    edges.push((new_index[u], new_index[v]));
                    tables.extend_from_slice(self.table(e));
                    table_offsets.push(tables.len());
                }
            }
        }
        let energy = EnergyFunction::from_parts(label_counts, unary_offsets, unaries, edges, table_offsets, tables);
        Ok(Conditioned { energy, constant, free_nodes, fixed: fixed.clone() })
    }

    /// Builds the binary energy of the expansion move towards `alpha`.
    pub fn expansion_subproblem(&self, current: &Labeling, alpha: usize) -> Result<ExpansionSubproblem> {
        current.validate(self)?;
        if alpha >= self.max_labels() {
            return Err(Error::InvalidLabeling(format!("label {alpha} does not exist at any node")));
        }
        let n = self.num_nodes();
        let mut var_index = vec![usize::MAX; n];
        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            if alpha < self.label_count(i) {
                var_index[i] = nodes.len();
                nodes.push(i);
            }
        }
        let mut unaries = Vec::with_capacity(2 * nodes.len());
        for &i in &nodes {
            let u = self.unary(i);
            unaries.push(u[current[i]]);
            unaries.push(u[alpha]);
        }
        let mut constant = 0.0;
        for i in 0..n {
            if var_index[i] == usize::MAX {
                constant += self.unary(i)[current[i]];
            }
        }
        let mut edges = Vec::new();
        let mut tables = Vec::new();
        let mut table_offsets = vec![0];
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            let (cu, cv) = (current[u], current[v]);
            match (var_index[u] != usize::MAX, var_index[v] != usize::MAX) {
                (true, true) => {
                    edges.push((var_index[u], var_index[v]));
                    tables.extend_from_slice(&[
                        self.pair(e, cu, cv),
                        self.pair(e, cu, alpha),
                        self.pair(e, alpha, cv),
                        self.pair(e, alpha, alpha),
                    ]);
                    table_offsets.push(tables.len());
                }
                (true, false) => {
                    let k = 2 * var_index[u];
                    unaries[k] += self.pair(e, cu, cv);
                    unaries[k + 1] += self.pair(e, alpha, cv);
                }
                (false, true) => {
                    let k = 2 * var_index[v];
                    unaries[k] += self.pair(e, cu, cv);
                    unaries[k + 1] += self.pair(e, cu, alpha);
                }
                (false, false) => constant += self.pair(e, cu, cv),
            }
        }
        let m = nodes.len();
        let energy = EnergyFunction::from_parts(
            vec![2; m],
            (0..=m).map(|k| 2 * k).collect(),
            unaries,
            edges,
            table_offsets,
            tables,
        );
        Ok(ExpansionSubproblem { energy, constant, nodes, current: current.clone(), alpha })
    }
}
