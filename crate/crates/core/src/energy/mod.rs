//! Discrete pairwise energies
//!
//! `E(x) = Σ_i θ_i(x_i) + Σ_(i,j) θ_ij(x_i, x_j)` stored as dense tables. Edges are
//! unordered; each table is stored oriented from the smaller to the larger node index
//! and transposed on access from the other endpoint.

mod labeling;
mod transform;

use std::collections::{BTreeSet, HashSet};

pub use labeling::{Labeling, PartialLabeling};
pub use transform::{Conditioned, ExpansionSubproblem};

use crate::error::{Error, Result};

/// One entry of a node's adjacency list.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Neighbor {
    pub node: usize,
    pub edge: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyFunction {
    label_counts: Vec<usize>,
    unary_offsets: Vec<usize>,
    unaries: Vec<f64>,
    edges: Vec<(usize, usize)>,
    table_offsets: Vec<usize>,
    tables: Vec<f64>,
    adj_offsets: Vec<usize>,
    adjacency: Vec<Neighbor>,
}

/// Incremental constructor for [`EnergyFunction`]. Unaries default to zero.
#[derive(Clone, Debug)]
pub struct EnergyBuilder {
    label_counts: Vec<usize>,
    unary_offsets: Vec<usize>,
    unaries: Vec<f64>,
    edges: Vec<(usize, usize)>,
    seen: HashSet<(usize, usize)>,
    table_offsets: Vec<usize>,
    tables: Vec<f64>,
}

fn offsets(counts: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut out = vec![0];
    let mut acc = 0;
    for c in counts {
        acc += c;
        out.push(acc);
    }
    out
}

impl EnergyBuilder {
    pub fn new(label_counts: Vec<usize>) -> Self {
        let unary_offsets = offsets(label_counts.iter().copied());
        let total = *unary_offsets.last().unwrap();
        EnergyBuilder {
            label_counts,
            unary_offsets,
            unaries: vec![0.0; total],
            edges: Vec::new(),
            seen: HashSet::new(),
            table_offsets: vec![0],
            tables: Vec::new(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.label_counts.len()
    }

    pub fn set_unary(&mut self, node: usize, values: &[f64]) -> Result<&mut Self> {
        let n = self.num_nodes();
        if node >= n {
            return Err(Error::InvalidEnergy(format!("unary for node {node} but only {n} nodes")));
        }
        if values.len() != self.label_counts[node] {
            return Err(Error::InvalidEnergy(format!(
                "node {node}: unary has {} entries, expected {}",
                values.len(),
                self.label_counts[node]
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidEnergy(format!("node {node}: non-finite unary {v}")));
        }
        let start = self.unary_offsets[node];
        self.unaries[start..start + values.len()].copy_from_slice(values);
        Ok(self)
    }

    /// Adds edge `(u, v)` with a row-major `|L_u| × |L_v|` table.
    pub fn add_edge(&mut self, u: usize, v: usize, table: &[f64]) -> Result<&mut Self> {
        let n = self.num_nodes();
        if u >= n || v >= n {
            return Err(Error::InvalidEnergy(format!("edge ({u},{v}) references a missing node")));
        }
        if u == v {
            return Err(Error::InvalidEnergy(format!("self-loop on node {u}")));
        }
        let (lu, lv) = (self.label_counts[u], self.label_counts[v]);
        if table.len() != lu * lv {
            return Err(Error::InvalidEnergy(format!(
                "edge ({u},{v}): table has {} entries, expected {lu}x{lv}",
                table.len()
            )));
        }
        if let Some(x) = table.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidEnergy(format!("edge ({u},{v}): non-finite entry {x}")));
        }
        let key = (u.min(v), u.max(v));
        if !self.seen.insert(key) {
            return Err(Error::InvalidEnergy(format!("duplicate edge ({},{})", key.0, key.1)));
        }
        if u < v {
            self.tables.extend_from_slice(table);
        } else {
            // stored oriented (v, u): entry [b][a] = table[a][b]
            for b in 0..lv {
                for a in 0..lu {
                    self.tables.push(table[a * lv + b]);
                }
            }
        }
        self.edges.push(key);
        self.table_offsets.push(self.tables.len());
        Ok(self)
    }

    pub fn build(self) -> Result<EnergyFunction> {
        if let Some(i) = self.label_counts.iter().position(|&l| l == 0) {
            return Err(Error::InvalidEnergy(format!("node {i} has an empty label set")));
        }
        Ok(EnergyFunction::from_parts(
            self.label_counts,
            self.unary_offsets,
            self.unaries,
            self.edges,
            self.table_offsets,
            self.tables,
        ))
    }
}

impl EnergyFunction {
    /// Assembles an energy from already-validated flat storage.
    pub(crate) fn from_parts(
        label_counts: Vec<usize>,
        unary_offsets: Vec<usize>,
        unaries: Vec<f64>,
        edges: Vec<(usize, usize)>,
        table_offsets: Vec<usize>,
        tables: Vec<f64>,
    ) -> Self {
        let n = label_counts.len();
        let mut degree = vec![0usize; n];
        for &(u, v) in &edges {
            degree[u] += 1;
            degree[v] += 1;
        }
        let adj_offsets = offsets(degree.iter().copied());
        let mut fill = adj_offsets.clone();
        let mut adjacency = vec![Neighbor { node: 0, edge: 0 }; adj_offsets[n]];
        for (e, &(u, v)) in edges.iter().enumerate() {
            adjacency[fill[u]] = Neighbor { node: v, edge: e };
            fill[u] += 1;
            adjacency[fill[v]] = Neighbor { node: u, edge: e };
            fill[v] += 1;
        }
        for i in 0..n {
            adjacency[adj_offsets[i]..adj_offsets[i + 1]].sort_unstable_by_key(|nb| nb.node);
        }
        EnergyFunction {
            label_counts,
            unary_offsets,
            unaries,
            edges,
            table_offsets,
            tables,
            adj_offsets,
            adjacency,
        }
    }

    /// An edge-free energy from per-node unary vectors.
    pub fn from_unaries(unaries: &[Vec<f64>]) -> Result<Self> {
        let mut b = EnergyBuilder::new(unaries.iter().map(Vec::len).collect());
        for (i, u) in unaries.iter().enumerate() {
            b.set_unary(i, u)?;
        }
        b.build()
    }

    pub fn num_nodes(&self) -> usize {
        self.label_counts.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn label_count(&self, node: usize) -> usize {
        self.label_counts[node]
    }

    pub fn label_counts(&self) -> &[usize] {
        &self.label_counts
    }

    pub fn max_labels(&self) -> usize {
        self.label_counts.iter().copied().max().unwrap_or(0)
    }

    pub fn unary(&self, node: usize) -> &[f64] {
        &self.unaries[self.unary_offsets[node]..self.unary_offsets[node + 1]]
    }

    /// Endpoints `(u, v)` with `u < v`.
    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Row-major `|L_u| × |L_v|` table of edge `e = (u, v)`.
    pub fn table(&self, e: usize) -> &[f64] {
        &self.tables[self.table_offsets[e]..self.table_offsets[e + 1]]
    }

    /// `θ_uv(a, b)` for edge `e = (u, v)`, `u < v`.
    #[inline]
    pub fn pair(&self, e: usize, a: usize, b: usize) -> f64 {
        let v = self.edges[e].1;
        self.tables[self.table_offsets[e] + a * self.label_counts[v] + b]
    }

    /// `θ_ij(x_i, x_j)` seen from node `i`, with `nb` an entry of `neighbors(i)`.
    #[inline]
    pub fn pair_from(&self, i: usize, nb: Neighbor, xi: usize, xj: usize) -> f64 {
        if i < nb.node {
            self.pair(nb.edge, xi, xj)
        } else {
            self.pair(nb.edge, xj, xi)
        }
    }

    /// Neighbors of `node` in ascending node order.
    pub fn neighbors(&self, node: usize) -> &[Neighbor] {
        &self.adjacency[self.adj_offsets[node]..self.adj_offsets[node + 1]]
    }

    /// Index of the first adjacency entry of `node` in the flat adjacency array.
    /// Entry `adjacency_offset(i) + k` is the half-edge `i → neighbors(i)[k]`.
    pub fn adjacency_offset(&self, node: usize) -> usize {
        self.adj_offsets[node]
    }

    pub fn num_half_edges(&self) -> usize {
        self.adjacency.len()
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adj_offsets[node + 1] - self.adj_offsets[node]
    }

    pub fn max_degree(&self) -> usize {
        (0..self.num_nodes()).map(|i| self.degree(i)).max().unwrap_or(0)
    }

    /// Position of `other` in `neighbors(node)`, if adjacent.
    pub fn neighbor_position(&self, node: usize, other: usize) -> Option<usize> {
        self.neighbors(node).binary_search_by_key(&other, |nb| nb.node).ok()
    }

    /// Number of joint labelings, or `None` on overflow.
    pub fn labeling_space(&self) -> Option<u128> {
        self.label_counts
            .iter()
            .try_fold(1u128, |acc, &l| acc.checked_mul(l as u128))
    }

    /// Energy of a labeling given as a raw slice. Panics on out-of-range labels.
    pub fn energy(&self, x: &[usize]) -> f64 {
        let mut total = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            total += self.unaries[self.unary_offsets[i] + xi];
        }
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            total += self.pair(e, x[u], x[v]);
        }
        total
    }

    pub fn evaluate(&self, x: &Labeling) -> Result<f64> {
        x.validate(self)?;
        Ok(self.energy(x))
    }

    /// `ΔE(x_i → y_i | z_N(i))`: change in energy when node `i` switches from
    /// `from` to `to` while its neighbors hold the labels in `z`.
    pub fn delta_energy(&self, i: usize, from: usize, to: usize, z: &PartialLabeling) -> Result<f64> {
        if i >= self.num_nodes() {
            return Err(Error::InvalidLabeling(format!("node {i} out of range")));
        }
        let li = self.label_count(i);
        if from >= li || to >= li {
            return Err(Error::InvalidLabeling(format!("labels {from}/{to} out of range at node {i}")));
        }
        let u = self.unary(i);
        let mut delta = u[to] - u[from];
        for &nb in self.neighbors(i) {
            let zj = z.get(nb.node).ok_or(Error::MissingNeighbor(nb.node))?;
            if zj >= self.label_count(nb.node) {
                return Err(Error::InvalidLabeling(format!("neighbor {} has label {zj}", nb.node)));
            }
            delta += self.pair_from(i, nb, to, zj) - self.pair_from(i, nb, from, zj);
        }
        Ok(delta)
    }

    /// [`delta_energy`](Self::delta_energy) reading neighbor labels from a full labeling.
    #[inline]
    pub fn local_delta(&self, i: usize, from: usize, to: usize, x: &[usize]) -> f64 {
        let u = self.unary(i);
        let mut delta = u[to] - u[from];
        for &nb in self.neighbors(i) {
            let zj = x[nb.node];
            delta += self.pair_from(i, nb, to, zj) - self.pair_from(i, nb, from, zj);
        }
        delta
    }

    /// `N(S) = { j ∉ S | ∃ i ∈ S, (i, j) ∈ E }`.
    pub fn neighborhood(&self, set: &BTreeSet<usize>) -> BTreeSet<usize> {
        set.iter()
            .flat_map(|&i| self.neighbors(i).iter().map(|nb| nb.node))
            .filter(|j| !set.contains(j))
            .collect()
    }

    /// Binary submodularity: `θ(0,0) + θ(1,1) ≤ θ(0,1) + θ(1,0) + tol` on every edge.
    pub fn is_submodular(&self, tol: f64) -> Result<bool> {
        if let Some(i) = self.label_counts.iter().position(|&l| l != 2) {
            return Err(Error::Domain(format!(
                "submodularity is defined for binary energies; node {i} has {} labels",
                self.label_counts[i]
            )));
        }
        Ok((0..self.num_edges()).all(|e| submodularity_gap(self.table(e)) >= -tol))
    }

    /// Per-node label minimizing the unary term (lowest index on ties).
    pub fn unary_argmin(&self) -> Labeling {
        (0..self.num_nodes())
            .map(|i| {
                let u = self.unary(i);
                let mut best = 0;
                for (l, &v) in u.iter().enumerate() {
                    if v < u[best] {
                        best = l;
                    }
                }
                best
            })
            .collect::<Vec<_>>()
            .into()
    }
}

/// `θ(0,1) + θ(1,0) − θ(0,0) − θ(1,1)` of a 2×2 table; non-negative iff submodular.
#[inline]
pub(crate) fn submodularity_gap(t: &[f64]) -> f64 {
    t[1] + t[2] - t[0] - t[3]
}
