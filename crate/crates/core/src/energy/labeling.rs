use std::collections::BTreeMap;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use super::EnergyFunction;
use crate::error::{Error, Result};

/// A complete assignment of one label index per node.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Labeling(Vec<usize>);

impl Labeling {
    pub fn new(values: Vec<usize>) -> Self {
        Labeling(values)
    }

    pub fn zeros(n: usize) -> Self {
        Labeling(vec![0; n])
    }

    pub fn values(&self) -> &[usize] {
        &self.0
    }

    pub fn set(&mut self, node: usize, label: usize) {
        self.0[node] = label;
    }

    pub fn into_inner(self) -> Vec<usize> {
        self.0
    }

    pub fn validate(&self, energy: &EnergyFunction) -> Result<()> {
        if self.0.len() != energy.num_nodes() {
            return Err(Error::InvalidLabeling(format!(
                "labeling has {} entries, energy has {} nodes",
                self.0.len(),
                energy.num_nodes()
            )));
        }
        for (i, &x) in self.0.iter().enumerate() {
            if x >= energy.label_count(i) {
                return Err(Error::InvalidLabeling(format!(
                    "node {i} has label {x} but only {} labels",
                    energy.label_count(i)
                )));
            }
        }
        Ok(())
    }

    /// The restriction of this labeling to `nodes`.
    pub fn restrict(&self, nodes: impl IntoIterator<Item = usize>) -> PartialLabeling {
        nodes.into_iter().map(|i| (i, self.0[i])).collect()
    }
}

impl Deref for Labeling {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for Labeling {
    fn from(values: Vec<usize>) -> Self {
        Labeling(values)
    }
}

/// A labeling of a subset `S` of the nodes. The support is the key set.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PartialLabeling(BTreeMap<usize, usize>);

impl PartialLabeling {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, node: usize, label: usize) -> Option<usize> {
        self.0.insert(node, label)
    }

    pub fn get(&self, node: usize) -> Option<usize> {
        self.0.get(&node).copied()
    }

    pub fn contains(&self, node: usize) -> bool {
        self.0.contains_key(&node)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Support nodes in ascending order.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.0.iter().map(|(&k, &v)| (k, v))
    }

    /// Disjoint union `self ⊕ other`.
    pub fn compose(&self, other: &PartialLabeling) -> Result<PartialLabeling> {
        let mut out = self.clone();
        for (node, label) in other.iter() {
            if out.0.insert(node, label).is_some() {
                return Err(Error::Composition(node));
            }
        }
        Ok(out)
    }

    /// Overwrites the support of `base` with this labeling (`x_S ⊕ z_{V\S}`).
    pub fn substitute_into(&self, base: &Labeling) -> Labeling {
        let mut out = base.clone();
        for (node, label) in self.iter() {
            out.set(node, label);
        }
        out
    }

    pub fn validate(&self, energy: &EnergyFunction) -> Result<()> {
        for (node, label) in self.iter() {
            if node >= energy.num_nodes() {
                return Err(Error::InvalidLabeling(format!("node {node} out of range")));
            }
            if label >= energy.label_count(node) {
                return Err(Error::InvalidLabeling(format!(
                    "node {node} has label {label} but only {} labels",
                    energy.label_count(node)
                )));
            }
        }
        Ok(())
    }
}

impl FromIterator<(usize, usize)> for PartialLabeling {
    fn from_iter<T: IntoIterator<Item = (usize, usize)>>(iter: T) -> Self {
        PartialLabeling(iter.into_iter().collect())
    }
}
