use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::energy::{EnergyBuilder, EnergyFunction};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub u: usize,
    pub v: usize,
    /// `table[a][b] = θ_uv(a, b)`.
    pub table: Vec<Vec<f64>>,
}

/// The on-disk instance format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub nodes: usize,
    pub labels: Vec<usize>,
    pub unary: Vec<Vec<f64>>,
    pub edges: Vec<EdgeRecord>,
}

impl InstanceFile {
    pub fn from_energy(e: &EnergyFunction) -> Self {
        let n = e.num_nodes();
        let edges = e
            .edges()
            .iter()
            .enumerate()
            .map(|(k, &(u, v))| EdgeRecord {
                u,
                v,
                table: e.table(k).chunks(e.label_count(v)).map(<[f64]>::to_vec).collect(),
            })
            .collect();
        InstanceFile {
            nodes: n,
            labels: e.label_counts().to_vec(),
            unary: (0..n).map(|i| e.unary(i).to_vec()).collect(),
            edges,
        }
    }

    pub fn to_energy(&self) -> Result<EnergyFunction> {
        if self.labels.len() != self.nodes || self.unary.len() != self.nodes {
            return Err(Error::InvalidEnergy(format!(
                "{} nodes but {} label counts and {} unary rows",
                self.nodes,
                self.labels.len(),
                self.unary.len()
            )));
        }
        let mut b = EnergyBuilder::new(self.labels.clone());
        for (i, u) in self.unary.iter().enumerate() {
            b.set_unary(i, u)?;
        }
        for edge in &self.edges {
            let flat: Vec<f64> = edge.table.iter().flatten().copied().collect();
            if let (Some(&lu), Some(&lv)) = (self.labels.get(edge.u), self.labels.get(edge.v)) {
                if edge.table.len() != lu || edge.table.iter().any(|r| r.len() != lv) {
                    return Err(Error::InvalidEnergy(format!(
                        "edge ({}, {}) table must be {lu}x{lv}",
                        edge.u, edge.v
                    )));
                }
            }
            b.add_edge(edge.u, edge.v, &flat)?;
        }
        b.build()
    }
}

pub fn energy_to_json(e: &EnergyFunction) -> String {
    serde_json::to_string(&InstanceFile::from_energy(e)).expect("instance serializes")
}

pub fn energy_from_json(s: &str) -> Result<EnergyFunction> {
    serde_json::from_str::<InstanceFile>(s)?.to_energy()
}

pub fn read_instance(path: &Path) -> Result<EnergyFunction> {
    energy_from_json(&fs::read_to_string(path)?)
}

pub fn write_instance(path: &Path, e: &EnergyFunction) -> Result<()> {
    fs::write(path, energy_to_json(e))?;
    Ok(())
}
