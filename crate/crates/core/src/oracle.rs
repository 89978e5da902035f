//! Brute-force ground truth for small instances.
//!
//! Everything here enumerates. Nothing prunes beyond skipping zero-weight
//! configurations, and every enumeration is bounded by an explicit cap that
//! turns into [`Error::TooLarge`] instead of an approximation.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::energy::{EnergyFunction, Labeling, PartialLabeling};
use crate::error::{Error, Result};
use crate::marginals::MarginalSet;
use crate::DEFAULT_TOL;

/// Mixed-radix counter over `Π radices`.
pub(crate) struct Odometer {
    radices: Vec<usize>,
    digits: Vec<usize>,
    started: bool,
}

impl Odometer {
    pub(crate) fn new(radices: Vec<usize>) -> Self {
        let digits = vec![0; radices.len()];
        Odometer { radices, digits, started: false }
    }

    /// Advances to the next assignment; the first call yields all zeros.
    pub(crate) fn advance(&mut self) -> Option<&[usize]> {
        if !self.started {
            self.started = true;
            if self.radices.contains(&0) {
                return None;
            }
            return Some(&self.digits);
        }
        for k in 0..self.digits.len() {
            self.digits[k] += 1;
            if self.digits[k] < self.radices[k] {
                return Some(&self.digits);
            }
            self.digits[k] = 0;
        }
        None
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizerSet {
    pub minimizers: Vec<Labeling>,
    pub min_energy: f64,
}

/// Exhaustive checker with an enumeration cap and a strictness tolerance.
#[derive(Clone, Copy, Debug)]
pub struct Oracle {
    pub cap: u128,
    pub tol: f64,
}

impl Default for Oracle {
    fn default() -> Self {
        Oracle { cap: 1 << 24, tol: DEFAULT_TOL }
    }
}

impl Oracle {
    pub fn new(cap: u128, tol: f64) -> Self {
        Oracle { cap, tol }
    }

    fn check_size(&self, radices: impl IntoIterator<Item = usize>) -> Result<u128> {
        let mut size: u128 = 1;
        for r in radices {
            size = size.saturating_mul(r as u128);
        }
        if size > self.cap {
            return Err(Error::TooLarge { size, cap: self.cap });
        }
        Ok(size)
    }

    /// Every labeling within `tol` of the minimum energy.
    pub fn brute_force_minimize(&self, e: &EnergyFunction) -> Result<MinimizerSet> {
        self.check_size(e.label_counts().iter().copied())?;
        let mut min_energy = f64::INFINITY;
        let mut od = Odometer::new(e.label_counts().to_vec());
        while let Some(x) = od.advance() {
            min_energy = min_energy.min(e.energy(x));
        }
        let mut minimizers = Vec::new();
        let mut od = Odometer::new(e.label_counts().to_vec());
        while let Some(x) = od.advance() {
            if e.energy(x) <= min_energy + self.tol {
                minimizers.push(Labeling::new(x.to_vec()));
            }
        }
        Ok(MinimizerSet { minimizers, min_energy })
    }

    /// Whether every global minimizer agrees with `x_s` on its support.
    pub fn is_persistent(&self, e: &EnergyFunction, x_s: &PartialLabeling) -> Result<bool> {
        x_s.validate(e)?;
        let set = self.brute_force_minimize(e)?;
        Ok(set.minimizers.iter().all(|m| x_s.iter().all(|(i, l)| m[i] == l)))
    }

    /// Like [`is_persistent`](Self::is_persistent) with a precomputed minimizer set.
    pub fn persistent_in(set: &MinimizerSet, x_s: &PartialLabeling) -> bool {
        set.minimizers.iter().all(|m| x_s.iter().all(|(i, l)| m[i] == l))
    }

    /// Strict autarky: for every neighbor configuration and every `y_S ≠ x_S`,
    /// substituting `x_S` lowers the energy by more than `tol`.
    pub fn is_autarky(&self, e: &EnergyFunction, x_s: &PartialLabeling) -> Result<bool> {
        x_s.validate(e)?;
        let support: Vec<usize> = x_s.support().collect();
        let set: BTreeSet<usize> = support.iter().copied().collect();
        let boundary: Vec<usize> = e.neighborhood(&set).into_iter().collect();
        self.check_size(
            boundary
                .iter()
                .chain(support.iter())
                .map(|&i| e.label_count(i)),
        )?;

        let mut work = vec![0usize; e.num_nodes()];
        let mut nz = Odometer::new(boundary.iter().map(|&j| e.label_count(j)).collect());
        while let Some(z) = nz.advance() {
            for (k, &j) in boundary.iter().enumerate() {
                work[j] = z[k];
            }
            for (i, l) in x_s.iter() {
                work[i] = l;
            }
            let base = local_energy(e, &support, &set, &work);
            let mut ny = Odometer::new(support.iter().map(|&i| e.label_count(i)).collect());
            while let Some(y) = ny.advance() {
                if support.iter().zip(y).all(|(&i, &l)| x_s.get(i) == Some(l)) {
                    continue;
                }
                for (k, &i) in support.iter().enumerate() {
                    work[i] = y[k];
                }
                if local_energy(e, &support, &set, &work) - base <= self.tol {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Neighbor assignments (in ascending neighbor order) under which label `ell`
    /// at node `i` strictly beats every alternative.
    pub fn exact_hat_l(&self, e: &EnergyFunction, i: usize, ell: usize) -> Result<Vec<Vec<usize>>> {
        self.check_label(e, i, ell)?;
        let nbs: Vec<usize> = e.neighbors(i).iter().map(|nb| nb.node).collect();
        self.check_size(nbs.iter().map(|&j| e.label_count(j)))?;
        let mut out = Vec::new();
        let mut work = vec![0usize; e.num_nodes()];
        let mut od = Odometer::new(nbs.iter().map(|&j| e.label_count(j)).collect());
        while let Some(z) = od.advance() {
            for (k, &j) in nbs.iter().enumerate() {
                work[j] = z[k];
            }
            if self.best_alternative_delta(e, i, ell, &work) > self.tol {
                out.push(z.to_vec());
            }
        }
        Ok(out)
    }

    /// `q`-mass of the neighbor configurations under which `ell` strictly wins.
    ///
    /// The member mass is divided by the total mass of all configurations, so
    /// full coverage yields exactly 1.0 regardless of rounding in `q`.
    pub fn exact_criterion_mass(&self, e: &EnergyFunction, i: usize, ell: usize, q: &MarginalSet) -> Result<f64> {
        self.check_label(e, i, ell)?;
        let nbs: Vec<usize> = e.neighbors(i).iter().map(|nb| nb.node).collect();
        self.check_size(nbs.iter().map(|&j| e.label_count(j)))?;
        let mut inside = 0.0;
        let mut outside = 0.0;
        let mut work = vec![0usize; e.num_nodes()];
        let mut od = Odometer::new(nbs.iter().map(|&j| e.label_count(j)).collect());
        while let Some(z) = od.advance() {
            let weight: f64 = nbs.iter().zip(z).map(|(&j, &l)| q.prob(j, l)).product();
            if weight == 0.0 {
                continue;
            }
            for (k, &j) in nbs.iter().enumerate() {
                work[j] = z[k];
            }
            if self.best_alternative_delta(e, i, ell, &work) > self.tol {
                inside += weight;
            } else {
                outside += weight;
            }
        }
        if inside + outside == 0.0 {
            return Ok(0.0);
        }
        Ok(inside / (inside + outside))
    }

    /// Worst-case energy loss of committing `i` to `ell`:
    /// `δ_i = −min_z min_y ΔE(ell → y | z)`, never negative.
    pub fn exact_delta(&self, e: &EnergyFunction, i: usize, ell: usize) -> Result<f64> {
        self.check_label(e, i, ell)?;
        let nbs: Vec<usize> = e.neighbors(i).iter().map(|nb| nb.node).collect();
        self.check_size(nbs.iter().map(|&j| e.label_count(j)))?;
        let mut worst = 0.0f64;
        let mut work = vec![0usize; e.num_nodes()];
        let mut od = Odometer::new(nbs.iter().map(|&j| e.label_count(j)).collect());
        while let Some(z) = od.advance() {
            for (k, &j) in nbs.iter().enumerate() {
                work[j] = z[k];
            }
            for y in 0..e.label_count(i) {
                worst = worst.min(e.local_delta(i, ell, y, &work));
            }
        }
        Ok(0.0 - worst)
    }

    fn check_label(&self, e: &EnergyFunction, i: usize, ell: usize) -> Result<()> {
        if i >= e.num_nodes() || ell >= e.label_count(i) {
            return Err(Error::InvalidLabeling(format!("candidate x_{i} = {ell} is out of range")));
        }
        Ok(())
    }

    /// `min_{y ≠ ell} ΔE(ell → y | z)`; `+∞` when `ell` is the only label.
    fn best_alternative_delta(&self, e: &EnergyFunction, i: usize, ell: usize, work: &[usize]) -> f64 {
        (0..e.label_count(i))
            .filter(|&y| y != ell)
            .map(|y| e.local_delta(i, ell, y, work))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Energy terms that touch `support`; terms entirely outside cancel in differences.
fn local_energy(e: &EnergyFunction, support: &[usize], set: &BTreeSet<usize>, x: &[usize]) -> f64 {
    let mut total = 0.0;
    for &i in support {
        total += e.unary(i)[x[i]];
        for &nb in e.neighbors(i) {
            // count edges inside S once
            if set.contains(&nb.node) && nb.node < i {
                continue;
            }
            total += e.pair_from(i, nb, x[i], x[nb.node]);
        }
    }
    total
}
