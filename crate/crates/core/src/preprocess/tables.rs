use crate::energy::EnergyFunction;

/// Precomputed per-term minima for the swapped-min bounds.
///
/// For the half-edge `h = (i → j)`, a candidate label `ℓ` of `i` and a label `λ` of `j`:
///
/// * `ν_h(ℓ, λ) = min_{y ≠ ℓ} [θ_ij(y, λ) − θ_ij(ℓ, λ)]`
/// * `μ_h(ℓ) = min_{λ ∈ D_j} ν_h(ℓ, λ)` where `D_j` is `j`'s current domain
/// * `γ_i(ℓ) = min_{y ≠ ℓ} [θ_i(y) − θ_i(ℓ)]`
///
/// Minima over an empty set of alternatives are `+∞`.
#[derive(Clone, Debug)]
pub struct MinTables {
    gamma: Vec<f64>,
    gamma_offsets: Vec<usize>,
    nu: Vec<f64>,
    nu_offsets: Vec<usize>,
    /// Label count of the far end of each half-edge (the row stride of `ν`).
    nu_cols: Vec<usize>,
    mu: Vec<f64>,
    mu_offsets: Vec<usize>,
}

/// The smallest entry, its index and the second smallest entry.
#[inline]
fn two_smallest(values: impl Iterator<Item = f64>) -> (f64, usize, f64) {
    let (mut lo, mut lo_at, mut second) = (f64::INFINITY, usize::MAX, f64::INFINITY);
    for (k, v) in values.enumerate() {
        if v < lo {
            second = lo;
            lo = v;
            lo_at = k;
        } else if v < second {
            second = v;
        }
    }
    (lo, lo_at, second)
}

impl MinTables {
    /// Builds all tables with every domain full. `O(NL + EL²)`.
    pub fn build(e: &EnergyFunction) -> Self {
        let n = e.num_nodes();
        let hn = e.num_half_edges();
        let mut gamma = Vec::with_capacity(e.label_counts().iter().sum());
        let mut gamma_offsets = Vec::with_capacity(n + 1);
        gamma_offsets.push(0);
        let mut nu_total = 0;
        let mut mu_total = 0;
        for i in 0..n {
            let li = e.label_count(i);
            let u = e.unary(i);
            let (lo, lo_at, second) = two_smallest(u.iter().copied());
            gamma.extend(u.iter().enumerate().map(|(k, &v)| if k == lo_at { second } else { lo } - v));
            gamma_offsets.push(gamma.len());
            for nb in e.neighbors(i) {
                nu_total += li * e.label_count(nb.node);
                mu_total += li;
            }
        }

        let mut nu = vec![0.0; nu_total];
        let mut nu_offsets = Vec::with_capacity(hn + 1);
        let mut nu_cols = Vec::with_capacity(hn);
        let mut mu = Vec::with_capacity(mu_total);
        let mut mu_offsets = Vec::with_capacity(hn + 1);
        nu_offsets.push(0);
        mu_offsets.push(0);
        let mut start = 0;
        for i in 0..n {
            let li = e.label_count(i);
            for &nb in e.neighbors(i) {
                let lj = e.label_count(nb.node);
                let table = e.table(nb.edge);
                // θ_ij(y, λ) = table[y * ys + λ * ls]
                let (ys, ls) = if i < nb.node { (lj, 1) } else { (1, li) };
                let block = &mut nu[start..start + li * lj];
                let m0 = mu.len();
                mu.resize(m0 + li, f64::INFINITY);
                let row_mu = &mut mu[m0..];
                for lambda in 0..lj {
                    let (mut lo, mut lo_at, mut second) = (f64::INFINITY, usize::MAX, f64::INFINITY);
                    for y in 0..li {
                        let v = table[y * ys + lambda * ls];
                        if v < lo {
                            second = lo;
                            lo = v;
                            lo_at = y;
                        } else if v < second {
                            second = v;
                        }
                    }
                    for ell in 0..li {
                        let g = if ell == lo_at { second } else { lo } - table[ell * ys + lambda * ls];
                        block[ell * lj + lambda] = g;
                        row_mu[ell] = row_mu[ell].min(g);
                    }
                }
                start += li * lj;
                nu_offsets.push(start);
                nu_cols.push(lj);
                mu_offsets.push(mu.len());
            }
        }
        MinTables { gamma, gamma_offsets, nu, nu_offsets, nu_cols, mu, mu_offsets }
    }

    #[inline]
    pub fn gamma(&self, i: usize, ell: usize) -> f64 {
        self.gamma[self.gamma_offsets[i] + ell]
    }

    /// `ν` on half-edge `h` (see [`EnergyFunction::adjacency_offset`]).
    #[inline]
    pub fn nu(&self, h: usize, ell: usize, lambda: usize) -> f64 {
        self.nu_row(h, ell)[lambda]
    }

    /// `ν_h(ℓ, ·)` over the far end's labels.
    #[inline]
    pub fn nu_row(&self, h: usize, ell: usize) -> &[f64] {
        let lj = self.nu_cols[h];
        let start = self.nu_offsets[h] + ell * lj;
        &self.nu[start..start + lj]
    }

    #[inline]
    pub fn mu(&self, h: usize, ell: usize) -> f64 {
        self.mu[self.mu_offsets[h] + ell]
    }

    /// Records that node `k` is fixed to `label`: every half-edge `(i → k)` now
    /// minimizes over the singleton domain `{label}`.
    pub fn fix(&mut self, e: &EnergyFunction, k: usize, label: usize) {
        for nb in e.neighbors(k) {
            let i = nb.node;
            let h = e.adjacency_offset(i) + e.neighbor_position(i, k).expect("symmetric adjacency");
            let lk = self.nu_cols[h];
            for ell in 0..e.label_count(i) {
                self.mu[self.mu_offsets[h] + ell] = self.nu[self.nu_offsets[h] + ell * lk + label];
            }
        }
    }
}
