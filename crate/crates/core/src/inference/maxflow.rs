use std::collections::VecDeque;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
struct Arc {
    to: usize,
    residual: f64,
    capacity: f64,
}

/// A directed network with paired reverse arcs, solved by blocking flows on
/// BFS level graphs.
///
/// Arc `2k` and arc `2k + 1` are each other's reverse.
#[derive(Clone, Debug)]
pub struct FlowNetwork {
    source: usize,
    sink: usize,
    arcs: Vec<Arc>,
    out: Vec<Vec<usize>>,
    max_capacity: f64,
}

impl FlowNetwork {
    pub fn new(num_nodes: usize, source: usize, sink: usize) -> Result<Self> {
        if source == sink || source >= num_nodes || sink >= num_nodes {
            return Err(Error::Domain(format!("invalid terminals {source}, {sink} for {num_nodes} nodes")));
        }
        Ok(FlowNetwork { source, sink, arcs: Vec::new(), out: vec![Vec::new(); num_nodes], max_capacity: 0.0 })
    }

    pub fn num_nodes(&self) -> usize {
        self.out.len()
    }

    pub fn source(&self) -> usize {
        self.source
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    /// Adds `u → v` with capacity `cap` and `v → u` with capacity `rev_cap`.
    pub fn add_arc(&mut self, u: usize, v: usize, cap: f64, rev_cap: f64) -> Result<()> {
        let n = self.num_nodes();
        if u >= n || v >= n {
            return Err(Error::Domain(format!("arc ({u}, {v}) outside a network of {n} nodes")));
        }
        for c in [cap, rev_cap] {
            if !(c >= 0.0 && c.is_finite()) {
                return Err(Error::Domain(format!("capacity must be finite and non-negative, got {c}")));
            }
        }
        self.out[u].push(self.arcs.len());
        self.arcs.push(Arc { to: v, residual: cap, capacity: cap });
        self.out[v].push(self.arcs.len());
        self.arcs.push(Arc { to: u, residual: rev_cap, capacity: rev_cap });
        self.max_capacity = self.max_capacity.max(cap).max(rev_cap);
        Ok(())
    }

    /// Residual capacities at or below this are treated as saturated.
    fn eps(&self) -> f64 {
        1e-12 * self.max_capacity.max(1.0)
    }

    fn levels(&self, eps: f64) -> Vec<usize> {
        let mut level = vec![usize::MAX; self.num_nodes()];
        level[self.source] = 0;
        let mut queue = VecDeque::from([self.source]);
        while let Some(u) = queue.pop_front() {
            for &a in &self.out[u] {
                let arc = self.arcs[a];
                if arc.residual > eps && level[arc.to] == usize::MAX {
                    level[arc.to] = level[u] + 1;
                    queue.push_back(arc.to);
                }
            }
        }
        level
    }

    fn push(&mut self, u: usize, limit: f64, level: &[usize], next: &mut [usize], eps: f64) -> f64 {
        if u == self.sink {
            return limit;
        }
        while next[u] < self.out[u].len() {
            let a = self.out[u][next[u]];
            let Arc { to, residual, .. } = self.arcs[a];
            if residual > eps && level[to] == level[u] + 1 {
                let pushed = self.push(to, limit.min(residual), level, next, eps);
                if pushed > 0.0 {
                    self.arcs[a].residual -= pushed;
                    self.arcs[a ^ 1].residual += pushed;
                    return pushed;
                }
            }
            next[u] += 1;
        }
        0.0
    }

    /// Maximum flow value and the source side of a minimum cut (nodes
    /// reachable from the source in the residual network).
    pub fn max_flow(&mut self) -> (f64, Vec<bool>) {
        let eps = self.eps();
        let mut total = 0.0;
        loop {
            let level = self.levels(eps);
            if level[self.sink] == usize::MAX {
                break;
            }
            let mut next = vec![0; self.num_nodes()];
            loop {
                let f = self.push(self.source, f64::INFINITY, &level, &mut next, eps);
                if f <= 0.0 {
                    break;
                }
                total += f;
            }
        }
        (total, self.source_reachable())
    }

    pub fn source_reachable(&self) -> Vec<bool> {
        let eps = self.eps();
        self.levels(eps).into_iter().map(|l| l != usize::MAX).collect()
    }

    /// Nodes that can still reach the sink in the residual network.
    pub fn sink_reachable(&self) -> Vec<bool> {
        let eps = self.eps();
        let mut seen = vec![false; self.num_nodes()];
        seen[self.sink] = true;
        let mut queue = VecDeque::from([self.sink]);
        while let Some(w) = queue.pop_front() {
            for &back in &self.out[w] {
                let v = self.arcs[back].to;
                if !seen[v] && self.arcs[back ^ 1].residual > eps {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }

    /// Total original capacity of arcs leaving `source_side`.
    pub fn cut_capacity(&self, source_side: &[bool]) -> f64 {
        let mut total = 0.0;
        for (u, arcs) in self.out.iter().enumerate() {
            if !source_side[u] {
                continue;
            }
            for &a in arcs {
                if !source_side[self.arcs[a].to] {
                    total += self.arcs[a].capacity;
                }
            }
        }
        total
    }
}
