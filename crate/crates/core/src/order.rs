//! Constrained min-fill elimination orders.

use alloc::vec;
use alloc::vec::Vec;

use crate::network::{Network, VarId};

/// An elimination order whose first `block_boundary` variables are the
/// non-targets and whose tail holds every target.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EliminationPlan {
    pub order: Vec<VarId>,
    pub block_boundary: usize,
    /// Largest cluster met along the order, minus one.
    pub width: usize,
}

impl EliminationPlan {
    pub fn non_targets(&self) -> &[VarId] {
        &self.order[..self.block_boundary]
    }

    pub fn targets(&self) -> &[VarId] {
        &self.order[self.block_boundary..]
    }

    /// True when the tail block is exactly `targets` and the order covers
    /// `num_vars` distinct variables.
    pub fn is_constrained_for(&self, num_vars: usize, targets: &[VarId]) -> bool {
        if self.order.len() != num_vars || self.block_boundary > num_vars {
            return false;
        }
        let mut seen = vec![false; num_vars];
        for v in &self.order {
            if v.index() >= num_vars || seen[v.index()] {
                return false;
            }
            seen[v.index()] = true;
        }
        let tail = self.targets();
        tail.len() == targets.len() && targets.iter().all(|t| tail.contains(t))
    }
}

/// Undirected interaction graph as adjacency bitsets.
#[derive(Clone)]
struct Graph {
    words: usize,
    adj: Vec<Vec<u64>>,
}

impl Graph {
    fn new(n: usize) -> Self {
        let words = n.div_ceil(64).max(1);
        Self { words, adj: vec![vec![0; words]; n] }
    }

    fn connect(&mut self, a: usize, b: usize) {
        if a != b {
            self.adj[a][b / 64] |= 1 << (b % 64);
            self.adj[b][a / 64] |= 1 << (a % 64);
        }
    }

    fn has(&self, a: usize, b: usize) -> bool {
        self.adj[a][b / 64] & (1 << (b % 64)) != 0
    }

    fn neighbours(&self, v: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for (w, &word) in self.adj[v].iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                let t = bits.trailing_zeros() as usize;
                out.push(w * 64 + t);
                bits &= bits - 1;
            }
        }
        out
    }

    fn fill_count(&self, v: usize) -> usize {
        let nb = self.neighbours(v);
        let mut missing = 0;
        for (i, &a) in nb.iter().enumerate() {
            for &b in &nb[i + 1..] {
                if !self.has(a, b) {
                    missing += 1;
                }
            }
        }
        missing
    }

    /// Connects the neighbours of `v` pairwise, detaches `v`, and returns its
    /// degree at elimination time.
    fn eliminate(&mut self, v: usize) -> usize {
        let nb = self.neighbours(v);
        for (i, &a) in nb.iter().enumerate() {
            for &b in &nb[i + 1..] {
                self.connect(a, b);
            }
        }
        for &a in &nb {
            self.adj[a][v / 64] &= !(1 << (v % 64));
        }
        self.adj[v] = vec![0; self.words];
        nb.len()
    }
}

fn interaction_graph<'a>(num_vars: usize, scopes: impl IntoIterator<Item = &'a [VarId]>) -> Graph {
    let mut g = Graph::new(num_vars);
    for scope in scopes {
        for (i, a) in scope.iter().enumerate() {
            for b in &scope[i + 1..] {
                g.connect(a.index(), b.index());
            }
        }
    }
    g
}

/// Min-fill over the moral graph of `net`, eliminating every non-target
/// before any target. Ties go to the smallest id.
pub fn minfill_order(net: &Network, targets: &[VarId]) -> EliminationPlan {
    let families: Vec<Vec<VarId>> = net.cpts().iter().map(|c| c.family()).collect();
    minfill_order_for_scopes(net.len(), families.iter().map(|f| f.as_slice()), targets)
}

/// Same as [`minfill_order`] for an arbitrary collection of factor scopes
/// over variables `0..num_vars`.
pub fn minfill_order_for_scopes<'a>(
    num_vars: usize,
    scopes: impl IntoIterator<Item = &'a [VarId]>,
    targets: &[VarId],
) -> EliminationPlan {
    let mut g = interaction_graph(num_vars, scopes);
    let mut is_target = vec![false; num_vars];
    for t in targets {
        is_target[t.index()] = true;
    }
    let mut alive = vec![true; num_vars];
    let mut order = Vec::with_capacity(num_vars);
    let mut width = 0;
    let mut block_boundary = 0;
    for block in [false, true] {
        if block {
            block_boundary = order.len();
        }
        loop {
            let mut best: Option<(usize, usize)> = None;
            for v in 0..num_vars {
                if !alive[v] || is_target[v] != block {
                    continue;
                }
                let fill = g.fill_count(v);
                if best.map_or(true, |(f, _)| fill < f) {
                    best = Some((fill, v));
                }
            }
            let Some((_, v)) = best else { break };
            width = width.max(g.eliminate(v));
            alive[v] = false;
            order.push(VarId::from(v));
        }
    }
    EliminationPlan { order, block_boundary, width }
}

/// Width of a given order: largest neighbourhood at elimination time.
pub fn order_width<'a>(
    num_vars: usize,
    scopes: impl IntoIterator<Item = &'a [VarId]>,
    order: &[VarId],
) -> usize {
    let mut g = interaction_graph(num_vars, scopes);
    order.iter().map(|v| g.eliminate(v.index())).max().unwrap_or(0)
}
