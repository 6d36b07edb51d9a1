//! Brute-force ground truth, written against definitions only.
//!
//! Joint probabilities are summed over complete instantiations by a
//! depth-first walk in topological order that skips values contradicting
//! the evidence and branches whose partial product is already 0 (they add
//! nothing to the sum).

use alloc::vec;
use alloc::vec::Vec;

use crate::circuit::{DecisionAC, NodeId, NodeKind};
use crate::network::{strides, Evidence, Network, VarId};
use crate::objective::{CounterfactualComponent, World};
use crate::ve::{RmapResult, SolveStats};
use crate::{Error, Result};

/// Default cap on visited partial instantiations.
pub const DEFAULT_BUDGET: u64 = 1 << 26;

struct Walk<'a> {
    net: &'a Network,
    order: Vec<VarId>,
    strides: Vec<Vec<usize>>,
    assignment: Vec<usize>,
    visited: u64,
    budget: u64,
}

impl<'a> Walk<'a> {
    fn new(net: &'a Network, budget: u64) -> Result<Self> {
        let order = net.topological_order()?;
        let strides = net
            .cpts()
            .iter()
            .map(|c| {
                let cards: Vec<usize> = c.family().iter().map(|&v| net.cardinality(v)).collect();
                strides(&cards)
            })
            .collect();
        Ok(Self { net, order, strides, assignment: vec![0; net.len()], visited: 0, budget })
    }

    fn entry(&self, v: VarId) -> f64 {
        let cpt = &self.net.cpts()[v.index()];
        let st = &self.strides[v.index()];
        let mut idx = self.assignment[v.index()] * st[cpt.parents.len()];
        for (p, s) in cpt.parents.iter().zip(st) {
            idx += self.assignment[p.index()] * s;
        }
        cpt.table[idx]
    }

    /// Calls `leaf(assignment, probability)` for every complete
    /// instantiation consistent with `e` and of non-zero probability.
    fn run(&mut self, e: &Evidence, leaf: &mut dyn FnMut(&[usize], f64)) -> Result<()> {
        self.go(0, 1.0, e, leaf)
    }

    fn go(&mut self, depth: usize, p: f64, e: &Evidence, leaf: &mut dyn FnMut(&[usize], f64)) -> Result<()> {
        self.visited += 1;
        if self.visited > self.budget {
            return Err(Error::BudgetExceeded { limit: self.budget });
        }
        if depth == self.order.len() {
            leaf(&self.assignment, p);
            return Ok(());
        }
        let v = self.order[depth];
        let card = self.net.cardinality(v);
        let (lo, hi) = match e.get(v) {
            Some(x) => (x, x + 1),
            None => (0, card),
        };
        for x in lo..hi {
            self.assignment[v.index()] = x;
            let q = p * self.entry(v);
            if q != 0.0 {
                self.go(depth + 1, q, e, leaf)?;
            }
        }
        Ok(())
    }
}

/// `Pr(e)`: sum of all CPT products over instantiations consistent with `e`.
pub fn joint_enumerate(net: &Network, e: &Evidence, budget: u64) -> Result<f64> {
    net.check_evidence(e)?;
    let mut total = 0.0;
    Walk::new(net, budget)?.run(e, &mut |_, p| total += p)?;
    Ok(total)
}

/// `Pr(e1 | u, e2)`, or 0 when `Pr(u, e2) = 0`.
pub fn conditional(net: &Network, e1: &Evidence, u: &Evidence, e2: &Evidence, budget: u64) -> Result<f64> {
    let cond = u.union(e2);
    let den = joint_enumerate(net, &cond, budget)?;
    if den == 0.0 {
        return Ok(0.0);
    }
    if !e1.compatible(&cond) {
        return Ok(0.0);
    }
    Ok(joint_enumerate(net, &e1.union(&cond), budget)? / den)
}

/// Sizes of the mixed-radix space over `units` (first unit most significant).
fn unit_radix(net: &Network, units: &[VarId]) -> Result<(Vec<usize>, usize)> {
    let mut cards = Vec::with_capacity(units.len());
    for &u in units {
        cards.push(net.variable(u)?.cardinality);
    }
    let total = crate::network::table_len(&cards);
    if total > (1u128 << 24) {
        return Err(Error::BudgetExceeded { limit: 1 << 24 });
    }
    Ok((cards, total as usize))
}

fn decode(units: &[VarId], cards: &[usize], mut index: usize) -> Evidence {
    let mut u = Evidence::new();
    for (&v, &c) in units.iter().zip(cards).rev() {
        u.insert(v, index % c);
        index /= c;
    }
    u
}

/// Per `u`: `Pr(e1, e2, u)` and `Pr(e2, u)` from one walk under `e2`.
fn per_unit_sums(
    net: &Network,
    units: &[VarId],
    e1: &Evidence,
    e2: &Evidence,
    budget: u64,
) -> Result<(Vec<usize>, Vec<f64>, Vec<f64>)> {
    let (cards, total) = unit_radix(net, units)?;
    let st = strides(&cards);
    let mut num = vec![0.0; total];
    let mut den = vec![0.0; total];
    Walk::new(net, budget)?.run(e2, &mut |a, p| {
        let idx: usize = units.iter().zip(&st).map(|(u, s)| a[u.index()] * s).sum();
        den[idx] += p;
        if e1.holds_in(a) {
            num[idx] += p;
        }
    })?;
    Ok((cards, num, den))
}

fn sorted_units(units: &[VarId]) -> Vec<VarId> {
    let mut u = units.to_vec();
    u.sort_unstable();
    u.dedup();
    u
}

/// `argmax_u Pr(e1 | u, e2)` over `u` with `Pr(u, e2) > 0`; ties go to the
/// lexicographically smallest `u` (by variable id, then value).
pub fn brute_rmap(net: &Network, units: &[VarId], e1: &Evidence, e2: &Evidence, budget: u64) -> Result<RmapResult> {
    let units = sorted_units(units);
    net.check_evidence(e1)?;
    net.check_evidence(e2)?;
    let (cards, num, den) = per_unit_sums(net, &units, e1, e2, budget)?;
    let mut best: Option<(usize, f64)> = None;
    for (i, (&n, &d)) in num.iter().zip(&den).enumerate() {
        if d == 0.0 {
            continue;
        }
        let v = n / d;
        if best.map_or(true, |(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    let (index, value) = best.ok_or(Error::InconsistentEvidence)?;
    Ok(RmapResult { argmax: decode(&units, &cards, index), value, stats: SolveStats::default() })
}

/// `Pr(e1 | u, e2)` for every `u` with positive support, in lexicographic
/// order of `u`.
pub fn rmap_table(
    net: &Network,
    units: &[VarId],
    e1: &Evidence,
    e2: &Evidence,
    budget: u64,
) -> Result<Vec<(Evidence, Option<f64>)>> {
    let units = sorted_units(units);
    let (cards, num, den) = per_unit_sums(net, &units, e1, e2, budget)?;
    Ok((0..num.len())
        .map(|i| (decode(&units, &cards, i), (den[i] > 0.0).then(|| num[i] / den[i])))
        .collect())
}

/// `argmax_u Pr(u, e)` with lexicographic tie-breaking.
pub fn brute_map(net: &Network, units: &[VarId], e: &Evidence, budget: u64) -> Result<RmapResult> {
    let units = sorted_units(units);
    net.check_evidence(e)?;
    let (cards, num, _) = per_unit_sums(net, &units, &Evidence::new(), e, budget)?;
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &v) in num.iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    Ok(RmapResult { argmax: decode(&units, &cards, best.0), value: best.1, stats: SolveStats::default() })
}

/// Value of a deterministic CPT row, or an error naming the variable.
fn mechanism(net: &Network, v: VarId, world: &[usize]) -> Result<usize> {
    let cpt = net.cpt(v)?;
    let card = net.cardinality(v);
    let mut row = 0;
    for &p in &cpt.parents {
        row = row * net.cardinality(p) + world[p.index()];
    }
    let cells = &cpt.table[row * card..(row + 1) * card];
    match cells.iter().position(|&x| x == 1.0) {
        Some(x) if cells.iter().filter(|&&c| c != 0.0).count() == 1 => Ok(x),
        _ => Err(Error::NonDeterministicCpt(v)),
    }
}

/// `Pr(outcomes | e, u)` for one counterfactual component, by enumerating
/// the exogenous roots and solving the factual and both intervened worlds
/// deterministically. Returns 0 when the condition has probability 0.
pub fn counterfactual_oracle(
    scm: &Network,
    comp: &CounterfactualComponent,
    u: &Evidence,
    budget: u64,
) -> Result<f64> {
    let order = scm.topological_order()?;
    let roots: Vec<VarId> = order.iter().copied().filter(|&v| scm.is_root(v)).collect();
    let cards: Vec<usize> = roots.iter().map(|&r| scm.cardinality(r)).collect();
    if crate::network::table_len(&cards) > budget as u128 {
        return Err(Error::BudgetExceeded { limit: budget });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    let mut worlds = [vec![0usize; scm.len()], vec![0usize; scm.len()], vec![0usize; scm.len()]];
    let mut odo = crate::network::Odometer::new(&cards);
    while let Some(r) = odo.current() {
        let mut p = 1.0;
        for (&root, &x) in roots.iter().zip(r) {
            p *= scm.cpt(root)?.table[x];
            for w in &mut worlds {
                w[root.index()] = x;
            }
        }
        if p > 0.0 {
            for (wi, world) in World::ALL.iter().enumerate() {
                for &v in &order {
                    if scm.is_root(v) {
                        continue;
                    }
                    let forced = comp.treatments.iter().find(|t| t.world == *world && t.var == v);
                    worlds[wi][v.index()] = match forced {
                        Some(t) => t.value,
                        None => mechanism(scm, v, &worlds[wi])?,
                    };
                }
            }
            let base = &worlds[World::Base.index()];
            let conditioned = comp.evidence.iter().all(|(v, x)| base[v.index()] == x)
                && u.iter().all(|(v, x)| base[v.index()] == x);
            if conditioned {
                den += p;
                if comp.outcomes.iter().all(|o| worlds[o.world.index()][o.var.index()] == o.value) {
                    num += p;
                }
            }
        }
        if odo.advance().is_none() {
            break;
        }
    }
    Ok(if den == 0.0 { 0.0 } else { num / den })
}

/// A complete subcircuit: one child per visited sum, all children per
/// visited product.
#[derive(Clone, Debug, PartialEq)]
pub struct Subcircuit {
    pub chosen_edges: Vec<(NodeId, NodeId)>,
    pub term: Evidence,
    /// Product of the parameters met on the tree unfolding (a parameter
    /// reached along two paths counts twice).
    pub coefficient: f64,
}

/// Every complete subcircuit whose term is compatible with `x`, found by
/// expanding the circuit top-down. With smoothness and decomposability the
/// terms are exactly `x`.
pub fn enumerate_subcircuits(ac: &DecisionAC, x: &Evidence, budget: usize) -> Result<Vec<Subcircuit>> {
    let mut memo: Vec<Option<Vec<Subcircuit>>> = vec![None; ac.node_count()];
    expand(ac, ac.root(), x, budget, &mut memo)?;
    Ok(memo[ac.root().index()].take().unwrap_or_default())
}

fn expand(
    ac: &DecisionAC,
    id: NodeId,
    x: &Evidence,
    budget: usize,
    memo: &mut Vec<Option<Vec<Subcircuit>>>,
) -> Result<()> {
    if memo[id.index()].is_some() {
        return Ok(());
    }
    for &c in ac.children(id) {
        expand(ac, c, x, budget, memo)?;
    }
    let out = match ac.kind(id) {
        NodeKind::Indicator { var, value } => {
            if x.get(var).is_some_and(|v| v != value) {
                Vec::new()
            } else {
                vec![Subcircuit { chosen_edges: Vec::new(), term: Evidence::new().with(var, value), coefficient: 1.0 }]
            }
        }
        NodeKind::Parameter { value, .. } => {
            vec![Subcircuit { chosen_edges: Vec::new(), term: Evidence::new(), coefficient: value }]
        }
        NodeKind::Sum { .. } => {
            let mut all = Vec::new();
            for &c in ac.children(id) {
                for s in memo[c.index()].as_ref().into_iter().flatten() {
                    let mut s = s.clone();
                    s.chosen_edges.insert(0, (id, c));
                    all.push(s);
                }
            }
            all
        }
        NodeKind::Product => {
            let mut acc = vec![Subcircuit { chosen_edges: Vec::new(), term: Evidence::new(), coefficient: 1.0 }];
            for &c in ac.children(id) {
                let mut next = Vec::new();
                for a in &acc {
                    for s in memo[c.index()].as_ref().into_iter().flatten() {
                        if !a.term.compatible(&s.term) {
                            continue;
                        }
                        let mut edges = a.chosen_edges.clone();
                        edges.extend_from_slice(&s.chosen_edges);
                        next.push(Subcircuit {
                            chosen_edges: edges,
                            term: a.term.union(&s.term),
                            coefficient: a.coefficient * s.coefficient,
                        });
                    }
                }
                if next.len() > budget {
                    return Err(Error::BudgetExceeded { limit: budget as u64 });
                }
                acc = next;
            }
            acc
        }
    };
    if out.len() > budget {
        return Err(Error::BudgetExceeded { limit: budget as u64 });
    }
    memo[id.index()] = Some(out);
    Ok(())
}
