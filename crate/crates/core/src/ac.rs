//! Queries on decision circuits: evaluation, MAP and reverse-MAP.
//!
//! Nodes whose cached variables avoid the units form `AC_V`; the rest form
//! `AC_U`. Reverse-MAP evaluates `AC_V` twice (under `e1 ∪ e2` and under
//! `e2`), divides the two values of every `AC_V` node hanging directly off
//! `AC_U` (`0/0 = 0`), and then maxes through `AC_U` with unit indicators at
//! 1. Every pass touches each edge at most once.

use alloc::vec;
use alloc::vec::Vec;

use crate::circuit::{check_structure_for, DecisionAC, NodeId, NodeKind};
use crate::network::{Evidence, VarId};
use crate::ve::{normalize_units, RmapResult, SolveStats};
use crate::{Error, Interrupt, NeverInterrupt, Result};

const NO_CHOICE: u32 = u32::MAX;

/// Per-node values plus, for max nodes, the position of the chosen child.
#[derive(Clone, Debug)]
pub struct EvalBuffer {
    pub values: Vec<f64>,
    pub choice: Vec<u32>,
}

impl EvalBuffer {
    pub fn new(ac: &DecisionAC) -> Self {
        Self { values: vec![0.0; ac.node_count()], choice: vec![NO_CHOICE; ac.node_count()] }
    }

    fn reset_choices(&mut self) {
        self.choice.iter_mut().for_each(|c| *c = NO_CHOICE);
    }
}

#[derive(Default)]
struct Counters {
    ops: u64,
    subnormals: u64,
}

impl Counters {
    #[inline]
    fn note(&mut self, v: f64) -> f64 {
        if v != 0.0 && v < f64::MIN_POSITIVE {
            self.subnormals += 1;
        }
        v
    }
}

#[inline]
fn indicator(e: &Evidence, var: VarId, value: usize) -> f64 {
    match e.get(var) {
        Some(x) if x != value => 0.0,
        _ => 1.0,
    }
}

/// Bottom-up sum/product pass over the nodes selected by `mask` (all nodes
/// when `None`), with indicators set by compatibility with `e`.
fn sum_pass(
    ac: &DecisionAC,
    e: &Evidence,
    params: &[f64],
    mask: Option<&[bool]>,
    buf: &mut EvalBuffer,
    counters: &mut Counters,
) {
    for id in ac.ids() {
        if mask.is_some_and(|m| !m[id.index()]) {
            continue;
        }
        let kids = ac.children(id);
        let v = match ac.kind(id) {
            NodeKind::Indicator { var, value } => indicator(e, var, value),
            NodeKind::Parameter { .. } => params[id.index()],
            NodeKind::Product => kids.iter().map(|c| buf.values[c.index()]).product(),
            NodeKind::Sum { .. } => kids.iter().map(|c| buf.values[c.index()]).sum(),
        };
        counters.ops += kids.len() as u64;
        buf.values[id.index()] = counters.note(v);
    }
}

/// Circuit value under `e`: `Pr(e)` for a compiled network.
pub fn evaluate(ac: &DecisionAC, e: &Evidence) -> f64 {
    evaluate_with(ac, e, &ac.parameters())
}

/// Circuit value under `e` with parameter values taken from `params`
/// (indexed by node id).
pub fn evaluate_with(ac: &DecisionAC, e: &Evidence, params: &[f64]) -> f64 {
    let mut buf = EvalBuffer::new(ac);
    evaluate_into(ac, e, params, &mut buf);
    buf.values[ac.root().index()]
}

/// Fills `buf` with the value of every node under `e` and `params`.
pub fn evaluate_into(ac: &DecisionAC, e: &Evidence, params: &[f64], buf: &mut EvalBuffer) {
    sum_pass(ac, e, params, None, buf, &mut Counters::default());
}

fn ensure_certified(ac: &DecisionAC, units: &[VarId]) -> Result<()> {
    if units == ac.units() {
        return if ac.certificate().complete() { Ok(()) } else { Err(Error::CertificateMissing) };
    }
    if check_structure_for(ac, units).is_empty() {
        Ok(())
    } else {
        Err(Error::CertificateMissing)
    }
}

fn check_evidence(ac: &DecisionAC, e: &Evidence) -> Result<()> {
    for (var, value) in e.iter() {
        let v = ac.variable(var).ok_or(Error::UnknownVariable(var))?;
        if value >= v.cardinality {
            return Err(Error::InvalidEvidence { var, value });
        }
    }
    Ok(())
}

/// Nodes whose cached variables meet `units`.
pub fn unit_nodes(ac: &DecisionAC, units: &[VarId]) -> Vec<bool> {
    let depends: Vec<bool> = ac.var_sets().iter().map(|s| s.iter().any(|v| units.contains(v))).collect();
    ac.ids().map(|id| depends[ac.vars_id(id) as usize]).collect()
}

/// Value of decision branch `child` of a sum on `dvar`.
fn branch_value(ac: &DecisionAC, child: NodeId, dvar: VarId) -> usize {
    ac.children(child)
        .iter()
        .find_map(|&g| match ac.kind(g) {
            NodeKind::Indicator { var, value } if var == dvar => Some(value),
            _ => None,
        })
        .unwrap_or(usize::MAX)
}

/// Bottom-up pass over `AC_U`: unit indicators follow `e` (1 when
/// unassigned), `AC_V` children read `leaves`, and sums either add or take
/// the max (ties go to the smaller decision value).
fn unit_pass(
    ac: &DecisionAC,
    in_u: &[bool],
    leaves: &[f64],
    e: &Evidence,
    maximize: bool,
    buf: &mut EvalBuffer,
    counters: &mut Counters,
) -> f64 {
    buf.reset_choices();
    for id in ac.ids() {
        if !in_u[id.index()] {
            continue;
        }
        let kids = ac.children(id);
        let val = |c: &NodeId, buf: &EvalBuffer| if in_u[c.index()] { buf.values[c.index()] } else { leaves[c.index()] };
        let v = match ac.kind(id) {
            NodeKind::Indicator { var, value } => indicator(e, var, value),
            NodeKind::Parameter { .. } => leaves[id.index()],
            NodeKind::Product => kids.iter().map(|c| val(c, buf)).product(),
            NodeKind::Sum { dvar } if maximize => {
                let mut best = 0usize;
                let mut best_v = f64::NEG_INFINITY;
                for (i, c) in kids.iter().enumerate() {
                    let x = val(c, buf);
                    let better = x > best_v
                        || (x == best_v
                            && dvar.is_some_and(|d| branch_value(ac, *c, d) < branch_value(ac, kids[best], d)));
                    if better {
                        best = i;
                        best_v = x;
                    }
                }
                buf.choice[id.index()] = best as u32;
                if kids.is_empty() {
                    0.0
                } else {
                    best_v
                }
            }
            NodeKind::Sum { .. } => kids.iter().map(|c| val(c, buf)).sum(),
        };
        counters.ops += kids.len() as u64;
        buf.values[id.index()] = counters.note(v);
    }
    if in_u[ac.root().index()] {
        buf.values[ac.root().index()]
    } else {
        leaves[ac.root().index()]
    }
}

/// Follows recorded max choices from the root and reads each visited
/// decision's unit value.
fn trace(ac: &DecisionAC, in_u: &[bool], buf: &EvalBuffer, units: &[VarId]) -> Evidence {
    let mut argmax = Evidence::new();
    let mut seen = vec![false; ac.node_count()];
    let mut stack = vec![ac.root()];
    while let Some(id) = stack.pop() {
        if seen[id.index()] || !in_u[id.index()] {
            continue;
        }
        seen[id.index()] = true;
        match ac.kind(id) {
            NodeKind::Product => stack.extend_from_slice(ac.children(id)),
            NodeKind::Sum { dvar } => {
                let pick = buf.choice[id.index()];
                if pick == NO_CHOICE {
                    continue;
                }
                let child = ac.children(id)[pick as usize];
                if let Some(d) = dvar.filter(|d| units.contains(d)) {
                    let value = branch_value(ac, child, d);
                    if value != usize::MAX && !argmax.contains(d) {
                        argmax.insert(d, value);
                    }
                }
                stack.push(child);
            }
            _ => {}
        }
    }
    for &u in units {
        if !argmax.contains(u) {
            argmax.insert(u, 0);
        }
    }
    argmax
}

/// `max_u Pr(u, e)` by one bottom-up pass with max at sums depending on the
/// units, then a top-down trace of the recorded choices.
pub fn ac_map(ac: &DecisionAC, units: &[VarId], e: &Evidence) -> Result<RmapResult> {
    let units = normalize_units(units);
    for &u in &units {
        ac.variable(u).ok_or(Error::UnknownVariable(u))?;
    }
    check_evidence(ac, e)?;
    ensure_certified(ac, &units)?;
    let in_u = unit_nodes(ac, &units);
    let params = ac.parameters();
    let mut counters = Counters::default();
    let mut leaves = EvalBuffer::new(ac);
    let not_u: Vec<bool> = in_u.iter().map(|&b| !b).collect();
    sum_pass(ac, e, &params, Some(&not_u), &mut leaves, &mut counters);
    let mut buf = EvalBuffer::new(ac);
    let value = unit_pass(ac, &in_u, &leaves.values, e, true, &mut buf, &mut counters);
    let argmax = trace(ac, &in_u, &buf, &units);
    let stats = SolveStats { ops: counters.ops, subnormals: counters.subnormals, ..Default::default() };
    Ok(RmapResult { argmax, value, stats })
}

#[inline]
fn quotient(a: f64, b: f64, index: usize) -> Result<f64> {
    if b == 0.0 {
        if a != 0.0 {
            return Err(Error::SupportViolation { index });
        }
        Ok(0.0)
    } else {
        Ok(a / b)
    }
}

/// Quotients `buf1 / buf2` (with `0/0 = 0`) at the `AC_V` nodes feeding
/// `AC_U` directly, and at the root when it lies in `AC_V`. Other entries
/// of the result are 0.
pub fn divide_parametrizations(
    ac: &DecisionAC,
    units: &[VarId],
    buf1: &EvalBuffer,
    buf2: &EvalBuffer,
) -> Result<EvalBuffer> {
    let in_u = unit_nodes(ac, &normalize_units(units));
    let mut out = EvalBuffer::new(ac);
    divide_frontier(ac, &in_u, &buf1.values, &buf2.values, &mut out.values, &mut Counters::default())?;
    Ok(out)
}

fn divide_frontier(
    ac: &DecisionAC,
    in_u: &[bool],
    v1: &[f64],
    v2: &[f64],
    out: &mut [f64],
    counters: &mut Counters,
) -> Result<Vec<NodeId>> {
    let mut done = vec![false; ac.node_count()];
    let mut frontier = Vec::new();
    let mut visit = |c: NodeId, counters: &mut Counters| -> Result<()> {
        if !done[c.index()] {
            done[c.index()] = true;
            out[c.index()] = counters.note(quotient(v1[c.index()], v2[c.index()], c.index())?);
            counters.ops += 1;
            frontier.push(c);
        }
        Ok(())
    };
    for id in ac.ids() {
        if in_u[id.index()] {
            for &c in ac.children(id) {
                if !in_u[c.index()] {
                    visit(c, counters)?;
                }
            }
        }
    }
    if !in_u[ac.root().index()] {
        visit(ac.root(), counters)?;
    }
    Ok(frontier)
}

/// Evaluates `AC_U` over the frontier quotients `theta3`, with unit
/// indicators set by `u` (1 when unassigned). Sums add, or take the max when
/// `maximize` is set.
pub fn evaluate_units(ac: &DecisionAC, units: &[VarId], theta3: &EvalBuffer, u: &Evidence, maximize: bool) -> f64 {
    let in_u = unit_nodes(ac, &normalize_units(units));
    let mut buf = EvalBuffer::new(ac);
    unit_pass(ac, &in_u, &theta3.values, u, maximize, &mut buf, &mut Counters::default())
}

/// `max_u Pr(e1 | u, e2)` by the two-pass traversal with frontier division.
pub fn ac_rmap(ac: &DecisionAC, units: &[VarId], e1: &Evidence, e2: &Evidence) -> Result<RmapResult> {
    ac_rmap_with(ac, units, e1, e2, &NeverInterrupt)
}

pub fn ac_rmap_with(
    ac: &DecisionAC,
    units: &[VarId],
    e1: &Evidence,
    e2: &Evidence,
    interrupt: &dyn Interrupt,
) -> Result<RmapResult> {
    let units = normalize_units(units);
    for &u in &units {
        ac.variable(u).ok_or(Error::UnknownVariable(u))?;
        if e1.contains(u) || e2.contains(u) {
            return Err(Error::NotDisjoint(u));
        }
    }
    if let Some(v) = e1.vars().find(|&v| e2.contains(v)) {
        return Err(Error::NotDisjoint(v));
    }
    check_evidence(ac, e1)?;
    check_evidence(ac, e2)?;
    ensure_certified(ac, &units)?;

    let in_u = unit_nodes(ac, &units);
    let not_u: Vec<bool> = in_u.iter().map(|&b| !b).collect();
    let params = ac.parameters();
    let mut counters = Counters::default();
    let both = e1.union(e2);
    let mut pass1 = EvalBuffer::new(ac);
    let mut pass2 = EvalBuffer::new(ac);
    sum_pass(ac, &both, &params, Some(&not_u), &mut pass1, &mut counters);
    if interrupt.is_interrupted() {
        return Err(Error::Interrupted);
    }
    sum_pass(ac, e2, &params, Some(&not_u), &mut pass2, &mut counters);
    if interrupt.is_interrupted() {
        return Err(Error::Interrupted);
    }
    let mut theta3 = vec![0.0; ac.node_count()];
    let frontier = divide_frontier(ac, &in_u, &pass1.values, &pass2.values, &mut theta3, &mut counters)?;

    let none = Evidence::new();
    let mut buf = pass1;
    let mut value = unit_pass(ac, &in_u, &theta3, &none, true, &mut buf, &mut counters);
    if value <= 0.0 {
        // Every u scores 0: pick one with Pr(u, e2) > 0 instead.
        for &c in &frontier {
            theta3[c.index()] = if pass2.values[c.index()] > 0.0 { 1.0 } else { 0.0 };
        }
        if unit_pass(ac, &in_u, &theta3, &none, true, &mut buf, &mut counters) <= 0.0 {
            return Err(Error::InconsistentEvidence);
        }
        value = 0.0;
    }
    let argmax = trace(ac, &in_u, &buf, &units);
    let stats = SolveStats { ops: counters.ops, subnormals: counters.subnormals, ..Default::default() };
    Ok(RmapResult { argmax, value, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{compile_factors, compile_ve, AcBuilder, ParamLabel};
    use crate::factor::Factor;
    use crate::network::{Cpt, Network, Variable};
    use crate::order::{minfill_order, minfill_order_for_scopes};
    use alloc::string::ToString;

    fn net2(prior: [f64; 2], cond: [f64; 4]) -> Network {
        let vars = vec![
            Variable { id: VarId(0), name: "U".to_string(), cardinality: 2 },
            Variable { id: VarId(1), name: "E".to_string(), cardinality: 2 },
        ];
        let cpts = vec![
            Cpt { child: VarId(0), parents: vec![], table: prior.to_vec() },
            Cpt { child: VarId(1), parents: vec![VarId(0)], table: cond.to_vec() },
        ];
        Network::new(vars, cpts).unwrap()
    }

    fn compiled(net: &Network, units: &[VarId]) -> DecisionAC {
        compile_ve(net, units, &minfill_order(net, units)).unwrap()
    }

    fn fig2() -> DecisionAC {
        let vars = vec![
            Variable { id: VarId(0), name: "A".to_string(), cardinality: 2 },
            Variable { id: VarId(1), name: "B".to_string(), cardinality: 2 },
        ];
        let f = Factor::new(vec![VarId(0), VarId(1)], vec![2, 2], vec![3.0, 4.0, 10.0, 12.0]).unwrap();
        let plan = minfill_order_for_scopes(2, [f.scope()], &[]);
        compile_factors(&vars, &[f], &[], &plan).unwrap()
    }

    #[test]
    fn figure_two_evaluations() {
        let ac = fig2();
        let full = Evidence::new().with(VarId(0), 1).with(VarId(1), 1);
        assert_eq!(evaluate(&ac, &full), 12.0);
        assert_eq!(evaluate(&ac, &Evidence::new().with(VarId(0), 0)), 7.0);
        assert_eq!(evaluate(&ac, &Evidence::new()), 29.0);
    }

    #[test]
    fn map_on_a_prior() {
        let net = net2([0.3, 0.7], [0.5, 0.5, 0.5, 0.5]);
        let ac = compiled(&net, &[VarId(0)]);
        let r = ac_map(&ac, &[VarId(0)], &Evidence::new()).unwrap();
        assert_eq!(r.argmax.get(VarId(0)), Some(1));
        assert!((r.value - 0.7).abs() < 1e-12);
        let plain = ac_map(&compiled(&net, &[]), &[], &Evidence::new()).unwrap();
        assert!((plain.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rmap_edge_cases() {
        let net = net2([0.3, 0.7], [0.9, 0.1, 0.2, 0.8]);
        let e1 = Evidence::new().with(VarId(1), 1);
        let r = ac_rmap(&compiled(&net, &[]), &[], &e1, &Evidence::new()).unwrap();
        assert!((r.value - (0.03 + 0.56)).abs() < 1e-12);
        let ac = compiled(&net, &[VarId(0)]);
        let r = ac_rmap(&ac, &[VarId(0)], &Evidence::new(), &Evidence::new()).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.argmax.get(VarId(0)), Some(0));
        let r = ac_rmap(&ac, &[VarId(0)], &e1, &Evidence::new()).unwrap();
        assert_eq!(r.argmax.get(VarId(0)), Some(1));
        assert!((r.value - 0.8).abs() < 1e-12);
        assert!(r.stats.ops <= 4 * ac.edge_count() as u64);
    }

    #[test]
    fn map_and_rmap_differ() {
        let net = net2([0.1, 0.9], [0.1, 0.9, 0.5, 0.5]);
        let ac = compiled(&net, &[VarId(0)]);
        let e1 = Evidence::new().with(VarId(1), 1);
        let map = ac_map(&ac, &[VarId(0)], &e1).unwrap();
        let rmap = ac_rmap(&ac, &[VarId(0)], &e1, &Evidence::new()).unwrap();
        assert_eq!(map.argmax.get(VarId(0)), Some(1));
        assert_eq!(rmap.argmax.get(VarId(0)), Some(0));
    }

    #[test]
    fn inconsistent_e2() {
        let net = net2([1.0, 0.0], [1.0, 0.0, 0.0, 1.0]);
        let e2 = Evidence::new().with(VarId(1), 1);
        let ac = compiled(&net, &[VarId(0)]);
        assert_eq!(ac_rmap(&ac, &[VarId(0)], &Evidence::new(), &e2), Err(Error::InconsistentEvidence));
    }

    #[test]
    fn uncertified_units_are_refused() {
        let net = net2([0.3, 0.7], [0.9, 0.1, 0.2, 0.8]);
        // U eliminated first, so its sum sits below E's.
        let plan = minfill_order(&net, &[VarId(1)]);
        let ac = compile_ve(&net, &[VarId(1)], &plan).unwrap();
        assert_eq!(ac_map(&ac, &[VarId(0)], &Evidence::new()).unwrap_err(), Error::CertificateMissing);
    }

    #[test]
    fn parameter_quotients() {
        let mut b = AcBuilder::new();
        let l0 = b.indicator(VarId(0), 0);
        let l1 = b.indicator(VarId(0), 1);
        let p = b.parameter(0.4, ParamLabel::Free(0));
        let q = b.parameter(0.6, ParamLabel::Free(1));
        let a = b.product(&[l0, p]);
        let c = b.product(&[l1, q]);
        let root = b.sum(Some(VarId(0)), &[a, c]);
        let vars = vec![Variable { id: VarId(0), name: "X".to_string(), cardinality: 2 }];
        let ac = b.finish(root, vars, &[VarId(0)]);
        let mut buf1 = EvalBuffer::new(&ac);
        evaluate_into(&ac, &Evidence::new(), &ac.parameters(), &mut buf1);
        let theta3 = divide_parametrizations(&ac, &[VarId(0)], &buf1, &buf1.clone()).unwrap();
        assert_eq!(theta3.values[p.index()], 1.0);
        assert_eq!(theta3.values[q.index()], 1.0);
    }
}
