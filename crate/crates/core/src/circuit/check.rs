//! Structural and semantic checks for decision circuits.

use alloc::vec;
use alloc::vec::Vec;

use super::{Certificate, DecisionAC, NodeId, NodeKind};
use crate::network::{Evidence, Odometer, VarId};
use crate::{Error, Result};

/// Largest number of unit instantiations [`check_u_determinism`] visits.
pub const DETERMINISM_BUDGET: u64 = 1 << 20;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StructureViolation {
    /// A child id is not smaller than its parent's.
    ChildOrder { node: NodeId, child: NodeId },
    Decomposability { node: NodeId, shared: VarId },
    Smoothness { node: NodeId, child: NodeId },
    /// A sum without a decision variable or whose children are not
    /// products over distinct indicators of it.
    DecisionForm { node: NodeId },
    /// A unit-decision sum reachable below a non-unit sum.
    UnitBelowNonUnit { node: NodeId, above: NodeId },
    /// An indicator whose parent is not a product sitting directly under
    /// sums deciding the indicator's variable.
    IndicatorPlacement { indicator: NodeId, parent: NodeId },
}

pub(crate) fn certificate_of(report: &[StructureViolation]) -> Certificate {
    let mut c = Certificate {
        decomposable: true,
        smooth: true,
        decision: true,
        units_on_top: true,
        indicators_attached: true,
    };
    for v in report {
        match v {
            StructureViolation::ChildOrder { .. } => {
                c.decomposable = false;
                c.smooth = false;
            }
            StructureViolation::Decomposability { .. } => c.decomposable = false,
            StructureViolation::Smoothness { .. } => c.smooth = false,
            StructureViolation::DecisionForm { .. } => c.decision = false,
            StructureViolation::UnitBelowNonUnit { .. } => c.units_on_top = false,
            StructureViolation::IndicatorPlacement { .. } => c.indicators_attached = false,
        }
    }
    c
}

/// [`check_structure_for`] with the circuit's own unit variables.
pub fn check_structure(ac: &DecisionAC) -> Vec<StructureViolation> {
    check_structure_for(ac, ac.units())
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Parents {
    None,
    Decides(VarId),
    Mixed,
}

/// Checks decomposability, smoothness and decision form against cached
/// variable sets, plus the two placement conditions that make the circuit
/// answer MAP over `units`: unit sums sit above every other sum, and each
/// indicator hangs only off products directly under its own decision sums.
pub fn check_structure_for(ac: &DecisionAC, units: &[VarId]) -> Vec<StructureViolation> {
    let mut report = Vec::new();
    let max_var = ac.var_sets().iter().flatten().map(|v| v.index() + 1).max().unwrap_or(0);
    let mut stamp = vec![u32::MAX; max_var];
    let mut parents = vec![Parents::None; ac.node_count()];
    let is_unit = |v: VarId| units.contains(&v);

    for id in ac.ids() {
        let kids = ac.children(id);
        for &c in kids {
            if c >= id {
                report.push(StructureViolation::ChildOrder { node: id, child: c });
            }
        }
        if kids.iter().any(|&c| c >= id) {
            continue;
        }
        match ac.kind(id) {
            NodeKind::Product => {
                for &c in kids {
                    for &v in ac.vars(c) {
                        if stamp[v.index()] == id.0 {
                            report.push(StructureViolation::Decomposability { node: id, shared: v });
                        }
                        stamp[v.index()] = id.0;
                    }
                    if matches!(ac.kind(c), NodeKind::Product) {
                        parents[c.index()] = Parents::Mixed;
                    }
                }
            }
            NodeKind::Sum { dvar } => {
                if let Some(&first) = kids.first() {
                    for &c in &kids[1..] {
                        if ac.vars_id(c) != ac.vars_id(first) {
                            report.push(StructureViolation::Smoothness { node: id, child: c });
                        }
                    }
                }
                if !decision_form(ac, id, dvar) {
                    report.push(StructureViolation::DecisionForm { node: id });
                }
                for &c in kids {
                    let p = &mut parents[c.index()];
                    *p = match (*p, dvar) {
                        (Parents::None, Some(d)) => Parents::Decides(d),
                        (Parents::Decides(e), Some(d)) if e == d => Parents::Decides(d),
                        _ => Parents::Mixed,
                    };
                }
            }
            _ => {}
        }
    }
    if !report.is_empty() && report.iter().any(|v| matches!(v, StructureViolation::ChildOrder { .. })) {
        return report;
    }

    for id in ac.ids() {
        for &c in ac.children(id) {
            if let NodeKind::Indicator { var, .. } = ac.kind(c) {
                let ok = matches!(ac.kind(id), NodeKind::Product) && parents[id.index()] == Parents::Decides(var);
                if !ok {
                    report.push(StructureViolation::IndicatorPlacement { indicator: c, parent: id });
                }
            }
        }
    }
    if matches!(ac.kind(ac.root()), NodeKind::Indicator { .. }) {
        report.push(StructureViolation::IndicatorPlacement { indicator: ac.root(), parent: ac.root() });
    }

    // Top-down: nearest non-unit sum above each node.
    let mut above: Vec<Option<NodeId>> = vec![None; ac.node_count()];
    for id in ac.ids().rev() {
        let here = match ac.kind(id) {
            NodeKind::Sum { dvar } if !dvar.is_some_and(is_unit) => Some(id),
            _ => above[id.index()],
        };
        if let (NodeKind::Sum { dvar: Some(d) }, Some(a)) = (ac.kind(id), above[id.index()]) {
            if is_unit(d) {
                report.push(StructureViolation::UnitBelowNonUnit { node: id, above: a });
            }
        }
        if here.is_some() {
            for &c in ac.children(id) {
                if above[c.index()].is_none() {
                    above[c.index()] = here;
                }
            }
        }
    }
    report
}

fn decision_form(ac: &DecisionAC, id: NodeId, dvar: Option<VarId>) -> bool {
    let Some(d) = dvar else { return false };
    let mut seen: Vec<usize> = Vec::new();
    for &c in ac.children(id) {
        if !matches!(ac.kind(c), NodeKind::Product) {
            return false;
        }
        let mut values = ac.children(c).iter().filter_map(|&g| match ac.kind(g) {
            NodeKind::Indicator { var, value } if var == d => Some(value),
            _ => None,
        });
        let (Some(value), None) = (values.next(), values.next()) else { return false };
        if seen.contains(&value) {
            return false;
        }
        seen.push(value);
    }
    true
}

/// A sum node depending on the units with two or more non-zero children
/// under the unit instantiation `units`.
#[derive(Clone, Debug, PartialEq)]
pub struct DeterminismViolation {
    pub node: NodeId,
    pub units: Evidence,
}

/// Enumerates every instantiation of `units` (other indicators set to 1) and
/// reports each sum node depending on the units that has more than one
/// non-zero child.
pub fn check_u_determinism(ac: &DecisionAC, units: &[VarId]) -> Result<Vec<DeterminismViolation>> {
    let units = crate::ve::normalize_units(units);
    let mut cards = Vec::with_capacity(units.len());
    for &u in &units {
        cards.push(ac.variable(u).ok_or(Error::UnknownVariable(u))?.cardinality);
    }
    let total = crate::network::table_len(&cards);
    if total > DETERMINISM_BUDGET as u128 {
        return Err(Error::BudgetExceeded { limit: DETERMINISM_BUDGET });
    }
    let depends: Vec<bool> = ac.var_sets().iter().map(|s| s.iter().any(|v| units.contains(v))).collect();
    let params = ac.parameters();
    let mut values = vec![0.0f64; ac.node_count()];
    let mut report = Vec::new();
    let mut odo = Odometer::new(&cards);
    while let Some(assignment) = odo.current() {
        let u: Evidence = units.iter().copied().zip(assignment.iter().copied()).collect();
        for id in ac.ids() {
            let kids = ac.children(id);
            values[id.index()] = match ac.kind(id) {
                NodeKind::Indicator { var, value } => match u.get(var) {
                    Some(x) if x != value => 0.0,
                    _ => 1.0,
                },
                NodeKind::Parameter { .. } => params[id.index()],
                NodeKind::Product => kids.iter().map(|c| values[c.index()]).product(),
                NodeKind::Sum { .. } => {
                    if depends[ac.vars_id(id) as usize] && kids.iter().filter(|c| values[c.index()] != 0.0).count() > 1 {
                        report.push(DeterminismViolation { node: id, units: u.clone() });
                    }
                    kids.iter().map(|c| values[c.index()]).sum()
                }
            };
        }
        if odo.advance().is_none() {
            break;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{AcBuilder, ParamLabel};
    use crate::network::Variable;
    use alloc::format;

    fn vars(n: u32) -> Vec<Variable> {
        (0..n).map(|i| Variable { id: VarId(i), name: format!("V{i}"), cardinality: 2 }).collect()
    }

    #[test]
    fn overlapping_product_is_not_decomposable() {
        let mut b = AcBuilder::new();
        let a = b.indicator(VarId(0), 0);
        let a2 = b.indicator(VarId(0), 1);
        let p = b.product(&[a, a2]);
        let ac = b.finish(p, vars(1), &[]);
        let report = check_structure(&ac);
        assert!(report.contains(&StructureViolation::Decomposability { node: p, shared: VarId(0) }));
        assert!(!ac.certificate().decomposable);
    }

    #[test]
    fn unit_sum_below_other_sum_is_flagged() {
        // Σ_b λ_b · (Σ_u λ_u · θ)
        let mut b = AcBuilder::new();
        let lu0 = b.indicator(VarId(0), 0);
        let lu1 = b.indicator(VarId(0), 1);
        let lb0 = b.indicator(VarId(1), 0);
        let lb1 = b.indicator(VarId(1), 1);
        let t = b.parameter(0.5, ParamLabel::Free(0));
        let u0 = b.product(&[lu0, t]);
        let u1 = b.product(&[lu1, t]);
        let su = b.sum(Some(VarId(0)), &[u0, u1]);
        let b0 = b.product(&[lb0, su]);
        let b1 = b.product(&[lb1, su]);
        let root = b.sum(Some(VarId(1)), &[b0, b1]);
        let ac = b.finish(root, vars(2), &[VarId(0)]);
        let report = check_structure(&ac);
        assert_eq!(report, vec![StructureViolation::UnitBelowNonUnit { node: su, above: root }]);
        assert!(!ac.certificate().units_on_top);
        assert!(check_structure_for(&ac, &[]).is_empty());
    }

    #[test]
    fn counterexample_is_not_unit_deterministic() {
        // a·λx + b·λx̄ + c·λx
        let mut b = AcBuilder::new();
        let lx = b.indicator(VarId(0), 1);
        let lnx = b.indicator(VarId(0), 0);
        let pa = b.parameter(0.2, ParamLabel::Free(0));
        let pb = b.parameter(0.5, ParamLabel::Free(1));
        let pc = b.parameter(0.3, ParamLabel::Free(2));
        let na = b.product(&[lx, pa]);
        let nb = b.product(&[lnx, pb]);
        let nc = b.product(&[lx, pc]);
        let root = b.sum(Some(VarId(0)), &[na, nb, nc]);
        let ac = b.finish(root, vars(1), &[VarId(0)]);
        let report = check_u_determinism(&ac, &[VarId(0)]).unwrap();
        assert_eq!(report.len(), 1);
        assert_eq!(report[0].node, root);
        assert_eq!(report[0].units.get(VarId(0)), Some(1));
        assert!(check_structure(&ac).contains(&StructureViolation::DecisionForm { node: root }));
    }

    #[test]
    fn loose_indicator_is_flagged() {
        let mut b = AcBuilder::new();
        let l = b.indicator(VarId(0), 0);
        let p = b.parameter(0.5, ParamLabel::Free(0));
        let root = b.product(&[l, p]);
        let ac = b.finish(root, vars(1), &[]);
        assert!(check_structure(&ac).contains(&StructureViolation::IndicatorPlacement { indicator: l, parent: root }));
    }
}
