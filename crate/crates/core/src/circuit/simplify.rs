use alloc::vec;
use alloc::vec::Vec;

use super::{reachable, AcBuilder, DecisionAC, NodeId, NodeKind};

/// Rebuilds `ac` with zero-folding, one-elision and hash-consing, then drops
/// unreachable nodes. Sums keep their decision variable and every rebuilt
/// node keeps the variable set cached on its original.
pub fn simplify(ac: &DecisionAC) -> DecisionAC {
    let folded = rebuild(ac, true);
    compact(&folded)
}

/// Keeps only the nodes reachable from the root, in their relative order.
pub(crate) fn compact(ac: &DecisionAC) -> DecisionAC {
    let mut out = rebuild(ac, false);
    out.certify();
    out
}

fn rebuild(ac: &DecisionAC, fold: bool) -> DecisionAC {
    let live = reachable(ac);
    let mut b = AcBuilder::new().folding(fold);
    let set_ids: Vec<u32> = ac.var_sets().iter().map(|s| b.intern_vars(s)).collect();
    let mut map = vec![NodeId::ZERO; ac.node_count()];
    let mut kids = Vec::new();
    for id in ac.ids() {
        if !live[id.index()] {
            continue;
        }
        kids.clear();
        kids.extend(ac.children(id).iter().map(|c| map[c.index()]));
        let vars = Some(set_ids[ac.vars_id(id) as usize]);
        map[id.index()] = match ac.kind(id) {
            NodeKind::Indicator { var, value } => b.indicator(var, value),
            NodeKind::Parameter { value, label } => b.parameter(value, label),
            NodeKind::Product => b.product_inner(&kids, vars),
            NodeKind::Sum { dvar } => b.sum_inner(dvar, &kids, vars),
        };
    }
    b.finish_uncertified(map[ac.root().index()], ac.variables().to_vec(), ac.units())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::ParamLabel;
    use crate::network::{VarId, Variable};
    use alloc::string::ToString;

    #[test]
    fn zero_branch_is_dropped_and_dvar_kept() {
        let mut b = AcBuilder::new();
        let l0 = b.indicator(VarId(0), 0);
        let l1 = b.indicator(VarId(0), 1);
        let p = b.parameter(0.25, ParamLabel::Free(0));
        let a = b.product(&[l0, NodeId::ZERO]);
        let c = b.product(&[l1, p]);
        let s = b.sum(Some(VarId(0)), &[a, c]);
        let vars = vec![Variable { id: VarId(0), name: "X".to_string(), cardinality: 2 }];
        let ac = b.finish(s, vars, &[]);
        let simple = simplify(&ac);
        let root = simple.root();
        assert_eq!(simple.kind(root), NodeKind::Sum { dvar: Some(VarId(0)) });
        assert_eq!(simple.children(root).len(), 1);
        assert_eq!(simple.vars(root), &[VarId(0)]);
        // zero, one, one indicator, the parameter, one product, the sum
        assert_eq!(simple.node_count(), 6);
        assert_eq!(simple.edge_count(), 3);
        assert!(simple.certificate().complete());
    }
}
