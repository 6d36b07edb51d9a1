//! Decision arithmetic circuits: node table, hash-consing builder,
//! compilation by symbolic variable elimination, structural checks and
//! simplification.
//!
//! Nodes are stored bottom-up; every child id is smaller than its parent's.
//! Ids 0 and 1 are always the shared constants 0 and 1.

use alloc::vec;
use alloc::vec::Vec;
use core::hash::{BuildHasher, Hash, Hasher};

use hashbrown::{DefaultHashBuilder, HashMap, HashTable};

use crate::network::{VarId, Variable};

mod check;
mod compile;
mod dump;
mod simplify;

pub use check::{
    check_structure, check_structure_for, check_u_determinism, DeterminismViolation, StructureViolation,
    DETERMINISM_BUDGET,
};
pub use compile::{compile_factors, compile_ve, Compiler};
pub use dump::{read_dump, write_dump};
pub use simplify::simplify;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

impl NodeId {
    pub const ZERO: NodeId = NodeId(0);
    pub const ONE: NodeId = NodeId(1);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Where a parameter leaf came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParamLabel {
    Constant,
    /// Cell `index` of table `table` (a CPT child id or a factor position).
    Cell { table: u32, index: u32 },
    Free(u32),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NodeKind {
    Indicator { var: VarId, value: usize },
    Parameter { value: f64, label: ParamLabel },
    Sum { dvar: Option<VarId> },
    Product,
}

#[derive(Clone, Debug)]
struct Node {
    kind: NodeKind,
    start: u32,
    len: u32,
    vars: u32,
}

/// Which structural properties an independent checker pass confirmed for
/// the circuit's unit variables.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Certificate {
    pub decomposable: bool,
    pub smooth: bool,
    pub decision: bool,
    /// No unit-decision sum below a non-unit sum.
    pub units_on_top: bool,
    /// Indicators only under products directly below their own decision sum.
    pub indicators_attached: bool,
}

impl Certificate {
    pub fn complete(&self) -> bool {
        self.decomposable && self.smooth && self.decision && self.units_on_top && self.indicators_attached
    }
}

#[derive(Clone, Debug)]
pub struct DecisionAC {
    nodes: Vec<Node>,
    edges: Vec<NodeId>,
    var_sets: Vec<Vec<VarId>>,
    root: NodeId,
    variables: Vec<Variable>,
    units: Vec<VarId>,
    certificate: Certificate,
}

impl DecisionAC {
    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Sum of child-list lengths.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn ids(&self) -> impl DoubleEndedIterator<Item = NodeId> + ExactSizeIterator {
        (0..self.nodes.len() as u32).map(NodeId)
    }

    pub fn kind(&self, id: NodeId) -> NodeKind {
        self.nodes[id.index()].kind
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        let n = &self.nodes[id.index()];
        &self.edges[n.start as usize..(n.start + n.len) as usize]
    }

    /// Cached variables with indicators at or below `id`, ascending.
    pub fn vars(&self, id: NodeId) -> &[VarId] {
        &self.var_sets[self.nodes[id.index()].vars as usize]
    }

    /// Interned id of [`Self::vars`]; equal ids mean equal sets.
    pub fn vars_id(&self, id: NodeId) -> u32 {
        self.nodes[id.index()].vars
    }

    pub fn var_sets(&self) -> &[Vec<VarId>] {
        &self.var_sets
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, var: VarId) -> Option<&Variable> {
        self.variables.iter().find(|v| v.id == var)
    }

    pub fn units(&self) -> &[VarId] {
        &self.units
    }

    pub fn certificate(&self) -> Certificate {
        self.certificate
    }

    /// Parameter values indexed by node id (0 for other nodes).
    pub fn parameters(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .map(|n| match n.kind {
                NodeKind::Parameter { value, .. } => value,
                _ => 0.0,
            })
            .collect()
    }

    /// Re-runs the structural checker for the stored units.
    pub fn certify(&mut self) {
        let report = check_structure_for(self, &self.units.clone());
        self.certificate = check::certificate_of(&report);
    }

    /// The same circuit with a different unit designation, re-certified.
    pub fn with_units(mut self, units: &[VarId]) -> Self {
        self.units = crate::ve::normalize_units(units);
        self.certify();
        self
    }
}

/// Number of edges, the circuit size reported by benchmarks.
pub fn ac_size(ac: &DecisionAC) -> usize {
    ac.edge_count()
}

enum Key<'a> {
    Indicator(VarId, usize),
    Parameter(u64),
    Sum(Option<VarId>, u32, &'a [NodeId]),
    Product(u32, &'a [NodeId]),
}

/// Hash-consing circuit builder.
///
/// With folding on, products containing the zero constant become zero,
/// the constant 1 is elided from products with two or more children and
/// zero children are dropped from sums.
#[derive(Clone)]
pub struct AcBuilder {
    nodes: Vec<Node>,
    edges: Vec<NodeId>,
    var_sets: Vec<Vec<VarId>>,
    set_index: HashMap<Vec<VarId>, u32>,
    unions: HashMap<(u32, u32), u32>,
    table: HashTable<NodeId>,
    hasher: DefaultHashBuilder,
    fold: bool,
    scratch: Vec<NodeId>,
}

impl Default for AcBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl AcBuilder {
    pub fn new() -> Self {
        let mut b = Self {
            nodes: Vec::new(),
            edges: Vec::new(),
            var_sets: Vec::new(),
            set_index: HashMap::new(),
            unions: HashMap::new(),
            table: HashTable::new(),
            hasher: DefaultHashBuilder::default(),
            fold: false,
            scratch: Vec::new(),
        };
        let empty = b.intern_vars(&[]);
        debug_assert_eq!(empty, 0);
        for value in [0.0f64, 1.0] {
            let kind = NodeKind::Parameter { value, label: ParamLabel::Constant };
            b.insert(Key::Parameter(value.to_bits()), kind, &[], 0);
        }
        b
    }

    pub fn folding(mut self, fold: bool) -> Self {
        self.fold = fold;
        self
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Interns a variable set (sorted and deduplicated first).
    pub fn intern_vars(&mut self, vars: &[VarId]) -> u32 {
        let mut v = vars.to_vec();
        v.sort_unstable();
        v.dedup();
        if let Some(&id) = self.set_index.get(&v) {
            return id;
        }
        let id = self.var_sets.len() as u32;
        self.var_sets.push(v.clone());
        self.set_index.insert(v, id);
        id
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        if a == b || b == 0 {
            return a;
        }
        if a == 0 {
            return b;
        }
        let key = (a.min(b), a.max(b));
        if let Some(&id) = self.unions.get(&key) {
            return id;
        }
        let (x, y) = (&self.var_sets[a as usize], &self.var_sets[b as usize]);
        let mut merged = Vec::with_capacity(x.len() + y.len());
        merged.extend_from_slice(x);
        merged.extend_from_slice(y);
        let id = self.intern_vars(&merged);
        self.unions.insert(key, id);
        id
    }

    fn hash_key(&self, key: &Key<'_>) -> u64 {
        let mut h = self.hasher.build_hasher();
        match key {
            Key::Indicator(v, x) => (0u8, v, x).hash(&mut h),
            Key::Parameter(bits) => (1u8, bits).hash(&mut h),
            Key::Sum(d, vars, ch) => (2u8, d, vars, *ch).hash(&mut h),
            Key::Product(vars, ch) => (3u8, vars, *ch).hash(&mut h),
        }
        h.finish()
    }

    fn matches(nodes: &[Node], edges: &[NodeId], id: NodeId, key: &Key<'_>) -> bool {
        let n = &nodes[id.index()];
        let kids = &edges[n.start as usize..(n.start + n.len) as usize];
        match (key, n.kind) {
            (Key::Indicator(v, x), NodeKind::Indicator { var, value }) => *v == var && *x == value,
            (Key::Parameter(bits), NodeKind::Parameter { value, .. }) => *bits == value.to_bits(),
            (Key::Sum(d, vars, ch), NodeKind::Sum { dvar }) => *d == dvar && *vars == n.vars && *ch == kids,
            (Key::Product(vars, ch), NodeKind::Product) => *vars == n.vars && *ch == kids,
            _ => false,
        }
    }

    fn insert(&mut self, key: Key<'_>, kind: NodeKind, children: &[NodeId], vars: u32) -> NodeId {
        let hash = self.hash_key(&key);
        let (nodes, edges) = (&self.nodes, &self.edges);
        if let Some(&id) = self.table.find(hash, |&id| Self::matches(nodes, edges, id, &key)) {
            return id;
        }
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Node { kind, start: self.edges.len() as u32, len: children.len() as u32, vars });
        self.edges.extend_from_slice(children);
        let hasher = self.hasher;
        let (nodes, edges) = (&self.nodes, &self.edges);
        self.table.insert_unique(hash, id, |&other| {
            let n = &nodes[other.index()];
            let kids = &edges[n.start as usize..(n.start + n.len) as usize];
            let mut h = hasher.build_hasher();
            match n.kind {
                NodeKind::Indicator { var, value } => (0u8, &var, &value).hash(&mut h),
                NodeKind::Parameter { value, .. } => (1u8, &value.to_bits()).hash(&mut h),
                NodeKind::Sum { dvar } => (2u8, &dvar, &n.vars, kids).hash(&mut h),
                NodeKind::Product => (3u8, &n.vars, kids).hash(&mut h),
            }
            h.finish()
        });
        id
    }

    pub fn indicator(&mut self, var: VarId, value: usize) -> NodeId {
        let vars = self.intern_vars(&[var]);
        self.insert(Key::Indicator(var, value), NodeKind::Indicator { var, value }, &[], vars)
    }

    /// A parameter leaf; 0 and 1 map to the shared constants and equal
    /// values share one node (the first label is kept).
    pub fn parameter(&mut self, value: f64, label: ParamLabel) -> NodeId {
        if value == 0.0 {
            return NodeId::ZERO;
        }
        if value == 1.0 {
            return NodeId::ONE;
        }
        self.insert(Key::Parameter(value.to_bits()), NodeKind::Parameter { value, label }, &[], 0)
    }

    fn vars_of(&mut self, children: &[NodeId]) -> u32 {
        let mut acc = 0;
        for c in children {
            let v = self.nodes[c.index()].vars;
            acc = self.union(acc, v);
        }
        acc
    }

    /// Product node; children are put in ascending id order.
    pub fn product(&mut self, children: &[NodeId]) -> NodeId {
        self.product_inner(children, None)
    }

    /// Sum node with decision variable `dvar`; child order is kept.
    pub fn sum(&mut self, dvar: Option<VarId>, children: &[NodeId]) -> NodeId {
        self.sum_inner(dvar, children, None)
    }

    pub(crate) fn product_inner(&mut self, children: &[NodeId], vars: Option<u32>) -> NodeId {
        let mut kids = core::mem::take(&mut self.scratch);
        kids.clear();
        kids.extend_from_slice(children);
        kids.sort_unstable();
        if self.fold {
            if kids.contains(&NodeId::ZERO) {
                self.scratch = kids;
                return NodeId::ZERO;
            }
            if kids.len() >= 2 {
                kids.retain(|&c| c != NodeId::ONE);
            }
            if kids.is_empty() {
                self.scratch = kids;
                return NodeId::ONE;
            }
        }
        let id = if kids.is_empty() {
            NodeId::ONE
        } else {
            let vars = match vars {
                Some(v) => v,
                None => self.vars_of(&kids),
            };
            self.insert(Key::Product(vars, &kids), NodeKind::Product, &kids, vars)
        };
        self.scratch = kids;
        id
    }

    pub(crate) fn sum_inner(&mut self, dvar: Option<VarId>, children: &[NodeId], vars: Option<u32>) -> NodeId {
        let mut kids = core::mem::take(&mut self.scratch);
        kids.clear();
        kids.extend_from_slice(children);
        if self.fold {
            kids.retain(|&c| c != NodeId::ZERO);
        }
        let id = if kids.is_empty() {
            NodeId::ZERO
        } else {
            let vars = match vars {
                Some(v) => v,
                None => self.vars_of(&kids),
            };
            self.insert(Key::Sum(dvar, vars, &kids), NodeKind::Sum { dvar }, &kids, vars)
        };
        self.scratch = kids;
        id
    }

    /// Freezes the table and certifies it. Nodes not reachable from `root`
    /// are kept; [`simplify`] drops them.
    pub fn finish(self, root: NodeId, variables: Vec<Variable>, units: &[VarId]) -> DecisionAC {
        let mut ac = self.finish_uncertified(root, variables, units);
        ac.certify();
        ac
    }

    pub(crate) fn finish_uncertified(self, root: NodeId, variables: Vec<Variable>, units: &[VarId]) -> DecisionAC {
        DecisionAC {
            nodes: self.nodes,
            edges: self.edges,
            var_sets: self.var_sets,
            root,
            variables,
            units: crate::ve::normalize_units(units),
            certificate: Certificate::default(),
        }
    }
}

/// Marks nodes reachable from the root.
pub(crate) fn reachable(ac: &DecisionAC) -> Vec<bool> {
    let mut seen = vec![false; ac.node_count()];
    seen[ac.root().index()] = true;
    for id in ac.ids().rev() {
        if seen[id.index()] {
            for &c in ac.children(id) {
                seen[c.index()] = true;
            }
        }
    }
    seen
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn var(i: u32) -> Variable {
        Variable { id: VarId(i), name: alloc::format!("V{i}"), cardinality: 2 }
    }

    #[test]
    fn constants_and_hash_consing() {
        let mut b = AcBuilder::new();
        assert_eq!(b.parameter(0.0, ParamLabel::Free(0)), NodeId::ZERO);
        assert_eq!(b.parameter(1.0, ParamLabel::Free(0)), NodeId::ONE);
        let p = b.parameter(0.3, ParamLabel::Free(1));
        assert_eq!(b.parameter(0.3, ParamLabel::Free(2)), p);
        let l = b.indicator(VarId(0), 0);
        assert_eq!(b.indicator(VarId(0), 0), l);
        let x = b.product(&[p, l]);
        assert_eq!(b.product(&[l, p]), x);
        assert_eq!(b.len(), 5);
    }

    #[test]
    fn folding_rules() {
        let mut b = AcBuilder::new().folding(true);
        let l0 = b.indicator(VarId(0), 0);
        let l1 = b.indicator(VarId(0), 1);
        let p = b.parameter(0.4, ParamLabel::Free(0));
        assert_eq!(b.product(&[l0, NodeId::ZERO]), NodeId::ZERO);
        let only = b.product(&[l0, NodeId::ONE]);
        let a = b.product(&[l1, p]);
        let s = b.sum(Some(VarId(0)), &[NodeId::ZERO, a]);
        let ac = b.finish(s, vec![var(0)], &[]);
        assert_eq!(ac.children(only), &[l0]);
        assert_eq!(ac.children(s), &[a]);
        assert_eq!(ac.vars(s), &[VarId(0)]);
        let mut b = AcBuilder::new().folding(true);
        assert_eq!(b.sum(None, &[NodeId::ZERO]), NodeId::ZERO);
    }

    #[test]
    fn prior_circuit_size() {
        let mut b = AcBuilder::new();
        let l0 = b.indicator(VarId(0), 0);
        let l1 = b.indicator(VarId(0), 1);
        let p0 = b.parameter(0.3, ParamLabel::Cell { table: 0, index: 0 });
        let p1 = b.parameter(0.7, ParamLabel::Cell { table: 0, index: 1 });
        let a = b.product(&[l0, p0]);
        let c = b.product(&[l1, p1]);
        let s = b.sum(Some(VarId(0)), &[a, c]);
        let ac = b.finish(s, vec![var(0)], &[]);
        assert_eq!(ac_size(&ac), 6);
        assert!(ac.certificate().complete());
        assert_eq!(ac.variables()[0].name, "V0".to_string());
    }
}
