//! Discrete networks: variables, CPTs, evidence and index arithmetic.
//!
//! Tables are row-major with the last variable varying fastest. For a CPT the
//! row layout is `parents..., child`, so the child value is the innermost
//! axis.

use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;
use core::fmt;

use crate::{Error, Result};

/// Tolerance for row normalization.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct VarId(pub u32);

impl VarId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for VarId {
    fn from(i: usize) -> Self {
        VarId(i as u32)
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Variable {
    pub id: VarId,
    pub name: String,
    pub cardinality: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cpt {
    pub child: VarId,
    pub parents: Vec<VarId>,
    pub table: Vec<f64>,
}

impl Cpt {
    /// Scope of the CPT as a factor: parents in declared order, then the child.
    pub fn family(&self) -> Vec<VarId> {
        let mut scope = self.parents.clone();
        scope.push(self.child);
        scope
    }
}

/// One broken invariant, always naming the offending variable.
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    BadCardinality { var: VarId },
    DuplicateName { var: VarId },
    MissingCpt { var: VarId },
    DuplicateCpt { var: VarId },
    UnknownChild { var: VarId },
    UnknownParent { var: VarId, parent: VarId },
    RepeatedParent { var: VarId, parent: VarId },
    TableLength { var: VarId, expected: usize, found: usize },
    EntryOutOfRange { var: VarId, index: usize },
    NotNormalized { var: VarId, row: usize, sum: f64 },
    /// The listed variables lie on or behind a parent cycle.
    Cycle { vars: Vec<VarId> },
}

impl Violation {
    pub fn var(&self) -> VarId {
        match self {
            Violation::BadCardinality { var }
            | Violation::DuplicateName { var }
            | Violation::MissingCpt { var }
            | Violation::DuplicateCpt { var }
            | Violation::UnknownChild { var }
            | Violation::UnknownParent { var, .. }
            | Violation::RepeatedParent { var, .. }
            | Violation::TableLength { var, .. }
            | Violation::EntryOutOfRange { var, .. }
            | Violation::NotNormalized { var, .. } => *var,
            Violation::Cycle { vars } => vars.first().copied().unwrap_or_default(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BadCardinality { var } => write!(f, "{var}: cardinality must be at least 2"),
            Violation::DuplicateName { var } => write!(f, "{var}: duplicate name"),
            Violation::MissingCpt { var } => write!(f, "{var}: no CPT"),
            Violation::DuplicateCpt { var } => write!(f, "{var}: more than one CPT"),
            Violation::UnknownChild { var } => write!(f, "{var}: CPT for an unknown variable"),
            Violation::UnknownParent { var, parent } => {
                write!(f, "{var}: unknown parent {parent}")
            }
            Violation::RepeatedParent { var, parent } => {
                write!(f, "{var}: parent {parent} listed twice")
            }
            Violation::TableLength { var, expected, found } => {
                write!(f, "{var}: table has {found} entries, expected {expected}")
            }
            Violation::EntryOutOfRange { var, index } => {
                write!(f, "{var}: entry {index} outside [0, 1]")
            }
            Violation::NotNormalized { var, row, sum } => {
                write!(f, "{var}: row {row} sums to {sum}")
            }
            Violation::Cycle { vars } => {
                f.write_str("cycle through")?;
                for v in vars {
                    write!(f, " {v}")?;
                }
                Ok(())
            }
        }
    }
}

/// A DAG of discrete variables with one CPT each.
///
/// Variable ids are positions in [`Network::variables`]. A network built
/// with [`Network::new`] is validated and its CPTs are stored by child id;
/// [`Network::new_unchecked`] keeps whatever it is given, for inspection by
/// [`Network::validate`].
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    variables: Vec<Variable>,
    cpts: Vec<Cpt>,
}

impl Network {
    pub fn new(variables: Vec<Variable>, cpts: Vec<Cpt>) -> Result<Self> {
        let mut net = Self::new_unchecked(variables, cpts);
        let report = net.validate();
        if !report.is_empty() {
            return Err(Error::InvalidNetwork(report));
        }
        net.cpts.sort_by_key(|c| c.child);
        Ok(net)
    }

    pub fn new_unchecked(variables: Vec<Variable>, cpts: Vec<Cpt>) -> Self {
        Self { variables, cpts }
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn cpts(&self) -> &[Cpt] {
        &self.cpts
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn variable(&self, id: VarId) -> Result<&Variable> {
        self.variables.get(id.index()).ok_or(Error::UnknownVariable(id))
    }

    #[inline]
    pub fn cardinality(&self, id: VarId) -> usize {
        self.variables[id.index()].cardinality
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.variables.iter().map(|v| v.cardinality).collect()
    }

    /// The CPT of `id`. Only meaningful on validated networks.
    pub fn cpt(&self, id: VarId) -> Result<&Cpt> {
        match self.cpts.get(id.index()) {
            Some(c) if c.child == id => Ok(c),
            _ => self.cpts.iter().find(|c| c.child == id).ok_or(Error::UnknownVariable(id)),
        }
    }

    pub fn parents(&self, id: VarId) -> &[VarId] {
        self.cpt(id).map(|c| c.parents.as_slice()).unwrap_or(&[])
    }

    pub fn find(&self, name: &str) -> Option<VarId> {
        self.variables.iter().find(|v| v.name == name).map(|v| v.id)
    }

    pub fn name(&self, id: VarId) -> &str {
        &self.variables[id.index()].name
    }

    /// Parentless variables in ascending id order.
    pub fn roots(&self) -> Vec<VarId> {
        self.variables
            .iter()
            .map(|v| v.id)
            .filter(|&v| self.parents(v).is_empty())
            .collect()
    }

    pub fn is_root(&self, id: VarId) -> bool {
        self.parents(id).is_empty()
    }

    pub fn children(&self) -> Vec<Vec<VarId>> {
        let mut children = vec![Vec::new(); self.len()];
        for cpt in &self.cpts {
            for p in &cpt.parents {
                if let Some(c) = children.get_mut(p.index()) {
                    c.push(cpt.child);
                }
            }
        }
        children
    }

    /// Lists every broken invariant; empty iff the network is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut report = Vec::new();
        let n = self.variables.len();
        let mut names = BTreeMap::new();
        for (i, v) in self.variables.iter().enumerate() {
            let id = VarId::from(i);
            if v.cardinality < 2 {
                report.push(Violation::BadCardinality { var: id });
            }
            if names.insert(v.name.as_str(), id).is_some() {
                report.push(Violation::DuplicateName { var: id });
            }
        }

        let mut seen = vec![0usize; n];
        let mut structural_ok = true;
        for cpt in &self.cpts {
            let child = cpt.child;
            if child.index() >= n {
                report.push(Violation::UnknownChild { var: child });
                structural_ok = false;
                continue;
            }
            seen[child.index()] += 1;
            let mut table_len = self.variables[child.index()].cardinality;
            let mut distinct = BTreeSet::new();
            let mut parents_ok = true;
            for &p in &cpt.parents {
                if p.index() >= n {
                    report.push(Violation::UnknownParent { var: child, parent: p });
                    parents_ok = false;
                    continue;
                }
                if !distinct.insert(p) || p == child {
                    report.push(Violation::RepeatedParent { var: child, parent: p });
                    parents_ok = false;
                }
                table_len = table_len.saturating_mul(self.variables[p.index()].cardinality);
            }
            if !parents_ok {
                structural_ok = false;
                continue;
            }
            if cpt.table.len() != table_len {
                report.push(Violation::TableLength {
                    var: child,
                    expected: table_len,
                    found: cpt.table.len(),
                });
                continue;
            }
            if let Some(index) = cpt.table.iter().position(|p| !(0.0..=1.0).contains(p)) {
                report.push(Violation::EntryOutOfRange { var: child, index });
                continue;
            }
            let card = self.variables[child.index()].cardinality.max(1);
            for (row, chunk) in cpt.table.chunks(card).enumerate() {
                let sum: f64 = chunk.iter().sum();
                if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
                    report.push(Violation::NotNormalized { var: child, row, sum });
                    break;
                }
            }
        }
        for (i, &count) in seen.iter().enumerate() {
            match count {
                0 => report.push(Violation::MissingCpt { var: VarId::from(i) }),
                1 => {}
                _ => report.push(Violation::DuplicateCpt { var: VarId::from(i) }),
            }
        }
        if structural_ok {
            if let Err(remaining) = kahn(n, &self.cpts) {
                report.push(Violation::Cycle { vars: remaining });
            }
        }
        report
    }

    /// Parents before children; ties broken by ascending id.
    pub fn topological_order(&self) -> Result<Vec<VarId>> {
        kahn(self.len(), &self.cpts).map_err(|_| Error::Cycle)
    }

    /// Checks every assignment against the variable ranges.
    pub fn check_evidence(&self, e: &Evidence) -> Result<()> {
        for (var, value) in e.iter() {
            let card = self.variable(var)?.cardinality;
            if value >= card {
                return Err(Error::InvalidEvidence { var, value });
            }
        }
        Ok(())
    }
}

/// Kahn's algorithm with a min-heap. On a cycle returns the ids that could
/// not be ordered.
fn kahn(n: usize, cpts: &[Cpt]) -> core::result::Result<Vec<VarId>, Vec<VarId>> {
    let mut indegree = vec![0usize; n];
    let mut children = vec![Vec::new(); n];
    for cpt in cpts {
        for p in &cpt.parents {
            indegree[cpt.child.index()] += 1;
            children[p.index()].push(cpt.child.index());
        }
    }
    let mut heap: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&i| indegree[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(v)) = heap.pop() {
        order.push(VarId::from(v));
        for &c in &children[v] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                heap.push(Reverse(c));
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        Err((0..n).filter(|&i| indegree[i] > 0).map(VarId::from).collect())
    }
}

/// A partial assignment of values to variables, ordered by variable id.
///
/// Also used for complete unit instantiations returned by the solvers.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Evidence(BTreeMap<VarId, usize>);

impl Evidence {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the previous value if `var` was already assigned.
    pub fn insert(&mut self, var: VarId, value: usize) -> Option<usize> {
        self.0.insert(var, value)
    }

    pub fn with(mut self, var: VarId, value: usize) -> Self {
        self.0.insert(var, value);
        self
    }

    pub fn get(&self, var: VarId) -> Option<usize> {
        self.0.get(&var).copied()
    }

    pub fn contains(&self, var: VarId) -> bool {
        self.0.contains_key(&var)
    }

    pub fn remove(&mut self, var: VarId) -> Option<usize> {
        self.0.remove(&var)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, usize)> + '_ {
        self.0.iter().map(|(&k, &v)| (k, v))
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.0.keys().copied()
    }

    /// Union of two assignments; on a shared variable `other` wins.
    pub fn union(&self, other: &Evidence) -> Evidence {
        let mut out = self.clone();
        for (k, v) in other.iter() {
            out.insert(k, v);
        }
        out
    }

    /// True when no variable is assigned different values by the two.
    pub fn compatible(&self, other: &Evidence) -> bool {
        other.iter().all(|(k, v)| self.get(k).map_or(true, |w| w == v))
    }

    /// Does a complete assignment (indexed by variable id) satisfy this
    /// evidence?
    pub fn holds_in(&self, assignment: &[usize]) -> bool {
        self.iter().all(|(k, v)| assignment.get(k.index()) == Some(&v))
    }
}

impl FromIterator<(VarId, usize)> for Evidence {
    fn from_iter<T: IntoIterator<Item = (VarId, usize)>>(iter: T) -> Self {
        Evidence(iter.into_iter().collect())
    }
}

/// Row-major strides for `cards`, last axis fastest.
pub fn strides(cards: &[usize]) -> Vec<usize> {
    let mut s = vec![0; cards.len()];
    let mut acc = 1usize;
    for i in (0..cards.len()).rev() {
        s[i] = acc;
        acc = acc.saturating_mul(cards[i]);
    }
    s
}

/// Number of entries of a dense table over `cards`, without overflow.
pub fn table_len(cards: &[usize]) -> u128 {
    cards.iter().fold(1u128, |acc, &c| acc.saturating_mul(c as u128))
}

/// Mixed-radix counter over instantiations, last digit fastest.
#[derive(Clone, Debug)]
pub struct Odometer {
    cards: Vec<usize>,
    digits: Vec<usize>,
    done: bool,
}

impl Odometer {
    pub fn new(cards: &[usize]) -> Self {
        Self {
            cards: cards.to_vec(),
            digits: vec![0; cards.len()],
            done: cards.contains(&0),
        }
    }

    /// Current digits, or `None` once every instantiation has been visited.
    pub fn current(&self) -> Option<&[usize]> {
        if self.done {
            None
        } else {
            Some(&self.digits)
        }
    }

    /// Advances and returns the position of the most significant digit that
    /// changed, or `None` at the end.
    pub fn advance(&mut self) -> Option<usize> {
        for i in (0..self.cards.len()).rev() {
            self.digits[i] += 1;
            if self.digits[i] < self.cards[i] {
                return Some(i);
            }
            self.digits[i] = 0;
        }
        self.done = true;
        None
    }
}
