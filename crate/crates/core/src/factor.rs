//! Dense factor algebra.
//!
//! Evidence is applied by zeroing, never by slicing, so that a factor reduced
//! by `e1 ∪ e2` and its twin reduced by `e2` keep identical scopes.

use alloc::vec;
use alloc::vec::Vec;

use crate::network::{strides, table_len, Evidence, Network, VarId};
use crate::{Error, Result};

/// Hard cap on dense table size (2^25 entries, i.e. 25 binary variables).
pub const MAX_FACTOR_ENTRIES: usize = 1 << 25;

pub(crate) fn checked_len(cards: &[usize]) -> Result<usize> {
    let entries = table_len(cards);
    if entries > MAX_FACTOR_ENTRIES as u128 {
        return Err(Error::ScopeTooLarge { scope_len: cards.len(), entries });
    }
    Ok(entries as usize)
}

/// Stride of each `target` variable inside a table over `scope` (0 if absent).
pub(crate) fn strides_for(scope: &[VarId], cards: &[usize], target: &[VarId]) -> Vec<usize> {
    let own = strides(cards);
    target
        .iter()
        .map(|v| scope.iter().position(|s| s == v).map_or(0, |i| own[i]))
        .collect()
}

/// Walks the instantiations of a target scope in row-major order while
/// tracking the matching flat offset into several source tables.
pub(crate) struct Walker {
    cards: Vec<usize>,
    digits: Vec<usize>,
    strides: Vec<Vec<usize>>,
    offsets: Vec<usize>,
}

impl Walker {
    pub(crate) fn new(cards: &[usize], strides: Vec<Vec<usize>>) -> Self {
        let offsets = vec![0; strides.len()];
        Self { cards: cards.to_vec(), digits: vec![0; cards.len()], strides, offsets }
    }

    #[inline]
    pub(crate) fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Moves to the next instantiation; false after the last one.
    #[inline]
    pub(crate) fn advance(&mut self) -> bool {
        for i in (0..self.cards.len()).rev() {
            self.digits[i] += 1;
            if self.digits[i] < self.cards[i] {
                for (off, st) in self.offsets.iter_mut().zip(&self.strides) {
                    *off += st[i];
                }
                return true;
            }
            let back = self.cards[i] - 1;
            self.digits[i] = 0;
            for (off, st) in self.offsets.iter_mut().zip(&self.strides) {
                *off -= st[i] * back;
            }
        }
        false
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    scope: Vec<VarId>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

/// Per reduced instantiation, the smallest value index attaining the max.
#[derive(Clone, Debug, PartialEq)]
pub struct ArgTable {
    pub var: VarId,
    pub scope: Vec<VarId>,
    pub cards: Vec<usize>,
    pub choice: Vec<usize>,
}

impl ArgTable {
    /// Chosen value of `var` given values for `scope` looked up by id.
    pub fn lookup(&self, value_of: impl Fn(VarId) -> usize) -> usize {
        let st = strides(&self.cards);
        let idx: usize = self.scope.iter().zip(&st).map(|(&v, &s)| value_of(v) * s).sum();
        self.choice[idx]
    }
}

impl Factor {
    pub fn new(scope: Vec<VarId>, cards: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if scope.len() != cards.len() {
            return Err(Error::ScopeMismatch);
        }
        for (i, v) in scope.iter().enumerate() {
            if scope[..i].contains(v) {
                return Err(Error::ScopeMismatch);
            }
        }
        let len = checked_len(&cards)?;
        if values.len() != len {
            return Err(Error::ScopeMismatch);
        }
        Ok(Self { scope, cards, values })
    }

    pub fn constant(value: f64) -> Self {
        Self { scope: Vec::new(), cards: Vec::new(), values: vec![value] }
    }

    /// The CPT of `var` as a factor over `parents..., var`.
    pub fn from_cpt(net: &Network, var: VarId) -> Result<Self> {
        let cpt = net.cpt(var)?;
        let scope = cpt.family();
        let cards = scope.iter().map(|&v| net.cardinality(v)).collect();
        Self::new(scope, cards, cpt.table.clone())
    }

    pub fn scope(&self) -> &[VarId] {
        &self.scope
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mentions(&self, var: VarId) -> bool {
        self.scope.contains(&var)
    }

    /// Entry for the instantiation that gives each scope variable
    /// `value_of(var)`.
    pub fn value(&self, value_of: impl Fn(VarId) -> usize) -> f64 {
        let st = strides(&self.cards);
        let idx: usize = self.scope.iter().zip(&st).map(|(&v, &s)| value_of(v) * s).sum();
        self.values[idx]
    }

    /// Entry at a complete assignment indexed by variable id.
    pub fn value_at(&self, assignment: &[usize]) -> f64 {
        self.value(|v| assignment[v.index()])
    }

    /// Applies `f` to every entry.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Factor {
        Factor {
            scope: self.scope.clone(),
            cards: self.cards.clone(),
            values: self.values.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Zeroes every entry inconsistent with `e`; the scope is unchanged.
    pub fn reduce(&self, e: &Evidence) -> Factor {
        let fixed: Vec<(usize, usize)> = self
            .scope
            .iter()
            .enumerate()
            .filter_map(|(i, &v)| e.get(v).map(|val| (i, val)))
            .collect();
        let mut out = self.clone();
        if fixed.is_empty() {
            return out;
        }
        let st = strides(&self.cards);
        for (idx, value) in out.values.iter_mut().enumerate() {
            let consistent = fixed.iter().all(|&(pos, val)| (idx / st[pos]) % self.cards[pos] == val);
            if !consistent {
                *value = 0.0;
            }
        }
        out
    }

    /// Pointwise product over the ordered union of the scopes (`self`'s
    /// variables first).
    pub fn multiply(&self, other: &Factor) -> Result<Factor> {
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        for (&v, &c) in other.scope.iter().zip(&other.cards) {
            if !scope.contains(&v) {
                scope.push(v);
                cards.push(c);
            }
        }
        let len = checked_len(&cards)?;
        let mut walker = Walker::new(
            &cards,
            vec![
                strides_for(&self.scope, &self.cards, &scope),
                strides_for(&other.scope, &other.cards, &scope),
            ],
        );
        let mut values = Vec::with_capacity(len);
        loop {
            let off = walker.offsets();
            values.push(self.values[off[0]] * other.values[off[1]]);
            if !walker.advance() {
                break;
            }
        }
        Ok(Factor { scope, cards, values })
    }

    fn project(&self, var: VarId) -> Result<(usize, Vec<VarId>, Vec<usize>)> {
        let pos = self.scope.iter().position(|&v| v == var).ok_or(Error::VariableNotInScope(var))?;
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        scope.remove(pos);
        cards.remove(pos);
        Ok((pos, scope, cards))
    }

    fn fold_out(&self, var: VarId, mut visit: impl FnMut(&[f64], usize, usize)) -> Result<(Vec<VarId>, Vec<usize>)> {
        let (pos, scope, cards) = self.project(var)?;
        let stride = strides(&self.cards)[pos];
        let mut walker = Walker::new(&cards, vec![strides_for(&self.scope, &self.cards, &scope)]);
        loop {
            visit(&self.values, walker.offsets()[0], stride);
            if !walker.advance() {
                break;
            }
        }
        Ok((scope, cards))
    }

    /// Sums `var` out of the factor.
    pub fn sum_out(&self, var: VarId) -> Result<Factor> {
        let card = self.cards[self.scope.iter().position(|&v| v == var).ok_or(Error::VariableNotInScope(var))?];
        let mut values = Vec::new();
        let (scope, cards) = self.fold_out(var, |vals, base, stride| {
            let mut acc = 0.0;
            for k in 0..card {
                acc += vals[base + k * stride];
            }
            values.push(acc);
        })?;
        Ok(Factor { scope, cards, values })
    }

    /// Maxes `var` out, recording the smallest maximizing value index.
    pub fn max_out(&self, var: VarId) -> Result<(Factor, ArgTable)> {
        let card = self.cards[self.scope.iter().position(|&v| v == var).ok_or(Error::VariableNotInScope(var))?];
        let mut values = Vec::new();
        let mut choice = Vec::new();
        let (scope, cards) = self.fold_out(var, |vals, base, stride| {
            let mut best = vals[base];
            let mut arg = 0;
            for k in 1..card {
                let x = vals[base + k * stride];
                if x > best {
                    best = x;
                    arg = k;
                }
            }
            values.push(best);
            choice.push(arg);
        })?;
        let table = ArgTable { var, scope: scope.clone(), cards: cards.clone(), choice };
        Ok((Factor { scope, cards, values }, table))
    }

    /// Entrywise quotient with `0/0 = 0`. Scopes must match exactly.
    pub fn divide(&self, other: &Factor) -> Result<Factor> {
        if self.scope != other.scope || self.cards != other.cards {
            return Err(Error::ScopeMismatch);
        }
        let mut values = Vec::with_capacity(self.values.len());
        for (index, (&a, &b)) in self.values.iter().zip(&other.values).enumerate() {
            if b == 0.0 {
                if a != 0.0 {
                    return Err(Error::SupportViolation { index });
                }
                values.push(0.0);
            } else {
                values.push(a / b);
            }
        }
        Ok(Factor { scope: self.scope.clone(), cards: self.cards.clone(), values })
    }

    /// Same factor with the scope permuted into `order`.
    pub fn reorder(&self, order: &[VarId]) -> Result<Factor> {
        if order.len() != self.scope.len() || order.iter().any(|v| !self.scope.contains(v)) {
            return Err(Error::ScopeMismatch);
        }
        let cards: Vec<usize> = order
            .iter()
            .map(|v| self.cards[self.scope.iter().position(|s| s == v).unwrap()])
            .collect();
        let mut walker = Walker::new(&cards, vec![strides_for(&self.scope, &self.cards, order)]);
        let mut values = Vec::with_capacity(self.values.len());
        loop {
            values.push(self.values[walker.offsets()[0]]);
            if !walker.advance() {
                break;
            }
        }
        Ok(Factor { scope: order.to_vec(), cards, values })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Cpt, Variable};
    use alloc::string::ToString;

    const A: VarId = VarId(0);
    const B: VarId = VarId(1);
    const C: VarId = VarId(2);

    /// The factor f(A, B) with rows (a,b)=3, (a,b̄)=4, (ā,b)=10, (ā,b̄)=12,
    /// value index 0 standing for the un-barred value.
    fn fig2() -> Factor {
        Factor::new(vec![A, B], vec![2, 2], vec![3.0, 4.0, 10.0, 12.0]).unwrap()
    }

    #[test]
    fn reduce_zeroes_inconsistent_rows() {
        let f = fig2().reduce(&Evidence::new().with(A, 0));
        assert_eq!(f.values(), &[3.0, 4.0, 0.0, 0.0]);
        assert_eq!(f.scope(), &[A, B]);
        assert_eq!(fig2().reduce(&Evidence::new()), fig2());
        assert_eq!(fig2().reduce(&Evidence::new().with(C, 1)), fig2());
    }

    #[test]
    fn sum_and_max_out_of_fig2() {
        let s = fig2().sum_out(B).unwrap();
        assert_eq!(s.scope(), &[A]);
        assert_eq!(s.values(), &[7.0, 22.0]);
        let (m, arg) = fig2().max_out(B).unwrap();
        assert_eq!(m.values(), &[4.0, 12.0]);
        assert_eq!(arg.choice, vec![1, 1]);
        assert_eq!(fig2().sum_out(C), Err(Error::VariableNotInScope(C)));
    }

    #[test]
    fn constant_factor_argmax_is_zero() {
        let f = Factor::new(vec![A, B], vec![2, 3], vec![1.0; 6]).unwrap();
        let (_, arg) = f.max_out(B).unwrap();
        assert_eq!(arg.choice, vec![0, 0]);
    }

    #[test]
    fn multiply_pointwise_and_outer() {
        let f = Factor::new(vec![A], vec![2], vec![2.0, 3.0]).unwrap();
        let g = Factor::new(vec![A], vec![2], vec![5.0, 7.0]).unwrap();
        assert_eq!(f.multiply(&g).unwrap().values(), &[10.0, 21.0]);
        let h = Factor::new(vec![B], vec![2], vec![5.0, 7.0]).unwrap();
        let fh = f.multiply(&h).unwrap();
        assert_eq!(fh.scope(), &[A, B]);
        assert_eq!(fh.values(), &[10.0, 14.0, 15.0, 21.0]);
    }

    #[test]
    fn divide_rules() {
        let f = Factor::new(vec![A], vec![2], vec![3.0, 4.0]).unwrap();
        let g = Factor::new(vec![A], vec![2], vec![6.0, 8.0]).unwrap();
        assert_eq!(f.divide(&g).unwrap().values(), &[0.5, 0.5]);
        let f = Factor::new(vec![A], vec![2], vec![0.0, 2.0]).unwrap();
        let g = Factor::new(vec![A], vec![2], vec![0.0, 4.0]).unwrap();
        assert_eq!(f.divide(&g).unwrap().values(), &[0.0, 0.5]);
        let f = Factor::new(vec![A], vec![2], vec![1.0, 0.0]).unwrap();
        let g = Factor::new(vec![A], vec![2], vec![0.0, 1.0]).unwrap();
        assert_eq!(f.divide(&g), Err(Error::SupportViolation { index: 0 }));
        let h = Factor::new(vec![B], vec![2], vec![1.0, 1.0]).unwrap();
        assert_eq!(f.divide(&h), Err(Error::ScopeMismatch));
    }

    #[test]
    fn cpt_factor_layout() {
        let vars = vec![
            Variable { id: A, name: "A".to_string(), cardinality: 2 },
            Variable { id: B, name: "B".to_string(), cardinality: 2 },
        ];
        let cpts = vec![
            Cpt { child: A, parents: vec![], table: vec![0.3, 0.7] },
            Cpt { child: B, parents: vec![A], table: vec![0.9, 0.1, 0.2, 0.8] },
        ];
        let net = Network::new(vars, cpts).unwrap();
        let fa = Factor::from_cpt(&net, A).unwrap();
        assert_eq!((fa.scope(), fa.values()), (&[A][..], &[0.3, 0.7][..]));
        let fb = Factor::from_cpt(&net, B).unwrap();
        assert_eq!(fb.scope(), &[A, B]);
        assert_eq!(fb.value(|v| if v == A { 1 } else { 0 }), 0.2);
        let ones = fb.sum_out(B).unwrap();
        assert!(ones.values().iter().all(|&x| (x - 1.0).abs() < 1e-12));
        assert_eq!(Factor::from_cpt(&net, C), Err(Error::UnknownVariable(C)));
    }

    #[test]
    fn scope_cap_is_an_error() {
        let scope: Vec<VarId> = (0..26).map(VarId).collect();
        let big = Factor { scope: scope[..13].to_vec(), cards: vec![2; 13], values: vec![1.0; 1 << 13] };
        let other = Factor { scope: scope[13..].to_vec(), cards: vec![2; 13], values: vec![1.0; 1 << 13] };
        assert!(matches!(big.multiply(&other), Err(Error::ScopeTooLarge { scope_len: 26, .. })));
    }

    #[test]
    fn reorder_permutes() {
        let f = fig2().reorder(&[B, A]).unwrap();
        assert_eq!(f.values(), &[3.0, 10.0, 4.0, 12.0]);
        assert_eq!(f.reorder(&[A, B]).unwrap(), fig2());
    }
}
