//! Compilation by symbolic variable elimination.
//!
//! Factors hold node ids instead of numbers. Eliminating `X` multiplies
//! the factors mentioning `X` together with `X`'s indicators and sums `X`
//! out, so every sum node has the form `Σ_x λ_x · n_x` with decision
//! variable `X`. Under a constrained order the unit sums end up above all
//! other sums.

use alloc::vec::Vec;

use super::{AcBuilder, DecisionAC, NodeId, ParamLabel};
use crate::factor::{checked_len, strides_for, Factor, Walker};
use crate::network::{Network, VarId, Variable};
use crate::order::EliminationPlan;
use crate::{Error, Interrupt, NeverInterrupt, Result};

struct SymFactor {
    scope: Vec<VarId>,
    cards: Vec<usize>,
    entries: Vec<NodeId>,
}

impl SymFactor {
    fn mentions(&self, v: VarId) -> bool {
        self.scope.contains(&v)
    }
}

pub struct Compiler<'a> {
    fold: bool,
    max_nodes: usize,
    interrupt: &'a dyn Interrupt,
}

impl Default for Compiler<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'a> Compiler<'a> {
    /// No folding, no node budget.
    pub fn new() -> Self {
        Self { fold: false, max_nodes: usize::MAX, interrupt: &NeverInterrupt }
    }

    /// Apply the simplification rules while building; the result has the
    /// same nodes and edges as simplifying the unfolded circuit.
    pub fn folding(mut self, fold: bool) -> Self {
        self.fold = fold;
        self
    }

    pub fn max_nodes(mut self, limit: usize) -> Self {
        self.max_nodes = limit;
        self
    }

    pub fn with_interrupt(mut self, interrupt: &'a dyn Interrupt) -> Self {
        self.interrupt = interrupt;
        self
    }

    /// Compiles the CPTs of `net`; parameter labels name the CPT cell.
    pub fn compile_network(&self, net: &Network, units: &[VarId], plan: &EliminationPlan) -> Result<DecisionAC> {
        let mut factors = Vec::with_capacity(net.len());
        let mut tables = Vec::with_capacity(net.len());
        for v in net.variables() {
            factors.push(Factor::from_cpt(net, v.id)?);
            tables.push(v.id.0);
        }
        self.compile(net.variables().to_vec(), &factors, &tables, units, plan)
    }

    /// Compiles the product of arbitrary non-negative factors over
    /// `variables` (whose ids must be `0..len`).
    pub fn compile_factors(
        &self,
        variables: &[Variable],
        factors: &[Factor],
        units: &[VarId],
        plan: &EliminationPlan,
    ) -> Result<DecisionAC> {
        let tables: Vec<u32> = (0..factors.len() as u32).collect();
        self.compile(variables.to_vec(), factors, &tables, units, plan)
    }

    fn compile(
        &self,
        variables: Vec<Variable>,
        factors: &[Factor],
        tables: &[u32],
        units: &[VarId],
        plan: &EliminationPlan,
    ) -> Result<DecisionAC> {
        for (i, v) in variables.iter().enumerate() {
            if v.id.index() != i {
                return Err(Error::UnknownVariable(v.id));
            }
        }
        let units = crate::ve::normalize_units(units);
        if !plan.is_constrained_for(variables.len(), &units) {
            return Err(Error::PlanNotConstrained);
        }
        let mut b = AcBuilder::new().folding(self.fold);
        let indicators: Vec<Vec<NodeId>> = variables
            .iter()
            .map(|v| (0..v.cardinality).map(|x| b.indicator(v.id, x)).collect())
            .collect();

        let mut pool = Vec::with_capacity(factors.len());
        for (f, &table) in factors.iter().zip(tables) {
            for v in f.scope() {
                if v.index() >= variables.len() {
                    return Err(Error::UnknownVariable(*v));
                }
            }
            let entries = f
                .values()
                .iter()
                .enumerate()
                .map(|(i, &p)| b.parameter(p, ParamLabel::Cell { table, index: i as u32 }))
                .collect();
            pool.push(SymFactor { scope: f.scope().to_vec(), cards: f.cards().to_vec(), entries });
        }

        for &x in &plan.order {
            if self.interrupt.is_interrupted() {
                return Err(Error::Interrupted);
            }
            let (bucket, rest): (Vec<SymFactor>, Vec<SymFactor>) = pool.drain(..).partition(|f| f.mentions(x));
            pool = rest;
            pool.push(self.eliminate(&mut b, &bucket, x, variables[x.index()].cardinality, &indicators[x.index()])?);
        }

        let mut roots: Vec<NodeId> = pool.iter().map(|f| f.entries[0]).collect();
        roots.sort_unstable();
        let root = match roots.as_slice() {
            [] => NodeId::ONE,
            [only] => *only,
            _ => b.product(&roots),
        };
        Ok(if self.fold {
            super::simplify::compact(&b.finish_uncertified(root, variables, &units))
        } else {
            b.finish(root, variables, &units)
        })
    }

    fn eliminate(
        &self,
        b: &mut AcBuilder,
        bucket: &[SymFactor],
        x: VarId,
        card: usize,
        lambda: &[NodeId],
    ) -> Result<SymFactor> {
        let mut scope = Vec::new();
        let mut cards = Vec::new();
        for f in bucket {
            for (&v, &c) in f.scope.iter().zip(&f.cards) {
                if v != x && !scope.contains(&v) {
                    scope.push(v);
                    cards.push(c);
                }
            }
        }
        let mut full = scope.clone();
        full.push(x);
        let mut full_cards = cards.clone();
        full_cards.push(card);
        checked_len(&full_cards)?;
        let len = checked_len(&cards)?;

        let strides = bucket.iter().map(|f| strides_for(&f.scope, &f.cards, &full)).collect();
        let mut walker = Walker::new(&full_cards, strides);
        let mut entries = Vec::with_capacity(len);
        let mut group = Vec::with_capacity(card);
        let mut kids = Vec::with_capacity(bucket.len() + 1);
        loop {
            kids.clear();
            kids.push(lambda[group.len()]);
            for (f, &off) in bucket.iter().zip(walker.offsets()) {
                kids.push(f.entries[off]);
            }
            group.push(b.product(&kids));
            if group.len() == card {
                entries.push(b.sum(Some(x), &group));
                group.clear();
                if entries.len() % 1024 == 0 {
                    if self.interrupt.is_interrupted() {
                        return Err(Error::Interrupted);
                    }
                    if b.len() > self.max_nodes {
                        return Err(Error::BudgetExceeded { limit: self.max_nodes as u64 });
                    }
                }
            }
            if !walker.advance() {
                break;
            }
        }
        if b.len() > self.max_nodes {
            return Err(Error::BudgetExceeded { limit: self.max_nodes as u64 });
        }
        Ok(SymFactor { scope, cards, entries })
    }
}

/// Unfolded compilation of `net` under a constrained `plan`.
pub fn compile_ve(net: &Network, units: &[VarId], plan: &EliminationPlan) -> Result<DecisionAC> {
    Compiler::new().compile_network(net, units, plan)
}

pub fn compile_factors(
    variables: &[Variable],
    factors: &[Factor],
    units: &[VarId],
    plan: &EliminationPlan,
) -> Result<DecisionAC> {
    Compiler::new().compile_factors(variables, factors, units, plan)
}
