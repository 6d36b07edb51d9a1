//! Variable elimination: marginals, MAP and reverse-MAP.
//!
//! Reverse-MAP runs two elimination passes in lockstep over the same
//! constrained order, one reduced by `e1 ∪ e2` and one by `e2`. Every
//! multiply and sum-out is applied to both lanes, so each lane-1 factor has a
//! scope-identical lane-2 twin. Once the non-unit block is gone the twins are
//! divided pairwise (`0/0 = 0`) and the units are maxed out of the quotients.

use alloc::vec::Vec;
use core::time::Duration;

use crate::factor::{ArgTable, Factor};
use crate::network::{Evidence, Network, VarId};
use crate::order::{minfill_order, EliminationPlan};
use crate::{Error, Interrupt, NeverInterrupt, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveStats {
    /// Entries of every factor created, both lanes included.
    pub ve_size: u64,
    pub width: usize,
    pub peak_scope: usize,
    /// Arithmetic operations performed by a circuit traversal.
    pub ops: u64,
    /// Subnormal intermediates seen by a circuit traversal.
    pub subnormals: u64,
    /// Filled in by callers that own a clock.
    pub elapsed: Duration,
}

impl SolveStats {
    fn record(&mut self, f: &Factor) {
        self.ve_size += f.len() as u64;
        self.peak_scope = self.peak_scope.max(f.scope().len());
    }
}

/// Optimal unit instantiation and its value.
///
/// For MAP the value is `max_u Pr(u, e)`; for reverse-MAP it is
/// `max_u Pr(e1 | u, e2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RmapResult {
    pub argmax: Evidence,
    pub value: f64,
    pub stats: SolveStats,
}

pub(crate) fn normalize_units(units: &[VarId]) -> Vec<VarId> {
    let mut u = units.to_vec();
    u.sort_unstable();
    u.dedup();
    u
}

pub(crate) fn check_query(net: &Network, units: &[VarId], e1: &Evidence, e2: &Evidence) -> Result<()> {
    for &u in units {
        net.variable(u)?;
        if e1.contains(u) || e2.contains(u) {
            return Err(Error::NotDisjoint(u));
        }
    }
    if let Some(v) = e1.vars().find(|&v| e2.contains(v)) {
        return Err(Error::NotDisjoint(v));
    }
    net.check_evidence(e1)?;
    net.check_evidence(e2)
}

pub struct VeSolver<'a> {
    net: &'a Network,
    plan: Option<&'a EliminationPlan>,
    interrupt: &'a dyn Interrupt,
}

impl<'a> VeSolver<'a> {
    pub fn new(net: &'a Network) -> Self {
        Self { net, plan: None, interrupt: &NeverInterrupt }
    }

    /// Use a precomputed order instead of constrained min-fill.
    pub fn with_plan(mut self, plan: &'a EliminationPlan) -> Self {
        self.plan = Some(plan);
        self
    }

    pub fn with_interrupt(mut self, interrupt: &'a dyn Interrupt) -> Self {
        self.interrupt = interrupt;
        self
    }

    fn plan_for(&self, targets: &[VarId]) -> Result<EliminationPlan> {
        let plan = match self.plan {
            Some(p) => p.clone(),
            None => minfill_order(self.net, targets),
        };
        if !plan.is_constrained_for(self.net.len(), targets) {
            return Err(Error::PlanNotConstrained);
        }
        Ok(plan)
    }

    fn poll(&self) -> Result<()> {
        if self.interrupt.is_interrupted() {
            Err(Error::Interrupted)
        } else {
            Ok(())
        }
    }

    fn initial_factors(&self, e: &Evidence, stats: &mut SolveStats) -> Result<Vec<Factor>> {
        let mut out = Vec::with_capacity(self.net.len());
        for v in self.net.variables() {
            let f = Factor::from_cpt(self.net, v.id)?.reduce(e);
            stats.record(&f);
            out.push(f);
        }
        Ok(out)
    }

    /// `Pr(query, e)` as a factor over `query` in ascending id order.
    pub fn marginal(&self, query: &[VarId], e: &Evidence) -> Result<(Factor, SolveStats)> {
        let query = normalize_units(query);
        self.net.check_evidence(e)?;
        let plan = self.plan_for(&query)?;
        let mut stats = SolveStats { width: plan.width, ..Default::default() };
        let mut factors = self.initial_factors(e, &mut stats)?;
        for &v in plan.non_targets() {
            self.poll()?;
            eliminate_sum(&mut factors, v, &mut stats)?;
        }
        let mut joint = Factor::constant(1.0);
        for f in &factors {
            joint = joint.multiply(f)?;
            stats.record(&joint);
        }
        Ok((joint.reorder(&query)?, stats))
    }

    /// `max_u Pr(u, e)` and a maximizer.
    pub fn map(&self, units: &[VarId], e: &Evidence) -> Result<RmapResult> {
        let units = normalize_units(units);
        for &u in &units {
            self.net.variable(u)?;
        }
        self.net.check_evidence(e)?;
        let plan = self.plan_for(&units)?;
        let mut stats = SolveStats { width: plan.width, ..Default::default() };
        let mut factors = self.initial_factors(e, &mut stats)?;
        for &v in plan.non_targets() {
            self.poll()?;
            eliminate_sum(&mut factors, v, &mut stats)?;
        }
        let (value, argmax) = max_phase(factors, plan.targets(), &mut stats, self.interrupt)?;
        Ok(RmapResult { argmax, value, stats })
    }

    /// Lane-1/lane-2 twins left after the non-unit block is eliminated.
    pub fn rmap_twins(&self, units: &[VarId], e1: &Evidence, e2: &Evidence) -> Result<Vec<(Factor, Factor)>> {
        let units = normalize_units(units);
        let plan = self.plan_for(&units)?;
        let mut stats = SolveStats::default();
        self.twin_phase(&units, &plan, e1, e2, &mut stats)
    }

    fn twin_phase(
        &self,
        units: &[VarId],
        plan: &EliminationPlan,
        e1: &Evidence,
        e2: &Evidence,
        stats: &mut SolveStats,
    ) -> Result<Vec<(Factor, Factor)>> {
        check_query(self.net, units, e1, e2)?;
        let both = e1.union(e2);
        let mut pairs = Vec::with_capacity(self.net.len());
        for v in self.net.variables() {
            let f = Factor::from_cpt(self.net, v.id)?;
            let lane1 = f.reduce(&both);
            let lane2 = f.reduce(e2);
            stats.record(&lane1);
            stats.record(&lane2);
            pairs.push((lane1, lane2));
        }
        for &v in plan.non_targets() {
            self.poll()?;
            eliminate_sum_twins(&mut pairs, v, stats)?;
        }
        Ok(pairs)
    }

    /// `max_u Pr(e1 | u, e2)` and a maximizer with `Pr(u, e2) > 0`.
    pub fn rmap(&self, units: &[VarId], e1: &Evidence, e2: &Evidence) -> Result<RmapResult> {
        let units = normalize_units(units);
        let plan = self.plan_for(&units)?;
        let mut stats = SolveStats { width: plan.width, ..Default::default() };
        let pairs = self.twin_phase(&units, &plan, e1, e2, &mut stats)?;
        let mut quotients = Vec::with_capacity(pairs.len());
        for (num, den) in &pairs {
            let q = num.divide(den)?;
            stats.record(&q);
            quotients.push(q);
        }
        let (value, argmax) = max_phase(quotients, plan.targets(), &mut stats, self.interrupt)?;
        if value > 0.0 {
            return Ok(RmapResult { argmax, value, stats });
        }
        // Every u scores 0; settle for one with Pr(u, e2) > 0.
        let support: Vec<Factor> = pairs
            .iter()
            .map(|(_, den)| den.map(|x| if x > 0.0 { 1.0 } else { 0.0 }))
            .collect();
        for f in &support {
            stats.record(f);
        }
        let (reachable, argmax) = max_phase(support, plan.targets(), &mut stats, self.interrupt)?;
        if reachable == 0.0 {
            return Err(Error::InconsistentEvidence);
        }
        Ok(RmapResult { argmax, value: 0.0, stats })
    }
}

fn eliminate_sum(factors: &mut Vec<Factor>, var: VarId, stats: &mut SolveStats) -> Result<()> {
    let (bucket, rest): (Vec<Factor>, Vec<Factor>) = factors.drain(..).partition(|f| f.mentions(var));
    *factors = rest;
    let mut it = bucket.into_iter();
    let Some(mut product) = it.next() else { return Ok(()) };
    for f in it {
        product = product.multiply(&f)?;
        stats.record(&product);
    }
    let summed = product.sum_out(var)?;
    stats.record(&summed);
    factors.push(summed);
    Ok(())
}

fn eliminate_sum_twins(pairs: &mut Vec<(Factor, Factor)>, var: VarId, stats: &mut SolveStats) -> Result<()> {
    let (bucket, rest): (Vec<_>, Vec<_>) = pairs.drain(..).partition(|(f, _)| f.mentions(var));
    *pairs = rest;
    let mut it = bucket.into_iter();
    let Some((mut p1, mut p2)) = it.next() else { return Ok(()) };
    for (f1, f2) in it {
        p1 = p1.multiply(&f1)?;
        p2 = p2.multiply(&f2)?;
        stats.record(&p1);
        stats.record(&p2);
    }
    let s1 = p1.sum_out(var)?;
    let s2 = p2.sum_out(var)?;
    if s1.scope() != s2.scope() {
        return Err(Error::ScopeMismatch);
    }
    stats.record(&s1);
    stats.record(&s2);
    pairs.push((s1, s2));
    Ok(())
}

/// Maxes `order` out of `factors` (whose scopes must lie within `order`) and
/// back-traces a maximizer.
pub(crate) fn max_phase(
    mut factors: Vec<Factor>,
    order: &[VarId],
    stats: &mut SolveStats,
    interrupt: &dyn Interrupt,
) -> Result<(f64, Evidence)> {
    let mut tables: Vec<Option<ArgTable>> = Vec::with_capacity(order.len());
    for &u in order {
        if interrupt.is_interrupted() {
            return Err(Error::Interrupted);
        }
        let (bucket, rest): (Vec<Factor>, Vec<Factor>) = factors.drain(..).partition(|f| f.mentions(u));
        factors = rest;
        let mut it = bucket.into_iter();
        let Some(mut product) = it.next() else {
            tables.push(None);
            continue;
        };
        for f in it {
            product = product.multiply(&f)?;
            stats.record(&product);
        }
        let (maxed, table) = product.max_out(u)?;
        stats.record(&maxed);
        factors.push(maxed);
        tables.push(Some(table));
    }
    let mut value = 1.0;
    for f in &factors {
        if !f.scope().is_empty() {
            return Err(Error::VariableNotInScope(f.scope()[0]));
        }
        value *= f.values()[0];
    }
    let mut argmax = Evidence::new();
    for (&u, table) in order.iter().zip(&tables).rev() {
        let choice = match table {
            Some(t) => t.lookup(|v| argmax.get(v).unwrap_or(0)),
            None => 0,
        };
        argmax.insert(u, choice);
    }
    Ok((value, argmax))
}

pub fn ve_marginal(net: &Network, query: &[VarId], e: &Evidence) -> Result<Factor> {
    VeSolver::new(net).marginal(query, e).map(|(f, _)| f)
}

pub fn ve_map(net: &Network, units: &[VarId], e: &Evidence) -> Result<RmapResult> {
    VeSolver::new(net).map(units, e)
}

pub fn ve_rmap(net: &Network, units: &[VarId], e1: &Evidence, e2: &Evidence) -> Result<RmapResult> {
    VeSolver::new(net).rmap(units, e1, e2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Cpt, Variable};
    use alloc::string::ToString;
    use alloc::vec;

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

    #[test]
    fn single_unit_map_is_the_mode() {
        let net = net2([0.3, 0.7], [0.5, 0.5, 0.5, 0.5]);
        let r = ve_map(&net, &[VarId(0)], &Evidence::new()).unwrap();
        assert_eq!(r.argmax.get(VarId(0)), Some(1));
        assert!((r.value - 0.7).abs() < 1e-12);
        assert!(r.stats.ve_size >= net.len() as u64);
    }

    #[test]
    fn rmap_without_units_is_a_conditional() {
        let net = net2([0.3, 0.7], [0.9, 0.1, 0.2, 0.8]);
        let e1 = Evidence::new().with(VarId(1), 1);
        let r = ve_rmap(&net, &[], &e1, &Evidence::new()).unwrap();
        assert!((r.value - (0.3 * 0.1 + 0.7 * 0.8)).abs() < 1e-12);
        assert!(r.argmax.is_empty());
    }

    #[test]
    fn rmap_with_empty_e1_scores_one() {
        let net = net2([0.3, 0.7], [0.9, 0.1, 0.2, 0.8]);
        let r = ve_rmap(&net, &[VarId(0)], &Evidence::new(), &Evidence::new()).unwrap();
        assert_eq!(r.value, 1.0);
        assert_eq!(r.argmax.get(VarId(0)), Some(0));
    }

    #[test]
    fn rmap_skips_units_ruled_out_by_e2() {
        // Pr(E=1 | U=0) = 0 and e2 forces E = 0 through nothing; use e1 only.
        let net = net2([0.3, 0.7], [1.0, 0.0, 0.0, 1.0]);
        let e1 = Evidence::new().with(VarId(1), 1);
        let r = ve_rmap(&net, &[VarId(0)], &e1, &Evidence::new()).unwrap();
        assert_eq!(r.argmax.get(VarId(0)), Some(1));
        assert_eq!(r.value, 1.0);
        // Every u gives Pr(e1 | u) = 0 except via e2-excluded ones.
        let e2 = Evidence::new().with(VarId(1), 0);
        let r = ve_rmap(&net, &[VarId(0)], &Evidence::new(), &e2).unwrap();
        assert_eq!(r.argmax.get(VarId(0)), Some(0));
    }

    #[test]
    fn map_and_rmap_disagree() {
        let net = net2([0.1, 0.9], [0.1, 0.9, 0.5, 0.5]);
        let e1 = Evidence::new().with(VarId(1), 1);
        let map = ve_map(&net, &[VarId(0)], &e1).unwrap();
        let rmap = ve_rmap(&net, &[VarId(0)], &e1, &Evidence::new()).unwrap();
        assert_eq!(map.argmax.get(VarId(0)), Some(1));
        assert_eq!(rmap.argmax.get(VarId(0)), Some(0));
    }

    #[test]
    fn overlapping_query_is_rejected() {
        let net = net2([0.3, 0.7], [0.9, 0.1, 0.2, 0.8]);
        let e = Evidence::new().with(VarId(0), 1);
        assert_eq!(ve_rmap(&net, &[VarId(0)], &e, &Evidence::new()), Err(Error::NotDisjoint(VarId(0))));
        assert_eq!(ve_rmap(&net, &[], &e, &e), Err(Error::NotDisjoint(VarId(0))));
    }

    #[test]
    fn inconsistent_e2_is_reported() {
        let net = net2([1.0, 0.0], [1.0, 0.0, 0.0, 1.0]);
        let e2 = Evidence::new().with(VarId(1), 1);
        assert_eq!(ve_rmap(&net, &[], &Evidence::new(), &e2), Err(Error::InconsistentEvidence));
    }

    #[test]
    fn marginal_of_chain() {
        let net = net2([0.3, 0.7], [0.9, 0.1, 0.2, 0.8]);
        let f = ve_marginal(&net, &[VarId(1)], &Evidence::new()).unwrap();
        assert!((f.values()[0] - (0.27 + 0.14)).abs() < 1e-12);
        assert!((f.values().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let full = Evidence::new().with(VarId(0), 1).with(VarId(1), 0);
        let f = ve_marginal(&net, &[], &full).unwrap();
        assert!((f.values()[0] - 0.7 * 0.2).abs() < 1e-12);
    }
}
