//! Objective models: a weighted sum of counterfactual probabilities on an
//! SCM turned into one conditional probability `Pr'(e1 | u, e2)` on a
//! composed network.
//!
//! Each component gets a triplet: a factual copy and two intervened copies
//! of the internal variables, all reading the same exogenous roots. Unit
//! roots are shared by every triplet. Internal units are tied together by a
//! sync node per unit that is 1 exactly when all base copies agree. A
//! mixture node `H` picks the component whose outcome events count; outcome
//! nodes of the other components are pinned to their `e1` value.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::network::{Cpt, Evidence, Network, Odometer, VarId, Variable};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum World {
    /// The factual world, where real evidence and units are observed.
    Base,
    /// The world of the first intervention (`X^i`).
    First,
    /// The world of the second intervention (`V^i`).
    Second,
}

impl World {
    pub const ALL: [World; 3] = [World::Base, World::First, World::Second];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WorldEvent {
    pub var: VarId,
    pub world: World,
    pub value: usize,
}

impl WorldEvent {
    pub fn new(var: VarId, world: World, value: usize) -> Self {
        Self { var, world, value }
    }
}

/// One weighted term `w · Pr(outcomes_{treatments} | e, u)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CounterfactualComponent {
    pub weight: f64,
    pub outcomes: Vec<WorldEvent>,
    /// Interventions; only [`World::First`] and [`World::Second`] allowed.
    pub treatments: Vec<WorldEvent>,
    /// Real-world evidence, observed in the base world.
    pub evidence: Evidence,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveFunction {
    pub components: Vec<CounterfactualComponent>,
    pub units: Vec<VarId>,
}

#[derive(Clone, Debug)]
pub struct Triplet {
    pub network: Network,
    /// Base, first and second copy of every SCM variable; roots map to the
    /// same node three times.
    pub copies: Vec<[VarId; 3]>,
}

#[derive(Clone, Debug)]
pub struct ObjectiveModel {
    pub network: Network,
    /// Shared unit roots and the component-1 base copy of internal units,
    /// ascending.
    pub units: Vec<VarId>,
    /// Outcome events of every component.
    pub e1: Evidence,
    /// Treatments, real evidence and every sync node at 1.
    pub e2: Evidence,
    /// `copies[i][v]`: copies of SCM variable `v` in component `i`.
    pub copies: Vec<Vec<[VarId; 3]>>,
    pub mixture: VarId,
    /// `(scm unit, sync node)` for every internal unit.
    pub sync: Vec<(VarId, VarId)>,
    /// Normalized weights, one per component.
    pub weights: Vec<f64>,
}

impl ObjectiveModel {
    /// Model-side instantiation of SCM unit values `u`.
    pub fn units_from_scm(&self, scm_units: &[VarId], u: &Evidence) -> Evidence {
        scm_units
            .iter()
            .filter_map(|&v| u.get(v).map(|x| (self.copies[0][v.index()][0], x)))
            .collect()
    }
}

#[derive(Default)]
struct ModelBuilder {
    variables: Vec<Variable>,
    cpts: Vec<Cpt>,
}

impl ModelBuilder {
    fn add(&mut self, name: String, cardinality: usize, parents: Vec<VarId>, table: Vec<f64>) -> VarId {
        let id = VarId(self.variables.len() as u32);
        self.variables.push(Variable { id, name, cardinality });
        self.cpts.push(Cpt { child: id, parents, table });
        id
    }

    fn finish(self) -> Result<Network> {
        Network::new(self.variables, self.cpts)
    }
}

fn point_mass(card: usize, value: usize) -> Vec<f64> {
    let mut t = vec![0.0; card];
    t[value] = 1.0;
    t
}

fn check_event(scm: &Network, var: VarId, value: usize) -> Result<()> {
    let v = scm.variable(var)?;
    if value >= v.cardinality {
        return Err(Error::InvalidEvidence { var, value });
    }
    Ok(())
}

/// Treatment value per (world, var), rejecting roots, the base world and
/// contradictions.
fn treatment_map(scm: &Network, comp: &CounterfactualComponent) -> Result<BTreeMap<(World, VarId), usize>> {
    let mut map = BTreeMap::new();
    for t in &comp.treatments {
        check_event(scm, t.var, t.value)?;
        if t.world == World::Base {
            return Err(Error::InvalidConfig("treatments must be in an intervened world"));
        }
        if scm.is_root(t.var) {
            return Err(Error::TreatmentOnRoot(t.var));
        }
        if let Some(old) = map.insert((t.world, t.var), t.value) {
            if old != t.value {
                return Err(Error::ContradictoryEvents(t.var));
            }
        }
    }
    Ok(map)
}

fn add_triplet(
    b: &mut ModelBuilder,
    scm: &Network,
    comp: &CounterfactualComponent,
    tag: &str,
    shared: &[Option<VarId>],
) -> Result<Vec<[VarId; 3]>> {
    let treated = treatment_map(scm, comp)?;
    let order = scm.topological_order()?;
    let mut copies = vec![[VarId(u32::MAX); 3]; scm.len()];
    for v in order {
        let var = scm.variable(v)?;
        let cpt = scm.cpt(v)?;
        if scm.is_root(v) {
            let id = match shared[v.index()] {
                Some(id) => id,
                None => b.add(format!("{}{tag}", var.name), var.cardinality, vec![], cpt.table.clone()),
            };
            copies[v.index()] = [id; 3];
            continue;
        }
        for w in World::ALL {
            let name = match w {
                World::Base => format!("{}{tag}", var.name),
                World::First => format!("{}{tag}.1", var.name),
                World::Second => format!("{}{tag}.2", var.name),
            };
            let id = match treated.get(&(w, v)) {
                Some(&x) => b.add(name, var.cardinality, vec![], point_mass(var.cardinality, x)),
                None => {
                    let parents = cpt.parents.iter().map(|p| copies[p.index()][w.index()]).collect();
                    b.add(name, var.cardinality, parents, cpt.table.clone())
                }
            };
            copies[v.index()][w.index()] = id;
        }
    }
    Ok(copies)
}

/// Three coupled copies of `scm` sharing its roots, with the first and
/// second copies mutilated by the component's treatments.
pub fn build_triplet(scm: &Network, comp: &CounterfactualComponent) -> Result<Triplet> {
    let mut b = ModelBuilder::default();
    let copies = add_triplet(&mut b, scm, comp, "", &vec![None; scm.len()])?;
    Ok(Triplet { network: b.finish()?, copies })
}

/// Composes one triplet per component into the objective model.
pub fn compose_objective(scm: &Network, obj: &ObjectiveFunction) -> Result<ObjectiveModel> {
    if obj.components.is_empty() {
        return Err(Error::EmptyObjective);
    }
    let mut units = obj.units.clone();
    units.sort_unstable();
    units.dedup();
    for &u in &units {
        scm.variable(u)?;
    }
    let mut total = 0.0;
    for (i, c) in obj.components.iter().enumerate() {
        if !c.weight.is_finite() || c.weight < 0.0 {
            return Err(Error::NegativeWeight { component: i });
        }
        total += c.weight;
        for e in c.outcomes.iter().chain(&c.treatments) {
            check_event(scm, e.var, e.value)?;
            if units.contains(&e.var) {
                return Err(Error::UnitConflict(e.var));
            }
        }
        scm.check_evidence(&c.evidence)?;
        if let Some(v) = c.evidence.vars().find(|v| units.contains(v)) {
            return Err(Error::UnitConflict(v));
        }
    }
    if total <= 0.0 {
        return Err(Error::InvalidConfig("component weights sum to zero"));
    }

    let mut b = ModelBuilder::default();
    let mut shared = vec![None; scm.len()];
    for &u in &units {
        if scm.is_root(u) {
            let var = scm.variable(u)?;
            shared[u.index()] = Some(b.add(var.name.clone(), var.cardinality, vec![], scm.cpt(u)?.table.clone()));
        }
    }

    let k = obj.components.len();
    let mut copies = Vec::with_capacity(k);
    for (i, comp) in obj.components.iter().enumerate() {
        copies.push(add_triplet(&mut b, scm, comp, &format!("@{}", i + 1), &shared)?);
    }

    // Outcome nodes per component, after dropping events fixed by a
    // treatment or by the component's own evidence.
    let mut e1 = Evidence::new();
    let mut e2 = Evidence::new();
    let mut outcome_nodes: Vec<Vec<VarId>> = vec![Vec::new(); k];
    for (i, comp) in obj.components.iter().enumerate() {
        let treated = treatment_map(scm, comp)?;
        let mut fixed: BTreeMap<VarId, usize> = BTreeMap::new();
        for (&(w, v), &x) in &treated {
            fixed.insert(copies[i][v.index()][w.index()], x);
        }
        for (v, x) in comp.evidence.iter() {
            let node = copies[i][v.index()][0];
            if fixed.insert(node, x).is_some_and(|old| old != x) {
                return Err(Error::ContradictoryEvents(v));
            }
        }
        for o in &comp.outcomes {
            let node = copies[i][o.var.index()][o.world.index()];
            match fixed.get(&node) {
                Some(&x) if x == o.value => continue,
                Some(_) => return Err(Error::ContradictoryEvents(o.var)),
                None => {}
            }
            match e1.get(node) {
                Some(x) if x != o.value => return Err(Error::ContradictoryEvents(o.var)),
                Some(_) => {}
                None => {
                    e1.insert(node, o.value);
                    outcome_nodes[i].push(node);
                }
            }
        }
        for (node, x) in fixed {
            if e2.get(node).is_some_and(|old| old != x) {
                return Err(Error::ContradictoryEvents(node));
            }
            e2.insert(node, x);
        }
    }

    let weights: Vec<f64> = obj.components.iter().map(|c| c.weight / total).collect();
    let h_card = k.max(2);
    let mut prior = weights.clone();
    prior.resize(h_card, 0.0);
    let mixture = b.add(String::from("H@"), h_card, vec![], prior);

    for (i, nodes) in outcome_nodes.iter().enumerate() {
        for &node in nodes {
            let card = b.variables[node.index()].cardinality;
            let target = e1.get(node).unwrap_or(0);
            let cpt = &mut b.cpts[node.index()];
            let mut table = Vec::with_capacity(cpt.table.len() * h_card);
            for h in 0..h_card {
                if h == i {
                    table.extend_from_slice(&cpt.table);
                } else {
                    for _ in 0..cpt.table.len() / card {
                        table.extend(point_mass(card, target));
                    }
                }
            }
            cpt.parents.insert(0, mixture);
            cpt.table = table;
        }
    }

    let mut sync = Vec::new();
    if k > 1 {
        for &u in &units {
            if scm.is_root(u) {
                continue;
            }
            let card = scm.cardinality(u);
            let parents: Vec<VarId> = copies.iter().map(|c| c[u.index()][0]).collect();
            let mut table = Vec::with_capacity(2 * card.pow(k as u32));
            let mut odo = Odometer::new(&vec![card; k]);
            while let Some(row) = odo.current() {
                let agree = row.iter().all(|&x| x == row[0]);
                table.extend_from_slice(if agree { &[0.0, 1.0] } else { &[1.0, 0.0] });
                if odo.advance().is_none() {
                    break;
                }
            }
            let node = b.add(format!("Sync@{}", scm.name(u)), 2, parents, table);
            e2.insert(node, 1);
            sync.push((u, node));
        }
    }

    let mut model_units: Vec<VarId> = units.iter().map(|u| copies[0][u.index()][0]).collect();
    model_units.sort_unstable();
    let network = b.finish()?;
    Ok(ObjectiveModel { network, units: model_units, e1, e2, copies, mixture, sync, weights })
}

/// Adds `c = -min_i w_i` to every weight when some weight is negative.
///
/// Only valid when the components partition a common event space (same
/// treatments and evidence everywhere, outcome assignments covering every
/// combination exactly once): then the component probabilities sum to 1
/// for every `u` and the argmax is unchanged.
pub fn shift_weights(scm: &Network, obj: &ObjectiveFunction) -> Result<(ObjectiveFunction, f64)> {
    let min = obj.components.iter().map(|c| c.weight).fold(f64::INFINITY, f64::min);
    if obj.components.is_empty() {
        return Err(Error::EmptyObjective);
    }
    if min >= 0.0 {
        return Ok((obj.clone(), 0.0));
    }
    if !is_partition(scm, obj)? {
        return Err(Error::PartitionRequired);
    }
    let c = -min;
    let mut shifted = obj.clone();
    for comp in &mut shifted.components {
        comp.weight += c;
    }
    Ok((shifted, c))
}

fn is_partition(scm: &Network, obj: &ObjectiveFunction) -> Result<bool> {
    let sorted = |v: &[WorldEvent]| {
        let mut v = v.to_vec();
        v.sort();
        v
    };
    let first = &obj.components[0];
    let treatments = sorted(&first.treatments);
    let keys = |c: &CounterfactualComponent| {
        let mut k: Vec<(World, VarId)> = c.outcomes.iter().map(|o| (o.world, o.var)).collect();
        k.sort();
        k
    };
    let shared_keys = keys(first);
    if shared_keys.windows(2).any(|w| w[0] == w[1]) {
        return Ok(false);
    }
    let mut seen = Vec::new();
    for c in &obj.components {
        if sorted(&c.treatments) != treatments || c.evidence != first.evidence || keys(c) != shared_keys {
            return Ok(false);
        }
        let mut outcomes = c.outcomes.clone();
        outcomes.sort_by_key(|o| (o.world, o.var));
        let values: Vec<usize> = outcomes.iter().map(|o| o.value).collect();
        if seen.contains(&values) {
            return Ok(false);
        }
        seen.push(values);
    }
    let mut combos: u128 = 1;
    for &(_, v) in &shared_keys {
        combos = combos.saturating_mul(scm.variable(v)?.cardinality as u128);
    }
    Ok(combos == seen.len() as u128)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    /// Roots A, U; X = f(A, U); Y = g(X, U).
    fn scm() -> Network {
        let v = |i: u32, n: &str| Variable { id: VarId(i), name: n.to_string(), cardinality: 2 };
        let vars = vec![v(0, "A"), v(1, "U"), v(2, "X"), v(3, "Y")];
        let cpts = vec![
            Cpt { child: VarId(0), parents: vec![], table: vec![0.4, 0.6] },
            Cpt { child: VarId(1), parents: vec![], table: vec![0.7, 0.3] },
            Cpt {
                child: VarId(2),
                parents: vec![VarId(0), VarId(1)],
                table: vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0],
            },
            Cpt {
                child: VarId(3),
                parents: vec![VarId(2), VarId(1)],
                table: vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0],
            },
        ];
        Network::new(vars, cpts).unwrap()
    }

    fn ev(var: u32, world: World, value: usize) -> WorldEvent {
        WorldEvent::new(VarId(var), world, value)
    }

    fn benefit_components() -> Vec<CounterfactualComponent> {
        let t = vec![ev(2, World::First, 1), ev(2, World::Second, 0)];
        [(40.0, 1, 0), (-10.0, 1, 1), (-10.0, 0, 0), (-60.0, 0, 1)]
            .into_iter()
            .map(|(w, a, b)| CounterfactualComponent {
                weight: w,
                outcomes: vec![ev(3, World::First, a), ev(3, World::Second, b)],
                treatments: t.clone(),
                evidence: Evidence::new(),
            })
            .collect()
    }

    #[test]
    fn triplet_mutilates_treatment_copy() {
        let comp = CounterfactualComponent {
            weight: 1.0,
            outcomes: vec![ev(3, World::First, 1)],
            treatments: vec![ev(2, World::First, 1)],
            evidence: Evidence::new(),
        };
        let t = build_triplet(&scm(), &comp).unwrap();
        assert_eq!(t.network.len(), 2 + 3 * 2);
        let x1 = t.copies[2][1];
        assert!(t.network.parents(x1).is_empty());
        assert_eq!(t.network.cpt(x1).unwrap().table, vec![0.0, 1.0]);
        let x0 = t.copies[2][0];
        assert_eq!(t.network.parents(x0).len(), 2);
        assert_eq!(t.copies[0], [t.copies[0][0]; 3]);
        assert_eq!(t.network.name(t.copies[3][2]), "Y.2");
    }

    #[test]
    fn treatment_on_root_is_rejected() {
        let comp = CounterfactualComponent {
            weight: 1.0,
            outcomes: vec![],
            treatments: vec![ev(0, World::First, 1)],
            evidence: Evidence::new(),
        };
        assert_eq!(build_triplet(&scm(), &comp).unwrap_err(), Error::TreatmentOnRoot(VarId(0)));
    }

    #[test]
    fn benefit_weights_shift_by_sixty() {
        let obj = ObjectiveFunction { components: benefit_components(), units: vec![VarId(1)] };
        let (shifted, c) = shift_weights(&scm(), &obj).unwrap();
        assert_eq!(c, 60.0);
        let w: Vec<f64> = shifted.components.iter().map(|c| c.weight).collect();
        assert_eq!(w, vec![100.0, 50.0, 50.0, 0.0]);
        let (same, c) = shift_weights(&scm(), &shifted).unwrap();
        assert_eq!(c, 0.0);
        assert_eq!(same, shifted);
    }

    #[test]
    fn shift_needs_a_partition() {
        let mut comps = benefit_components();
        comps.pop();
        let obj = ObjectiveFunction { components: comps, units: vec![VarId(1)] };
        assert_eq!(shift_weights(&scm(), &obj).unwrap_err(), Error::PartitionRequired);
    }

    #[test]
    fn composed_model_layout() {
        let obj = ObjectiveFunction { components: benefit_components(), units: vec![VarId(1)] };
        let (obj, _) = shift_weights(&scm(), &obj).unwrap();
        let m = compose_objective(&scm(), &obj).unwrap();
        // shared U, then per component: A + 3 copies of X and Y; then H
        assert_eq!(m.network.len(), 1 + 4 * (1 + 6) + 1);
        assert_eq!(m.units, vec![VarId(0)]);
        assert_eq!(m.e1.len(), 8);
        assert_eq!(m.e2.len(), 8);
        assert!(m.sync.is_empty());
        let h = m.network.cpt(m.mixture).unwrap();
        assert_eq!(h.table, vec![0.5, 0.25, 0.25, 0.0]);
        let y = m.copies[1][3][1];
        assert_eq!(m.network.parents(y)[0], m.mixture);
    }

    #[test]
    fn treated_unit_is_rejected() {
        let obj = ObjectiveFunction { components: benefit_components(), units: vec![VarId(0)] };
        let mut obj = shift_weights(&scm(), &obj).unwrap().0;
        obj.units = vec![VarId(2)];
        assert_eq!(compose_objective(&scm(), &obj).unwrap_err(), Error::UnitConflict(VarId(2)));
    }

    #[test]
    fn internal_units_get_sync_nodes() {
        // scm() plus W = copy of A, used as the unit.
        let base = scm();
        let mut vars = base.variables().to_vec();
        let mut cpts = base.cpts().to_vec();
        vars.push(Variable { id: VarId(4), name: "W".to_string(), cardinality: 2 });
        cpts.push(Cpt { child: VarId(4), parents: vec![VarId(0)], table: vec![1.0, 0.0, 0.0, 1.0] });
        let net = Network::new(vars, cpts).unwrap();
        let obj = ObjectiveFunction { components: benefit_components(), units: vec![VarId(4)] };
        let obj = shift_weights(&net, &obj).unwrap().0;
        let m = compose_objective(&net, &obj).unwrap();
        assert_eq!(m.sync.len(), 1);
        let (unit, node) = m.sync[0];
        assert_eq!(unit, VarId(4));
        assert_eq!(m.e2.get(node), Some(1));
        let parents = m.network.parents(node);
        assert_eq!(parents.len(), 4);
        for (i, p) in parents.iter().enumerate() {
            assert_eq!(*p, m.copies[i][4][0]);
        }
        assert_eq!(m.units, vec![m.copies[0][4][0]]);
        // all 16 rows: agree only on 0000 and 1111
        let table = &m.network.cpt(node).unwrap().table;
        let ones: Vec<usize> = (0..16).filter(|r| table[2 * r + 1] == 1.0).collect();
        assert_eq!(ones, vec![0, 15]);
    }

    #[test]
    fn single_component_pads_the_mixture() {
        let comp = CounterfactualComponent {
            weight: 3.0,
            outcomes: vec![ev(3, World::First, 1)],
            treatments: vec![ev(2, World::First, 1)],
            evidence: Evidence::new(),
        };
        let obj = ObjectiveFunction { components: vec![comp], units: vec![VarId(1)] };
        let m = compose_objective(&scm(), &obj).unwrap();
        assert_eq!(m.network.cpt(m.mixture).unwrap().table, vec![1.0, 0.0]);
    }

    #[test]
    fn trivially_true_outcome_is_dropped() {
        let comp = CounterfactualComponent {
            weight: 1.0,
            outcomes: vec![ev(2, World::First, 1)],
            treatments: vec![ev(2, World::First, 1)],
            evidence: Evidence::new(),
        };
        let obj = ObjectiveFunction { components: vec![comp.clone()], units: vec![] };
        let m = compose_objective(&scm(), &obj).unwrap();
        assert!(m.e1.is_empty());
        let mut bad = comp;
        bad.outcomes[0].value = 0;
        let obj = ObjectiveFunction { components: vec![bad], units: vec![] };
        assert_eq!(compose_objective(&scm(), &obj).unwrap_err(), Error::ContradictoryEvents(VarId(2)));
    }

    #[test]
    fn negative_weight_needs_shift() {
        let obj = ObjectiveFunction { components: benefit_components(), units: vec![VarId(1)] };
        assert_eq!(compose_objective(&scm(), &obj).unwrap_err(), Error::NegativeWeight { component: 1 });
    }
}
