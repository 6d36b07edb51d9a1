//! Random SCMs and benefit-function instances.
//!
//! A DAG `G0` over `n` binary nodes is sampled in topological order, every
//! non-root node gets its own exogenous root parent, and internal CPTs are
//! random deterministic functions. Units, treatment and outcome are then
//! drawn so that each unit is a common cause of treatment and outcome that
//! still reaches the outcome once the treatment is intervened on.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::network::{Cpt, Network, VarId, Variable};
use crate::objective::{shift_weights, CounterfactualComponent, ObjectiveFunction, World, WorldEvent};
use crate::{Error, Evidence, Result};

/// Resampling cap per instance.
pub const MAX_ATTEMPTS: u32 = 100;

/// How the outcome variable is chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum OutcomeMode {
    /// A uniformly chosen leaf of `G0`.
    #[default]
    Leaf,
    /// A fresh node `Y` with every leaf of `G0` as parent.
    ChildOfLeaves,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GenConfig {
    /// Nodes in `G0`.
    pub n: usize,
    /// Maximum parents per node.
    pub p: usize,
    pub seed: u64,
    pub outcome_mode: OutcomeMode,
}

impl GenConfig {
    pub fn new(n: usize, p: usize, seed: u64) -> Self {
        Self { n, p, seed, outcome_mode: OutcomeMode::Leaf }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::InvalidConfig("n must be at least 3"));
        }
        if self.p < 1 || self.p >= self.n {
            return Err(Error::InvalidConfig("p must satisfy 1 <= p < n"));
        }
        if self.n > u32::MAX as usize / 4 {
            return Err(Error::InvalidConfig("n too large"));
        }
        Ok(())
    }

    /// Generator for instance `index`; independent of every other index.
    pub fn rng(&self, index: u32) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((self.n as u64) << 32) | index as u64);
        rng
    }
}

/// Parent lists of `G0`, nodes in topological order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dag {
    pub parents: Vec<Vec<usize>>,
}

impl Dag {
    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    pub fn leaves(&self) -> Vec<usize> {
        let mut has_child = vec![false; self.len()];
        for ps in &self.parents {
            for &p in ps {
                has_child[p] = true;
            }
        }
        (0..self.len()).filter(|&i| !has_child[i]).collect()
    }
}

/// Node `i > 0` draws `k ~ U{1..min(p, i)}` distinct parents among `0..i`.
pub fn generate_dag<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> Dag {
    let mut parents = Vec::with_capacity(n);
    parents.push(Vec::new());
    for i in 1..n {
        let k = rng.random_range(1..=p.min(i));
        let mut ps = sample(rng, i, k).into_vec();
        ps.sort_unstable();
        parents.push(ps);
    }
    Dag { parents }
}

/// An SCM built from `G0`.
#[derive(Clone, Debug)]
pub struct Scm {
    pub network: Network,
    /// Parent lists over `G0` nodes (ids `0..g0.len()`), including the
    /// outcome node in [`OutcomeMode::ChildOfLeaves`].
    pub g0: Dag,
    pub outcome: VarId,
}

impl Scm {
    /// Node count of the SCM (`n'`).
    pub fn n_prime(&self) -> usize {
        self.network.len()
    }
}

/// Adds a root parent `R<i>` to every non-root `G0` node and fills internal
/// CPTs with random deterministic functions. Root priors are two draws from
/// `U(0.05, 0.95)`, normalized.
pub fn dag_to_scm<R: Rng + ?Sized>(g0: &Dag, mode: OutcomeMode, rng: &mut R) -> Scm {
    let mut g = g0.clone();
    let outcome = match mode {
        OutcomeMode::Leaf => {
            let leaves = g.leaves();
            leaves[rng.random_range(0..leaves.len())]
        }
        OutcomeMode::ChildOfLeaves => {
            let leaves = g.leaves();
            g.parents.push(leaves);
            g.len() - 1
        }
    };
    let n = g.len();
    let mut variables: Vec<Variable> = (0..n)
        .map(|i| {
            let name = if mode == OutcomeMode::ChildOfLeaves && i == outcome { String::from("Y") } else { format!("V{}", i + 1) };
            Variable { id: VarId(i as u32), name, cardinality: 2 }
        })
        .collect();
    let mut cpts = Vec::with_capacity(2 * n);
    let mut roots = Vec::new();
    for (i, ps) in g.parents.iter().enumerate() {
        if ps.is_empty() {
            roots.push(VarId(i as u32));
            continue;
        }
        let r = VarId(variables.len() as u32);
        variables.push(Variable { id: r, name: format!("R{}", i + 1), cardinality: 2 });
        roots.push(r);
        let mut parents: Vec<VarId> = ps.iter().map(|&p| VarId(p as u32)).collect();
        parents.push(r);
        let rows = 1usize << parents.len();
        let mut table = Vec::with_capacity(2 * rows);
        for _ in 0..rows {
            let value = rng.random_range(0..2usize);
            table.extend_from_slice(if value == 0 { &[1.0, 0.0] } else { &[0.0, 1.0] });
        }
        cpts.push(Cpt { child: VarId(i as u32), parents, table });
    }
    for r in roots {
        let a: f64 = rng.random_range(0.05..0.95);
        let b: f64 = rng.random_range(0.05..0.95);
        cpts.push(Cpt { child: r, parents: Vec::new(), table: vec![a / (a + b), b / (a + b)] });
    }
    cpts.sort_by_key(|c| c.child);
    let network = Network::new(variables, cpts).expect("generated SCM is valid");
    Scm { network, g0: g, outcome: VarId(outcome as u32) }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Roles {
    /// Ascending.
    pub units: Vec<VarId>,
    pub treatment: VarId,
    pub outcome: VarId,
}

/// `anc[v][w]`: `w` is a strict ancestor of `v` in `dag`, ignoring edges
/// into `cut`.
fn ancestors(dag: &Dag, cut: Option<usize>) -> Vec<Vec<bool>> {
    let n = dag.len();
    let mut anc = vec![vec![false; n]; n];
    // Parents precede children, so one forward pass suffices.
    for v in 0..n {
        if Some(v) == cut {
            continue;
        }
        for &p in &dag.parents[v] {
            anc[v][p] = true;
            let pa = anc[p].clone();
            for (dst, src) in anc[v].iter_mut().zip(pa) {
                *dst |= src;
            }
        }
    }
    anc
}

/// Unit candidates for treatment `x` and outcome `y` over `G0`.
pub fn unit_candidates(dag: &Dag, x: usize, y: usize) -> Vec<usize> {
    let anc = ancestors(dag, None);
    let cut = ancestors(dag, Some(x));
    (0..dag.len()).filter(|&w| anc[x][w] && anc[y][w] && cut[y][w]).collect()
}

/// Draws the treatment among `G0` ancestors of the outcome and half (rounded
/// up) of the unit candidates; `None` when there is no candidate.
pub fn select_roles<R: Rng + ?Sized>(scm: &Scm, rng: &mut R) -> Option<Roles> {
    let y = scm.outcome.index();
    let anc = ancestors(&scm.g0, None);
    let causes: Vec<usize> = (0..scm.g0.len()).filter(|&w| anc[y][w]).collect();
    if causes.is_empty() {
        return None;
    }
    let x = causes[rng.random_range(0..causes.len())];
    let candidates = unit_candidates(&scm.g0, x, y);
    if candidates.is_empty() {
        return None;
    }
    let k = candidates.len().div_ceil(2);
    let mut units: Vec<VarId> = sample(rng, candidates.len(), k).into_iter().map(|i| VarId(candidates[i] as u32)).collect();
    units.sort_unstable();
    Some(Roles { units, treatment: VarId(x as u32), outcome: scm.outcome })
}

/// Raw benefit weights for the outcome pairs `(Y in First, Y in Second)`.
pub const BENEFIT_WEIGHTS: [((usize, usize), f64); 4] = [((1, 0), 40.0), ((1, 1), -10.0), ((0, 0), -10.0), ((0, 1), -60.0)];

/// Four components over `(Y_{X=1}, Y_{X=0})` with the benefit weights,
/// shifted to be non-negative.
pub fn build_benefit_instance(scm: &Network, roles: &Roles) -> Result<ObjectiveFunction> {
    let treatments = vec![
        WorldEvent::new(roles.treatment, World::First, 1),
        WorldEvent::new(roles.treatment, World::Second, 0),
    ];
    let components = BENEFIT_WEIGHTS
        .iter()
        .map(|&((y1, y2), weight)| CounterfactualComponent {
            weight,
            outcomes: vec![
                WorldEvent::new(roles.outcome, World::First, y1),
                WorldEvent::new(roles.outcome, World::Second, y2),
            ],
            treatments: treatments.clone(),
            evidence: Evidence::new(),
        })
        .collect();
    let raw = ObjectiveFunction { components, units: roles.units.clone() };
    Ok(shift_weights(scm, &raw)?.0)
}

#[derive(Clone, Debug)]
pub struct Instance {
    pub scm: Scm,
    pub roles: Roles,
    pub objective: ObjectiveFunction,
    /// Draws needed before roles could be assigned (1-based).
    pub attempts: u32,
}

/// Samples `G0`, the SCM and roles for instance `index`, resampling
/// everything on rejection up to [`MAX_ATTEMPTS`] times.
pub fn generate_instance(cfg: &GenConfig, index: u32) -> Result<Instance> {
    cfg.validate()?;
    let mut rng = cfg.rng(index);
    for attempt in 1..=MAX_ATTEMPTS {
        let dag = generate_dag(cfg.n, cfg.p, &mut rng);
        let scm = dag_to_scm(&dag, cfg.outcome_mode, &mut rng);
        if let Some(roles) = select_roles(&scm, &mut rng) {
            let objective = build_benefit_instance(&scm.network, &roles)?;
            return Ok(Instance { scm, roles, objective, attempts: attempt });
        }
    }
    Err(Error::BudgetExceeded { limit: MAX_ATTEMPTS as u64 })
}
