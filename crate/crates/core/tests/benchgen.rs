use std::collections::HashSet;

use unitsel_core::bench::{generate_dag, generate_instance, GenConfig};
use unitsel_core::objective::{shift_weights, ObjectiveFunction};
use unitsel_core::oracle::{counterfactual_oracle, joint_enumerate, DEFAULT_BUDGET};
use unitsel_core::{Evidence, Network, VarId};

#[test]
fn in_degree_distribution() {
    let cfg = GenConfig::new(10, 6, 99);
    let mut total = 0usize;
    let mut edges = 0usize;
    for i in 0..1000 {
        let dag = generate_dag(10, 6, &mut cfg.rng(i));
        for ps in &dag.parents[1..] {
            assert!(!ps.is_empty() && ps.len() <= 6);
            edges += ps.len();
            total += 1;
        }
    }
    let mean = edges as f64 / total as f64;
    assert!((1.0..=3.5).contains(&mean), "{mean}");
}

/// Ancestors by depth-first search over the SCM's parent lists, skipping
/// the parents of `cut`.
fn ancestors(net: &Network, of: VarId, cut: Option<VarId>) -> HashSet<VarId> {
    let mut seen = HashSet::new();
    let mut stack = vec![of];
    while let Some(v) = stack.pop() {
        if Some(v) == cut {
            continue;
        }
        for &p in net.parents(v) {
            if seen.insert(p) {
                stack.push(p);
            }
        }
    }
    seen
}

#[test]
fn accepted_instances_match_table_statistics_and_unit_rules() {
    let mut units = 0usize;
    let mut n_prime = 0usize;
    for seed in 0..1000u64 {
        let inst = generate_instance(&GenConfig::new(10, 6, seed), 0).unwrap();
        let net = &inst.scm.network;
        let (x, y) = (inst.roles.treatment, inst.roles.outcome);
        let ax = ancestors(net, x, None);
        let ay = ancestors(net, y, None);
        let ay_cut = ancestors(net, y, Some(x));
        assert!(ay.contains(&x));
        for u in &inst.roles.units {
            assert!(ax.contains(u) && ay.contains(u) && ay_cut.contains(u), "seed {seed}: unit {u}");
        }
        units += inst.roles.units.len();
        n_prime += inst.scm.n_prime();
    }
    let mean_u = units as f64 / 1000.0;
    let mean_np = n_prime as f64 / 1000.0;
    assert!((mean_u - 3.0).abs() <= 1.5, "mean |U| {mean_u}");
    assert!((mean_np - 18.9).abs() <= 0.2 * 18.9, "mean n' {mean_np}");
}

fn objective_value(scm: &Network, obj: &ObjectiveFunction, u: &Evidence) -> f64 {
    obj.components.iter().map(|c| c.weight * counterfactual_oracle(scm, c, u, DEFAULT_BUDGET).unwrap()).sum()
}

#[test]
fn benefit_components_partition_and_shift_keeps_argmax() {
    for seed in 0..20u64 {
        let inst = generate_instance(&GenConfig::new(5, 3, seed), 0).unwrap();
        let scm = &inst.scm.network;
        let shifted = &inst.objective;
        let mut raw = shifted.clone();
        for (c, w) in raw.components.iter_mut().zip([40.0, -10.0, -10.0, -60.0]) {
            c.weight = w;
        }
        assert_eq!(shift_weights(scm, &raw).unwrap().1, 60.0);
        let us = &inst.roles.units;
        for bits in 0..(1usize << us.len()) {
            let u: Evidence = us.iter().enumerate().map(|(k, &v)| (v, (bits >> k) & 1)).collect();
            if joint_enumerate(scm, &u, DEFAULT_BUDGET).unwrap() == 0.0 {
                continue;
            }
            let total: f64 = shifted.components.iter().map(|c| counterfactual_oracle(scm, c, &u, DEFAULT_BUDGET).unwrap()).sum();
            assert!((total - 1.0).abs() < 1e-9, "seed {seed}: {total}");
            let diff = objective_value(scm, shifted, &u) - objective_value(scm, &raw, &u);
            assert!((diff - 60.0).abs() < 1e-9);
        }
    }
}

#[test]
fn outcome_fixed_by_its_own_treatment() {
    use unitsel_core::objective::{CounterfactualComponent, World, WorldEvent};
    let inst = generate_instance(&GenConfig::new(4, 2, 1), 0).unwrap();
    let x = inst.roles.treatment;
    let comp = CounterfactualComponent {
        weight: 1.0,
        outcomes: vec![WorldEvent::new(x, World::First, 1)],
        treatments: vec![WorldEvent::new(x, World::First, 1)],
        evidence: Evidence::new(),
    };
    let u: Evidence = inst.roles.units.iter().map(|&v: &VarId| (v, 0)).collect();
    assert_eq!(counterfactual_oracle(&inst.scm.network, &comp, &u, DEFAULT_BUDGET).unwrap(), 1.0);
}
