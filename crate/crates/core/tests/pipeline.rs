use unitsel_core::ac::ac_rmap;
use unitsel_core::bench::{generate_instance, GenConfig};
use unitsel_core::circuit::{check_structure, check_u_determinism, Compiler};
use unitsel_core::objective::compose_objective;
use unitsel_core::oracle::{brute_rmap, conditional, counterfactual_oracle, DEFAULT_BUDGET};
use unitsel_core::order::minfill_order;
use unitsel_core::ve::ve_rmap;
use unitsel_core::Evidence;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn engines_agree_on_small_benefit_instances() {
    for n in [3usize, 4, 5] {
        let cfg = GenConfig::new(n, 2, 11);
        for i in 0..8 {
            let inst = generate_instance(&cfg, i).unwrap();
            let model = compose_objective(&inst.scm.network, &inst.objective).unwrap();
            let net = &model.network;
            let brute = brute_rmap(net, &model.units, &model.e1, &model.e2, DEFAULT_BUDGET).unwrap();
            let ve = ve_rmap(net, &model.units, &model.e1, &model.e2).unwrap();
            let plan = minfill_order(net, &model.units);
            let ac = Compiler::new().folding(true).compile_network(net, &model.units, &plan).unwrap();
            assert!(check_structure(&ac).is_empty());
            assert!(check_u_determinism(&ac, &model.units).unwrap().is_empty());
            let acr = ac_rmap(&ac, &model.units, &model.e1, &model.e2).unwrap();
            assert!(close(brute.value, ve.value), "n={n} i={i}: {} vs {}", brute.value, ve.value);
            assert!(close(brute.value, acr.value), "n={n} i={i}: {} vs {}", brute.value, acr.value);
            for r in [&ve, &acr] {
                let v = conditional(net, &model.e1, &r.argmax, &model.e2, DEFAULT_BUDGET).unwrap();
                assert!(close(v, brute.value));
            }
        }
    }
}

#[test]
fn objective_model_matches_counterfactual_semantics() {
    let cfg = GenConfig::new(4, 2, 3);
    for i in 0..5 {
        let inst = generate_instance(&cfg, i).unwrap();
        let scm = &inst.scm.network;
        let model = compose_objective(scm, &inst.objective).unwrap();
        let total: f64 = inst.objective.components.iter().map(|c| c.weight).sum();
        for bits in 0..(1usize << inst.roles.units.len()) {
            let u: Evidence =
                inst.roles.units.iter().enumerate().map(|(k, &v)| (v, (bits >> k) & 1)).collect();
            let mu = model.units_from_scm(&inst.roles.units, &u);
            let lhs = conditional(&model.network, &model.e1, &mu, &model.e2, DEFAULT_BUDGET).unwrap();
            let rhs: f64 = inst
                .objective
                .components
                .iter()
                .map(|c| c.weight / total * counterfactual_oracle(scm, c, &u, DEFAULT_BUDGET).unwrap())
                .sum();
            assert!((lhs - rhs).abs() < 1e-9, "i={i} u={bits}: {lhs} vs {rhs}");
        }
    }
}
