use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unitsel_core::ac::{ac_rmap, evaluate};
use unitsel_core::circuit::Compiler;
use unitsel_core::oracle::{brute_rmap, joint_enumerate, DEFAULT_BUDGET};
use unitsel_core::order::minfill_order;
use unitsel_core::ve::{ve_marginal, ve_rmap};
use unitsel_core::{Cpt, Error, Evidence, Network, VarId, Variable};

fn network(seed: u64, n: usize) -> Network {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let mut variables = Vec::new();
    let mut cpts = Vec::new();
    for i in 0..n {
        let card = if r.random_bool(0.25) { 3 } else { 2 };
        variables.push(Variable { id: VarId(i as u32), name: format!("N{i}"), cardinality: card });
        let mut parents: Vec<VarId> = Vec::new();
        if i > 0 {
            for _ in 0..r.random_range(0..=2.min(i)) {
                let p = VarId(r.random_range(0..i) as u32);
                if !parents.contains(&p) {
                    parents.push(p);
                }
            }
        }
        let rows: usize = parents.iter().map(|p| variables[p.index()].cardinality).product();
        let mut table = Vec::new();
        for _ in 0..rows {
            let mut w: Vec<f64> = (0..card).map(|_| if r.random_bool(0.15) { 0.0 } else { r.random_range(0.01..1.0) }).collect();
            if w.iter().all(|&x| x == 0.0) {
                w[0] = 1.0;
            }
            let s: f64 = w.iter().sum();
            table.extend(w.iter().map(|x| x / s));
        }
        cpts.push(Cpt { child: VarId(i as u32), parents, table });
    }
    Network::new(variables, cpts).unwrap()
}

fn evidence(net: &Network, seed: u64, vars: &[usize]) -> Evidence {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    vars.iter().filter(|&&v| v < net.len()).map(|&v| (VarId(v as u32), r.random_range(0..net.cardinality(VarId(v as u32))))).collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn marginals_match_enumeration(seed in any::<u64>(), n in 2usize..9, ev in proptest::collection::vec(0usize..9, 0..3)) {
        let net = network(seed, n);
        prop_assert!((joint_enumerate(&net, &Evidence::new(), DEFAULT_BUDGET).unwrap() - 1.0).abs() < 1e-9);
        let e = evidence(&net, seed ^ 1, &ev);
        let pe = joint_enumerate(&net, &e, DEFAULT_BUDGET).unwrap();
        let f = ve_marginal(&net, &[], &e).unwrap();
        prop_assert!(close(f.values().iter().sum(), pe) || (pe == 0.0 && f.values().iter().sum::<f64>() == 0.0));
        let plan = minfill_order(&net, &[]);
        let ac = Compiler::new().folding(seed % 2 == 0).compile_network(&net, &[], &plan).unwrap();
        let v = evaluate(&ac, &e);
        prop_assert!(close(v, pe) || (pe == 0.0 && v == 0.0));
    }

    #[test]
    fn rmap_engines_agree(seed in any::<u64>(), n in 3usize..9) {
        let net = network(seed, n);
        let units = vec![VarId(0), VarId(1)];
        let e1 = evidence(&net, seed ^ 2, &[n - 1]);
        let e2 = evidence(&net, seed ^ 3, if n > 3 { &[2][..] } else { &[][..] });
        let brute = brute_rmap(&net, &units, &e1, &e2, DEFAULT_BUDGET);
        let ve = ve_rmap(&net, &units, &e1, &e2);
        let plan = minfill_order(&net, &units);
        let ac = Compiler::new().folding(true).compile_network(&net, &units, &plan).unwrap();
        let acr = ac_rmap(&ac, &units, &e1, &e2);
        match brute {
            Ok(b) => {
                let (v, a) = (ve.unwrap(), acr.unwrap());
                prop_assert!(close(b.value, v.value) || (b.value == 0.0 && v.value == 0.0));
                prop_assert!(close(b.value, a.value) || (b.value == 0.0 && a.value == 0.0));
            }
            Err(e) => {
                prop_assert_eq!(&e, &Error::InconsistentEvidence);
                prop_assert_eq!(ve.unwrap_err(), Error::InconsistentEvidence);
                prop_assert_eq!(acr.unwrap_err(), Error::InconsistentEvidence);
            }
        }
    }
}
