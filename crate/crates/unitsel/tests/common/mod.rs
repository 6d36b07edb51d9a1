#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use unitsel_core::{Cpt, Evidence, Network, VarId, Variable};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random network over `n` variables (mostly binary, some ternary), up to
/// three parents each. About a third of the rows are point masses and some
/// others contain a zero, so circuits have 0/1 parameters to fold.
pub fn random_network(rng: &mut ChaCha8Rng, n: usize) -> Network {
    let cards: Vec<usize> = (0..n).map(|_| if rng.random_bool(0.2) { 3 } else { 2 }).collect();
    let mut variables = Vec::new();
    let mut cpts = Vec::new();
    for i in 0..n {
        variables.push(Variable { id: VarId(i as u32), name: format!("X{i}"), cardinality: cards[i] });
        let k = if i == 0 { 0 } else { rng.random_range(0..=i.min(3)) };
        let mut parents: Vec<VarId> = Vec::new();
        while parents.len() < k {
            let p = VarId(rng.random_range(0..i) as u32);
            if !parents.contains(&p) {
                parents.push(p);
            }
        }
        let rows: usize = parents.iter().map(|p| cards[p.index()]).product();
        let mut table = Vec::new();
        for _ in 0..rows {
            let card = cards[i];
            let r: f64 = rng.random();
            if r < 0.3 {
                let hot = rng.random_range(0..card);
                table.extend((0..card).map(|x| if x == hot { 1.0 } else { 0.0 }));
            } else {
                let mut w: Vec<f64> = (0..card).map(|_| rng.random_range(0.05..1.0)).collect();
                if r < 0.45 {
                    w[rng.random_range(0..card)] = 0.0;
                }
                let s: f64 = w.iter().sum();
                table.extend(w.iter().map(|x| x / s));
            }
        }
        cpts.push(Cpt { child: VarId(i as u32), parents, table });
    }
    Network::new(variables, cpts).expect("random network is valid")
}

/// Disjoint random units, e1 and e2 over `net`.
pub fn random_query(rng: &mut ChaCha8Rng, net: &Network) -> (Vec<VarId>, Evidence, Evidence) {
    let n = net.len();
    let mut ids: Vec<VarId> = (0..n as u32).map(VarId).collect();
    for i in (1..n).rev() {
        ids.swap(i, rng.random_range(0..=i));
    }
    let nu = rng.random_range(1..=3.min(n - 1));
    let n1 = rng.random_range(1..=2.min(n - nu));
    let n2 = rng.random_range(0..=2.min(n - nu - n1));
    let mut units = ids[..nu].to_vec();
    units.sort_unstable();
    let pick = |rng: &mut ChaCha8Rng, vs: &[VarId]| -> Evidence {
        vs.iter().map(|&v| (v, rng.random_range(0..net.cardinality(v)))).collect()
    };
    let e1 = pick(rng, &ids[nu..nu + n1]);
    let e2 = pick(rng, &ids[nu + n1..nu + n1 + n2]);
    (units, e1, e2)
}

/// Calls `f` on every complete instantiation of `net`'s variables.
pub fn for_each_complete(vars: &[Variable], mut f: impl FnMut(&Evidence)) {
    let cards: Vec<usize> = vars.iter().map(|v| v.cardinality).collect();
    let mut odo = unitsel_core::network::Odometer::new(&cards);
    while let Some(a) = odo.current() {
        let e: Evidence = vars.iter().zip(a).map(|(v, &x)| (v.id, x)).collect();
        f(&e);
        if odo.advance().is_none() {
            break;
        }
    }
}

/// `|a - b| <= tol * max(|a|, |b|)`.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}
