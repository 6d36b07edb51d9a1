mod common;

use common::{random_network, rng};
use unitsel::format::{
    network_to_json, objective_to_json, parse_network, parse_objective, parse_query, query_to_json, FormatError,
    QueryDoc,
};
use unitsel_core::bench::{generate_instance, GenConfig};
use unitsel_core::circuit::{read_dump, write_dump, Compiler};
use unitsel_core::network::Violation;
use unitsel_core::order::minfill_order;
use unitsel_core::{Error, VarId};

#[test]
fn single_root() {
    let net = parse_network(r#"{"variables":[{"name":"A","cardinality":2}],"cpts":[{"child":"A","parents":[],"table":[0.3,0.7]}]}"#).unwrap();
    assert_eq!(net.len(), 1);
    assert_eq!(net.cpts()[0].table, vec![0.3, 0.7]);
}

#[test]
fn chain_orders_topologically() {
    let net = parse_network(
        r#"{"cpts":[{"child":"B","parents":["A"],"table":[0.9,0.1,0.2,0.8]},{"child":"A","parents":[],"table":[0.3,0.7]}],
            "variables":[{"name":"A","cardinality":2},{"name":"B","cardinality":2}]}"#,
    )
    .unwrap();
    assert_eq!(net.topological_order().unwrap(), vec![VarId(0), VarId(1)]);
}

#[test]
fn random_networks_round_trip_bit_exactly() {
    let mut r = rng(17);
    for _ in 0..50 {
        let net = random_network(&mut r, 9);
        let back = parse_network(&network_to_json(&net)).unwrap();
        for (a, b) in net.cpts().iter().zip(back.cpts()) {
            assert_eq!(a.parents, b.parents);
            let bits = |t: &[f64]| t.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.table), bits(&b.table));
        }
    }
}

#[test]
fn unnormalized_row_names_the_variable() {
    let err = parse_network(
        r#"{"variables":[{"name":"A","cardinality":2},{"name":"B","cardinality":2}],
            "cpts":[{"child":"A","parents":[],"table":[0.3,0.7]},{"child":"B","parents":["A"],"table":[0.5,0.4,0.2,0.8]}]}"#,
    )
    .unwrap_err();
    match err {
        FormatError::Core(Error::InvalidNetwork(v)) => {
            assert_eq!(v.len(), 1);
            assert!(matches!(v[0], Violation::NotNormalized { var: VarId(1), row: 0, .. }));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn unknown_parent_and_bad_syntax() {
    let err = parse_network(r#"{"variables":[{"name":"A","cardinality":2}],"cpts":[{"child":"A","parents":["Z"],"table":[1,0]}]}"#);
    assert!(matches!(err, Err(FormatError::UnknownName(n)) if n == "Z"));
    assert!(matches!(parse_network("{\"variables\": 3}"), Err(FormatError::Syntax { line: 1, .. })));
}

#[test]
fn objective_and_query_round_trip() {
    let inst = generate_instance(&GenConfig::new(5, 2, 4), 0).unwrap();
    let scm = &inst.scm.network;
    let text = objective_to_json(scm, &inst.objective);
    assert_eq!(parse_objective(scm, &text).unwrap(), inst.objective);
    let q = QueryDoc { units: vec!["V1".into()], e1: vec![], e2: vec![], scale: 200.0, shift: 60.0 };
    assert_eq!(parse_query(&query_to_json(&q)).unwrap(), q);
}

#[test]
fn circuit_dumps_round_trip() {
    let mut r = rng(23);
    for i in 0..20 {
        let net = random_network(&mut r, 8);
        let units = [VarId(0), VarId(3)];
        let plan = minfill_order(&net, &units);
        let ac = Compiler::new().folding(i % 2 == 0).compile_network(&net, &units, &plan).unwrap();
        let text = write_dump(&ac);
        let back = read_dump(&text).unwrap();
        assert_eq!(write_dump(&back), text);
        assert!(back.certificate().complete());
    }
}
