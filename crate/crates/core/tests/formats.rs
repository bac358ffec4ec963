use std::panic;

use delbug::formats::{emit_vnnlib, export_onnx, from_json_str, import_onnx, parse_vnnlib, to_json_string, QueryDocument};
use delbug::{fixtures, Comparison, Error, Network, VerificationQuery};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const P_E: &str = "\
; running example
(declare-const X_0 Real)
(declare-const Y_0 Real)
(assert (>= X_0 5.0))
(assert (<= X_0 10.0))
(assert (>= Y_0 5.0))
(assert (<= Y_0 10.0))
";

fn random_network(rng: &mut ChaCha8Rng) -> Network {
    let seed = rng.gen();
    if rng.gen_bool(0.25) {
        fixtures::random_conv_network(rng.gen_range(1..3), rng.gen_range(3..6), rng.gen_range(1..4), seed)
    } else {
        let hidden: Vec<usize> = (0..rng.gen_range(0..4)).map(|_| rng.gen_range(1..9)).collect();
        fixtures::random_fc_network(rng.gen_range(1..6), &hidden, rng.gen_range(1..4), seed)
    }
}

fn random_query(rng: &mut ChaCha8Rng) -> VerificationQuery {
    let net = random_network(rng);
    let prop = fixtures::random_property(net.input_dim(), net.output_dim(), rng);
    VerificationQuery::new(net, prop).unwrap()
}

fn assert_same_function(a: &Network, b: &Network, rng: &mut ChaCha8Rng, points: usize) {
    assert_eq!(a.input_dim(), b.input_dim());
    assert_eq!(a.output_dim(), b.output_dim());
    for _ in 0..points {
        let x: Vec<f64> = (0..a.input_dim()).map(|_| rng.gen_range(-3.0..3.0)).collect();
        for (p, q) in a.evaluate(&x).unwrap().iter().zip(b.evaluate(&x).unwrap()) {
            assert!((p - q).abs() <= 1e-9, "{p} vs {q}");
        }
    }
}

#[test]
fn running_example_property_parses() {
    let p = parse_vnnlib(P_E).unwrap();
    assert_eq!(p, fixtures::running_example_property());
    assert_eq!(p.input_box()[0].lower, 5.0);
    assert_eq!(p.input_box()[0].upper, 10.0);
    assert_eq!(p.output_region().len(), 1);
    assert!(p.output_region()[0].iter().any(|c| c.cmp == Comparison::Ge && c.rhs == 5.0));
}

#[test]
fn equality_bounds_give_a_point_box() {
    let text = "(declare-const X_0 Real)\n(declare-const Y_0 Real)\n\
                (assert (>= X_0 1.5))\n(assert (<= X_0 1.5))\n(assert (<= Y_0 0.0))\n";
    let p = parse_vnnlib(text).unwrap();
    assert_eq!(p.input_box()[0].width(), 0.0);
    assert!(p.input_contains(&[1.5], 0.0).unwrap());
}

#[test]
fn random_properties_round_trip_through_vnnlib() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..20 {
        let (i, o) = (rng.gen_range(1..6), rng.gen_range(1..4));
        let p = fixtures::random_property(i, o, &mut rng);
        let back = parse_vnnlib(&emit_vnnlib(&p)).unwrap();
        assert_eq!(back, p);
    }
}

#[test]
fn random_networks_round_trip_through_onnx() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    for _ in 0..20 {
        let net = random_network(&mut rng);
        let back = import_onnx(&export_onnx(&net)).unwrap();
        assert_same_function(&net, &back, &mut rng, 100);
    }
}

#[test]
fn queries_round_trip_between_json_and_onnx_vnnlib() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    for _ in 0..50 {
        let q = random_query(&mut rng);
        let dir = tempfile::tempdir().unwrap();
        delbug::formats::write_query_pair(dir.path(), &q).unwrap();
        let pair = delbug::formats::load_query(&dir.path().join("network.onnx"), &[dir.path().join("property.vnnlib")])
            .unwrap();
        let json = to_json_string(&QueryDocument::new(pair.clone()));
        let back = from_json_str(&json).unwrap().query;
        assert_eq!(back.property(), q.property());
        assert_same_function(q.network(), back.network(), &mut rng, 100);
        // the JSON leg alone is lossless
        assert_eq!(from_json_str(&json).unwrap().query, pair);
    }
}

fn mutate(text: &str, rng: &mut ChaCha8Rng) -> String {
    let mut chars: Vec<char> = text.chars().collect();
    let at = rng.gen_range(0..chars.len());
    match rng.gen_range(0..6) {
        0 => {
            chars.remove(at);
        }
        1 => chars.insert(at, '('),
        2 => chars.insert(at, ')'),
        3 => {
            let junk = ['#', '"', 'q', '-', '.', 'e', '9', '\u{e9}'];
            chars[at] = junk[rng.gen_range(0..junk.len())];
        }
        4 => {
            let end = (at + rng.gen_range(1..20)).min(chars.len());
            chars.drain(at..end);
        }
        _ => chars.truncate(at),
    }
    chars.into_iter().collect()
}

#[test]
fn mutated_vnnlib_gives_structured_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(34);
    let mut failures = 0;
    let mut tries = 0;
    while failures < 20 {
        tries += 1;
        assert!(tries < 10_000, "mutations keep parsing");
        let text = mutate(P_E, &mut rng);
        let result = panic::catch_unwind(|| parse_vnnlib(&text)).unwrap_or_else(|_| panic!("parser panicked on {text:?}"));
        if let Err(e) = result {
            failures += 1;
            assert!(
                matches!(e, Error::Parse { .. } | Error::InvalidProperty(_)),
                "unexpected error kind {e:?}"
            );
            assert!(!e.to_string().is_empty());
        }
    }
}

#[test]
fn mutated_json_gives_structured_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(35);
    let text = to_json_string(&QueryDocument::new(fixtures::running_example_query()));
    let mut failures = 0;
    while failures < 20 {
        let m = mutate(&text, &mut rng);
        let result = panic::catch_unwind(|| from_json_str(&m)).expect("no panic");
        if let Err(e) = result {
            failures += 1;
            assert!(matches!(
                e,
                Error::Parse { .. }
                    | Error::Schema(_)
                    | Error::InvalidNetwork(_)
                    | Error::InvalidLayer(_)
                    | Error::InvalidProperty(_)
                    | Error::InvalidInput(_)
            ));
        }
    }
}

#[test]
fn corrupted_onnx_never_panics() {
    let mut rng = ChaCha8Rng::seed_from_u64(36);
    let bytes = export_onnx(&fixtures::running_example_network());
    for _ in 0..200 {
        let mut b = bytes.clone();
        for _ in 0..rng.gen_range(1..4) {
            let i = rng.gen_range(0..b.len());
            b[i] = rng.gen();
        }
        if rng.gen_bool(0.3) {
            b.truncate(rng.gen_range(0..b.len()));
        }
        let result = panic::catch_unwind(|| import_onnx(&b));
        assert!(result.is_ok(), "importer panicked");
    }
}

proptest! {
    #[test]
    fn json_round_trip_is_exact(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut doc = QueryDocument::new(random_query(&mut rng));
        doc.metadata.insert("seed".into(), seed.to_string());
        let back = from_json_str(&to_json_string(&doc)).unwrap();
        prop_assert_eq!(back.query, doc.query);
        prop_assert_eq!(back.metadata, doc.metadata);
    }

    #[test]
    fn vnnlib_round_trip_is_exact(seed in any::<u64>(), i in 1usize..8, o in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = fixtures::random_property(i, o, &mut rng);
        prop_assert_eq!(parse_vnnlib(&emit_vnnlib(&p)).unwrap(), p);
    }
}
