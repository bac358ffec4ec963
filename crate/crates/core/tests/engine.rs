use std::time::Duration;

use delbug::engine::{reduce, success_simplification, EngineConfig, Mode, Reduction};
use delbug::refverify::{BnbVerifier, FaultMode, FaultSpec, FaultyVerifier};
use delbug::simplify::SimplificationStep;
use delbug::verifier::{Verdict, VerdictOutcome, Verifier};
use delbug::{fixtures, Bounds, Comparison, LinearConstraint, Property, VerificationQuery};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cat {
    SatValid,
    SatBadInput,
    SatBadOutput,
    Unsat,
    Error,
    Timeout,
}

const CATS: [Cat; 6] = [Cat::SatValid, Cat::SatBadInput, Cat::SatBadOutput, Cat::Unsat, Cat::Error, Cat::Timeout];

/// The running example with output region [4.5, 5.5]: x = 5 is a witness,
/// x = 11 leaves the box and x = 10 maps to 6.
fn table_query() -> VerificationQuery {
    let net = fixtures::running_example_network();
    let p = Property::new(
        vec![Bounds::new(5.0, 10.0)],
        1,
        vec![vec![
            LinearConstraint::bound(1, 0, Comparison::Ge, 4.5),
            LinearConstraint::bound(1, 0, Comparison::Le, 5.5),
        ]],
    )
    .unwrap();
    VerificationQuery::new(net, p).unwrap()
}

fn outcome(c: Cat) -> VerdictOutcome {
    match c {
        Cat::SatValid => VerdictOutcome::sat(vec![5.0]),
        Cat::SatBadInput => VerdictOutcome::sat(vec![11.0]),
        Cat::SatBadOutput => VerdictOutcome::sat(vec![10.0]),
        Cat::Unsat => VerdictOutcome::unsat(),
        Cat::Error => VerdictOutcome::error("boom"),
        Cat::Timeout => VerdictOutcome::timeout(),
    }
}

fn class(c: Cat) -> Option<bool> {
    match c {
        Cat::SatValid | Cat::SatBadInput | Cat::SatBadOutput => Some(true),
        Cat::Unsat => Some(false),
        Cat::Error | Cat::Timeout => None,
    }
}

fn expected(f: Cat, oracles: &[Cat], mode: Mode) -> bool {
    if matches!(f, Cat::SatBadInput | Cat::SatBadOutput) {
        return true;
    }
    if mode == Mode::Single || oracles.is_empty() {
        return false;
    }
    let verdicts: Vec<Option<bool>> = oracles.iter().map(|&o| class(o)).collect();
    let Some(first) = verdicts[0] else { return false };
    if verdicts.iter().any(|v| *v != Some(first)) {
        return false;
    }
    matches!(class(f), Some(fv) if fv != first)
}

#[test]
fn truth_table_with_one_oracle() {
    let q = table_query();
    for mode in [Mode::Dual, Mode::Single] {
        for f in CATS {
            for o in CATS {
                let got = success_simplification(&outcome(f), &[outcome(o)], &q, 1e-6, mode);
                assert_eq!(got, expected(f, &[o], mode), "{mode:?} faulty {f:?} oracle {o:?}");
            }
        }
    }
}

#[test]
fn truth_table_with_two_oracles() {
    let q = table_query();
    for f in CATS {
        for o1 in CATS {
            for o2 in CATS {
                let got = success_simplification(&outcome(f), &[outcome(o1), outcome(o2)], &q, 1e-6, Mode::Dual);
                assert_eq!(got, expected(f, &[o1, o2], Mode::Dual), "faulty {f:?} oracles {o1:?} {o2:?}");
            }
        }
    }
}

#[test]
fn single_mode_ignores_oracles() {
    let q = table_query();
    for f in CATS {
        let without = success_simplification(&outcome(f), &[], &q, 1e-6, Mode::Single);
        for o in CATS {
            assert_eq!(success_simplification(&outcome(f), &[outcome(o)], &q, 1e-6, Mode::Single), without);
        }
    }
}

fn bnb() -> Vec<Box<dyn Verifier>> {
    vec![Box::new(BnbVerifier::default())]
}

fn faulty(mode: FaultMode) -> FaultyVerifier {
    FaultyVerifier::new(FaultSpec::new(mode, 7).unwrap())
}

fn strictly_shrinking(r: &Reduction) {
    let mut last = r.initial_size;
    for rec in r.trace.successes() {
        assert_eq!(rec.size_before, last);
        assert!(rec.size_after < rec.size_before);
        last = rec.size_after;
    }
    assert_eq!(last, r.final_size());
}

#[test]
fn reduction_is_reproducible() {
    let q = fixtures::acas_like_query(4);
    let run = || reduce(&EngineConfig::default(), &faulty(FaultMode::FlipToUnsat), &bnb(), &q).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.query, b.query);
    assert_eq!(a.witness, b.witness);
    let strip = |r: &Reduction| {
        r.trace
            .records
            .iter()
            .map(|x| (x.step, x.success, x.faulty, x.oracles.clone(), x.size_after))
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&a), strip(&b));
    strictly_shrinking(&a);
    assert!(a.final_size() <= 13, "final size {}", a.final_size());
}

#[test]
fn sequential_and_parallel_runs_agree() {
    let q = fixtures::acas_like_query(5);
    let mut cfg = EngineConfig::default();
    let par = reduce(&cfg, &faulty(FaultMode::FlipToUnsat), &bnb(), &q).unwrap();
    cfg.execution = delbug::par::Execution::Sequential;
    let seq = reduce(&cfg, &faulty(FaultMode::FlipToUnsat), &bnb(), &q).unwrap();
    assert_eq!(par.query, seq.query);
    assert_eq!(par.trace.records.len(), seq.trace.records.len());
}

#[test]
fn size_threshold_bug_is_localized() {
    let q = fixtures::running_example_query();
    let r = reduce(&EngineConfig::default(), &faulty(FaultMode::LieAboveSize { threshold: 7 }), &bnb(), &q).unwrap();
    assert_eq!(r.final_size(), 7);
    let first = r.trace.successes().next().unwrap();
    assert!(matches!(first.step, SimplificationStep::MergeNeurons { .. }));
    // every attempt that went below the threshold lost the discrepancy
    for rec in r.trace.records.iter().filter(|x| x.applicable && x.size_after < 7) {
        assert!(!rec.success);
        assert_eq!(rec.faulty, Some(Verdict::Sat));
        assert_eq!(rec.oracles, vec![Verdict::Sat]);
    }
    strictly_shrinking(&r);
}

#[test]
fn single_mode_reduces_corrupt_witnesses() {
    let q = fixtures::acas_like_query(6);
    let cfg = EngineConfig {
        mode: Mode::Single,
        ..EngineConfig::default()
    };
    let r = reduce(&cfg, &faulty(FaultMode::CorruptWitness), &[], &q).unwrap();
    assert!(r.final_size() < q.network().size());
    assert!(r.trace.records.iter().all(|x| x.oracles.is_empty()));
    strictly_shrinking(&r);
}

#[test]
fn an_honest_verifier_is_rejected() {
    let q = fixtures::running_example_query();
    let honest = BnbVerifier::default();
    assert!(reduce(&EngineConfig::default(), &honest, &bnb(), &q).is_err());
    let single = EngineConfig {
        mode: Mode::Single,
        ..EngineConfig::default()
    };
    assert!(reduce(&single, &honest, &[], &q).is_err());
}

#[test]
fn zero_budget_keeps_the_query() {
    let q = fixtures::acas_like_query(2);
    let cfg = EngineConfig {
        global_budget: Duration::ZERO,
        ..EngineConfig::default()
    };
    let r = reduce(&cfg, &faulty(FaultMode::FlipToUnsat), &bnb(), &q).unwrap();
    assert!(r.budget_exhausted);
    assert_eq!(r.query, q);
    assert!(r.trace.records.is_empty());
}

#[test]
fn reduced_queries_still_expose_the_bug() {
    let q = fixtures::acas_like_query(8);
    let f = faulty(FaultMode::FlipToSat);
    // flip-to-sat only misbehaves on UNSAT queries, so start from one
    let net = q.network().clone();
    let y = net.evaluate(&q.property().input_center()).unwrap();
    let p = Property::new(
        q.property().input_box().to_vec(),
        5,
        vec![vec![LinearConstraint::bound(5, 0, Comparison::Ge, y[0] + 1e6)]],
    )
    .unwrap();
    let q = VerificationQuery::new(net, p).unwrap();
    let r = reduce(&EngineConfig::default(), &f, &bnb(), &q).unwrap();
    let final_f = f.verify(&r.query);
    let final_o = BnbVerifier::default().verify(&r.query);
    assert!(success_simplification(&final_f, &[final_o], &r.query, 1e-6, Mode::Dual));
    strictly_shrinking(&r);
}
