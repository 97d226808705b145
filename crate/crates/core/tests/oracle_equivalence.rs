use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rc_sentinel::model::{AttrSet, Transaction, TupleId, TupleOp};
use rc_sentinel::schedule::{is_conflict_serializable, is_rc_allowed, robust_oracle, OracleVerdict, DEFAULT_MAX_OPS};
use rc_sentinel::tx_robust::{build_split_schedule, is_robust_transactions, TxVerdict};

const ATTRS: [&str; 3] = ["a", "b", "c"];

fn attrs(rng: &mut ChaCha8Rng) -> AttrSet {
    loop {
        let set: AttrSet = ATTRS.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
        if !set.is_empty() {
            return set;
        }
    }
}

fn random_set(rng: &mut ChaCha8Rng) -> Vec<Transaction> {
    let tuples = [TupleId::new("P", "t1"), TupleId::new("P", "t2"), TupleId::new("Q", "t1")];
    let n = rng.gen_range(1..=3);
    (0..n)
        .map(|i| {
            let len = rng.gen_range(1..=4);
            let body = (0..len)
                .map(|_| {
                    let t = tuples[rng.gen_range(0..tuples.len())].clone();
                    match rng.gen_range(0..3) {
                        0 => TupleOp::read(t, attrs(rng)),
                        1 => TupleOp::write(t, attrs(rng)),
                        _ => TupleOp::update(t, attrs(rng), attrs(rng)),
                    }
                })
                .collect();
            Transaction::new(format!("T{}", i + 1), body).unwrap()
        })
        .collect()
}

#[test]
fn algorithm_matches_exhaustive_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut not_robust = 0;
    for _ in 0..300 {
        let txs = random_set(&mut rng);
        let verdict = is_robust_transactions(&txs);
        let oracle = robust_oracle(txs.clone(), DEFAULT_MAX_OPS).unwrap();
        assert_eq!(verdict.is_robust(), oracle.is_robust(), "disagreement on {txs:?}");
        if let TxVerdict::NotRobust(w) = verdict {
            not_robust += 1;
            let s = build_split_schedule(&w, &txs).unwrap();
            assert!(is_rc_allowed(&s).is_ok());
            assert!(!is_conflict_serializable(&s).is_serializable());
        }
        if let OracleVerdict::NotRobust { schedule, .. } = oracle {
            assert!(is_rc_allowed(&schedule).is_ok());
            assert!(!is_conflict_serializable(&schedule).is_serializable());
        }
    }
    assert!(not_robust > 30 && not_robust < 270, "degenerate sample: {not_robust}");
}
