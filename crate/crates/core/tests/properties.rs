use std::collections::BTreeSet;

use proptest::prelude::*;
use rc_sentinel::model::{
    coarsen_to_tuple_level, instantiate, ops_conflict, potentially_conflicting, validate_workload, AttrSet,
    ConflictKind, OpKind, Operation, Relation, Schema, Template, TupleId, TupleOp, Variable,
    VariableAssignment, Workload,
};
use rc_sentinel::template_robust::robust_verdict;
use rc_sentinel::tools::{apply_setting, promote, promotion_candidates, AnalysisSetting, PromotionSet};

const ATTRS: [&str; 4] = ["k", "a", "b", "c"];
const NON_KEYS: [&str; 3] = ["a", "b", "c"];

fn attr_set(pool: &'static [&'static str]) -> impl Strategy<Value = AttrSet> {
    proptest::sample::subsequence(pool.to_vec(), 1..=pool.len()).prop_map(|v| v.into_iter().collect())
}

fn op_with<T>(target: impl Strategy<Value = T>) -> impl Strategy<Value = Operation<T>>
where
    T: rc_sentinel::model::Target + std::fmt::Debug + 'static,
{
    (0..3u8, target, attr_set(&ATTRS), attr_set(&NON_KEYS)).prop_map(|(kind, t, rs, ws)| match kind {
        0 => Operation::read(t, rs),
        1 => Operation::write(t, ws),
        _ => Operation::update(t, rs, ws),
    })
}

fn tuple_op() -> impl Strategy<Value = TupleOp> {
    let tuple = prop_oneof![Just(TupleId::new("P", "t1")), Just(TupleId::new("P", "t2")), Just(TupleId::new("Q", "t1"))];
    op_with(tuple)
}

fn schema() -> Schema {
    let rel = |name| Relation::new(name, [("k", true), ("a", false), ("b", false), ("c", false)]);
    Schema::new(vec![rel("P"), rel("Q")])
}

/// Templates over variables X:P, Y:P and Z:Q.
fn workload(max_templates: usize, max_ops: usize) -> impl Strategy<Value = Workload> {
    let var = prop_oneof![Just(Variable::new("X", "P")), Just(Variable::new("Y", "P")), Just(Variable::new("Z", "Q"))];
    let body = proptest::collection::vec(op_with(var), 1..=max_ops);
    proptest::collection::vec(body, 1..=max_templates).prop_map(|bodies| {
        let templates = bodies
            .into_iter()
            .enumerate()
            .map(|(i, b)| Template::new(format!("T{i}"), b).expect("well-formed"))
            .collect();
        Workload::new(schema(), templates)
    })
}

fn kinds(o1: &TupleOp, o2: &TupleOp) -> BTreeSet<ConflictKind> {
    ops_conflict(o1, o2).iter().collect()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    #[test]
    fn conflicts_are_dual(o1 in tuple_op(), o2 in tuple_op()) {
        prop_assert_eq!(ops_conflict(&o1, &o2).reversed(), ops_conflict(&o2, &o1));
        let ww = kinds(&o1, &o2).contains(&ConflictKind::Ww);
        prop_assert_eq!(ww, kinds(&o2, &o1).contains(&ConflictKind::Ww));
    }

    #[test]
    fn coarsening_only_adds_conflicts(w in workload(2, 3)) {
        let c = coarsen_to_tuple_level(&w);
        for (t, ct) in w.templates.iter().zip(&c.templates) {
            for (u, cu) in w.templates.iter().zip(&c.templates) {
                for (o, co) in t.body().iter().zip(ct.body()) {
                    for (p, cp) in u.body().iter().zip(cu.body()) {
                        let fine = potentially_conflicting(o, p);
                        let coarse = potentially_conflicting(co, cp);
                        prop_assert!(fine.iter().all(|k| coarse.contains(k)));
                    }
                }
            }
        }
    }

    #[test]
    fn settings_are_idempotent(w in workload(2, 3)) {
        prop_assert_eq!(coarsen_to_tuple_level(&coarsen_to_tuple_level(&w)), coarsen_to_tuple_level(&w));
        for s in [AnalysisSetting::ONLY_READS_AND_WRITES, AnalysisSetting::ATOMIC_UPDATES, AnalysisSetting::ATTRIBUTE_CONFLICTS] {
            let once = apply_setting(&w, s);
            prop_assert_eq!(apply_setting(&once, s), once);
        }
        prop_assert_eq!(apply_setting(&w, AnalysisSetting::ATTRIBUTE_CONFLICTS), w);
    }

    #[test]
    fn instantiation_preserves_shape(w in workload(1, 4), labels in proptest::collection::vec(0..3u8, 3)) {
        let t = &w.templates[0];
        let mu: VariableAssignment = ["X", "Y", "Z"]
            .iter()
            .zip(&labels)
            .map(|(v, l)| (*v, TupleId::new(if *v == "Z" { "Q" } else { "P" }, format!("t{l}"))))
            .collect();
        let tx = instantiate(t, &mu, "T").unwrap();
        prop_assert_eq!(tx.len(), t.len());
        for (o, i) in t.ops().iter().zip(tx.ops()) {
            prop_assert_eq!(o.kind, i.kind);
            prop_assert_eq!(&o.read_set, &i.read_set);
            prop_assert_eq!(&o.write_set, &i.write_set);
            if let (Some(v), Some(tuple)) = (&o.target, &i.target) {
                prop_assert_eq!(mu.get(&v.name), Some(tuple));
            }
        }
    }

    #[test]
    fn subsets_of_robust_sets_are_robust(w in workload(4, 3)) {
        prop_assume!(validate_workload(&w).is_ok());
        let n = w.templates.len();
        let names = w.template_names();
        let robust = |mask: usize| {
            let pick: Vec<&str> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| names[i].as_str()).collect();
            robust_verdict(&w.restrict(&pick))
        };
        for mask in 1..(1usize << n) {
            if robust(mask) {
                for sub in 1..mask {
                    if sub & mask == sub {
                        prop_assert!(robust(sub), "mask {mask:b} robust but {sub:b} is not");
                    }
                }
            }
        }
    }

    #[test]
    fn promotion_changes_only_kinds_and_write_sets(w in workload(3, 4)) {
        let all: PromotionSet = promotion_candidates(&w).into_iter().collect();
        let p = promote(&w, &all).unwrap();
        for (t, pt) in w.templates.iter().zip(&p.templates) {
            prop_assert_eq!(t.name(), pt.name());
            prop_assert_eq!(t.len(), pt.len());
            for (o, po) in t.ops().iter().zip(pt.ops()) {
                prop_assert_eq!(&o.target, &po.target);
                prop_assert_eq!(&o.read_set, &po.read_set);
                if o.kind == OpKind::Read {
                    prop_assert_eq!(po.kind, OpKind::Update);
                } else {
                    prop_assert_eq!(o, po);
                }
            }
        }
    }

    #[test]
    fn full_promotion_is_robust_at_tuple_granularity(w in workload(3, 4)) {
        prop_assume!(validate_workload(&w).is_ok());
        let all: PromotionSet = promotion_candidates(&w).into_iter().collect();
        let p = promote(&w, &all).unwrap();
        prop_assert!(robust_verdict(&apply_setting(&p, AnalysisSetting::ATOMIC_UPDATES)));
    }
}

#[test]
fn reported_maximal_subsets_are_downward_closed() {
    use rc_sentinel::io::fixtures;
    use rc_sentinel::tools::maximal_robust_subsets;
    for w in [fixtures::smallbank(), fixtures::tpcc_kv()] {
        for s in [AnalysisSetting::ONLY_READS_AND_WRITES, AnalysisSetting::ATOMIC_UPDATES, AnalysisSetting::ATTRIBUTE_CONFLICTS] {
            let prepared = apply_setting(&w, s);
            for set in maximal_robust_subsets(&w, s).unwrap() {
                assert!(set.len() <= 4);
                for mask in 1..(1usize << set.len()) {
                    let pick: Vec<&str> =
                        (0..set.len()).filter(|i| mask & (1 << i) != 0).map(|i| set[i].as_str()).collect();
                    assert!(robust_verdict(&prepared.restrict(&pick)), "{pick:?} under {s}");
                }
            }
        }
    }
}
