use std::collections::BTreeSet;

use rc_sentinel::io::fixtures;
use rc_sentinel::model::Workload;
use rc_sentinel::tools::{maximal_robust_subsets, minimal_promotions, AnalysisSetting};

fn abbreviate(name: &str) -> &'static str {
    match name {
        "Balance" => "Bal",
        "DepositChecking" => "DC",
        "TransactSavings" => "TS",
        "Amalgamate" => "Am",
        "WriteCheck" => "WC",
        "NewOrder" => "NO",
        "Payment" => "Pay",
        "OrderStatus" => "OS",
        "Delivery" => "Del",
        "StockLevel" => "SL",
        other => panic!("unknown template {other}"),
    }
}

fn subsets(w: &Workload, s: AnalysisSetting) -> BTreeSet<BTreeSet<&'static str>> {
    maximal_robust_subsets(w, s)
        .unwrap()
        .into_iter()
        .map(|set| set.iter().map(|n| abbreviate(n)).collect())
        .collect()
}

fn expect(sets: &[&[&'static str]]) -> BTreeSet<BTreeSet<&'static str>> {
    sets.iter().map(|s| s.iter().copied().collect()).collect()
}

#[test]
fn smallbank_robust_subsets() {
    let w = fixtures::smallbank();
    assert_eq!(subsets(&w, AnalysisSetting::ONLY_READS_AND_WRITES), expect(&[&["Bal"]]));
    let three = expect(&[&["Am", "DC", "TS"], &["Bal", "DC"], &["Bal", "TS"]]);
    assert_eq!(subsets(&w, AnalysisSetting::ATOMIC_UPDATES), three);
    assert_eq!(subsets(&w, AnalysisSetting::ATTRIBUTE_CONFLICTS), three);
}

#[test]
fn tpcc_robust_subsets() {
    let w = fixtures::tpcc_kv();
    assert_eq!(subsets(&w, AnalysisSetting::ONLY_READS_AND_WRITES), expect(&[&["OS", "SL"]]));
    assert_eq!(
        subsets(&w, AnalysisSetting::ATOMIC_UPDATES),
        expect(&[&["Del", "Pay", "SL"], &["NO", "SL"], &["Pay", "OS", "SL"]])
    );
    assert_eq!(
        subsets(&w, AnalysisSetting::ATTRIBUTE_CONFLICTS),
        expect(&[&["Del", "Pay", "NO", "SL"], &["Pay", "OS", "SL"]])
    );
}

fn promoted(w: &Workload, s: AnalysisSetting) -> Vec<String> {
    minimal_promotions(w, s).unwrap().iter().map(|p| p.to_string()).collect()
}

#[test]
fn tpcc_minimal_promotions() {
    let w = fixtures::tpcc_kv();
    assert_eq!(
        promoted(&w, AnalysisSetting::ATTRIBUTE_CONFLICTS),
        ["{OrderStatus[0], OrderStatus[1], OrderStatus[2], OrderStatus[3]}"]
    );
    assert_eq!(
        promoted(&w, AnalysisSetting::ATOMIC_UPDATES),
        ["{NewOrder[0], NewOrder[2], OrderStatus[0], OrderStatus[1], OrderStatus[2], OrderStatus[3]}"]
    );
}

#[test]
fn smallbank_minimal_promotions() {
    let w = fixtures::smallbank();
    let expected = ["{Balance[1], WriteCheck[1], WriteCheck[2]}"];
    assert_eq!(promoted(&w, AnalysisSetting::ATTRIBUTE_CONFLICTS), expected);
    assert_eq!(promoted(&w, AnalysisSetting::ATOMIC_UPDATES), expected);
}

#[test]
fn promoted_fixtures_are_robust() {
    use rc_sentinel::template_robust::robust_verdict;
    use rc_sentinel::tools::apply_setting;
    let attr = AnalysisSetting::ATTRIBUTE_CONFLICTS;
    let tuple = AnalysisSetting::ATOMIC_UPDATES;
    for (name, s) in [("smallbank-promoted", attr), ("smallbank-promoted", tuple), ("tpcc-kv-promoted-attr", attr), ("tpcc-kv-promoted-tuple", tuple)] {
        let w = fixtures::load(name).unwrap();
        assert!(robust_verdict(&apply_setting(&w, s)), "{name} under {s}");
    }
}
