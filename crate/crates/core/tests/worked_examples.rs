use rc_sentinel::io::fixtures;
use rc_sentinel::template_robust::{
    is_robust_templates, pt_prefix_conflict_free_graph, Direction, SplitChoice, TemplateGraphNode, TemplateVerdict,
};
use rc_sentinel::tools::{apply_setting, AnalysisSetting};

fn node(template: usize, op: usize, tuple_index: u8, direction: Direction) -> TemplateGraphNode {
    TemplateGraphNode { template, op, tuple_index, direction }
}

#[test]
fn deposit_checking_update_links_in_to_out() {
    let w = fixtures::smallbank().restrict(&["WriteCheck", "DepositChecking"]);
    assert_eq!(w.template_names(), ["DepositChecking", "WriteCheck"]);
    // WriteCheck split after its Checking read, closed by its Checking update.
    let g = pt_prefix_conflict_free_graph(&w, SplitChoice { template: 1, o1: 2, p1: 3, h: 1 });
    assert!(g.has_edge(&node(0, 1, 1, Direction::In), &node(0, 1, 1, Direction::Out)));
    // The Account read conflicts with nothing, so its only edges stay inside DepositChecking.
    let from = g.node_index(&node(0, 0, 1, Direction::Out)).unwrap();
    assert!(g.graph.successors(from).iter().all(|&t| g.nodes[t].template == 0));
}

#[test]
fn balance_amalgamate_counterexample_splits_balance_after_savings_read() {
    let w = apply_setting(&fixtures::smallbank().restrict(&["Balance", "Amalgamate"]), AnalysisSetting::default());
    let TemplateVerdict::NotRobust(cx) = is_robust_templates(&w).unwrap() else { panic!("expected not robust") };
    let names: Vec<&str> = cx.chain.occurrences.iter().map(|&t| w.templates[t].name()).collect();
    assert_eq!(names, ["Balance", "Amalgamate"]);
    assert_eq!((cx.chain.split.o1, cx.chain.split.p1), (1, 2));
    assert_eq!(cx.witness.inner_transactions(), [1]);
    assert_eq!(cx.cycle.len(), 2);
}

#[test]
fn three_template_chain_for_balance_deposit_transact() {
    let w = fixtures::smallbank().restrict(&["Balance", "DepositChecking", "TransactSavings"]);
    let TemplateVerdict::NotRobust(cx) = is_robust_templates(&w).unwrap() else { panic!("expected not robust") };
    let names: Vec<&str> = cx.chain.occurrences.iter().map(|&t| w.templates[t].name()).collect();
    assert_eq!(names, ["Balance", "TransactSavings", "Balance", "DepositChecking"]);
    let tuples: Vec<String> = cx.transactions.iter().map(|t| t.ops()[1].target.as_ref().unwrap().to_string()).collect();
    assert_eq!(tuples, ["Savings.c1", "Savings.c1", "Savings.c1", "Checking.c2"]);
}
