//! Robustness of transaction templates against RC, with counterexamples
//! instantiated over at most four tuples per relation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

use crate::graph::{path_from_parents, Digraph};
use crate::model::{
    instantiate, potentially_conflicting, ConflictKind, ConflictKinds, ModelError, Template, Transaction, TupleId,
    VariableAssignment, Workload,
};
use crate::schedule::{is_conflict_serializable, is_rc_allowed, Schedule};
use crate::tx_robust::{build_split_schedule, ConflictQuadruple, SplitError, SplitWitness};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    In,
    Out,
}

/// `(tau, o, i, dir)`: template index, operation position, tuple index 1..=3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TemplateGraphNode {
    pub template: usize,
    pub op: usize,
    pub tuple_index: u8,
    pub direction: Direction,
}

impl fmt::Display for TemplateGraphNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dir = match self.direction {
            Direction::In => "in",
            Direction::Out => "out",
        };
        write!(f, "(#{}, op {}, {}, {dir})", self.template, self.op, self.tuple_index)
    }
}

/// The split parameters `(tau1, o1, p1, h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SplitChoice {
    pub template: usize,
    pub o1: usize,
    pub p1: usize,
    pub h: u8,
}

/// Precomputed potential-conflict table over all operations of a workload.
struct Table<'a> {
    templates: &'a [Template],
    offsets: Vec<usize>,
    total: usize,
    kinds: Vec<ConflictKinds>,
}

impl<'a> Table<'a> {
    fn new(templates: &'a [Template]) -> Self {
        let mut offsets = Vec::with_capacity(templates.len());
        let mut total = 0;
        for t in templates {
            offsets.push(total);
            total += t.len();
        }
        let ops: Vec<_> = templates.iter().flat_map(|t| t.ops()).collect();
        let mut kinds = vec![ConflictKinds::NONE; total * total];
        for (i, x) in ops.iter().enumerate() {
            for (j, y) in ops.iter().enumerate() {
                kinds[i * total + j] = potentially_conflicting(x, y);
            }
        }
        Table { templates, offsets, total, kinds }
    }

    fn get(&self, t1: usize, o1: usize, t2: usize, o2: usize) -> ConflictKinds {
        self.kinds[(self.offsets[t1] + o1) * self.total + self.offsets[t2] + o2]
    }

    fn var(&self, t: usize, o: usize) -> Option<&str> {
        self.templates[t].var_of(o)
    }

    /// Some op of `prefix(tau1, o1)` over `var` potentially ww-conflicts some
    /// op of `tau` over `tau_var`.
    fn prefix_ww(&self, split: SplitChoice, var: &str, tau: usize, tau_var: &str) -> bool {
        (0..=split.o1).filter(|&q| self.var(split.template, q) == Some(var)).any(|q| {
            (0..self.templates[tau].len())
                .filter(|&r| self.var(tau, r) == Some(tau_var))
                .any(|r| self.get(split.template, q, tau, r).contains(ConflictKind::Ww))
        })
    }
}

/// The pt-prefix-conflict-free graph for one split choice. Nodes are listed
/// by template, operation, tuple index, then direction (in before out).
#[derive(Debug, Clone)]
pub struct TemplateGraph {
    pub nodes: Vec<TemplateGraphNode>,
    pub graph: Digraph,
    index: HashMap<TemplateGraphNode, usize>,
}

impl TemplateGraph {
    pub fn node_index(&self, node: &TemplateGraphNode) -> Option<usize> {
        self.index.get(node).copied()
    }

    pub fn has_edge(&self, from: &TemplateGraphNode, to: &TemplateGraphNode) -> bool {
        match (self.node_index(from), self.node_index(to)) {
            (Some(a), Some(b)) => self.graph.has_edge(a, b),
            _ => false,
        }
    }
}

fn build_graph(table: &Table<'_>, split: SplitChoice) -> TemplateGraph {
    let t1 = split.template;
    let var_o1 = table.var(t1, split.o1).expect("o1 has a variable");
    let var_p1 = table.var(t1, split.p1).expect("p1 has a variable");
    let mut nodes = Vec::new();
    let mut index = HashMap::new();
    for (tau, template) in table.templates.iter().enumerate() {
        let mut bad: BTreeMap<&str, (bool, bool)> = BTreeMap::new();
        for o in 0..template.len() {
            let Some(var) = table.var(tau, o) else { continue };
            let (bad_a, bad_b) =
                *bad.entry(var).or_insert_with(|| (table.prefix_ww(split, var_o1, tau, var), table.prefix_ww(split, var_p1, tau, var)));
            for i in 1..=3u8 {
                if (i == 1 && bad_a) || (i == split.h && bad_b) {
                    continue;
                }
                for direction in [Direction::In, Direction::Out] {
                    let node = TemplateGraphNode { template: tau, op: o, tuple_index: i, direction };
                    index.insert(node, nodes.len());
                    nodes.push(node);
                }
            }
        }
    }
    let mut graph = Digraph::with_nodes(nodes.len());
    for (x, nx) in nodes.iter().enumerate() {
        match nx.direction {
            Direction::In => {
                for (y, ny) in nodes.iter().enumerate() {
                    if ny.direction == Direction::Out
                        && ny.template == nx.template
                        && (table.var(nx.template, nx.op) != table.var(ny.template, ny.op) || nx.tuple_index == ny.tuple_index)
                    {
                        graph.add_edge(x, y);
                    }
                }
            }
            Direction::Out => {
                for (y, ny) in nodes.iter().enumerate() {
                    if ny.direction == Direction::In
                        && ny.tuple_index == nx.tuple_index
                        && table.get(nx.template, nx.op, ny.template, ny.op).any()
                    {
                        graph.add_edge(x, y);
                    }
                }
            }
        }
    }
    TemplateGraph { nodes, graph, index }
}

/// Builds the pt-prefix-conflict-free graph for `(o1, p1, h, tau1)` over the
/// templates of `workload`.
pub fn pt_prefix_conflict_free_graph(workload: &Workload, split: SplitChoice) -> TemplateGraph {
    build_graph(&Table::new(&workload.templates), split)
}

/// One step `(occ_from, o, p, occ_to)` of a potential quadruple chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PotentialQuadruple {
    pub from: usize,
    pub o: usize,
    pub p: usize,
    pub to: usize,
    /// Tuple index carried along this conflict on the graph path.
    pub tuple_index: u8,
}

/// A chain `(tau1,o1,p2,tau2), ..., (taum,om,p1,tau1)` over template
/// occurrences; `occurrences[0]` is the split template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PotentialQuadrupleChain {
    pub occurrences: Vec<usize>,
    pub quadruples: Vec<PotentialQuadruple>,
    pub split: SplitChoice,
}

/// `(occurrence, variable name)`.
pub type OccVar = (usize, String);

/// Variables linked to `anchor` by the chain's conflicts, closed under
/// shared variables within an occurrence.
pub fn connected_variables(workload: &Workload, chain: &PotentialQuadrupleChain, anchor: (usize, usize)) -> BTreeSet<OccVar> {
    let var = |occ: usize, op: usize| -> Option<OccVar> {
        workload.templates[chain.occurrences[occ]].var_of(op).map(|v| (occ, v.to_string()))
    };
    let mut connected: BTreeSet<OccVar> = var(anchor.0, anchor.1).into_iter().collect();
    loop {
        let mut grew = false;
        for q in &chain.quadruples {
            let (Some(x), Some(y)) = (var(q.from, q.o), var(q.to, q.p)) else { continue };
            if connected.contains(&x) != connected.contains(&y) {
                connected.insert(x);
                connected.insert(y);
                grew = true;
            }
        }
        if !grew {
            return connected;
        }
    }
}

/// Tuple `c<k>` of a relation.
pub fn type_mapping(relation: &str, k: u8) -> TupleId {
    TupleId::new(relation, format!("c{k}"))
}

/// One assignment per occurrence: variables connected to `o1` get `c1`,
/// those connected to `p1` only get `c2`, the rest `c4` in the split
/// occurrence and `c3` elsewhere.
pub fn canonical_mapping(workload: &Workload, chain: &PotentialQuadrupleChain) -> Vec<VariableAssignment> {
    let to_o1 = connected_variables(workload, chain, (0, chain.split.o1));
    let to_p1 = connected_variables(workload, chain, (0, chain.split.p1));
    chain
        .occurrences
        .iter()
        .enumerate()
        .map(|(occ, &tau)| {
            workload.templates[tau]
                .variables()
                .into_iter()
                .map(|v| {
                    let key = (occ, v.name.clone());
                    let k = if to_o1.contains(&key) {
                        1
                    } else if to_p1.contains(&key) {
                        2
                    } else if occ == 0 {
                        4
                    } else {
                        3
                    };
                    let tuple = type_mapping(&v.relation, k);
                    (v.name, tuple)
                })
                .collect()
        })
        .collect()
}

/// A verified counterexample for a template set.
#[derive(Debug, Clone)]
pub struct TemplateCounterexample {
    pub chain: PotentialQuadrupleChain,
    pub assignments: Vec<VariableAssignment>,
    pub transactions: Vec<Transaction>,
    pub witness: SplitWitness,
    pub schedule: Schedule,
    pub cycle: Vec<usize>,
}

#[derive(Debug, Clone)]
pub enum TemplateVerdict {
    Robust,
    NotRobust(Box<TemplateCounterexample>),
}

impl TemplateVerdict {
    pub fn is_robust(&self) -> bool {
        matches!(self, TemplateVerdict::Robust)
    }
}

#[derive(Debug, Clone, Error)]
pub enum TemplateError {
    #[error("internal error: counterexample instantiation failed: {0}")]
    Instantiate(#[from] ModelError),
    #[error("internal error: counterexample split schedule rejected: {0}")]
    Split(#[from] SplitError),
    #[error("internal error: counterexample schedule is not allowed under RC: {0}")]
    NotRcAllowed(String),
    #[error("internal error: counterexample schedule is conflict serializable")]
    Serializable,
}

/// Finds the first split choice and path for which the robustness test
/// fails, scanning tau1, o1, p1, h, tau2, taum, p2, om in order.
pub fn find_chain(workload: &Workload) -> Option<PotentialQuadrupleChain> {
    let templates = &workload.templates;
    let table = Table::new(templates);
    for (t1, tau1) in templates.iter().enumerate() {
        for o1 in 0..tau1.len() {
            // A hit needs o1 to read.
            if tau1.op(o1).is_commit() || tau1.op(o1).read_set.is_empty() {
                continue;
            }
            for p1 in 0..tau1.len() {
                if tau1.op(p1).is_commit() {
                    continue;
                }
                for h in 1..=2u8 {
                    let split = SplitChoice { template: t1, o1, p1, h };
                    if let Some(chain) = search_split(&table, split) {
                        return Some(chain);
                    }
                }
            }
        }
    }
    None
}

fn search_split(table: &Table<'_>, split: SplitChoice) -> Option<PotentialQuadrupleChain> {
    let (t1, o1, p1, h) = (split.template, split.o1, split.p1, split.h);
    let templates = table.templates;
    // Quick reject before building the graph.
    let starts: Vec<(usize, usize)> = templates
        .iter()
        .enumerate()
        .flat_map(|(t, tau)| (0..tau.len()).map(move |p| (t, p)))
        .filter(|&(t2, p2)| table.get(t1, o1, t2, p2).contains(ConflictKind::Rw))
        .collect();
    if starts.is_empty() {
        return None;
    }
    let ends: Vec<(usize, usize)> = templates
        .iter()
        .enumerate()
        .flat_map(|(t, tau)| (0..tau.len()).map(move |o| (t, o)))
        .filter(|&(tm, om)| {
            let k = table.get(tm, om, t1, p1);
            k.any() && (o1 < p1 || k.contains(ConflictKind::Rw))
        })
        .collect();
    if ends.is_empty() {
        return None;
    }
    let g = build_graph(table, split);
    let mut parents: HashMap<usize, Vec<Option<usize>>> = HashMap::new();
    for t2 in 0..templates.len() {
        for tm in 0..templates.len() {
            for &(_, p2) in starts.iter().filter(|s| s.0 == t2) {
                let start = TemplateGraphNode { template: t2, op: p2, tuple_index: 1, direction: Direction::In };
                let Some(s) = g.node_index(&start) else { continue };
                for &(_, om) in ends.iter().filter(|e| e.0 == tm) {
                    let goal = TemplateGraphNode { template: tm, op: om, tuple_index: h, direction: Direction::Out };
                    let Some(e) = g.node_index(&goal) else { continue };
                    let parent = parents.entry(s).or_insert_with(|| g.graph.bfs_parents(s));
                    if let Some(path) = path_from_parents(parent, s, e) {
                        return Some(chain_from_path(&g, split, &path));
                    }
                }
            }
        }
    }
    None
}

fn chain_from_path(g: &TemplateGraph, split: SplitChoice, path: &[usize]) -> PotentialQuadrupleChain {
    debug_assert!(path.len() >= 2 && path.len().is_multiple_of(2));
    let nodes: Vec<TemplateGraphNode> = path.iter().map(|&n| g.nodes[n]).collect();
    let mut occurrences = vec![split.template];
    let mut quadruples = Vec::new();
    let mut prev_occ = 0;
    let mut prev_op = split.o1;
    for pair in nodes.chunks(2) {
        let (entry, exit) = (pair[0], pair[1]);
        occurrences.push(entry.template);
        let occ = occurrences.len() - 1;
        quadruples.push(PotentialQuadruple { from: prev_occ, o: prev_op, p: entry.op, to: occ, tuple_index: entry.tuple_index });
        prev_occ = occ;
        prev_op = exit.op;
    }
    quadruples.push(PotentialQuadruple { from: prev_occ, o: prev_op, p: split.p1, to: 0, tuple_index: split.h });
    PotentialQuadrupleChain { occurrences, quadruples, split }
}

/// Instance ids `T1..Tm` follow occurrence order.
pub fn materialize(workload: &Workload, chain: PotentialQuadrupleChain) -> Result<TemplateCounterexample, TemplateError> {
    let assignments = canonical_mapping(workload, &chain);
    let transactions = chain
        .occurrences
        .iter()
        .zip(&assignments)
        .enumerate()
        .map(|(i, (&tau, mu))| instantiate(&workload.templates[tau], mu, format!("T{}", i + 1)))
        .collect::<Result<Vec<_>, _>>()?;
    let witness = SplitWitness {
        chain: chain
            .quadruples
            .iter()
            .map(|q| ConflictQuadruple { from_tx: q.from, b: q.o, a: q.p, to_tx: q.to })
            .collect(),
        split_tx: 0,
        split_op: chain.split.o1,
    };
    let schedule = build_split_schedule(&witness, &transactions)?;
    is_rc_allowed(&schedule).map_err(|v| TemplateError::NotRcAllowed(v.to_string()))?;
    let cycle = is_conflict_serializable(&schedule).cycle.ok_or(TemplateError::Serializable)?;
    Ok(TemplateCounterexample { chain, assignments, transactions, witness, schedule, cycle })
}

/// Decides robustness of the workload's templates against RC. A failing
/// verdict carries a counterexample that has been checked end to end.
pub fn is_robust_templates(workload: &Workload) -> Result<TemplateVerdict, TemplateError> {
    match find_chain(workload) {
        None => Ok(TemplateVerdict::Robust),
        Some(chain) => Ok(TemplateVerdict::NotRobust(Box::new(materialize(workload, chain)?))),
    }
}

/// Verdict only, without materializing a counterexample.
pub fn robust_verdict(workload: &Workload) -> bool {
    find_chain(workload).is_none()
}

impl PotentialQuadrupleChain {
    pub fn describe(&self, workload: &Workload) -> String {
        let name = |occ: usize| format!("{}#{}", workload.templates[self.occurrences[occ]].name(), occ + 1);
        let op = |occ: usize, pos: usize| workload.templates[self.occurrences[occ]].op(pos).to_string();
        self.quadruples
            .iter()
            .map(|q| format!("({}, {}, {}, {})", name(q.from), op(q.from, q.o), op(q.to, q.p), name(q.to)))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AttrSet, Relation, Schema, TemplateOp, Variable};

    fn a(s: &[&str]) -> AttrSet {
        s.iter().copied().collect()
    }
    fn v(name: &str) -> Variable {
        Variable::new(name, "S")
    }
    fn schema() -> Schema {
        Schema::new(vec![Relation::new("S", [("k", true), ("x", false), ("y", false)])])
    }

    #[test]
    fn lost_update_template_is_not_robust() {
        let t = Template::new(
            "Inc",
            vec![TemplateOp::read(v("X"), a(&["x"])), TemplateOp::write(v("X"), a(&["x"]))],
        )
        .unwrap();
        let w = Workload::new(schema(), vec![t]);
        let TemplateVerdict::NotRobust(cx) = is_robust_templates(&w).unwrap() else { panic!() };
        assert_eq!(cx.transactions.len(), 2);
        assert_eq!(cx.cycle.len(), 2);
    }

    #[test]
    fn atomic_update_template_is_robust() {
        let t = Template::new("Inc", vec![TemplateOp::update(v("X"), a(&["x"]), a(&["x"]))]).unwrap();
        assert!(is_robust_templates(&Workload::new(schema(), vec![t])).unwrap().is_robust());
    }

    #[test]
    fn disjoint_attributes_are_robust() {
        let r = Template::new("R", vec![TemplateOp::read(v("X"), a(&["x"]))]).unwrap();
        let w = Template::new("W", vec![TemplateOp::update(v("X"), a(&["y"]), a(&["y"]))]).unwrap();
        assert!(is_robust_templates(&Workload::new(schema(), vec![r, w])).unwrap().is_robust());
    }

    #[test]
    fn tuple_index_three_nodes_always_exist() {
        let t = Template::new(
            "T",
            vec![TemplateOp::write(v("X"), a(&["x"])), TemplateOp::read(v("X"), a(&["x"]))],
        )
        .unwrap();
        let w = Workload::new(schema(), vec![t]);
        let g = pt_prefix_conflict_free_graph(&w, SplitChoice { template: 0, o1: 1, p1: 1, h: 1 });
        let has = |i| g.node_index(&TemplateGraphNode { template: 0, op: 0, tuple_index: i, direction: Direction::In }).is_some();
        assert!(!has(1));
        assert!(has(2));
        assert!(has(3));
    }

    #[test]
    fn connected_variables_of_trivial_chains() {
        let t = Template::new("T", vec![TemplateOp::read(v("X"), a(&["x"])), TemplateOp::read(v("Y"), a(&["x"]))]).unwrap();
        let w = Workload::new(schema(), vec![t]);
        let empty = PotentialQuadrupleChain {
            occurrences: vec![0],
            quadruples: vec![],
            split: SplitChoice { template: 0, o1: 0, p1: 1, h: 1 },
        };
        assert_eq!(connected_variables(&w, &empty, (0, 0)), BTreeSet::from([(0, "X".to_string())]));
        let one = PotentialQuadrupleChain {
            occurrences: vec![0, 0],
            quadruples: vec![PotentialQuadruple { from: 0, o: 0, p: 1, to: 1, tuple_index: 1 }],
            split: SplitChoice { template: 0, o1: 0, p1: 1, h: 1 },
        };
        assert_eq!(
            connected_variables(&w, &one, (0, 0)),
            BTreeSet::from([(0, "X".to_string()), (1, "Y".to_string())])
        );
    }
}
