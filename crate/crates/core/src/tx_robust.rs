//! Robustness of concrete transaction sets against RC and construction of
//! multiversion split schedules.

use std::fmt;

use thiserror::Error;

use crate::graph::Digraph;
use crate::model::{ops_conflict, ConflictKind, Transaction};
use crate::schedule::{build_rlc_schedule, OpRef, Schedule, ScheduleError};

/// `(T_i, b_i, a_j, T_j)`: `b` in `from_tx` conflicts with `a` in `to_tx`.
/// Transactions are indices into the analysed slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConflictQuadruple {
    pub from_tx: usize,
    pub b: usize,
    pub a: usize,
    pub to_tx: usize,
}

/// A conflict chain `(T1,b1,a2,T2), ..., (Tm,bm,a1,T1)` together with the
/// split point `b1` of `T1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitWitness {
    pub chain: Vec<ConflictQuadruple>,
    pub split_tx: usize,
    pub split_op: usize,
}

impl SplitWitness {
    /// Transactions placed between the two halves of `T1`, in order.
    pub fn inner_transactions(&self) -> Vec<usize> {
        self.chain.iter().skip(1).map(|q| q.from_tx).collect()
    }

    pub fn describe(&self, transactions: &[Transaction]) -> String {
        let id = |t: usize| transactions[t].id();
        let mut out = format!("split {} after {}:", id(self.split_tx), transactions[self.split_tx].op(self.split_op));
        for q in &self.chain {
            out.push_str(&format!(
                " ({}, {}, {}, {})",
                id(q.from_tx),
                transactions[q.from_tx].op(q.b),
                transactions[q.to_tx].op(q.a),
                id(q.to_tx)
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TxVerdict {
    Robust,
    NotRobust(SplitWitness),
}

impl TxVerdict {
    pub fn is_robust(&self) -> bool {
        matches!(self, TxVerdict::Robust)
    }
}

fn conflicts(transactions: &[Transaction], x: OpRef, y: OpRef) -> crate::model::ConflictKinds {
    ops_conflict(transactions[x.tx].op(x.pos), transactions[y.tx].op(y.pos))
}

fn any_conflict(ti: &Transaction, tj: &Transaction) -> bool {
    ti.body().iter().any(|a| tj.body().iter().any(|b| ops_conflict(a, b).any()))
}

fn prefix_ww_conflicts(t1: &Transaction, b1: usize, other: &Transaction) -> bool {
    t1.ops()[..=b1]
        .iter()
        .any(|p| other.body().iter().any(|o| ops_conflict(p, o).contains(ConflictKind::Ww)))
}

/// Nodes of the prefix-conflict-free graph, as a subset of `others`, plus
/// the graph over those nodes (node `k` is `members[k]`).
#[derive(Debug, Clone)]
pub struct PrefixConflictFreeGraph {
    pub members: Vec<usize>,
    pub graph: Digraph,
}

impl PrefixConflictFreeGraph {
    pub fn node_of(&self, tx: usize) -> Option<usize> {
        self.members.iter().position(|&m| m == tx)
    }
}

/// Keeps the transactions of `others` (indices into `transactions`) with no
/// ww-conflict against `prefix(T1, b1)`; connects any two that conflict.
pub fn prefix_conflict_free_graph(
    transactions: &[Transaction],
    t1: usize,
    b1: usize,
    others: &[usize],
) -> PrefixConflictFreeGraph {
    let members: Vec<usize> = others
        .iter()
        .copied()
        .filter(|&t| t != t1 && !prefix_ww_conflicts(&transactions[t1], b1, &transactions[t]))
        .collect();
    let mut graph = Digraph::with_nodes(members.len());
    for (i, &ti) in members.iter().enumerate() {
        for (j, &tj) in members.iter().enumerate() {
            if i != j && any_conflict(&transactions[ti], &transactions[tj]) {
                graph.add_edge(i, j);
            }
        }
    }
    PrefixConflictFreeGraph { members, graph }
}

/// Decides robustness of a transaction set against RC. On failure, returns
/// the first witness in input order of `T1`, `b1`, `T2`, `Tm`.
pub fn is_robust_transactions(transactions: &[Transaction]) -> TxVerdict {
    let all: Vec<usize> = (0..transactions.len()).collect();
    for (t1, tx1) in transactions.iter().enumerate() {
        for (b1, op_b1) in tx1.ops().iter().enumerate() {
            if !op_b1.kind.is_read() {
                continue;
            }
            let g = prefix_conflict_free_graph(transactions, t1, b1, &all);
            if g.members.is_empty() {
                continue;
            }
            let b1_ref = OpRef::new(t1, b1);
            // First a2 in T2 with b1 rw a2.
            let a2_of: Vec<Option<usize>> = g
                .members
                .iter()
                .map(|&t2| {
                    (0..transactions[t2].len()).find(|&p| conflicts(transactions, b1_ref, OpRef::new(t2, p)).contains(ConflictKind::Rw))
                })
                .collect();
            // First (a1, bm) closing the cycle back into T1.
            let closing: Vec<Option<(usize, usize)>> = g
                .members
                .iter()
                .map(|&tm| {
                    (0..tx1.len()).find_map(|a1| {
                        (0..transactions[tm].len()).find_map(|bm| {
                            let k = conflicts(transactions, OpRef::new(tm, bm), OpRef::new(t1, a1));
                            (k.any() && (b1 < a1 || k.contains(ConflictKind::Rw))).then_some((a1, bm))
                        })
                    })
                })
                .collect();
            for (n2, a2) in a2_of.iter().enumerate() {
                let Some(a2) = *a2 else { continue };
                let parent = g.graph.bfs_parents(n2);
                for (nm, close) in closing.iter().enumerate() {
                    let Some((a1, bm)) = *close else { continue };
                    let Some(path) = crate::graph::path_from_parents(&parent, n2, nm) else { continue };
                    let path: Vec<usize> = path.into_iter().map(|n| g.members[n]).collect();
                    return TxVerdict::NotRobust(assemble_witness(transactions, t1, b1, a2, &path, bm, a1));
                }
            }
        }
    }
    TxVerdict::Robust
}

fn first_conflicting_pair(ti: &Transaction, tj: &Transaction) -> (usize, usize) {
    for (p, a) in ti.ops().iter().enumerate() {
        for (q, b) in tj.ops().iter().enumerate() {
            if ops_conflict(a, b).any() {
                return (p, q);
            }
        }
    }
    unreachable!("graph edge without a conflicting operation pair")
}

fn assemble_witness(
    transactions: &[Transaction],
    t1: usize,
    b1: usize,
    a2: usize,
    path: &[usize],
    bm: usize,
    a1: usize,
) -> SplitWitness {
    let mut chain = vec![ConflictQuadruple { from_tx: t1, b: b1, a: a2, to_tx: path[0] }];
    for w in path.windows(2) {
        let (b, a) = first_conflicting_pair(&transactions[w[0]], &transactions[w[1]]);
        chain.push(ConflictQuadruple { from_tx: w[0], b, a, to_tx: w[1] });
    }
    chain.push(ConflictQuadruple { from_tx: *path.last().expect("non-empty path"), b: bm, a: a1, to_tx: t1 });
    SplitWitness { chain, split_tx: t1, split_op: b1 }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum SplitError {
    #[error("malformed witness: {0}")]
    Malformed(String),
    #[error("dirty-write clause violated: prefix write {prefix_op} of {split_tx} ww-conflicts with a write of {other}")]
    DirtyWriteClause { split_tx: String, prefix_op: usize, other: String },
    #[error("ordering clause violated: b1 does not precede a1 and bm is not rw-conflicting with a1")]
    OrderingClause,
    #[error("antidependency clause violated: b1 is not rw-conflicting with a2")]
    AntidependencyClause,
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

impl fmt::Display for ConflictQuadruple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(T#{}, op {}, op {}, T#{})", self.from_tx, self.b, self.a, self.to_tx)
    }
}

fn check_witness(transactions: &[Transaction], w: &SplitWitness) -> Result<(), SplitError> {
    let n = transactions.len();
    let chain = &w.chain;
    if chain.is_empty() {
        return Err(SplitError::Malformed("empty chain".into()));
    }
    for q in chain {
        if q.from_tx >= n || q.to_tx >= n {
            return Err(SplitError::Malformed(format!("{q} names an unknown transaction")));
        }
        if q.b >= transactions[q.from_tx].len() || q.a >= transactions[q.to_tx].len() {
            return Err(SplitError::Malformed(format!("{q} names an unknown operation")));
        }
        if q.from_tx == q.to_tx {
            return Err(SplitError::Malformed(format!("{q} stays within one transaction")));
        }
        if !conflicts(transactions, OpRef::new(q.from_tx, q.b), OpRef::new(q.to_tx, q.a)).any() {
            return Err(SplitError::Malformed(format!("{q} is not a conflict")));
        }
    }
    for pair in chain.windows(2) {
        if pair[0].to_tx != pair[1].from_tx {
            return Err(SplitError::Malformed("consecutive quadruples do not share a transaction".into()));
        }
    }
    let first = chain[0];
    let last = chain[chain.len() - 1];
    if first.from_tx != w.split_tx || last.to_tx != w.split_tx || first.b != w.split_op {
        return Err(SplitError::Malformed("chain does not start and end at the split transaction".into()));
    }
    let mut inner = w.inner_transactions();
    inner.sort_unstable();
    if inner.windows(2).any(|p| p[0] == p[1]) || inner.contains(&w.split_tx) {
        return Err(SplitError::Malformed("a transaction occurs in more than two quadruples".into()));
    }
    let t1 = &transactions[w.split_tx];
    if !t1.op(w.split_op).kind.is_read() {
        return Err(SplitError::Malformed("split operation is not a read".into()));
    }
    for &t in &inner {
        for (p, op) in t1.ops()[..=w.split_op].iter().enumerate() {
            if transactions[t].body().iter().any(|o| ops_conflict(op, o).contains(ConflictKind::Ww)) {
                return Err(SplitError::DirtyWriteClause {
                    split_tx: t1.id().to_string(),
                    prefix_op: p,
                    other: transactions[t].id().to_string(),
                });
            }
        }
    }
    let closing = conflicts(transactions, OpRef::new(last.from_tx, last.b), OpRef::new(w.split_tx, last.a));
    if !(w.split_op < last.a || closing.contains(ConflictKind::Rw)) {
        return Err(SplitError::OrderingClause);
    }
    if !conflicts(transactions, OpRef::new(w.split_tx, w.split_op), OpRef::new(first.to_tx, first.a)).contains(ConflictKind::Rw) {
        return Err(SplitError::AntidependencyClause);
    }
    Ok(())
}

/// The interleaving `prefix(T1,b1) . T2 ... Tm . postfix(T1,b1) . rest`.
pub fn split_interleaving(transactions: &[Transaction], witness: &SplitWitness) -> Vec<OpRef> {
    let t1 = witness.split_tx;
    let inner = witness.inner_transactions();
    let mut order: Vec<OpRef> = (0..=witness.split_op).map(|p| OpRef::new(t1, p)).collect();
    for &t in &inner {
        order.extend((0..transactions[t].len()).map(|p| OpRef::new(t, p)));
    }
    order.extend((witness.split_op + 1..transactions[t1].len()).map(|p| OpRef::new(t1, p)));
    for t in (0..transactions.len()).filter(|t| *t != t1 && !inner.contains(t)) {
        order.extend((0..transactions[t].len()).map(|p| OpRef::new(t, p)));
    }
    order
}

/// Materializes the multiversion split schedule of a witness after checking
/// the three defining conditions.
pub fn build_split_schedule(witness: &SplitWitness, transactions: &[Transaction]) -> Result<Schedule, SplitError> {
    check_witness(transactions, witness)?;
    let order = split_interleaving(transactions, witness);
    Ok(build_rlc_schedule(transactions.to_vec(), order)?)
}
