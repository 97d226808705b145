//! Multiversion schedules: construction under read-last-committed, RC
//! legality, dependencies, conflict graphs and conflict serializability,
//! plus an exhaustive RC schedule enumerator used as a robustness oracle.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::graph::Digraph;
use crate::model::{ops_conflict, ConflictKind, ConflictKinds, Transaction, TupleId};

/// Default cap on non-commit operations for the enumerator.
pub const DEFAULT_MAX_OPS: usize = 16;

/// Position of an operation: transaction index within the schedule and
/// position within that transaction (the commit is the last position).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OpRef {
    pub tx: usize,
    pub pos: usize,
}

impl OpRef {
    pub fn new(tx: usize, pos: usize) -> Self {
        OpRef { tx, pos }
    }
}

/// Source of an observed version: the initial operation op0 or a write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Version {
    Initial,
    Written(OpRef),
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("duplicate transaction id {0}")]
    DuplicateTransaction(String),
    #[error("interleaving is not a permutation of the transactions' operations")]
    NotAPermutation,
    #[error("interleaving violates the program order of transaction {0}")]
    ProgramOrder(String),
    #[error("version order for tuple {0} is not a permutation of its writes")]
    BadVersionOrder(TupleId),
    #[error("version function is undefined for read {0:?}")]
    MissingVersion(OpRef),
    #[error("version function assigned to non-read {0:?}")]
    VersionOnNonRead(OpRef),
    #[error("read {read:?} observes {observed:?}, which is not an earlier write on the same tuple")]
    BadVersionSource { read: OpRef, observed: OpRef },
}

/// Data shared by every schedule over the same transaction set: tuple
/// interning and the pairwise conflict table.
#[derive(Debug)]
struct Universe {
    transactions: Vec<Transaction>,
    offsets: Vec<usize>,
    tuples: Vec<TupleId>,
    tuple_of: Vec<Option<usize>>,
    /// Directed kinds per (flat op, flat op); empty within one transaction.
    conflicts: Vec<ConflictKinds>,
    total: usize,
}

impl Universe {
    fn new(transactions: Vec<Transaction>) -> Result<Self, ScheduleError> {
        let mut seen = std::collections::BTreeSet::new();
        for t in &transactions {
            if !seen.insert(t.id()) {
                return Err(ScheduleError::DuplicateTransaction(t.id().to_string()));
            }
        }
        let mut offsets = Vec::with_capacity(transactions.len());
        let mut total = 0;
        for t in &transactions {
            offsets.push(total);
            total += t.len();
        }
        let mut index: BTreeMap<&TupleId, usize> = BTreeMap::new();
        let mut tuples = Vec::new();
        let mut tuple_of = Vec::with_capacity(total);
        for t in &transactions {
            for op in t.ops() {
                tuple_of.push(op.target.as_ref().map(|tid| {
                    *index.entry(tid).or_insert_with(|| {
                        tuples.push(tid.clone());
                        tuples.len() - 1
                    })
                }));
            }
        }
        let mut conflicts = vec![ConflictKinds::NONE; total * total];
        for (i, ti) in transactions.iter().enumerate() {
            for (j, tj) in transactions.iter().enumerate() {
                if i == j {
                    continue;
                }
                for (p, a) in ti.ops().iter().enumerate() {
                    for (q, b) in tj.ops().iter().enumerate() {
                        conflicts[(offsets[i] + p) * total + offsets[j] + q] = ops_conflict(a, b);
                    }
                }
            }
        }
        Ok(Universe { transactions, offsets, tuples, tuple_of, conflicts, total })
    }

    fn flat(&self, r: OpRef) -> usize {
        self.offsets[r.tx] + r.pos
    }

    fn kinds(&self, b: OpRef, a: OpRef) -> ConflictKinds {
        self.conflicts[self.flat(b) * self.total + self.flat(a)]
    }

    fn tuple(&self, r: OpRef) -> Option<usize> {
        self.tuple_of[self.flat(r)]
    }

    fn is_read(&self, r: OpRef) -> bool {
        self.transactions[r.tx].op(r.pos).kind.is_read()
    }

    fn is_write(&self, r: OpRef) -> bool {
        self.transactions[r.tx].op(r.pos).kind.is_write()
    }

    fn all_ops(&self) -> impl Iterator<Item = OpRef> + '_ {
        self.transactions.iter().enumerate().flat_map(|(tx, t)| (0..t.len()).map(move |pos| OpRef { tx, pos }))
    }
}

/// A multiversion schedule `(O, <=, <<, v)`. The initial operation op0 is
/// implicit: it precedes everything and is first in every version order.
#[derive(Debug, Clone)]
pub struct Schedule {
    universe: Arc<Universe>,
    order: Vec<OpRef>,
    /// Index in `order` per flat operation.
    position: Vec<usize>,
    /// Per interned tuple: its writes in version order (op0 omitted).
    version_order: Vec<Vec<OpRef>>,
    /// Per flat operation: the observed version, for read operations only.
    version_fn: Vec<Option<Version>>,
}

impl Schedule {
    /// Assembles a schedule from explicit components and checks its invariants.
    pub fn new(
        transactions: Vec<Transaction>,
        order: Vec<OpRef>,
        version_order: BTreeMap<TupleId, Vec<OpRef>>,
        version_fn: BTreeMap<OpRef, Version>,
    ) -> Result<Schedule, ScheduleError> {
        let universe = Arc::new(Universe::new(transactions)?);
        let position = positions(&universe, &order)?;
        let mut vo = vec![Vec::new(); universe.tuples.len()];
        for (t, slot) in universe.tuples.iter().zip(vo.iter_mut()) {
            let mut writes: Vec<OpRef> = universe
                .all_ops()
                .filter(|r| universe.is_write(*r) && universe.tuple(*r).map(|i| &universe.tuples[i]) == Some(t))
                .collect();
            let mut given = version_order.get(t).cloned().unwrap_or_default();
            *slot = given.clone();
            writes.sort();
            given.sort();
            if writes != given {
                return Err(ScheduleError::BadVersionOrder(t.clone()));
            }
        }
        if let Some(t) = version_order.keys().find(|t| !universe.tuples.contains(t)) {
            if !version_order[t].is_empty() {
                return Err(ScheduleError::BadVersionOrder(t.clone()));
            }
        }
        let mut vf = vec![None; universe.total];
        for r in universe.all_ops() {
            let given = version_fn.get(&r).copied();
            match (universe.is_read(r), given) {
                (true, None) => return Err(ScheduleError::MissingVersion(r)),
                (false, Some(_)) => return Err(ScheduleError::VersionOnNonRead(r)),
                (true, Some(Version::Written(src))) => {
                    let ok = src.tx < universe.transactions.len()
                        && src.pos < universe.transactions[src.tx].len()
                        && src != r
                        && universe.is_write(src)
                        && universe.tuple(src) == universe.tuple(r)
                        && position[universe.flat(src)] < position[universe.flat(r)];
                    if !ok {
                        return Err(ScheduleError::BadVersionSource { read: r, observed: src });
                    }
                }
                _ => {}
            }
            vf[universe.flat(r)] = given;
        }
        Ok(Schedule { universe, order, position, version_order: vo, version_fn: vf })
    }

    pub fn transactions(&self) -> &[Transaction] {
        &self.universe.transactions
    }

    /// The total order, op0 excluded.
    pub fn order(&self) -> &[OpRef] {
        &self.order
    }

    pub fn op(&self, r: OpRef) -> &crate::model::TupleOp {
        self.universe.transactions[r.tx].op(r.pos)
    }

    pub fn tx_id(&self, tx: usize) -> &str {
        self.universe.transactions[tx].id()
    }

    /// Index of `r` in [`Schedule::order`].
    pub fn position(&self, r: OpRef) -> usize {
        self.position[self.universe.flat(r)]
    }

    pub fn commit_position(&self, tx: usize) -> usize {
        self.position(OpRef::new(tx, self.universe.transactions[tx].commit_pos()))
    }

    /// Writes on `tuple` in version order, op0 omitted.
    pub fn version_order(&self, tuple: &TupleId) -> &[OpRef] {
        self.universe
            .tuples
            .iter()
            .position(|t| t == tuple)
            .map(|i| self.version_order[i].as_slice())
            .unwrap_or(&[])
    }

    pub fn version_of(&self, read: OpRef) -> Option<Version> {
        self.version_fn[self.universe.flat(read)]
    }

    /// `x << y` in the version order of their tuple.
    pub fn version_before(&self, x: Version, y: Version) -> bool {
        match (x, y) {
            (Version::Initial, Version::Written(_)) => true,
            (_, Version::Initial) => false,
            (Version::Written(a), Version::Written(b)) => {
                let (Some(ta), Some(tb)) = (self.universe.tuple(a), self.universe.tuple(b)) else {
                    return false;
                };
                if ta != tb {
                    return false;
                }
                let vo = &self.version_order[ta];
                let ia = vo.iter().position(|r| *r == a);
                let ib = vo.iter().position(|r| *r == b);
                matches!((ia, ib), (Some(i), Some(j)) if i < j)
            }
        }
    }

    /// Directed conflict kinds of `b` against `a` (empty within a transaction).
    pub fn conflict_kinds(&self, b: OpRef, a: OpRef) -> ConflictKinds {
        self.universe.kinds(b, a)
    }

    /// Transaction indices in commit order.
    pub fn commit_order(&self) -> Vec<usize> {
        let mut txs: Vec<usize> = (0..self.universe.transactions.len()).collect();
        txs.sort_by_key(|&t| self.commit_position(t));
        txs
    }
}

fn positions(universe: &Universe, order: &[OpRef]) -> Result<Vec<usize>, ScheduleError> {
    if order.len() != universe.total {
        return Err(ScheduleError::NotAPermutation);
    }
    let mut position = vec![usize::MAX; universe.total];
    for (i, r) in order.iter().enumerate() {
        if r.tx >= universe.transactions.len() || r.pos >= universe.transactions[r.tx].len() {
            return Err(ScheduleError::NotAPermutation);
        }
        let f = universe.flat(*r);
        if position[f] != usize::MAX {
            return Err(ScheduleError::NotAPermutation);
        }
        position[f] = i;
    }
    for (tx, t) in universe.transactions.iter().enumerate() {
        for pos in 1..t.len() {
            if position[universe.flat(OpRef::new(tx, pos - 1))] > position[universe.flat(OpRef::new(tx, pos))] {
                return Err(ScheduleError::ProgramOrder(t.id().to_string()));
            }
        }
    }
    Ok(position)
}

/// Builds the unique read-last-committed schedule for an interleaving: the
/// version order follows commit order (program order inside a transaction)
/// and every read observes the latest version committed before it.
pub fn build_rlc_schedule(transactions: Vec<Transaction>, interleaving: Vec<OpRef>) -> Result<Schedule, ScheduleError> {
    let universe = Arc::new(Universe::new(transactions)?);
    build_rlc_in(universe, interleaving)
}

/// Same as [`build_rlc_schedule`], with the interleaving given as the
/// sequence of transaction indices that take their next operation.
pub fn build_rlc_from_sequence(transactions: Vec<Transaction>, sequence: &[usize]) -> Result<Schedule, ScheduleError> {
    let universe = Arc::new(Universe::new(transactions)?);
    let order = sequence_to_order(&universe.transactions, sequence)?;
    build_rlc_in(universe, order)
}

fn sequence_to_order(transactions: &[Transaction], sequence: &[usize]) -> Result<Vec<OpRef>, ScheduleError> {
    let mut next = vec![0usize; transactions.len()];
    let mut order = Vec::with_capacity(sequence.len());
    for &tx in sequence {
        if tx >= transactions.len() || next[tx] >= transactions[tx].len() {
            return Err(ScheduleError::NotAPermutation);
        }
        order.push(OpRef::new(tx, next[tx]));
        next[tx] += 1;
    }
    Ok(order)
}

fn build_rlc_in(universe: Arc<Universe>, order: Vec<OpRef>) -> Result<Schedule, ScheduleError> {
    let position = positions(&universe, &order)?;
    let commit_pos: Vec<usize> = universe
        .transactions
        .iter()
        .enumerate()
        .map(|(tx, t)| position[universe.flat(OpRef::new(tx, t.commit_pos()))])
        .collect();

    let mut version_order: Vec<Vec<OpRef>> = vec![Vec::new(); universe.tuples.len()];
    for r in universe.all_ops() {
        if universe.is_write(r) {
            if let Some(t) = universe.tuple(r) {
                version_order[t].push(r);
            }
        }
    }
    for vo in &mut version_order {
        vo.sort_by_key(|r| (commit_pos[r.tx], r.pos));
    }

    let mut version_fn = vec![None; universe.total];
    for r in universe.all_ops() {
        if !universe.is_read(r) {
            continue;
        }
        let at = position[universe.flat(r)];
        let t = universe.tuple(r).expect("read has a tuple");
        let latest = version_order[t].iter().rev().find(|w| w.tx != r.tx && commit_pos[w.tx] < at);
        version_fn[universe.flat(r)] = Some(latest.map_or(Version::Initial, |w| Version::Written(*w)));
    }
    Ok(Schedule { universe, order, position, version_order, version_fn })
}

/// Returns the first `(b, a)` with `b` and `a` ww-conflicting writes of
/// distinct transactions and `b < a < commit(b)`.
pub fn exhibits_dirty_write(schedule: &Schedule) -> Option<(OpRef, OpRef)> {
    for (ia, &a) in schedule.order.iter().enumerate() {
        for &b in &schedule.order[..ia] {
            if b.tx != a.tx
                && schedule.conflict_kinds(b, a).contains(ConflictKind::Ww)
                && ia < schedule.commit_position(b.tx)
            {
                return Some((b, a));
            }
        }
    }
    None
}

/// Why a schedule is not allowed under RC.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RcViolation {
    DirtyWrite { earlier: OpRef, later: OpRef },
    VersionOrderNotCommitOrder { tuple: TupleId, first: OpRef, second: OpRef },
    NotReadLastCommitted { read: OpRef, observed: Version },
}

impl fmt::Display for RcViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RcViolation::DirtyWrite { earlier, later } => write!(f, "dirty write: {later:?} overwrites uncommitted {earlier:?}"),
            RcViolation::VersionOrderNotCommitOrder { tuple, first, second } => {
                write!(f, "version order of {tuple} places {first:?} before {second:?} against commit order")
            }
            RcViolation::NotReadLastCommitted { read, observed } => {
                write!(f, "read {read:?} observes {observed:?}, not the last committed version")
            }
        }
    }
}

/// Allowed under RC iff read-last-committed (with version order = commit
/// order across transactions) and free of dirty writes.
pub fn is_rc_allowed(schedule: &Schedule) -> Result<(), RcViolation> {
    let u = &schedule.universe;
    for (ti, tuple) in u.tuples.iter().enumerate() {
        let vo = &schedule.version_order[ti];
        for (i, &x) in vo.iter().enumerate() {
            for &y in &vo[i + 1..] {
                if x.tx != y.tx && schedule.commit_position(y.tx) < schedule.commit_position(x.tx) {
                    return Err(RcViolation::VersionOrderNotCommitOrder { tuple: tuple.clone(), first: x, second: y });
                }
            }
        }
    }
    for &a in &schedule.order {
        let Some(observed) = schedule.version_of(a) else { continue };
        let at = schedule.position(a);
        if let Version::Written(w) = observed {
            if w.tx == a.tx || schedule.commit_position(w.tx) > at {
                return Err(RcViolation::NotReadLastCommitted { read: a, observed });
            }
        }
        let t = u.tuple(a).expect("read has a tuple");
        let newer = schedule.version_order[t]
            .iter()
            .any(|&c| c.tx != a.tx && schedule.commit_position(c.tx) < at && schedule.version_before(observed, Version::Written(c)));
        if newer {
            return Err(RcViolation::NotReadLastCommitted { read: a, observed });
        }
    }
    if let Some((earlier, later)) = exhibits_dirty_write(schedule) {
        return Err(RcViolation::DirtyWrite { earlier, later });
    }
    Ok(())
}

/// `b -> a`: `a` depends on `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DependencyEdge {
    pub from: OpRef,
    pub to: OpRef,
    pub kind: ConflictKind,
}

/// All ww-, wr- and rw-(anti)dependencies of the schedule, ordered by
/// (from, to, kind).
pub fn dependency_edges(schedule: &Schedule) -> Vec<DependencyEdge> {
    let u = &schedule.universe;
    let mut edges = Vec::new();
    for b in u.all_ops() {
        for a in u.all_ops() {
            if a.tx == b.tx {
                continue;
            }
            let kinds = u.kinds(b, a);
            if kinds.is_empty() {
                continue;
            }
            for kind in kinds.iter() {
                let holds = match kind {
                    ConflictKind::Ww => schedule.version_before(Version::Written(b), Version::Written(a)),
                    ConflictKind::Wr => {
                        let v = schedule.version_of(a).expect("wr target reads");
                        v == Version::Written(b) || schedule.version_before(Version::Written(b), v)
                    }
                    ConflictKind::Rw => {
                        let v = schedule.version_of(b).expect("rw source reads");
                        schedule.version_before(v, Version::Written(a))
                    }
                };
                if holds {
                    edges.push(DependencyEdge { from: b, to: a, kind });
                }
            }
        }
    }
    edges
}

/// Transaction-level conflict graph with its supporting dependencies.
#[derive(Debug, Clone)]
pub struct ConflictGraph {
    pub nodes: Vec<String>,
    pub edges: BTreeMap<(usize, usize), Vec<DependencyEdge>>,
}

impl ConflictGraph {
    pub fn digraph(&self) -> Digraph {
        let mut g = Digraph::with_nodes(self.nodes.len());
        for &(from, to) in self.edges.keys() {
            g.add_edge(from, to);
        }
        g
    }
}

pub fn conflict_graph(schedule: &Schedule) -> ConflictGraph {
    let mut edges: BTreeMap<(usize, usize), Vec<DependencyEdge>> = BTreeMap::new();
    for e in dependency_edges(schedule) {
        edges.entry((e.from.tx, e.to.tx)).or_default().push(e);
    }
    ConflictGraph { nodes: schedule.transactions().iter().map(|t| t.id().to_string()).collect(), edges }
}

/// Outcome of the serializability test; `cycle` holds transaction indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Serializability {
    pub cycle: Option<Vec<usize>>,
}

impl Serializability {
    pub fn is_serializable(&self) -> bool {
        self.cycle.is_none()
    }
}

/// Conflict serializable iff the conflict graph is acyclic.
pub fn is_conflict_serializable(schedule: &Schedule) -> Serializability {
    Serializability { cycle: conflict_graph(schedule).digraph().find_cycle() }
}

/// Cheaper acyclicity test for schedules built under read-last-committed;
/// only transaction-level edges are materialized.
fn rlc_cycle(schedule: &Schedule) -> Option<Vec<usize>> {
    let u = &schedule.universe;
    let n = u.transactions.len();
    let mut g = Digraph::with_nodes(n);
    for b in u.all_ops() {
        for a in u.all_ops() {
            if a.tx == b.tx || g.has_edge(b.tx, a.tx) {
                continue;
            }
            let kinds = u.kinds(b, a);
            if kinds.is_empty() {
                continue;
            }
            let holds = kinds.iter().any(|kind| match kind {
                ConflictKind::Ww => schedule.version_before(Version::Written(b), Version::Written(a)),
                ConflictKind::Wr => {
                    let v = schedule.version_of(a).expect("wr target reads");
                    v == Version::Written(b) || schedule.version_before(Version::Written(b), v)
                }
                ConflictKind::Rw => schedule.version_before(schedule.version_of(b).expect("rw source reads"), Version::Written(a)),
            });
            if holds {
                g.add_edge(b.tx, a.tx);
            }
        }
    }
    g.find_cycle()
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum EnumerationError {
    #[error("{ops} non-commit operations exceed the enumeration guard of {max}")]
    GuardExceeded { ops: usize, max: usize },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// Depth-first enumeration of every RC-allowed schedule over a transaction
/// set. Interleavings are produced in lexicographic order of the sequence of
/// chosen transaction indices; prefixes containing a dirty write are pruned.
pub struct RcSchedules {
    universe: Arc<Universe>,
    lens: Vec<usize>,
    next: Vec<usize>,
    seq: Vec<usize>,
    cand: Vec<usize>,
    done: bool,
}

impl RcSchedules {
    fn dirty_if_placed(&self, tx: usize) -> bool {
        let u = &self.universe;
        let here = OpRef::new(tx, self.next[tx]);
        if !u.is_write(here) {
            return false;
        }
        (0..self.lens.len()).any(|other| {
            other != tx
                && self.next[other] < self.lens[other]
                && (0..self.next[other]).any(|p| u.kinds(OpRef::new(other, p), here).contains(ConflictKind::Ww))
        })
    }
}

impl Iterator for RcSchedules {
    type Item = Schedule;

    fn next(&mut self) -> Option<Schedule> {
        let total = self.universe.total;
        while !self.done {
            let depth = self.seq.len();
            if depth == total {
                let order = sequence_to_order(&self.universe.transactions, &self.seq).expect("valid sequence");
                let schedule = build_rlc_in(Arc::clone(&self.universe), order).expect("valid interleaving");
                self.cand.pop();
                let tx = self.seq.pop().expect("non-empty");
                self.next[tx] -= 1;
                return Some(schedule);
            }
            let c = self.cand[depth];
            if c >= self.lens.len() {
                self.cand.pop();
                match self.seq.pop() {
                    Some(tx) => self.next[tx] -= 1,
                    None => self.done = true,
                }
                continue;
            }
            self.cand[depth] += 1;
            if self.next[c] < self.lens[c] && !self.dirty_if_placed(c) {
                self.seq.push(c);
                self.next[c] += 1;
                self.cand.push(0);
            }
        }
        None
    }
}

fn non_commit_ops(transactions: &[Transaction]) -> usize {
    transactions.iter().map(|t| t.body().len()).sum()
}

/// Enumerates RC-allowed schedules; fails if the transactions carry more than
/// `max_ops` non-commit operations.
pub fn enumerate_rc_schedules(transactions: Vec<Transaction>, max_ops: usize) -> Result<RcSchedules, EnumerationError> {
    let ops = non_commit_ops(&transactions);
    if ops > max_ops {
        return Err(EnumerationError::GuardExceeded { ops, max: max_ops });
    }
    let universe = Arc::new(Universe::new(transactions)?);
    let lens: Vec<usize> = universe.transactions.iter().map(Transaction::len).collect();
    let n = lens.len();
    Ok(RcSchedules { universe, lens, next: vec![0; n], seq: Vec::new(), cand: vec![0], done: false })
}

#[derive(Debug, Clone)]
pub enum OracleVerdict {
    Robust { schedules: u64 },
    NotRobust { schedule: Box<Schedule>, cycle: Vec<usize>, schedules: u64 },
}

impl OracleVerdict {
    pub fn is_robust(&self) -> bool {
        matches!(self, OracleVerdict::Robust { .. })
    }
}

/// Exhaustive robustness test: every RC-allowed schedule must be conflict
/// serializable. Returns the first counterexample in enumeration order.
pub fn robust_oracle(transactions: Vec<Transaction>, max_ops: usize) -> Result<OracleVerdict, EnumerationError> {
    let mut count = 0u64;
    for schedule in enumerate_rc_schedules(transactions, max_ops)? {
        count += 1;
        if let Some(cycle) = rlc_cycle(&schedule) {
            return Ok(OracleVerdict::NotRobust { schedule: Box::new(schedule), cycle, schedules: count });
        }
    }
    Ok(OracleVerdict::Robust { schedules: count })
}

/// Maps transaction ids to indices, for callers holding ids.
pub fn index_by_id(transactions: &[Transaction]) -> HashMap<&str, usize> {
    transactions.iter().enumerate().map(|(i, t)| (t.id(), i)).collect()
}
