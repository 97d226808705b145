//! Schedule text format: one operation per line in schedule order.
//! Diagnostic positions are 0-based.
//!
//! ```text
//! T1 R Checking.c1 reads=C,B
//! T2 U Checking.c1 reads=C,B writes=B
//! T2 commit
//! T1 commit
//! ```

use std::fmt::Write as _;

use crate::io::dsl::ParseError;
use crate::model::{AttrSet, OpKind, Operation, Transaction, TupleId, TupleOp};
use crate::schedule::{OpRef, Schedule};

/// Transactions in order of first appearance plus the stated interleaving.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedSchedule {
    pub transactions: Vec<Transaction>,
    pub interleaving: Vec<OpRef>,
}

fn err(line: usize, column: usize, message: impl Into<String>) -> ParseError {
    ParseError { line, column, message: message.into() }
}

fn attrs(value: &str) -> AttrSet {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

pub fn parse_schedule(text: &str) -> Result<ParsedSchedule, ParseError> {
    struct Pending {
        id: String,
        ops: Vec<TupleOp>,
        committed: bool,
    }
    let mut txs: Vec<Pending> = Vec::new();
    let mut interleaving = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln;
        let content = raw.split('#').next().unwrap_or("");
        let mut words = Vec::new();
        let mut offset = 0;
        for w in content.split_whitespace() {
            let at = content[offset..].find(w).expect("word in line") + offset;
            words.push((at, w));
            offset = at + w.len();
        }
        if words.is_empty() {
            continue;
        }
        let (_, id) = words[0];
        let tx = match txs.iter().position(|t| t.id == id) {
            Some(i) => i,
            None => {
                txs.push(Pending { id: id.to_string(), ops: Vec::new(), committed: false });
                txs.len() - 1
            }
        };
        if txs[tx].committed {
            return Err(err(line, words[0].0, format!("operation of {id} after its commit")));
        }
        let Some(&(kcol, kind)) = words.get(1) else {
            return Err(err(line, content.len(), "expected operation kind"));
        };
        let op = if kind == "commit" {
            if let Some(&(col, _)) = words.get(2) {
                return Err(err(line, col, "unexpected text after commit"));
            }
            txs[tx].committed = true;
            Operation::commit()
        } else {
            let kind = match kind {
                "R" => OpKind::Read,
                "W" => OpKind::Write,
                "U" => OpKind::Update,
                other => return Err(err(line, kcol, format!("unknown operation kind '{other}'"))),
            };
            let Some(&(tcol, target)) = words.get(2) else {
                return Err(err(line, content.len(), "expected <relation>.<label>"));
            };
            let Some((rel, label)) = target.split_once('.').filter(|(r, l)| !r.is_empty() && !l.is_empty()) else {
                return Err(err(line, tcol, format!("expected <relation>.<label>, found '{target}'")));
            };
            let mut read_set = AttrSet::new();
            let mut write_set = AttrSet::new();
            for &(col, word) in &words[3..] {
                match word.split_once('=') {
                    Some(("reads", v)) => read_set = attrs(v),
                    Some(("writes", v)) => write_set = attrs(v),
                    _ => return Err(err(line, col, format!("expected reads=... or writes=..., found '{word}'"))),
                }
            }
            let tuple = TupleId::new(rel, label);
            let op = match kind {
                OpKind::Read => Operation::read(tuple, read_set),
                OpKind::Write => Operation::write(tuple, write_set),
                _ => Operation::update(tuple, read_set, write_set),
            };
            if (kind == OpKind::Read && !op.write_set.is_empty()) || (kind == OpKind::Write && !op.read_set.is_empty()) {
                return Err(err(line, kcol, "read operations take only reads=, write operations only writes="));
            }
            op
        };
        interleaving.push(OpRef::new(tx, txs[tx].ops.len()));
        txs[tx].ops.push(op);
    }
    if let Some(t) = txs.iter().find(|t| !t.committed) {
        let last = text.lines().count().saturating_sub(1);
        return Err(err(last, 0, format!("transaction {} has no commit", t.id)));
    }
    let transactions = txs
        .into_iter()
        .map(|t| Transaction::from_ops(t.id, t.ops).map_err(|e| err(0, 0, e.to_string())))
        .collect::<Result<_, _>>()?;
    Ok(ParsedSchedule { transactions, interleaving })
}

fn op_line(out: &mut String, id: &str, op: &TupleOp) {
    match (&op.kind, &op.target) {
        (OpKind::Commit, _) | (_, None) => {
            let _ = writeln!(out, "{id} commit");
        }
        (kind, Some(t)) => {
            let _ = write!(out, "{id} {} {t}", kind.symbol());
            let join = |s: &AttrSet| s.iter().collect::<Vec<_>>().join(",");
            if kind.is_read() {
                let _ = write!(out, " reads={}", join(&op.read_set));
            }
            if kind.is_write() {
                let _ = write!(out, " writes={}", join(&op.write_set));
            }
            out.push('\n');
        }
    }
}

/// Renders a schedule's operations in order; [`parse_schedule`] reads it back.
pub fn print_schedule(schedule: &Schedule) -> String {
    let mut out = String::new();
    for r in schedule.order() {
        op_line(&mut out, schedule.tx_id(r.tx), schedule.op(*r));
    }
    out
}

/// Renders transactions and an interleaving without building a schedule.
pub fn print_interleaving(transactions: &[Transaction], interleaving: &[OpRef]) -> String {
    let mut out = String::new();
    for r in interleaving {
        op_line(&mut out, transactions[r.tx].id(), transactions[r.tx].op(r.pos));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::{build_rlc_schedule, is_conflict_serializable};

    #[test]
    fn serial_transcript_is_serializable_and_round_trips() {
        let text = "T1 W S.t writes=a\nT1 commit\nT2 R S.t reads=a\nT2 commit\n";
        let p = parse_schedule(text).unwrap();
        let s = build_rlc_schedule(p.transactions, p.interleaving).unwrap();
        assert!(is_conflict_serializable(&s).is_serializable());
        assert_eq!(print_schedule(&s), text);
    }

    #[test]
    fn operation_after_commit_is_rejected() {
        let e = parse_schedule("T1 commit\nT1 R S.t reads=a\n").unwrap_err();
        assert_eq!((e.line, e.column), (1, 0));
    }

    #[test]
    fn missing_commit_is_rejected() {
        let e = parse_schedule("T1 R S.t reads=a\n").unwrap_err();
        assert!(e.message.contains("no commit"));
    }

    #[test]
    fn malformed_target_is_rejected() {
        let e = parse_schedule("T1 R St reads=a\nT1 commit\n").unwrap_err();
        assert_eq!((e.line, e.column), (0, 5));
    }
}
