//! JSON reports. Field names are stable; new fields are only ever appended.
//! Every collection is ordered, so equal inputs serialize to equal bytes.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::model::{potentially_conflicting, Granularity, Transaction, Workload};
use crate::schedule::{
    dependency_edges, is_conflict_serializable, is_rc_allowed, OpRef, OracleVerdict, Schedule, Version,
};
use crate::template_robust::{TemplateCounterexample, TemplateVerdict};
use crate::tools::{AnalysisSetting, PromotionSet, UpdateMode};
use crate::tx_robust::TxVerdict;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SettingReport {
    pub granularity: &'static str,
    pub updates: &'static str,
}

impl From<AnalysisSetting> for SettingReport {
    fn from(s: AnalysisSetting) -> Self {
        SettingReport {
            granularity: match s.granularity {
                Granularity::Attribute => "attribute",
                Granularity::Tuple => "tuple",
            },
            updates: match s.updates {
                UpdateMode::Atomic => "atomic",
                UpdateMode::Split => "split",
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timings {
    pub analysis_ms: f64,
}

/// `(transaction id, operation index)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OpPosition {
    pub tx: String,
    pub op: usize,
}

fn position(transactions: &[Transaction], r: OpRef) -> OpPosition {
    OpPosition { tx: transactions[r.tx].id().to_string(), op: r.pos }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SplitReport {
    pub template: String,
    pub split_op: usize,
    pub closing_op: usize,
    pub tuple_index: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChainLink {
    pub from_template: String,
    pub from_occurrence: usize,
    pub from_op: usize,
    pub to_template: String,
    pub to_occurrence: usize,
    pub to_op: usize,
    pub conflicts: Vec<&'static str>,
    pub tuple_index: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WitnessReport {
    pub split: SplitReport,
    pub chain: Vec<ChainLink>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TransactionReport {
    pub id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub template: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assignment: Option<BTreeMap<String, String>>,
    pub operations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScheduledOp {
    pub tx: String,
    pub op: usize,
    pub operation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VersionSource {
    pub read: OpPosition,
    pub tuple: String,
    /// `None` when the read observes the initial version.
    pub writer: Option<OpPosition>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CounterexampleReport {
    pub transactions: Vec<TransactionReport>,
    pub interleaving: Vec<ScheduledOp>,
    pub version_sources: Vec<VersionSource>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verification {
    pub rc_allowed: bool,
    pub serializable: bool,
    pub cycle: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub report_version: u32,
    pub command: &'static str,
    pub setting: SettingReport,
    pub templates: Vec<String>,
    pub verdict: &'static str,
    pub witness: Option<WitnessReport>,
    pub counterexample: Option<CounterexampleReport>,
    pub verification: Option<Verification>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

fn verdict_name(robust: bool) -> &'static str {
    if robust {
        "robust"
    } else {
        "not_robust"
    }
}

fn interleaving(schedule: &Schedule) -> Vec<ScheduledOp> {
    schedule
        .order()
        .iter()
        .map(|&r| ScheduledOp {
            tx: schedule.tx_id(r.tx).to_string(),
            op: r.pos,
            operation: schedule.op(r).to_string(),
        })
        .collect()
}

fn version_sources(schedule: &Schedule) -> Vec<VersionSource> {
    let txs = schedule.transactions();
    schedule
        .order()
        .iter()
        .filter_map(|&r| {
            let version = schedule.version_of(r)?;
            let tuple = schedule.op(r).target.as_ref()?.to_string();
            let writer = match version {
                Version::Initial => None,
                Version::Written(w) => Some(position(txs, w)),
            };
            Some(VersionSource { read: position(txs, r), tuple, writer })
        })
        .collect()
}

/// Re-runs both checks on a schedule.
pub fn verify(schedule: &Schedule) -> Verification {
    let ids = |c: Vec<usize>| c.into_iter().map(|t| schedule.tx_id(t).to_string()).collect();
    let ser = is_conflict_serializable(schedule);
    Verification { rc_allowed: is_rc_allowed(schedule).is_ok(), serializable: ser.cycle.is_none(), cycle: ser.cycle.map(ids) }
}

fn witness(workload: &Workload, cx: &TemplateCounterexample) -> WitnessReport {
    let chain = &cx.chain;
    let tau = |occ: usize| &workload.templates[chain.occurrences[occ]];
    WitnessReport {
        split: SplitReport {
            template: tau(0).name().to_string(),
            split_op: chain.split.o1,
            closing_op: chain.split.p1,
            tuple_index: chain.split.h,
        },
        chain: chain
            .quadruples
            .iter()
            .map(|q| ChainLink {
                from_template: tau(q.from).name().to_string(),
                from_occurrence: q.from,
                from_op: q.o,
                to_template: tau(q.to).name().to_string(),
                to_occurrence: q.to,
                to_op: q.p,
                conflicts: potentially_conflicting(tau(q.from).op(q.o), tau(q.to).op(q.p)).iter().map(|k| k.as_str()).collect(),
                tuple_index: q.tuple_index,
            })
            .collect(),
    }
}

fn counterexample(workload: &Workload, cx: &TemplateCounterexample) -> CounterexampleReport {
    let transactions = cx
        .transactions
        .iter()
        .zip(&cx.chain.occurrences)
        .zip(&cx.assignments)
        .map(|((t, &occ), mu)| TransactionReport {
            id: t.id().to_string(),
            template: Some(workload.templates[occ].name().to_string()),
            assignment: Some(mu.iter().map(|(v, tuple)| (v.to_string(), tuple.to_string())).collect()),
            operations: t.ops().iter().map(|o| o.to_string()).collect(),
        })
        .collect();
    CounterexampleReport {
        transactions,
        interleaving: interleaving(&cx.schedule),
        version_sources: version_sources(&cx.schedule),
    }
}

/// `workload` must be the analyzed workload, after the setting was applied.
pub fn check_report(workload: &Workload, setting: AnalysisSetting, verdict: &TemplateVerdict) -> CheckReport {
    let (witness, counterexample, verification) = match verdict {
        TemplateVerdict::Robust => (None, None, None),
        TemplateVerdict::NotRobust(cx) => {
            (Some(witness(workload, cx)), Some(counterexample(workload, cx)), Some(verify(&cx.schedule)))
        }
    };
    CheckReport {
        report_version: REPORT_VERSION,
        command: "check",
        setting: setting.into(),
        templates: workload.template_names(),
        verdict: verdict_name(verdict.is_robust()),
        witness,
        counterexample,
        verification,
        timings: None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DependencyReport {
    pub from: OpPosition,
    pub to: OpPosition,
    pub kind: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleReport {
    pub report_version: u32,
    pub command: &'static str,
    pub rc_allowed: bool,
    pub rc_violation: Option<String>,
    pub serializable: bool,
    pub cycle: Option<Vec<String>>,
    pub dependencies: Vec<DependencyReport>,
    pub version_sources: Vec<VersionSource>,
}

pub fn schedule_report(schedule: &Schedule) -> ScheduleReport {
    let txs = schedule.transactions();
    let v = verify(schedule);
    ScheduleReport {
        report_version: REPORT_VERSION,
        command: "check-schedule",
        rc_allowed: v.rc_allowed,
        rc_violation: is_rc_allowed(schedule).err().map(|e| e.to_string()),
        serializable: v.serializable,
        cycle: v.cycle,
        dependencies: dependency_edges(schedule)
            .into_iter()
            .map(|e| DependencyReport { from: position(txs, e.from), to: position(txs, e.to), kind: e.kind.as_str() })
            .collect(),
        version_sources: version_sources(schedule),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetsReport {
    pub report_version: u32,
    pub command: &'static str,
    pub setting: SettingReport,
    pub templates: Vec<String>,
    pub maximal_robust_subsets: Vec<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

pub fn subsets_report(workload: &Workload, setting: AnalysisSetting, subsets: Vec<Vec<String>>) -> SubsetsReport {
    SubsetsReport {
        report_version: REPORT_VERSION,
        command: "subsets",
        setting: setting.into(),
        templates: workload.template_names(),
        maximal_robust_subsets: subsets,
        timings: None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromotedOp {
    pub template: String,
    pub op: usize,
    pub relation: String,
    pub read_set: Vec<String>,
    pub write_set: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PromotionReport {
    pub operations: Vec<PromotedOp>,
    pub workload: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PromoteReport {
    pub report_version: u32,
    pub command: &'static str,
    pub setting: SettingReport,
    pub mode: &'static str,
    pub promotions: Vec<PromotionReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

/// `promoted[i]` is the workload obtained by applying `sets[i]`.
pub fn promote_report(
    setting: AnalysisSetting,
    mode: &'static str,
    sets: &[PromotionSet],
    promoted: &[Workload],
) -> PromoteReport {
    let promotions = sets
        .iter()
        .zip(promoted)
        .map(|(set, w)| PromotionReport {
            operations: set
                .members
                .iter()
                .map(|(t, i)| {
                    let op = w.template(t).expect("promoted template exists").op(*i);
                    PromotedOp {
                        template: t.clone(),
                        op: *i,
                        relation: op.relation().unwrap_or_default().to_string(),
                        read_set: op.read_set.iter().map(str::to_string).collect(),
                        write_set: op.write_set.iter().map(str::to_string).collect(),
                    }
                })
                .collect(),
            workload: crate::io::print_workload(w),
        })
        .collect();
    PromoteReport { report_version: REPORT_VERSION, command: "promote", setting: setting.into(), mode, promotions, timings: None }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub report_version: u32,
    pub command: &'static str,
    pub transactions: Vec<TransactionReport>,
    pub verdict: &'static str,
    pub schedules_explored: u64,
    pub counterexample: Option<Vec<ScheduledOp>>,
    pub cycle: Option<Vec<String>>,
    pub algorithm_verdict: &'static str,
    pub agree: bool,
}

pub fn oracle_report(transactions: &[Transaction], oracle: &OracleVerdict, algorithm: &TxVerdict) -> OracleReport {
    let (schedules, counterexample, cycle) = match oracle {
        OracleVerdict::Robust { schedules } => (*schedules, None, None),
        OracleVerdict::NotRobust { schedule, cycle, schedules } => (
            *schedules,
            Some(interleaving(schedule)),
            Some(cycle.iter().map(|&t| schedule.tx_id(t).to_string()).collect()),
        ),
    };
    OracleReport {
        report_version: REPORT_VERSION,
        command: "oracle",
        transactions: transactions
            .iter()
            .map(|t| TransactionReport {
                id: t.id().to_string(),
                template: None,
                assignment: None,
                operations: t.ops().iter().map(|o| o.to_string()).collect(),
            })
            .collect(),
        verdict: verdict_name(oracle.is_robust()),
        schedules_explored: schedules,
        counterexample,
        cycle,
        algorithm_verdict: verdict_name(algorithm.is_robust()),
        agree: oracle.is_robust() == algorithm.is_robust(),
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(report: &T) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
    s.push('\n');
    s
}
