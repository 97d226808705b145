//! Analysis settings, maximal robust subsets and read promotion.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rayon::prelude::*;
use thiserror::Error;

use crate::model::{coarsen_to_tuple_level, split_updates, AttrSet, Granularity, OpKind, Operation, Workload};
use crate::template_robust::robust_verdict;

pub const MAX_SUBSET_TEMPLATES: usize = 20;
pub const MAX_PROMOTION_CANDIDATES: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UpdateMode {
    Atomic,
    Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AnalysisSetting {
    pub granularity: Granularity,
    pub updates: UpdateMode,
}

impl AnalysisSetting {
    /// Updates as a read followed by a write, tuple-level conflicts.
    pub const ONLY_READS_AND_WRITES: AnalysisSetting =
        AnalysisSetting { granularity: Granularity::Tuple, updates: UpdateMode::Split };
    pub const ATOMIC_UPDATES: AnalysisSetting =
        AnalysisSetting { granularity: Granularity::Tuple, updates: UpdateMode::Atomic };
    pub const ATTRIBUTE_CONFLICTS: AnalysisSetting =
        AnalysisSetting { granularity: Granularity::Attribute, updates: UpdateMode::Atomic };

    pub fn new(granularity: Granularity, updates: UpdateMode) -> Self {
        AnalysisSetting { granularity, updates }
    }
}

impl Default for AnalysisSetting {
    fn default() -> Self {
        AnalysisSetting::ATTRIBUTE_CONFLICTS
    }
}

impl fmt::Display for AnalysisSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let g = match self.granularity {
            Granularity::Attribute => "attribute",
            Granularity::Tuple => "tuple",
        };
        let u = match self.updates {
            UpdateMode::Atomic => "atomic",
            UpdateMode::Split => "split",
        };
        write!(f, "{g}/{u}")
    }
}

/// Splits updates first (if requested), then coarsens (if requested).
pub fn apply_setting(workload: &Workload, setting: AnalysisSetting) -> Workload {
    let w = match setting.updates {
        UpdateMode::Split => split_updates(workload),
        UpdateMode::Atomic => workload.clone(),
    };
    match setting.granularity {
        Granularity::Tuple => coarsen_to_tuple_level(&w),
        Granularity::Attribute => w,
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ToolError {
    #[error("{count} templates exceed the subset search limit of {max}")]
    TooManyTemplates { count: usize, max: usize },
    #[error("{count} promotion candidates exceed the search limit of {max}")]
    TooManyCandidates { count: usize, max: usize },
    #[error("template {template} has no operation {index}")]
    UnknownOperation { template: String, index: usize },
    #[error("operation {index} of {template} is not a read operation")]
    NotARead { template: String, index: usize },
    #[error("promoting every read operation does not make the workload robust")]
    NoPromotionSuffices,
}

fn subset_workload(workload: &Workload, mask: u32) -> Workload {
    Workload {
        schema: workload.schema.clone(),
        templates: workload
            .templates
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, t)| t.clone())
            .collect(),
    }
}

fn mask_indices(mask: u32, n: usize) -> Vec<usize> {
    (0..n).filter(|i| mask & (1 << i) != 0).collect()
}

/// All `k`-element subsets of `0..n` as bitmasks, ordered by index vector.
fn combinations(n: usize, k: usize) -> Vec<u32> {
    fn go(start: usize, n: usize, k: usize, acc: u32, out: &mut Vec<u32>) {
        if k == 0 {
            out.push(acc);
            return;
        }
        for i in start..=n - k {
            go(i + 1, n, k - 1, acc | (1 << i), out);
        }
    }
    let mut out = Vec::new();
    if k <= n {
        go(0, n, k, 0, &mut out);
    }
    out
}

/// The ⊆-maximal robust subsets, largest first, each listed in workload
/// order. Ties are broken by the index vectors of the members.
pub fn maximal_robust_subsets(workload: &Workload, setting: AnalysisSetting) -> Result<Vec<Vec<String>>, ToolError> {
    let n = workload.templates.len();
    if n > MAX_SUBSET_TEMPLATES {
        return Err(ToolError::TooManyTemplates { count: n, max: MAX_SUBSET_TEMPLATES });
    }
    let prepared = apply_setting(workload, setting);
    let check = |mask: u32| robust_verdict(&subset_workload(&prepared, mask));

    // Small non-robust sets rule out every superset.
    let mut memo: HashMap<u32, bool> = HashMap::new();
    for k in 1..=n.min(2) {
        let masks = combinations(n, k);
        let verdicts: Vec<bool> = masks.par_iter().map(|&m| check(m)).collect();
        memo.extend(masks.into_iter().zip(verdicts));
    }
    let non_robust: Vec<u32> = memo.iter().filter(|(_, &r)| !r).map(|(&m, _)| m).collect();

    let mut maximal: Vec<u32> = Vec::new();
    for k in (0..=n).rev() {
        let candidates: Vec<u32> = combinations(n, k)
            .into_iter()
            .filter(|&m| !maximal.iter().any(|&r| m & r == m))
            .filter(|&m| non_robust.iter().all(|&bad| bad & !m != 0))
            .collect();
        let verdicts: Vec<bool> = candidates
            .par_iter()
            .map(|&m| memo.get(&m).copied().unwrap_or_else(|| check(m)))
            .collect();
        maximal.extend(candidates.into_iter().zip(verdicts).filter(|(_, r)| *r).map(|(m, _)| m));
    }
    let names = workload.template_names();
    Ok(maximal.into_iter().map(|m| mask_indices(m, n).into_iter().map(|i| names[i].clone()).collect()).collect())
}

/// Read operations selected for promotion, by template name and position.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PromotionSet {
    pub members: BTreeSet<(String, usize)>,
}

impl PromotionSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, template: &str, index: usize) -> bool {
        self.members.contains(&(template.to_string(), index))
    }
}

impl<S: Into<String>> FromIterator<(S, usize)> for PromotionSet {
    fn from_iter<I: IntoIterator<Item = (S, usize)>>(iter: I) -> Self {
        PromotionSet { members: iter.into_iter().map(|(t, i)| (t.into(), i)).collect() }
    }
}

impl fmt::Display for PromotionSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self.members.iter().map(|(t, i)| format!("{t}[{i}]")).collect();
        write!(f, "{{{}}}", items.join(", "))
    }
}

/// Every R-operation of the workload, in template then program order.
pub fn promotion_candidates(workload: &Workload) -> Vec<(String, usize)> {
    workload
        .templates
        .iter()
        .flat_map(|t| {
            t.ops()
                .iter()
                .enumerate()
                .filter(|(_, op)| op.kind == OpKind::Read)
                .map(move |(i, _)| (t.name().to_string(), i))
        })
        .collect()
}

fn narrow(own: &AttrSet, written: &AttrSet) -> AttrSet {
    let narrowed = own.intersection(written);
    if narrowed.is_empty() {
        own.clone()
    } else {
        narrowed
    }
}

fn update_writes(workload: &Workload, relation: &str) -> AttrSet {
    workload
        .templates
        .iter()
        .flat_map(|t| t.ops())
        .filter(|op| op.kind == OpKind::Update && op.relation() == Some(relation))
        .fold(AttrSet::new(), |acc, op| acc.union(&op.write_set))
}

/// Write set of a single promoted read: the non-key read attributes that
/// some update of the workload writes on the same relation, or all non-key
/// read attributes when no update writes any of them.
pub fn promoted_write_set(workload: &Workload, relation: &str, read_set: &AttrSet) -> AttrSet {
    let keys = workload.schema.relation(relation).map(|r| r.key_set()).unwrap_or_default();
    narrow(&read_set.difference(&keys), &update_writes(workload, relation))
}

/// Turns each selected R-operation into a U-operation writing back part of
/// what it reads. Write sets follow [`promoted_write_set`], where the writes
/// of the other promoted operations also count; they are recomputed until
/// they no longer change.
pub fn promote(workload: &Workload, selection: &PromotionSet) -> Result<Workload, ToolError> {
    struct Pick {
        template: usize,
        index: usize,
        relation: String,
        own: AttrSet,
    }
    let mut picks = Vec::with_capacity(selection.len());
    for (name, index) in &selection.members {
        let unknown = || ToolError::UnknownOperation { template: name.clone(), index: *index };
        let template = workload.templates.iter().position(|t| t.name() == name).ok_or_else(unknown)?;
        let op = workload.templates[template].body().get(*index).ok_or_else(unknown)?;
        if op.kind != OpKind::Read {
            return Err(ToolError::NotARead { template: name.clone(), index: *index });
        }
        let relation = op.relation().expect("read has a target").to_string();
        let keys = workload.schema.relation(&relation).map(|r| r.key_set()).unwrap_or_default();
        picks.push(Pick { template, index: *index, own: op.read_set.difference(&keys), relation });
    }
    let base: BTreeMap<&str, AttrSet> =
        picks.iter().map(|p| (p.relation.as_str(), update_writes(workload, &p.relation))).collect();
    let mut ws: Vec<AttrSet> = picks.iter().map(|p| narrow(&p.own, &base[p.relation.as_str()])).collect();
    for _ in 0..=picks.len() {
        let next: Vec<AttrSet> = picks
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let written = picks
                    .iter()
                    .zip(&ws)
                    .enumerate()
                    .filter(|(j, (q, _))| *j != i && q.relation == p.relation)
                    .fold(base[p.relation.as_str()].clone(), |acc, (_, (_, w))| acc.union(w));
                narrow(&p.own, &written)
            })
            .collect();
        if next == ws {
            break;
        }
        ws = next;
    }
    let mut bodies: Vec<Vec<_>> = workload.templates.iter().map(|t| t.body().to_vec()).collect();
    for (p, w) in picks.iter().zip(ws) {
        let op = &mut bodies[p.template][p.index];
        *op = Operation::update(op.target.clone().expect("read has a target"), op.read_set.clone(), w);
    }
    let mut out = workload.clone();
    for (slot, body) in out.templates.iter_mut().zip(bodies) {
        *slot = crate::model::Template::new(slot.name(), body).expect("shape preserved");
    }
    Ok(out)
}

/// All minimum-size promotion sets that make the workload robust under the
/// setting; the empty set if it already is.
pub fn minimal_promotions(workload: &Workload, setting: AnalysisSetting) -> Result<Vec<PromotionSet>, ToolError> {
    let candidates = promotion_candidates(workload);
    let n = candidates.len();
    if n > MAX_PROMOTION_CANDIDATES {
        return Err(ToolError::TooManyCandidates { count: n, max: MAX_PROMOTION_CANDIDATES });
    }
    let selection = |mask: u32| -> PromotionSet {
        mask_indices(mask, n).into_iter().map(|i| candidates[i].clone()).collect()
    };
    let robust_with = |mask: u32| -> bool {
        let promoted = promote(workload, &selection(mask)).expect("candidates are reads");
        robust_verdict(&apply_setting(&promoted, setting))
    };
    if robust_with(0) {
        return Ok(vec![PromotionSet::default()]);
    }
    let all = if n == 0 { 0 } else { u32::MAX >> (32 - n) };
    if !robust_with(all) {
        return Err(ToolError::NoPromotionSuffices);
    }
    for k in 1..=n {
        let masks = combinations(n, k);
        let hits: Vec<u32> = masks.into_par_iter().filter(|&m| robust_with(m)).collect();
        if !hits.is_empty() {
            return Ok(hits.into_iter().map(selection).collect());
        }
    }
    unreachable!("the full promotion is robust")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combinations_are_ordered_by_index_vector() {
        let c: Vec<Vec<usize>> = combinations(4, 2).into_iter().map(|m| mask_indices(m, 4)).collect();
        assert_eq!(c, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(combinations(3, 0), vec![0]);
        assert!(combinations(2, 3).is_empty());
    }
}
