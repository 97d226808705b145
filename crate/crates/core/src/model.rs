//! Schemas, operations, transactions and transaction templates, plus the
//! attribute-level conflict predicates the analyses are built on.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

/// A set of attribute names.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AttrSet(BTreeSet<String>);

impl AttrSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, attr: &str) -> bool {
        self.0.contains(attr)
    }

    pub fn insert(&mut self, attr: impl Into<String>) -> bool {
        self.0.insert(attr.into())
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> + '_ {
        self.0.iter().map(String::as_str)
    }

    pub fn intersects(&self, other: &AttrSet) -> bool {
        // Both sides are sorted, so a merge walk avoids allocating.
        let mut a = self.0.iter();
        let mut b = other.0.iter();
        let (mut x, mut y) = (a.next(), b.next());
        while let (Some(l), Some(r)) = (x, y) {
            match l.cmp(r) {
                std::cmp::Ordering::Less => x = a.next(),
                std::cmp::Ordering::Greater => y = b.next(),
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }

    pub fn is_subset(&self, other: &AttrSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn union(&self, other: &AttrSet) -> AttrSet {
        AttrSet(self.0.union(&other.0).cloned().collect())
    }

    pub fn intersection(&self, other: &AttrSet) -> AttrSet {
        AttrSet(self.0.intersection(&other.0).cloned().collect())
    }

    pub fn difference(&self, other: &AttrSet) -> AttrSet {
        AttrSet(self.0.difference(&other.0).cloned().collect())
    }
}

impl<S: Into<String>> FromIterator<S> for AttrSet {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        AttrSet(iter.into_iter().map(Into::into).collect())
    }
}

impl fmt::Display for AttrSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, "}}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Attribute {
    pub name: String,
    pub is_key: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Relation {
    pub name: String,
    pub attributes: Vec<Attribute>,
}

impl Relation {
    /// Builds a relation from `(name, is_key)` pairs.
    pub fn new<S: Into<String>>(name: impl Into<String>, attrs: impl IntoIterator<Item = (S, bool)>) -> Self {
        Relation {
            name: name.into(),
            attributes: attrs
                .into_iter()
                .map(|(n, is_key)| Attribute { name: n.into(), is_key })
                .collect(),
        }
    }

    pub fn attribute_set(&self) -> AttrSet {
        self.attributes.iter().map(|a| a.name.clone()).collect()
    }

    pub fn key_set(&self) -> AttrSet {
        self.attributes.iter().filter(|a| a.is_key).map(|a| a.name.clone()).collect()
    }

    pub fn has_attribute(&self, name: &str) -> bool {
        self.attributes.iter().any(|a| a.name == name)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Schema {
    pub relations: Vec<Relation>,
}

impl Schema {
    pub fn new(relations: Vec<Relation>) -> Self {
        Schema { relations }
    }

    pub fn relation(&self, name: &str) -> Option<&Relation> {
        self.relations.iter().find(|r| r.name == name)
    }
}

/// An abstract tuple: a relation name plus a label unique within that relation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TupleId {
    pub relation: String,
    pub label: String,
}

impl TupleId {
    pub fn new(relation: impl Into<String>, label: impl Into<String>) -> Self {
        TupleId { relation: relation.into(), label: label.into() }
    }
}

impl fmt::Display for TupleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.relation, self.label)
    }
}

/// A typed template variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Variable {
    pub name: String,
    pub relation: String,
}

impl Variable {
    pub fn new(name: impl Into<String>, relation: impl Into<String>) -> Self {
        Variable { name: name.into(), relation: relation.into() }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.name, self.relation)
    }
}

/// Anything an operation can be applied to: a tuple or a variable.
pub trait Target: Clone + Eq + fmt::Display {
    fn relation(&self) -> &str;
}

impl Target for TupleId {
    fn relation(&self) -> &str {
        &self.relation
    }
}

impl Target for Variable {
    fn relation(&self) -> &str {
        &self.relation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OpKind {
    Read,
    Write,
    Update,
    Commit,
}

impl OpKind {
    /// R and U observe a version.
    pub fn is_read(self) -> bool {
        matches!(self, OpKind::Read | OpKind::Update)
    }

    /// W and U install a version.
    pub fn is_write(self) -> bool {
        matches!(self, OpKind::Write | OpKind::Update)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            OpKind::Read => "R",
            OpKind::Write => "W",
            OpKind::Update => "U",
            OpKind::Commit => "C",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConflictKind {
    Ww,
    Wr,
    Rw,
}

impl ConflictKind {
    pub const ALL: [ConflictKind; 3] = [ConflictKind::Ww, ConflictKind::Wr, ConflictKind::Rw];

    fn bit(self) -> u8 {
        match self {
            ConflictKind::Ww => 1,
            ConflictKind::Wr => 2,
            ConflictKind::Rw => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ConflictKind::Ww => "ww",
            ConflictKind::Wr => "wr",
            ConflictKind::Rw => "rw",
        }
    }
}

impl fmt::Display for ConflictKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A set of conflict kinds, directed from a first operation to a second.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ConflictKinds(u8);

impl ConflictKinds {
    pub const NONE: ConflictKinds = ConflictKinds(0);

    pub fn contains(self, kind: ConflictKind) -> bool {
        self.0 & kind.bit() != 0
    }

    pub fn insert(&mut self, kind: ConflictKind) {
        self.0 |= kind.bit();
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn any(self) -> bool {
        self.0 != 0
    }

    /// The kinds seen from the other operation's side: wr and rw swap.
    pub fn reversed(self) -> ConflictKinds {
        let mut out = ConflictKinds(self.0 & 1);
        if self.contains(ConflictKind::Wr) {
            out.insert(ConflictKind::Rw);
        }
        if self.contains(ConflictKind::Rw) {
            out.insert(ConflictKind::Wr);
        }
        out
    }

    pub fn iter(self) -> impl Iterator<Item = ConflictKind> {
        ConflictKind::ALL.into_iter().filter(move |k| self.contains(*k))
    }
}

impl FromIterator<ConflictKind> for ConflictKinds {
    fn from_iter<I: IntoIterator<Item = ConflictKind>>(iter: I) -> Self {
        let mut out = ConflictKinds::NONE;
        for k in iter {
            out.insert(k);
        }
        out
    }
}

/// A single operation over a tuple (in a transaction) or a variable (in a template).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Operation<T> {
    pub kind: OpKind,
    pub target: Option<T>,
    pub read_set: AttrSet,
    pub write_set: AttrSet,
}

pub type TupleOp = Operation<TupleId>;
pub type TemplateOp = Operation<Variable>;

impl<T: Target> Operation<T> {
    pub fn read(target: T, read_set: AttrSet) -> Self {
        Operation { kind: OpKind::Read, target: Some(target), read_set, write_set: AttrSet::new() }
    }

    pub fn write(target: T, write_set: AttrSet) -> Self {
        Operation { kind: OpKind::Write, target: Some(target), read_set: AttrSet::new(), write_set }
    }

    pub fn update(target: T, read_set: AttrSet, write_set: AttrSet) -> Self {
        Operation { kind: OpKind::Update, target: Some(target), read_set, write_set }
    }

    pub fn commit() -> Self {
        Operation { kind: OpKind::Commit, target: None, read_set: AttrSet::new(), write_set: AttrSet::new() }
    }

    pub fn is_commit(&self) -> bool {
        self.kind == OpKind::Commit
    }

    pub fn relation(&self) -> Option<&str> {
        self.target.as_ref().map(Target::relation)
    }

    /// Attribute-level conflict kinds of `self` against `other`, ignoring targets.
    pub fn attribute_conflicts(&self, other: &Self) -> ConflictKinds {
        let mut out = ConflictKinds::NONE;
        if self.is_commit() || other.is_commit() {
            return out;
        }
        if self.write_set.intersects(&other.write_set) {
            out.insert(ConflictKind::Ww);
        }
        if self.write_set.intersects(&other.read_set) {
            out.insert(ConflictKind::Wr);
        }
        if self.read_set.intersects(&other.write_set) {
            out.insert(ConflictKind::Rw);
        }
        out
    }

    /// Checks the per-kind shape rules (R has no writes, W no reads, C nothing).
    fn shape_error(&self) -> Option<&'static str> {
        match self.kind {
            OpKind::Read if !self.write_set.is_empty() => Some("read operation with non-empty write set"),
            OpKind::Write if !self.read_set.is_empty() => Some("write operation with non-empty read set"),
            OpKind::Commit if self.target.is_some() || !self.read_set.is_empty() || !self.write_set.is_empty() => {
                Some("commit carries a target or attributes")
            }
            OpKind::Read | OpKind::Write | OpKind::Update if self.target.is_none() => Some("operation without target"),
            _ => None,
        }
    }
}

impl<T: Target> fmt::Display for Operation<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.kind, &self.target) {
            (OpKind::Commit, _) | (_, None) => write!(f, "C"),
            (OpKind::Read, Some(t)) => write!(f, "R[{t}{}]", self.read_set),
            (OpKind::Write, Some(t)) => write!(f, "W[{t}{}]", self.write_set),
            (OpKind::Update, Some(t)) => write!(f, "U[{t}{}{}]", self.read_set, self.write_set),
        }
    }
}

/// Directed conflict kinds of `o1` against `o2`. Both must be operations of
/// two distinct transactions; the caller guarantees that.
pub fn ops_conflict(o1: &TupleOp, o2: &TupleOp) -> ConflictKinds {
    match (&o1.target, &o2.target) {
        (Some(t1), Some(t2)) if t1 == t2 => o1.attribute_conflicts(o2),
        _ => ConflictKinds::NONE,
    }
}

/// Template-level analogue of [`ops_conflict`]: same relation type suffices.
pub fn potentially_conflicting(o1: &TemplateOp, o2: &TemplateOp) -> ConflictKinds {
    match (&o1.target, &o2.target) {
        (Some(x), Some(y)) if x.relation == y.relation => o1.attribute_conflicts(o2),
        _ => ConflictKinds::NONE,
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("operation {index} of {owner}: {reason}")]
    MalformedOperation { owner: String, index: usize, reason: &'static str },
    #[error("{owner}: commit must appear exactly once, as the last operation")]
    MisplacedCommit { owner: String },
    #[error("variable {variable} of template {template} is not assigned")]
    MissingVariable { template: String, variable: String },
    #[error("variable {variable} of relation {expected} assigned tuple {tuple} of another relation")]
    TypeMismatch { variable: String, expected: String, tuple: TupleId },
}

fn check_sequence<T: Target>(owner: &str, ops: &[Operation<T>]) -> Result<(), ModelError> {
    let commits = ops.iter().filter(|o| o.is_commit()).count();
    if commits != 1 || !ops.last().is_some_and(|o| o.is_commit()) {
        return Err(ModelError::MisplacedCommit { owner: owner.to_string() });
    }
    for (index, op) in ops.iter().enumerate() {
        if let Some(reason) = op.shape_error() {
            return Err(ModelError::MalformedOperation { owner: owner.to_string(), index, reason });
        }
    }
    Ok(())
}

/// A concrete transaction: operations over tuples, ending in a single commit.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Transaction {
    id: String,
    ops: Vec<TupleOp>,
}

impl Transaction {
    /// Builds a transaction from its non-commit body; the commit is appended.
    pub fn new(id: impl Into<String>, body: Vec<TupleOp>) -> Result<Self, ModelError> {
        let mut ops = body;
        ops.push(Operation::commit());
        Self::from_ops(id, ops)
    }

    /// Builds a transaction from a full operation list that must end in a commit.
    pub fn from_ops(id: impl Into<String>, ops: Vec<TupleOp>) -> Result<Self, ModelError> {
        let id = id.into();
        check_sequence(&id, &ops)?;
        Ok(Transaction { id, ops })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// All operations, commit included.
    pub fn ops(&self) -> &[TupleOp] {
        &self.ops
    }

    pub fn op(&self, pos: usize) -> &TupleOp {
        &self.ops[pos]
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn commit_pos(&self) -> usize {
        self.ops.len() - 1
    }

    /// Operations without the trailing commit.
    pub fn body(&self) -> &[TupleOp] {
        &self.ops[..self.ops.len() - 1]
    }
}

impl fmt::Display for Transaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.id)?;
        for op in &self.ops {
            write!(f, " {op}")?;
        }
        Ok(())
    }
}

/// A transaction over typed variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Template {
    name: String,
    ops: Vec<TemplateOp>,
}

impl Template {
    /// Builds a template from its non-commit body; the commit is appended.
    pub fn new(name: impl Into<String>, body: Vec<TemplateOp>) -> Result<Self, ModelError> {
        let name = name.into();
        let mut ops = body;
        ops.push(Operation::commit());
        check_sequence(&name, &ops)?;
        Ok(Template { name, ops })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn ops(&self) -> &[TemplateOp] {
        &self.ops
    }

    pub fn op(&self, pos: usize) -> &TemplateOp {
        &self.ops[pos]
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn body(&self) -> &[TemplateOp] {
        &self.ops[..self.ops.len() - 1]
    }

    pub fn with_name(&self, name: impl Into<String>) -> Template {
        Template { name: name.into(), ops: self.ops.clone() }
    }

    /// Variable name of the operation at `pos`; `None` for the commit.
    pub fn var_of(&self, pos: usize) -> Option<&str> {
        self.ops[pos].target.as_ref().map(|v| v.name.as_str())
    }

    /// Distinct variables in order of first use.
    pub fn variables(&self) -> Vec<Variable> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for v in self.ops.iter().filter_map(|o| o.target.as_ref()) {
            if seen.insert(v.name.clone()) {
                out.push(v.clone());
            }
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Workload {
    pub schema: Schema,
    pub templates: Vec<Template>,
}

impl Workload {
    pub fn new(schema: Schema, templates: Vec<Template>) -> Self {
        Workload { schema, templates }
    }

    pub fn template(&self, name: &str) -> Option<&Template> {
        self.templates.iter().find(|t| t.name == name)
    }

    pub fn template_names(&self) -> Vec<String> {
        self.templates.iter().map(|t| t.name.clone()).collect()
    }

    /// The sub-workload keeping only the named templates, in workload order.
    pub fn restrict<S: AsRef<str>>(&self, names: &[S]) -> Workload {
        Workload {
            schema: self.schema.clone(),
            templates: self
                .templates
                .iter()
                .filter(|t| names.iter().any(|n| n.as_ref() == t.name))
                .cloned()
                .collect(),
        }
    }
}

/// Conflict granularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Granularity {
    Attribute,
    Tuple,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Rule {
    EmptyRelation,
    DuplicateRelation,
    DuplicateAttribute,
    DuplicateTemplate,
    UnknownRelation,
    UnknownAttribute,
    MalformedOperation,
    KeyInUpdateWriteSet,
    InconsistentVariableType,
}

impl Rule {
    pub fn description(self) -> &'static str {
        match self {
            Rule::EmptyRelation => "relation without attributes",
            Rule::DuplicateRelation => "duplicate relation name",
            Rule::DuplicateAttribute => "duplicate attribute name",
            Rule::DuplicateTemplate => "duplicate template name",
            Rule::UnknownRelation => "unknown relation",
            Rule::UnknownAttribute => "unknown attribute",
            Rule::MalformedOperation => "malformed operation",
            Rule::KeyInUpdateWriteSet => "key attribute in update write set",
            Rule::InconsistentVariableType => "inconsistent variable type",
        }
    }
}

/// One validation finding; positions are 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub rule: Rule,
    pub template: Option<String>,
    pub op_index: Option<usize>,
    pub detail: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.template, self.op_index) {
            (Some(t), Some(i)) => write!(f, "template {t}, operation {i}: ")?,
            (Some(t), None) => write!(f, "template {t}: ")?,
            _ => {}
        }
        write!(f, "{}", self.rule.description())?;
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

/// Validates a workload at attribute granularity.
pub fn validate_workload(workload: &Workload) -> Result<(), Vec<Diagnostic>> {
    validate_workload_at(workload, Granularity::Attribute)
}

/// Validates a workload; at tuple granularity update write sets may contain keys.
pub fn validate_workload_at(workload: &Workload, granularity: Granularity) -> Result<(), Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let mut push = |rule, template: Option<&str>, op_index, detail: String| {
        diags.push(Diagnostic { rule, template: template.map(str::to_string), op_index, detail })
    };

    let mut rel_names = BTreeSet::new();
    for rel in &workload.schema.relations {
        if !rel_names.insert(rel.name.as_str()) {
            push(Rule::DuplicateRelation, None, None, rel.name.clone());
        }
        if rel.attributes.is_empty() {
            push(Rule::EmptyRelation, None, None, rel.name.clone());
        }
        let mut attrs = BTreeSet::new();
        for a in &rel.attributes {
            if !attrs.insert(a.name.as_str()) {
                push(Rule::DuplicateAttribute, None, None, format!("{}.{}", rel.name, a.name));
            }
        }
    }

    let mut tmpl_names = BTreeSet::new();
    for t in &workload.templates {
        let name = t.name();
        if !tmpl_names.insert(name) {
            push(Rule::DuplicateTemplate, Some(name), None, String::new());
        }
        let mut var_types: BTreeMap<&str, &str> = BTreeMap::new();
        for (i, op) in t.ops().iter().enumerate() {
            if let Some(reason) = op.shape_error() {
                push(Rule::MalformedOperation, Some(name), Some(i), reason.to_string());
            }
            let Some(var) = &op.target else { continue };
            match var_types.get(var.name.as_str()) {
                Some(prev) if *prev != var.relation => push(
                    Rule::InconsistentVariableType,
                    Some(name),
                    Some(i),
                    format!("{} used as {} and {}", var.name, prev, var.relation),
                ),
                Some(_) => {}
                None => {
                    var_types.insert(&var.name, &var.relation);
                }
            }
            let Some(rel) = workload.schema.relation(&var.relation) else {
                push(Rule::UnknownRelation, Some(name), Some(i), var.relation.clone());
                continue;
            };
            for a in op.read_set.iter().chain(op.write_set.iter()) {
                if !rel.has_attribute(a) {
                    push(Rule::UnknownAttribute, Some(name), Some(i), format!("{}.{}", rel.name, a));
                }
            }
            if op.kind == OpKind::Update && granularity == Granularity::Attribute {
                let keys = rel.key_set();
                let bad = op.write_set.intersection(&keys);
                if !bad.is_empty() {
                    push(Rule::KeyInUpdateWriteSet, Some(name), Some(i), format!("{} writes {}", rel.name, bad));
                }
            }
        }
    }

    if diags.is_empty() {
        Ok(())
    } else {
        Err(diags)
    }
}

/// A type-preserving mapping from variable names to tuples.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VariableAssignment(BTreeMap<String, TupleId>);

impl VariableAssignment {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn assign(&mut self, variable: impl Into<String>, tuple: TupleId) {
        self.0.insert(variable.into(), tuple);
    }

    pub fn get(&self, variable: &str) -> Option<&TupleId> {
        self.0.get(variable)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &TupleId)> + '_ {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }
}

impl<S: Into<String>> FromIterator<(S, TupleId)> for VariableAssignment {
    fn from_iter<I: IntoIterator<Item = (S, TupleId)>>(iter: I) -> Self {
        VariableAssignment(iter.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }
}

/// Replaces every variable of `template` by its assigned tuple.
pub fn instantiate(
    template: &Template,
    assignment: &VariableAssignment,
    tx_id: impl Into<String>,
) -> Result<Transaction, ModelError> {
    let mut ops = Vec::with_capacity(template.len());
    for op in template.ops() {
        let target = match &op.target {
            None => None,
            Some(var) => {
                let tuple = assignment.get(&var.name).ok_or_else(|| ModelError::MissingVariable {
                    template: template.name().to_string(),
                    variable: var.name.clone(),
                })?;
                if tuple.relation != var.relation {
                    return Err(ModelError::TypeMismatch {
                        variable: var.name.clone(),
                        expected: var.relation.clone(),
                        tuple: tuple.clone(),
                    });
                }
                Some(tuple.clone())
            }
        };
        ops.push(Operation {
            kind: op.kind,
            target,
            read_set: op.read_set.clone(),
            write_set: op.write_set.clone(),
        });
    }
    Transaction::from_ops(tx_id, ops)
}

fn map_templates(workload: &Workload, f: impl Fn(&TemplateOp, &mut Vec<TemplateOp>)) -> Workload {
    let templates = workload
        .templates
        .iter()
        .map(|t| {
            let mut body = Vec::with_capacity(t.len());
            for op in t.body() {
                f(op, &mut body);
            }
            Template { name: t.name.clone(), ops: body.into_iter().chain([Operation::commit()]).collect() }
        })
        .collect();
    Workload { schema: workload.schema.clone(), templates }
}

/// Widens every non-empty read set and write set to the full attribute set of
/// the operation's relation.
pub fn coarsen_to_tuple_level(workload: &Workload) -> Workload {
    let full: BTreeMap<&str, AttrSet> =
        workload.schema.relations.iter().map(|r| (r.name.as_str(), r.attribute_set())).collect();
    map_templates(workload, |op, out| {
        let mut op = op.clone();
        if let Some(attrs) = op.relation().and_then(|r| full.get(r)) {
            if op.kind.is_read() {
                op.read_set = attrs.clone();
            }
            if op.kind.is_write() {
                op.write_set = attrs.clone();
            }
        }
        out.push(op);
    })
}

/// Rewrites each `U[X]{rs}{ws}` into `R[X]{rs} W[X]{ws}` in place.
pub fn split_updates(workload: &Workload) -> Workload {
    map_templates(workload, |op, out| {
        if op.kind == OpKind::Update {
            let var = op.target.clone().expect("update has a target");
            out.push(Operation::read(var.clone(), op.read_set.clone()));
            out.push(Operation::write(var, op.write_set.clone()));
        } else {
            out.push(op.clone());
        }
    })
}
