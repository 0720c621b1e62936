use std::collections::{BTreeMap, BTreeSet};

use super::BenchError;
use crate::app_model::{AppModel, Candidate, CandidateKind, StatementRef};
use crate::aql::Reference;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selected {
    pub kind: CandidateKind,
    pub reference: Reference,
}

/// Statements chosen as sources or sinks, partitioned into groups of
/// statements that count as the same resource. A fresh selection puts each
/// statement in its own group.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SourceSinkSelection {
    members: BTreeMap<StatementRef, Selected>,
    /// Kept sorted by representative (smallest member).
    groups: Vec<BTreeSet<StatementRef>>,
}

impl SourceSinkSelection {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn get(&self, stmt: &StatementRef) -> Option<&Selected> {
        self.members.get(stmt)
    }

    pub fn members(&self) -> impl Iterator<Item = (&StatementRef, &Selected)> {
        self.members.iter()
    }

    pub fn groups(&self) -> &[BTreeSet<StatementRef>] {
        &self.groups
    }

    pub fn groups_of_kind(&self, kind: CandidateKind) -> Vec<&BTreeSet<StatementRef>> {
        self.groups.iter().filter(|g| self.kind_of_group(g) == kind).collect()
    }

    fn kind_of_group(&self, group: &BTreeSet<StatementRef>) -> CandidateKind {
        let first = group.first().expect("groups are never empty");
        self.members[first].kind
    }

    /// The smallest member stands for the whole group.
    pub fn representative<'a>(&'a self, group: &'a BTreeSet<StatementRef>) -> (&'a StatementRef, &'a Selected) {
        let stmt = group.first().expect("groups are never empty");
        (stmt, &self.members[stmt])
    }

    fn normalize(&mut self) {
        self.groups.retain(|g| !g.is_empty());
        self.groups.sort();
    }

    /// Adds a statement as its own group. Returns false if it was already
    /// selected; re-selecting with another kind is an error.
    pub fn select(&mut self, stmt: StatementRef, kind: CandidateKind, reference: Reference) -> Result<bool, BenchError> {
        if let Some(existing) = self.members.get(&stmt) {
            if existing.kind != kind {
                return Err(BenchError::MixedGroupKinds);
            }
            return Ok(false);
        }
        self.members.insert(stmt.clone(), Selected { kind, reference });
        self.groups.push(BTreeSet::from([stmt]));
        self.normalize();
        Ok(true)
    }

    pub fn select_candidate(&mut self, app: &AppModel, candidate: &Candidate) -> Result<bool, BenchError> {
        let reference = app
            .reference(&candidate.stmt)
            .ok_or_else(|| BenchError::UnknownStatement(candidate.stmt.to_string()))?;
        self.select(candidate.stmt.clone(), candidate.kind, reference)
    }

    pub fn deselect(&mut self, stmt: &StatementRef) -> bool {
        if self.members.remove(stmt).is_none() {
            return false;
        }
        for g in &mut self.groups {
            g.remove(stmt);
        }
        self.normalize();
        true
    }

    /// Merges the groups of all given statements into one.
    pub fn group(&mut self, stmts: &[StatementRef]) -> Result<(), BenchError> {
        let mut kinds = BTreeSet::new();
        for s in stmts {
            let m = self.members.get(s).ok_or_else(|| BenchError::NotSelected(s.to_string()))?;
            kinds.insert(m.kind);
        }
        if kinds.len() > 1 {
            return Err(BenchError::MixedGroupKinds);
        }
        let (merged, mut rest): (Vec<_>, Vec<_>) =
            std::mem::take(&mut self.groups).into_iter().partition(|g| stmts.iter().any(|s| g.contains(s)));
        rest.push(merged.into_iter().flatten().collect());
        self.groups = rest;
        self.normalize();
        Ok(())
    }

    /// Moves a statement back into a group of its own.
    pub fn split(&mut self, stmt: &StatementRef) -> Result<(), BenchError> {
        if !self.members.contains_key(stmt) {
            return Err(BenchError::NotSelected(stmt.to_string()));
        }
        for g in &mut self.groups {
            g.remove(stmt);
        }
        self.groups.push(BTreeSet::from([stmt.clone()]));
        self.normalize();
        Ok(())
    }

    /// Index of the group holding a statement with this reference, compared
    /// on file, class, method and statement text.
    pub fn group_index(&self, reference: &Reference) -> Option<usize> {
        let key = super::endpoint_key(reference);
        let stmt = self.members.iter().find(|(_, m)| super::endpoint_key(&m.reference) == key)?.0;
        self.groups.iter().position(|g| g.contains(stmt))
    }
}
