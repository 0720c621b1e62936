use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{print_query, AqlError, PostOp, QueryAst, Reference};

/// A source-to-sink flow. Both endpoints are fully resolved references.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Flow {
    pub from: Reference,
    pub to: Reference,
}

impl Flow {
    pub fn new(from: Reference, to: Reference) -> Result<Self, AqlError> {
        for endpoint in [&from, &to] {
            if !endpoint.is_fully_resolved() {
                return Err(AqlError::UnresolvedEndpoint(super::printer::print_reference(endpoint)));
            }
        }
        Ok(Flow { from, to })
    }

    pub fn touches(&self, pattern: &Reference) -> bool {
        pattern.covers(&self.from) || pattern.covers(&self.to)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: Option<String>,
    pub timestamp: Option<String>,
    /// Conversion remarks such as ignored elements or ambiguous endpoints.
    pub notes: Vec<String>,
}

/// A set of flows. Equality is structural on the flow set only; provenance
/// is informational.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Answer {
    flows: BTreeSet<Flow>,
    pub provenance: Provenance,
}

impl PartialEq for Answer {
    fn eq(&self, other: &Self) -> bool {
        self.flows == other.flows
    }
}

impl Eq for Answer {}

impl Answer {
    pub fn new() -> Self {
        Answer::default()
    }

    pub fn from_flows(flows: impl IntoIterator<Item = Flow>) -> Self {
        Answer { flows: flows.into_iter().collect(), provenance: Provenance::default() }
    }

    /// Returns false if an equal flow was already present.
    pub fn insert(&mut self, flow: Flow) -> bool {
        self.flows.insert(flow)
    }

    /// Flows in canonical order.
    pub fn flows(&self) -> impl ExactSizeIterator<Item = &Flow> + '_ {
        self.flows.iter()
    }

    pub fn len(&self) -> usize {
        self.flows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flows.is_empty()
    }

    pub fn contains(&self, flow: &Flow) -> bool {
        self.flows.contains(flow)
    }

    pub fn filter(&self, pattern: &Reference) -> Answer {
        Answer {
            flows: self.flows.iter().filter(|f| f.touches(pattern)).cloned().collect(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn unify(&self, other: &Answer) -> Answer {
        let mut provenance = self.provenance.clone();
        provenance.notes.extend(other.provenance.notes.iter().cloned());
        Answer { flows: self.flows.union(&other.flows).cloned().collect(), provenance }
    }
}

impl FromIterator<Flow> for Answer {
    fn from_iter<T: IntoIterator<Item = Flow>>(iter: T) -> Self {
        Answer::from_flows(iter)
    }
}

/// Applies FILTER and UNIFY post-operations in order. Every unified query must
/// have its answer in `auxiliary`.
pub fn apply_post_ops(
    answer: &Answer,
    ops: &[PostOp],
    auxiliary: &HashMap<QueryAst, Answer>,
) -> Result<Answer, AqlError> {
    let mut current = answer.clone();
    for op in ops {
        current = match op {
            PostOp::Filter(pattern) => current.filter(pattern),
            PostOp::Unify(query) => {
                let other = auxiliary
                    .get(query.as_ref())
                    .ok_or_else(|| AqlError::MissingAuxiliaryAnswer(print_query(query)))?;
                current.unify(other)
            }
        };
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aql::AppIdentifier;

    fn flow(app: &str, src: &str, sink: &str) -> Flow {
        let app = AppIdentifier::file(app);
        Flow::new(
            Reference::statement_in(src, "void m()", "C", app.clone()),
            Reference::statement_in(sink, "void m()", "C", app),
        )
        .unwrap()
    }

    #[test]
    fn flows_need_statements() {
        let app = AppIdentifier::file("a");
        assert!(Flow::new(Reference::app(app.clone()), Reference::app(app)).is_err());
    }

    #[test]
    fn duplicates_collapse() {
        let mut a = Answer::new();
        assert!(a.insert(flow("a", "x", "y")));
        assert!(!a.insert(flow("a", "x", "y")));
        assert_eq!(a.len(), 1);
    }

    #[test]
    fn filter_matching_nothing_is_empty() {
        let a = Answer::from_flows([flow("a", "x", "y")]);
        let out = apply_post_ops(&a, &[PostOp::Filter(Reference::app(AppIdentifier::file("zzz")))], &HashMap::new())
            .unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn filter_by_app() {
        let a = Answer::from_flows([flow("a", "x", "y"), flow("b", "x", "y"), flow("a", "p", "q")]);
        let out = a.filter(&Reference::app(AppIdentifier::file("a")));
        // brute force: every flow with an endpoint in app a
        let expected: Vec<_> = a.flows().filter(|f| f.from.app.file == "a" || f.to.app.file == "a").cloned().collect();
        assert_eq!(out.flows().cloned().collect::<Vec<_>>(), expected);
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn unify_with_self_is_identity() {
        let a = Answer::from_flows([flow("a", "x", "y"), flow("b", "x", "y")]);
        let q = QueryAst::flows_in(AppIdentifier::file("a"));
        let aux = HashMap::from([(q.clone(), a.clone())]);
        let out = apply_post_ops(&a, &[PostOp::Unify(Box::new(q))], &aux).unwrap();
        assert_eq!(out, a);
    }

    #[test]
    fn missing_auxiliary() {
        let q = QueryAst::flows_in(AppIdentifier::file("a"));
        let err = apply_post_ops(&Answer::new(), &[PostOp::Unify(Box::new(q))], &HashMap::new()).unwrap_err();
        assert!(matches!(err, AqlError::MissingAuxiliaryAnswer(_)));
    }
}
