//! Proptest strategies for queries and answers.

use aql_core::app_model::{Hash, HashAlgorithm};
use aql_core::aql::{AppIdentifier, Flow, PostOp, QueryAst, QueryMode, Reference, Subject};
use proptest::prelude::*;

/// Text in normalized form: single-spaced words, including characters that
/// need escaping in queries and XML.
pub fn text() -> impl Strategy<Value = String> {
    prop::collection::vec("[A-Za-z0-9_.$<>&\"'\\\\()/:;,=-]{1,8}", 1..4).prop_map(|w| w.join(" "))
}

fn hash() -> impl Strategy<Value = Hash> {
    prop_oneof![
        "[0-9a-f]{32}".prop_map(|v| Hash::new(HashAlgorithm::Md5, &v).unwrap()),
        "[0-9a-f]{64}".prop_map(|v| Hash::new(HashAlgorithm::Sha256, &v).unwrap()),
    ]
}

/// Queries cannot carry hashes, so query apps are files only.
fn query_reference() -> impl Strategy<Value = Reference> {
    (prop::option::of(text()), prop::option::of(text()), prop::option::of(text()), text()).prop_map(|(s, m, c, app)| {
        Reference::new(s.as_deref(), m.as_deref(), c.as_deref(), AppIdentifier::file(app))
    })
}

fn subject() -> impl Strategy<Value = Subject> {
    prop::sample::select(Subject::ALL.to_vec())
}

fn flat_query() -> impl Strategy<Value = QueryAst> {
    let mode = prop_oneof![
        query_reference().prop_map(QueryMode::In),
        (query_reference(), query_reference()).prop_map(|(from, to)| QueryMode::FromTo { from, to }),
    ];
    (subject(), mode, prop::collection::vec(query_reference(), 0..2)).prop_map(|(subject, mode, filters)| {
        // FROM/TO is only defined for flows.
        let subject = if matches!(mode, QueryMode::FromTo { .. }) { Subject::Flows } else { subject };
        QueryAst { subject, mode, post_ops: filters.into_iter().map(PostOp::Filter).collect() }
    })
}

pub fn query() -> impl Strategy<Value = QueryAst> {
    flat_query().prop_recursive(2, 6, 2, |inner| {
        (flat_query(), prop::collection::vec(inner, 1..3)).prop_map(|(mut q, nested)| {
            q.post_ops.extend(nested.into_iter().map(|n| PostOp::Unify(Box::new(n))));
            q
        })
    })
}

fn endpoint() -> impl Strategy<Value = Reference> {
    (text(), text(), text(), text(), prop::collection::vec(hash(), 0..3))
        .prop_map(|(s, m, c, file, hashes)| Reference::statement_in(&s, &m, &c, AppIdentifier::new(file, hashes)))
}

pub fn flows() -> impl Strategy<Value = Vec<Flow>> {
    prop::collection::vec((endpoint(), endpoint()).prop_map(|(a, b)| Flow::new(a, b).unwrap()), 0..8)
}
