use std::collections::BTreeSet;

use super::{ConvertError, RawEndpoint, RawFlow};
use crate::app_model::{find_jimple_method, AppModel, MethodSignature, StatementModel};
use crate::aql::{normalize_text, Answer, Flow, Reference};
use crate::Strictness;

/// Name of the method invoked by a statement: taken from an embedded Jimple
/// reference if present, otherwise the identifier right before the first `(`.
pub fn callee_of(text: &str) -> Option<String> {
    if let Some((_, sig)) = find_jimple_method(text) {
        return Some(sig.name);
    }
    let head = &text[..text.find('(')?];
    let name: String = head
        .chars()
        .rev()
        .take_while(|c| c.is_alphanumeric() || *c == '_' || *c == '$')
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    (!name.is_empty()).then_some(name)
}

fn describe(ep: &RawEndpoint) -> String {
    let mut parts = Vec::new();
    if let Some(s) = &ep.statement {
        parts.push(format!("statement `{s}`"));
    } else if let Some(c) = &ep.callee {
        parts.push(format!("call `{c}`"));
    }
    if let Some(m) = &ep.method {
        parts.push(format!("method `{m}`"));
    }
    parts.push(format!("class `{}`", ep.class.as_deref().unwrap_or("?")));
    parts.push(format!("app `{}`", ep.app.as_deref().unwrap_or("?")));
    parts.join(" in ")
}

fn unresolvable(ep: &RawEndpoint, reason: &str) -> ConvertError {
    ConvertError::UnresolvableEndpoint { endpoint: describe(ep), reason: reason.to_string() }
}

fn app_named(app: &AppModel, name: &str) -> bool {
    let basename = |s: &str| s.rsplit(['/', '\\']).next().unwrap_or(s).to_string();
    app.id == name || app.file == name || basename(&app.file) == basename(name)
}

fn same_method(want: &MethodSignature, have: &MethodSignature) -> bool {
    want.name == have.name
        && want.params == have.params
        && (want.return_type.is_none() || have.return_type.is_none() || want.return_type == have.return_type)
}

fn exact_statement(ep: &RawEndpoint, stmt: &StatementModel) -> bool {
    match (&ep.statement, &ep.callee) {
        (Some(text), _) => normalize_text(text) == normalize_text(&stmt.text),
        (None, Some(callee)) => {
            stmt.callee.as_deref() == Some(callee.as_str())
                && ep.params.as_ref().is_none_or(|p| stmt.invoked_param_types().as_ref() == Some(p))
        }
        (None, None) => false,
    }
}

fn name_statement(ep: &RawEndpoint, stmt: &StatementModel) -> bool {
    let wanted = ep.callee.clone().or_else(|| ep.statement.as_deref().and_then(callee_of));
    let have = stmt.callee.clone().or_else(|| callee_of(&stmt.text));
    exact_statement(ep, stmt) || (wanted.is_some() && wanted == have)
}

/// All statements the endpoint may denote. Exact mode insists on a single
/// candidate and never fills in a missing class or app.
fn resolve_endpoint(ep: &RawEndpoint, context: &[AppModel], strictness: Strictness) -> Result<Vec<Reference>, ConvertError> {
    let exact = strictness == Strictness::Exact;
    if exact && ep.class.is_none() {
        return Err(unresolvable(ep, "class name missing"));
    }
    let apps: Vec<&AppModel> = match &ep.app {
        Some(name) => context.iter().filter(|a| app_named(a, name)).collect(),
        None if exact && context.len() > 1 => {
            return Err(unresolvable(ep, "app not named and several apps in context"));
        }
        None => context.iter().collect(),
    };
    if apps.is_empty() {
        return Err(unresolvable(ep, "app not in context"));
    }

    let mut out = Vec::new();
    for app in apps {
        for (stmt_ref, stmt) in app.statements() {
            if ep.class.as_ref().is_some_and(|c| *c != stmt_ref.class) {
                continue;
            }
            if let Some(want) = &ep.method {
                let have: MethodSignature = stmt_ref.method.parse().expect("model signatures are valid");
                if !same_method(want, &have) {
                    continue;
                }
            }
            let hit = if exact { exact_statement(ep, stmt) } else { name_statement(ep, stmt) };
            if hit {
                out.push(app.reference(&stmt_ref).expect("statement exists"));
            }
        }
    }
    match (out.len(), exact) {
        (0, _) => Err(unresolvable(ep, "no matching statement")),
        (1, _) | (_, false) => Ok(out),
        (n, true) => Err(unresolvable(ep, &format!("ambiguous, {n} candidate statements"))),
    }
}

/// Resolves raw flows against the analyzed apps.
///
/// In `NameOnly` mode an endpoint that matches several statements yields one
/// flow per candidate pair and the ambiguity is noted in the provenance;
/// flows with an endpoint matching nothing are dropped with a note.
pub fn resolve_flows(raw: &[RawFlow], context: &[AppModel], strictness: Strictness) -> Result<Answer, ConvertError> {
    let mut answer = Answer::new();
    let mut notes = BTreeSet::new();
    for flow in raw {
        let resolved = resolve_endpoint(&flow.source, context, strictness)
            .and_then(|s| resolve_endpoint(&flow.sink, context, strictness).map(|t| (s, t)));
        let (sources, sinks) = match resolved {
            Ok(pair) => pair,
            Err(e) if strictness == Strictness::NameOnly => {
                notes.insert(format!("dropped flow at byte {}: {e}", flow.offset));
                continue;
            }
            Err(e) => return Err(e),
        };
        if sources.len() > 1 || sinks.len() > 1 {
            notes.insert(format!(
                "ambiguous flow at byte {}: {} source x {} sink candidates",
                flow.offset,
                sources.len(),
                sinks.len()
            ));
        }
        for from in &sources {
            for to in &sinks {
                answer.insert(Flow::new(from.clone(), to.clone()).expect("resolved references are complete"));
            }
        }
    }
    answer.provenance.notes = notes.into_iter().collect();
    Ok(answer)
}
