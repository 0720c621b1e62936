use super::{PostOp, QueryAst, QueryMode, Reference};

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('\'');
    for c in s.chars() {
        if c == '\'' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('\'');
    out
}

pub fn print_reference(r: &Reference) -> String {
    let mut parts = Vec::with_capacity(4);
    for (keyword, value) in [("Statement", &r.statement), ("Method", &r.method), ("Class", &r.classname)] {
        if let Some(v) = value {
            parts.push(format!("{keyword}({})", quote(v)));
        }
    }
    parts.push(format!("App({})", quote(&r.app.file)));
    parts.join("->")
}

fn clauses(q: &QueryAst) -> Vec<String> {
    let mut out = Vec::new();
    match &q.mode {
        QueryMode::In(r) => out.push(format!("{} IN {}", q.subject, print_reference(r))),
        QueryMode::FromTo { from, to } => {
            out.push(format!("{} FROM {}", q.subject, print_reference(from)));
            out.push(format!("TO {}", print_reference(to)));
        }
    }
    for op in &q.post_ops {
        out.push(match op {
            PostOp::Filter(r) => format!("FILTER {}", print_reference(r)),
            PostOp::Unify(inner) => format!("UNIFY [ {} ]", render(inner, " ")),
        });
    }
    out
}

fn render(q: &QueryAst, sep: &str) -> String {
    let mut s = clauses(q).join(sep);
    s.push_str(" ?");
    s
}

/// Canonical query text. `IN` queries print on one line; `FROM ... TO`
/// queries put each clause on its own line. Nested queries are always inline.
pub fn print_query(q: &QueryAst) -> String {
    match q.mode {
        QueryMode::In(_) => render(q, " "),
        QueryMode::FromTo { .. } => render(q, "\n"),
    }
}
