//! Flow tuples, one per line:
//!
//! ```text
//! % comment
//! (DirectLeak1.apk, de.ecspride.MainActivity.getDeviceId(), de.ecspride.MainActivity.sendTextMessage(...))
//! ```
//!
//! Each endpoint is `Class.callee` optionally followed by a parameter type
//! list; `(...)` or no list at all leaves parameters unconstrained. The class
//! may be `*` when the tool does not report it.

use super::{ConvertError, RawEndpoint, RawFlow, RawParser};
use crate::app_model::split_params;

pub struct FlowTupleParser;

fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0usize;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' | '<' => depth += 1,
            ')' | '>' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                parts.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(s[start..].trim());
    parts
}

fn endpoint(id: &str, app: &str) -> Option<RawEndpoint> {
    let (head, params) = match id.find('(') {
        Some(open) => {
            let inner = id[open + 1..].strip_suffix(')')?;
            let params = if inner.trim() == "..." {
                None
            } else {
                Some(split_params(inner))
            };
            (&id[..open], params)
        }
        None => (id, None),
    };
    let (class, callee) = head.rsplit_once('.')?;
    if callee.is_empty() || class.is_empty() {
        return None;
    }
    Some(RawEndpoint {
        app: Some(app.to_string()),
        class: (class != "*").then(|| class.to_string()),
        method: None,
        statement: None,
        callee: Some(callee.to_string()),
        params,
    })
}

impl RawParser for FlowTupleParser {
    fn parse(&self, raw: &[u8]) -> Result<Vec<RawFlow>, ConvertError> {
        let text = std::str::from_utf8(raw).map_err(|e| ConvertError::UnparsableOutput {
            offset: e.valid_up_to(),
            message: "not UTF-8".into(),
        })?;
        let mut flows = Vec::new();
        let mut offset = 0;
        for line in text.split_inclusive('\n') {
            let line_offset = offset;
            offset += line.len();
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('%') {
                continue;
            }
            let indent = line.len() - line.trim_start().len();
            let bad = |message: &str| ConvertError::UnparsableOutput {
                offset: line_offset + indent,
                message: message.to_string(),
            };
            let inner = trimmed
                .strip_prefix('(')
                .and_then(|t| t.strip_suffix(')'))
                .ok_or_else(|| bad("expected `(app, source, sink)`"))?;
            let fields = split_top_level(inner);
            let [app, source, sink] = fields[..] else {
                return Err(bad("tuple must have three fields"));
            };
            let source = endpoint(source, app).ok_or_else(|| bad("bad source identifier"))?;
            let sink = endpoint(sink, app).ok_or_else(|| bad("bad sink identifier"))?;
            flows.push(RawFlow { source, sink, offset: line_offset + indent });
        }
        Ok(flows)
    }
}
