//! Sink-centric XML results:
//!
//! ```xml
//! <DataFlowResults App="DirectLeak1.apk">
//!   <Results>
//!     <Result>
//!       <Sink Statement="virtualinvoke $r6.&lt;...: void sendTextMessage(...)&gt;(...)"
//!             Method="&lt;de.ecspride.MainActivity: void onCreate(android.os.Bundle)&gt;"/>
//!       <Sources>
//!         <Source Statement="$r4 = virtualinvoke ...getDeviceId()&gt;()" Method="..."/>
//!       </Sources>
//!     </Result>
//!   </Results>
//! </DataFlowResults>
//! ```
//!
//! `App` may also be set on individual `Sink`/`Source` elements.

use roxmltree::{Document, Node};

use super::{callee_of, ConvertError, RawEndpoint, RawFlow, RawParser};
use crate::app_model::parse_jimple_method;

pub struct SinkXmlParser;

fn unparsable(node: Node, message: impl Into<String>) -> ConvertError {
    ConvertError::UnparsableOutput { offset: node.range().start, message: message.into() }
}

fn endpoint(node: Node, app: Option<&str>) -> Result<RawEndpoint, ConvertError> {
    let statement = node
        .attribute("Statement")
        .ok_or_else(|| unparsable(node, format!("<{}> lacks Statement", node.tag_name().name())))?;
    let (class, method) = match node.attribute("Method") {
        Some(m) => {
            let (class, sig) = parse_jimple_method(m).ok_or_else(|| unparsable(node, format!("bad Method `{m}`")))?;
            (Some(class), Some(sig))
        }
        None => (None, None),
    };
    Ok(RawEndpoint {
        app: node.attribute("App").or(app).map(str::to_string),
        class,
        method,
        statement: Some(statement.to_string()),
        callee: callee_of(statement),
        params: None,
    })
}

fn line_col_to_offset(text: &str, row: u32, col: u32) -> usize {
    let line_start: usize = text.split_inclusive('\n').take(row.saturating_sub(1) as usize).map(str::len).sum();
    let line = &text[line_start..];
    line_start + line.chars().take(col.saturating_sub(1) as usize).map(char::len_utf8).sum::<usize>()
}

fn elems<'a, 'i>(n: Node<'a, 'i>, name: &str) -> Vec<Node<'a, 'i>> {
    n.children().filter(|c| c.is_element() && c.tag_name().name() == name).collect()
}

impl RawParser for SinkXmlParser {
    fn parse(&self, raw: &[u8]) -> Result<Vec<RawFlow>, ConvertError> {
        let text = std::str::from_utf8(raw).map_err(|e| ConvertError::UnparsableOutput {
            offset: e.valid_up_to(),
            message: "not UTF-8".into(),
        })?;
        let doc = Document::parse(text).map_err(|e| {
            let pos = e.pos();
            ConvertError::UnparsableOutput { offset: line_col_to_offset(text, pos.row, pos.col), message: e.to_string() }
        })?;
        let root = doc.root_element();
        if root.tag_name().name() != "DataFlowResults" {
            return Err(unparsable(root, "root element must be <DataFlowResults>"));
        }
        let app = root.attribute("App");
        let mut flows = Vec::new();
        for results in elems(root, "Results") {
            for result in elems(results, "Result") {
                let sinks = elems(result, "Sink");
                let [sink] = sinks[..] else {
                    return Err(unparsable(result, "<Result> needs exactly one <Sink>"));
                };
                let sink = endpoint(sink, app)?;
                for sources in elems(result, "Sources") {
                    for source in elems(sources, "Source") {
                        flows.push(RawFlow {
                            source: endpoint(source, app)?,
                            sink: sink.clone(),
                            offset: source.range().start,
                        });
                    }
                }
            }
        }
        Ok(flows)
    }
}
