//! Benchmark files:
//!
//! ```xml
//! <benchmark>
//!   <case id="DirectLeak1" polarity="positive" active="true">
//!     <apps><app sidecar="apps/DirectLeak1.json">DirectLeak1</app></apps>
//!     <query>Flows FROM ... TO ... ?</query>
//!     <expected><answer>...</answer></expected>
//!   </case>
//! </benchmark>
//! ```
//!
//! `sidecar` is optional and relative to the benchmark file. A missing
//! `<query>` is regenerated from the expected flows.

use std::collections::{BTreeMap, HashSet};

use quick_xml::events::BytesText;
use roxmltree::{Document, Node};

use super::{generate_query, BenchError, BenchmarkCase, Polarity};
use crate::aql::xml::{new_writer, read_answer, write_answer, write_declaration};
use crate::aql::{parse_query, print_query};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BenchmarkSuite {
    pub cases: Vec<BenchmarkCase>,
    /// App id to sidecar path, as written in the file.
    pub sidecars: BTreeMap<String, String>,
}

fn suite_err(node: Node, msg: impl std::fmt::Display) -> BenchError {
    let pos = node.document().text_pos_at(node.range().start);
    BenchError::Suite(format!("{}:{}: {msg}", pos.row, pos.col))
}

fn elements<'a, 'i>(node: Node<'a, 'i>, name: &'static str) -> impl Iterator<Item = Node<'a, 'i>> {
    node.children().filter(move |c| c.is_element() && c.tag_name().name() == name)
}

pub fn read_suite(bytes: &[u8]) -> Result<BenchmarkSuite, BenchError> {
    let text = std::str::from_utf8(bytes).map_err(|e| BenchError::Suite(e.to_string()))?;
    let doc = Document::parse(text).map_err(|e| BenchError::Suite(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "benchmark" {
        return Err(suite_err(root, "root element must be <benchmark>"));
    }
    let mut suite = BenchmarkSuite::default();
    let mut ids = HashSet::new();
    for node in elements(root, "case") {
        let id = node.attribute("id").ok_or_else(|| suite_err(node, "<case> lacks id"))?.to_string();
        if !ids.insert(id.clone()) {
            return Err(BenchError::DuplicateCase(id));
        }
        let polarity: Polarity =
            node.attribute("polarity").unwrap_or("positive").parse().map_err(|e| suite_err(node, e))?;
        let active = match node.attribute("active").unwrap_or("true") {
            "true" => true,
            "false" => false,
            other => return Err(suite_err(node, format!("active must be true or false, not `{other}`"))),
        };
        let mut apps = Vec::new();
        for list in elements(node, "apps") {
            for app in elements(list, "app") {
                let app_id = app.text().unwrap_or_default().trim().to_string();
                if let Some(sidecar) = app.attribute("sidecar") {
                    suite.sidecars.insert(app_id.clone(), sidecar.to_string());
                }
                apps.push(app_id);
            }
        }
        let expected = elements(node, "expected")
            .next()
            .and_then(|e| elements(e, "answer").next())
            .ok_or_else(|| suite_err(node, "<case> lacks <expected><answer>"))?;
        let expected = read_answer(expected)?;
        let generated_query = match elements(node, "query").next() {
            Some(q) => parse_query(q.text().unwrap_or_default())?,
            None => generate_query(&expected).ok_or_else(|| BenchError::NoExpectedFlows(id.clone()))?,
        };
        if expected.is_empty() {
            return Err(BenchError::NoExpectedFlows(id));
        }
        suite.cases.push(BenchmarkCase { id, apps, expected, polarity, active, generated_query });
    }
    Ok(suite)
}

pub fn write_suite(suite: &BenchmarkSuite) -> Vec<u8> {
    let mut w = new_writer(Vec::new());
    let ok = "writing to Vec cannot fail";
    write_declaration(&mut w).expect(ok);
    w.create_element("benchmark")
        .write_inner_content(|w| {
            for case in &suite.cases {
                let polarity = case.polarity.to_string();
                w.create_element("case")
                    .with_attributes([
                        ("id", case.id.as_str()),
                        ("polarity", polarity.as_str()),
                        ("active", if case.active { "true" } else { "false" }),
                    ])
                    .write_inner_content(|w| {
                        w.create_element("apps").write_inner_content(|w| {
                            for app in &case.apps {
                                let el = w.create_element("app");
                                let el = match suite.sidecars.get(app) {
                                    Some(path) => el.with_attribute(("sidecar", path.as_str())),
                                    None => el,
                                };
                                el.write_text_content(BytesText::new(app))?;
                            }
                            Ok(())
                        })?;
                        w.create_element("query")
                            .write_text_content(BytesText::new(&print_query(&case.generated_query)))?;
                        w.create_element("expected").write_inner_content(|w| write_answer(w, &case.expected))?;
                        Ok(())
                    })?;
            }
            Ok(())
        })
        .expect(ok);
    let mut out = w.into_inner();
    out.push(b'\n');
    out
}
