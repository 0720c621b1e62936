//! Canonical XML form of answers.
//!
//! ```xml
//! <?xml version="1.0" encoding="UTF-8"?>
//! <answer>
//!   <flows>
//!     <flow>
//!       <reference type="from">
//!         <statement>...</statement>
//!         <method>...</method>
//!         <classname>...</classname>
//!         <app>
//!           <file>...</file>
//!           <hashes>
//!             <hash type="MD5">...</hash>
//!             <hash type="SHA-256">...</hash>
//!           </hashes>
//!         </app>
//!       </reference>
//!       <reference type="to">...</reference>
//!     </flow>
//!   </flows>
//! </answer>
//! ```
//!
//! Flows are written in canonical order, two-space indented, LF line endings.
//! `<hashes>` is omitted when an app has none.

use std::io::{self, Write};

use quick_xml::events::{BytesDecl, BytesText, Event};
use quick_xml::Writer;
use roxmltree::{Document, Node};

use super::{normalize_text, Answer, AppIdentifier, AqlError, Flow, Reference};
use crate::app_model::{Hash, HashAlgorithm};

pub type XmlWriter<W> = Writer<W>;

pub fn new_writer<W: Write>(inner: W) -> XmlWriter<W> {
    Writer::new_with_indent(inner, b' ', 2)
}

pub fn write_declaration<W: Write>(w: &mut XmlWriter<W>) -> io::Result<()> {
    w.write_event(Event::Decl(BytesDecl::new("1.0", Some("UTF-8"), None)))
}

pub(crate) fn text_element<W: Write>(w: &mut XmlWriter<W>, name: &str, text: &str) -> io::Result<()> {
    w.create_element(name).write_text_content(BytesText::new(text))?;
    Ok(())
}

fn write_app<W: Write>(w: &mut XmlWriter<W>, app: &AppIdentifier) -> io::Result<()> {
    w.create_element("app").write_inner_content(|w| {
        text_element(w, "file", &app.file)?;
        if !app.hashes.is_empty() {
            w.create_element("hashes").write_inner_content(|w| {
                for h in &app.hashes {
                    w.create_element("hash")
                        .with_attribute(("type", h.algorithm.as_str()))
                        .write_text_content(BytesText::new(&h.value))?;
                }
                Ok(())
            })?;
        }
        Ok(())
    })?;
    Ok(())
}

fn write_reference<W: Write>(w: &mut XmlWriter<W>, kind: &str, r: &Reference) -> io::Result<()> {
    w.create_element("reference").with_attribute(("type", kind)).write_inner_content(|w| {
        for (name, value) in [("statement", &r.statement), ("method", &r.method), ("classname", &r.classname)] {
            if let Some(v) = value {
                text_element(w, name, v)?;
            }
        }
        write_app(w, &r.app)
    })?;
    Ok(())
}

/// Writes the `<answer>` element (no declaration) into an existing writer.
pub fn write_answer<W: Write>(w: &mut XmlWriter<W>, answer: &Answer) -> io::Result<()> {
    w.create_element("answer").write_inner_content(|w| {
        if answer.is_empty() {
            w.create_element("flows").write_empty()?;
            return Ok(());
        }
        w.create_element("flows").write_inner_content(|w| {
            for flow in answer.flows() {
                w.create_element("flow").write_inner_content(|w| {
                    write_reference(w, "from", &flow.from)?;
                    write_reference(w, "to", &flow.to)
                })?;
            }
            Ok(())
        })?;
        Ok(())
    })?;
    Ok(())
}

pub fn serialize_answer(answer: &Answer) -> Vec<u8> {
    let mut w = new_writer(Vec::new());
    write_declaration(&mut w).expect("writing to Vec cannot fail");
    write_answer(&mut w, answer).expect("writing to Vec cannot fail");
    let mut out = w.into_inner();
    out.push(b'\n');
    out
}

fn schema(path: &str, message: impl Into<String>) -> AqlError {
    AqlError::Schema { path: path.to_string(), message: message.into() }
}

fn child_elements<'a, 'i>(node: Node<'a, 'i>) -> impl Iterator<Item = Node<'a, 'i>> {
    node.children().filter(|c| c.is_element())
}

fn element_text(node: Node) -> String {
    // Statements in archived answers may wrap the full text in <statementfull>.
    let text: String = match child_elements(node).find(|c| c.tag_name().name() == "statementfull") {
        Some(full) => full.text().unwrap_or_default().to_string(),
        None => node.children().filter(|c| c.is_text()).filter_map(|c| c.text()).collect(),
    };
    normalize_text(&text)
}

fn read_app(node: Node, path: &str, notes: &mut Vec<String>) -> Result<AppIdentifier, AqlError> {
    let mut file = None;
    let mut hashes = Vec::new();
    for child in child_elements(node) {
        match child.tag_name().name() {
            "file" => file = Some(element_text(child)),
            "hashes" => {
                for (i, h) in child_elements(child).enumerate() {
                    let hpath = format!("{path}/hashes/hash[{}]", i + 1);
                    if h.tag_name().name() != "hash" {
                        notes.push(format!("ignored element {path}/hashes/{}", h.tag_name().name()));
                        continue;
                    }
                    let algorithm: HashAlgorithm = h
                        .attribute("type")
                        .ok_or_else(|| schema(&hpath, "missing attribute `type`"))?
                        .parse()
                        .map_err(|e| schema(&hpath, format!("{e}")))?;
                    let hash = Hash::new(algorithm, &element_text(h)).map_err(|e| schema(&hpath, format!("{e}")))?;
                    hashes.push(hash);
                }
            }
            other => notes.push(format!("ignored element {path}/{other}")),
        }
    }
    let file = file.ok_or_else(|| schema(path, "missing required element <file>"))?;
    Ok(AppIdentifier::new(file, hashes))
}

fn read_reference(node: Node, path: &str, notes: &mut Vec<String>) -> Result<Reference, AqlError> {
    let mut statement = None;
    let mut method = None;
    let mut classname = None;
    let mut app = None;
    for child in child_elements(node) {
        match child.tag_name().name() {
            "statement" => statement = Some(element_text(child)),
            "method" => method = Some(element_text(child)),
            "classname" => classname = Some(element_text(child)),
            "app" => app = Some(read_app(child, &format!("{path}/app"), notes)?),
            other => notes.push(format!("ignored element {path}/{other}")),
        }
    }
    let app = app.ok_or_else(|| schema(path, "missing required element <app>"))?;
    for (name, value) in [("statement", &statement), ("method", &method), ("classname", &classname)] {
        if value.is_none() {
            return Err(schema(path, format!("missing required element <{name}>")));
        }
    }
    Ok(Reference::new(statement.as_deref(), method.as_deref(), classname.as_deref(), app))
}

fn read_flow(node: Node, path: &str, notes: &mut Vec<String>) -> Result<Flow, AqlError> {
    let mut from = None;
    let mut to = None;
    let mut refs = 0;
    for child in child_elements(node) {
        if child.tag_name().name() != "reference" {
            notes.push(format!("ignored element {path}/{}", child.tag_name().name()));
            continue;
        }
        refs += 1;
        let rpath = format!("{path}/reference[{refs}]");
        let slot = match child.attribute("type") {
            Some("from") => &mut from,
            Some("to") => &mut to,
            Some(other) => return Err(schema(&rpath, format!("reference type must be from|to, got `{other}`"))),
            None => return Err(schema(&rpath, "missing attribute `type`")),
        };
        if slot.is_some() {
            return Err(schema(&rpath, "duplicate reference"));
        }
        *slot = Some(read_reference(child, &rpath, notes)?);
    }
    let from = from.ok_or_else(|| schema(path, "missing <reference type=\"from\">"))?;
    let to = to.ok_or_else(|| schema(path, "missing <reference type=\"to\">"))?;
    Flow::new(from, to).map_err(|e| schema(path, e.to_string()))
}

/// Reads an `<answer>` element. Unknown elements are skipped and listed in
/// the answer's provenance notes.
pub fn read_answer(node: Node) -> Result<Answer, AqlError> {
    if node.tag_name().name() != "answer" {
        return Err(schema(node.tag_name().name(), "root element must be <answer>"));
    }
    let mut notes = Vec::new();
    let mut answer = Answer::new();
    for child in child_elements(node) {
        match child.tag_name().name() {
            "flows" => {
                let mut n = 0;
                for flow in child_elements(child) {
                    if flow.tag_name().name() != "flow" {
                        notes.push(format!("ignored element answer/flows/{}", flow.tag_name().name()));
                        continue;
                    }
                    n += 1;
                    answer.insert(read_flow(flow, &format!("answer/flows/flow[{n}]"), &mut notes)?);
                }
            }
            other => notes.push(format!("ignored element answer/{other}")),
        }
    }
    answer.provenance.notes = notes;
    Ok(answer)
}

pub fn deserialize_answer(bytes: &[u8]) -> Result<Answer, AqlError> {
    let text = std::str::from_utf8(bytes).map_err(|e| schema("answer", format!("not UTF-8: {e}")))?;
    let doc = Document::parse(text).map_err(|e| schema("answer", format!("not well-formed XML: {e}")))?;
    read_answer(doc.root_element())
}
