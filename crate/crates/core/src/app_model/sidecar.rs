//! App sidecar documents.
//!
//! JSON shape:
//!
//! ```json
//! { "id": "DirectLeak1", "file": "DirectLeak1.apk", "api-level": 19,
//!   "intent-filters": [{ "component": "de.ecspride.MainActivity",
//!                        "actions": ["android.intent.action.MAIN"], "categories": [],
//!                        "data": [{ "scheme": "http", "host": "a.com", "path": "/x*", "mime": "text/*" }] }],
//!   "classes": [{ "name": "de.ecspride.MainActivity",
//!                 "methods": [{ "signature": "void onCreate(android.os.Bundle)",
//!                               "statements": [{ "text": "...", "callee": "getDeviceId", "parameters": [] }] }] }] }
//! ```
//!
//! The XML form uses the same names: `<app id file api-level>` containing
//! `<intent-filters><intent-filter component><action>..</action><category>..</category><data scheme host path mime/>`
//! and `<classes><class name><methods><method signature><statements><statement callee><text>..</text><parameter>..</parameter>`.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use roxmltree::{Document, Node};
use serde::{Deserialize, Serialize};

use super::{
    hash_file, AppModel, AppModelError, ClassModel, HashAlgorithm, HashOrigin, MethodModel, MethodSignature,
    StatementModel,
};
use crate::intent::{ComponentName, DataSpec, IntentFilter};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SidecarFormat {
    Json,
    Xml,
}

impl SidecarFormat {
    pub fn detect(path: Option<&Path>, bytes: &[u8]) -> SidecarFormat {
        match path.and_then(|p| p.extension()).and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => SidecarFormat::Json,
            Some(ext) if ext.eq_ignore_ascii_case("xml") => SidecarFormat::Xml,
            _ => match bytes.iter().find(|b| !b.is_ascii_whitespace()) {
                Some(b'<') => SidecarFormat::Xml,
                _ => SidecarFormat::Json,
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct IngestOptions {
    /// Fail with `MissingFile` when the declared .apk does not exist.
    pub strict: bool,
    /// Also record an MD5 digest next to SHA-256.
    pub with_md5: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions { strict: false, with_md5: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SidecarDoc {
    pub id: String,
    pub file: String,
    #[serde(default, rename = "api-level", alias = "api_level", skip_serializing_if = "Option::is_none")]
    pub api_level: Option<u32>,
    #[serde(default, rename = "intent-filters", alias = "intent_filters", skip_serializing_if = "Vec::is_empty")]
    pub intent_filters: Vec<FilterDoc>,
    #[serde(default)]
    pub classes: Vec<ClassDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterDoc {
    pub component: String,
    #[serde(default)]
    pub actions: Vec<String>,
    #[serde(default)]
    pub categories: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub data: Vec<DataSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassDoc {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<String>,
    #[serde(default)]
    pub methods: Vec<MethodDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodDoc {
    pub signature: String,
    #[serde(default)]
    pub statements: Vec<StatementDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatementDoc {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub callee: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameters: Option<Vec<String>>,
}

impl SidecarDoc {
    pub fn parse(bytes: &[u8], format: SidecarFormat) -> Result<Self, AppModelError> {
        match format {
            SidecarFormat::Json => {
                serde_json::from_slice(bytes).map_err(|e| AppModelError::MalformedSidecar(e.to_string()))
            }
            SidecarFormat::Xml => {
                let text = std::str::from_utf8(bytes).map_err(|e| AppModelError::MalformedSidecar(e.to_string()))?;
                let doc = Document::parse(text).map_err(|e| AppModelError::MalformedSidecar(e.to_string()))?;
                from_xml(doc.root_element())
            }
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("sidecar serializes");
        s.push('\n');
        s
    }

    pub fn from_model(app: &AppModel) -> Self {
        SidecarDoc {
            id: app.id.clone(),
            file: app.file.clone(),
            api_level: app.declared_api_level,
            intent_filters: app
                .intent_filters
                .iter()
                .map(|f| FilterDoc {
                    component: f.owner.class.clone(),
                    actions: f.actions.iter().cloned().collect(),
                    categories: f.categories.iter().cloned().collect(),
                    data: f.data_specs.clone(),
                })
                .collect(),
            classes: app
                .classes
                .iter()
                .map(|c| ClassDoc {
                    name: c.name.clone(),
                    origin: c.origin.clone(),
                    methods: c
                        .methods
                        .iter()
                        .map(|m| MethodDoc {
                            signature: m.signature.to_string(),
                            statements: m
                                .statements
                                .iter()
                                .map(|s| StatementDoc {
                                    text: s.text.clone(),
                                    callee: s.callee.clone(),
                                    parameters: s.parameters.clone(),
                                })
                                .collect(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

fn malformed(node: Node, msg: &str) -> AppModelError {
    let pos = node.document().text_pos_at(node.range().start);
    AppModelError::MalformedSidecar(format!("{} at {}:{}", msg, pos.row, pos.col))
}

fn required_attr(node: Node, name: &str) -> Result<String, AppModelError> {
    node.attribute(name)
        .map(str::to_string)
        .ok_or_else(|| malformed(node, &format!("<{}> lacks attribute `{name}`", node.tag_name().name())))
}

fn elements<'a, 'i>(node: Node<'a, 'i>, name: &'a str) -> impl Iterator<Item = Node<'a, 'i>> + 'a {
    node.children().filter(move |c| c.is_element() && c.tag_name().name() == name)
}

fn nested<'a, 'i>(node: Node<'a, 'i>, wrapper: &'a str, name: &'a str) -> impl Iterator<Item = Node<'a, 'i>> + 'a {
    elements(node, wrapper).flat_map(move |w| elements(w, name))
}

fn text_of(node: Node) -> String {
    node.text().unwrap_or("").to_string()
}

fn from_xml(root: Node) -> Result<SidecarDoc, AppModelError> {
    if root.tag_name().name() != "app" {
        return Err(malformed(root, "root element must be <app>"));
    }
    let api_level = match root.attribute("api-level") {
        Some(v) => Some(v.trim().parse().map_err(|_| malformed(root, "api-level is not an integer"))?),
        None => None,
    };
    let mut intent_filters = Vec::new();
    for f in nested(root, "intent-filters", "intent-filter") {
        let mut data = Vec::new();
        for d in elements(f, "data") {
            data.push(DataSpec {
                scheme: d.attribute("scheme").map(str::to_string),
                authority: d.attribute("host").map(str::to_string),
                path: match d.attribute("path") {
                    Some(p) => Some(p.parse().map_err(|e| malformed(d, &format!("{e}")))?),
                    None => None,
                },
                mime: d.attribute("mime").map(str::to_string),
            });
        }
        intent_filters.push(FilterDoc {
            component: required_attr(f, "component")?,
            actions: elements(f, "action").map(text_of).collect(),
            categories: elements(f, "category").map(text_of).collect(),
            data,
        });
    }
    let mut classes = Vec::new();
    for c in nested(root, "classes", "class") {
        let mut methods = Vec::new();
        for m in nested(c, "methods", "method") {
            let mut statements = Vec::new();
            for s in nested(m, "statements", "statement") {
                let text = elements(s, "text")
                    .next()
                    .map(text_of)
                    .ok_or_else(|| malformed(s, "<statement> lacks <text>"))?;
                let params: Vec<String> = elements(s, "parameter").map(text_of).collect();
                statements.push(StatementDoc {
                    text,
                    callee: s.attribute("callee").map(str::to_string),
                    parameters: (!params.is_empty()).then_some(params),
                });
            }
            methods.push(MethodDoc { signature: required_attr(m, "signature")?, statements });
        }
        classes.push(ClassDoc {
            name: required_attr(c, "name")?,
            origin: c.attribute("origin").map(str::to_string),
            methods,
        });
    }
    Ok(SidecarDoc {
        id: required_attr(root, "id")?,
        file: required_attr(root, "file")?,
        api_level,
        intent_filters,
        classes,
    })
}

fn build_model(doc: SidecarDoc) -> Result<AppModel, AppModelError> {
    if doc.id.trim().is_empty() {
        return Err(AppModelError::MalformedSidecar("app id is empty".into()));
    }
    let mut seen_classes = HashSet::new();
    let mut classes = Vec::with_capacity(doc.classes.len());
    for class in doc.classes {
        if !seen_classes.insert(class.name.clone()) {
            return Err(AppModelError::DuplicateClass { app: doc.id.clone(), class: class.name });
        }
        let mut seen_methods = HashSet::new();
        let mut methods = Vec::with_capacity(class.methods.len());
        for method in class.methods {
            let signature: MethodSignature = method.signature.parse()?;
            if !seen_methods.insert((signature.name.clone(), signature.params.clone())) {
                return Err(AppModelError::DuplicateMethod { class: class.name.clone(), signature: signature.to_string() });
            }
            let statements = method
                .statements
                .into_iter()
                .map(|s| {
                    if let Some(callee) = &s.callee {
                        if callee.is_empty() || !s.text.contains(callee.as_str()) {
                            return Err(AppModelError::MalformedSidecar(format!(
                                "callee `{callee}` does not occur in statement `{}`",
                                s.text
                            )));
                        }
                    }
                    Ok(StatementModel { text: s.text, callee: s.callee, parameters: s.parameters })
                })
                .collect::<Result<Vec<_>, _>>()?;
            methods.push(MethodModel { signature, statements });
        }
        classes.push(ClassModel { name: class.name, origin: class.origin, methods });
    }
    let intent_filters = doc
        .intent_filters
        .into_iter()
        .map(|f| IntentFilter {
            actions: f.actions.into_iter().collect::<BTreeSet<_>>(),
            categories: f.categories.into_iter().collect(),
            data_specs: f.data,
            owner: ComponentName::new(doc.id.clone(), f.component),
        })
        .collect();
    Ok(AppModel {
        id: doc.id,
        file: doc.file,
        hashes: Vec::new(),
        hash_origin: HashOrigin::Sidecar,
        classes,
        intent_filters,
        declared_api_level: doc.api_level,
    })
}

/// Builds an app model from sidecar bytes. `base_dir` anchors a relative
/// `file` path when looking for the .apk to hash.
pub fn ingest_app_bytes(
    bytes: &[u8],
    format: SidecarFormat,
    base_dir: Option<&Path>,
    opts: &IngestOptions,
) -> Result<AppModel, AppModelError> {
    let doc = SidecarDoc::parse(bytes, format)?;
    let mut app = build_model(doc)?;

    let declared = PathBuf::from(&app.file);
    let apk_path = match base_dir {
        Some(dir) if declared.is_relative() => dir.join(&declared),
        _ => declared,
    };
    let (hashed, origin) = match fs::read(&apk_path) {
        Ok(apk) => (apk, HashOrigin::ApkFile),
        Err(_) if opts.strict => return Err(AppModelError::MissingFile(apk_path)),
        Err(_) => (bytes.to_vec(), HashOrigin::Sidecar),
    };
    if opts.with_md5 {
        app.hashes.push(hash_file(&hashed, HashAlgorithm::Md5));
    }
    app.hashes.push(hash_file(&hashed, HashAlgorithm::Sha256));
    app.hash_origin = origin;
    Ok(app)
}

pub fn ingest_app(path: &Path, opts: &IngestOptions) -> Result<AppModel, AppModelError> {
    let bytes = fs::read(path).map_err(|source| AppModelError::Io { path: path.to_path_buf(), source })?;
    let format = SidecarFormat::detect(Some(path), &bytes);
    ingest_app_bytes(&bytes, format, path.parent(), opts)
}

/// Merges several apps into one sidecar, recording each class's origin app.
/// This is the reference preprocessor for inter-app queries.
pub fn combine_apps(apps: &[AppModel], id: &str, file: &str) -> Result<SidecarDoc, AppModelError> {
    let mut combined = SidecarDoc {
        id: id.to_string(),
        file: file.to_string(),
        api_level: apps.iter().filter_map(|a| a.declared_api_level).min(),
        intent_filters: Vec::new(),
        classes: Vec::new(),
    };
    let mut seen = HashSet::new();
    for app in apps {
        let mut doc = SidecarDoc::from_model(app);
        for class in &mut doc.classes {
            if !seen.insert(class.name.clone()) {
                return Err(AppModelError::DuplicateClass { app: id.to_string(), class: class.name.clone() });
            }
            class.origin.get_or_insert_with(|| app.id.clone());
        }
        combined.intent_filters.extend(doc.intent_filters);
        combined.classes.extend(doc.classes);
    }
    Ok(combined)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL_JSON: &str = r#"{"id":"a","file":"a.apk","classes":[{"name":"A","methods":[{"signature":"void m()","statements":[{"text":"return"}]}]}]}"#;

    const XML: &str = r#"<app id="x" file="x.apk" api-level="19">
  <intent-filters>
    <intent-filter component="x.Main">
      <action>android.intent.action.SEND</action>
      <category>android.intent.category.DEFAULT</category>
      <data scheme="http" host="a.com" path="/p*"/>
    </intent-filter>
  </intent-filters>
  <classes>
    <class name="x.Main">
      <methods>
        <method signature="void onCreate(android.os.Bundle)">
          <statements>
            <statement callee="getDeviceId"><text>$r1 = virtualinvoke $r0.&lt;android.telephony.TelephonyManager: java.lang.String getDeviceId()&gt;()</text></statement>
            <statement><text>return</text><parameter>p0</parameter></statement>
          </statements>
        </method>
      </methods>
    </class>
  </classes>
</app>"#;

    #[test]
    fn minimal_sidecar() {
        let app = ingest_app_bytes(MINIMAL_JSON.as_bytes(), SidecarFormat::Json, None, &IngestOptions::default())
            .unwrap();
        assert_eq!(app.classes.len(), 1);
        assert_eq!(app.hash_origin, HashOrigin::Sidecar);
        assert_eq!(app.hashes.len(), 2);
        assert_eq!(app.sha256().unwrap(), &hash_file(MINIMAL_JSON.as_bytes(), HashAlgorithm::Sha256));
    }

    #[test]
    fn xml_sidecar() {
        let app = ingest_app_bytes(XML.as_bytes(), SidecarFormat::Xml, None, &IngestOptions::default()).unwrap();
        assert_eq!(app.declared_api_level, Some(19));
        assert_eq!(app.intent_filters.len(), 1);
        let filter = &app.intent_filters[0];
        assert_eq!(filter.owner, ComponentName::new("x", "x.Main"));
        assert_eq!(filter.data_specs[0].authority.as_deref(), Some("a.com"));
        let stmts: Vec<_> = app.statements().collect();
        assert_eq!(stmts.len(), 2);
        assert_eq!(stmts[0].1.callee.as_deref(), Some("getDeviceId"));
        assert_eq!(stmts[1].1.parameters.as_deref(), Some(&["p0".to_string()][..]));
    }

    #[test]
    fn xml_and_json_agree() {
        let xml = ingest_app_bytes(XML.as_bytes(), SidecarFormat::Xml, None, &IngestOptions::default()).unwrap();
        let json = SidecarDoc::from_model(&xml).to_json();
        let again = ingest_app_bytes(json.as_bytes(), SidecarFormat::Json, None, &IngestOptions::default()).unwrap();
        assert_eq!(xml.classes, again.classes);
        assert_eq!(xml.intent_filters, again.intent_filters);
    }

    #[test]
    fn duplicate_class_rejected() {
        let doc = r#"{"id":"a","file":"a.apk","classes":[{"name":"A"},{"name":"A"}]}"#;
        let err = ingest_app_bytes(doc.as_bytes(), SidecarFormat::Json, None, &IngestOptions::default()).unwrap_err();
        assert!(matches!(err, AppModelError::DuplicateClass { .. }));
    }

    #[test]
    fn overloads_allowed_duplicates_rejected() {
        let ok = r#"{"id":"a","file":"a.apk","classes":[{"name":"A","methods":[{"signature":"void m(int)"},{"signature":"void m()"}]}]}"#;
        assert!(ingest_app_bytes(ok.as_bytes(), SidecarFormat::Json, None, &IngestOptions::default()).is_ok());
        let dup = r#"{"id":"a","file":"a.apk","classes":[{"name":"A","methods":[{"signature":"void m(int)"},{"signature":"int m(int)"}]}]}"#;
        let err = ingest_app_bytes(dup.as_bytes(), SidecarFormat::Json, None, &IngestOptions::default()).unwrap_err();
        assert!(matches!(err, AppModelError::DuplicateMethod { .. }));
    }

    #[test]
    fn malformed_inputs() {
        let opts = IngestOptions::default();
        assert!(matches!(
            ingest_app_bytes(b"{not json", SidecarFormat::Json, None, &opts),
            Err(AppModelError::MalformedSidecar(_))
        ));
        assert!(matches!(
            ingest_app_bytes(b"<app id='a'/>", SidecarFormat::Xml, None, &opts),
            Err(AppModelError::MalformedSidecar(_))
        ));
        let bad_callee = r#"{"id":"a","file":"a.apk","classes":[{"name":"A","methods":[{"signature":"void m()","statements":[{"text":"return","callee":"foo"}]}]}]}"#;
        assert!(ingest_app_bytes(bad_callee.as_bytes(), SidecarFormat::Json, None, &opts).is_err());
    }

    #[test]
    fn strict_mode_requires_apk() {
        let dir = tempfile::tempdir().unwrap();
        let sidecar = dir.path().join("a.json");
        fs::write(&sidecar, MINIMAL_JSON).unwrap();
        let strict = IngestOptions { strict: true, ..Default::default() };
        assert!(matches!(ingest_app(&sidecar, &strict), Err(AppModelError::MissingFile(_))));

        fs::write(dir.path().join("a.apk"), b"PK\x03\x04fake").unwrap();
        let app = ingest_app(&sidecar, &strict).unwrap();
        assert_eq!(app.hash_origin, HashOrigin::ApkFile);
        assert_eq!(app.sha256().unwrap(), &hash_file(b"PK\x03\x04fake", HashAlgorithm::Sha256));
    }

    #[test]
    fn format_detection() {
        assert_eq!(SidecarFormat::detect(Some(Path::new("a.xml")), b"{"), SidecarFormat::Xml);
        assert_eq!(SidecarFormat::detect(None, b"  <app/>"), SidecarFormat::Xml);
        assert_eq!(SidecarFormat::detect(None, b"{}"), SidecarFormat::Json);
    }

    #[test]
    fn combine_records_origins() {
        let opts = IngestOptions::default();
        let a = ingest_app_bytes(MINIMAL_JSON.as_bytes(), SidecarFormat::Json, None, &opts).unwrap();
        let b = ingest_app_bytes(XML.as_bytes(), SidecarFormat::Xml, None, &opts).unwrap();
        let doc = combine_apps(&[a.clone(), b], "a+x", "combined.apk").unwrap();
        let combined = ingest_app_bytes(doc.to_json().as_bytes(), SidecarFormat::Json, None, &opts).unwrap();
        assert_eq!(combined.origin_of("A"), Some("a"));
        assert_eq!(combined.origin_of("x.Main"), Some("x"));
        assert_eq!(combined.intent_filters.len(), 1);
        assert!(combine_apps(&[a.clone(), a], "dup", "d.apk").is_err());
    }
}
