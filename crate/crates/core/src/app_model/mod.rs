//! Normalized app inventory.
//!
//! Apps are ingested from sidecar documents (JSON or XML) describing classes,
//! methods, statements and manifest intent-filters. A statement is identified
//! by `(app id, class name, method signature, statement index)`.

mod hash;
mod sidecar;
mod signature;
mod susi;

use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aql::{AppIdentifier, Reference};
use crate::intent::IntentFilter;
use crate::Strictness;

pub use hash::{hash_file, Hash, HashAlgorithm};
pub use sidecar::{combine_apps, ingest_app, ingest_app_bytes, IngestOptions, SidecarDoc, SidecarFormat};
pub(crate) use signature::split_params;
pub use signature::{find_jimple_method, parse_jimple_method, MethodSignature};
pub use susi::{CandidateKind, ListEntry, ListParseError, ParamSpec, SourceSinkList};

#[derive(Debug, Error)]
pub enum AppModelError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed sidecar: {0}")]
    MalformedSidecar(String),
    #[error("duplicate class `{class}` in app `{app}`")]
    DuplicateClass { app: String, class: String },
    #[error("duplicate method `{signature}` in class `{class}`")]
    DuplicateMethod { class: String, signature: String },
    #[error("malformed method signature `{0}`")]
    BadSignature(String),
    #[error("invalid hash: {0}")]
    InvalidHash(String),
    #[error("app file {0} does not exist")]
    MissingFile(PathBuf),
}

/// Where an app's hashes were computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HashOrigin {
    ApkFile,
    Sidecar,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatementModel {
    pub text: String,
    pub callee: Option<String>,
    pub parameters: Option<Vec<String>>,
}

impl StatementModel {
    /// Parameter types of the invoked method, taken from the Jimple method
    /// reference embedded in the statement text.
    pub fn invoked_param_types(&self) -> Option<Vec<String>> {
        let callee = self.callee.as_deref()?;
        find_jimple_method(&self.text)
            .filter(|(_, sig)| sig.name == callee)
            .map(|(_, sig)| sig.params)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodModel {
    pub signature: MethodSignature,
    pub statements: Vec<StatementModel>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassModel {
    pub name: String,
    /// App id the class came from when this model is a combination of apps.
    pub origin: Option<String>,
    pub methods: Vec<MethodModel>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppModel {
    pub id: String,
    /// The .apk path as declared by the sidecar; this is what queries name.
    pub file: String,
    pub hashes: Vec<Hash>,
    pub hash_origin: HashOrigin,
    pub classes: Vec<ClassModel>,
    pub intent_filters: Vec<IntentFilter>,
    pub declared_api_level: Option<u32>,
}

/// Identity of one statement within a loaded set of apps.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StatementRef {
    pub app: String,
    pub class: String,
    pub method: String,
    pub index: usize,
}

impl fmt::Display for StatementRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}#{}", self.app, self.class, self.method, self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Candidate {
    pub stmt: StatementRef,
    pub kind: CandidateKind,
}

impl AppModel {
    pub fn identifier(&self) -> AppIdentifier {
        AppIdentifier::new(self.file.clone(), self.hashes.clone())
    }

    pub fn sha256(&self) -> Option<&Hash> {
        self.hashes.iter().find(|h| h.algorithm == HashAlgorithm::Sha256)
    }

    /// All statements in declaration order (class, method, statement).
    pub fn statements(&self) -> impl Iterator<Item = (StatementRef, &StatementModel)> + '_ {
        self.classes.iter().flat_map(move |class| {
            class.methods.iter().flat_map(move |method| {
                let sig = method.signature.to_string();
                method.statements.iter().enumerate().map(move |(index, stmt)| {
                    let r = StatementRef {
                        app: self.id.clone(),
                        class: class.name.clone(),
                        method: sig.clone(),
                        index,
                    };
                    (r, stmt)
                })
            })
        })
    }

    pub fn class(&self, name: &str) -> Option<&ClassModel> {
        self.classes.iter().find(|c| c.name == name)
    }

    pub fn statement(&self, r: &StatementRef) -> Option<&StatementModel> {
        if r.app != self.id {
            return None;
        }
        self.class(&r.class)?
            .methods
            .iter()
            .find(|m| m.signature.to_string() == r.method)?
            .statements
            .get(r.index)
    }

    /// Fully resolved AQL reference for a statement of this app.
    pub fn reference(&self, r: &StatementRef) -> Option<Reference> {
        let stmt = self.statement(r)?;
        Some(Reference::statement_in(&stmt.text, &r.method, &r.class, self.identifier()))
    }

    /// Owning app id of a class, following combination origins.
    pub fn origin_of(&self, class: &str) -> Option<&str> {
        self.class(class).map(|c| c.origin.as_deref().unwrap_or(&self.id))
    }
}

fn entry_matches(entry: &ListEntry, stmt: &StatementModel, strictness: Strictness) -> bool {
    if stmt.callee.as_deref() != Some(entry.name.as_str()) {
        return false;
    }
    match (strictness, &entry.params) {
        (Strictness::NameOnly, _) | (_, ParamSpec::Any) => true,
        (Strictness::Exact, ParamSpec::Exact(types)) => {
            stmt.invoked_param_types().is_some_and(|actual| &actual == types)
        }
    }
}

/// Statements of `app` whose callee appears in `list`, in declaration order.
/// A statement listed as both source and sink yields two candidates.
pub fn scan_candidates(app: &AppModel, list: &SourceSinkList, strictness: Strictness) -> Vec<Candidate> {
    let mut out = Vec::new();
    for (stmt_ref, stmt) in app.statements() {
        for kind in [CandidateKind::Source, CandidateKind::Sink] {
            let hit = list
                .entries
                .iter()
                .any(|e| e.kind == kind && entry_matches(e, stmt, strictness));
            if hit {
                out.push(Candidate { stmt: stmt_ref.clone(), kind });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const DIRECT_LEAK: &str = r#"{
      "id": "DirectLeak1",
      "file": "/path/to/DirectLeak1.apk",
      "classes": [{
        "name": "de.ecspride.MainActivity",
        "methods": [{
          "signature": "void onCreate(android.os.Bundle)",
          "statements": [
            {"text": "$r3 = virtualinvoke $r0.<de.ecspride.MainActivity: java.lang.Object getSystemService(java.lang.String)>(\"phone\")", "callee": "getSystemService"},
            {"text": "$r4 = virtualinvoke $r3.<android.telephony.TelephonyManager: java.lang.String getDeviceId()>()", "callee": "getDeviceId"},
            {"text": "virtualinvoke $r6.<android.telephony.SmsManager: void sendTextMessage(java.lang.String,java.lang.String,java.lang.String,android.app.PendingIntent,android.app.PendingIntent)>(\"+49 1234\", null, $r4, null, null)", "callee": "sendTextMessage"}
          ]
        }]
      }]
    }"#;

    fn app() -> AppModel {
        ingest_app_bytes(DIRECT_LEAK.as_bytes(), SidecarFormat::Json, None, &IngestOptions::default()).unwrap()
    }

    #[test]
    fn scan_direct_leak_exact() {
        let list = SourceSinkList::parse(
            "getDeviceId() -> SOURCE\nsendTextMessage(java.lang.String,java.lang.String,java.lang.String,android.app.PendingIntent,android.app.PendingIntent) -> SINK\n",
        )
        .unwrap();
        let c = scan_candidates(&app(), &list, Strictness::Exact);
        assert_eq!(c.len(), 2);
        assert_eq!((c[0].stmt.index, c[0].kind), (1, CandidateKind::Source));
        assert_eq!((c[1].stmt.index, c[1].kind), (2, CandidateKind::Sink));
    }

    #[test]
    fn strict_mode_checks_parameters() {
        let list = SourceSinkList::parse("sendTextMessage(java.lang.String) -> SINK").unwrap();
        assert!(scan_candidates(&app(), &list, Strictness::Exact).is_empty());
        assert_eq!(scan_candidates(&app(), &list, Strictness::NameOnly).len(), 1);
    }

    #[test]
    fn empty_list_gives_no_candidates() {
        assert!(scan_candidates(&app(), &SourceSinkList::default(), Strictness::Exact).is_empty());
    }

    #[test]
    fn source_and_sink_at_once() {
        let list = SourceSinkList::parse("getDeviceId(...) -> SOURCE\ngetDeviceId(...) -> SINK").unwrap();
        let c = scan_candidates(&app(), &list, Strictness::Exact);
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].stmt, c[1].stmt);
    }

    #[test]
    fn references_resolve() {
        let app = app();
        let (r, _) = app.statements().nth(1).unwrap();
        let reference = app.reference(&r).unwrap();
        assert_eq!(reference.classname.as_deref(), Some("de.ecspride.MainActivity"));
        assert_eq!(reference.method.as_deref(), Some("void onCreate(android.os.Bundle)"));
        assert_eq!(reference.app.file, "/path/to/DirectLeak1.apk");
        let dangling = StatementRef { index: 9, ..r };
        assert!(app.reference(&dangling).is_none());
    }
}
