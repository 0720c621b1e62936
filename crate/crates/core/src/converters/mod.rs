//! Translators from tool-native result formats into answers.
//!
//! A converter is a [`RawParser`] that extracts loosely specified endpoints
//! from raw bytes; resolution against the analyzed apps is shared. Two
//! reference formats ship with the registry:
//!
//! * `sink-xml` - sink-centric XML, one `<Result>` per sink listing its sources.
//! * `flow-tuple` - one `(app, source, sink)` tuple per line.

mod flow_tuple;
mod resolve;
mod sink_xml;

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::app_model::{AppModel, MethodSignature};
use crate::aql::Answer;
use crate::Strictness;

pub use flow_tuple::FlowTupleParser;
pub use resolve::{callee_of, resolve_flows};
pub use sink_xml::SinkXmlParser;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConvertError {
    #[error("no converter registered under `{0}`")]
    UnknownConverter(String),
    #[error("converter id `{0}` is already registered")]
    DuplicateConverterId(String),
    #[error("unparsable tool output at byte {offset}: {message}")]
    UnparsableOutput { offset: usize, message: String },
    #[error("cannot resolve endpoint {endpoint}: {reason}")]
    UnresolvableEndpoint { endpoint: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConverterSpec {
    pub id: String,
    pub description: String,
    pub strictness: Strictness,
}

/// One endpoint as far as a raw format describes it. Missing fields are
/// filled in (or rejected) during resolution.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawEndpoint {
    pub app: Option<String>,
    pub class: Option<String>,
    pub method: Option<MethodSignature>,
    pub statement: Option<String>,
    pub callee: Option<String>,
    /// Parameter types of the invoked method, when the format states them.
    pub params: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawFlow {
    pub source: RawEndpoint,
    pub sink: RawEndpoint,
    /// Byte offset of the flow in the raw output, for diagnostics.
    pub offset: usize,
}

pub trait RawParser: Send + Sync {
    fn parse(&self, raw: &[u8]) -> Result<Vec<RawFlow>, ConvertError>;
}

struct Registered {
    spec: ConverterSpec,
    parser: Arc<dyn RawParser>,
}

/// Append-only converter registry, safe for concurrent readers.
#[derive(Default)]
pub struct ConverterRegistry {
    entries: RwLock<BTreeMap<String, Registered>>,
}

impl ConverterRegistry {
    pub fn new() -> Self {
        ConverterRegistry::default()
    }

    pub fn with_defaults() -> Self {
        let registry = ConverterRegistry::new();
        registry
            .register(
                ConverterSpec {
                    id: "sink-xml".into(),
                    description: "sink-centric XML: each result names a sink and the sources reaching it".into(),
                    strictness: Strictness::Exact,
                },
                Arc::new(SinkXmlParser),
            )
            .expect("fresh registry");
        registry
            .register(
                ConverterSpec {
                    id: "flow-tuple".into(),
                    description: "flow tuples `(app, Class.source, Class.sink)`, one per line".into(),
                    strictness: Strictness::NameOnly,
                },
                Arc::new(FlowTupleParser),
            )
            .expect("fresh registry");
        registry
    }

    pub fn register(&self, spec: ConverterSpec, parser: Arc<dyn RawParser>) -> Result<(), ConvertError> {
        let mut entries = self.entries.write().expect("registry lock poisoned");
        if entries.contains_key(&spec.id) {
            return Err(ConvertError::DuplicateConverterId(spec.id));
        }
        entries.insert(spec.id.clone(), Registered { spec, parser });
        Ok(())
    }

    pub fn contains(&self, id: &str) -> bool {
        self.entries.read().expect("registry lock poisoned").contains_key(id)
    }

    pub fn spec(&self, id: &str) -> Option<ConverterSpec> {
        self.entries.read().expect("registry lock poisoned").get(id).map(|r| r.spec.clone())
    }

    /// Registered converters sorted by id.
    pub fn list(&self) -> Vec<ConverterSpec> {
        self.entries.read().expect("registry lock poisoned").values().map(|r| r.spec.clone()).collect()
    }

    /// Converts with the converter's declared strictness.
    pub fn convert(&self, id: &str, raw: &[u8], context: &[AppModel]) -> Result<Answer, ConvertError> {
        let spec = self.spec(id).ok_or_else(|| ConvertError::UnknownConverter(id.to_string()))?;
        self.convert_with(id, raw, context, spec.strictness)
    }

    pub fn convert_with(
        &self,
        id: &str,
        raw: &[u8],
        context: &[AppModel],
        strictness: Strictness,
    ) -> Result<Answer, ConvertError> {
        let parser = {
            let entries = self.entries.read().expect("registry lock poisoned");
            let entry = entries.get(id).ok_or_else(|| ConvertError::UnknownConverter(id.to_string()))?;
            Arc::clone(&entry.parser)
        };
        let flows = parser.parse(raw)?;
        resolve_flows(&flows, context, strictness)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Nothing;

    impl RawParser for Nothing {
        fn parse(&self, _raw: &[u8]) -> Result<Vec<RawFlow>, ConvertError> {
            Ok(Vec::new())
        }
    }

    fn spec(id: &str) -> ConverterSpec {
        ConverterSpec { id: id.into(), description: String::new(), strictness: Strictness::Exact }
    }

    #[test]
    fn register_then_convert() {
        let r = ConverterRegistry::new();
        r.register(spec("nothing"), Arc::new(Nothing)).unwrap();
        assert!(r.convert("nothing", b"", &[]).unwrap().is_empty());
    }

    #[test]
    fn duplicate_id_rejected() {
        let r = ConverterRegistry::new();
        r.register(spec("x"), Arc::new(Nothing)).unwrap();
        assert_eq!(
            r.register(spec("x"), Arc::new(Nothing)).unwrap_err(),
            ConvertError::DuplicateConverterId("x".into())
        );
    }

    #[test]
    fn unknown_converter() {
        let r = ConverterRegistry::with_defaults();
        assert_eq!(r.convert("nope", b"", &[]).unwrap_err(), ConvertError::UnknownConverter("nope".into()));
    }

    #[test]
    fn listing_is_sorted_for_any_registration_order() {
        use proptest::prelude::*;
        proptest!(|(ids in proptest::collection::btree_set("[a-z]{1,6}", 1..8), seed in any::<u64>())| {
            let mut order: Vec<String> = ids.iter().cloned().collect();
            // deterministic shuffle driven by the seed
            let n = order.len();
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                order.swap(i, (s >> 33) as usize % (i + 1));
            }
            let r = ConverterRegistry::new();
            for id in &order {
                r.register(spec(id), Arc::new(Nothing)).unwrap();
            }
            let listed: Vec<String> = r.list().into_iter().map(|s| s.id).collect();
            prop_assert_eq!(listed, ids.into_iter().collect::<Vec<_>>());
        });
    }
}
