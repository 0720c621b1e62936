#![allow(dead_code)]

pub mod gen;
pub mod intents;
pub mod matching;
pub mod scenarios;

use std::path::PathBuf;

use aql_core::app_model::{ingest_app, AppModel, IngestOptions, SourceSinkList};

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn app(name: &str) -> AppModel {
    ingest_app(&fixtures().join("apps").join(format!("{name}.json")), &IngestOptions::default()).unwrap()
}

pub fn susi() -> SourceSinkList {
    SourceSinkList::parse(&std::fs::read_to_string(fixtures().join("susi.txt")).unwrap()).unwrap()
}

pub fn raw(name: &str) -> Vec<u8> {
    std::fs::read(fixtures().join("raw").join(name)).unwrap()
}

/// Compares against a checked-in file; `UPDATE_GOLDEN=1` rewrites it instead.
pub fn assert_golden(rel: &str, actual: &[u8]) {
    let path = fixtures().join(rel);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(
        expected == actual,
        "{rel} differs:\n--- expected\n{}\n--- actual\n{}",
        String::from_utf8_lossy(&expected),
        String::from_utf8_lossy(actual)
    );
}
