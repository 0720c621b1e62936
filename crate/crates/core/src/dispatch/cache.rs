//! Content-addressed store of canonical answer bytes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use sha2::{Digest, Sha256};

use crate::aql::print_query;
use crate::aql::QueryAst;

/// SHA-256 over the canonical query text, the tool's name and version and the
/// sorted SHA-256 hashes of the apps involved.
pub fn cache_key(query: &QueryAst, tool: &str, version: &str, app_hashes: &[String]) -> String {
    let mut hashes = app_hashes.to_vec();
    hashes.sort();
    let mut h = Sha256::new();
    for part in [print_query(query).as_str(), tool, version] {
        h.update(part.as_bytes());
        h.update([0]);
    }
    for hash in &hashes {
        h.update(hash.as_bytes());
        h.update([0]);
    }
    hex::encode(h.finalize())
}

/// Cache entries live in `<dir>/<key>.xml`. Reads are shared, writes are
/// exclusive and land through a rename so readers never see partial files.
#[derive(Debug)]
pub struct AnswerCache {
    dir: PathBuf,
    lock: RwLock<()>,
}

impl AnswerCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        AnswerCache { dir: dir.into(), lock: RwLock::new(()) }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.xml"))
    }

    pub fn get(&self, key: &str) -> Option<Vec<u8>> {
        let _guard = self.lock.read().expect("cache lock poisoned");
        fs::read(self.path_for(key)).ok()
    }

    pub fn put(&self, key: &str, bytes: &[u8]) -> std::io::Result<PathBuf> {
        let _guard = self.lock.write().expect("cache lock poisoned");
        fs::create_dir_all(&self.dir)?;
        let target = self.path_for(key);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(bytes)?;
        tmp.persist(&target).map_err(|e| e.error)?;
        Ok(target)
    }
}
