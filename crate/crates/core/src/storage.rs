//! Versioned document store with compare-and-set writes and a content
//! addressed blob store.
//!
//! Every document carries a revision starting at 1. A write names the
//! revision it expects to replace (or `None` to create) and fails with
//! [`StorageError::Conflict`] when another writer got there first. That is
//! the only mutation primitive the rest of the platform relies on.
//!
//! Two implementations are provided: [`MemoryStore`] and [`FileStore`], the
//! latter persisting a snapshot after every successful mutation. Snapshots
//! share one line-oriented format:
//!
//! ```text
//! CSSTORE1 <sha256 hex of everything after the first newline>
//! {"kind":"doc","collection":"complaints","key":"C-1","revision":2,"body":{...}}
//! {"kind":"blob","id":"<sha256>","media_type":"image/png","data":"<base64>"}
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const SNAPSHOT_MAGIC: &str = "CSSTORE1";

#[derive(Debug, thiserror::Error)]
pub enum StorageError {
    #[error("revision conflict on {collection}/{key}: expected {expected:?}, found {actual}")]
    Conflict {
        collection: String,
        key: String,
        expected: Option<u64>,
        actual: u64,
    },
    #[error("document {collection}/{key} already exists")]
    AlreadyExists { collection: String, key: String },
    #[error("{0} not found")]
    NotFound(String),
    #[error("blob must not be empty")]
    EmptyBlob,
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
    #[error("i/o failure: {0}")]
    Io(#[from] io::Error),
    #[error("document body could not be encoded: {0}")]
    Encoding(#[from] serde_json::Error),
}

pub type Result<T, E = StorageError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub collection: String,
    pub key: String,
    pub body: Value,
    pub revision: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlobRef {
    pub id: String,
    pub len: u64,
    pub media_type: String,
}

pub trait DocumentStore: Send + Sync {
    /// Creates (`expected_revision = None`) or replaces a document.
    fn put(
        &self,
        collection: &str,
        key: &str,
        body: Value,
        expected_revision: Option<u64>,
    ) -> Result<Document>;

    fn get(&self, collection: &str, key: &str) -> Result<Document>;

    /// Point-in-time consistent scan of one collection, ordered by key.
    fn query(
        &self,
        collection: &str,
        predicate: &dyn Fn(&Document) -> bool,
    ) -> Result<Vec<Document>>;

    fn delete(&self, collection: &str, key: &str, expected_revision: u64) -> Result<()>;

    fn put_blob(&self, bytes: &[u8], media_type: &str) -> Result<BlobRef>;

    fn get_blob(&self, blob: &BlobRef) -> Result<Vec<u8>>;

    fn snapshot_to_file(&self, path: &Path) -> Result<()>;

    /// Replaces the whole store state with the snapshot. On any error the
    /// current state is left untouched.
    fn load_from_file(&self, path: &Path) -> Result<()>;
}

#[derive(Debug, Clone, PartialEq)]
struct StoredBlob {
    media_type: String,
    bytes: Vec<u8>,
}

#[derive(Debug, Clone, Default, PartialEq)]
struct State {
    collections: BTreeMap<String, BTreeMap<String, (Value, u64)>>,
    blobs: BTreeMap<String, StoredBlob>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum SnapshotLine {
    Doc {
        collection: String,
        key: String,
        revision: u64,
        body: Value,
    },
    Blob {
        id: String,
        media_type: String,
        data: String,
    },
}

impl State {
    fn get(&self, collection: &str, key: &str) -> Result<Document> {
        self.collections
            .get(collection)
            .and_then(|docs| docs.get(key))
            .map(|(body, revision)| Document {
                collection: collection.into(),
                key: key.into(),
                body: body.clone(),
                revision: *revision,
            })
            .ok_or_else(|| StorageError::NotFound(format!("{collection}/{key}")))
    }

    fn query(&self, collection: &str, predicate: &dyn Fn(&Document) -> bool) -> Vec<Document> {
        let Some(docs) = self.collections.get(collection) else {
            return Vec::new();
        };
        docs.iter()
            .map(|(key, (body, revision))| Document {
                collection: collection.into(),
                key: key.clone(),
                body: body.clone(),
                revision: *revision,
            })
            .filter(|doc| predicate(doc))
            .collect()
    }

    fn get_blob(&self, blob: &BlobRef) -> Result<Vec<u8>> {
        self.blobs
            .get(&blob.id)
            .map(|b| b.bytes.clone())
            .ok_or_else(|| StorageError::NotFound(format!("blob {}", blob.id)))
    }

    fn put(
        &mut self,
        collection: &str,
        key: &str,
        body: Value,
        expected: Option<u64>,
    ) -> Result<Document> {
        let docs = self.collections.entry(collection.to_string()).or_default();
        let revision = match (docs.get(key), expected) {
            (None, None) => 1,
            (Some(_), None) => {
                return Err(StorageError::AlreadyExists {
                    collection: collection.into(),
                    key: key.into(),
                })
            }
            (None, Some(_)) => return Err(StorageError::NotFound(format!("{collection}/{key}"))),
            (Some((_, current)), Some(expected)) if *current == expected => current + 1,
            (Some((_, current)), Some(_)) => {
                return Err(StorageError::Conflict {
                    collection: collection.into(),
                    key: key.into(),
                    expected,
                    actual: *current,
                })
            }
        };
        docs.insert(key.to_string(), (body.clone(), revision));
        Ok(Document {
            collection: collection.into(),
            key: key.into(),
            body,
            revision,
        })
    }

    fn delete(&mut self, collection: &str, key: &str, expected: u64) -> Result<()> {
        let not_found = || StorageError::NotFound(format!("{collection}/{key}"));
        let docs = self.collections.get_mut(collection).ok_or_else(not_found)?;
        let (_, current) = docs.get(key).ok_or_else(not_found)?;
        if *current != expected {
            return Err(StorageError::Conflict {
                collection: collection.into(),
                key: key.into(),
                expected: Some(expected),
                actual: *current,
            });
        }
        docs.remove(key);
        if docs.is_empty() {
            self.collections.remove(collection);
        }
        Ok(())
    }

    fn put_blob(&mut self, bytes: &[u8], media_type: &str) -> Result<BlobRef> {
        if bytes.is_empty() {
            return Err(StorageError::EmptyBlob);
        }
        let id = content_id(bytes);
        let stored = self.blobs.entry(id.clone()).or_insert_with(|| StoredBlob {
            media_type: media_type.to_string(),
            bytes: bytes.to_vec(),
        });
        Ok(BlobRef {
            id,
            len: bytes.len() as u64,
            media_type: stored.media_type.clone(),
        })
    }

    fn encode(&self) -> Result<String> {
        let mut body = String::new();
        for (collection, docs) in &self.collections {
            for (key, (value, revision)) in docs {
                let line = SnapshotLine::Doc {
                    collection: collection.clone(),
                    key: key.clone(),
                    revision: *revision,
                    body: value.clone(),
                };
                body.push_str(&serde_json::to_string(&line)?);
                body.push('\n');
            }
        }
        for (id, blob) in &self.blobs {
            let line = SnapshotLine::Blob {
                id: id.clone(),
                media_type: blob.media_type.clone(),
                data: BASE64.encode(&blob.bytes),
            };
            body.push_str(&serde_json::to_string(&line)?);
            body.push('\n');
        }
        let digest = hex::encode(Sha256::digest(body.as_bytes()));
        Ok(format!("{SNAPSHOT_MAGIC} {digest}\n{body}"))
    }

    fn decode(text: &str) -> Result<State> {
        let corrupt = |msg: String| StorageError::CorruptSnapshot(msg);
        let (header, body) = text
            .split_once('\n')
            .ok_or_else(|| corrupt("missing header line".into()))?;
        let digest = header
            .strip_prefix(SNAPSHOT_MAGIC)
            .and_then(|rest| rest.strip_prefix(' '))
            .ok_or_else(|| corrupt(format!("bad header {header:?}")))?;
        let actual = hex::encode(Sha256::digest(body.as_bytes()));
        if digest != actual {
            return Err(corrupt("checksum mismatch".into()));
        }
        let mut state = State::default();
        for (n, line) in body.lines().enumerate() {
            let parsed: SnapshotLine =
                serde_json::from_str(line).map_err(|e| corrupt(format!("line {}: {e}", n + 2)))?;
            match parsed {
                SnapshotLine::Doc {
                    collection,
                    key,
                    revision,
                    body,
                } => {
                    if revision == 0 {
                        return Err(corrupt(format!("line {}: revision 0", n + 2)));
                    }
                    state
                        .collections
                        .entry(collection)
                        .or_default()
                        .insert(key, (body, revision));
                }
                SnapshotLine::Blob {
                    id,
                    media_type,
                    data,
                } => {
                    let bytes = BASE64
                        .decode(data)
                        .map_err(|e| corrupt(format!("line {}: {e}", n + 2)))?;
                    if content_id(&bytes) != id {
                        return Err(corrupt(format!("line {}: blob id mismatch", n + 2)));
                    }
                    state.blobs.insert(id, StoredBlob { media_type, bytes });
                }
            }
        }
        Ok(state)
    }
}

fn content_id(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_atomically(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// In-memory store guarded by a single reader-writer lock.
#[derive(Debug, Default)]
pub struct MemoryStore {
    state: RwLock<State>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Serialized snapshot text, identical to what [`DocumentStore::snapshot_to_file`] writes.
    pub fn snapshot_text(&self) -> Result<String> {
        self.state.read().encode()
    }

    pub fn document_count(&self) -> usize {
        self.state
            .read()
            .collections
            .values()
            .map(BTreeMap::len)
            .sum()
    }
}

impl DocumentStore for MemoryStore {
    fn put(
        &self,
        collection: &str,
        key: &str,
        body: Value,
        expected_revision: Option<u64>,
    ) -> Result<Document> {
        self.state
            .write()
            .put(collection, key, body, expected_revision)
    }

    fn get(&self, collection: &str, key: &str) -> Result<Document> {
        self.state.read().get(collection, key)
    }

    fn query(
        &self,
        collection: &str,
        predicate: &dyn Fn(&Document) -> bool,
    ) -> Result<Vec<Document>> {
        Ok(self.state.read().query(collection, predicate))
    }

    fn delete(&self, collection: &str, key: &str, expected_revision: u64) -> Result<()> {
        self.state
            .write()
            .delete(collection, key, expected_revision)
    }

    fn put_blob(&self, bytes: &[u8], media_type: &str) -> Result<BlobRef> {
        self.state.write().put_blob(bytes, media_type)
    }

    fn get_blob(&self, blob: &BlobRef) -> Result<Vec<u8>> {
        self.state.read().get_blob(blob)
    }

    fn snapshot_to_file(&self, path: &Path) -> Result<()> {
        let text = self.snapshot_text()?;
        write_atomically(path, &text)
    }

    fn load_from_file(&self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path)?;
        let loaded = State::decode(&text)?;
        *self.state.write() = loaded;
        Ok(())
    }
}

/// Store that keeps its state in memory and rewrites a snapshot file after
/// each successful mutation.
#[derive(Debug)]
pub struct FileStore {
    path: PathBuf,
    state: RwLock<State>,
}

impl FileStore {
    /// Opens the snapshot at `path`, starting empty if the file does not exist yet.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let state = match fs::read_to_string(&path) {
            Ok(text) => State::decode(&text)?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => State::default(),
            Err(e) => return Err(e.into()),
        };
        Ok(Self {
            path,
            state: RwLock::new(state),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn mutate<T>(&self, op: impl FnOnce(&mut State) -> Result<T>) -> Result<T> {
        let mut state = self.state.write();
        let mut next = state.clone();
        let out = op(&mut next)?;
        write_atomically(&self.path, &next.encode()?)?;
        *state = next;
        Ok(out)
    }
}

impl DocumentStore for FileStore {
    fn put(
        &self,
        collection: &str,
        key: &str,
        body: Value,
        expected_revision: Option<u64>,
    ) -> Result<Document> {
        self.mutate(|s| s.put(collection, key, body, expected_revision))
    }

    fn get(&self, collection: &str, key: &str) -> Result<Document> {
        self.state.read().get(collection, key)
    }

    fn query(
        &self,
        collection: &str,
        predicate: &dyn Fn(&Document) -> bool,
    ) -> Result<Vec<Document>> {
        Ok(self.state.read().query(collection, predicate))
    }

    fn delete(&self, collection: &str, key: &str, expected_revision: u64) -> Result<()> {
        self.mutate(|s| s.delete(collection, key, expected_revision))
    }

    fn put_blob(&self, bytes: &[u8], media_type: &str) -> Result<BlobRef> {
        if bytes.is_empty() {
            return Err(StorageError::EmptyBlob);
        }
        if self.state.read().blobs.contains_key(&content_id(bytes)) {
            return self.state.write().put_blob(bytes, media_type);
        }
        self.mutate(|s| s.put_blob(bytes, media_type))
    }

    fn get_blob(&self, blob: &BlobRef) -> Result<Vec<u8>> {
        self.state.read().get_blob(blob)
    }

    fn snapshot_to_file(&self, path: &Path) -> Result<()> {
        let text = self.state.read().encode()?;
        write_atomically(path, &text)
    }

    fn load_from_file(&self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path)?;
        let loaded = State::decode(&text)?;
        self.mutate(|s| {
            *s = loaded;
            Ok(())
        })
    }
}
