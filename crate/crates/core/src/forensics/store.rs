//! Content-addressed off-chain blob storage.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use crate::types::Hash32;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("a different blob is already stored under {0}")]
    Conflict(Hash32),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

/// Writes are idempotent for identical bytes and rejected otherwise.
pub trait OffChainStore: Send + Sync {
    fn put(&self, key: &Hash32, blob: &[u8]) -> Result<(), StoreError>;
    fn get(&self, key: &Hash32) -> Result<Option<Vec<u8>>, StoreError>;
    fn remove(&self, key: &Hash32) -> Result<bool, StoreError>;
    fn keys(&self) -> Result<Vec<Hash32>, StoreError>;
}

#[derive(Debug, Default)]
pub struct MemStore {
    blobs: RwLock<BTreeMap<Hash32, Vec<u8>>>,
}

impl MemStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Overwrites a blob; only tamper tests need this.
    pub fn overwrite(&self, key: &Hash32, blob: Vec<u8>) {
        self.blobs.write().unwrap().insert(*key, blob);
    }
}

impl OffChainStore for MemStore {
    fn put(&self, key: &Hash32, blob: &[u8]) -> Result<(), StoreError> {
        let mut m = self.blobs.write().unwrap();
        match m.get(key) {
            Some(existing) if existing != blob => Err(StoreError::Conflict(*key)),
            Some(_) => Ok(()),
            None => {
                m.insert(*key, blob.to_vec());
                Ok(())
            }
        }
    }

    fn get(&self, key: &Hash32) -> Result<Option<Vec<u8>>, StoreError> {
        Ok(self.blobs.read().unwrap().get(key).cloned())
    }

    fn remove(&self, key: &Hash32) -> Result<bool, StoreError> {
        Ok(self.blobs.write().unwrap().remove(key).is_some())
    }

    fn keys(&self) -> Result<Vec<Hash32>, StoreError> {
        Ok(self.blobs.read().unwrap().keys().copied().collect())
    }
}

/// One file per blob, named by the hex key without prefix.
#[derive(Debug, Clone)]
pub struct DirStore {
    root: PathBuf,
}

impl DirStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(DirStore { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_of(&self, key: &Hash32) -> PathBuf {
        self.root.join(hex::encode(key.0))
    }
}

impl OffChainStore for DirStore {
    fn put(&self, key: &Hash32, blob: &[u8]) -> Result<(), StoreError> {
        let path = self.path_of(key);
        match fs::read(&path) {
            Ok(existing) if existing == blob => return Ok(()),
            Ok(_) => return Err(StoreError::Conflict(*key)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => return Err(e.into()),
        }
        // Write to a sibling then rename so readers never see a partial blob.
        let tmp = path.with_extension("tmp");
        let mut f = fs::File::create(&tmp)?;
        f.write_all(blob)?;
        f.sync_all()?;
        fs::rename(&tmp, &path)?;
        Ok(())
    }

    fn get(&self, key: &Hash32) -> Result<Option<Vec<u8>>, StoreError> {
        match fs::read(self.path_of(key)) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }

    fn remove(&self, key: &Hash32) -> Result<bool, StoreError> {
        match fs::remove_file(self.path_of(key)) {
            Ok(()) => Ok(true),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(false),
            Err(e) => Err(e.into()),
        }
    }

    fn keys(&self) -> Result<Vec<Hash32>, StoreError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let name = entry?.file_name();
            if let Some(k) = name.to_str().and_then(|s| s.parse::<Hash32>().ok()) {
                out.push(k);
            }
        }
        out.sort();
        Ok(out)
    }
}
