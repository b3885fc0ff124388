use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::IngestError;

/// A stored response body together with the HTTP status it arrived with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CachedResponse {
    pub status: u16,
    pub body: Vec<u8>,
}

/// Content-addressed response store.
///
/// Entries live at `<root>/<endpoint>/<aa>/<sha256>.<status>` where the digest
/// covers the endpoint name and the normalized query. Writers create a unique
/// temporary file next to the target and rename it into place, so concurrent
/// writers of the same key never expose a partial file.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    root: PathBuf,
}

/// Statuses worth persisting: successful bodies and definitive "no such page" answers.
const CACHEABLE: [u16; 2] = [200, 404];

impl ResponseCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ResponseCache { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn key(endpoint: &str, query: &str) -> String {
        let mut hasher = Sha256::new();
        hasher.update(endpoint.as_bytes());
        hasher.update(b"\n");
        hasher.update(query.as_bytes());
        hex::encode(hasher.finalize())
    }

    fn entry_path(&self, endpoint: &str, key: &str, status: u16) -> PathBuf {
        self.root.join(endpoint).join(&key[..2]).join(format!("{key}.{status}"))
    }

    pub fn get(&self, endpoint: &str, query: &str) -> Result<Option<CachedResponse>, IngestError> {
        let key = Self::key(endpoint, query);
        for status in CACHEABLE {
            let path = self.entry_path(endpoint, &key, status);
            match fs::read(&path) {
                Ok(body) => return Ok(Some(CachedResponse { status, body })),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => continue,
                Err(e) => return Err(IngestError::io(&path, e)),
            }
        }
        Ok(None)
    }

    /// Persists a response. Statuses other than 200 and 404 are ignored.
    pub fn put(&self, endpoint: &str, query: &str, response: &CachedResponse) -> Result<(), IngestError> {
        if !CACHEABLE.contains(&response.status) {
            return Ok(());
        }
        let key = Self::key(endpoint, query);
        let path = self.entry_path(endpoint, &key, response.status);
        let dir = path.parent().expect("entry path has a parent");
        fs::create_dir_all(dir).map_err(|e| IngestError::io(dir, e))?;

        let tmp = dir.join(format!(
            ".{key}.{}.{:?}.tmp",
            std::process::id(),
            std::thread::current().id()
        ));
        let write = || -> std::io::Result<()> {
            let mut file = fs::File::create(&tmp)?;
            file.write_all(&response.body)?;
            file.sync_all()?;
            fs::rename(&tmp, &path)
        };
        write().map_err(|e| {
            let _ = fs::remove_file(&tmp);
            IngestError::io(&path, e)
        })
    }
}
