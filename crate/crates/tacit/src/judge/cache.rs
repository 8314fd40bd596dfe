//! Content-addressed response cache: one file per request key.
//!
//! File layout: a one-line JSON metadata header followed by the raw response
//! bytes. Writes go through a temp file and rename, so concurrent writers of
//! identical content are idempotent (last write wins).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Header stored with every cached response.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheMeta {
    pub model_id: String,
    pub temperature: f64,
    pub fold_nonce: u64,
    /// Transport/parse attempts consumed before this response was final.
    pub attempts: u32,
}

/// A cached response.
#[derive(Debug, Clone)]
pub struct CacheEntry {
    pub meta: CacheMeta,
    pub raw_text: String,
}

/// Directory-backed cache keyed by request content hash.
#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn open(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(ResponseCache {
            dir: dir.to_path_buf(),
        })
    }

    /// Cache key over everything that determines a response.
    pub fn key(model_id: &str, rendered_prompt: &str, temperature: f64, fold_nonce: u64) -> String {
        let mut hasher = Sha256::new();
        for part in [
            model_id,
            rendered_prompt,
            &format!("{temperature:?}"),
            &fold_nonce.to_string(),
        ] {
            hasher.update((part.len() as u64).to_le_bytes());
            hasher.update(part.as_bytes());
        }
        hex::encode(hasher.finalize())
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(key)
    }

    pub fn get(&self, key: &str) -> Result<Option<CacheEntry>> {
        let path = self.path_for(key);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let text = String::from_utf8(bytes).map_err(|e| Error::CacheCorrupt {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        let (header, body) = text.split_once('\n').ok_or_else(|| Error::CacheCorrupt {
            path: path.clone(),
            reason: "missing metadata header line".into(),
        })?;
        let meta: CacheMeta = serde_json::from_str(header).map_err(|e| Error::CacheCorrupt {
            path: path.clone(),
            reason: format!("bad metadata header: {e}"),
        })?;
        Ok(Some(CacheEntry {
            meta,
            raw_text: body.to_string(),
        }))
    }

    pub fn put(&self, key: &str, meta: &CacheMeta, raw_text: &str) -> Result<()> {
        let path = self.path_for(key);
        let tmp = self.dir.join(format!(".{key}.tmp.{}", std::process::id()));
        let mut content = serde_json::to_string(meta)?;
        content.push('\n');
        content.push_str(raw_text);
        std::fs::write(&tmp, content)?;
        std::fs::rename(&tmp, &path)?;
        Ok(())
    }
}
