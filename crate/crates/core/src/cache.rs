//! Disk cache for expensive eigensystems, keyed by a content hash of the
//! generating parameters. Payloads are raw little-endian f64 arrays with a
//! JSON sidecar describing shapes and metadata.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ArrayMeta {
    name: String,
    shape: Vec<usize>,
    /// Offset into the .bin file, in f64 elements.
    offset: usize,
    len: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Sidecar {
    key_material: String,
    meta: serde_json::Value,
    arrays: Vec<ArrayMeta>,
}

/// A set of named f64 arrays plus free-form metadata.
#[derive(Debug, Clone, Default)]
pub struct CachePayload {
    pub arrays: BTreeMap<String, (Vec<usize>, Vec<f64>)>,
    pub meta: serde_json::Value,
}

impl CachePayload {
    pub fn insert(&mut self, name: &str, shape: Vec<usize>, data: Vec<f64>) {
        assert_eq!(shape.iter().product::<usize>(), data.len());
        self.arrays.insert(name.to_string(), (shape, data));
    }

    pub fn get(&self, name: &str) -> Result<&(Vec<usize>, Vec<f64>)> {
        self.arrays
            .get(name)
            .ok_or_else(|| Error::Parse(format!("cache payload missing array '{name}'")))
    }
}

/// Content-addressed cache directory.
#[derive(Debug, Clone)]
pub struct DiskCache {
    dir: PathBuf,
}

pub fn content_key(material: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(material.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl DiskCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(DiskCache { dir })
    }

    fn paths(&self, key: &str) -> (PathBuf, PathBuf) {
        (
            self.dir.join(format!("{key}.bin")),
            self.dir.join(format!("{key}.json")),
        )
    }

    pub fn load(&self, key_material: &str) -> Result<Option<CachePayload>> {
        let key = content_key(key_material);
        let (bin, json) = self.paths(&key);
        if !bin.exists() || !json.exists() {
            return Ok(None);
        }
        let sidecar: Sidecar = serde_json::from_str(&std::fs::read_to_string(&json)?)
            .map_err(|e| Error::Parse(format!("cache sidecar: {e}")))?;
        if sidecar.key_material != key_material {
            return Err(Error::Parse("cache key collision".into()));
        }
        let bytes = std::fs::read(&bin)?;
        if bytes.len() % 8 != 0 {
            return Err(Error::Parse("cache binary not a multiple of 8 bytes".into()));
        }
        let mut all = vec![0.0f64; bytes.len() / 8];
        for (i, chunk) in bytes.chunks_exact(8).enumerate() {
            all[i] = f64::from_le_bytes(chunk.try_into().unwrap());
        }
        let mut payload = CachePayload {
            arrays: BTreeMap::new(),
            meta: sidecar.meta,
        };
        for a in sidecar.arrays {
            let data = all
                .get(a.offset..a.offset + a.len)
                .ok_or_else(|| Error::Parse("cache array out of bounds".into()))?
                .to_vec();
            payload.arrays.insert(a.name, (a.shape, data));
        }
        Ok(Some(payload))
    }

    pub fn store(&self, key_material: &str, payload: &CachePayload) -> Result<()> {
        let key = content_key(key_material);
        let (bin, json) = self.paths(&key);
        let mut arrays = Vec::new();
        let mut bytes: Vec<u8> = Vec::new();
        let mut offset = 0usize;
        for (name, (shape, data)) in &payload.arrays {
            arrays.push(ArrayMeta {
                name: name.clone(),
                shape: shape.clone(),
                offset,
                len: data.len(),
            });
            for &x in data {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
            offset += data.len();
        }
        let sidecar = Sidecar {
            key_material: key_material.to_string(),
            meta: payload.meta.clone(),
            arrays,
        };
        // write-then-rename keeps partially written entries invisible
        let tmp_bin = bin.with_extension("bin.tmp");
        let tmp_json = json.with_extension("json.tmp");
        std::fs::write(&tmp_bin, &bytes)?;
        std::fs::write(
            &tmp_json,
            serde_json::to_string(&sidecar)
                .map_err(|e| Error::Parse(format!("sidecar serialize: {e}")))?,
        )?;
        std::fs::rename(&tmp_bin, &bin)?;
        std::fs::rename(&tmp_json, &json)?;
        Ok(())
    }

    pub fn get_or_compute(
        &self,
        key_material: &str,
        compute: impl FnOnce() -> Result<CachePayload>,
    ) -> Result<CachePayload> {
        if let Some(hit) = self.load(key_material)? {
            return Ok(hit);
        }
        let payload = compute()?;
        self.store(key_material, &payload)?;
        Ok(payload)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}
