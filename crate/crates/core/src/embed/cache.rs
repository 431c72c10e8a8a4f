//! Append-only binary embedding cache.
//!
//! Data file layout (all integers little-endian):
//!
//! ```text
//! header:  b"LMEMBED\0"  u32 format_version
//! record:  u32 record_len  u64 key  u32 dim  dim x f32  u32 crc32
//! ```
//!
//! `record_len` counts the bytes after itself (`16 + 4 * dim`). The CRC-32 covers
//! key, dim and the floats. Keys hash the normalized text together with the model
//! id and dimension, see [`cache_key`].
//!
//! The sidecar `<file>.idx` holds `b"LMEMIDX\0" u32 format_version` followed by
//! `u64 key, u64 offset` pairs. It is rebuilt by scanning whenever it does not
//! cover the data file exactly.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use log::warn;

use super::{
    embed_batch, normalize_text, stable_hash64, EmbedError, EmbeddingBatch, EmbeddingProvider,
    EmbeddingVector,
};

pub const CACHE_FORMAT_VERSION: u32 = 1;
const DATA_MAGIC: &[u8; 8] = b"LMEMBED\0";
const INDEX_MAGIC: &[u8; 8] = b"LMEMIDX\0";
const HEADER_LEN: u64 = 12;

/// Content address of a text under a given model and dimension.
pub fn cache_key(text: &str, model_id: &str, dim: usize) -> u64 {
    let mut bytes = normalize_text(text).into_bytes();
    bytes.push(0);
    bytes.extend_from_slice(model_id.as_bytes());
    bytes.push(0);
    bytes.extend_from_slice(&(dim as u32).to_le_bytes());
    stable_hash64(&bytes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheStats {
    pub entries: usize,
    pub bytes: u64,
}

struct Inner {
    data: File,
    index_file: BufWriter<File>,
    index: HashMap<u64, u64>,
    len: u64,
}

/// Single-writer file cache. All access goes through one lock; reads seek a
/// shared handle.
pub struct FileCache {
    path: PathBuf,
    inner: Mutex<Inner>,
}

impl std::fmt::Debug for FileCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FileCache").field("path", &self.path).finish()
    }
}

fn index_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".idx");
    PathBuf::from(p)
}

fn corrupt(offset: u64, reason: impl Into<String>) -> EmbedError {
    EmbedError::CorruptEntry {
        offset,
        reason: reason.into(),
    }
}

fn checksum(key: u64, dim: u32, payload: &[u8]) -> u32 {
    let mut h = crc32fast::Hasher::new();
    h.update(&key.to_le_bytes());
    h.update(&dim.to_le_bytes());
    h.update(payload);
    h.finalize()
}

/// Reads the record starting at `offset`; returns key, vector and the offset of
/// the next record.
fn read_record<R: Read>(r: &mut R, offset: u64) -> Result<(u64, Vec<f32>, u64), EmbedError> {
    let mut u32buf = [0u8; 4];
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u32buf)
        .map_err(|_| corrupt(offset, "truncated length"))?;
    let record_len = u32::from_le_bytes(u32buf);
    if record_len < 16 || (record_len - 16) % 4 != 0 {
        return Err(corrupt(offset, format!("bad record length {record_len}")));
    }
    r.read_exact(&mut u64buf)
        .map_err(|_| corrupt(offset, "truncated key"))?;
    let key = u64::from_le_bytes(u64buf);
    r.read_exact(&mut u32buf)
        .map_err(|_| corrupt(offset, "truncated dimension"))?;
    let dim = u32::from_le_bytes(u32buf);
    if u64::from(dim) * 4 + 16 != u64::from(record_len) {
        return Err(corrupt(offset, "dimension disagrees with record length"));
    }
    let mut payload = vec![0u8; dim as usize * 4];
    r.read_exact(&mut payload)
        .map_err(|_| corrupt(offset, "truncated payload"))?;
    r.read_exact(&mut u32buf)
        .map_err(|_| corrupt(offset, "truncated checksum"))?;
    if u32::from_le_bytes(u32buf) != checksum(key, dim, &payload) {
        return Err(corrupt(offset, "checksum mismatch"));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((key, values, offset + 4 + u64::from(record_len)))
}

impl FileCache {
    /// Opens or creates the cache at `path`, loading or rebuilding its index.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, EmbedError> {
        let path = path.as_ref().to_path_buf();
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut data = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)?;
        let mut len = data.metadata()?.len();
        if len == 0 {
            data.write_all(DATA_MAGIC)?;
            data.write_all(&CACHE_FORMAT_VERSION.to_le_bytes())?;
            data.flush()?;
            len = HEADER_LEN;
        } else {
            let mut header = [0u8; 12];
            data.seek(SeekFrom::Start(0))?;
            data.read_exact(&mut header)
                .map_err(|_| corrupt(0, "truncated header"))?;
            if &header[..8] != DATA_MAGIC {
                return Err(corrupt(0, "not an embedding cache"));
            }
            let version = u32::from_le_bytes(header[8..].try_into().unwrap());
            if version != CACHE_FORMAT_VERSION {
                return Err(corrupt(0, format!("unsupported format version {version}")));
            }
        }

        let idx_path = index_path(&path);
        let index = match load_index(&idx_path, &mut data, len) {
            Some(index) => index,
            None => {
                let index = scan_index(&mut data, len)?;
                write_index(&idx_path, &index)?;
                index
            }
        };
        let index_file = BufWriter::new(OpenOptions::new().append(true).open(&idx_path)?);
        Ok(FileCache {
            path,
            inner: Mutex::new(Inner {
                data,
                index_file,
                index: index.into_iter().collect(),
                len,
            }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn contains(&self, key: u64) -> bool {
        self.inner.lock().unwrap().index.contains_key(&key)
    }

    /// Stores `vector` under `key`. Returns false when the key is already present;
    /// existing entries are never rewritten.
    pub fn put_key(&self, key: u64, vector: &EmbeddingVector) -> Result<bool, EmbedError> {
        let mut inner = self.inner.lock().unwrap();
        if inner.index.contains_key(&key) {
            return Ok(false);
        }
        let dim = vector.dim() as u32;
        let payload: Vec<u8> = vector
            .values()
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect();
        let mut record = Vec::with_capacity(payload.len() + 20);
        record.extend_from_slice(&(16 + 4 * dim).to_le_bytes());
        record.extend_from_slice(&key.to_le_bytes());
        record.extend_from_slice(&dim.to_le_bytes());
        record.extend_from_slice(&payload);
        record.extend_from_slice(&checksum(key, dim, &payload).to_le_bytes());
        let offset = inner.len;
        inner.data.write_all(&record)?;
        inner.len += record.len() as u64;
        inner.index_file.write_all(&key.to_le_bytes())?;
        inner.index_file.write_all(&offset.to_le_bytes())?;
        inner.index.insert(key, offset);
        Ok(true)
    }

    pub fn get_key(&self, key: u64) -> Result<Option<EmbeddingVector>, EmbedError> {
        let mut inner = self.inner.lock().unwrap();
        let Some(&offset) = inner.index.get(&key) else {
            return Ok(None);
        };
        inner.data.seek(SeekFrom::Start(offset))?;
        let (stored_key, values, _) = read_record(&mut BufReader::new(&inner.data), offset)?;
        if stored_key != key {
            return Err(corrupt(offset, "index points at a different key"));
        }
        Ok(Some(EmbeddingVector::from_stored(values)))
    }

    pub fn put(
        &self,
        text: &str,
        model_id: &str,
        vector: &EmbeddingVector,
    ) -> Result<bool, EmbedError> {
        self.put_key(cache_key(text, model_id, vector.dim()), vector)
    }

    pub fn get(&self, text: &str, model_id: &str, dim: usize) -> Result<EmbeddingVector, EmbedError> {
        self.get_key(cache_key(text, model_id, dim))?
            .ok_or_else(|| EmbedError::CacheMiss {
                text: text.to_string(),
            })
    }

    /// Flushes pending index writes.
    pub fn flush(&self) -> Result<(), EmbedError> {
        let mut inner = self.inner.lock().unwrap();
        inner.data.flush()?;
        inner.index_file.flush()?;
        Ok(())
    }

    /// Reads every record from disk and verifies its checksum.
    pub fn scan(&self) -> Result<Vec<(u64, EmbeddingVector)>, EmbedError> {
        let mut inner = self.inner.lock().unwrap();
        let len = inner.len;
        inner.data.seek(SeekFrom::Start(HEADER_LEN))?;
        let mut reader = BufReader::new(&inner.data);
        let mut out = Vec::new();
        let mut offset = HEADER_LEN;
        while offset < len {
            let (key, values, next) = read_record(&mut reader, offset)?;
            out.push((key, EmbeddingVector::from_stored(values)));
            offset = next;
        }
        Ok(out)
    }

    pub fn stats(&self) -> CacheStats {
        let inner = self.inner.lock().unwrap();
        CacheStats {
            entries: inner.index.len(),
            bytes: inner.len,
        }
    }
}

impl Drop for FileCache {
    fn drop(&mut self) {
        if let Ok(inner) = self.inner.get_mut() {
            let _ = inner.index_file.flush();
        }
    }
}

fn scan_index(data: &mut File, len: u64) -> Result<Vec<(u64, u64)>, EmbedError> {
    data.seek(SeekFrom::Start(HEADER_LEN))?;
    let mut reader = BufReader::new(&*data);
    let mut out = Vec::new();
    let mut offset = HEADER_LEN;
    while offset < len {
        let (key, _, next) = read_record(&mut reader, offset)?;
        out.push((key, offset));
        offset = next;
    }
    Ok(out)
}

fn write_index(path: &Path, entries: &[(u64, u64)]) -> Result<(), EmbedError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(INDEX_MAGIC)?;
    w.write_all(&CACHE_FORMAT_VERSION.to_le_bytes())?;
    for (key, offset) in entries {
        w.write_all(&key.to_le_bytes())?;
        w.write_all(&offset.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Loads the sidecar index when it covers the data file exactly.
fn load_index(path: &Path, data: &mut File, len: u64) -> Option<Vec<(u64, u64)>> {
    let bytes = std::fs::read(path).ok()?;
    if bytes.len() < 12 || &bytes[..8] != INDEX_MAGIC {
        return None;
    }
    if u32::from_le_bytes(bytes[8..12].try_into().unwrap()) != CACHE_FORMAT_VERSION {
        return None;
    }
    let body = &bytes[12..];
    if body.len() % 16 != 0 {
        return None;
    }
    let entries: Vec<(u64, u64)> = body
        .chunks_exact(16)
        .map(|c| {
            (
                u64::from_le_bytes(c[..8].try_into().unwrap()),
                u64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    let end = match entries.last() {
        None => HEADER_LEN,
        Some(&(_, offset)) => {
            let mut len_buf = [0u8; 4];
            data.seek(SeekFrom::Start(offset)).ok()?;
            data.read_exact(&mut len_buf).ok()?;
            offset + 4 + u64::from(u32::from_le_bytes(len_buf))
        }
    };
    if end != len {
        warn!("embedding cache index {} is stale, rescanning", path.display());
        return None;
    }
    Some(entries)
}

/// Serves embeddings from a [`FileCache`]. Misses go to the fallback provider
/// and are written back; without a fallback a miss is an error.
pub struct CachedProvider {
    cache: FileCache,
    model_id: String,
    dimension: usize,
    fallback: Option<Box<dyn EmbeddingProvider>>,
}

impl CachedProvider {
    /// Read-only view of a cache filled by `model_id` at `dimension`.
    pub fn new(cache: FileCache, model_id: impl Into<String>, dimension: usize) -> Self {
        CachedProvider {
            cache,
            model_id: model_id.into(),
            dimension,
            fallback: None,
        }
    }

    pub fn with_fallback(cache: FileCache, fallback: Box<dyn EmbeddingProvider>) -> Self {
        CachedProvider {
            cache,
            model_id: fallback.model_id().to_string(),
            dimension: fallback.dimension(),
            fallback: Some(fallback),
        }
    }

    pub fn cache(&self) -> &FileCache {
        &self.cache
    }
}

impl EmbeddingProvider for CachedProvider {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, batch: &EmbeddingBatch) -> Result<Vec<EmbeddingVector>, EmbedError> {
        let mut out: Vec<Option<EmbeddingVector>> = Vec::with_capacity(batch.len());
        let mut missing = Vec::new();
        for (i, text) in batch.texts.iter().enumerate() {
            let hit = self
                .cache
                .get_key(cache_key(text, &self.model_id, self.dimension))?;
            if hit.is_none() {
                missing.push(i);
            }
            out.push(hit);
        }
        if !missing.is_empty() {
            let Some(fallback) = &self.fallback else {
                return Err(EmbedError::CacheMiss {
                    text: batch.texts[missing[0]].clone(),
                });
            };
            let sub = EmbeddingBatch::new(
                missing.iter().map(|&i| batch.texts[i].clone()).collect(),
                batch.language,
            )?;
            let fetched = embed_batch(&sub, fallback)?;
            for (&i, v) in missing.iter().zip(fetched) {
                self.cache.put(&batch.texts[i], &self.model_id, &v)?;
                out[i] = Some(v);
            }
        }
        Ok(out.into_iter().map(Option::unwrap).collect())
    }
}
