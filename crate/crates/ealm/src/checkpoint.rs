//! Binary parameter checkpoints and their sidecar files.
//!
//! Layout of a `.ckpt` file, all integers little-endian:
//!
//! ```text
//! offset 0   8 bytes   magic "EALMCKPT"
//! offset 8   u64       header length H in bytes
//! offset 16  H bytes   UTF-8 JSON header:
//!                      {"version":1,"tensors":[{"name":..,"shape":[..],"offset":..},..]}
//! offset 16+H          payload: every tensor's values as f64, row-major,
//!                      concatenated in header order
//! ```
//!
//! `offset` is the byte offset of a tensor's first value from the start of
//! the payload. Values are stored with `f64::to_le_bytes`, so a round trip
//! is bit-exact, NaN payloads included.
//!
//! Beside `model.ckpt` sit `model.ckpt.manifest.json` (model config and
//! vocabulary fingerprint) and `model.ckpt.vocab.txt` (one token per line,
//! in id order).

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ealm_core::model::{EncoderConfig, Model, Vocabulary};
use ealm_core::tensor::Tensor;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Error;

pub const MAGIC: &[u8; 8] = b"EALMCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub version: u32,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub config: EncoderConfig,
    /// FNV-1a of the vocabulary, hex.
    pub vocab_fingerprint: String,
    pub vocab_size: usize,
}

/// Serialises named tensors into checkpoint bytes.
pub fn encode<'a>(tensors: impl IntoIterator<Item = (&'a str, &'a Tensor)>) -> Vec<u8> {
    let mut entries = Vec::new();
    let mut payload = Vec::new();
    for (name, t) in tensors {
        entries.push(TensorEntry { name: name.to_string(), shape: t.shape().to_vec(), offset: payload.len() as u64 });
        for v in t.values() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    let header = serde_json::to_vec(&Header { version: FORMAT_VERSION, tensors: entries }).expect("header serialises");
    let mut out = Vec::with_capacity(16 + header.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&payload);
    out
}

/// Parses checkpoint bytes back into `(name, tensor)` pairs in file order.
pub fn decode(bytes: &[u8]) -> Result<Vec<(String, Tensor)>, String> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err("not a checkpoint (bad magic)".into());
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let hend = usize::try_from(hlen)
        .ok()
        .and_then(|h| h.checked_add(16))
        .filter(|&e| e <= bytes.len())
        .ok_or("header length runs past end of file")?;
    let header: Header = serde_json::from_slice(&bytes[16..hend]).map_err(|e| format!("bad header: {e}"))?;
    if header.version != FORMAT_VERSION {
        return Err(format!("unsupported checkpoint version {}", header.version));
    }
    let payload = &bytes[hend..];
    let mut expected = 0u64;
    let mut out = Vec::with_capacity(header.tensors.len());
    for e in header.tensors {
        if e.offset != expected {
            return Err(format!("tensor {} at offset {}, expected {expected}", e.name, e.offset));
        }
        let n: usize = e.shape.iter().product();
        let start = e.offset as usize;
        let end = start + n * 8;
        let raw = payload.get(start..end).ok_or_else(|| format!("payload too short for {}", e.name))?;
        let values = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let t = Tensor::new(e.shape, values).map_err(|err| format!("{}: {err}", e.name))?;
        out.push((e.name, t));
        expected = end as u64;
    }
    if expected as usize != payload.len() {
        return Err(format!("{} trailing payload bytes", payload.len() - expected as usize));
    }
    Ok(out)
}

/// Hex SHA-256 of checkpoint bytes; identifies a checkpoint in decision logs.
pub fn checkpoint_id(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn manifest_path(path: &Path) -> PathBuf {
    sidecar(path, ".manifest.json")
}

pub fn vocab_path(path: &Path) -> PathBuf {
    sidecar(path, ".vocab.txt")
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    let mut f = fs::File::create(path).map_err(Error::io(path))?;
    f.write_all(bytes).map_err(Error::io(path))
}

/// Writes the checkpoint and both sidecars. Returns the checkpoint id.
pub fn save(path: &Path, model: &Model, vocab: &Vocabulary) -> Result<String, Error> {
    let bytes = encode(model.params().iter().map(|p| (p.name.as_str(), &p.tensor)));
    let manifest = Manifest {
        version: FORMAT_VERSION,
        config: model.config().clone(),
        vocab_fingerprint: format!("{:016x}", vocab.fingerprint()),
        vocab_size: vocab.len(),
    };
    write_file(path, &bytes)?;
    let mut m = serde_json::to_vec_pretty(&manifest).expect("manifest serialises");
    m.push(b'\n');
    write_file(&manifest_path(path), &m)?;
    let mut v = vocab.tokens().join("\n");
    v.push('\n');
    write_file(&vocab_path(path), v.as_bytes())?;
    Ok(checkpoint_id(&bytes))
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub model: Model,
    pub vocab: Vocabulary,
    pub checkpoint_id: String,
}

pub fn load(path: &Path) -> Result<Loaded, Error> {
    let fail = |detail: String| Error::Checkpoint { path: path.to_path_buf(), detail };
    let bytes = fs::read(path).map_err(Error::io(path))?;
    let named = decode(&bytes).map_err(fail)?;
    let mpath = manifest_path(path);
    let manifest: Manifest = serde_json::from_slice(&fs::read(&mpath).map_err(Error::io(&mpath))?)
        .map_err(|e| fail(format!("manifest: {e}")))?;
    let vpath = vocab_path(path);
    let text = fs::read_to_string(&vpath).map_err(Error::io(&vpath))?;
    let vocab = Vocabulary::from_tokens(text.lines().map(str::to_string).collect())?;
    let fp = format!("{:016x}", vocab.fingerprint());
    if fp != manifest.vocab_fingerprint || vocab.len() != manifest.vocab_size {
        return Err(fail(format!(
            "vocabulary fingerprint {fp} does not match manifest {}",
            manifest.vocab_fingerprint
        )));
    }
    let model = Model::from_named(manifest.config, named).map_err(|e| fail(e.to_string()))?;
    Ok(Loaded { model, vocab, checkpoint_id: checkpoint_id(&bytes) })
}
