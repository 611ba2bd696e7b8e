use std::fs;
use std::path::Path;

use log::info;
use sha2::{Digest, Sha256};

use super::codec::{decode_corpus, encode_corpus, Reader, Writer};
use super::Corpus;
use crate::{Error, Result};

pub const CACHE_MAGIC: &[u8; 8] = b"CHORUSC1";
pub const CACHE_VERSION: u32 = 1;

/// SHA-256 over the source files and the reader configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fingerprint(pub [u8; 32]);

impl Fingerprint {
    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn fingerprint_sources(paths: &[&Path], reader_config: &str) -> Result<Fingerprint> {
    let mut h = Sha256::new();
    for p in paths {
        let bytes = fs::read(p).map_err(|e| Error::io(*p, e))?;
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    h.update(reader_config.as_bytes());
    Ok(Fingerprint(h.finalize().into()))
}

pub fn save_cache(corpus: &Corpus, path: &Path, fingerprint: &Fingerprint) -> Result<()> {
    let mut w = Writer::default();
    w.buf.extend_from_slice(CACHE_MAGIC);
    w.buf.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    w.buf.extend_from_slice(&fingerprint.0);
    encode_corpus(&mut w, corpus);
    fs::write(path, &w.buf).map_err(|e| Error::io(path, e))
}

/// Loads a cached corpus. Any header mismatch or decoding problem yields
/// [`Error::RebuildRequired`].
pub fn load_cache(path: &Path, expected: &Fingerprint) -> Result<Corpus> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 44 || &bytes[..8] != CACHE_MAGIC {
        return Err(Error::RebuildRequired("not a corpus cache".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != CACHE_VERSION {
        return Err(Error::RebuildRequired(format!(
            "cache version {version}, expected {CACHE_VERSION}"
        )));
    }
    if bytes[12..44] != expected.0 {
        return Err(Error::RebuildRequired("fingerprint mismatch".into()));
    }
    let mut r = Reader::new(&bytes[44..]);
    let corpus = decode_corpus(&mut r)?;
    if !r.finished() {
        return Err(Error::RebuildRequired("trailing bytes".into()));
    }
    Ok(corpus)
}

/// Returns the cached corpus when valid, otherwise builds and re-caches it.
/// The flag reports whether the cache was used.
pub fn load_or_build(
    cache_path: &Path,
    fingerprint: &Fingerprint,
    build: impl FnOnce() -> Result<Corpus>,
) -> Result<(Corpus, bool)> {
    if cache_path.exists() {
        match load_cache(cache_path, fingerprint) {
            Ok(c) => return Ok((c, true)),
            Err(Error::RebuildRequired(why)) => info!("rebuilding corpus cache: {why}"),
            Err(e) => return Err(e),
        }
    }
    let corpus = build()?;
    save_cache(&corpus, cache_path, fingerprint)?;
    Ok((corpus, false))
}
