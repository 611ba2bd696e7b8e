//! Checkpoint directories: `manifest.json` plus `params.bin`, the
//! parameters as little-endian `f32` concatenated in manifest order.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{init, ModelConfig, ModelKind, Scorer, TaskMode};
use crate::corpus::Corpus;
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PARAMS_FILE: &str = "params.bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Offset into `params.bin`, in `f32` elements.
    pub offset: usize,
    pub trainable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub model_name: ModelKind,
    pub mode: TaskMode,
    pub schema_fingerprint: String,
    pub config: ModelConfig,
    pub params: Vec<ParamEntry>,
}

/// Hash of the id spaces and context schema a model was built against.
pub fn schema_fingerprint(corpus: &Corpus) -> String {
    let mut h = Sha256::new();
    h.update((corpus.n_users as u64).to_le_bytes());
    h.update((corpus.n_items as u64).to_le_bytes());
    h.update(serde_json::to_vec(&corpus.schema).expect("schema serializes"));
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn save_checkpoint(scorer: &dyn Scorer, corpus: &Corpus, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::new();
    let mut blob = Vec::new();
    let mut offset = 0;
    for t in &scorer.params().tensors {
        entries.push(ParamEntry {
            name: t.name.clone(),
            shape: t.shape.clone(),
            offset,
            trainable: t.trainable,
        });
        for &x in &t.data {
            blob.extend_from_slice(&(x as f32).to_le_bytes());
        }
        offset += t.len();
    }
    let manifest = Manifest {
        model_name: scorer.kind(),
        mode: scorer.mode(),
        schema_fingerprint: schema_fingerprint(corpus),
        config: scorer.config().clone(),
        params: entries,
    };
    let mpath = dir.join(MANIFEST_FILE);
    fs::write(&mpath, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&mpath, e))?;
    let ppath = dir.join(PARAMS_FILE);
    fs::write(&ppath, blob).map_err(|e| Error::io(&ppath, e))
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Rebuilds the model described by the manifest and loads its parameters.
pub fn load_checkpoint(dir: &Path, corpus: &Corpus) -> Result<Box<dyn Scorer>> {
    let manifest = read_manifest(dir)?;
    if manifest.schema_fingerprint != schema_fingerprint(corpus) {
        return Err(Error::Model(format!(
            "schema fingerprint mismatch between checkpoint {} and corpus",
            dir.display()
        )));
    }
    let ppath = dir.join(PARAMS_FILE);
    let blob = fs::read(&ppath).map_err(|e| Error::io(&ppath, e))?;
    if blob.len() % 4 != 0 {
        return Err(Error::Model("params.bin length is not a multiple of 4".into()));
    }
    let values: Vec<f32> = blob.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();

    let mut scorer = init(
        manifest.model_name,
        corpus,
        manifest.mode,
        &manifest.config,
        &mut ChaCha8Rng::seed_from_u64(0),
    )?;
    let params = scorer.params_mut();
    if params.tensors.len() != manifest.params.len() {
        return Err(Error::Model("checkpoint tensor count differs from model".into()));
    }
    for entry in &manifest.params {
        let idx = params
            .index_of(&entry.name)
            .ok_or_else(|| Error::Model(format!("unknown tensor `{}` in checkpoint", entry.name)))?;
        let t = params.get_mut(idx);
        if t.shape != entry.shape {
            return Err(Error::Model(format!(
                "tensor `{}` has shape {:?}, checkpoint says {:?}",
                entry.name, t.shape, entry.shape
            )));
        }
        let src = values
            .get(entry.offset..entry.offset + t.len())
            .ok_or_else(|| Error::Model(format!("params.bin too short for `{}`", entry.name)))?;
        for (d, &s) in t.data.iter_mut().zip(src) {
            *d = s as f64;
        }
    }
    Ok(scorer)
}

/// SHA-256 of the manifest and parameter blob.
pub fn checkpoint_hash(dir: &Path) -> Result<String> {
    let mut h = Sha256::new();
    for name in [MANIFEST_FILE, PARAMS_FILE] {
        let p = dir.join(name);
        h.update(fs::read(&p).map_err(|e| Error::io(&p, e))?);
    }
    Ok(h.finalize().iter().map(|b| format!("{b:02x}")).collect())
}
