//! On-disk model checkpoints.
//!
//! A checkpoint directory holds `checkpoint.json` plus `entities.bin` and
//! `relations.bin`: row-major little-endian `f32` tables. ComplEx rows store K
//! real parts then K imaginary parts.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelKind, ModelParams, Norm};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const ENTITY_TABLE_FILE: &str = "entities.bin";
pub const RELATION_TABLE_FILE: &str = "relations.bin";
pub const VALUE_ENCODING: &str = "f32-le";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub model_kind: ModelKind,
    #[serde(rename = "K")]
    pub dim: usize,
    pub n: usize,
    pub m: usize,
    pub norm_kind: Norm,
    pub seed: u64,
    pub value_encoding: String,
}

/// Writes `params` into `dir`, creating it.
pub fn save(dir: impl AsRef<Path>, params: &ModelParams, seed: u64) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = CheckpointManifest {
        model_kind: params.kind(),
        dim: params.dim(),
        n: params.n_entities(),
        m: params.n_relations(),
        norm_kind: params.norm(),
        seed,
        value_encoding: VALUE_ENCODING.into(),
    };
    write_table(&dir.join(ENTITY_TABLE_FILE), params.entity_table())?;
    write_table(&dir.join(RELATION_TABLE_FILE), params.relation_table())?;
    let path = dir.join(CHECKPOINT_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
}

pub fn load_manifest(dir: impl AsRef<Path>) -> Result<CheckpointManifest> {
    let path = dir.as_ref().join(CHECKPOINT_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: CheckpointManifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.clone(),
        line: e.line(),
        message: e.to_string(),
    })?;
    if manifest.value_encoding != VALUE_ENCODING {
        return Err(Error::Parse {
            path,
            line: 0,
            message: format!("unsupported value encoding {:?}", manifest.value_encoding),
        });
    }
    Ok(manifest)
}

/// Reads a checkpoint written by [`save`].
pub fn load(dir: impl AsRef<Path>) -> Result<(CheckpointManifest, ModelParams)> {
    let dir = dir.as_ref();
    let manifest = load_manifest(dir)?;
    let width = manifest.model_kind.row_width(manifest.dim);
    let entities = read_table(&dir.join(ENTITY_TABLE_FILE), manifest.n * width)?;
    let relations = read_table(&dir.join(RELATION_TABLE_FILE), manifest.m * width)?;
    let params = ModelParams::from_tables(
        manifest.model_kind,
        manifest.dim,
        manifest.norm_kind,
        entities,
        relations,
    )?;
    Ok((manifest, params))
}

fn write_table(path: &Path, values: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for &v in values {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_table(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != expected * 4 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: format!("expected {} bytes, found {}", expected * 4, bytes.len()),
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}
