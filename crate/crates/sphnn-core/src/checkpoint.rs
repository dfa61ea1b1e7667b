//! Trained-model persistence.
//!
//! A checkpoint is a directory holding `manifest.json` plus one raw blob
//! per parameter tensor. The manifest records the architecture config, the
//! training seed, the (possibly trained) lambda value, and the shape and
//! file name of every tensor. Blobs are row-major little-endian f64 with
//! no header, so saving the same parameters twice produces identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hin::HeteroGraph;
use crate::hypergraph::Hypergraph;
use crate::model::{ModelConfig, ModelError, ModelParams};
use crate::train::TrainConfig;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("tensor {name}: manifest says {rows}x{cols}, blob holds {got} values")]
    BlobShape {
        name: String,
        rows: usize,
        cols: usize,
        got: usize,
    },
    #[error("checkpoint does not fit this graph and motif set: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub file: String,
}

/// Contents of `manifest.json`. The training seed lives in `train.seed`,
/// and `lambda` records the trained value, which differs from
/// `config.lambda` only when lambda itself was trained.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ModelConfig,
    pub train: TrainConfig,
    pub lambda: f64,
    pub tensors: Vec<TensorEntry>,
}

const MANIFEST: &str = "manifest.json";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CheckpointError + '_ {
    move |source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Blob file name for a tensor: its index keeps names unique, the
/// sanitized path keeps them readable.
fn blob_name(index: usize, name: &str) -> String {
    let safe: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '.' })
        .collect();
    format!("{index:02}.{safe}.bin")
}

pub fn save_checkpoint(
    dir: &Path,
    cfg: &ModelConfig,
    tcfg: &TrainConfig,
    params: &ModelParams,
) -> Result<(), CheckpointError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let info = params.tensor_info();
    let tensors = params.tensors();
    let mut entries = Vec::with_capacity(info.len());
    for (i, ((name, _), m)) in info.iter().zip(&tensors).enumerate() {
        let file = blob_name(i, name);
        let mut bytes = Vec::with_capacity(8 * m.data().len());
        for v in m.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let path = dir.join(&file);
        fs::write(&path, bytes).map_err(io_err(&path))?;
        entries.push(TensorEntry {
            name: name.clone(),
            rows: m.rows(),
            cols: m.cols(),
            file,
        });
    }
    let manifest = Manifest {
        config: cfg.clone(),
        train: tcfg.clone(),
        lambda: params.lambda_value(),
        tensors: entries,
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CheckpointError::Manifest(e.to_string()))?;
    let path = dir.join(MANIFEST);
    fs::write(&path, json + "\n").map_err(io_err(&path))
}

/// Read just the manifest.
pub fn read_manifest(dir: &Path) -> Result<Manifest, CheckpointError> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| CheckpointError::Manifest(e.to_string()))
}

/// Rebuild the parameters a checkpoint was saved from. The graph and
/// hypergraph bundle must structurally match the one used at save time;
/// every divergence (missing tensor, extra tensor, shape change) is an
/// error naming the offender.
pub fn load_checkpoint(
    dir: &Path,
    g: &HeteroGraph,
    hgs: &[Hypergraph],
) -> Result<(ModelConfig, TrainConfig, ModelParams), CheckpointError> {
    let manifest = read_manifest(dir)?;
    let mut params = ModelParams::init(&manifest.config, g, hgs, 0)?;
    let info = params.tensor_info();
    if info.len() != manifest.tensors.len() {
        return Err(CheckpointError::Mismatch(format!(
            "checkpoint stores {} tensors, this bundle needs {}",
            manifest.tensors.len(),
            info.len()
        )));
    }
    let mut tensors = params.tensors_mut();
    for (i, ((name, _), entry)) in info.iter().zip(&manifest.tensors).enumerate() {
        if *name != entry.name {
            return Err(CheckpointError::Mismatch(format!(
                "tensor {i} is {} in the checkpoint but {name} here",
                entry.name
            )));
        }
        let m = &mut tensors[i];
        if (m.rows(), m.cols()) != (entry.rows, entry.cols) {
            return Err(CheckpointError::Mismatch(format!(
                "tensor {name} is {}x{} in the checkpoint but {}x{} here",
                entry.rows,
                entry.cols,
                m.rows(),
                m.cols()
            )));
        }
        let path = dir.join(&entry.file);
        let bytes = fs::read(&path).map_err(io_err(&path))?;
        if bytes.len() != 8 * entry.rows * entry.cols {
            return Err(CheckpointError::BlobShape {
                name: name.clone(),
                rows: entry.rows,
                cols: entry.cols,
                got: bytes.len() / 8,
            });
        }
        for (dst, chunk) in m.data_mut().iter_mut().zip(bytes.chunks_exact(8)) {
            *dst = f64::from_le_bytes(chunk.try_into().unwrap());
        }
    }
    Ok((manifest.config, manifest.train, params))
}
