//! Checkpoint layout, little endian:
//!
//! ```text
//! b"SLMD" | u32 version | u32 meta_len | meta JSON | u64 n | n x f64
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AnyModel, NgramModel, RnnModel, SatOracleModel, Trainable, Vocab};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"SLMD";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelMeta {
    Oracle { vocab: Vocab },
    Ngram { vocab: Vocab, order: usize },
    Rnn { vocab: Vocab, hidden: usize, layers: usize },
}

impl ModelMeta {
    pub fn of(model: &AnyModel) -> Self {
        match model {
            AnyModel::Oracle(m) => ModelMeta::Oracle { vocab: super::ArModel::vocab(m) },
            AnyModel::Ngram(m) => ModelMeta::Ngram { vocab: super::ArModel::vocab(m), order: m.order() },
            AnyModel::Rnn(m) => {
                ModelMeta::Rnn { vocab: super::ArModel::vocab(m), hidden: m.hidden(), layers: m.layers() }
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a model checkpoint")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("bad metadata: {0}")]
    Meta(#[from] serde_json::Error),
    #[error("parameter count {got} does not fit the metadata")]
    Shape { got: usize },
}

pub fn save_checkpoint(path: &Path, model: &AnyModel) -> Result<(), CheckpointError> {
    let meta = serde_json::to_vec(&ModelMeta::of(model))?;
    let params = model.params();
    let mut buf = Vec::with_capacity(20 + meta.len() + 8 * params.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    buf.extend_from_slice(&meta);
    buf.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in params {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

fn take<const N: usize>(r: &mut impl Read) -> Result<[u8; N], CheckpointError> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

pub fn load_checkpoint(path: &Path) -> Result<AnyModel, CheckpointError> {
    let bytes = fs::read(path)?;
    let mut r = bytes.as_slice();
    if &take::<4>(&mut r)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = u32::from_le_bytes(take(&mut r)?);
    if version != CHECKPOINT_VERSION {
        return Err(CheckpointError::Version(version));
    }
    let meta_len = u32::from_le_bytes(take(&mut r)?) as usize;
    let mut meta = vec![0u8; meta_len];
    r.read_exact(&mut meta)?;
    let meta: ModelMeta = serde_json::from_slice(&meta)?;
    let n = u64::from_le_bytes(take(&mut r)?) as usize;
    if r.len() != n * 8 {
        return Err(CheckpointError::Shape { got: r.len() / 8 });
    }
    let params: Vec<f64> = r.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    let shape = CheckpointError::Shape { got: n };
    Ok(match meta {
        ModelMeta::Oracle { vocab } if n == 0 => AnyModel::Oracle(SatOracleModel::new(vocab)),
        ModelMeta::Oracle { .. } => return Err(shape),
        ModelMeta::Ngram { vocab, order } => AnyModel::Ngram(NgramModel::from_params(vocab, order, params).ok_or(shape)?),
        ModelMeta::Rnn { vocab, hidden, layers } => {
            AnyModel::Rnn(RnnModel::from_params(vocab, hidden, layers, params).ok_or(shape)?)
        }
    })
}
