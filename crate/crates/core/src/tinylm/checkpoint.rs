//! Versioned binary checkpoint: a JSON header with the configs embedded,
//! followed by raw little-endian f32 tensors in canonical parameter order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use super::model::Gpt;
use super::{ModelConfig, Result, TinyLmError};
use crate::mi::OrderingPlan;

const MAGIC: &[u8; 8] = b"ORDLABCK";
const VERSION: u32 = 1;

/// An immutable trained-model snapshot with enough provenance to evaluate it.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model_cfg: ModelConfig,
    pub task_name: String,
    /// The ordering plan the model was trained under, if any.
    pub plan: Option<OrderingPlan>,
    pub vocab: Vec<String>,
    pub model: Gpt<f32>,
}

#[derive(Serialize, Deserialize)]
struct HeaderJson {
    model_cfg: ModelConfig,
    task_name: String,
    plan: Option<OrderingPlan>,
    vocab: Vec<String>,
    n_values: u64,
}

impl Checkpoint {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io_err = |source| TinyLmError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut model = self.model.clone();
        let views = model.p.views_mut();
        let n_values: u64 = views.iter().map(|(v, _)| v.len() as u64).sum();
        let header = HeaderJson {
            model_cfg: self.model_cfg.clone(),
            task_name: self.task_name.clone(),
            plan: self.plan.clone(),
            vocab: self.vocab.clone(),
            n_values,
        };
        let header = serde_json::to_vec(&header)
            .map_err(|e| TinyLmError::Format(format!("header encode: {e}")))?;

        let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
        w.write_all(MAGIC).map_err(io_err)?;
        w.write_u32::<LittleEndian>(VERSION).map_err(io_err)?;
        w.write_u64::<LittleEndian>(header.len() as u64).map_err(io_err)?;
        w.write_all(&header).map_err(io_err)?;
        for (view, _) in views {
            for &x in view.iter() {
                w.write_f32::<LittleEndian>(x).map_err(io_err)?;
            }
        }
        w.flush().map_err(io_err)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
        let path = path.as_ref();
        let io_err = |source| TinyLmError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut r = BufReader::new(File::open(path).map_err(io_err)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io_err)?;
        if &magic != MAGIC {
            return Err(TinyLmError::Format("bad magic".into()));
        }
        let version = r.read_u32::<LittleEndian>().map_err(io_err)?;
        if version != VERSION {
            return Err(TinyLmError::Format(format!("unsupported version {version}")));
        }
        let header_len = r.read_u64::<LittleEndian>().map_err(io_err)? as usize;
        let mut header_bytes = vec![0u8; header_len];
        r.read_exact(&mut header_bytes).map_err(io_err)?;
        let header: HeaderJson = serde_json::from_slice(&header_bytes)
            .map_err(|e| TinyLmError::Format(format!("header decode: {e}")))?;

        let mut model = Gpt::<f32>::zeroed(&header.model_cfg)?;
        let mut read_values = 0u64;
        for (view, _) in model.p.views_mut() {
            for slot in view.iter_mut() {
                *slot = r.read_f32::<LittleEndian>().map_err(io_err)?;
                read_values += 1;
            }
        }
        if read_values != header.n_values {
            return Err(TinyLmError::Format(format!(
                "expected {} values, read {}",
                header.n_values, read_values
            )));
        }
        Ok(Checkpoint {
            model_cfg: header.model_cfg,
            task_name: header.task_name,
            plan: header.plan,
            vocab: header.vocab,
            model,
        })
    }
}
