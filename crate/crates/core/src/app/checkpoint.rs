//! Versioned binary model checkpoints.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "NIMP"  u32 version  u32 len  <len bytes of UTF-8 JSON header>
//! per tensor, in forward order:
//!   u32 len  <name>  u32 rank  rank × u32 dims  prod(dims) × f64
//! ```
//!
//! Weights are rank 2 `(out, in)`, biases rank 1 and priorities rank 0.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Matrix2D;
use crate::resnet::{FCResNetModel, ResidualUnit, StageSpec, TensorRole, UnitKind};

pub const MAGIC: &[u8; 4] = b"NIMP";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitHeader {
    pub id: u32,
    pub stage: usize,
    pub kind: UnitKind,
}

/// The JSON part of a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub stages: Vec<StageSpec>,
    pub class_count: usize,
    pub input_width: usize,
    pub input_bound: f64,
    pub next_id: u32,
    pub units: Vec<UnitHeader>,
    /// SHA-256 of the run config that produced the model; empty if none.
    pub config_digest: String,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_len(out: &mut Vec<u8>, n: usize) -> Result<()> {
    let n = u32::try_from(n).map_err(|_| Error::Format(format!("length {n} exceeds 32 bits")))?;
    put_u32(out, n);
    Ok(())
}

/// Serializes `model` with its config digest.
pub fn encode_checkpoint(model: &FCResNetModel, config_digest: &str) -> Result<Vec<u8>> {
    let header = CheckpointHeader {
        stages: model.stages().to_vec(),
        class_count: model.class_count(),
        input_width: model.input_width(),
        input_bound: model.input_bound(),
        next_id: model.next_id(),
        units: model
            .units()
            .iter()
            .map(|u| UnitHeader {
                id: u.id(),
                stage: u.stage(),
                kind: u.kind(),
            })
            .collect(),
        config_digest: config_digest.to_owned(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    put_len(&mut out, json.len())?;
    out.extend_from_slice(&json);
    for (info, t) in model.tensor_infos().iter().zip(model.tensors()) {
        put_len(&mut out, info.name.len())?;
        out.extend_from_slice(info.name.as_bytes());
        let dims: &[usize] = match info.role {
            TensorRole::Weight => &[t.rows(), t.cols()],
            TensorRole::Bias => &[t.cols()],
            TensorRole::Priority => &[],
        };
        put_len(&mut out, dims.len())?;
        for &d in dims {
            put_len(&mut out, d)?;
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format(format!(
                "truncated checkpoint while reading {what}"
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    /// Reads the next tensor, which must be called `name` and have `shape`.
    fn tensor(&mut self, name: &str, role: TensorRole, shape: (usize, usize)) -> Result<Matrix2D> {
        let len = self.u32("tensor name length")? as usize;
        let found = self.take(len, "tensor name")?;
        if found != name.as_bytes() {
            return Err(Error::Format(format!(
                "expected tensor '{name}', found '{}'",
                String::from_utf8_lossy(found)
            )));
        }
        let rank = self.u32("tensor rank")? as usize;
        let expected: Vec<usize> = match role {
            TensorRole::Weight => vec![shape.0, shape.1],
            TensorRole::Bias => vec![shape.1],
            TensorRole::Priority => vec![],
        };
        if rank != expected.len() {
            return Err(Error::Format(format!(
                "tensor '{name}' has rank {rank}, expected {}",
                expected.len()
            )));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(self.u32("tensor dims")? as usize);
        }
        if dims != expected {
            return Err(Error::Format(format!(
                "tensor '{name}' has dims {dims:?}, expected {expected:?}"
            )));
        }
        let count = shape.0 * shape.1;
        if count.checked_mul(8).is_none_or(|b| b > self.remaining()) {
            return Err(Error::Format(format!(
                "truncated checkpoint in tensor '{name}'"
            )));
        }
        let raw = self.take(count * 8, name)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Matrix2D::from_vec(shape.0, shape.1, data)
    }
}

/// Parses a checkpoint, validating the header against every tensor.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<(FCResNetModel, CheckpointHeader)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::Format("not a checkpoint (bad magic)".into()));
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let len = r.u32("header length")? as usize;
    let json = r.take(len, "header")?;
    let header: CheckpointHeader = serde_json::from_slice(json)
        .map_err(|e| Error::Format(format!("invalid checkpoint header: {e}")))?;

    let mut units = Vec::with_capacity(header.units.len());
    let mut width = header.input_width;
    for u in &header.units {
        let spec = header.stages.get(u.stage).ok_or_else(|| {
            Error::Format(format!("unit {} refers to missing stage {}", u.id, u.stage))
        })?;
        let (s, h) = (spec.stream_width, spec.hidden_width);
        let name = |t: &str| format!("unit{}.{t}", u.id);
        let projection = match u.kind {
            UnitKind::Transition => Some(r.tensor(&name("P"), TensorRole::Weight, (s, width))?),
            UnitKind::Weighted => None,
        };
        let a = r.tensor(&name("A"), TensorRole::Weight, (h, width))?;
        let a_bias = r.tensor(&name("a"), TensorRole::Bias, (1, h))?;
        let b = r.tensor(&name("B"), TensorRole::Weight, (s, h))?;
        let priority = match u.kind {
            UnitKind::Weighted => Some(r.tensor(&name("w"), TensorRole::Priority, (1, 1))?),
            UnitKind::Transition => None,
        };
        units.push(ResidualUnit {
            id: u.id,
            stage: u.stage,
            kind: u.kind,
            projection,
            a,
            a_bias,
            b,
            priority,
        });
        width = s;
    }
    let head_w = r.tensor("head.W", TensorRole::Weight, (header.class_count, width))?;
    let head_b = r.tensor("head.b", TensorRole::Bias, (1, header.class_count))?;
    if r.remaining() != 0 {
        return Err(Error::Format(format!(
            "{} trailing bytes after the last tensor",
            r.remaining()
        )));
    }
    let model = FCResNetModel::from_parts(
        header.stages.clone(),
        header.class_count,
        header.input_width,
        header.input_bound,
        units,
        head_w,
        head_b,
        header.next_id,
    )?;
    Ok((model, header))
}

pub fn save_checkpoint(model: &FCResNetModel, path: &Path) -> Result<()> {
    save_checkpoint_tagged(model, "", path)
}

/// Saves `model` recording the digest of the config that produced it.
pub fn save_checkpoint_tagged(
    model: &FCResNetModel,
    config_digest: &str,
    path: &Path,
) -> Result<()> {
    let bytes = encode_checkpoint(model, config_digest)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<FCResNetModel> {
    read_checkpoint(path).map(|(m, _)| m)
}

/// Loads the model together with its header.
pub fn read_checkpoint(path: &Path) -> Result<(FCResNetModel, CheckpointHeader)> {
    let bytes = fs::read(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    decode_checkpoint(&bytes)
}
