//! Versioned binary model container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "CSGN" | u32 container version | u32 schema version
//! u32 hidden | u32 n_outputs | u32 n_blocks | f64 bn_eps | f64 bn_momentum
//! u64 tensor count
//! per tensor: u32 name length, name bytes, u32 ndim, u64 dims..., f64 data...
//! ```
//!
//! All trainable parameters plus the batch-norm running statistics are
//! stored, so `load(save(m))` reproduces forward outputs bit-exactly. The
//! ensemble container "CSEN" wraps length-prefixed member payloads.

use super::model::GnnModel;
use super::tensor::Tensor;
use super::{Ensemble, GnnError};

const MODEL_MAGIC: &[u8; 4] = b"CSGN";
const ENSEMBLE_MAGIC: &[u8; 4] = b"CSEN";
const CONTAINER_VERSION: u32 = 1;

fn push_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn push_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn push_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn push_tensor(out: &mut Vec<u8>, name: &str, tensor: &Tensor) {
    push_u32(out, name.len() as u32);
    out.extend_from_slice(name.as_bytes());
    push_u32(out, tensor.shape().len() as u32);
    for &d in tensor.shape() {
        push_u64(out, d as u64);
    }
    for &v in tensor.data() {
        push_f64(out, v);
    }
}

/// Serialize a model to bytes.
pub fn save_model(model: &GnnModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    push_u32(&mut out, CONTAINER_VERSION);
    push_u32(&mut out, model.schema_version);
    push_u32(&mut out, model.hidden as u32);
    push_u32(&mut out, model.n_outputs as u32);
    push_u32(&mut out, model.blocks.len() as u32);
    // eps/momentum are uniform across the model's normalization layers.
    let bn = &model.blocks[0].cons_from_var.bn;
    push_f64(&mut out, bn.eps);
    push_f64(&mut out, bn.momentum);

    let names = model.param_names();
    let params = model.params();
    let stats = model.running_stats();
    push_u64(&mut out, (params.len() + 2 * stats.len()) as u64);
    for (name, tensor) in names.iter().zip(&params) {
        push_tensor(&mut out, name, tensor);
    }
    for (idx, (mean, var)) in stats.iter().enumerate() {
        let block = idx / 2;
        let half = if idx % 2 == 0 { "cv" } else { "vc" };
        push_tensor(&mut out, &format!("block{block}.{half}.bn.running_mean"), mean);
        push_tensor(&mut out, &format!("block{block}.{half}.bn.running_var"), var);
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], GnnError> {
        if self.pos + n > self.bytes.len() {
            return Err(GnnError::Truncated(what.to_string()));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32, GnnError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64, GnnError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64, GnnError> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn tensor(&mut self) -> Result<(String, Tensor), GnnError> {
        let name_len = self.u32("tensor name length")? as usize;
        if name_len > 4096 {
            return Err(GnnError::Format(format!(
                "unreasonable tensor name length {name_len}"
            )));
        }
        let name = String::from_utf8(self.take(name_len, "tensor name")?.to_vec())
            .map_err(|_| GnnError::Format("tensor name is not UTF-8".into()))?;
        let ndim = self.u32("tensor rank")? as usize;
        if ndim > 8 {
            return Err(GnnError::Format(format!("unreasonable tensor rank {ndim}")));
        }
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(self.u64("tensor dim")? as usize);
        }
        let len: usize = shape.iter().product();
        let mut data = Vec::with_capacity(len);
        let raw = self.take(len * 8, &format!("tensor '{name}' data"))?;
        for chunk in raw.chunks_exact(8) {
            data.push(f64::from_le_bytes(chunk.try_into().unwrap()));
        }
        Ok((name, Tensor::from_data(&shape, data)))
    }
}

/// Deserialize a model saved by [`save_model`].
pub fn load_model(bytes: &[u8]) -> Result<GnnModel, GnnError> {
    let mut reader = Reader { bytes, pos: 0 };
    if reader.take(4, "magic")? != MODEL_MAGIC {
        return Err(GnnError::BadMagic);
    }
    let version = reader.u32("container version")?;
    if version != CONTAINER_VERSION {
        return Err(GnnError::UnsupportedVersion(version));
    }
    let schema_version = reader.u32("schema version")?;
    let hidden = reader.u32("hidden")? as usize;
    let n_outputs = reader.u32("n_outputs")? as usize;
    let n_blocks = reader.u32("n_blocks")? as usize;
    let eps = reader.f64("bn eps")?;
    let momentum = reader.f64("bn momentum")?;
    if !(eps.is_finite() && eps > 0.0) || !momentum.is_finite() {
        return Err(GnnError::Format("bad batch-norm header".into()));
    }
    if hidden == 0 || n_outputs == 0 || n_blocks == 0 || n_blocks > 64 {
        return Err(GnnError::Format("bad dimension header".into()));
    }
    if n_blocks != super::model::N_BLOCKS {
        return Err(GnnError::Format(format!(
            "expected {} conv blocks, payload has {n_blocks}",
            super::model::N_BLOCKS
        )));
    }

    // Build a model of the right shape, then fill every tensor by name.
    let mut model = GnnModel::new(hidden, n_outputs, schema_version, 0);
    for block in &mut model.blocks {
        for half in [&mut block.cons_from_var, &mut block.var_from_cons] {
            half.bn.eps = eps;
            half.bn.momentum = momentum;
        }
    }
    let n_tensors = reader.u64("tensor count")? as usize;
    let expected = model.params().len() + 2 * model.running_stats().len();
    if n_tensors != expected {
        return Err(GnnError::Format(format!(
            "expected {expected} tensors, payload has {n_tensors}"
        )));
    }

    let mut loaded: Vec<(String, Tensor)> = Vec::with_capacity(n_tensors);
    for _ in 0..n_tensors {
        loaded.push(reader.tensor()?);
    }
    if reader.pos != bytes.len() {
        return Err(GnnError::Format("trailing bytes after payload".into()));
    }

    let names = model.param_names();
    let mut by_name: std::collections::HashMap<String, Tensor> = loaded.into_iter().collect();
    for (name, param) in names.iter().zip(model.params_mut()) {
        let tensor = by_name
            .remove(name)
            .ok_or_else(|| GnnError::Format(format!("missing tensor '{name}'")))?;
        if tensor.shape() != param.shape() {
            return Err(GnnError::Format(format!(
                "tensor '{name}' has shape {:?}, expected {:?}",
                tensor.shape(),
                param.shape()
            )));
        }
        *param = tensor;
    }
    for block in 0..n_blocks {
        for half in ["cv", "vc"] {
            for stat in ["running_mean", "running_var"] {
                let name = format!("block{block}.{half}.bn.{stat}");
                let tensor = by_name
                    .remove(&name)
                    .ok_or_else(|| GnnError::Format(format!("missing tensor '{name}'")))?;
                if tensor.shape() != [hidden] {
                    return Err(GnnError::Format(format!("tensor '{name}' has a bad shape")));
                }
                let bn = if half == "cv" {
                    &mut model.blocks[block].cons_from_var.bn
                } else {
                    &mut model.blocks[block].var_from_cons.bn
                };
                if stat == "running_mean" {
                    bn.running_mean = tensor;
                } else {
                    bn.running_var = tensor;
                }
            }
        }
    }
    if !by_name.is_empty() {
        return Err(GnnError::Format(format!(
            "unexpected tensors in payload: {:?}",
            by_name.keys().collect::<Vec<_>>()
        )));
    }
    if !model.all_parameters_finite() {
        return Err(GnnError::NonFiniteParameters);
    }
    Ok(model)
}

/// Serialize an ensemble: length-prefixed member payloads.
pub fn save_ensemble(ensemble: &Ensemble) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(ENSEMBLE_MAGIC);
    push_u32(&mut out, CONTAINER_VERSION);
    push_u32(&mut out, ensemble.members().len() as u32);
    for member in ensemble.members() {
        let payload = save_model(member);
        push_u64(&mut out, payload.len() as u64);
        out.extend_from_slice(&payload);
    }
    out
}

/// Deserialize an ensemble saved by [`save_ensemble`].
pub fn load_ensemble(bytes: &[u8]) -> Result<Ensemble, GnnError> {
    let mut reader = Reader { bytes, pos: 0 };
    if reader.take(4, "magic")? != ENSEMBLE_MAGIC {
        return Err(GnnError::BadMagic);
    }
    let version = reader.u32("container version")?;
    if version != CONTAINER_VERSION {
        return Err(GnnError::UnsupportedVersion(version));
    }
    let count = reader.u32("member count")? as usize;
    if count == 0 || count > 4096 {
        return Err(GnnError::Format(format!("bad member count {count}")));
    }
    let mut members = Vec::with_capacity(count);
    for _ in 0..count {
        let len = reader.u64("member length")? as usize;
        let payload = reader.take(len, "member payload")?;
        members.push(load_model(payload)?);
    }
    if reader.pos != bytes.len() {
        return Err(GnnError::Format("trailing bytes after payload".into()));
    }
    Ensemble::new(members)
}
