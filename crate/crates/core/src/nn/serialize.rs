//! `TCM1` model files.
//!
//! Little-endian layout:
//!
//! ```text
//! magic        4 bytes  "TCM1"
//! version      i32      1
//! m, k, w, h   4 x i32
//! flags        i32      bit0 include_self, bit1 global_per_streamline,
//!                       bit2 flip_align_context
//! input_scale  f32
//! n_backbone   i32, then n_backbone x i32 widths
//! n_head       i32, then n_head x i32 hidden widths
//! class_count  i32
//! centroid     3 x f32  atlas reference centroid (mm)
//! class names  class_count x (u32 byte length, UTF-8 bytes)
//! parameters   f32, per layer (local-global, backbone, head): weights
//!              (out x in, row-major) then bias
//! ```

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::model::{Hyperparameters, Model, SharedFCLayer};
use super::tensor::Tensor;

pub const MODEL_MAGIC: &[u8; 4] = b"TCM1";
pub const MODEL_VERSION: i32 = 1;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("model file I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a model file (magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported model format {found} (expected {expected})")]
    VersionMismatch { found: String, expected: String },
    #[error("model file truncated at byte {0}")]
    TruncatedFile(usize),
    #[error("corrupt model file: {0}")]
    Corrupt(String),
}

pub fn encode_model(model: &Model) -> Vec<u8> {
    let hp = &model.hyper;
    let mut out = Vec::with_capacity(64 + 4 * model.param_count());
    let put_i32 = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as i32).to_le_bytes());
    let put_f32 = |out: &mut Vec<u8>, v: f64| out.extend_from_slice(&(v as f32).to_le_bytes());

    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    for v in [hp.m, hp.k, hp.w, hp.h] {
        put_i32(&mut out, v);
    }
    let flags = hp.include_self as usize | (hp.global_per_streamline as usize) << 1 | (hp.flip_align_context as usize) << 2;
    put_i32(&mut out, flags);
    put_f32(&mut out, hp.input_scale);
    for dims in [&hp.backbone, &hp.head] {
        put_i32(&mut out, dims.len());
        for &d in dims.iter() {
            put_i32(&mut out, d);
        }
    }
    put_i32(&mut out, hp.class_count);
    for &c in &model.atlas_centroid {
        put_f32(&mut out, c);
    }
    for name in &model.class_names {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
    }
    for p in model.params() {
        for &v in &p.data {
            put_f32(&mut out, v);
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelFileError> {
        if self.bytes.len() - self.pos < n {
            return Err(ModelFileError::TruncatedFile(self.bytes.len()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn i32(&mut self) -> Result<i32, ModelFileError> {
        Ok(i32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn count(&mut self, what: &str) -> Result<usize, ModelFileError> {
        let v = self.i32()?;
        if v < 0 {
            return Err(ModelFileError::Corrupt(format!("negative {what}: {v}")));
        }
        Ok(v as usize)
    }

    fn f32(&mut self) -> Result<f64, ModelFileError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()) as f64)
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<Model, ModelFileError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4)?.try_into().unwrap();
    if &magic != MODEL_MAGIC {
        if &magic[..3] == b"TCM" {
            return Err(ModelFileError::VersionMismatch {
                found: String::from_utf8_lossy(&magic).into_owned(),
                expected: "TCM1".into(),
            });
        }
        return Err(ModelFileError::BadMagic(magic));
    }
    let version = r.i32()?;
    if version != MODEL_VERSION {
        return Err(ModelFileError::VersionMismatch { found: version.to_string(), expected: MODEL_VERSION.to_string() });
    }
    let m = r.count("m")?;
    let k = r.count("k")?;
    let w = r.count("w")?;
    let h = r.count("h")?;
    let flags = r.count("flags")?;
    let input_scale = r.f32()?;
    let mut dims = Vec::new();
    for what in ["backbone", "head"] {
        let n = r.count(what)?;
        if n > 64 {
            return Err(ModelFileError::Corrupt(format!("{n} {what} layers")));
        }
        dims.push((0..n).map(|_| r.count("layer width")).collect::<Result<Vec<_>, _>>()?);
    }
    let class_count = r.count("class_count")?;
    let atlas_centroid = [r.f32()?, r.f32()?, r.f32()?];
    let head = dims.pop().unwrap();
    let backbone = dims.pop().unwrap();
    let hyper = Hyperparameters {
        m,
        k,
        w,
        h,
        backbone,
        head,
        class_count,
        input_scale,
        include_self: flags & 1 != 0,
        global_per_streamline: flags & 2 != 0,
        flip_align_context: flags & 4 != 0,
    };
    hyper.validate().map_err(|e| ModelFileError::Corrupt(e.to_string()))?;

    let mut class_names = Vec::with_capacity(class_count.min(4096));
    for _ in 0..class_count {
        let len = u32::from_le_bytes(r.take(4)?.try_into().unwrap()) as usize;
        let name = std::str::from_utf8(r.take(len)?).map_err(|e| ModelFileError::Corrupt(format!("class name: {e}")))?;
        class_names.push(name.to_string());
    }

    let mut read_layer = |in_dim: usize, out_dim: usize| -> Result<SharedFCLayer, ModelFileError> {
        let mut layer = SharedFCLayer::zeros(in_dim, out_dim);
        for t in [&mut layer.weights, &mut layer.bias] {
            let raw = r.take(4 * t.len())?;
            t.data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
        }
        Ok(layer)
    };
    let localglobal = read_layer(hyper.in_channels(), h)?;
    let mut prev = h;
    let mut backbone_layers = Vec::new();
    for &d in &hyper.backbone {
        backbone_layers.push(read_layer(prev, d)?);
        prev = d;
    }
    let mut head_layers = Vec::new();
    for &d in hyper.head.iter().chain(std::iter::once(&class_count)) {
        head_layers.push(read_layer(prev, d)?);
        prev = d;
    }
    if r.pos != bytes.len() {
        return Err(ModelFileError::Corrupt(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let model = Model { hyper, localglobal, backbone: backbone_layers, head: head_layers, class_names, atlas_centroid };
    if !model.params().iter().all(|t: &&Tensor| t.is_finite()) {
        return Err(ModelFileError::Corrupt("non-finite parameter".into()));
    }
    Ok(model)
}

pub fn save_model(model: &Model, path: &Path) -> Result<(), ModelFileError> {
    fs::write(path, encode_model(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model, ModelFileError> {
    decode_model(&fs::read(path)?)
}
