//! Binary model files: `RSCQ`, a u32 version, an architecture descriptor
//! and the parameters as little-endian f32 in layer order. All integers
//! are little-endian.
//!
//! ```text
//! magic "RSCQ" | version u32 | seed u64 | alpha f64
//! patch u32 | global_inputs u32 | actions u32 | flags u32 | leaky_slope f64
//! layer_count u32 | { kind u32, outputs u32, inputs u32 } * layer_count
//! param_count u64 | f32 * param_count
//! ```
//! `kind` is 0 for a 3x3 stride-2 conv (inputs = channels) and 1 for a
//! dense layer. Flag bit 0 marks the global branch as present.

use std::path::Path;

use super::layers::Linear;
use super::network::{QNetConfig, QNetwork, INPUT_CHANNELS};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"RSCQ";
pub const MODEL_VERSION: u32 = 1;

const KIND_CONV: u32 = 0;
const KIND_DENSE: u32 = 1;
const FLAG_GLOBAL: u32 = 1;

/// Training provenance stored next to the weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelMeta {
    pub seed: u64,
    pub alpha_s: f64,
}

fn layer_desc(l: &Linear<f32>) -> (u32, u32, u32) {
    let shape = l.weight.shape();
    if shape.len() == 4 {
        (KIND_CONV, shape[0] as u32, shape[1] as u32)
    } else {
        (KIND_DENSE, shape[0] as u32, shape[1] as u32)
    }
}

pub fn encode_model(net: &QNetwork<f32>, meta: &ModelMeta) -> Vec<u8> {
    let cfg = net.config();
    let mut out = Vec::with_capacity(256 + 4 * net.param_count());
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&meta.seed.to_le_bytes());
    out.extend_from_slice(&meta.alpha_s.to_le_bytes());
    for v in [cfg.patch as u32, cfg.global_inputs as u32, cfg.actions as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let flags = if cfg.global_branch { FLAG_GLOBAL } else { 0 };
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&cfg.leaky_slope.to_le_bytes());
    let layers = net.layers();
    out.extend_from_slice(&(layers.len() as u32).to_le_bytes());
    for l in &layers {
        let (k, o, i) = layer_desc(l);
        for v in [k, o, i] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.extend_from_slice(&(net.param_count() as u64).to_le_bytes());
    for v in net.flat_params() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Model(format!("model truncated at byte {}", self.at)))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<(QNetwork<f32>, ModelMeta)> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(4)? != MODEL_MAGIC {
        return Err(Error::Model("not a model file (bad magic)".into()));
    }
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(Error::Model(format!("model format version {version}, expected {MODEL_VERSION}")));
    }
    let meta = ModelMeta {
        seed: r.u64()?,
        alpha_s: r.f64()?,
    };
    let patch = r.u32()? as usize;
    let global_inputs = r.u32()? as usize;
    let actions = r.u32()? as usize;
    let flags = r.u32()?;
    let leaky_slope = r.f64()?;
    let count = r.u32()? as usize;
    if count > 64 {
        return Err(Error::Model(format!("implausible layer count {count}")));
    }
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        layers.push((r.u32()?, r.u32()? as usize, r.u32()? as usize));
    }
    let global_branch = flags & FLAG_GLOBAL != 0;
    let expected = 7 + global_branch as usize;
    if count != expected || layers[..4].iter().any(|l| l.0 != KIND_CONV) || layers[4..].iter().any(|l| l.0 != KIND_DENSE) {
        return Err(Error::Model("layer list does not describe a Q-network".into()));
    }
    let mut conv_channels = [0; 4];
    for (c, l) in conv_channels.iter_mut().zip(&layers) {
        *c = l.1;
    }
    let dense = &layers[4..];
    let config = QNetConfig {
        patch,
        conv_channels,
        local_width: dense[0].1,
        global_inputs,
        global_width: if global_branch { dense[1].1 } else { 128 },
        hidden_width: dense[dense.len() - 2].1,
        actions,
        global_branch,
        leaky_slope,
    };
    let mut net = QNetwork::<f32>::zeros(config).map_err(|e| Error::Model(e.to_string()))?;
    let descs: Vec<_> = net.layers().into_iter().map(layer_desc).collect();
    let stored: Vec<_> = layers.iter().map(|&(k, o, i)| (k, o as u32, i as u32)).collect();
    if descs != stored || stored[0].2 != INPUT_CHANNELS as u32 {
        return Err(Error::Model("layer shapes are inconsistent".into()));
    }
    let n = r.u64()? as usize;
    if n != net.param_count() {
        return Err(Error::Model(format!("file has {n} parameters, architecture needs {}", net.param_count())));
    }
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        values.push(r.f32()?);
    }
    if r.at != bytes.len() {
        return Err(Error::Model(format!("{} trailing bytes", bytes.len() - r.at)));
    }
    net.set_flat_params(&values)?;
    Ok((net, meta))
}

pub fn save_model(path: &Path, net: &QNetwork<f32>, meta: &ModelMeta) -> Result<()> {
    std::fs::write(path, encode_model(net, meta)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<(QNetwork<f32>, ModelMeta)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes)
}
