//! Checkpoint container: magic `GFR1`, a little-endian `u32` header length,
//! a JSON header, then every tensor as little-endian `f32` in header order.

use super::{Module, ParamTensor};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"GFR1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub step: u64,
    /// Free-form configuration record (network and training configs).
    pub meta: serde_json::Value,
    pub tensors: Vec<TensorEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub step: u64,
    pub meta: serde_json::Value,
    tensors: BTreeMap<String, (Vec<usize>, Vec<f32>)>,
    order: Vec<String>,
}

impl Checkpoint {
    pub fn new(step: u64, meta: serde_json::Value) -> Self {
        Self { step, meta, tensors: BTreeMap::new(), order: Vec::new() }
    }

    /// Add all parameters and buffers of `module`. Names must be unique across the checkpoint.
    pub fn add_module(&mut self, module: &dyn Module) -> Result<()> {
        for p in module.params().into_iter().chain(module.buffers()) {
            self.add_tensor(p)?;
        }
        Ok(())
    }

    fn add_tensor(&mut self, p: &ParamTensor) -> Result<()> {
        if self.tensors.contains_key(&p.name) {
            return Err(Error::Config(format!("duplicate tensor name {}", p.name)));
        }
        let vals = p.values.iter().map(|&v| v as f32).collect();
        self.tensors.insert(p.name.clone(), (p.shape.clone(), vals));
        self.order.push(p.name.clone());
        Ok(())
    }

    pub fn tensor_names(&self) -> &[String] {
        &self.order
    }

    pub fn get(&self, name: &str) -> Option<(&[usize], &[f32])> {
        self.tensors.get(name).map(|(s, v)| (s.as_slice(), v.as_slice()))
    }

    /// Overwrite every parameter and buffer of `module` from the checkpoint.
    pub fn load_into(&self, module: &mut dyn Module) -> Result<()> {
        for p in module.params_mut() {
            self.fill(p)?;
        }
        for p in module.buffers_mut() {
            self.fill(p)?;
        }
        Ok(())
    }

    fn fill(&self, p: &mut ParamTensor) -> Result<()> {
        let (shape, vals) = self
            .tensors
            .get(&p.name)
            .ok_or_else(|| Error::Config(format!("checkpoint lacks tensor {}", p.name)))?;
        if *shape != p.shape {
            return Err(Error::Shape(format!(
                "tensor {}: checkpoint shape {:?}, network shape {:?}",
                p.name, shape, p.shape
            )));
        }
        for (dst, &src) in p.values.iter_mut().zip(vals) {
            *dst = src as f64;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = CheckpointHeader {
            step: self.step,
            meta: self.meta.clone(),
            tensors: self
                .order
                .iter()
                .map(|n| TensorEntry { name: n.clone(), shape: self.tensors[n].0.clone() })
                .collect(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::Config(e.to_string()))?;
        let mut out = Vec::with_capacity(8 + json.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for n in &self.order {
            for v in &self.tensors[n].1 {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(Error::parse(0, "missing GFR1 magic"));
        }
        let hlen = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let json = bytes
            .get(8..8 + hlen)
            .ok_or_else(|| Error::parse(4, "header length exceeds file"))?;
        let header: CheckpointHeader =
            serde_json::from_slice(json).map_err(|e| Error::parse(8, format!("bad header: {e}")))?;
        let mut pos = 8 + hlen;
        let mut ck = Checkpoint::new(header.step, header.meta);
        for t in header.tensors {
            let n: usize = t.shape.iter().product();
            let raw = bytes
                .get(pos..pos + 4 * n)
                .ok_or_else(|| Error::parse(pos, format!("truncated tensor {}", t.name)))?;
            let vals = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
            if ck.tensors.insert(t.name.clone(), (t.shape, vals)).is_some() {
                return Err(Error::parse(8, format!("duplicate tensor {}", t.name)));
            }
            ck.order.push(t.name);
            pos += 4 * n;
        }
        if pos != bytes.len() {
            return Err(Error::parse(pos, "trailing bytes after last tensor"));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Round every parameter and buffer to `f32` precision, so that a saved and
/// reloaded network computes bit-identical outputs.
pub fn round_to_f32(module: &mut dyn Module) {
    let round = |p: &mut ParamTensor| p.values.iter_mut().for_each(|v| *v = *v as f32 as f64);
    module.params_mut().into_iter().for_each(round);
    module.buffers_mut().into_iter().for_each(round);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Mode, NetConfig, RecNet, Tensor};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn roundtrip_is_bit_exact_after_rounding() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = NetConfig::new(4, 16).unwrap();
        let mut net = RecNet::new(cfg, 6, &mut rng).unwrap();
        let x = Tensor::randn(1, 6, 16, 16, 1.0, &mut rng);
        net.forward(&x, Mode::Train).unwrap();
        round_to_f32(&mut net);
        let mut ck = Checkpoint::new(3, serde_json::json!({"net": cfg}));
        ck.add_module(&net).unwrap();
        let bytes = ck.to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"GFR1");
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        let mut other = RecNet::new(cfg, 6, &mut ChaCha8Rng::seed_from_u64(99)).unwrap();
        back.load_into(&mut other).unwrap();
        let a = net.forward(&x, Mode::Eval).unwrap();
        let b = other.forward(&x, Mode::Eval).unwrap();
        assert_eq!(a.data, b.data);
    }

    #[test]
    fn malformed_inputs() {
        assert!(Checkpoint::from_bytes(b"XXXX").is_err());
        let mut ck = Checkpoint::new(0, serde_json::Value::Null);
        ck.add_tensor(&ParamTensor::filled("a", &[2], 1.0)).unwrap();
        assert!(ck.add_tensor(&ParamTensor::filled("a", &[2], 1.0)).is_err());
        let mut bytes = ck.to_bytes().unwrap();
        bytes.pop();
        assert!(Checkpoint::from_bytes(&bytes).is_err());
    }
}
