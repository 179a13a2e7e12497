//! Binary model files: `ANAVMLP1`, a little-endian `u32` layer count, each
//! layer's `(inputs, outputs)` as `u32`s, the activation id as one byte,
//! then every layer's weights followed by its biases as `f64`s.

use std::path::Path;

use super::net::{Activation, Layer, MlpModel};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"ANAVMLP1";

pub fn model_to_bytes(model: &MlpModel) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    out.extend((model.layers.len() as u32).to_le_bytes());
    for l in &model.layers {
        out.extend((l.inputs as u32).to_le_bytes());
        out.extend((l.outputs as u32).to_le_bytes());
    }
    out.push(model.activation.id());
    for l in &model.layers {
        for v in l.weights.iter().chain(&l.biases) {
            out.extend(v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<usize, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f64s(&mut self, n: usize) -> std::result::Result<Vec<f64>, String> {
        let raw = self.take(n.checked_mul(8).ok_or("size overflow")?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn model_from_bytes(bytes: &[u8]) -> std::result::Result<MlpModel, String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len())? != MAGIC {
        return Err("bad magic bytes".into());
    }
    let count = r.u32()?;
    if count == 0 {
        return Err("model has no layers".into());
    }
    let mut dims = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        dims.push((r.u32()?, r.u32()?));
    }
    if dims.windows(2).any(|w| w[0].1 != w[1].0) || dims.last().unwrap().1 != 1 {
        return Err(format!("layer shapes {dims:?} do not chain to one output"));
    }
    let id = r.take(1)?[0];
    let activation =
        Activation::from_id(id).ok_or_else(|| format!("unknown activation id {id}"))?;
    let mut layers = Vec::with_capacity(dims.len());
    for (inputs, outputs) in dims {
        let weights = r.f64s(inputs.checked_mul(outputs).ok_or("size overflow")?)?;
        let biases = r.f64s(outputs)?;
        layers.push(Layer {
            inputs,
            outputs,
            weights,
            biases,
        });
    }
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    Ok(MlpModel {
        layers,
        activation,
        loss_history: Vec::new(),
    })
}

/// The loss history is not stored.
pub fn save_model(model: &MlpModel, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<MlpModel> {
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::io(path, e),
    })?;
    model_from_bytes(&bytes).map_err(|msg| Error::Malformed {
        what: "model file",
        path: path.to_path_buf(),
        msg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlpnav::MlpConfig;

    #[test]
    fn round_trip_is_bit_exact() {
        let cfg = MlpConfig {
            hidden_layers: vec![5, 3],
            activation: Activation::Relu,
            seed: 9,
            ..MlpConfig::default()
        };
        let model = MlpModel::init(&cfg, 7, true).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        save_model(&model, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back.layers, model.layers);
        let x = [0.1, 0.9, 0.3, 0.4, 0.5, 0.2, 0.7];
        assert_eq!(
            back.predict(&x).unwrap().to_bits(),
            model.predict(&x).unwrap().to_bits()
        );
        let bytes = model_to_bytes(&model);
        assert_eq!(&bytes[..8], b"ANAVMLP1");
        assert_eq!(bytes.len(), 8 + 4 + 3 * 8 + 1 + 8 * model.parameter_count());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let model = MlpModel::init(&MlpConfig::default(), 3, true).unwrap();
        let bytes = model_to_bytes(&model);
        assert!(model_from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(model_from_bytes(&bad).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(model_from_bytes(&extra).is_err());
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("none.bin");
        assert!(matches!(load_model(&missing), Err(Error::MissingFile(_))));
    }
}
