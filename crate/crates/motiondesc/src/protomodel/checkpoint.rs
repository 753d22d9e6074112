//! Checkpoint persistence, little-endian throughout: magic "MDCK",
//! version u32, a length-prefixed JSON blob (model config + epoch), then
//! named f64 arrays. Round trips are bit-exact on every parameter.

use super::{AttnBlock, ModelConfig, ModelError, VisualEncoderParams};
use crate::numkit::Matrix;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

const MAGIC: &[u8; 4] = b"MDCK";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    model: ModelConfig,
    epoch: usize,
}

fn push_array(buf: &mut Vec<u8>, name: &str, values: &[f64]) {
    buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
    buf.extend_from_slice(name.as_bytes());
    buf.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

/// Save encoder parameters plus their config and the epoch they were
/// captured at.
pub fn save_checkpoint(
    params: &VisualEncoderParams,
    cfg: &ModelConfig,
    epoch: usize,
    path: &Path,
) -> Result<(), ModelError> {
    cfg.validate()?;
    params.shapes_match(cfg)?;
    let meta = serde_json::to_vec(&CheckpointMeta {
        model: cfg.clone(),
        epoch,
    })?;

    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    buf.extend_from_slice(&meta);
    push_array(&mut buf, "layer1", params.layer1.as_slice());
    push_array(&mut buf, "layer2", params.layer2.as_slice());
    for (l, block) in params.attn.iter().enumerate() {
        push_array(&mut buf, &format!("attn{l}.wq"), block.wq.as_slice());
        push_array(&mut buf, &format!("attn{l}.wk"), block.wk.as_slice());
        push_array(&mut buf, &format!("attn{l}.wv"), block.wv.as_slice());
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    off: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        if self.off + n > self.bytes.len() {
            return Err(ModelError::Truncated);
        }
        let s = &self.bytes[self.off..self.off + n];
        self.off += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn done(&self) -> bool {
        self.off == self.bytes.len()
    }
}

/// Load a checkpoint; every array must agree with the embedded config's
/// shapes, and no array may be missing or unexpected.
pub fn load_checkpoint(path: &Path) -> Result<(VisualEncoderParams, ModelConfig, usize), ModelError> {
    let bytes = std::fs::read(path)?;
    let mut cur = Cursor {
        bytes: &bytes,
        off: 0,
    };
    if cur.take(4)? != MAGIC {
        return Err(ModelError::BadMagic);
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(ModelError::VersionMismatch(version));
    }
    let meta_len = cur.u32()? as usize;
    let meta: CheckpointMeta = serde_json::from_slice(cur.take(meta_len)?)?;
    let cfg = meta.model;
    cfg.validate()?;

    let mut arrays: HashMap<String, Vec<f64>> = HashMap::new();
    while !cur.done() {
        let name_len = cur.u32()? as usize;
        let name = std::str::from_utf8(cur.take(name_len)?)
            .map_err(|_| ModelError::Layout("array name is not UTF-8".into()))?
            .to_string();
        let count = cur.u64()?;
        if count > (usize::MAX / 8) as u64 {
            return Err(ModelError::Layout(format!("array {name} count overflows")));
        }
        let raw = cur.take(count as usize * 8)?;
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if arrays.insert(name.clone(), values).is_some() {
            return Err(ModelError::Layout(format!("array {name} appears twice")));
        }
    }

    let mut take = |name: &str, rows: usize, cols: usize| -> Result<Matrix, ModelError> {
        let values = arrays
            .remove(name)
            .ok_or_else(|| ModelError::Layout(format!("missing array {name}")))?;
        if values.len() != rows * cols {
            return Err(ModelError::Layout(format!(
                "array {name} has {} values, config wants {}",
                values.len(),
                rows * cols
            )));
        }
        Ok(Matrix::from_vec(rows, cols, values)?)
    };

    let layer1 = take("layer1", cfg.input_dim, cfg.hidden_dim)?;
    let layer2 = take("layer2", cfg.hidden_dim, cfg.embed_dim)?;
    let mut attn = Vec::with_capacity(cfg.active_blocks());
    for l in 0..cfg.active_blocks() {
        attn.push(AttnBlock {
            wq: take(&format!("attn{l}.wq"), cfg.embed_dim, cfg.embed_dim)?,
            wk: take(&format!("attn{l}.wk"), cfg.embed_dim, cfg.embed_dim)?,
            wv: take(&format!("attn{l}.wv"), cfg.embed_dim, cfg.embed_dim)?,
        });
    }
    if let Some(extra) = arrays.keys().next() {
        return Err(ModelError::Layout(format!("unexpected array {extra}")));
    }

    let params = VisualEncoderParams {
        layer1,
        layer2,
        attn,
    };
    params.shapes_match(&cfg)?;
    Ok((params, cfg, meta.epoch))
}

#[cfg(test)]
mod tests {
    use super::super::{init_seeded_dense, TemporalMode};
    use super::*;

    fn cfg() -> ModelConfig {
        ModelConfig {
            input_dim: 3,
            hidden_dim: 4,
            embed_dim: 3,
            frames: 2,
            temporal: TemporalMode::Attention,
            attn_layers: 2,
            normalize_features: false,
            temperature: 1.0,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.mdck");
        let cfg = cfg();
        let params = init_seeded_dense(&cfg, 77);
        save_checkpoint(&params, &cfg, 9, &path).unwrap();
        let (loaded, loaded_cfg, epoch) = load_checkpoint(&path).unwrap();
        assert_eq!(loaded_cfg, cfg);
        assert_eq!(epoch, 9);
        let a = params.flatten();
        let b = loaded.flatten();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.mdck");
        let cfg = cfg();
        save_checkpoint(&init_seeded_dense(&cfg, 1), &cfg, 0, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'Z';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(ModelError::BadMagic)));
    }

    #[test]
    fn wrong_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.mdck");
        let cfg = cfg();
        save_checkpoint(&init_seeded_dense(&cfg, 1), &cfg, 0, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4] = 7;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(ModelError::VersionMismatch(7))
        ));
    }

    #[test]
    fn truncated_checkpoint_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.mdck");
        let cfg = cfg();
        save_checkpoint(&init_seeded_dense(&cfg, 1), &cfg, 0, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(ModelError::Truncated)));
    }

    #[test]
    fn config_array_disagreement_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.mdck");
        let cfg = cfg();
        save_checkpoint(&init_seeded_dense(&cfg, 1), &cfg, 0, &path).unwrap();
        // Flip hidden_dim 4 -> 5 inside the embedded JSON config (same byte
        // length) so arrays no longer match the config.
        let bytes = std::fs::read(&path).unwrap();
        let text: Vec<u8> = bytes.clone();
        let needle = b"\"hidden_dim\":4";
        let pos = text
            .windows(needle.len())
            .position(|w| w == needle)
            .expect("config field present");
        let mut patched = bytes;
        patched[pos + needle.len() - 1] = b'5';
        std::fs::write(&path, &patched).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(ModelError::Layout(_))));
    }
}
