//! Binary checkpoint format: an 8-byte magic, a little-endian `u32` format
//! version, a little-endian `u32` header length, a JSON header listing the
//! hyper-parameters and every tensor's name and shape, then all tensors as
//! little-endian `f32` in header order.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::{Hyper, ModelParams};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"NIMODEL\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    hyper: Hyper,
    tensors: Vec<TensorEntry>,
}

pub fn save_checkpoint(path: &Path, params: &ModelParams<f32>) -> Result<()> {
    let tensors = params.tensors();
    let header = Header {
        hyper: params.hyper.clone(),
        tensors: tensors.iter().map(|t| TensorEntry { name: t.0.clone(), shape: t.2.clone() }).collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let payload: usize = tensors.iter().map(|t| t.3.len() * 4).sum();
    let mut buf = Vec::with_capacity(16 + json.len() + payload);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&json);
    for t in &tensors {
        for v in t.3 {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    // write to a sibling file first so a crash never leaves a torn checkpoint
    let tmp = path.with_extension("partial");
    let mut f = fs::File::create(&tmp)?;
    f.write_all(&buf)?;
    f.sync_all()?;
    drop(f);
    fs::rename(&tmp, path)?;
    Ok(())
}

fn take<'a>(bytes: &'a [u8], at: &mut usize, len: usize, what: &str) -> Result<&'a [u8]> {
    let end = at.checked_add(len).filter(|&e| e <= bytes.len());
    match end {
        Some(end) => {
            let out = &bytes[*at..end];
            *at = end;
            Ok(out)
        }
        None => Err(Error::Checkpoint(format!("truncated checkpoint while reading {what}"))),
    }
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams<f32>> {
    let bytes = fs::read(path)?;
    let mut at = 0;
    if take(&bytes, &mut at, 8, "magic")? != MAGIC {
        return Err(Error::Checkpoint("not a model checkpoint".into()));
    }
    let version = u32::from_le_bytes(take(&bytes, &mut at, 4, "version")?.try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})"
        )));
    }
    let hlen = u32::from_le_bytes(take(&bytes, &mut at, 4, "header length")?.try_into().unwrap()) as usize;
    let header: Header = serde_json::from_slice(take(&bytes, &mut at, hlen, "header")?)
        .map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
    if header.hyper.d == 0 || header.hyper.layers == 0 {
        return Err(Error::Checkpoint("header has zero width or depth".into()));
    }
    let mut params = ModelParams::<f32>::init(header.hyper.clone(), crate::instances::RngSeed(0));
    let expected: Vec<(String, Vec<usize>)> = params.tensors().into_iter().map(|t| (t.0, t.2)).collect();
    if header.tensors.len() != expected.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint lists {} tensors, architecture has {}",
            header.tensors.len(),
            expected.len()
        )));
    }
    for (entry, (name, shape)) in header.tensors.iter().zip(&expected) {
        if &entry.name != name || &entry.shape != shape {
            return Err(Error::Checkpoint(format!(
                "tensor {} has shape {:?}, expected {name} with shape {shape:?}",
                entry.name, entry.shape
            )));
        }
    }
    for ((name, _, data), _) in params.tensors_mut().into_iter().zip(&expected) {
        let raw = take(&bytes, &mut at, data.len() * 4, &format!("tensor {name}"))?;
        for (v, chunk) in data.iter_mut().zip(raw.chunks_exact(4)) {
            *v = f32::from_le_bytes(chunk.try_into().unwrap());
        }
    }
    if at != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes after the last tensor", bytes.len() - at)));
    }
    Ok(params)
}

/// Loads a checkpoint and checks that its architecture matches `hyper`.
pub fn load_checkpoint_expecting(path: &Path, hyper: &Hyper) -> Result<ModelParams<f32>> {
    let params = load_checkpoint(path)?;
    let h = &params.hyper;
    if h.problem != hyper.problem {
        return Err(Error::Checkpoint(format!("checkpoint is for {}, expected {}", h.problem, hyper.problem)));
    }
    let want = ModelParams::<f32>::init(hyper.clone(), crate::instances::RngSeed(0)).zeros_like();
    let want = want.tensors();
    let got = params.tensors();
    for (name, _, shape, _) in &want {
        match got.iter().find(|t| &t.0 == name) {
            None => return Err(Error::Checkpoint(format!("tensor {name} is missing from the checkpoint"))),
            Some(t) if &t.2 != shape => {
                return Err(Error::Checkpoint(format!(
                    "tensor {name} has shape {:?} in the checkpoint, expected {shape:?}",
                    t.2
                )))
            }
            Some(_) => {}
        }
    }
    if got.len() != want.len() {
        return Err(Error::Checkpoint(format!("checkpoint has {} layers, expected {}", h.layers, hyper.layers)));
    }
    if h.clip != hyper.clip {
        return Err(Error::Checkpoint(format!("checkpoint logit clip is {}, expected {}", h.clip, hyper.clip)));
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{ProblemKind, RngSeed};

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let mut p = ModelParams::<f32>::init(Hyper::new(8, 2, ProblemKind::Tsp), RngSeed(4));
        p.layers[1].edge_norm.running_var.fill(0.37);
        save_checkpoint(&path, &p).unwrap();
        assert_eq!(load_checkpoint(&path).unwrap(), p);
    }

    #[test]
    fn truncation_and_mismatch_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let p = ModelParams::<f32>::init(Hyper::new(8, 2, ProblemKind::Prp), RngSeed(4));
        save_checkpoint(&path, &p).unwrap();

        let err = load_checkpoint_expecting(&path, &Hyper::new(16, 2, ProblemKind::Prp)).unwrap_err();
        assert!(err.to_string().contains("node_proj.weight"), "{err}");

        let bytes = fs::read(&path).unwrap();
        let cut = dir.path().join("cut.ckpt");
        fs::write(&cut, &bytes[..bytes.len() - 2]).unwrap();
        let err = load_checkpoint(&cut).unwrap_err();
        assert!(matches!(err, Error::Checkpoint(_)));
        assert!(err.to_string().contains("decoder.3.bias"), "{err}");

        fs::write(&cut, b"garbage").unwrap();
        assert!(matches!(load_checkpoint(&cut), Err(Error::Checkpoint(_))));
    }
}
