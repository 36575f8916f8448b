//! Binary checkpoint format.
//!
//! ```text
//! "HGAM" | version: u32 | count: u32 |
//!   count × ( name_len: u32 | name bytes | rows: u32 | cols: u32 | rows·cols × f64 )
//! ```
//!
//! All integers and floats are little-endian.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::optim::ParamSet;
use super::tensor::Tensor2;
use crate::error::{HgamError, Result};

pub const MAGIC: &[u8; 4] = b"HGAM";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_tensors<W: Write>(out: &mut W, entries: &[(String, Tensor2)]) -> std::io::Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(entries.len() as u32).to_le_bytes())?;
    for (name, t) in entries {
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
        out.write_all(&(t.rows() as u32).to_le_bytes())?;
        out.write_all(&(t.cols() as u32).to_le_bytes())?;
        for v in t.data() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_tensors<R: Read>(input: &mut R) -> std::result::Result<Vec<(String, Tensor2)>, String> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic).map_err(|e| format!("reading header: {e}"))?;
    if &magic != MAGIC {
        return Err("bad magic bytes".into());
    }
    let version = read_u32(input).map_err(|e| e.to_string())?;
    if version != FORMAT_VERSION {
        return Err(format!("unsupported format version {version}"));
    }
    let count = read_u32(input).map_err(|e| e.to_string())? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let len = read_u32(input).map_err(|e| e.to_string())? as usize;
        let mut name = vec![0u8; len];
        input.read_exact(&mut name).map_err(|e| format!("reading name: {e}"))?;
        let name = String::from_utf8(name).map_err(|_| "tensor name is not UTF-8".to_string())?;
        let rows = read_u32(input).map_err(|e| e.to_string())? as usize;
        let cols = read_u32(input).map_err(|e| e.to_string())? as usize;
        let mut data = Vec::with_capacity(rows * cols);
        let mut b = [0u8; 8];
        for _ in 0..rows * cols {
            input.read_exact(&mut b).map_err(|e| format!("reading {name}: {e}"))?;
            data.push(f64::from_le_bytes(b));
        }
        out.push((name, Tensor2::from_vec(rows, cols, data)));
    }
    let mut trailing = [0u8; 1];
    if input.read(&mut trailing).map_err(|e| e.to_string())? != 0 {
        return Err("trailing bytes after last tensor".into());
    }
    Ok(out)
}

pub fn save(path: &Path, entries: &[(String, Tensor2)]) -> Result<()> {
    let err = |reason: String| HgamError::Checkpoint { path: path.to_path_buf(), reason };
    let file = File::create(path).map_err(|e| err(e.to_string()))?;
    let mut w = BufWriter::new(file);
    write_tensors(&mut w, entries).map_err(|e| err(e.to_string()))?;
    w.flush().map_err(|e| err(e.to_string()))
}

pub fn load(path: &Path) -> Result<Vec<(String, Tensor2)>> {
    let err = |reason: String| HgamError::Checkpoint { path: path.to_path_buf(), reason };
    let file = File::open(path).map_err(|e| err(e.to_string()))?;
    read_tensors(&mut BufReader::new(file)).map_err(err)
}

/// Name → tensor lookup used while restoring parameter sets.
pub struct TensorStore {
    tensors: HashMap<String, Tensor2>,
}

impl TensorStore {
    pub fn new(entries: Vec<(String, Tensor2)>) -> Self {
        TensorStore { tensors: entries.into_iter().collect() }
    }

    /// Removes and returns `name`, checking its shape against `expected`.
    pub fn take(&mut self, name: &str, expected: (usize, usize)) -> std::result::Result<Tensor2, String> {
        let t = self.tensors.remove(name).ok_or_else(|| format!("missing tensor {name}"))?;
        if t.shape() != expected {
            return Err(format!("tensor {name} has shape {:?}, expected {:?}", t.shape(), expected));
        }
        Ok(t)
    }

    pub fn remaining(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self.tensors.keys().map(String::as_str).collect();
        names.sort_unstable();
        names
    }
}

impl ParamSet {
    /// Online weights, target weights, Adam moments and step counter under
    /// `prefix`.
    pub fn checkpoint_entries(&self, prefix: &str) -> Vec<(String, Tensor2)> {
        let mut out = Vec::new();
        for (part, net) in [
            ("online", &self.online),
            ("target", &self.target),
            ("adam_m", &self.adam.first),
            ("adam_v", &self.adam.second),
        ] {
            for (name, t) in net.named_tensors() {
                out.push((format!("{prefix}.{part}.{name}"), t.clone()));
            }
        }
        out.push((format!("{prefix}.adam_step"), Tensor2::from_vec(1, 1, vec![self.adam.step as f64])));
        out
    }

    pub fn restore_entries(&mut self, prefix: &str, store: &mut TensorStore) -> std::result::Result<(), String> {
        for (part, net) in [
            ("online", &mut self.online),
            ("target", &mut self.target),
            ("adam_m", &mut self.adam.first),
            ("adam_v", &mut self.adam.second),
        ] {
            let names: Vec<String> = net.named_tensors().into_iter().map(|(n, _)| n).collect();
            for (name, slot) in names.iter().zip(net.tensors_mut()) {
                *slot = store.take(&format!("{prefix}.{part}.{name}"), slot.shape())?;
            }
        }
        let step = store.take(&format!("{prefix}.adam_step"), (1, 1))?;
        self.adam.step = step.get(0, 0) as u64;
        Ok(())
    }
}
