//! On-disk network snapshots.
//!
//! A checkpoint is one line of JSON (format tag, network config, free-form
//! metadata and a tensor table) followed by the raw parameters as
//! little-endian `f32`. Loading rejects any tensor whose name or shape does
//! not match the layout implied by the stored config.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, NetConfig, NetParams, Result, TensorSpec};

const FORMAT: &str = "swarmtrack-qnet/1";

#[derive(Debug, Serialize, Deserialize)]
struct NetEntry {
    name: String,
    tensors: Vec<StoredTensor>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StoredTensor {
    name: String,
    shape: Vec<usize>,
    /// Byte offset into the blob.
    byte_offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    config: NetConfig,
    meta: serde_json::Value,
    nets: Vec<NetEntry>,
}

/// Named networks sharing one config, plus metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: NetConfig,
    pub meta: serde_json::Value,
    pub nets: Vec<(String, NetParams<f32>)>,
}

impl Checkpoint {
    pub fn new(config: NetConfig, meta: serde_json::Value) -> Self {
        Self { config, meta, nets: Vec::new() }
    }

    pub fn with_net(mut self, name: &str, params: NetParams<f32>) -> Result<Self> {
        if params.config != self.config {
            return Err(Error::Checkpoint(format!("net {name} has a different config")));
        }
        self.nets.push((name.to_string(), params));
        Ok(self)
    }

    pub fn net(&self, name: &str) -> Option<&NetParams<f32>> {
        self.nets.iter().find(|(n, _)| n == name).map(|(_, p)| p)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let mut offset = 0;
        let mut nets = Vec::with_capacity(self.nets.len());
        for (name, p) in &self.nets {
            let tensors = p
                .tensors()
                .map(|(t, _)| StoredTensor {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    byte_offset: offset + 4 * t.offset,
                })
                .collect();
            offset += 4 * p.len();
            nets.push(NetEntry { name: name.clone(), tensors });
        }
        let manifest = Manifest { format: FORMAT.into(), config: self.config.clone(), meta: self.meta.clone(), nets };
        serde_json::to_writer(&mut w, &manifest)?;
        w.write_all(b"\n")?;
        for (_, p) in &self.nets {
            let mut buf = Vec::with_capacity(4 * p.len());
            for v in &p.data {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut r = BufReader::new(r);
        let mut line = String::new();
        r.read_line(&mut line)?;
        let manifest: Manifest = serde_json::from_str(line.trim_end())?;
        if manifest.format != FORMAT {
            return Err(Error::Checkpoint(format!("unknown format {:?}", manifest.format)));
        }
        let mut blob = Vec::new();
        r.read_to_end(&mut blob)?;

        let template = NetParams::<f32>::zeros(&manifest.config)
            .map_err(|e| Error::Checkpoint(format!("stored config invalid: {e}")))?;
        let mut nets = Vec::with_capacity(manifest.nets.len());
        for entry in manifest.nets {
            let mut p = template.clone();
            check_table(&entry, &p.layout.tensors)?;
            for (stored, spec) in entry.tensors.iter().zip(p.layout.tensors.clone()) {
                let end = stored.byte_offset + 4 * spec.len();
                let bytes = blob.get(stored.byte_offset..end).ok_or_else(|| {
                    Error::Checkpoint(format!("tensor {}.{} runs past end of data", entry.name, spec.name))
                })?;
                for (dst, chunk) in p.data[spec.offset..spec.offset + spec.len()].iter_mut().zip(bytes.chunks_exact(4)) {
                    *dst = f32::from_le_bytes(chunk.try_into().unwrap());
                }
            }
            nets.push((entry.name, p));
        }
        Ok(Self { config: manifest.config, meta: manifest.meta, nets })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(fs::File::open(path)?)
    }
}

fn check_table(entry: &NetEntry, expected: &[TensorSpec]) -> Result<()> {
    if entry.tensors.len() != expected.len() {
        return Err(Error::Checkpoint(format!(
            "net {} stores {} tensors, config implies {}",
            entry.name,
            entry.tensors.len(),
            expected.len()
        )));
    }
    for (s, e) in entry.tensors.iter().zip(expected) {
        if s.name != e.name || s.shape != e.shape {
            return Err(Error::Checkpoint(format!(
                "net {}: stored tensor {} {:?} does not match expected {} {:?}",
                entry.name, s.name, s.shape, e.name, e.shape
            )));
        }
    }
    Ok(())
}
