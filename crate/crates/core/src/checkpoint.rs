//! Parameter checkpoints.
//!
//! Layout: `u64` little-endian header length, the JSON header, then every
//! tensor's values as little-endian `f32`, in header order.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{NetSpec, Network};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("checkpoint format version {found}, expected {FORMAT_VERSION}")]
    Version { found: u32 },
    #[error("checkpoint is truncated or has trailing bytes")]
    Length,
    #[error("checkpoint was written for config {found}, current config hashes to {expected}")]
    ConfigMismatch { expected: String, found: String },
    #[error("checkpoint has no network {0:?}")]
    MissingNetwork(String),
    #[error("checkpoint network {name:?} does not match the expected shape")]
    Shape { name: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    /// `hanabi` or `matrix`.
    pub kind: String,
    pub config_hash: String,
    /// Network specs keyed by prefix (e.g. `""`, `"p1"`).
    pub networks: Vec<(String, NetSpec)>,
    pub tensors: Vec<TensorEntry>,
    /// Free-form run information (effective config, step counts).
    pub meta: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub values: Vec<f32>,
}

fn prefixed(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_owned()
    } else {
        format!("{prefix}.{name}")
    }
}

/// FNV-1a over the canonical JSON of `value`, as 16 hex digits.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config serialises");
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

impl Checkpoint {
    pub fn from_networks(kind: &str, config_hash: String, meta: serde_json::Value, nets: &[(&str, &Network)]) -> Self {
        let mut tensors = Vec::new();
        let mut values = Vec::new();
        for (prefix, net) in nets {
            for b in net.spec.blocks() {
                tensors.push(TensorEntry {
                    name: prefixed(prefix, &b.name),
                    shape: b.shape.clone(),
                });
                values.extend(net.params[b.range()].iter().map(|&v| v as f32));
            }
        }
        Checkpoint {
            header: CheckpointHeader {
                format_version: FORMAT_VERSION,
                kind: kind.to_owned(),
                config_hash,
                networks: nets.iter().map(|(p, n)| (p.to_string(), n.spec.clone())).collect(),
                tensors,
                meta,
            },
            values,
        }
    }

    /// Rebuilds the network stored under `prefix`.
    pub fn network(&self, prefix: &str) -> Result<Network, CheckpointError> {
        let spec = self
            .header
            .networks
            .iter()
            .find(|(p, _)| p == prefix)
            .map(|(_, s)| s.clone())
            .ok_or_else(|| CheckpointError::MissingNetwork(prefix.to_owned()))?;
        let mut params = Vec::with_capacity(spec.n_params());
        for b in spec.blocks() {
            let name = prefixed(prefix, &b.name);
            let mut offset = 0;
            let mut found = false;
            for t in &self.header.tensors {
                let len: usize = t.shape.iter().product();
                if t.name == name {
                    if t.shape != b.shape {
                        return Err(CheckpointError::Shape { name });
                    }
                    params.extend(self.values[offset..offset + len].iter().map(|&v| f64::from(v)));
                    found = true;
                    break;
                }
                offset += len;
            }
            if !found {
                return Err(CheckpointError::Shape { name });
            }
        }
        Network::from_params(spec, params).map_err(|_| CheckpointError::Shape { name: prefix.to_owned() })
    }

    pub fn check_hash(&self, expected: &str) -> Result<(), CheckpointError> {
        if self.header.config_hash != expected {
            return Err(CheckpointError::ConfigMismatch {
                expected: expected.to_owned(),
                found: self.header.config_hash.clone(),
            });
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header).expect("header serialises");
        let mut out = Vec::with_capacity(8 + header.len() + 4 * self.values.len());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        if bytes.len() < 8 {
            return Err(CheckpointError::Length);
        }
        let hlen = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
        let body = bytes.get(8..).ok_or(CheckpointError::Length)?;
        if body.len() < hlen {
            return Err(CheckpointError::Length);
        }
        let header: CheckpointHeader = serde_json::from_slice(&body[..hlen])?;
        if header.format_version != FORMAT_VERSION {
            return Err(CheckpointError::Version {
                found: header.format_version,
            });
        }
        let data = &body[hlen..];
        let expected: usize = header.tensors.iter().map(|t| t.shape.iter().product::<usize>()).sum();
        if data.len() != 4 * expected {
            return Err(CheckpointError::Length);
        }
        let values = data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Checkpoint { header, values })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
        let tmp = path.as_ref().with_extension("tmp");
        {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes())?;
            f.sync_all()?;
        }
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CheckpointError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(seed: u64) -> Network {
        Network::init(
            NetSpec {
                dense_inputs: 3,
                sparse_inputs: 2,
                hidden: vec![4, 3],
                n_actions: 2,
            },
            seed,
        )
    }

    #[test]
    fn round_trip_two_networks() {
        let (a, b) = (net(1), net(2));
        let ck = Checkpoint::from_networks("matrix", "abc".into(), serde_json::json!({"k": 1}), &[("p1", &a), ("p2", &b)]);
        let back = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
        assert_eq!(back, ck);
        let a2 = back.network("p1").unwrap();
        for (x, y) in a2.params.iter().zip(&a.params) {
            assert_eq!(*x, *y as f32 as f64);
        }
        assert!(back.network("p3").is_err());
        assert!(back.check_hash("abc").is_ok());
        assert!(matches!(back.check_hash("abd"), Err(CheckpointError::ConfigMismatch { .. })));
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let ck = Checkpoint::from_networks("hanabi", "h".into(), serde_json::Value::Null, &[("", &net(3))]);
        let bytes = ck.to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(Checkpoint::from_bytes(&bytes[..4]).is_err());
        let mut v2 = ck.clone();
        v2.header.format_version = 99;
        assert!(matches!(Checkpoint::from_bytes(&v2.to_bytes()), Err(CheckpointError::Version { .. })));
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        assert_eq!(config_hash(&(1, "a")), config_hash(&(1, "a")));
        assert_ne!(config_hash(&(1, "a")), config_hash(&(2, "a")));
    }
}
