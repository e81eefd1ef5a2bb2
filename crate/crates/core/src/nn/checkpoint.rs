//! Network checkpoints: an 8-byte little-endian header length, a JSON header,
//! then every parameter as a little-endian `f64`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::mlp::Mlp;
use crate::scalar::Scalar;

pub const CHECKPOINT_VERSION: &str = "fimstar-ckpt-1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: String,
    pub networks: Vec<NetworkEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkEntry {
    pub name: String,
    /// Layer widths, input first.
    pub widths: Vec<usize>,
    pub hidden_activation: String,
    pub output_activation: String,
    /// Offset into the parameter block, in values.
    pub offset: usize,
    pub len: usize,
}

pub fn write_checkpoint<T: Scalar, W: Write>(mut out: W, networks: &[(&str, &Mlp<T>)]) -> Result<()> {
    let mut entries = Vec::with_capacity(networks.len());
    let mut offset = 0;
    for (name, net) in networks {
        let len = net.num_params();
        entries.push(NetworkEntry {
            name: name.to_string(),
            widths: net.widths(),
            hidden_activation: "relu".into(),
            output_activation: "identity".into(),
            offset,
            len,
        });
        offset += len;
    }
    let header = serde_json::to_vec(&CheckpointHeader { version: CHECKPOINT_VERSION.into(), networks: entries })?;
    out.write_all(&(header.len() as u64).to_le_bytes())?;
    out.write_all(&header)?;
    for (_, net) in networks {
        for v in net.flat_params() {
            out.write_all(&v.as_f64().to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_checkpoint<T: Scalar, R: Read>(mut input: R) -> Result<Vec<(String, Mlp<T>)>> {
    let mut len_bytes = [0u8; 8];
    input.read_exact(&mut len_bytes)?;
    let header_len = u64::from_le_bytes(len_bytes) as usize;
    if header_len > 1 << 24 {
        return Err(Error::Checkpoint(format!("implausible header length {header_len}")));
    }
    let mut header_bytes = vec![0u8; header_len];
    input.read_exact(&mut header_bytes)?;
    let header: CheckpointHeader = serde_json::from_slice(&header_bytes)?;
    if header.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version `{}`", header.version)));
    }
    let mut data = Vec::new();
    input.read_to_end(&mut data)?;
    if data.len() % 8 != 0 {
        return Err(Error::Checkpoint("parameter block is not a whole number of f64 values".into()));
    }
    let values: Vec<f64> = data.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    header
        .networks
        .into_iter()
        .map(|entry| {
            let mut net = Mlp::<T>::zeros(&entry.widths)?;
            if entry.len != net.num_params() || entry.offset + entry.len > values.len() {
                return Err(Error::Checkpoint(format!("network `{}` has an inconsistent parameter block", entry.name)));
            }
            let params: Vec<T> = values[entry.offset..entry.offset + entry.len].iter().map(|&v| T::of(v)).collect();
            net.set_flat_params(&params)?;
            Ok((entry.name, net))
        })
        .collect()
}
