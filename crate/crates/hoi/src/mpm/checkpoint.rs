//! Versioned binary checkpoint for the classifier.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic            4 bytes  "MPM1"
//! version          u32
//! input            u32
//! hidden           u32
//! classes          u32
//! layers           u32
//! tensor count     u32
//! per tensor:      name_len u8, name bytes (ASCII), rank u8, dims u32 * rank
//! data             f64 * total, in tensor order
//! ```

use std::path::Path;

use crate::mpm::{build_layout, MpmError, MpmNetwork, NetworkShape};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"MPM1";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_checkpoint(net: &MpmNetwork) -> Vec<u8> {
    let shape = net.shape();
    let mut out = Vec::with_capacity(32 + net.param_count() * 8);
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for v in [shape.input, shape.hidden, shape.classes, shape.layers] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    let layout = net.layout();
    out.extend_from_slice(&(layout.len() as u32).to_le_bytes());
    for entry in layout {
        let name = entry.name.as_bytes();
        out.push(name.len() as u8);
        out.extend_from_slice(name);
        out.push(entry.dims.len() as u8);
        for d in &entry.dims {
            out.extend_from_slice(&(*d as u32).to_le_bytes());
        }
    }
    for v in net.params() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn save_checkpoint(net: &MpmNetwork, path: &Path) -> Result<(), MpmError> {
    std::fs::write(path, encode_checkpoint(net))?;
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], MpmError> {
        if self.pos + n > self.data.len() {
            return Err(MpmError::Checkpoint("truncated file".into()));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, MpmError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8, MpmError> {
        Ok(self.take(1)?[0])
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<MpmNetwork, MpmError> {
    let mut c = Cursor {
        data: bytes,
        pos: 0,
    };
    if c.take(4)? != CHECKPOINT_MAGIC {
        return Err(MpmError::Checkpoint("bad magic".into()));
    }
    let version = c.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(MpmError::Checkpoint(format!(
            "unsupported version {version}"
        )));
    }
    let shape = NetworkShape {
        input: c.u32()? as usize,
        hidden: c.u32()? as usize,
        classes: c.u32()? as usize,
        layers: c.u32()? as usize,
    };
    let (expected_layout, total) = build_layout(&shape);
    let count = c.u32()? as usize;
    if count != expected_layout.len() {
        return Err(MpmError::Checkpoint(format!(
            "tensor count {count} does not match shape (expected {})",
            expected_layout.len()
        )));
    }
    for expected in &expected_layout {
        let name_len = c.u8()? as usize;
        let name = std::str::from_utf8(c.take(name_len)?)
            .map_err(|_| MpmError::Checkpoint("non-UTF8 tensor name".into()))?;
        if name != expected.name {
            return Err(MpmError::Checkpoint(format!(
                "tensor name {name:?}, expected {:?}",
                expected.name
            )));
        }
        let rank = c.u8()? as usize;
        if rank != expected.dims.len() {
            return Err(MpmError::Checkpoint(format!(
                "tensor {name}: bad rank {rank}"
            )));
        }
        for dim in &expected.dims {
            let got = c.u32()? as usize;
            if got != *dim {
                return Err(MpmError::Checkpoint(format!(
                    "tensor {name}: dim {got}, expected {dim}"
                )));
            }
        }
    }
    let mut params = Vec::with_capacity(total);
    for _ in 0..total {
        let raw = c.take(8)?;
        let v = f64::from_le_bytes(raw.try_into().unwrap());
        if !v.is_finite() {
            return Err(MpmError::Checkpoint("non-finite parameter".into()));
        }
        params.push(v);
    }
    if c.pos != bytes.len() {
        return Err(MpmError::Checkpoint("trailing bytes".into()));
    }
    MpmNetwork::from_params(shape, params)
}

pub fn load_checkpoint(path: &Path) -> Result<MpmNetwork, MpmError> {
    decode_checkpoint(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_everything() {
        let net = MpmNetwork::new(
            NetworkShape {
                input: 6,
                hidden: 4,
                classes: 3,
                layers: 2,
            },
            5,
        );
        let bytes = encode_checkpoint(&net);
        let back = decode_checkpoint(&bytes).unwrap();
        assert_eq!(net.shape(), back.shape());
        assert_eq!(net.params(), back.params());
    }

    #[test]
    fn identical_networks_encode_identically() {
        let a = MpmNetwork::new(NetworkShape::default_mpm(), 9);
        let b = MpmNetwork::new(NetworkShape::default_mpm(), 9);
        assert_eq!(encode_checkpoint(&a), encode_checkpoint(&b));
    }

    #[test]
    fn rejects_corruption() {
        let net = MpmNetwork::new(
            NetworkShape {
                input: 4,
                hidden: 3,
                classes: 2,
                layers: 2,
            },
            1,
        );
        let bytes = encode_checkpoint(&net);

        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            decode_checkpoint(&bad_magic),
            Err(MpmError::Checkpoint(_))
        ));

        let truncated = &bytes[..bytes.len() - 3];
        assert!(matches!(
            decode_checkpoint(truncated),
            Err(MpmError::Checkpoint(_))
        ));

        let mut trailing = bytes.clone();
        trailing.push(0);
        assert!(matches!(
            decode_checkpoint(&trailing),
            Err(MpmError::Checkpoint(_))
        ));
    }
}
