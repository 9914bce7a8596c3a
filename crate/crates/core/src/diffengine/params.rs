//! Named parameter tensors and their versioned binary encoding.
//!
//! Layout (little-endian): magic `KNIF`, format version `u32`, tensor count
//! `u32`, then per tensor: name length `u16`, UTF-8 name, rank `u8`, each dim
//! as `u32`, then the values as `f64`.

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::io::Reader;
use sha2::{Digest, Sha256};
use std::path::Path;

pub const PARAMS_MAGIC: &[u8; 4] = b"KNIF";
pub const PARAMS_VERSION: u32 = 1;

/// Ordered set of named learnable tensors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelParams {
    entries: Vec<(String, Tensor)>,
}

impl ModelParams {
    pub fn from_tensors(entries: Vec<(String, Tensor)>) -> Self {
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.entries.iter().map(|(_, t)| t)
    }

    pub(crate) fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Tensor> {
        self.entries.iter_mut().map(|(_, t)| t)
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.tensors().map(Tensor::len).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.count() * 8);
        out.extend_from_slice(PARAMS_MAGIC);
        out.extend_from_slice(&PARAMS_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, t) in &self.entries {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(t.rank() as u8);
            for &d in t.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let magic = r.take(4)?;
        if magic != PARAMS_MAGIC {
            return Err(Error::Format(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(magic),
                "KNIF"
            )));
        }
        let version = r.u32()?;
        if version != PARAMS_VERSION {
            return Err(Error::Format(format!(
                "unsupported parameter format version {version}"
            )));
        }
        let count = r.u32()? as usize;
        let mut entries = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let name_len = r.u16()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
            let rank = r.u8()? as usize;
            let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let len: usize = shape.iter().product();
            let data = r.f64s(len)?;
            let t = Tensor::new(shape, data).map_err(|e| Error::Format(format!("tensor `{name}`: {e}")))?;
            entries.push((name, t));
        }
        if !r.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes", r.remaining())));
        }
        Ok(Self { entries })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// SHA-256 of the encoded parameters, hex.
    pub fn content_hash(&self) -> String {
        hex_digest(&self.to_bytes())
    }
}

/// Lower-case hex SHA-256 of `bytes`.
pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ModelParams {
        ModelParams::from_tensors(vec![
            ("conv.w".into(), Tensor::new(vec![2, 3], vec![1.0, -2.0, 3.5, 0.0, -0.0, 1e-300]).unwrap()),
            ("bias".into(), Tensor::new(vec![2], vec![f64::MIN_POSITIVE, 7.0]).unwrap()),
        ])
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let p = sample();
        let q = ModelParams::from_bytes(&p.to_bytes()).unwrap();
        assert_eq!(p.len(), q.len());
        for ((na, a), (nb, b)) in p.iter().zip(q.iter()) {
            assert_eq!(na, nb);
            assert_eq!(a.shape(), b.shape());
            let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a), bits(b));
        }
    }

    #[test]
    fn header_layout() {
        let bytes = sample().to_bytes();
        assert_eq!(&bytes[..4], b"KNIF");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
        assert_eq!(u16::from_le_bytes(bytes[12..14].try_into().unwrap()), 6);
        assert_eq!(&bytes[14..20], b"conv.w");
        assert_eq!(bytes[20], 2);
    }

    #[test]
    fn bad_magic_and_truncation() {
        let mut bytes = sample().to_bytes();
        let mut bad = bytes.clone();
        bad[..4].copy_from_slice(b"XXXX");
        assert!(matches!(ModelParams::from_bytes(&bad), Err(Error::Format(_))));
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(ModelParams::from_bytes(&bytes), Err(Error::Corruption { .. })));
    }
}
