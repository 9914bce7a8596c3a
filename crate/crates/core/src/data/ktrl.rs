//! `KTRL` trial files.
//!
//! Little-endian layout: magic `KTRL`, version `u32`, `fs_hz` `f64`,
//! `n_channels`, `n_samples`, `n_trials`, `n_classes` as `u32`, domain id as
//! `u16` length + UTF-8, then per trial a `u32` label followed by
//! `n_channels · n_samples` `f64` values, channel-major.

use super::DomainDataset;
use crate::error::{Error, Result};
use crate::io::Reader;
use crate::trial::TrialTensor;
use std::path::Path;

pub const KTRL_MAGIC: &[u8; 4] = b"KTRL";
pub const KTRL_VERSION: u32 = 1;

impl DomainDataset {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let id = self.domain_id().as_bytes();
        let id_len = u16::try_from(id.len())
            .map_err(|_| Error::InvalidDataset(format!("domain id is {} bytes, max 65535", id.len())))?;
        let per_trial = 4 + 8 * self.n_channels() * self.n_samples();
        let mut out = Vec::with_capacity(34 + id.len() + self.len() * per_trial);
        out.extend_from_slice(KTRL_MAGIC);
        out.extend_from_slice(&KTRL_VERSION.to_le_bytes());
        out.extend_from_slice(&self.fs_hz().to_le_bytes());
        for v in [self.n_channels(), self.n_samples(), self.len(), self.n_classes()] {
            let v = u32::try_from(v).map_err(|_| Error::InvalidDataset(format!("header field {v} overflows u32")))?;
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&id_len.to_le_bytes());
        out.extend_from_slice(id);
        for (t, label) in self.trials() {
            out.extend_from_slice(&(*label as u32).to_le_bytes());
            for v in t.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let magic = r.take(4)?;
        if magic != KTRL_MAGIC {
            return Err(Error::Format(format!("bad magic {:?}, expected \"KTRL\"", String::from_utf8_lossy(magic))));
        }
        let version = r.u32()?;
        if version != KTRL_VERSION {
            return Err(Error::Format(format!("unsupported KTRL version {version}")));
        }
        let fs_hz = r.f64()?;
        let n_channels = r.u32()? as usize;
        let n_samples = r.u32()? as usize;
        let n_trials = r.u32()? as usize;
        let n_classes = r.u32()? as usize;
        let id_len = r.u16()? as usize;
        let domain_id = std::str::from_utf8(r.take(id_len)?)
            .map_err(|e| Error::Format(format!("domain id is not UTF-8: {e}")))?
            .to_string();

        let values = n_channels
            .checked_mul(n_samples)
            .ok_or_else(|| Error::Format("trial size overflows".into()))?;
        let per_trial = values as u64 * 8 + 4;
        let payload_start = r.position() as u64;
        let expected = payload_start + per_trial * n_trials as u64;
        let actual = bytes.len() as u64;
        if actual < expected {
            let complete = (actual - payload_start) / per_trial;
            return Err(Error::Corruption {
                offset: payload_start + complete * per_trial,
                expected,
                actual,
            });
        }
        if actual > expected {
            return Err(Error::Format(format!("{} trailing bytes after {n_trials} trials", actual - expected)));
        }

        let mut trials = Vec::with_capacity(n_trials);
        for _ in 0..n_trials {
            let label = r.u32()? as usize;
            let data = r.f64s(values)?;
            let trial = TrialTensor::new(n_channels, n_samples, data).map_err(|e| Error::Format(e.to_string()))?;
            trials.push((trial, label));
        }
        DomainDataset::new(domain_id, fs_hz, (n_channels, n_samples), n_classes, trials)
            .map_err(|e| Error::Format(e.to_string()))
    }
}

pub fn write_dataset(dataset: &DomainDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, dataset.to_bytes()?).map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<DomainDataset> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    DomainDataset::from_bytes(&bytes)
}
