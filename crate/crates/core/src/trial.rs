use crate::error::{Error, Result};

/// One multichannel trial, stored channel-major (`channels × samples`).
#[derive(Debug, Clone, PartialEq)]
pub struct TrialTensor {
    n_channels: usize,
    n_samples: usize,
    data: Vec<f64>,
}

impl TrialTensor {
    pub fn new(n_channels: usize, n_samples: usize, data: Vec<f64>) -> Result<Self> {
        if n_channels == 0 || n_samples == 0 {
            return Err(Error::InvalidInput(format!(
                "trial shape must be positive, got {n_channels}x{n_samples}"
            )));
        }
        if data.len() != n_channels * n_samples {
            return Err(Error::InvalidInput(format!(
                "trial of shape {n_channels}x{n_samples} needs {} values, got {}",
                n_channels * n_samples,
                data.len()
            )));
        }
        Ok(Self {
            n_channels,
            n_samples,
            data,
        })
    }

    pub fn zeros(n_channels: usize, n_samples: usize) -> Self {
        Self {
            n_channels,
            n_samples,
            data: vec![0.0; n_channels * n_samples],
        }
    }

    pub fn from_channels(channels: Vec<Vec<f64>>) -> Result<Self> {
        let n = channels.len();
        let m = channels.first().map_or(0, Vec::len);
        if channels.iter().any(|c| c.len() != m) {
            return Err(Error::InvalidInput("ragged channel lengths".into()));
        }
        Self::new(n, m, channels.concat())
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_channels, self.n_samples)
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.data[c * self.n_samples..(c + 1) * self.n_samples]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c * self.n_samples..(c + 1) * self.n_samples]
    }

    pub fn channels(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_samples)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            data: self.data.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    /// Applies `f` to every channel, producing a trial of the same shape.
    pub fn map_channels<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&[f64]) -> Result<Vec<f64>>,
    {
        let mut data = Vec::with_capacity(self.data.len());
        for ch in self.channels() {
            let out = f(ch)?;
            if out.len() != self.n_samples {
                return Err(Error::InvalidInput("channel map changed length".into()));
            }
            data.extend(out);
        }
        Ok(Self { data, ..*self })
    }
}
