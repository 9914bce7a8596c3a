//! Labeled trial collections, the `KTRL` file format, the synthetic
//! domain-shift generator and signal similarity metrics.

mod ktrl;
mod synth;

pub use ktrl::{read_dataset, write_dataset, KTRL_MAGIC, KTRL_VERSION};
pub use synth::{
    generate_synthetic, preset, BandGain, ClassPattern, DomainProfile, PhaseComponent, SynthSpec, PRESETS,
};

use crate::error::{Error, Result};
use crate::fourier;
use crate::model;
use crate::trial::TrialTensor;
use std::fmt;

/// Trials of one source (or target) domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainDataset {
    domain_id: String,
    fs_hz: f64,
    n_channels: usize,
    n_samples: usize,
    n_classes: usize,
    class_names: Vec<String>,
    trials: Vec<(TrialTensor, usize)>,
}

impl DomainDataset {
    pub fn new(
        domain_id: impl Into<String>,
        fs_hz: f64,
        (n_channels, n_samples): (usize, usize),
        n_classes: usize,
        trials: Vec<(TrialTensor, usize)>,
    ) -> Result<Self> {
        let domain_id = domain_id.into();
        if !(fs_hz.is_finite() && fs_hz > 0.0) {
            return Err(Error::InvalidDataset(format!("sampling rate must be positive, got {fs_hz}")));
        }
        if n_channels == 0 || n_samples == 0 {
            return Err(Error::InvalidDataset("trials need at least one channel and sample".into()));
        }
        if n_classes < 2 {
            return Err(Error::InvalidDataset(format!("need at least 2 classes, got {n_classes}")));
        }
        for (i, (t, label)) in trials.iter().enumerate() {
            if t.shape() != (n_channels, n_samples) {
                return Err(Error::InvalidDataset(format!(
                    "trial {i} has shape {:?}, expected ({n_channels}, {n_samples})",
                    t.shape()
                )));
            }
            if *label >= n_classes {
                return Err(Error::InvalidDataset(format!("trial {i} label {label} outside [0, {n_classes})")));
            }
        }
        Ok(Self {
            domain_id,
            fs_hz,
            n_channels,
            n_samples,
            n_classes,
            class_names: (0..n_classes).map(|c| format!("class{c}")).collect(),
            trials,
        })
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_classes {
            return Err(Error::InvalidDataset(format!(
                "{} class names for {} classes",
                names.len(),
                self.n_classes
            )));
        }
        self.class_names = names;
        Ok(self)
    }

    pub fn domain_id(&self) -> &str {
        &self.domain_id
    }

    pub fn fs_hz(&self) -> f64 {
        self.fs_hz
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn trial_shape(&self) -> (usize, usize) {
        (self.n_channels, self.n_samples)
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn trials(&self) -> &[(TrialTensor, usize)] {
        &self.trials
    }

    pub fn labels(&self) -> Vec<usize> {
        self.trials.iter().map(|(_, l)| *l).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for (_, l) in &self.trials {
            counts[*l] += 1;
        }
        counts
    }

    /// Same header, selected trials (in the given order).
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            trials: indices.iter().map(|&i| self.trials[i].clone()).collect(),
            ..self.header_only()
        }
    }

    /// Applies `f` to every trial, keeping labels.
    pub fn map_trials<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&TrialTensor) -> Result<TrialTensor>,
    {
        let trials = self
            .trials
            .iter()
            .map(|(t, l)| Ok((f(t)?, *l)))
            .collect::<Result<Vec<_>>>()?;
        Self {
            trials,
            ..self.header_only()
        }
        .revalidated()
    }

    fn header_only(&self) -> Self {
        Self {
            domain_id: self.domain_id.clone(),
            fs_hz: self.fs_hz,
            n_channels: self.n_channels,
            n_samples: self.n_samples,
            n_classes: self.n_classes,
            class_names: self.class_names.clone(),
            trials: Vec::new(),
        }
    }

    fn revalidated(self) -> Result<Self> {
        let names = self.class_names.clone();
        Self::new(self.domain_id, self.fs_hz, (self.n_channels, self.n_samples), self.n_classes, self.trials)?
            .with_class_names(names)
    }
}

impl fmt::Display for DomainDataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "domain_id: {}", self.domain_id)?;
        writeln!(f, "fs_hz: {}", self.fs_hz)?;
        writeln!(f, "n_channels: {}", self.n_channels)?;
        writeln!(f, "n_samples: {}", self.n_samples)?;
        writeln!(f, "n_trials: {}", self.trials.len())?;
        writeln!(f, "n_classes: {}", self.n_classes)?;
        let counts = self.class_counts();
        for (name, n) in self.class_names.iter().zip(counts) {
            writeln!(f, "  {name}: {n}")?;
        }
        Ok(())
    }
}

/// Euclidean distance and Pearson correlation of two equal-length series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub euclidean: f64,
    /// `Err` when either input is constant.
    pub correlation: std::result::Result<f64, ConstantInput>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("correlation undefined for a constant input")]
pub struct ConstantInput;

pub fn similarity(a: &[f64], b: &[f64]) -> Result<Similarity> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "similarity needs equal lengths >= 2, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let euclidean = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    let correlation = if saa == 0.0 || sbb == 0.0 {
        Err(ConstantInput)
    } else {
        Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
    };
    Ok(Similarity { euclidean, correlation })
}

/// Band-pass every trial, then z-score each channel.
pub fn preprocess(dataset: &DomainDataset, lo_hz: f64, hi_hz: f64) -> Result<DomainDataset> {
    fourier::check_band(lo_hz, hi_hz, dataset.fs_hz)?;
    dataset.map_trials(|t| model::zscore(&fourier::bandpass(t, lo_hz, hi_hz, dataset.fs_hz)?))
}
