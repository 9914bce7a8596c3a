//! Band-power contrast between classes, compared between raw and
//! spectrally transferred data.

use crate::data::DomainDataset;
use crate::error::{Error, Result};
use crate::fourier::{check_band, psd_welch};
use crate::pipeline::{augment_batch, AlphaPolicy, Sample};
use std::fmt::Write as _;

/// Contrasts with magnitude below this are not assigned a sign.
pub const CONTRAST_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Agreement {
    Agree,
    Disagree,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelContrast {
    pub channel: usize,
    /// Mean band power per class.
    pub raw_power: Vec<f64>,
    pub reconstructed_power: Vec<f64>,
    /// Class 1 minus class 0.
    pub raw_contrast: f64,
    pub reconstructed_contrast: f64,
    pub agreement: Agreement,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErdReport {
    pub band_hz: (f64, f64),
    pub channels: Vec<ChannelContrast>,
    pub freqs: Vec<f64>,
    /// Class-mean PSD per `(channel, class)`: `[raw, reconstructed]`.
    pub series: Vec<(usize, usize, [Vec<f64>; 2])>,
}

impl ErdReport {
    /// Share of channels whose contrast sign agrees.
    pub fn agreement_fraction(&self) -> f64 {
        let n = self.channels.iter().filter(|c| c.agreement == Agreement::Agree).count();
        n as f64 / self.channels.len() as f64
    }

    pub fn full_agreement(&self) -> bool {
        self.channels.iter().all(|c| c.agreement == Agreement::Agree)
    }

    pub fn to_text(&self) -> String {
        let (lo, hi) = self.band_hz;
        let mut out = format!("band {lo}-{hi} Hz\n");
        for c in &self.channels {
            let _ = writeln!(
                out,
                "channel {}: raw power {:?} contrast {:+.6e} | reconstructed power {:?} contrast {:+.6e} | {:?}",
                c.channel, c.raw_power, c.raw_contrast, c.reconstructed_power, c.reconstructed_contrast, c.agreement
            );
        }
        let _ = writeln!(out, "agreement: {:.3}", self.agreement_fraction());
        out
    }

    /// `freq_hz,channel,class,raw,reconstructed` rows.
    pub fn series_csv(&self) -> String {
        let mut out = String::from("freq_hz,channel,class,raw,reconstructed\n");
        for (ch, class, [raw, rec]) in &self.series {
            for (k, f) in self.freqs.iter().enumerate() {
                let _ = writeln!(out, "{f},{ch},{class},{},{}", raw[k], rec[k]);
            }
        }
        out
    }
}

/// Class-mean Welch PSD of one channel.
fn class_mean_psd(ds: &DomainDataset, channel: usize, seg_len: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let mut freqs = Vec::new();
    let mut sums: Vec<Vec<f64>> = vec![Vec::new(); ds.n_classes()];
    let mut counts = vec![0usize; ds.n_classes()];
    for (t, label) in ds.trials() {
        let psd = psd_welch(t.channel(channel), ds.fs_hz(), seg_len, 0.5)?;
        if sums[*label].is_empty() {
            sums[*label] = vec![0.0; psd.power.len()];
        }
        for (s, p) in sums[*label].iter_mut().zip(&psd.power) {
            *s += p;
        }
        counts[*label] += 1;
        freqs = psd.freqs;
    }
    for (c, (s, n)) in sums.iter_mut().zip(&counts).enumerate() {
        if *n == 0 {
            return Err(Error::InvalidDataset(format!("class {c} has no trials in `{}`", ds.domain_id())));
        }
        s.iter_mut().for_each(|v| *v /= *n as f64);
    }
    Ok((freqs, sums))
}

fn band_mean(freqs: &[f64], power: &[f64], lo: f64, hi: f64) -> f64 {
    let vals: Vec<f64> = freqs
        .iter()
        .zip(power)
        .filter(|(f, _)| **f >= lo && **f <= hi)
        .map(|(_, p)| *p)
        .collect();
    if vals.is_empty() {
        0.0
    } else {
        vals.iter().sum::<f64>() / vals.len() as f64
    }
}

fn sign(x: f64) -> Option<bool> {
    (x.abs() >= CONTRAST_FLOOR).then_some(x > 0.0)
}

/// Per channel and class, Welch band power of `raw` and `reconstructed`, and
/// whether the class-1-minus-class-0 contrast keeps its sign.
pub fn erd_ers_report(
    raw: &DomainDataset,
    reconstructed: &DomainDataset,
    channels: &[usize],
    band_hz: (f64, f64),
) -> Result<ErdReport> {
    if raw.trial_shape() != reconstructed.trial_shape() || raw.n_classes() != reconstructed.n_classes() {
        return Err(Error::InvalidInput("raw and reconstructed datasets differ in shape".into()));
    }
    if raw.fs_hz() != reconstructed.fs_hz() {
        return Err(Error::InvalidInput("raw and reconstructed datasets differ in sampling rate".into()));
    }
    check_band(band_hz.0, band_hz.1, raw.fs_hz())?;
    if channels.is_empty() || channels.iter().any(|&c| c >= raw.n_channels()) {
        return Err(Error::InvalidInput(format!("channels {channels:?} out of range")));
    }
    let seg_len = raw.n_samples().min(128);
    let mut out = ErdReport {
        band_hz,
        channels: Vec::new(),
        freqs: Vec::new(),
        series: Vec::new(),
    };
    for &ch in channels {
        let (freqs, raw_psd) = class_mean_psd(raw, ch, seg_len)?;
        let (_, rec_psd) = class_mean_psd(reconstructed, ch, seg_len)?;
        let raw_power: Vec<f64> = raw_psd.iter().map(|p| band_mean(&freqs, p, band_hz.0, band_hz.1)).collect();
        let reconstructed_power: Vec<f64> = rec_psd.iter().map(|p| band_mean(&freqs, p, band_hz.0, band_hz.1)).collect();
        let raw_contrast = raw_power[1] - raw_power[0];
        let reconstructed_contrast = reconstructed_power[1] - reconstructed_power[0];
        let agreement = match (sign(raw_contrast), sign(reconstructed_contrast)) {
            (Some(a), Some(b)) if a == b => Agreement::Agree,
            (Some(_), Some(_)) => Agreement::Disagree,
            _ => Agreement::Indeterminate,
        };
        for (class, (r, c)) in raw_psd.into_iter().zip(rec_psd).enumerate() {
            out.series.push((ch, class, [r, c]));
        }
        out.freqs = freqs;
        out.channels.push(ChannelContrast {
            channel: ch,
            raw_power,
            reconstructed_power,
            raw_contrast,
            reconstructed_contrast,
            agreement,
        });
    }
    Ok(out)
}

/// All trials of several domains as one dataset.
pub fn pool(datasets: &[DomainDataset], id: &str) -> Result<DomainDataset> {
    let first = datasets.first().ok_or_else(|| Error::InvalidDataset("nothing to pool".into()))?;
    let trials = datasets.iter().flat_map(|d| d.trials().iter().cloned()).collect();
    DomainDataset::new(id, first.fs_hz(), first.trial_shape(), first.n_classes(), trials)
}

/// Replaces every trial by its spectral transfer with a trial of another
/// domain (the transferred trial keeps its own phase and label).
pub fn transfer_reconstruct(datasets: &[DomainDataset], policy: AlphaPolicy, seed: u64) -> Result<Vec<DomainDataset>> {
    let samples: Vec<Sample> = datasets
        .iter()
        .enumerate()
        .flat_map(|(d, ds)| {
            ds.trials().iter().map(move |(t, l)| Sample {
                trial: t.clone(),
                label: *l,
                domain: d,
            })
        })
        .collect();
    let aug = augment_batch(&samples, policy, seed)?;
    if aug.skipped {
        return Err(Error::InvalidDataset("reconstruction needs at least 2 domains".into()));
    }
    datasets
        .iter()
        .enumerate()
        .map(|(d, ds)| {
            let trials = aug.samples[aug.n_original..]
                .iter()
                .filter(|s| s.domain == d)
                .map(|s| (s.trial.clone(), s.label))
                .collect();
            DomainDataset::new(ds.domain_id(), ds.fs_hz(), ds.trial_shape(), ds.n_classes(), trials)
        })
        .collect()
}
