use super::fft::{self, Direction};
use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// One-sided power spectral density estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
}

impl Psd {
    /// Mean density over bins whose frequency lies in `[lo_hz, hi_hz]`,
    /// multiplied by the band width actually covered.
    pub fn band_power(&self, lo_hz: f64, hi_hz: f64) -> f64 {
        let df = match self.freqs.get(1) {
            Some(f) => f - self.freqs[0],
            None => return 0.0,
        };
        self.freqs
            .iter()
            .zip(&self.power)
            .filter(|(&f, _)| f >= lo_hz && f <= hi_hz)
            .map(|(_, &p)| p * df)
            .sum()
    }
}

fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

/// Welch-averaged periodogram: Hann-windowed, mean-detrended segments of
/// `seg_len` samples advancing by `seg_len − ⌊overlap·seg_len⌋`, density
/// scaling (units²/Hz), one-sided.
pub fn psd_welch(signal: &[f64], fs_hz: f64, seg_len: usize, overlap: f64) -> Result<Psd> {
    if !(fs_hz > 0.0 && fs_hz.is_finite()) {
        return Err(Error::param("fs_hz", format!("must be positive, got {fs_hz}")));
    }
    if seg_len < 2 {
        return Err(Error::param("seg_len", format!("must be at least 2, got {seg_len}")));
    }
    if seg_len > signal.len() {
        return Err(Error::param(
            "seg_len",
            format!("{seg_len} exceeds signal length {}", signal.len()),
        ));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::param("overlap", format!("must lie in [0, 1), got {overlap}")));
    }
    if signal.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("signal contains non-finite samples".into()));
    }

    let window = hann(seg_len);
    let win_energy: f64 = window.iter().map(|w| w * w).sum();
    let step = seg_len - (overlap * seg_len as f64).floor() as usize;
    let n_bins = seg_len / 2 + 1;
    let mut acc = vec![0.0; n_bins];
    let mut n_segments = 0usize;
    let mut buf = vec![Complex64::new(0.0, 0.0); seg_len];

    let mut start = 0;
    while start + seg_len <= signal.len() {
        let seg = &signal[start..start + seg_len];
        let mean = seg.iter().sum::<f64>() / seg_len as f64;
        for ((b, &x), &w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex64::new((x - mean) * w, 0.0);
        }
        fft::transform(&mut buf, Direction::Forward);
        for (a, z) in acc.iter_mut().zip(&buf) {
            *a += z.norm_sqr();
        }
        n_segments += 1;
        start += step;
    }

    let scale = 1.0 / (fs_hz * win_energy * n_segments as f64);
    let power = acc
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let one_sided = k != 0 && !(seg_len % 2 == 0 && k == seg_len / 2);
            p * scale * if one_sided { 2.0 } else { 1.0 }
        })
        .collect();
    let freqs = (0..n_bins).map(|k| k as f64 * fs_hz / seg_len as f64).collect();
    Ok(Psd { freqs, power })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn tone_peaks_at_nearest_bin() {
        let fs = 250.0;
        let x: Vec<f64> = (0..2000).map(|t| (2.0 * PI * 10.0 * t as f64 / fs).sin()).collect();
        let psd = psd_welch(&x, fs, 250, 0.5).unwrap();
        let peak = psd
            .power
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(psd.freqs[peak], 10.0);
    }

    #[test]
    fn zero_signal_has_zero_power() {
        let psd = psd_welch(&[0.0; 512], 100.0, 128, 0.5).unwrap();
        assert!(psd.power.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn white_noise_is_flat() {
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
            let psd = psd_welch(&x, 250.0, 256, 0.5).unwrap();
            // Eight equal bands, skipping DC.
            let bands: Vec<f64> = psd.power[1..129]
                .chunks(16)
                .map(|c| c.iter().sum::<f64>() / c.len() as f64)
                .collect();
            let hi = bands.iter().cloned().fold(f64::MIN, f64::max);
            let lo = bands.iter().cloned().fold(f64::MAX, f64::min);
            assert!(hi / lo < 3.0, "seed {seed}: ratio {}", hi / lo);
        }
    }

    #[test]
    fn rejects_segment_longer_than_signal() {
        assert!(matches!(
            psd_welch(&[0.0; 10], 100.0, 20, 0.0),
            Err(Error::InvalidParameter { name: "seg_len", .. })
        ));
    }

    #[test]
    fn white_noise_density_matches_variance() {
        // Two-sided density of unit white noise is 1/fs; one-sided doubles it.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let x: Vec<f64> = (0..50_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let fs = 100.0;
        let psd = psd_welch(&x, fs, 128, 0.5).unwrap();
        let mid = &psd.power[5..60];
        let mean = mid.iter().sum::<f64>() / mid.len() as f64;
        assert!((mean - 2.0 / fs).abs() < 0.1 * 2.0 / fs);
    }
}
