//! Fourier analysis and synthesis of single channels, the low-frequency swap
//! mask, amplitude-swapping spectral transfer, and ideal band-pass filtering.
//!
//! Multichannel trials are always transformed channel by channel.

mod fft;
mod welch;

pub use welch::{psd_welch, Psd};

use crate::error::{Error, Result};
use crate::trial::TrialTensor;
use fft::Direction;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Bins whose amplitude is below this fraction of the spectrum's peak get
/// phase 0; their angle is rounding noise.
const PHASE_FLOOR: f64 = 1e-11;

/// Imaginary residue allowed by inverse synthesis, relative to `max(1, max |output|)`.
pub const RESIDUE_BOUND: f64 = 1e-6;

/// Amplitude/phase split of one channel's DFT.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpectrum {
    pub amplitude: Vec<f64>,
    /// Radians in (−π, π].
    pub phase: Vec<f64>,
}

impl ChannelSpectrum {
    pub fn len(&self) -> usize {
        self.amplitude.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitude.is_empty()
    }

    fn to_complex(&self) -> Vec<Complex64> {
        self.amplitude
            .iter()
            .zip(&self.phase)
            .map(|(&a, &p)| Complex64::from_polar(a, p))
            .collect()
    }

    fn from_complex(spec: &[Complex64]) -> Self {
        let peak = spec.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let floor = peak * PHASE_FLOOR;
        let amplitude: Vec<f64> = spec.iter().map(|z| z.norm()).collect();
        let phase = spec
            .iter()
            .zip(&amplitude)
            .map(|(z, &a)| if a <= floor { 0.0 } else { wrap_phase(z.im.atan2(z.re)) })
            .collect();
        Self { amplitude, phase }
    }
}

/// Maps an `atan2` result onto (−π, π].
fn wrap_phase(p: f64) -> f64 {
    if p <= -PI {
        p + 2.0 * PI
    } else {
        p
    }
}

fn check_signal(signal: &[f64]) -> Result<()> {
    if signal.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "transform needs at least 2 samples, got {}",
            signal.len()
        )));
    }
    if signal.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("signal contains non-finite samples".into()));
    }
    Ok(())
}

/// Forward transform of a real signal with exact conjugate symmetry imposed.
fn real_spectrum(signal: &[f64]) -> Vec<Complex64> {
    let m = signal.len();
    let mut buf: Vec<Complex64> = signal.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft::transform(&mut buf, Direction::Forward);
    buf[0].im = 0.0;
    if m % 2 == 0 {
        buf[m / 2].im = 0.0;
    }
    for k in (m / 2 + 1)..m {
        buf[k] = buf[m - k].conj();
    }
    buf
}

/// Inverse transform keeping the real part; fails when the discarded
/// imaginary part is not rounding noise.
fn real_inverse(mut spec: Vec<Complex64>) -> Result<Vec<f64>> {
    let m = spec.len();
    fft::transform(&mut spec, Direction::Inverse);
    let scale = 1.0 / m as f64;
    let mut residue = 0.0f64;
    let mut peak = 0.0f64;
    let out: Vec<f64> = spec
        .iter()
        .map(|z| {
            residue = residue.max((z.im * scale).abs());
            let re = z.re * scale;
            peak = peak.max(re.abs());
            re
        })
        .collect();
    let bound = RESIDUE_BOUND * peak.max(1.0);
    if !(residue < bound) {
        return Err(Error::Residue { residue, bound });
    }
    Ok(out)
}

/// Amplitude and phase of the DFT `X(k) = Σ_t x(t) e^{-i2πkt/m}`.
pub fn dft(signal: &[f64]) -> Result<ChannelSpectrum> {
    check_signal(signal)?;
    Ok(ChannelSpectrum::from_complex(&real_spectrum(signal)))
}

/// Real signal whose DFT is `spectrum`.
pub fn idft(spectrum: &ChannelSpectrum) -> Result<Vec<f64>> {
    if spectrum.amplitude.len() != spectrum.phase.len() {
        return Err(Error::InvalidInput(format!(
            "amplitude has {} bins, phase has {}",
            spectrum.amplitude.len(),
            spectrum.phase.len()
        )));
    }
    if spectrum.len() < 2 {
        return Err(Error::InvalidInput("spectrum needs at least 2 bins".into()));
    }
    if spectrum
        .amplitude
        .iter()
        .chain(&spectrum.phase)
        .any(|v| !v.is_finite())
    {
        return Err(Error::InvalidInput("spectrum contains non-finite values".into()));
    }
    real_inverse(spectrum.to_complex())
}

/// Low-frequency band selected for amplitude swapping.
#[derive(Debug, Clone, PartialEq)]
pub struct SwapMask {
    pub alpha: f64,
    pub bins: Vec<bool>,
}

impl SwapMask {
    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn count(&self) -> usize {
        self.bins.iter().filter(|&&b| b).count()
    }
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::param("alpha", format!("must lie in (0, 0.5), got {alpha}")));
    }
    Ok(())
}

/// Bin `k` is swapped iff `min(k, m − k) ≤ ⌊α·m⌋`, i.e. the DC-centred band
/// with wrap-around so both conjugate halves are covered.
pub fn make_mask(alpha: f64, m: usize) -> Result<SwapMask> {
    check_alpha(alpha)?;
    if m < 2 {
        return Err(Error::param("m", format!("mask length must be at least 2, got {m}")));
    }
    let cutoff = (alpha * m as f64).floor() as usize;
    let bins = (0..m).map(|k| k.min(m - k) <= cutoff).collect();
    Ok(SwapMask { alpha, bins })
}

/// Amplitude of `donor` inside the mask, `base` outside, phase of `base`.
pub fn transfer_spectrum(
    base: &ChannelSpectrum,
    donor: &ChannelSpectrum,
    mask: &SwapMask,
) -> Result<ChannelSpectrum> {
    if base.len() != donor.len() || base.len() != mask.len() {
        return Err(Error::InvalidInput(format!(
            "spectrum lengths {} / {} do not match mask length {}",
            base.len(),
            donor.len(),
            mask.len()
        )));
    }
    let amplitude = mask
        .bins
        .iter()
        .zip(base.amplitude.iter().zip(&donor.amplitude))
        .map(|(&swap, (&b, &d))| if swap { d } else { b })
        .collect();
    Ok(ChannelSpectrum {
        amplitude,
        phase: base.phase.clone(),
    })
}

/// Channel-wise amplitude swap. Returns `(ẋ^{u→v}, ẋ^{v→u})`: the first keeps
/// the phase (and so the label) of `x_u` and takes `x_v`'s low-band amplitude.
pub fn spectral_transfer(
    x_u: &TrialTensor,
    x_v: &TrialTensor,
    alpha: f64,
) -> Result<(TrialTensor, TrialTensor)> {
    if x_u.shape() != x_v.shape() {
        return Err(Error::InvalidInput(format!(
            "spectral transfer between shapes {:?} and {:?}",
            x_u.shape(),
            x_v.shape()
        )));
    }
    let mask = make_mask(alpha, x_u.n_samples())?;
    let su = trial_spectra(x_u)?;
    let sv = trial_spectra(x_v)?;
    Ok((
        synthesize_transfer(&su, &sv, &mask)?,
        synthesize_transfer(&sv, &su, &mask)?,
    ))
}

/// Per-channel spectra of a trial.
pub fn trial_spectra(trial: &TrialTensor) -> Result<Vec<ChannelSpectrum>> {
    trial.channels().map(dft).collect()
}

/// Rebuilds a trial with `base`'s phase and the masked amplitude of `donor`.
pub fn synthesize_transfer(
    base: &[ChannelSpectrum],
    donor: &[ChannelSpectrum],
    mask: &SwapMask,
) -> Result<TrialTensor> {
    if base.len() != donor.len() || base.is_empty() {
        return Err(Error::InvalidInput(format!(
            "channel counts {} / {} differ",
            base.len(),
            donor.len()
        )));
    }
    let channels = base
        .iter()
        .zip(donor)
        .map(|(b, d)| idft(&transfer_spectrum(b, d, mask)?))
        .collect::<Result<Vec<_>>>()?;
    TrialTensor::from_channels(channels)
}

pub fn check_band(lo_hz: f64, hi_hz: f64, fs_hz: f64) -> Result<()> {
    if !(fs_hz > 0.0 && fs_hz.is_finite()) {
        return Err(Error::param("fs_hz", format!("must be positive, got {fs_hz}")));
    }
    if !(lo_hz > 0.0 && lo_hz < hi_hz && hi_hz < fs_hz / 2.0) {
        return Err(Error::param(
            "band",
            format!("need 0 < lo < hi < fs/2, got [{lo_hz}, {hi_hz}] at fs = {fs_hz}"),
        ));
    }
    Ok(())
}

/// Frequency in Hz represented by bin `k` of an `m`-point transform.
pub fn bin_frequency(k: usize, m: usize, fs_hz: f64) -> f64 {
    k.min(m - k) as f64 * fs_hz / m as f64
}

/// Ideal zero-phase band-pass of one channel.
pub fn bandpass_channel(signal: &[f64], lo_hz: f64, hi_hz: f64, fs_hz: f64) -> Result<Vec<f64>> {
    check_band(lo_hz, hi_hz, fs_hz)?;
    check_signal(signal)?;
    let m = signal.len();
    let mut spec = real_spectrum(signal);
    for (k, z) in spec.iter_mut().enumerate() {
        let f = bin_frequency(k, m, fs_hz);
        if f < lo_hz || f > hi_hz {
            *z = Complex64::new(0.0, 0.0);
        }
    }
    real_inverse(spec)
}

/// Ideal frequency-domain band-pass applied to every channel.
pub fn bandpass(trial: &TrialTensor, lo_hz: f64, hi_hz: f64, fs_hz: f64) -> Result<TrialTensor> {
    check_band(lo_hz, hi_hz, fs_hz)?;
    trial.map_channels(|ch| bandpass_channel(ch, lo_hz, hi_hz, fs_hz))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_signal(rng: &mut impl Rng, m: usize) -> Vec<f64> {
        (0..m).map(|_| rng.gen_range(-3.0..3.0)).collect()
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    fn tone(freq_hz: f64, fs: f64, m: usize) -> Vec<f64> {
        (0..m).map(|t| (2.0 * PI * freq_hz * t as f64 / fs).sin()).collect()
    }

    /// Direct evaluation of Σ x(n) e^{-i2πkn/m}, independent of the kernels above.
    fn brute_force(x: &[f64]) -> Vec<(f64, f64)> {
        let m = x.len();
        (0..m)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (n, &v) in x.iter().enumerate() {
                    let ang = -2.0 * PI * k as f64 * n as f64 / m as f64;
                    re += v * ang.cos();
                    im += v * ang.sin();
                }
                (re, im)
            })
            .collect()
    }

    #[test]
    fn constant_signal_is_dc_only() {
        let c = 1.5;
        let s = dft(&[c; 16]).unwrap();
        assert!((s.amplitude[0] - 16.0 * c).abs() < 1e-12);
        assert!(s.amplitude[1..].iter().all(|&a| a < 1e-12));
        assert!(s.phase.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn single_tone_hits_two_bins() {
        let m = 64;
        let x: Vec<f64> = (0..m).map(|t| (2.0 * PI * t as f64 * 3.0 / m as f64).cos()).collect();
        let s = dft(&x).unwrap();
        for (k, &a) in s.amplitude.iter().enumerate() {
            if k == 3 || k == 61 {
                assert!((a - m as f64 / 2.0).abs() < 1e-10);
            } else {
                assert!(a < 1e-10, "bin {k} amplitude {a}");
            }
        }
    }

    #[test]
    fn matches_brute_force_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random_signal(&mut rng, 16);
        let s = dft(&x).unwrap();
        for (k, (re, im)) in brute_force(&x).into_iter().enumerate() {
            let z = Complex64::from_polar(s.amplitude[k], s.phase[k]);
            assert!((z.re - re).abs() < 1e-10 && (z.im - im).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_short_input() {
        assert!(matches!(dft(&[]), Err(Error::InvalidInput(_))));
        assert!(matches!(dft(&[1.0]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn dc_inversion_gives_ones() {
        let m = 8;
        let mut amplitude = vec![0.0; m];
        amplitude[0] = m as f64;
        let x = idft(&ChannelSpectrum { amplitude, phase: vec![0.0; m] }).unwrap();
        assert!(x.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn negated_phase_reverses_time() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = 24;
        let x = random_signal(&mut rng, m);
        let mut s = dft(&x).unwrap();
        s.phase.iter_mut().for_each(|p| *p = -*p);
        let y = idft(&s).unwrap();
        // Direct definition of reversal: y(t) = x((m − t) mod m).
        for t in 0..m {
            assert!((y[t] - x[(m - t) % m]).abs() < 1e-9);
        }
    }

    #[test]
    fn asymmetric_spectrum_is_rejected() {
        let m = 8;
        let mut amplitude = vec![0.0; m];
        amplitude[1] = 4.0;
        let err = idft(&ChannelSpectrum { amplitude, phase: vec![0.0; m] }).unwrap_err();
        assert!(matches!(err, Error::Residue { .. }));
    }

    #[test]
    fn mask_examples() {
        let m = make_mask(0.25, 8).unwrap();
        let expected = [1, 1, 1, 0, 0, 0, 1, 1].map(|b| b == 1);
        assert_eq!(m.bins, expected);
        // ⌊0.49·4⌋ = 1, and the Nyquist bin has min(2, 2) = 2, so it stays out.
        assert_eq!(make_mask(0.49, 4).unwrap().bins, [true, true, false, true]);
        for bad in [0.0, 0.5, -0.1, 0.7, f64::NAN] {
            assert!(matches!(make_mask(bad, 8), Err(Error::InvalidParameter { .. })));
        }
    }

    #[test]
    fn transfer_with_itself_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = TrialTensor::new(2, 32, random_signal(&mut rng, 64)).unwrap();
        let (a, b) = spectral_transfer(&x, &x, 0.3).unwrap();
        assert!(max_abs_diff(a.as_slice(), x.as_slice()) < 1e-9);
        assert!(max_abs_diff(b.as_slice(), x.as_slice()) < 1e-9);
    }

    #[test]
    fn transfer_takes_masked_amplitude_and_keeps_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let m = 64;
        let xu = TrialTensor::new(1, m, random_signal(&mut rng, m)).unwrap();
        let xv = TrialTensor::new(1, m, random_signal(&mut rng, m)).unwrap();
        let alpha = 0.2;
        let (uv, _) = spectral_transfer(&xu, &xv, alpha).unwrap();
        let mask = make_mask(alpha, m).unwrap();
        let (su, sv, so) = (dft(xu.channel(0)).unwrap(), dft(xv.channel(0)).unwrap(), dft(uv.channel(0)).unwrap());
        for k in 0..m {
            let want = if mask.bins[k] { sv.amplitude[k] } else { su.amplitude[k] };
            assert!((so.amplitude[k] - want).abs() < 1e-9, "bin {k}");
            if so.amplitude[k] > 1e-8 {
                let d = (so.phase[k] - su.phase[k]).rem_euclid(2.0 * PI);
                assert!(d.min(2.0 * PI - d) < 1e-6, "bin {k}");
            }
        }
    }

    #[test]
    fn transfer_rejects_shape_mismatch() {
        let a = TrialTensor::zeros(2, 16);
        let b = TrialTensor::zeros(2, 32);
        assert!(matches!(spectral_transfer(&a, &b, 0.1), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn bandpass_keeps_in_band_tone() {
        let x = TrialTensor::new(1, 250, tone(10.0, 250.0, 250)).unwrap();
        let y = bandpass(&x, 4.0, 40.0, 250.0).unwrap();
        assert!(max_abs_diff(x.as_slice(), y.as_slice()) < 1e-9);
    }

    #[test]
    fn bandpass_removes_out_of_band_tone() {
        let x = TrialTensor::new(1, 250, tone(2.0, 250.0, 250)).unwrap();
        let y = bandpass(&x, 4.0, 40.0, 250.0).unwrap();
        assert!(y.as_slice().iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn bandpass_separates_summed_tones() {
        let lo = tone(2.0, 250.0, 500);
        let hi = tone(10.0, 250.0, 500);
        let sum: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| a + b).collect();
        let y = bandpass_channel(&sum, 4.0, 40.0, 250.0).unwrap();
        assert!(max_abs_diff(&y, &hi) < 1e-9);
    }

    #[test]
    fn bandpass_rejects_band_past_nyquist() {
        let x = TrialTensor::zeros(1, 64);
        assert!(bandpass(&x, 4.0, 130.0, 250.0).is_err());
        assert!(bandpass(&x, 40.0, 4.0, 250.0).is_err());
        assert!(bandpass(&x, 0.0, 4.0, 250.0).is_err());
    }

    #[test]
    fn phase_lies_in_half_open_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for m in [2usize, 7, 16, 33] {
            let s = dft(&random_signal(&mut rng, m)).unwrap();
            assert!(s.phase.iter().all(|&p| p > -PI && p <= PI));
        }
        // Negative DC lands on +π, not −π.
        let s = dft(&[-1.0, -1.0, -1.0, -1.0]).unwrap();
        assert_eq!(s.phase[0], PI);
    }
}
