//! Synthetic source domains whose class label lives in Fourier phase while
//! the amplitude spectrum shifts from domain to domain.
//!
//! Each channel is built in the frequency domain: class-pattern bins carry a
//! fixed, class-specific phase; every other bin in `(0, m/2]` carries
//! random-phase background. Both are scaled by the domain profile
//! `(f / 10 Hz)^-slope · Π band gains`, where band gains may depend on the
//! class. White noise is added in the time domain.

use super::DomainDataset;
use crate::error::{Error, Result};
use crate::fourier::{self, ChannelSpectrum};
use crate::rng;
use crate::trial::TrialTensor;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::{FRAC_PI_2, PI};

/// One phase-locked sinusoid of a class pattern.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PhaseComponent {
    pub bin: usize,
    pub channel: usize,
    /// Radians, in (−π, π].
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ClassPattern {
    pub components: Vec<PhaseComponent>,
}

/// Amplitude multiplier on `[lo_hz, hi_hz]`, one value per class.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BandGain {
    pub lo_hz: f64,
    pub hi_hz: f64,
    pub gains: Vec<f64>,
    /// Restricts the gain to these channels; empty means all channels.
    #[serde(default)]
    pub channels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DomainProfile {
    pub bands: Vec<BandGain>,
    /// Exponent of the `1/f` envelope.
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SynthSpec {
    pub n_domains: usize,
    pub trials_per_domain: usize,
    pub n_channels: usize,
    pub n_samples: usize,
    pub fs_hz: f64,
    pub n_classes: usize,
    pub class_patterns: Vec<ClassPattern>,
    pub domain_profiles: Vec<DomainProfile>,
    /// Amplitude of each pattern sinusoid at 10 Hz before profile scaling.
    pub pattern_amplitude: f64,
    /// Amplitude of each background bin at 10 Hz before profile scaling.
    pub background_amplitude: f64,
    /// Background bins are scaled by a uniform draw from `1 ± jitter`.
    pub amplitude_jitter: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

pub const PRESETS: &[&str] = &["phase2x4", "erd2x4"];

/// Named, versioned benchmark configurations.
pub fn preset(name: &str) -> Option<SynthSpec> {
    match name {
        "phase2x4" => Some(phase2x4()),
        "erd2x4" => Some(erd2x4()),
        _ => None,
    }
}

fn antipodal_patterns(components: &[(usize, usize)]) -> Vec<ClassPattern> {
    [FRAC_PI_2, -FRAC_PI_2]
        .iter()
        .map(|&offset| ClassPattern {
            components: components
                .iter()
                .map(|&(bin, channel)| PhaseComponent { bin, channel, offset })
                .collect(),
        })
        .collect()
}

/// Four domains whose class-dependent band boosts rotate: in domain `d` class
/// 1 is louder in band `d` and class 0 in band `d+1`. Every held-out domain
/// therefore contradicts the amplitude cue its sources agree on. The class
/// itself is an antipodal phase block (8–15 on channels 0–1, 24–31 on
/// channels 2–3) that no band touches.
fn phase2x4() -> SynthSpec {
    let bands = [(4.5, 7.5), (16.0, 20.0), (20.5, 23.0), (31.5, 37.5)];
    let slopes = [0.6, 1.0, 1.4, 0.8];
    let boost = 6.0;
    let domain_profiles = (0..4)
        .map(|d| DomainProfile {
            bands: bands
                .iter()
                .enumerate()
                .filter_map(|(b, &(lo_hz, hi_hz))| {
                    let gains = if b == d {
                        vec![1.0, boost]
                    } else if b == (d + 1) % 4 {
                        vec![boost, 1.0]
                    } else {
                        return None;
                    };
                    Some(BandGain { lo_hz, hi_hz, gains, channels: Vec::new() })
                })
                .collect(),
            slope: slopes[d],
        })
        .collect();
    let components: Vec<(usize, usize)> = (0..4)
        .flat_map(|ch| {
            let first = if ch < 2 { 8 } else { 24 };
            (first..first + 8).map(move |bin| (bin, ch))
        })
        .collect();
    SynthSpec {
        n_domains: 4,
        trials_per_domain: 200,
        n_channels: 4,
        n_samples: 256,
        fs_hz: 250.0,
        n_classes: 2,
        class_patterns: antipodal_patterns(&components),
        domain_profiles,
        pattern_amplitude: 0.4,
        background_amplitude: 1.0,
        amplitude_jitter: 0.5,
        noise_sigma: 1.0,
        seed: 0,
    }
}

/// Two channels with opposite class-dependent 8–15 Hz power, shared by all
/// domains; domains differ in envelope slope and broadband gain.
fn erd2x4() -> SynthSpec {
    let slopes = [0.5, 1.0, 1.5, 0.8];
    let spread = [(40.0, 60.0, 0.5), (20.0, 30.0, 2.0), (4.0, 6.0, 1.8), (60.0, 90.0, 0.4)];
    let domain_profiles = (0..4)
        .map(|d| {
            let (lo_hz, hi_hz, g) = spread[d];
            DomainProfile {
                bands: vec![
                    BandGain { lo_hz: 8.0, hi_hz: 15.0, gains: vec![1.0, 2.5], channels: vec![0] },
                    BandGain { lo_hz: 8.0, hi_hz: 15.0, gains: vec![2.5, 1.0], channels: vec![1] },
                    BandGain { lo_hz, hi_hz, gains: vec![g, g], channels: Vec::new() },
                ],
                slope: slopes[d],
            }
        })
        .collect();
    SynthSpec {
        n_domains: 4,
        trials_per_domain: 100,
        n_channels: 2,
        n_samples: 256,
        fs_hz: 250.0,
        n_classes: 2,
        class_patterns: antipodal_patterns(&[(20, 0), (20, 1)]),
        domain_profiles,
        pattern_amplitude: 1.0,
        background_amplitude: 1.0,
        amplitude_jitter: 0.5,
        noise_sigma: 0.5,
        seed: 0,
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.n_domains == 0 || self.trials_per_domain == 0 || self.n_channels == 0 {
            return bad("domain, trial and channel counts must be positive".into());
        }
        if self.n_samples < 4 {
            return bad(format!("need at least 4 samples, got {}", self.n_samples));
        }
        if !(self.fs_hz.is_finite() && self.fs_hz > 0.0) {
            return bad(format!("sampling rate must be positive, got {}", self.fs_hz));
        }
        if self.n_classes < 2 || self.class_patterns.len() != self.n_classes {
            return bad(format!(
                "{} class patterns for {} classes (need >= 2)",
                self.class_patterns.len(),
                self.n_classes
            ));
        }
        if self.domain_profiles.len() != self.n_domains {
            return bad(format!(
                "{} domain profiles for {} domains",
                self.domain_profiles.len(),
                self.n_domains
            ));
        }
        for (name, v) in [
            ("pattern_amplitude", self.pattern_amplitude),
            ("background_amplitude", self.background_amplitude),
            ("noise_sigma", self.noise_sigma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.amplitude_jitter) {
            return bad(format!("amplitude_jitter must lie in [0, 1), got {}", self.amplitude_jitter));
        }
        let half = self.n_samples / 2;
        for (c, p) in self.class_patterns.iter().enumerate() {
            if p.components.is_empty() {
                return bad(format!("class {c} has an empty pattern"));
            }
            for (i, comp) in p.components.iter().enumerate() {
                if comp.bin == 0 || comp.bin >= half {
                    return bad(format!("class {c} bin {} outside (0, {half})", comp.bin));
                }
                if comp.channel >= self.n_channels {
                    return bad(format!("class {c} channel {} out of range", comp.channel));
                }
                if !(comp.offset > -PI && comp.offset <= PI) {
                    return bad(format!("class {c} offset {} outside (-pi, pi]", comp.offset));
                }
                if p.components[..i].iter().any(|o| (o.bin, o.channel) == (comp.bin, comp.channel)) {
                    return bad(format!("class {c} repeats bin {} on channel {}", comp.bin, comp.channel));
                }
            }
        }
        for a in 0..self.n_classes {
            for b in a + 1..self.n_classes {
                if same_pattern(&self.class_patterns[a], &self.class_patterns[b]) {
                    return bad(format!("classes {a} and {b} have identical phase patterns"));
                }
            }
        }
        for (d, prof) in self.domain_profiles.iter().enumerate() {
            if !prof.slope.is_finite() {
                return bad(format!("domain {d} slope is not finite"));
            }
            for band in &prof.bands {
                if band.gains.len() != self.n_classes {
                    return bad(format!("domain {d} band gains need one value per class"));
                }
                if band.gains.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
                    return bad(format!("domain {d} band gains must be finite and >= 0"));
                }
                if !(band.lo_hz <= band.hi_hz) {
                    return bad(format!("domain {d} band [{}, {}] is empty", band.lo_hz, band.hi_hz));
                }
                if band.channels.iter().any(|&c| c >= self.n_channels) {
                    return bad(format!("domain {d} band names a channel out of range"));
                }
            }
        }
        Ok(())
    }

    /// Amplitude envelope of domain `d` for class `c` at bin `k` on `channel`.
    pub fn profile(&self, d: usize, c: usize, channel: usize, k: usize) -> f64 {
        let f = fourier::bin_frequency(k, self.n_samples, self.fs_hz);
        let prof = &self.domain_profiles[d];
        let mut g = (f / 10.0).powf(-prof.slope);
        for band in &prof.bands {
            let on_channel = band.channels.is_empty() || band.channels.contains(&channel);
            if on_channel && f >= band.lo_hz && f <= band.hi_hz {
                g *= band.gains[c];
            }
        }
        g
    }

    /// Bins that carry a class pattern on `channel`, for any class.
    fn pattern_bins(&self, channel: usize) -> Vec<usize> {
        let mut bins: Vec<usize> = self
            .class_patterns
            .iter()
            .flat_map(|p| p.components.iter())
            .filter(|c| c.channel == channel)
            .map(|c| c.bin)
            .collect();
        bins.sort_unstable();
        bins.dedup();
        bins
    }

    pub fn domain_id(d: usize) -> String {
        format!("dom{d}")
    }
}

fn same_pattern(a: &ClassPattern, b: &ClassPattern) -> bool {
    let key = |p: &ClassPattern| {
        let mut v: Vec<(usize, usize, u64)> =
            p.components.iter().map(|c| (c.bin, c.channel, c.offset.to_bits())).collect();
        v.sort_unstable();
        v
    };
    key(a) == key(b)
}

/// One dataset per domain, labels balanced and interleaved.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<Vec<DomainDataset>> {
    spec.validate()?;
    let (n, m) = (spec.n_channels, spec.n_samples);
    let half = m / 2;
    let pattern_bins: Vec<Vec<usize>> = (0..n).map(|c| spec.pattern_bins(c)).collect();
    (0..spec.n_domains)
        .map(|d| {
            let trials = (0..spec.trials_per_domain)
                .map(|i| {
                    let label = i % spec.n_classes;
                    let mut rng = rng::stream(spec.seed, "synth", &[d as u64, i as u64]);
                    let channels = (0..n)
                        .map(|ch| {
                            let mut amplitude = vec![0.0; m];
                            let mut phase = vec![0.0; m];
                            for k in 1..=half {
                                if pattern_bins[ch].binary_search(&k).is_ok() {
                                    continue;
                                }
                                let jitter = 1.0 + spec.amplitude_jitter * rng.gen_range(-1.0..1.0);
                                let a = spec.background_amplitude * spec.profile(d, label, ch, k) * jitter;
                                let p = if k == half && m % 2 == 0 {
                                    // Nyquist must be real.
                                    0.0
                                } else {
                                    rng.gen_range(-PI..PI)
                                };
                                set_bin(&mut amplitude, &mut phase, k, a, p);
                            }
                            for comp in spec.class_patterns[label].components.iter().filter(|c| c.channel == ch) {
                                let a = spec.pattern_amplitude * spec.profile(d, label, ch, comp.bin);
                                set_bin(&mut amplitude, &mut phase, comp.bin, a, comp.offset);
                            }
                            let mut x = fourier::idft(&ChannelSpectrum { amplitude, phase })?;
                            if spec.noise_sigma > 0.0 {
                                for v in &mut x {
                                    *v += spec.noise_sigma * rng.sample::<f64, _>(StandardNormal);
                                }
                            }
                            Ok(x)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok((TrialTensor::from_channels(channels)?, label))
                })
                .collect::<Result<Vec<_>>>()?;
            DomainDataset::new(SynthSpec::domain_id(d), spec.fs_hz, (n, m), spec.n_classes, trials)
        })
        .collect()
}

/// A sinusoid `a·cos(2πkt/m + p)` occupies bins `k` and `m − k` with
/// magnitude `a·m/2`.
fn set_bin(amplitude: &mut [f64], phase: &mut [f64], k: usize, a: f64, p: f64) {
    let m = amplitude.len();
    let mag = a * m as f64 / 2.0;
    if 2 * k == m {
        amplitude[k] = 2.0 * mag;
        phase[k] = p;
        return;
    }
    amplitude[k] = mag;
    phase[k] = p;
    amplitude[m - k] = mag;
    phase[m - k] = -p;
}
